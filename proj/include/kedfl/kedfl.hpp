#ifndef KEDFL_KEDFL_HPP
#define KEDFL_KEDFL_HPP

// Body-induced radio-link attenuation: knife-edge diffraction engines
// (exact and paraxial), the physical-statistical RSS layer, EM-equivalent
// size calibration, and a brute-force validation oracle.

#include "kedfl/calibration.hpp"
#include "kedfl/diffraction_full.hpp"
#include "kedfl/diffraction_paraxial.hpp"
#include "kedfl/fresnel.hpp"
#include "kedfl/geometry.hpp"
#include "kedfl/oracle.hpp"
#include "kedfl/parallel.hpp"
#include "kedfl/rng.hpp"
#include "kedfl/statistical.hpp"
#include "kedfl/types.hpp"

#endif
