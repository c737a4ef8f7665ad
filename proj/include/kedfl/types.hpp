#ifndef KEDFL_TYPES_HPP
#define KEDFL_TYPES_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace kedfl {

using cplx = std::complex<double>;

// Error taxonomy; the CLI maps these onto its exit-code contract
// (2 input, 3 validation, 4 divergence, 5 capability).
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct schema_error : error {
    using error::error;
};
struct validation_error : error {
    using error::error;
};
struct convergence_error : error {
    using error::error;
};
struct capability_error : error {
    using error::error;
};

// Diffraction engine family. "additive" is not an engine: it is a separate
// operation that sums single-body attenuations of the chosen family.
enum class Engine { mbm, pmbm };

/// Complex field ratio E/E0 with the quadrature error estimate attached.
struct FieldRatio {
    cplx value{1.0, 0.0};
    double err_estimate = 0.0;
};

struct PsiResult {
    cplx value{0.0, 0.0};
    double err = 0.0;
};

/// Controls for the oscillatory-integral engines.
struct QuadratureSpec {
    double rel_tol = 1e-4;          // refinement stop: change below this
    int max_panels_per_dim = 4096;  // refinement budget per dimension
    double phase_step = std::numbers::pi / 4.0;  // target phase advance per node, <= pi/2
};

// |E/E0| is floored at 1e-9 before taking the log; deeper shadows are
// below the model's fidelity and reported as saturated.
inline constexpr double saturation_db = 180.0;
inline constexpr double saturation_floor = 1e-9;

/// Extra attenuation in dB relative to free space: -10*log10(|E/E0|^2).
inline double attenuation_db(cplx field_ratio)
{
    const double mag = std::abs(field_ratio);
    if (mag < saturation_floor)
        return saturation_db;
    return -20.0 * std::log10(mag) + 0.0;  // +0.0 normalizes the -0 at mag == 1
}

inline double attenuation_db(const FieldRatio& ratio)
{
    return attenuation_db(ratio.value);
}

}  // namespace kedfl

#endif
