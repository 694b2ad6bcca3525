#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "condcal/calibrate.hpp"

namespace condcal {

enum class TiltKind { basis_column, kernel_point, gaussian_tilt, custom_table };

// Covariate re-weighting f used to probe coverage under a shifted distribution.
// Only the fields for the active kind are read. Kernel-point and custom-table
// tilts are expansions in the model's own kernel, f = sum_j coef_j K(z_j, .),
// which is exactly the form whose coverage penalty the plug-in estimator can
// read off the fitted dual weights.
struct TiltSpec {
    TiltKind kind = TiltKind::basis_column;
    int column = 0;      // basis-column: index into the model's basis
    Vector x0;           // kernel-point: f = K(x0, .)
    Vector mu;           // gaussian-tilt center
    double sigma = 1.0;  // gaussian-tilt: f(x) = exp(-|x - mu|^2 / (2 sigma^2))
    Vector coef;         // custom-table coefficients c_j
    Matrix points;       // custom-table points z_j, one per row
    bool nonneg = false;  // caller asserts f >= 0
};

// Tilt value f(x). The model supplies the basis (basis-column) or the kernel
// (kernel-point, custom-table); gaussian tilts evaluate standalone.
double tilt_eval(const TiltSpec& tilt, const CalibratedModel& m, const Vector& x);

struct CoverageEstimate {
    double value = 0.0;  // base + penalty_term, deliberately unclamped
    double base = 0.0;   // 1 - alpha
    double penalty_term = 0.0;
    // Scale of the estimator's sampling error, sqrt(d log n / n). A rate, not
    // a calibrated standard error.
    std::optional<double> stderr_hint;

    double clamped() const;
};

// Plug-in estimate of coverage under the tilt for a kernel-class model:
//   1 - alpha - 2 lambda <g_n, f_K> / ((1/n) sum_i |f(X_i)|),
// where g_n is the n-point kernel quantile fit at per-row weight 1/n and
// <g_n, f_K> = sum_i sum_j gamma_i c_j K(X_i, z_j). Tilts in the unpenalized
// linear span have f_K = 0 and report the nominal level exactly. Gaussian
// tilts decompose only when 1/(2 sigma^2) equals the kernel bandwidth.
CoverageEstimate rkhs_coverage_estimate(const CalibratedModel& m, const TiltSpec& tilt);

// Coverage bracket for a Lipschitz-class model under a nonnegative tilt with
// Lipschitz constant lip_f and positive mean mean_f:
//   1 - alpha -+ lambda * lip_f / mean_f.
// Values are raw (they can leave [0,1]); the interpolation error is reported
// separately by interp_diagnostic rather than folded in.
std::pair<double, double> lipschitz_coverage_bounds(const CalibratedModel& m,
                                                    const TiltSpec& tilt, double lip_f,
                                                    double mean_f);

// Empirical surrogate for the interpolation error term:
//   (1/n) sum_i |f(X_i)| 1{ |s_i - fitted_i| <= 1e-9 (1 + |s_i|) },
// evaluated on the model's cached n-point base fit.
double interp_diagnostic(const CalibratedModel& m, const TiltSpec& tilt);

// Picks the lambda in the grid minimizing out-of-fold mean pinball loss of the
// kernel quantile fit; folds are round-robin (row i in fold i mod folds) and
// exact ties go to the smallest lambda.
double cross_validate_lambda(const CalibrationSet& calib, const BasisSpec& basis,
                             const KernelSpec& kernel, const std::vector<double>& lambda_grid,
                             int folds, double alpha);

}  // namespace condcal
