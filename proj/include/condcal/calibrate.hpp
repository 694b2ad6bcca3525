#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "condcal/basis.hpp"
#include "condcal/kernel.hpp"
#include "condcal/qr.hpp"
#include "condcal/rng.hpp"
#include "condcal/score.hpp"
#include "condcal/types.hpp"

namespace condcal {

enum class ModelClass { linear, kernel, lipschitz };

// Calibration-time state: the n-point base fit is cached with per-row weight
// 1/(n+1) so that appending a test row at its own fitted value leaves the dual
// solution optimal with the new coordinate at zero. That point initializes the
// sensitivity trace and anchors every augmented solve.
struct CalibratedModel {
    CalibrationSet calib;
    BasisSpec basis;
    std::optional<KernelSpec> kernel;
    std::optional<double> lip_lambda;
    double alpha = 0.1;

    Matrix phi;     // n x d cached basis rows
    Matrix gram_n;  // n x n, kernel class only

    std::optional<QrFit> base_linear;
    std::optional<KernelQrFit> base_kernel;
    std::optional<LipschitzQrFit> base_lip;

    ModelClass model_class() const {
        if (kernel) return ModelClass::kernel;
        if (lip_lambda) return ModelClass::lipschitz;
        return ModelClass::linear;
    }
    int n() const { return calib.n(); }
    int d() const { return basis.d(); }

    // Fitted value of the n-point base fit at a new covariate row. For the
    // Lipschitz class this is the midpoint minimal-extension of the fitted
    // offsets, which preserves the realized Lipschitz constant.
    double base_fit_at(const Vector& x_new) const;
};

CalibratedModel fit(const CalibrationSet& calib, const BasisSpec& basis,
                    const std::optional<KernelSpec>& kernel, double alpha);
CalibratedModel fit_lipschitz(const CalibrationSet& calib, const BasisSpec& basis, double lambda,
                              double alpha);

enum class ThresholdMethod { sensitivity, binary_search, conservative };
const char* threshold_method_name(ThresholdMethod m);

struct ThresholdResult {
    double s_star = kInf;
    ThresholdMethod method = ThresholdMethod::sensitivity;
    std::optional<double> u;  // cutoff draw when randomized
    // Breakpoints (imputed score, test dual coordinate) visited by the
    // sensitivity trace; nondecreasing in the dual coordinate along increasing
    // imputed score.
    std::vector<std::pair<double, double>> eta_trace;
    int interp_count = 0;    // rows interpolated by the final fit
    bool fallback = false;   // trace abandoned for binary search
    bool perturbed = false;  // trace restarted from jittered scores
    int iterations = 0;
};

// Workspace for repeated augmented solves at one test point. Regularized
// classes warm-start each solve from the previous one; the constraint data is
// assembled once.
class AugmentedSolver {
  public:
    AugmentedSolver(const CalibratedModel& m, const Vector& x_new);

    // Test-row coordinate of the dual solution with (x_new, s_imputed) appended.
    double eta_at(double s_imputed);
    // Fitted value of the augmented solve at the test point itself.
    double fitted_at_test(double s_imputed);

    int last_interp_count() const { return interp_count_; }
    const CalibratedModel& model() const { return *model_; }

  private:
    void solve(double s_imputed);

    const CalibratedModel* model_;
    Matrix phi_aug_;
    Vector s_aug_;
    Matrix k_aug_;  // kernel class
    Matrix x_aug_;  // lipschitz class
    QpWarmStart warm_;
    double eta_test_ = 0.0;
    double fitted_test_ = 0.0;
    int interp_count_ = 0;
};

double eta_at(const CalibratedModel& m, const Vector& x_new, double s_imputed);

// Threshold of the one-sided set: sup{S : eta(S) < cutoff}, computed by the
// parametric dual trace (pure-LP classes only). cutoff must lie in
// (-alpha, 1-alpha]; a cutoff at the box floor yields -inf (empty set).
ThresholdResult threshold_sensitivity(const CalibratedModel& m, const Vector& x_new,
                                      double cutoff);
// Same threshold by bracketing and bisection; works for every class. eps <= 0
// selects the default 1e-8 * (1 + max |s|).
ThresholdResult threshold_binary_search(const CalibratedModel& m, const Vector& x_new,
                                        double cutoff, double eps = 0.0,
                                        std::optional<double> lo = std::nullopt,
                                        std::optional<double> hi = std::nullopt);

// Lower-threshold counterparts used by two-sided sets: inf{S : eta(S) > cutoff}.
ThresholdResult lower_threshold_sensitivity(const CalibratedModel& m, const Vector& x_new,
                                            double cutoff);
ThresholdResult lower_threshold_binary_search(const CalibratedModel& m, const Vector& x_new,
                                              double cutoff, double eps = 0.0);

// Single augmented fit with the imputed score pinned at m_upper; the resulting
// set contains the exact set intersected with {S <= m_upper}.
ThresholdResult conservative_threshold(const CalibratedModel& m, const Vector& x_new,
                                       double m_upper);

enum class PredictVariant { unrandomized, randomized };

struct RandomDraw {
    double u = 0.0;
    uint64_t seed = 0;
    uint64_t stream = 0;
};

struct PredictionResult {
    PredictionInterval set;
    ThresholdResult upper;
    std::optional<ThresholdResult> lower;  // two-sided only
    std::optional<RandomDraw> draw_upper;
    std::optional<RandomDraw> draw_lower;
};

// One-sided prediction set. Unrandomized uses cutoff 1-alpha; randomized draws
// U ~ Unif([-alpha, 1-alpha]) from the counter stream keyed by
// (seed, test_index) and uses the strict comparison eta < U.
PredictionResult predict_set(const CalibratedModel& m, const Vector& x_new,
                             const ScoreFunction& sf, const PredictorOutputs& out,
                             PredictVariant variant, uint64_t seed, uint64_t test_index);

// Two-sided set from complementary fits: model_lo at pinball level alpha/2
// (library alpha = 1 - alpha/2), model_hi at level 1 - alpha/2 (library alpha
// = alpha/2). Crossing thresholds return an explicit empty set.
PredictionResult predict_two_sided(const CalibratedModel& model_lo,
                                   const CalibratedModel& model_hi, const Vector& x_new,
                                   const ScoreFunction& sf, const PredictorOutputs& out,
                                   PredictVariant variant, uint64_t seed, uint64_t test_index);

}  // namespace condcal
