#include <algorithm>
#include <cmath>

#include "condcal/calibrate.hpp"
#include "condcal/dual_simplex.hpp"
#include "condcal/pinball.hpp"

namespace condcal {

namespace {

constexpr double kBracketLimit = 1e30;

int count_interpolated(const Vector& s, const Vector& fitted) {
    int c = 0;
    for (int i = 0; i < s.size(); ++i)
        if (std::abs(s(i) - fitted(i)) <= 1e-9 * (1.0 + std::abs(s(i)))) ++c;
    return c;
}

void check_cutoff(double cutoff, double alpha) {
    if (!(cutoff <= 1.0 - alpha) || !std::isfinite(cutoff))
        throw InvalidInput("cutoff must lie in (-alpha, 1-alpha]");
}

}  // namespace

const char* threshold_method_name(ThresholdMethod m) {
    switch (m) {
        case ThresholdMethod::sensitivity: return "sensitivity";
        case ThresholdMethod::binary_search: return "binary-search";
        case ThresholdMethod::conservative: return "conservative";
    }
    return "?";
}

double CalibratedModel::base_fit_at(const Vector& x_new) const {
    Vector phi_new = evaluate_basis(basis, x_new);
    switch (model_class()) {
        case ModelClass::linear:
            return phi_new.dot(base_linear->beta);
        case ModelClass::kernel: {
            if (!kernel->evaluable())
                throw InvalidInput("custom Gram kernels cannot score new covariate rows");
            double g = phi_new.dot(base_kernel->beta);
            for (int i = 0; i < n(); ++i)
                g += base_kernel->gamma(i) * kernel_eval(*kernel, calib.x.row(i), x_new);
            return g;
        }
        case ModelClass::lipschitz: {
            double l = base_lip->lip_value;
            double lo = -kInf, hi = kInf;
            for (int i = 0; i < n(); ++i) {
                double dist = (calib.x.row(i).transpose() - x_new).norm();
                lo = std::max(lo, base_lip->gamma(i) - l * dist);
                hi = std::min(hi, base_lip->gamma(i) + l * dist);
            }
            return 0.5 * (lo + hi) + phi_new.dot(base_lip->beta);
        }
    }
    throw SolverFailure("unreachable model class");
}

CalibratedModel fit(const CalibrationSet& calib, const BasisSpec& basis,
                    const std::optional<KernelSpec>& kernel, double alpha) {
    calib.validate();
    check_alpha(alpha);
    if (basis.d() < 1) throw InvalidInput("basis must have at least one column");

    CalibratedModel m;
    m.calib = calib;
    m.basis = basis;
    m.kernel = kernel;
    m.alpha = alpha;
    m.phi = evaluate_basis(basis, calib.x);

    const int n = calib.n();
    if (kernel) {
        kernel->validate();
        m.gram_n = gram(*kernel, calib.x);
        // Base fit at per-row weight 1/(n+1): scale the ridge so the n-row
        // solver objective matches, leaving gamma in augmented units.
        double lam_eff = kernel->lambda * (n + 1.0) / n;
        m.base_kernel = solve_kernel_qr(m.gram_n, m.phi, calib.s, alpha, lam_eff);
    } else {
        PinballProblem p;
        p.phi = m.phi;
        p.s = calib.s;
        p.alpha = alpha;
        m.base_linear = solve_linear_qr(p);
    }
    return m;
}

CalibratedModel fit_lipschitz(const CalibrationSet& calib, const BasisSpec& basis, double lambda,
                              double alpha) {
    calib.validate();
    check_alpha(alpha);
    if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");

    CalibratedModel m;
    m.calib = calib;
    m.basis = basis;
    m.lip_lambda = lambda;
    m.alpha = alpha;
    m.phi = evaluate_basis(basis, calib.x);
    const int n = calib.n();
    m.base_lip = solve_lipschitz_qr(calib.x, m.phi, calib.s, alpha, lambda * (n + 1.0) / n);
    return m;
}

AugmentedSolver::AugmentedSolver(const CalibratedModel& m, const Vector& x_new) : model_(&m) {
    if (!all_finite(x_new) || x_new.size() != m.calib.p())
        throw InvalidInput("test covariate row has the wrong shape or non-finite entries");
    const int n = m.n();
    const int d = m.d();
    phi_aug_ = Matrix(n + 1, d);
    phi_aug_.topRows(n) = m.phi;
    phi_aug_.row(n) = evaluate_basis(m.basis, x_new).transpose();
    s_aug_ = Vector(n + 1);
    s_aug_.head(n) = m.calib.s;
    s_aug_(n) = 0.0;

    if (m.model_class() == ModelClass::kernel) {
        if (!m.kernel->evaluable())
            throw InvalidInput("custom Gram kernels cannot score new covariate rows");
        k_aug_ = Matrix(n + 1, n + 1);
        k_aug_.topLeftCorner(n, n) = m.gram_n;
        for (int i = 0; i < n; ++i) {
            double v = kernel_eval(*m.kernel, m.calib.x.row(i), x_new);
            k_aug_(i, n) = v;
            k_aug_(n, i) = v;
        }
        k_aug_(n, n) = kernel_eval(*m.kernel, x_new, x_new) + kGramRidgeFloor;
    } else if (m.model_class() == ModelClass::lipschitz) {
        x_aug_ = Matrix(n + 1, m.calib.p());
        x_aug_.topRows(n) = m.calib.x;
        x_aug_.row(n) = x_new.transpose();
    }
}

void AugmentedSolver::solve(double s_imputed) {
    if (!std::isfinite(s_imputed)) throw InvalidInput("imputed score must be finite");
    const CalibratedModel& m = *model_;
    const int n = m.n();
    s_aug_(n) = s_imputed;
    Vector fitted;
    switch (m.model_class()) {
        case ModelClass::linear: {
            DualLpResult lp = solve_quantile_dual(phi_aug_, s_aug_, m.alpha,
                                                  Vector::Ones(n + 1));
            eta_test_ = lp.eta(n);
            fitted = phi_aug_ * lp.beta;
            break;
        }
        case ModelClass::kernel: {
            KernelQrFit f = solve_kernel_qr(k_aug_, phi_aug_, s_aug_, m.alpha,
                                            m.kernel->lambda, &warm_);
            eta_test_ = f.eta(n);
            fitted = k_aug_ * f.gamma + phi_aug_ * f.beta;
            break;
        }
        case ModelClass::lipschitz: {
            LipschitzQrFit f = solve_lipschitz_qr(x_aug_, phi_aug_, s_aug_, m.alpha,
                                                  *m.lip_lambda, 2000, &warm_);
            eta_test_ = f.eta(n);
            fitted = f.gamma + phi_aug_ * f.beta;
            break;
        }
    }
    fitted_test_ = fitted(n);
    interp_count_ = count_interpolated(s_aug_, fitted);
}

double AugmentedSolver::eta_at(double s_imputed) {
    solve(s_imputed);
    return eta_test_;
}

double AugmentedSolver::fitted_at_test(double s_imputed) {
    solve(s_imputed);
    return fitted_test_;
}

double eta_at(const CalibratedModel& m, const Vector& x_new, double s_imputed) {
    AugmentedSolver solver(m, x_new);
    return solver.eta_at(s_imputed);
}

namespace {

// Bracket-and-bisect on the monotone map S -> eta(S). lower_side selects
// inf{S : eta > cutoff} instead of sup{S : eta < cutoff}; the two coincide
// except on plateaus where eta equals the cutoff exactly.
ThresholdResult bisect_threshold(const CalibratedModel& m, const Vector& x_new, double cutoff,
                                 double eps, std::optional<double> lo, std::optional<double> hi,
                                 bool lower_side) {
    check_cutoff(cutoff, m.alpha);
    ThresholdResult res;
    res.method = ThresholdMethod::binary_search;
    if (cutoff <= -m.alpha && !lower_side) {
        res.s_star = -kInf;  // the dual coordinate never drops below the box floor
        return res;
    }

    double smax = m.calib.s.cwiseAbs().maxCoeff();
    if (!(eps > 0.0)) eps = 1e-8 * (1.0 + smax);

    AugmentedSolver solver(m, x_new);
    auto above = [&](double s) {
        res.iterations++;
        double e = solver.eta_at(s);
        return lower_side ? e > cutoff : e >= cutoff;
    };

    double b = hi.value_or(std::max(m.calib.s.maxCoeff(), 1.0));
    while (!above(b)) {
        b *= 2.0;
        if (b > kBracketLimit) {
            res.s_star = kInf;
            return res;
        }
    }
    double a = lo.value_or(std::min(m.calib.s.minCoeff(), -1.0));
    if (a >= b) a = std::min(-std::abs(b), -1.0);
    while (above(a)) {
        a *= 2.0;
        if (a < -kBracketLimit) {
            res.s_star = -kInf;  // the dual coordinate clears the cutoff everywhere
            return res;
        }
    }

    while (b - a > eps) {
        double mid = 0.5 * (a + b);
        if (above(mid))
            b = mid;
        else
            a = mid;
    }
    res.s_star = 0.5 * (a + b);
    res.interp_count = solver.last_interp_count();
    return res;
}

}  // namespace

ThresholdResult threshold_binary_search(const CalibratedModel& m, const Vector& x_new,
                                        double cutoff, double eps, std::optional<double> lo,
                                        std::optional<double> hi) {
    return bisect_threshold(m, x_new, cutoff, eps, lo, hi, false);
}

ThresholdResult lower_threshold_binary_search(const CalibratedModel& m, const Vector& x_new,
                                              double cutoff, double eps) {
    return bisect_threshold(m, x_new, cutoff, eps, std::nullopt, std::nullopt, true);
}

ThresholdResult conservative_threshold(const CalibratedModel& m, const Vector& x_new,
                                       double m_upper) {
    if (!std::isfinite(m_upper)) throw InvalidInput("score upper bound must be finite");
    AugmentedSolver solver(m, x_new);
    ThresholdResult res;
    res.method = ThresholdMethod::conservative;
    res.s_star = solver.fitted_at_test(m_upper);
    res.interp_count = solver.last_interp_count();
    res.iterations = 1;
    return res;
}

namespace {

PredictionInterval realize_upper(const ScoreFunction& sf, const Vector& x_new,
                                 const PredictorOutputs& out, double s_star) {
    if (s_star == -kInf) {
        PredictionInterval empty;
        empty.s_hi = -kInf;
        empty.empty = true;
        return empty;
    }
    return realize_interval(sf, x_new, out, -kInf, s_star, false);
}

ThresholdResult upper_threshold(const CalibratedModel& m, const Vector& x_new, double cutoff) {
    if (m.model_class() == ModelClass::linear) return threshold_sensitivity(m, x_new, cutoff);
    return threshold_binary_search(m, x_new, cutoff);
}

ThresholdResult lower_threshold(const CalibratedModel& m, const Vector& x_new, double cutoff) {
    if (m.model_class() == ModelClass::linear)
        return lower_threshold_sensitivity(m, x_new, cutoff);
    return lower_threshold_binary_search(m, x_new, cutoff);
}

}  // namespace

PredictionResult predict_set(const CalibratedModel& m, const Vector& x_new,
                             const ScoreFunction& sf, const PredictorOutputs& out,
                             PredictVariant variant, uint64_t seed, uint64_t test_index) {
    double cutoff = 1.0 - m.alpha;
    std::optional<RandomDraw> draw;
    if (variant == PredictVariant::randomized) {
        CounterRng rng(seed);
        uint64_t stream = fnv1a64("predict-u");
        double u = rng.uniform(stream, test_index, -m.alpha, 1.0 - m.alpha);
        draw = RandomDraw{u, seed, stream};
        cutoff = u;
    }

    PredictionResult res;
    res.upper = upper_threshold(m, x_new, cutoff);
    if (draw) res.upper.u = draw->u;
    res.draw_upper = draw;
    res.set = realize_upper(sf, x_new, out, res.upper.s_star);
    return res;
}

PredictionResult predict_two_sided(const CalibratedModel& model_lo,
                                   const CalibratedModel& model_hi, const Vector& x_new,
                                   const ScoreFunction& sf, const PredictorOutputs& out,
                                   PredictVariant variant, uint64_t seed, uint64_t test_index) {
    if (sf.kind != ScoreKind::signed_residual && sf.kind != ScoreKind::identity)
        throw InvalidInput("two-sided sets need a signed-residual or identity score");
    if (std::abs(model_lo.alpha + model_hi.alpha - 1.0) > 1e-9 ||
        model_hi.alpha >= model_lo.alpha)
        throw InvalidInput("two-sided fits must sit at complementary pinball levels");

    // Cutoffs live in each model's own dual box; randomized draws are uniform
    // over those boxes, independently per side.
    double cut_lo = -model_lo.alpha;
    double cut_hi = 1.0 - model_hi.alpha;
    std::optional<RandomDraw> draw_lo, draw_hi;
    if (variant == PredictVariant::randomized) {
        CounterRng rng(seed);
        uint64_t stream_lo = fnv1a64("predict-u-lo");
        uint64_t stream_hi = fnv1a64("predict-u-hi");
        cut_lo = rng.uniform(stream_lo, test_index, -model_lo.alpha, 1.0 - model_lo.alpha);
        cut_hi = rng.uniform(stream_hi, test_index, -model_hi.alpha, 1.0 - model_hi.alpha);
        draw_lo = RandomDraw{cut_lo, seed, stream_lo};
        draw_hi = RandomDraw{cut_hi, seed, stream_hi};
    }

    PredictionResult res;
    res.lower = lower_threshold(model_lo, x_new, cut_lo);
    res.upper = upper_threshold(model_hi, x_new, cut_hi);
    if (draw_lo) res.lower->u = draw_lo->u;
    if (draw_hi) res.upper.u = draw_hi->u;
    res.draw_lower = draw_lo;
    res.draw_upper = draw_hi;

    double s_lo = res.lower->s_star;
    double s_hi = res.upper.s_star;
    if (s_lo > s_hi || s_hi == -kInf) {
        res.set.s_lo = s_lo;
        res.set.s_hi = s_hi;
        res.set.empty = true;
        return res;
    }
    res.set = realize_interval(sf, x_new, out, s_lo, s_hi, true);
    return res;
}

}  // namespace condcal
