#include "condcal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "condcal/qr.hpp"
#include "condcal/rng.hpp"

namespace condcal {

namespace {

void check_sim_spec(const SimSpec& spec) {
    if (spec.n < 1) throw InvalidInput("simulation needs at least one calibration row");
    if (spec.test_n < 0) throw InvalidInput("negative test size");
    if (spec.d < 1) throw InvalidInput("simulation needs at least one covariate");
    if (spec.design == SimDesign::romano_1d && spec.d != 1)
        throw InvalidInput("romano-1d design is one-dimensional");
}

// Streams are split by role and by calibration/test so that changing n never
// shifts the test draws.
void fill_gaussian(const CounterRng& rng, uint64_t sx, uint64_t se, const Vector& w, Matrix& x,
                   Vector& y, bool null_response) {
    const int rows = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < d; ++j)
            x(i, j) = rng.normal(sx, static_cast<uint64_t>(i) * d + j);
        const double eps = rng.normal(se, i);
        y(i) = null_response ? eps : Vector(x.row(i)).dot(w) + eps;
    }
}

void fill_romano(const CounterRng& rng, uint64_t sx, uint64_t se, Matrix& x, Vector& y) {
    for (int i = 0; i < x.rows(); ++i) {
        const double xi = rng.uniform(sx, i, 0.0, 5.0);
        const double eps = rng.normal(se, i);
        x(i, 0) = xi;
        const double sxi = std::sin(xi);
        y(i) = sxi * sxi + (0.05 + 0.15 * xi) * eps;
    }
}

}  // namespace

SimData simulate(const SimSpec& spec) {
    check_sim_spec(spec);
    CounterRng rng(spec.seed);

    SimData data;
    data.x_calib.resize(spec.n, spec.d);
    data.y_calib.resize(spec.n);
    data.x_test.resize(spec.test_n, spec.d);
    data.y_test.resize(spec.test_n);

    const uint64_t sx = fnv1a64("sim-x");
    const uint64_t se = fnv1a64("sim-eps");
    const uint64_t sxt = fnv1a64("sim-x-test");
    const uint64_t set = fnv1a64("sim-eps-test");

    switch (spec.design) {
        case SimDesign::gaussian_linear:
        case SimDesign::independent_null: {
            Vector w = Vector::Zero(spec.d);
            if (spec.design == SimDesign::gaussian_linear) {
                const uint64_t sw = fnv1a64("sim-w");
                for (int j = 0; j < spec.d; ++j) w(j) = rng.normal(sw, j);
                const double norm = w.norm();
                if (norm < 1e-12) {
                    w.setZero();
                    w(0) = 1.0;
                } else {
                    w /= norm;
                }
            }
            const bool null_resp = spec.design == SimDesign::independent_null;
            fill_gaussian(rng, sx, se, w, data.x_calib, data.y_calib, null_resp);
            fill_gaussian(rng, sxt, set, w, data.x_test, data.y_test, null_resp);
            break;
        }
        case SimDesign::romano_1d:
            fill_romano(rng, sx, se, data.x_calib, data.y_calib);
            fill_romano(rng, sxt, set, data.x_test, data.y_test);
            break;
    }
    return data;
}

bool interval_covers(const PredictionInterval& iv, const ScoreFunction& sf, const Vector& x,
                     const PredictorOutputs& out, double y) {
    if (iv.empty) return false;
    if (sf.kind == ScoreKind::aps_classification) {
        const int label = static_cast<int>(std::llround(y));
        return std::find(iv.labels.begin(), iv.labels.end(), label) != iv.labels.end();
    }
    const double s = evaluate_score(sf, x, out, y);
    return s >= iv.s_lo && s <= iv.s_hi;
}

double interval_length(const PredictionInterval& iv) {
    if (iv.empty) return 0.0;
    if (!iv.labels.empty()) return static_cast<double>(iv.labels.size());
    if (iv.y_invertible) return iv.y_hi - iv.y_lo;
    return iv.s_hi - iv.s_lo;
}

std::pair<double, double> coverage_under_tilt(const Vector& tilt_values,
                                              const std::vector<bool>& covered) {
    const int n = static_cast<int>(tilt_values.size());
    if (n == 0 || static_cast<size_t>(n) != covered.size())
        throw InvalidInput("tilt weights and coverage indicators must have equal nonzero length");
    if ((tilt_values.array() < 0.0).any())
        throw InvalidInput("tilt weights must be nonnegative");
    const double total = tilt_values.sum();
    if (!(total > 0.0)) throw InvalidInput("tilt has zero total weight");

    double hits = 0.0;
    for (int i = 0; i < n; ++i)
        if (covered[i]) hits += tilt_values(i);
    const double p = hits / total;

    // Ratio-estimator variance: each point contributes f_i (1{cover} - p).
    double ss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = tilt_values(i) * ((covered[i] ? 1.0 : 0.0) - p);
        ss += r * r;
    }
    return {p, std::sqrt(ss) / total};
}

double effective_sample_size(const Vector& tilt_values) {
    if (tilt_values.size() == 0) throw InvalidInput("empty tilt weights");
    if ((tilt_values.array() < 0.0).any())
        throw InvalidInput("tilt weights must be nonnegative");
    const double total = tilt_values.sum();
    if (!(total > 0.0)) throw InvalidInput("tilt has zero total weight");
    return total * total / tilt_values.squaredNorm();
}

Vector baseline_vanilla_qr(const CalibrationSet& calib, const BasisSpec& basis, double alpha,
                           const Matrix& x_test) {
    calib.validate();
    if (x_test.cols() != calib.x.cols())
        throw InvalidInput("test covariate width does not match calibration set");
    PinballProblem p;
    p.phi = evaluate_basis(basis, calib.x);
    p.s = calib.s;
    p.alpha = alpha;
    QrFit fit = solve_linear_qr(p);
    return evaluate_basis(basis, x_test) * fit.beta;
}

CoverageReport build_report(const Matrix& phi_test, const std::vector<bool>& covered,
                            const Vector& lengths, double alpha,
                            const std::map<std::string, Vector>& tilts,
                            const std::map<std::string, Vector>& groups) {
    const int t = static_cast<int>(covered.size());
    if (t == 0) throw InvalidInput("report needs at least one test point");
    if (phi_test.rows() != t || lengths.size() != t)
        throw InvalidInput("report inputs must have one row per test point");

    CoverageReport rep;
    int hits = 0;
    for (bool c : covered) hits += c ? 1 : 0;
    rep.marginal = static_cast<double>(hits) / t;
    rep.mean_length = lengths.mean();

    for (const auto& [name, f] : tilts) {
        if (f.size() != t) throw InvalidInput("tilt '" + name + "' length mismatch");
        auto [cov, se] = coverage_under_tilt(f, covered);
        rep.per_tilt[name] = TiltStat{cov, se};
    }

    for (const auto& [name, g] : groups) {
        if (g.size() != t) throw InvalidInput("group '" + name + "' length mismatch");
        int count = 0, in_hits = 0;
        for (int i = 0; i < t; ++i) {
            if (g(i) > 0.5) {
                ++count;
                if (covered[i]) ++in_hits;
            }
        }
        GroupStat gs;
        gs.count = count;
        gs.coverage = count > 0 ? static_cast<double>(in_hits) / count : 0.0;
        rep.per_group[name] = gs;
    }

    double worst = 0.0;
    for (int j = 0; j < phi_test.cols(); ++j) {
        double num = 0.0, den = 0.0;
        for (int i = 0; i < t; ++i) {
            const double miss = covered[i] ? 0.0 : 1.0;
            num += phi_test(i, j) * (miss - alpha);
            den += std::abs(phi_test(i, j));
        }
        if (den > 0.0) worst = std::max(worst, std::abs(num / den));
    }
    rep.worst_deviation = worst;
    return rep;
}

SimRunResult run_simulation(const SimRunConfig& cfg) {
    if (cfg.trials < 1) throw InvalidInput("simulation needs at least one trial");
    if (cfg.trial_offset < 0) throw InvalidInput("negative trial offset");
    if (cfg.sim.test_n < 1) throw InvalidInput("simulation needs at least one test point");
    check_sim_spec(cfg.sim);

    BasisSpec basis;
    if (cfg.basis) {
        basis = *cfg.basis;
    } else {
        basis.columns.push_back({BasisColKind::intercept, 0, {}, {}});
        for (int j = 0; j < cfg.sim.d; ++j)
            basis.columns.push_back({BasisColKind::raw_feature, j, {}, {}});
    }
    const int d = basis.d();

    ScoreFunction sf;
    sf.kind = ScoreKind::absolute_residual;
    PredictorOutputs out;
    out.mu_hat = 0.0;

    CounterRng master(cfg.sim.seed);
    const uint64_t trial_stream = fnv1a64("trial-seed");

    SimRunResult res;
    res.per_column.assign(d, ColumnStat{});
    Vector col_miss = Vector::Zero(d);  // sum Z_ij (miss_i - alpha)
    Vector col_abs = Vector::Zero(d);   // sum |Z_ij|
    Vector col_hit = Vector::Zero(d);   // sum |Z_ij| 1{covered_i}
    double total_cov = 0.0, total_len = 0.0;

    for (int t = 0; t < cfg.trials; ++t) {
        SimSpec trial_spec = cfg.sim;
        trial_spec.seed =
            master.bits(trial_stream, static_cast<uint64_t>(cfg.trial_offset + t));
        const SimData data = simulate(trial_spec);

        const int n = cfg.sim.n;
        const int tn = cfg.sim.test_n;
        CalibrationSet calib;
        calib.x = data.x_calib;
        calib.s.resize(n);
        for (int i = 0; i < n; ++i)
            calib.s(i) = evaluate_score(sf, Vector(data.x_calib.row(i)), out, data.y_calib(i));

        Vector vanilla_thr;
        std::optional<CalibratedModel> model;
        if (cfg.vanilla_baseline) {
            vanilla_thr = baseline_vanilla_qr(calib, basis, cfg.alpha, data.x_test);
        } else {
            model = fit(calib, basis, std::nullopt, cfg.alpha);
        }

        const Matrix phi_test = evaluate_basis(basis, data.x_test);
        double trial_cov = 0.0, trial_len = 0.0;
        for (int i = 0; i < tn; ++i) {
            const Vector x_i(data.x_test.row(i));
            PredictionInterval iv;
            if (cfg.vanilla_baseline) {
                iv = realize_interval(sf, x_i, out, -kInf, vanilla_thr(i), false);
            } else {
                iv = predict_set(*model, x_i, sf, out, cfg.variant, trial_spec.seed,
                                 static_cast<uint64_t>(i))
                         .set;
            }
            const bool cov = interval_covers(iv, sf, x_i, out, data.y_test(i));
            const double len = interval_length(iv);
            trial_cov += cov ? 1.0 : 0.0;
            trial_len += len;

            const double miss = cov ? 0.0 : 1.0;
            for (int j = 0; j < d; ++j) {
                const double z = phi_test(i, j);
                col_miss(j) += z * (miss - cfg.alpha);
                col_abs(j) += std::abs(z);
                if (cov) col_hit(j) += std::abs(z);
            }
        }
        res.trial_coverage.push_back(trial_cov / tn);
        res.trial_length.push_back(trial_len / tn);
        total_cov += trial_cov;
        total_len += trial_len;
    }

    res.total_points = static_cast<long>(cfg.trials) * cfg.sim.test_n;
    res.marginal = total_cov / res.total_points;
    res.mean_length = total_len / res.total_points;
    for (int j = 0; j < d; ++j) {
        ColumnStat cs;
        cs.weight = col_abs(j) / res.total_points;
        if (col_abs(j) > 0.0) {
            cs.coverage = col_hit(j) / col_abs(j);
            cs.deviation = col_miss(j) / col_abs(j);
        }
        res.per_column[j] = cs;
        res.worst_deviation = std::max(res.worst_deviation, std::abs(cs.deviation));
    }
    return res;
}

}  // namespace condcal
