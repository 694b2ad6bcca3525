// Command-line surface: calibrate / predict / estimate / simulate workflows.
// Exit codes: 0 success, 2 invalid input, 3 solver failure, 4 failed
// simulation assertion.

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "io.hpp"

namespace {

using namespace condcal;
using io::json;

std::string num(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

const char* class_name(ModelClass c) {
    switch (c) {
        case ModelClass::linear: return "linear";
        case ModelClass::kernel: return "kernel";
        case ModelClass::lipschitz: return "lipschitz";
    }
    return "unknown";
}

// Set bounds for the CSV: the y-interval when the score inverts, score bounds
// otherwise; an empty set is written as the reversed pair (inf, -inf).
std::pair<std::string, std::string> set_bounds(const PredictionInterval& iv) {
    if (iv.empty) return {"inf", "-inf"};
    if (iv.y_invertible) return {num(iv.y_lo), num(iv.y_hi)};
    return {num(iv.s_lo), num(iv.s_hi)};
}

std::string join_labels(const std::vector<int>& labels) {
    std::string out;
    for (size_t i = 0; i < labels.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(labels[i]);
    }
    return out;
}

PredictorOutputs row_outputs(const io::CsvTable& t, const Matrix& pi, int mu_col, int row) {
    PredictorOutputs out;
    if (mu_col >= 0) out.mu_hat = t.values(row, mu_col);
    if (pi.cols() > 0) out.pi = pi.row(row);
    return out;
}

int env_threads() {
    const char* v = std::getenv("CONDCAL_THREADS");
    if (!v || !*v) return 1;
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1 || n > 512)
        throw InvalidInput("CONDCAL_THREADS must be a positive integer");
    return static_cast<int>(n);
}

// ---------------------------------------------------------------- calibrate

struct CalibrateArgs {
    std::string calib_path, basis_path, kernel_path, out_path;
    double alpha = 0.1;
    double lipschitz = 0.0;
    bool has_lipschitz = false;
    std::string score = "identity";
};

int cmd_calibrate(const CalibrateArgs& a) {
    const io::CsvTable t = io::read_csv(a.calib_path);
    const Matrix x = io::feature_matrix(t);
    const int n = t.rows();

    const ScoreKind kind = score_kind_from_name(a.score);
    if (kind == ScoreKind::custom)
        throw InvalidInput("custom scores need a callable and are library-only");

    Vector s;
    if (t.col("score") >= 0) {
        s = t.column("score");
    } else if (t.col("y") >= 0) {
        const Vector y = t.column("y");
        const Matrix pi = io::pi_matrix(t);
        const int mu_col = t.col("mu_hat");
        if ((kind == ScoreKind::absolute_residual || kind == ScoreKind::signed_residual) &&
            mu_col < 0)
            throw InvalidInput("score kind " + a.score + " needs a mu_hat column");
        if (kind == ScoreKind::aps_classification && pi.cols() == 0)
            throw InvalidInput("score kind " + a.score + " needs pi_1..pi_k columns");
        ScoreFunction sf;
        sf.kind = kind;
        s.resize(n);
        for (int i = 0; i < n; ++i)
            s(i) = evaluate_score(sf, Vector(x.row(i)), row_outputs(t, pi, mu_col, i), y(i));
    } else {
        std::string cols;
        for (const std::string& name : t.names) cols += (cols.empty() ? "" : ", ") + name;
        throw InvalidInput(a.calib_path +
                           ": needs a 'score' column or a 'y' column; found only: " + cols);
    }

    io::ModelArtifact art;
    art.alpha = a.alpha;
    art.score = kind;
    art.basis = io::basis_from_json(io::read_json_file(a.basis_path));
    if (!a.kernel_path.empty() && a.has_lipschitz)
        throw InvalidInput("--kernel and --lipschitz are mutually exclusive");
    if (!a.kernel_path.empty())
        art.kernel = io::kernel_from_json(io::read_json_file(a.kernel_path));
    if (a.has_lipschitz) art.lip_lambda = a.lipschitz;
    art.calib.x = x;
    art.calib.s = s;

    const CalibratedModel model = io::refit_model(art);
    art.digest = io::config_digest(art);
    io::write_file_atomic(a.out_path, io::model_to_bytes(art, model));
    std::cout << "calibrated " << class_name(model.model_class()) << " model: n=" << model.n()
              << " d=" << model.d() << " alpha=" << a.alpha << " digest=" << art.digest
              << " -> " << a.out_path << "\n";
    return 0;
}

// ------------------------------------------------------------------ predict

struct PredictArgs {
    std::string model_path, test_path, out_path;
    std::string method = "sensitivity";
    bool method_given = false;
    double m_upper = 0.0;
    bool has_m_upper = false;
    double eps = 0.0;
    bool has_eps = false;
    bool randomize = false;
    uint64_t seed = 0;
    bool two_sided = false;
};

int cmd_predict(const PredictArgs& a) {
    if (a.method != "sensitivity" && a.method != "binary" && a.method != "conservative")
        throw InvalidInput("--method must be sensitivity, binary, or conservative");
    if (a.method == "conservative" && !a.has_m_upper)
        throw InvalidInput("--method conservative needs --m-upper");
    if (a.method != "conservative" && a.has_m_upper)
        throw InvalidInput("--m-upper applies only to --method conservative");
    if (a.method == "conservative" && a.randomize)
        throw InvalidInput("--method conservative does not support --randomize");
    if (a.has_eps && a.method != "binary")
        throw InvalidInput("--eps applies only to --method binary");
    if (a.two_sided && a.method_given)
        throw InvalidInput("--two-sided picks the threshold method per model class; omit --method");

    const io::ModelArtifact art = io::model_from_bytes(io::read_file(a.model_path));
    const io::CsvTable t = io::read_csv(a.test_path);
    const Matrix x = io::feature_matrix(t);
    if (x.cols() != art.calib.x.cols())
        throw InvalidInput("test covariates have p=" + std::to_string(x.cols()) +
                           " columns, model was calibrated with p=" +
                           std::to_string(art.calib.x.cols()));
    const Matrix pi = io::pi_matrix(t);
    const int mu_col = t.col("mu_hat");
    if ((art.score == ScoreKind::absolute_residual || art.score == ScoreKind::signed_residual) &&
        mu_col < 0)
        throw InvalidInput("test CSV needs a mu_hat column for residual scores");
    if (art.score == ScoreKind::aps_classification && pi.cols() == 0)
        throw InvalidInput("test CSV needs pi_1..pi_k columns for aps-classification");

    ScoreFunction sf;
    sf.kind = art.score;
    const PredictVariant variant =
        a.randomize ? PredictVariant::randomized : PredictVariant::unrandomized;
    const bool aps = art.score == ScoreKind::aps_classification;

    std::ostringstream csv;
    csv << "# condcal predict model_digest=" << art.digest << " seed=" << a.seed << "\n";

    if (a.two_sided) {
        auto side_fit = [&](double lib_alpha) {
            return art.lip_lambda
                       ? fit_lipschitz(art.calib, art.basis, *art.lip_lambda, lib_alpha)
                       : fit(art.calib, art.basis, art.kernel, lib_alpha);
        };
        const CalibratedModel lo = side_fit(1.0 - art.alpha / 2.0);
        const CalibratedModel hi = side_fit(art.alpha / 2.0);
        csv << "test_index,s_lo,s_hi,set_lower,set_upper,method,u_draw_lo,u_draw_hi\n";
        for (int i = 0; i < t.rows(); ++i) {
            const Vector xi(x.row(i));
            const PredictionResult r = predict_two_sided(lo, hi, xi, sf,
                                                         row_outputs(t, pi, mu_col, i), variant,
                                                         a.seed, static_cast<uint64_t>(i));
            const auto [blo, bhi] = set_bounds(r.set);
            csv << i << ',' << num(r.set.s_lo) << ',' << num(r.set.s_hi) << ',' << blo << ','
                << bhi << ',' << threshold_method_name(r.upper.method) << ','
                << (r.draw_lower ? num(r.draw_lower->u) : "") << ','
                << (r.draw_upper ? num(r.draw_upper->u) : "") << "\n";
        }
    } else {
        const CalibratedModel model = io::refit_model(art);
        csv << "test_index,s_star,set_lower,set_upper,method,u_draw" << (aps ? ",labels" : "")
            << "\n";
        const CounterRng rng(a.seed);
        const uint64_t u_stream = fnv1a64("predict-u");
        for (int i = 0; i < t.rows(); ++i) {
            const Vector xi(x.row(i));
            const PredictorOutputs out = row_outputs(t, pi, mu_col, i);
            PredictionInterval iv;
            double s_star = 0.0;
            std::string mname;
            std::string u_cell;
            if (a.method == "sensitivity") {
                const PredictionResult r =
                    predict_set(model, xi, sf, out, variant, a.seed, static_cast<uint64_t>(i));
                iv = r.set;
                s_star = r.upper.s_star;
                mname = threshold_method_name(r.upper.method);
                if (r.draw_upper) u_cell = num(r.draw_upper->u);
            } else {
                double cutoff = 1.0 - art.alpha;
                if (a.randomize) {
                    cutoff = rng.uniform(u_stream, static_cast<uint64_t>(i), -art.alpha,
                                         1.0 - art.alpha);
                    u_cell = num(cutoff);
                }
                const ThresholdResult tr =
                    a.method == "binary"
                        ? threshold_binary_search(model, xi, cutoff, a.eps)
                        : conservative_threshold(model, xi, a.m_upper);
                iv = realize_interval(sf, xi, out, -kInf, tr.s_star, false);
                s_star = tr.s_star;
                mname = threshold_method_name(tr.method);
            }
            const auto [blo, bhi] = set_bounds(iv);
            csv << i << ',' << num(s_star) << ',' << blo << ',' << bhi << ',' << mname << ','
                << u_cell;
            if (aps) csv << ',' << join_labels(iv.labels);
            csv << "\n";
        }
    }

    io::write_file_atomic(a.out_path, csv.str());
    std::cout << "predicted " << t.rows() << " sets -> " << a.out_path << "\n";
    return 0;
}

// ----------------------------------------------------------------- estimate

struct EstimateArgs {
    std::string model_path, tilt_path, out_path;
    double lip_f = 0.0, mean_f = 0.0;
    bool has_lip_f = false, has_mean_f = false;
};

int cmd_estimate(const EstimateArgs& a) {
    const io::ModelArtifact art = io::model_from_bytes(io::read_file(a.model_path));
    const CalibratedModel model = io::refit_model(art);
    const std::vector<io::NamedTilt> tilts = io::tilts_from_json(io::read_json_file(a.tilt_path));

    json out;
    out["format_version"] = 1;
    out["model_digest"] = art.digest;
    out["alpha"] = art.alpha;
    out["class"] = class_name(model.model_class());
    json list = json::array();

    switch (model.model_class()) {
        case ModelClass::kernel:
            for (const io::NamedTilt& nt : tilts) {
                const CoverageEstimate est = rkhs_coverage_estimate(model, nt.tilt);
                json e;
                e["name"] = nt.name;
                e["value"] = est.value;
                e["clamped"] = est.clamped();
                e["base"] = est.base;
                e["penalty_term"] = est.penalty_term;
                if (est.stderr_hint) e["stderr_hint"] = *est.stderr_hint;
                e["interp_diagnostic"] = interp_diagnostic(model, nt.tilt);
                list.push_back(e);
            }
            break;
        case ModelClass::lipschitz: {
            if (!a.has_lip_f || !a.has_mean_f)
                throw InvalidInput(
                    "lipschitz coverage bounds need --lip-f and --mean-f for each tilt");
            for (const io::NamedTilt& nt : tilts) {
                const auto [lo, hi] = lipschitz_coverage_bounds(model, nt.tilt, a.lip_f, a.mean_f);
                json e;
                e["name"] = nt.name;
                e["lower"] = lo;
                e["upper"] = hi;
                e["lower_clamped"] = std::max(0.0, lo);
                e["upper_clamped"] = std::min(1.0, hi);
                e["interp_diagnostic"] = interp_diagnostic(model, nt.tilt);
                list.push_back(e);
            }
            break;
        }
        case ModelClass::linear:
            throw InvalidInput("coverage estimation needs a kernel or lipschitz model; the "
                               "finite-dimensional class has exact in-class coverage");
    }

    out["estimates"] = list;
    io::write_file_atomic(a.out_path, out.dump(2) + "\n");
    std::cout << "wrote " << tilts.size() << " estimates -> " << a.out_path << "\n";
    return 0;
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
    std::string spec_path, out_json, out_csv;
    std::string methods_flag;
    std::vector<std::string> asserts;
};

struct MethodAgg {
    double marginal = 0.0;
    double mean_length = 0.0;
    double worst_deviation = 0.0;
    std::vector<ColumnStat> per_column;
    std::vector<double> trial_coverage, trial_length;
    long total_points = 0;
};

std::vector<std::string> column_labels(const SimRunConfig& cfg) {
    std::vector<std::string> names;
    if (!cfg.basis) {
        names.push_back("intercept");
        for (int j = 0; j < cfg.sim.d; ++j) names.push_back("x" + std::to_string(j + 1));
        return names;
    }
    int idx = 0;
    for (const BasisColumn& c : cfg.basis->columns) {
        ++idx;
        std::string desc;
        switch (c.kind) {
            case BasisColKind::intercept: desc = "intercept"; break;
            case BasisColKind::raw_feature: desc = "x" + std::to_string(c.feature + 1); break;
            case BasisColKind::group_indicator:
                desc = "group(x" + std::to_string(c.group.feature + 1) + ")";
                break;
            case BasisColKind::product:
                desc = "x" + std::to_string(c.feature + 1) + "*group";
                break;
            default: desc = "custom"; break;
        }
        names.push_back("phi" + std::to_string(idx) + "(" + desc + ")");
    }
    return names;
}

// Runs one library call per trial so results are identical for every worker
// count: workers fill disjoint slots and the fold below walks them in order.
std::vector<SimRunResult> run_trials(const SimRunConfig& base, int trials, int threads) {
    std::vector<SimRunResult> out(static_cast<size_t>(trials));
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    auto work = [&] {
        for (;;) {
            const int t = next.fetch_add(1);
            if (t >= trials) return;
            try {
                SimRunConfig c = base;
                c.trials = 1;
                c.trial_offset = t;
                out[static_cast<size_t>(t)] = run_simulation(c);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    const int workers = std::min(threads, trials);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < workers; ++k) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

MethodAgg fold_trials(const std::vector<SimRunResult>& per_trial, int test_n) {
    MethodAgg agg;
    const size_t d = per_trial.empty() ? 0 : per_trial[0].per_column.size();
    Vector col_abs = Vector::Zero(static_cast<int>(d));
    Vector col_hit = Vector::Zero(static_cast<int>(d));
    Vector col_miss = Vector::Zero(static_cast<int>(d));
    double cov_sum = 0.0, len_sum = 0.0;
    for (const SimRunResult& r : per_trial) {
        agg.trial_coverage.push_back(r.trial_coverage[0]);
        agg.trial_length.push_back(r.trial_length[0]);
        cov_sum += r.trial_coverage[0] * test_n;
        len_sum += r.trial_length[0] * test_n;
        for (size_t j = 0; j < d; ++j) {
            const double abs_sum = r.per_column[j].weight * test_n;
            col_abs(static_cast<int>(j)) += abs_sum;
            col_hit(static_cast<int>(j)) += r.per_column[j].coverage * abs_sum;
            col_miss(static_cast<int>(j)) += r.per_column[j].deviation * abs_sum;
        }
    }
    agg.total_points = static_cast<long>(per_trial.size()) * test_n;
    agg.marginal = cov_sum / agg.total_points;
    agg.mean_length = len_sum / agg.total_points;
    for (size_t j = 0; j < d; ++j) {
        ColumnStat cs;
        cs.weight = col_abs(static_cast<int>(j)) / agg.total_points;
        if (col_abs(static_cast<int>(j)) > 0.0) {
            cs.coverage = col_hit(static_cast<int>(j)) / col_abs(static_cast<int>(j));
            cs.deviation = col_miss(static_cast<int>(j)) / col_abs(static_cast<int>(j));
        }
        agg.per_column.push_back(cs);
        agg.worst_deviation = std::max(agg.worst_deviation, std::abs(cs.deviation));
    }
    return agg;
}

int cmd_simulate(const SimulateArgs& a) {
    const json spec_json = io::read_json_file(a.spec_path);
    io::SimulationRequest req = io::simulation_from_json(spec_json);
    if (!a.methods_flag.empty()) {
        req.methods.clear();
        std::stringstream ss(a.methods_flag);
        std::string m;
        while (std::getline(ss, m, ',')) req.methods.push_back(m);
        for (const std::string& name : req.methods)
            if (name != "randomized" && name != "unrandomized" && name != "vanilla")
                throw InvalidInput("unknown method '" + name +
                                   "' (expected randomized, unrandomized, or vanilla)");
        if (req.methods.empty()) throw InvalidInput("--methods list is empty");
    }
    const int threads = env_threads();

    std::string digest_src = spec_json.dump();
    for (const std::string& m : req.methods) digest_src += "|" + m;
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(digest_src)));
    const std::string digest = hex;

    const std::vector<std::string> labels = column_labels(req.base);
    json methods_json;
    std::ostringstream csv;
    csv << "# condcal report config_digest=" << digest << "\n";
    csv << "method,trial,tilt_or_group,coverage,length\n";
    std::map<std::string, MethodAgg> summaries;

    for (const std::string& name : req.methods) {
        SimRunConfig cfg = req.base;
        cfg.variant =
            name == "unrandomized" ? PredictVariant::unrandomized : PredictVariant::randomized;
        cfg.vanilla_baseline = name == "vanilla";
        const MethodAgg agg = fold_trials(run_trials(cfg, cfg.trials, threads), cfg.sim.test_n);
        summaries[name] = agg;

        json m;
        m["marginal"] = agg.marginal;
        m["mean_length"] = agg.mean_length;
        m["worst_deviation"] = agg.worst_deviation;
        m["total_points"] = agg.total_points;
        m["trials"] = static_cast<int>(agg.trial_coverage.size());
        m["trial_coverage"] = agg.trial_coverage;
        m["trial_length"] = agg.trial_length;
        json cols = json::array();
        for (size_t j = 0; j < agg.per_column.size(); ++j)
            cols.push_back({{"name", labels[j]},
                            {"coverage", agg.per_column[j].coverage},
                            {"weight", agg.per_column[j].weight},
                            {"deviation", agg.per_column[j].deviation}});
        m["per_column"] = cols;
        methods_json[name] = m;

        for (size_t t = 0; t < agg.trial_coverage.size(); ++t)
            csv << name << ',' << t << ",marginal," << num(agg.trial_coverage[t]) << ','
                << num(agg.trial_length[t]) << "\n";
        csv << name << ",-1,marginal," << num(agg.marginal) << ',' << num(agg.mean_length)
            << "\n";
        for (size_t j = 0; j < agg.per_column.size(); ++j)
            csv << name << ",-1," << labels[j] << ',' << num(agg.per_column[j].coverage)
                << ",\n";
    }

    json report;
    report["format_version"] = 1;
    report["config_digest"] = digest;
    report["spec"] = spec_json;
    report["methods"] = methods_json;
    io::write_file_atomic(a.out_json, report.dump(2) + "\n");
    io::write_file_atomic(a.out_csv, csv.str());
    std::cout << "wrote " << a.out_json << " and " << a.out_csv << "\n";

    // --assert method:stat:lo:hi, checked after the reports are written.
    bool failed = false;
    for (const std::string& spec : a.asserts) {
        std::stringstream ss(spec);
        std::string method, stat, lo_s, hi_s;
        if (!std::getline(ss, method, ':') || !std::getline(ss, stat, ':') ||
            !std::getline(ss, lo_s, ':') || !std::getline(ss, hi_s))
            throw InvalidInput("--assert expects method:stat:lo:hi, got '" + spec + "'");
        if (!summaries.count(method))
            throw InvalidInput("--assert references method '" + method + "' which did not run");
        const MethodAgg& agg = summaries.at(method);
        double value;
        if (stat == "marginal") {
            value = agg.marginal;
        } else if (stat == "mean_length") {
            value = agg.mean_length;
        } else if (stat == "worst_deviation") {
            value = agg.worst_deviation;
        } else {
            throw InvalidInput("--assert stat must be marginal, mean_length, or worst_deviation");
        }
        double lo, hi;
        try {
            lo = std::stod(lo_s);
            hi = std::stod(hi_s);
        } catch (const std::exception&) {
            throw InvalidInput("--assert bounds must be numbers, got '" + spec + "'");
        }
        if (value < lo || value > hi) {
            std::cerr << "assertion failed: " << method << " " << stat << " = " << num(value)
                      << " outside [" << num(lo) << ", " << num(hi) << "]\n";
            failed = true;
        } else {
            std::cout << "assertion passed: " << method << " " << stat << " = " << num(value)
                      << " in [" << num(lo) << ", " << num(hi) << "]\n";
        }
    }
    return failed ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional conformal prediction: calibrate, predict, estimate, simulate"};
    app.require_subcommand(1);

    CalibrateArgs cal;
    CLI::App* c = app.add_subcommand("calibrate", "fit a model from calibration data");
    c->add_option("--calib", cal.calib_path, "calibration CSV (x1..xp plus score, or y with predictor columns)")
        ->required();
    c->add_option("--basis", cal.basis_path, "basis spec JSON")->required();
    c->add_option("--kernel", cal.kernel_path, "kernel spec JSON (RKHS class)");
    auto* lip_opt = c->add_option("--lipschitz", cal.lipschitz, "Lipschitz penalty weight");
    c->add_option("--alpha", cal.alpha, "miscoverage level")->default_val(0.1);
    c->add_option("--score", cal.score,
                  "score kind: absolute-residual, signed-residual, identity, aps-classification")
        ->default_val("identity");
    c->add_option("--out", cal.out_path, "output model file")->required();

    PredictArgs pred;
    CLI::App* p = app.add_subcommand("predict", "compute prediction sets for test rows");
    p->add_option("--model", pred.model_path, "model file from calibrate")->required();
    p->add_option("--test", pred.test_path, "test CSV (x1..xp plus predictor columns)")
        ->required();
    auto* method_opt =
        p->add_option("--method", pred.method, "threshold method: sensitivity, binary, conservative")
            ->default_val("sensitivity");
    auto* mu_opt = p->add_option("--m-upper", pred.m_upper, "score cap for --method conservative");
    auto* eps_opt = p->add_option("--eps", pred.eps, "bisection tolerance for --method binary");
    p->add_flag("--randomize", pred.randomize, "exact-coverage randomized sets");
    p->add_option("--seed", pred.seed, "seed for randomized draws")->default_val(0);
    p->add_flag("--two-sided", pred.two_sided, "two-sided sets from complementary fits");
    p->add_option("--out", pred.out_path, "output CSV")->required();

    EstimateArgs est;
    CLI::App* e = app.add_subcommand("estimate", "coverage estimates or bounds under tilts");
    e->add_option("--model", est.model_path, "model file (kernel or lipschitz class)")
        ->required();
    e->add_option("--tilt", est.tilt_path, "tilt list JSON")->required();
    auto* lipf_opt = e->add_option("--lip-f", est.lip_f, "Lipschitz constant of the tilt");
    auto* meanf_opt = e->add_option("--mean-f", est.mean_f, "mean of the tilt under the covariate law");
    e->add_option("--out", est.out_path, "output JSON")->required();

    SimulateArgs sim;
    CLI::App* s = app.add_subcommand("simulate", "synthetic coverage experiments");
    s->add_option("--spec", sim.spec_path, "simulation spec JSON")->required();
    s->add_option("--methods", sim.methods_flag,
                  "comma list overriding the spec: randomized,unrandomized,vanilla");
    s->add_option("--assert", sim.asserts,
                  "method:stat:lo:hi bound checked after the run (repeatable)");
    s->add_option("--out-json", sim.out_json, "report JSON path")->required();
    s->add_option("--out-csv", sim.out_csv, "long-format report CSV path")->required();

    SimulateArgs eva = sim;
    CLI::App* v = app.add_subcommand("evaluate", "alias of simulate");
    v->add_option("--spec", eva.spec_path, "simulation spec JSON")->required();
    v->add_option("--methods", eva.methods_flag,
                  "comma list overriding the spec: randomized,unrandomized,vanilla");
    v->add_option("--assert", eva.asserts,
                  "method:stat:lo:hi bound checked after the run (repeatable)");
    v->add_option("--out-json", eva.out_json, "report JSON path")->required();
    v->add_option("--out-csv", eva.out_csv, "long-format report CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& h) {
        return app.exit(h);
    } catch (const CLI::CallForAllHelp& h) {
        return app.exit(h);
    } catch (const CLI::ParseError& err) {
        std::cerr << err.what() << "\n";
        return 2;
    }

    cal.has_lipschitz = lip_opt->count() > 0;
    pred.method_given = method_opt->count() > 0;
    pred.has_m_upper = mu_opt->count() > 0;
    pred.has_eps = eps_opt->count() > 0;
    est.has_lip_f = lipf_opt->count() > 0;
    est.has_mean_f = meanf_opt->count() > 0;

    try {
        if (c->parsed()) return cmd_calibrate(cal);
        if (p->parsed()) return cmd_predict(pred);
        if (e->parsed()) return cmd_estimate(est);
        if (s->parsed()) return cmd_simulate(sim);
        if (v->parsed()) return cmd_simulate(eva);
    } catch (const InvalidInput& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const SolverFailure& err) {
        std::cerr << "solver error: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    }
    return 0;
}
