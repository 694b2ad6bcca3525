#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "condcal/calibrate.hpp"
#include "condcal/score.hpp"

namespace condcal {

enum class SimDesign { gaussian_linear, independent_null, romano_1d };

// Synthetic data request. Seeds fully determine the output: every draw is a
// pure function of (seed, stream, index), so repeated calls are bit-identical.
struct SimSpec {
    SimDesign design = SimDesign::gaussian_linear;
    int n = 100;     // calibration rows
    int d = 1;       // covariate dimension; romano-1d requires d = 1
    int test_n = 100;
    uint64_t seed = 0;
};

struct SimData {
    Matrix x_calib;
    Vector y_calib;
    Matrix x_test;
    Vector y_test;
};

// gaussian-linear: X ~ N(0, I_d), w uniform on the unit sphere, Y = X'w + eps.
// independent-null: same X, Y = eps (no signal).
// romano-1d: X ~ Unif(0,5), Y = sin^2(X) + (0.05 + 0.15 X) eps. A documented
// stand-in for the usual 1-d heteroscedastic benchmark; qualitative structure
// only, no claim of matching any published figure bit-for-bit.
SimData simulate(const SimSpec& spec);

// Membership of y in a realized prediction set. Classification sets test the
// label list; everything else scores y and tests the score interval.
bool interval_covers(const PredictionInterval& iv, const ScoreFunction& sf, const Vector& x,
                     const PredictorOutputs& out, double y);

// Set size: y-interval width when invertible, label count for classification,
// otherwise score-interval width. Empty sets have length 0.
double interval_length(const PredictionInterval& iv);

// Tilt-weighted empirical coverage sum f_i 1{covered_i} / sum f_i with a
// ratio-estimator (delta method) standard error. Requires f >= 0 with positive
// total mass.
std::pair<double, double> coverage_under_tilt(const Vector& tilt_values,
                                              const std::vector<bool>& covered);

// Display statistic (sum f)^2 / sum f^2 for nonnegative weights.
double effective_sample_size(const Vector& tilt_values);

// Quantile-regression comparator with no test-point augmentation: fits the
// pinball LP once on the calibration set and evaluates the fitted threshold at
// each test row.
Vector baseline_vanilla_qr(const CalibrationSet& calib, const BasisSpec& basis, double alpha,
                           const Matrix& x_test);

struct TiltStat {
    double coverage = 0.0;
    double stderr_ = 0.0;
};

struct GroupStat {
    double coverage = 0.0;
    int count = 0;
};

struct CoverageReport {
    double marginal = 0.0;
    std::map<std::string, TiltStat> per_tilt;
    std::map<std::string, GroupStat> per_group;
    double mean_length = 0.0;
    // sup over basis columns of |mean(Z_j (miss - alpha))| / mean|Z_j|: the
    // empirical version of the moment the calibration guarantee sets to zero.
    double worst_deviation = 0.0;
};

// Aggregates per-point outcomes. tilts are nonnegative weights per test point;
// groups are 0/1 indicators (entries > 0.5 count as members).
CoverageReport build_report(const Matrix& phi_test, const std::vector<bool>& covered,
                            const Vector& lengths, double alpha,
                            const std::map<std::string, Vector>& tilts,
                            const std::map<std::string, Vector>& groups);

// End-to-end synthetic experiment: per trial, simulate, score with the
// absolute residual around zero, calibrate the linear-class model, and realize
// one prediction set per test point. Per-trial RNG streams are keyed by
// (master seed, trial index).
struct SimRunConfig {
    SimSpec sim;  // sim.seed acts as the master seed
    int trials = 1;
    // Global index of the first trial: trial t draws its seed at counter
    // position trial_offset + t, so a run split into chunks uses the same
    // per-trial seeds as one whole run.
    int trial_offset = 0;
    double alpha = 0.1;
    PredictVariant variant = PredictVariant::randomized;
    bool vanilla_baseline = false;            // comparator instead of augmentation
    std::optional<BasisSpec> basis;           // default: intercept + raw features
};

struct ColumnStat {
    double coverage = 0.0;   // coverage weighted by |Z_j|
    double weight = 0.0;     // mean |Z_j| over test points
    double deviation = 0.0;  // mean(Z_j (miss - alpha)) / mean|Z_j|, signed
};

struct SimRunResult {
    double marginal = 0.0;
    double mean_length = 0.0;
    double worst_deviation = 0.0;            // max_j |per_column[j].deviation|
    std::vector<ColumnStat> per_column;      // pooled over all trials
    std::vector<double> trial_coverage;      // per-trial means
    std::vector<double> trial_length;
    long total_points = 0;
};

SimRunResult run_simulation(const SimRunConfig& cfg);

}  // namespace condcal
