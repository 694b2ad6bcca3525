#pragma once

#include <cmath>
#include <functional>

#include "condcal/types.hpp"

namespace condcal {

enum class ScoreKind {
    absolute_residual,   // |y - mu_hat(x)|
    signed_residual,     // y - mu_hat(x)
    identity,            // y
    aps_classification,  // sum of class probabilities strictly exceeding pi_y
    custom,
};

// Predictor outputs attached to a row. The library never trains mu_hat or the
// class probabilities; callers supply them alongside the covariates.
struct PredictorOutputs {
    std::optional<double> mu_hat;
    Vector pi;  // class probabilities, 1-based labels pi(y-1)
};

struct ScoreFunction {
    ScoreKind kind = ScoreKind::identity;
    // custom: maps (covariate row, y) to a score; score-space thresholds only.
    std::function<double(const Vector&, double)> custom_fn;
};

double evaluate_score(const ScoreFunction& sf, const Vector& x, const PredictorOutputs& out,
                      double y);

// Invert a score-space set {s_lo <= S(x,y) <= s_hi} into y-space where the
// score kind permits. two_sided = false means s_lo is -inf by construction.
PredictionInterval realize_interval(const ScoreFunction& sf, const Vector& x,
                                    const PredictorOutputs& out, double s_lo, double s_hi,
                                    bool two_sided);

// Score of an alternative class label under the same probability vector.
double aps_score_for_label(const ScoreFunction& sf, const Vector& x, const PredictorOutputs& out,
                           int label);

const char* score_kind_name(ScoreKind k);
ScoreKind score_kind_from_name(const std::string& name);

}  // namespace condcal
