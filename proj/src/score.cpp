#include "condcal/score.hpp"

namespace condcal {

namespace {

double aps_score(const Vector& pi, double y) {
    if (pi.size() == 0) throw InvalidInput("aps score requires class probabilities");
    double sum = pi.sum();
    if (std::abs(sum - 1.0) > 1e-9)
        throw InvalidInput("class probabilities must sum to 1 within 1e-9");
    if ((pi.array() < -1e-12).any())
        throw InvalidInput("class probabilities must be nonnegative");
    double yi = std::round(y);
    if (std::abs(y - yi) > 1e-9 || yi < 1 || yi > static_cast<double>(pi.size()))
        throw InvalidInput("aps label must be an integer in 1..k");
    double py = pi(static_cast<Eigen::Index>(yi) - 1);
    double s = 0.0;
    for (Eigen::Index i = 0; i < pi.size(); ++i)
        if (pi(i) > py) s += pi(i);
    return s;
}

double require_mu(const PredictorOutputs& out) {
    if (!out.mu_hat) throw InvalidInput("score kind requires a mu_hat predictor output");
    return *out.mu_hat;
}

}  // namespace

double evaluate_score(const ScoreFunction& sf, const Vector& x, const PredictorOutputs& out,
                      double y) {
    switch (sf.kind) {
        case ScoreKind::absolute_residual:
            return std::abs(y - require_mu(out));
        case ScoreKind::signed_residual:
            return y - require_mu(out);
        case ScoreKind::identity:
            return y;
        case ScoreKind::aps_classification:
            return aps_score(out.pi, y);
        case ScoreKind::custom:
            if (!sf.custom_fn) throw InvalidInput("custom score function not set");
            return sf.custom_fn(x, y);
    }
    throw InvalidInput("unknown score kind");
}

PredictionInterval realize_interval(const ScoreFunction& sf, const Vector& x,
                                    const PredictorOutputs& out, double s_lo, double s_hi,
                                    bool two_sided) {
    PredictionInterval iv;
    iv.s_lo = s_lo;
    iv.s_hi = s_hi;
    if (s_lo > s_hi) {
        iv.empty = true;
        return iv;
    }
    switch (sf.kind) {
        case ScoreKind::identity:
            iv.y_invertible = true;
            iv.y_lo = s_lo;
            iv.y_hi = s_hi;
            break;
        case ScoreKind::signed_residual: {
            double mu = require_mu(out);
            iv.y_invertible = true;
            iv.y_lo = s_lo + mu;
            iv.y_hi = s_hi + mu;
            break;
        }
        case ScoreKind::absolute_residual: {
            if (two_sided)
                throw InvalidInput("absolute-residual scores support one-sided sets only");
            double mu = require_mu(out);
            if (s_hi < 0.0) {
                iv.empty = true;
            } else {
                iv.y_invertible = true;
                iv.y_lo = mu - s_hi;
                iv.y_hi = mu + s_hi;
            }
            break;
        }
        case ScoreKind::aps_classification: {
            if (two_sided)
                throw InvalidInput("aps-classification scores support one-sided sets only");
            iv.y_invertible = true;
            for (Eigen::Index k = 0; k < out.pi.size(); ++k) {
                double sk = aps_score_for_label(sf, x, out, static_cast<int>(k) + 1);
                if (sk <= s_hi) iv.labels.push_back(static_cast<int>(k) + 1);
            }
            iv.empty = iv.labels.empty();
            break;
        }
        case ScoreKind::custom:
            // Score-space thresholds only; inversion is left to the caller.
            break;
    }
    return iv;
}

double aps_score_for_label(const ScoreFunction& sf, const Vector& x, const PredictorOutputs& out,
                           int label) {
    return evaluate_score(sf, x, out, static_cast<double>(label));
}

const char* score_kind_name(ScoreKind k) {
    switch (k) {
        case ScoreKind::absolute_residual: return "absolute-residual";
        case ScoreKind::signed_residual: return "signed-residual";
        case ScoreKind::identity: return "identity";
        case ScoreKind::aps_classification: return "aps-classification";
        case ScoreKind::custom: return "custom";
    }
    return "unknown";
}

ScoreKind score_kind_from_name(const std::string& name) {
    if (name == "absolute-residual") return ScoreKind::absolute_residual;
    if (name == "signed-residual") return ScoreKind::signed_residual;
    if (name == "identity") return ScoreKind::identity;
    if (name == "aps-classification") return ScoreKind::aps_classification;
    if (name == "custom") return ScoreKind::custom;
    throw InvalidInput("unknown score kind: " + name);
}

}  // namespace condcal
