#pragma once

#include <Eigen/Dense>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace condcal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Rejected inputs: bad shapes, non-finite entries, violated preconditions.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numerical failure inside a solver (iteration cap, singular basis, gap not met).
struct SolverFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Calibration data: covariates plus precomputed conformity scores. The raw
// responses ride along only so scores can be recomputed under a different
// score function; no predictor is ever trained here.
struct CalibrationSet {
    Matrix x;                 // n x p
    Vector s;                 // n
    std::optional<Vector> y;  // n, optional

    int n() const { return static_cast<int>(s.size()); }
    int p() const { return static_cast<int>(x.cols()); }

    void validate() const {
        if (s.size() == 0) throw InvalidInput("calibration set is empty");
        if (x.rows() != s.size())
            throw InvalidInput("covariate row count does not match score count");
        if (!all_finite(x) || !all_finite(s))
            throw InvalidInput("calibration set contains non-finite values");
        if (y && y->size() != s.size())
            throw InvalidInput("response column length does not match score count");
        if (y && !all_finite(*y))
            throw InvalidInput("response column contains non-finite values");
    }
};

// Realized prediction set. In score space the set is {y : s_lo <= S(x,y) <= s_hi};
// one-sided sets use s_lo = -inf. For invertible score kinds the y-space set is
// [y_lo, y_hi] (or a label list for classification); custom scores expose the
// score-space thresholds only. The empty set is representable.
struct PredictionInterval {
    double s_lo = -kInf;
    double s_hi = kInf;
    bool empty = false;

    bool y_invertible = false;
    double y_lo = -kInf;
    double y_hi = kInf;
    std::vector<int> labels;  // aps-classification members (1-based)
};

}  // namespace condcal
