#pragma once

#include "condcal/types.hpp"

namespace condcal {

// Pinball (quantile) loss at level 1-alpha:
//   (1-alpha)(s - theta)  if s >= theta,
//   alpha (theta - s)     otherwise.
inline double pinball_loss(double theta, double s, double alpha) {
    double r = s - theta;
    return r >= 0.0 ? (1.0 - alpha) * r : -alpha * r;
}

// Weighted objective sum_i w_i * pinball(theta_i, s_i).
inline double pinball_objective(const Vector& theta, const Vector& s, const Vector& w,
                                double alpha) {
    double obj = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        obj += w(i) * pinball_loss(theta(i), s(i), alpha);
    return obj;
}

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in (0,1)");
}

}  // namespace condcal
