#pragma once

#include <algorithm>
#include <cmath>

#include "condcal/pinball.hpp"
#include "condcal/types.hpp"

namespace condcal {

// Marginal split-conformal threshold: the ceil((n+1)(1-alpha))-th smallest
// calibration score, or +inf when that index exceeds n.
inline double split_conformal_threshold(Vector s, double alpha) {
    check_alpha(alpha);
    if (s.size() == 0) throw InvalidInput("split threshold needs at least one score");
    if (!all_finite(s)) throw InvalidInput("scores contain non-finite values");
    const auto n = s.size();
    // Guard against upward rounding noise in (n+1)(1-alpha) before taking ceil.
    double raw = static_cast<double>(n + 1) * (1.0 - alpha);
    auto k = static_cast<Eigen::Index>(std::ceil(raw - 1e-9));
    if (k > n) return kInf;
    if (k < 1) k = 1;
    std::nth_element(s.data(), s.data() + (k - 1), s.data() + n);
    return s(k - 1);
}

}  // namespace condcal
