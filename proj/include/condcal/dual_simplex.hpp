#pragma once

#include <vector>

#include "condcal/types.hpp"

namespace condcal {

// Solves the quantile-regression dual
//
//   maximize s'eta   s.t.   Phi'eta = 0,   -alpha*w_i <= eta_i <= (1-alpha)*w_i,
//
// by a bounded-variable revised simplex (two phases, Dantzig pricing with a
// switch to Bland's rule on stalls). The box is shifted by +eps*w_i for a
// symbolic infinitesimal eps > 0, carried exactly as (value, eps-coefficient)
// pairs: the eps -> 0+ limit selects the fit reached as the pinball level is
// nudged upward, which is the largest minimizer in the scalar case and a
// permutation-invariant vertex in general.
//
// w_i are the per-row weights times m (all 1 for uniform weighting); eta is
// reported normalized by w_i so it lives in [-alpha, 1-alpha]. beta solves the
// interpolation equations Phi_B beta = s_B of the final basis and minimizes the
// weighted pinball objective.
struct DualLpResult {
    Vector eta;              // m, normalized to [-alpha, 1-alpha]
    Vector beta;             // d
    std::vector<int> basis;  // d interpolated row indices, ascending
    double dual_objective;   // sum_i s_i * eta_raw_i (w-scaled eta)
    int iterations = 0;
};

DualLpResult solve_quantile_dual(const Matrix& phi, const Vector& s, double alpha,
                                 const Vector& w_hat, bool eps_shift = true);

}  // namespace condcal
