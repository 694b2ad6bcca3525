#pragma once

#include "condcal/types.hpp"

namespace condcal {

// Operator-splitting solver for convex quadratic programs
//
//   minimize 1/2 x'Px + q'x   subject to   l <= Ax <= u,
//
// (P dense PSD, possibly zero) via ADMM on the split (x, z = Ax), followed by
// an active-set polish that solves the reduced KKT system exactly. Equality
// rows are encoded as l_i = u_i. Used for the kernel dual QP and the Lipschitz
// epigraph LP; not a general-purpose QP interface.
struct BoxQpProblem {
    Matrix P;  // n x n, may be 0 x 0 for LPs
    Vector q;
    Matrix A;  // k x n
    Vector l, u;
};

struct BoxQpOptions {
    double eps = 1e-9;        // target KKT residual scale
    int max_iterations = 400000;
    bool warm_start = false;
    Vector x0, y0;
};

struct BoxQpResult {
    Vector x;
    Vector y;  // row multipliers: y_i > 0 pushes on the upper bound, < 0 on the lower
    Vector ax;
    bool polished = false;
    double primal_residual = kInf;  // max violation of l <= Ax <= u
    double dual_residual = kInf;    // |Px + q + A'y|_inf
    int iterations = 0;
};

BoxQpResult solve_box_qp(const BoxQpProblem& prob, const BoxQpOptions& opt = {});

}  // namespace condcal
