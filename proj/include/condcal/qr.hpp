#pragma once

#include <vector>

#include "condcal/kernel.hpp"
#include "condcal/pinball.hpp"
#include "condcal/types.hpp"

namespace condcal {

// Weighted pinball problem over a finite-dimensional class {Phi beta}.
// Empty weights mean uniform 1/m.
struct PinballProblem {
    Matrix phi;  // m x d
    Vector s;    // m
    double alpha = 0.1;
    Vector weights;

    int m() const { return static_cast<int>(s.size()); }
    int d() const { return static_cast<int>(phi.cols()); }
    Vector w_hat() const;  // weights * m, all ones when uniform
    void validate() const;
};

struct QrFit {
    Vector beta;
    Vector eta;                  // dual vertex, per-row scale [-alpha, 1-alpha]
    std::vector<int> basis_rows; // interpolated rows, ascending
    double objective = 0.0;      // weighted pinball objective at beta
    double dual_objective = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
};

// Revised simplex on the bounded dual; returns the largest-minimizer vertex.
QrFit solve_linear_qr(const PinballProblem& p);

// Kernel quantile fit: minimizes (1/m) sum_i pinball(K_i'gamma + Phi_i'beta, s_i)
// + lambda gamma'K gamma. eta solves the box-constrained dual and satisfies the
// representer identity gamma = eta / (2 lambda m).
struct KernelQrFit {
    Vector gamma;
    Vector beta;
    Vector eta;             // [-alpha, 1-alpha]
    double objective = 0.0; // primal value at (gamma, beta)
    double dual_objective = 0.0;
    double duality_gap = 0.0;
    double rkhs_norm_sq = 0.0;  // gamma' K gamma
    int iterations = 0;
};

// Primal/dual iterates carried between solves that share the same constraint
// matrices and differ only in a few objective or bound entries.
struct QpWarmStart {
    Vector x, y;
    bool valid = false;
};

KernelQrFit solve_kernel_qr(const Matrix& K, const Matrix& phi, const Vector& s, double alpha,
                            double lambda, QpWarmStart* warm = nullptr);

// Lipschitz quantile fit: minimizes (1/m) sum_i pinball(gamma_i + Phi_i'beta, s_i)
// + lambda * max_{i != j} |gamma_i - gamma_j| / |X_i - X_j|_2.
struct LipschitzQrFit {
    Vector gamma;            // per-row offsets
    Vector beta;
    Vector eta;              // [-alpha, 1-alpha]
    double lip_value = 0.0;  // realized Lipschitz seminorm of gamma
    double objective = 0.0;
    double dual_objective = 0.0;
    double duality_gap = 0.0;
    int iterations = 0;
};

// x holds the covariate rows used for the pairwise distances. Duplicated rows
// are rejected; m above max_rows is rejected because the constraint set grows
// as m(m-1). On one-dimensional covariates only adjacent pairs (after sorting)
// are kept, which is an exact reduction.
LipschitzQrFit solve_lipschitz_qr(const Matrix& x, const Matrix& phi, const Vector& s,
                                  double alpha, double lambda, int max_rows = 2000,
                                  QpWarmStart* warm = nullptr);

}  // namespace condcal
