#include "condcal/boxqp.hpp"
#include "condcal/qr.hpp"

namespace condcal {

namespace {

void check_kernel_inputs(const Matrix& K, const Matrix& phi, const Vector& s, double alpha,
                         double lambda) {
    check_alpha(alpha);
    if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
    const auto m = s.size();
    if (m == 0) throw InvalidInput("kernel fit has no rows");
    if (K.rows() != m || K.cols() != m) throw InvalidInput("Gram matrix size mismatch");
    if (phi.rows() != m) throw InvalidInput("phi rows must match score count");
    if (!all_finite(K) || !all_finite(phi) || !all_finite(s))
        throw InvalidInput("non-finite kernel fit inputs");
    double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw InvalidInput("Gram matrix must be symmetric");
    Eigen::LLT<Matrix> llt(K + 1e-8 * scale * Matrix::Identity(K.rows(), K.cols()));
    if (llt.info() != Eigen::Success)
        throw InvalidInput("Gram matrix must be positive semidefinite");
}

}  // namespace

KernelQrFit solve_kernel_qr(const Matrix& K, const Matrix& phi, const Vector& s, double alpha,
                            double lambda, QpWarmStart* warm) {
    // Warm calls reuse matrices already vetted by an earlier cold call.
    if (warm == nullptr || !warm->valid) check_kernel_inputs(K, phi, s, alpha, lambda);
    const int m = static_cast<int>(s.size());
    const int d = static_cast<int>(phi.cols());

    // Dual of the m-scaled program sum_i pinball + m*lambda*gamma'K gamma:
    //   maximize s'eta - eta'K eta/(4 lambda m)   s.t. Phi'eta = 0, box,
    // solved as a box QP; gamma recovers via the representer identity.
    BoxQpProblem qp;
    qp.P = K / (2.0 * lambda * m);
    qp.q = -s;
    qp.A = Matrix(d + m, m);
    qp.A.topRows(d) = phi.transpose();
    qp.A.bottomRows(m) = Matrix::Identity(m, m);
    qp.l = Vector(d + m);
    qp.u = Vector(d + m);
    qp.l.head(d).setZero();
    qp.u.head(d).setZero();
    qp.l.tail(m).setConstant(-alpha);
    qp.u.tail(m).setConstant(1.0 - alpha);

    BoxQpOptions opts;
    if (warm != nullptr && warm->valid && warm->x.size() == m && warm->y.size() == d + m) {
        opts.warm_start = true;
        opts.x0 = warm->x;
        opts.y0 = warm->y;
    }
    BoxQpResult r = solve_box_qp(qp, opts);
    if (warm != nullptr) {
        warm->x = r.x;
        warm->y = r.y;
        warm->valid = true;
    }

    KernelQrFit fit;
    fit.eta = r.x.cwiseMax(-alpha).cwiseMin(1.0 - alpha);
    fit.gamma = fit.eta / (2.0 * lambda * m);
    fit.beta = r.y.head(d);  // multipliers of Phi'eta = 0 are the primal beta
    fit.iterations = r.iterations;

    Vector fitted = K * fit.gamma + phi * fit.beta;
    fit.rkhs_norm_sq = fit.gamma.dot(K * fit.gamma);
    double loss = 0.0;
    for (int i = 0; i < m; ++i) loss += pinball_loss(fitted(i), s(i), alpha);
    fit.objective = loss / m + lambda * fit.rkhs_norm_sq;
    fit.dual_objective =
        (s.dot(fit.eta) - fit.eta.dot(K * fit.eta) / (4.0 * lambda * m)) / m;
    fit.duality_gap = fit.objective - fit.dual_objective;

    double gap_tol = 1e-8 * (1.0 + std::abs(fit.objective));
    if (!(std::abs(fit.duality_gap) <= gap_tol))
        throw SolverFailure("kernel QP did not reach the required duality gap");
    return fit;
}

}  // namespace condcal
