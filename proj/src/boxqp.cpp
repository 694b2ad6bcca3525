#include "condcal/boxqp.hpp"

#include <algorithm>
#include <cmath>

namespace condcal {

namespace {

struct Workspace {
    const BoxQpProblem& pr;
    int n, k;
    Matrix P;  // materialized (zero for LPs)
    Vector rho, rho_inv;
    Eigen::PartialPivLU<Matrix> kkt;
    Vector x, z, y;
    int iterations = 0;

    explicit Workspace(const BoxQpProblem& p)
        : pr(p), n(static_cast<int>(p.q.size())), k(static_cast<int>(p.A.rows())) {
        P = p.P.size() == 0 ? Matrix::Zero(n, n) : p.P;
        x = Vector::Zero(n);
        z = Vector::Zero(k);
        y = Vector::Zero(k);
    }

    bool is_eq(int i) const { return pr.u(i) - pr.l(i) <= 1e-12; }

    void set_rho(double base) {
        rho = Vector::Constant(k, base);
        for (int i = 0; i < k; ++i)
            if (is_eq(i)) rho(i) = base * 1e3;
        rho_inv = rho.cwiseInverse();
        Matrix M(n + k, n + k);
        M.topLeftCorner(n, n) = P + 1e-6 * Matrix::Identity(n, n);
        M.topRightCorner(n, k) = pr.A.transpose();
        M.bottomLeftCorner(k, n) = pr.A;
        M.bottomRightCorner(k, k) = (-rho_inv).asDiagonal();
        kkt.compute(M);
    }

    void admm(int iters) {
        const double relax = 1.6;
        Vector rhs(n + k), ztil(k), zc(k);
        for (int t = 0; t < iters; ++t, ++iterations) {
            rhs.head(n) = 1e-6 * x - pr.q;
            rhs.tail(k) = z - rho_inv.cwiseProduct(y);
            Vector sol = kkt.solve(rhs);
            Vector xtil = sol.head(n);
            ztil = z + rho_inv.cwiseProduct(sol.tail(k) - y);
            x = relax * xtil + (1.0 - relax) * x;
            zc = relax * ztil + (1.0 - relax) * z;
            z = zc + rho_inv.cwiseProduct(y);
            z = z.cwiseMax(pr.l).cwiseMin(pr.u);
            y += rho.cwiseProduct(zc - z);
        }
    }

    double primal_residual(const Vector& xx) const {
        Vector ax = pr.A * xx;
        double r = 0.0;
        for (int i = 0; i < k; ++i)
            r = std::max(r, std::max(pr.l(i) - ax(i), ax(i) - pr.u(i)));
        return std::max(r, 0.0);
    }

    double dual_residual(const Vector& xx, const Vector& yy) const {
        return (P * xx + pr.q + pr.A.transpose() * yy).cwiseAbs().maxCoeff();
    }
};

// Reduced-KKT polish on the rows the multipliers mark active. A regularized LU
// plus iterative refinement gives machine-precision KKT residuals when the
// guessed active set is right; the caller falls back to more ADMM otherwise.
bool polish(Workspace& w, BoxQpResult& out) {
    const double ytol = 1e-10 * std::max(1.0, w.y.cwiseAbs().maxCoeff());
    std::vector<int> act;
    std::vector<double> bval;
    for (int i = 0; i < w.k; ++i) {
        if (w.is_eq(i)) {
            act.push_back(i);
            bval.push_back(w.pr.l(i));
        } else if (w.y(i) < -ytol && std::isfinite(w.pr.l(i))) {
            act.push_back(i);
            bval.push_back(w.pr.l(i));
        } else if (w.y(i) > ytol && std::isfinite(w.pr.u(i))) {
            act.push_back(i);
            bval.push_back(w.pr.u(i));
        }
    }
    const int na = static_cast<int>(act.size());
    Matrix Aact(na, w.n);
    Vector b(na);
    for (int r = 0; r < na; ++r) {
        Aact.row(r) = w.pr.A.row(act[static_cast<size_t>(r)]);
        b(r) = bval[static_cast<size_t>(r)];
    }
    const double delta = 1e-9;
    Matrix M(w.n + na, w.n + na);
    M.topLeftCorner(w.n, w.n) = w.P + delta * Matrix::Identity(w.n, w.n);
    M.topRightCorner(w.n, na) = Aact.transpose();
    M.bottomLeftCorner(na, w.n) = Aact;
    M.bottomRightCorner(na, na) = -delta * Matrix::Identity(na, na);
    Eigen::PartialPivLU<Matrix> lu(M);
    Vector xx = w.x, nu = Vector::Zero(na);
    for (int round = 0; round < 4; ++round) {
        Vector r(w.n + na);
        r.head(w.n) = -(w.P * xx + w.pr.q + Aact.transpose() * nu);
        r.tail(na) = b - Aact * xx;
        Vector dlt = lu.solve(r);
        xx += dlt.head(w.n);
        nu += dlt.tail(na);
    }
    // Validate the guess: inactive rows feasible, active multipliers signed.
    Vector ax = w.pr.A * xx;
    double scale = 1.0 + ax.cwiseAbs().maxCoeff();
    std::vector<char> is_act(static_cast<size_t>(w.k), 0);
    for (int r = 0; r < na; ++r) is_act[static_cast<size_t>(act[static_cast<size_t>(r)])] = 1;
    for (int i = 0; i < w.k; ++i)
        if (!is_act[static_cast<size_t>(i)] &&
            (ax(i) < w.pr.l(i) - 1e-7 * scale || ax(i) > w.pr.u(i) + 1e-7 * scale))
            return false;
    double ntol = 1e-7 * std::max(1.0, nu.size() ? nu.cwiseAbs().maxCoeff() : 0.0);
    Vector yfull = Vector::Zero(w.k);
    for (int r = 0; r < na; ++r) {
        int i = act[static_cast<size_t>(r)];
        if (!w.is_eq(i)) {
            bool at_low = bval[static_cast<size_t>(r)] == w.pr.l(i);
            if (at_low && nu(r) > ntol) return false;
            if (!at_low && nu(r) < -ntol) return false;
        }
        yfull(i) = nu(r);
    }
    out.x = xx;
    out.y = yfull;
    out.ax = ax;
    out.polished = true;
    return true;
}

}  // namespace

BoxQpResult solve_box_qp(const BoxQpProblem& prob, const BoxQpOptions& opt) {
    const int n = static_cast<int>(prob.q.size());
    const int k = static_cast<int>(prob.A.rows());
    if (prob.A.cols() != n) throw InvalidInput("box QP: A column count mismatch");
    if (prob.l.size() != k || prob.u.size() != k) throw InvalidInput("box QP: bound size mismatch");
    if (prob.P.size() != 0 && (prob.P.rows() != n || prob.P.cols() != n))
        throw InvalidInput("box QP: P size mismatch");
    if ((prob.u - prob.l).minCoeff() < -1e-12) throw InvalidInput("box QP: l > u");

    Workspace w(prob);
    if (opt.warm_start && opt.x0.size() == n && opt.y0.size() == k) {
        w.x = opt.x0;
        w.y = opt.y0;
        w.z = (prob.A * w.x).cwiseMax(prob.l).cwiseMin(prob.u);
    }
    double rho = 0.1;
    w.set_rho(rho);

    BoxQpResult out;
    int chunk = 200;
    while (w.iterations < opt.max_iterations) {
        w.admm(chunk);
        if (polish(w, out)) {
            double pres = w.primal_residual(out.x);
            double dres = w.dual_residual(out.x, out.y);
            double scale = 1.0 + prob.q.cwiseAbs().maxCoeff();
            if (pres <= 10 * opt.eps && dres <= 10 * opt.eps * scale) {
                out.primal_residual = pres;
                out.dual_residual = dres;
                out.iterations = w.iterations;
                return out;
            }
        }
        // Rebalance rho when the residuals drift apart; refactors are bounded
        // by the doubling chunk schedule.
        double pres = w.primal_residual(w.x);
        double dres = w.dual_residual(w.x, w.y);
        double ratio = (pres + 1e-16) / (dres + 1e-16);
        if (ratio > 100.0 || ratio < 0.01) {
            rho = std::clamp(rho * std::sqrt(ratio), 1e-6, 1e6);
            w.set_rho(rho);
        }
        chunk = std::min(2 * chunk, 20000);
    }
    // Last resort: report the unpolished iterate with honest residuals.
    out.x = w.x;
    out.y = w.y;
    out.ax = prob.A * w.x;
    out.polished = false;
    out.primal_residual = w.primal_residual(w.x);
    out.dual_residual = w.dual_residual(w.x, w.y);
    out.iterations = w.iterations;
    return out;
}

}  // namespace condcal
