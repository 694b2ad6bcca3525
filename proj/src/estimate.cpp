#include "condcal/estimate.hpp"

#include <algorithm>
#include <cmath>

#include "condcal/pinball.hpp"
#include "condcal/qr.hpp"

namespace condcal {

namespace {

void check_tilt(const TiltSpec& t, const CalibratedModel& m) {
    switch (t.kind) {
        case TiltKind::basis_column:
            if (t.column < 0 || t.column >= m.d())
                throw InvalidInput("tilt basis column out of range");
            break;
        case TiltKind::kernel_point:
            if (!m.kernel || !m.kernel->evaluable())
                throw InvalidInput("kernel-point tilts need an evaluable model kernel");
            if (t.x0.size() != m.calib.p() || !all_finite(t.x0))
                throw InvalidInput("kernel-point tilt center has the wrong shape");
            break;
        case TiltKind::gaussian_tilt:
            if (t.mu.size() != m.calib.p() || !all_finite(t.mu) || !(t.sigma > 0.0))
                throw InvalidInput("gaussian tilt needs a finite center and positive width");
            break;
        case TiltKind::custom_table:
            if (!m.kernel || !m.kernel->evaluable())
                throw InvalidInput("custom-table tilts need an evaluable model kernel");
            if (t.coef.size() == 0 || t.points.rows() != t.coef.size() ||
                t.points.cols() != m.calib.p() || !all_finite(t.coef) || !all_finite(t.points))
                throw InvalidInput("custom-table tilt coefficients and points do not line up");
            break;
    }
}

double mean_abs_tilt(const TiltSpec& t, const CalibratedModel& m) {
    double acc = 0.0;
    for (int i = 0; i < m.n(); ++i) acc += std::abs(tilt_eval(t, m, Vector(m.calib.x.row(i))));
    return acc / m.n();
}

Vector base_fitted_values(const CalibratedModel& m) {
    switch (m.model_class()) {
        case ModelClass::linear:
            return m.phi * m.base_linear->beta;
        case ModelClass::kernel:
            return m.gram_n * m.base_kernel->gamma + m.phi * m.base_kernel->beta;
        case ModelClass::lipschitz:
            return m.base_lip->gamma + m.phi * m.base_lip->beta;
    }
    throw SolverFailure("unreachable model class");
}

}  // namespace

double tilt_eval(const TiltSpec& tilt, const CalibratedModel& m, const Vector& x) {
    check_tilt(tilt, m);
    switch (tilt.kind) {
        case TiltKind::basis_column:
            return evaluate_basis(m.basis, x)(tilt.column);
        case TiltKind::kernel_point:
            return kernel_eval(*m.kernel, tilt.x0, x);
        case TiltKind::gaussian_tilt:
            return std::exp(-(x - tilt.mu).squaredNorm() / (2.0 * tilt.sigma * tilt.sigma));
        case TiltKind::custom_table: {
            double v = 0.0;
            for (Eigen::Index j = 0; j < tilt.coef.size(); ++j)
                v += tilt.coef(j) * kernel_eval(*m.kernel, Vector(tilt.points.row(j)), x);
            return v;
        }
    }
    throw SolverFailure("unreachable tilt kind");
}

double CoverageEstimate::clamped() const { return std::clamp(value, 0.0, 1.0); }

CoverageEstimate rkhs_coverage_estimate(const CalibratedModel& m, const TiltSpec& tilt) {
    if (m.model_class() != ModelClass::kernel || !m.base_kernel)
        throw InvalidInput("rkhs coverage estimates need a kernel-class model");
    check_tilt(tilt, m);

    // Kernel-part expansion f_K = sum_j c_j K(z_j, .); empty when f lies in
    // the unpenalized linear span.
    Vector c;
    Matrix z;
    switch (tilt.kind) {
        case TiltKind::basis_column:
            break;
        case TiltKind::kernel_point:
            c = Vector::Ones(1);
            z = tilt.x0.transpose();
            break;
        case TiltKind::gaussian_tilt: {
            if (m.kernel->family != KernelFamily::gaussian)
                throw InvalidInput("gaussian tilts decompose only under a gaussian kernel");
            double implied = 1.0 / (2.0 * tilt.sigma * tilt.sigma);
            if (std::abs(implied - m.kernel->gamma) > 1e-9 * (1.0 + m.kernel->gamma))
                throw InvalidInput(
                    "gaussian tilt width must satisfy 1/(2 sigma^2) = kernel bandwidth");
            c = Vector::Ones(1);
            z = tilt.mu.transpose();
            break;
        }
        case TiltKind::custom_table:
            c = tilt.coef;
            z = tilt.points;
            break;
    }

    double mean_abs = mean_abs_tilt(tilt, m);
    if (!(mean_abs > 0.0)) throw InvalidInput("tilt vanishes on the calibration set");

    CoverageEstimate est;
    est.base = 1.0 - m.alpha;
    if (c.size() > 0) {
        // The estimator is defined for the n-point fit at per-row weight 1/n.
        // The cached base fit deliberately carries the (n+1)-row weighting used
        // to seed augmented solves, so refit at the plain normalization here.
        KernelQrFit fit_n =
            solve_kernel_qr(m.gram_n, m.phi, m.calib.s, m.alpha, m.kernel->lambda);
        Matrix kx = cross_gram(*m.kernel, m.calib.x, z);  // n rows, one col per z_j
        double inner = fit_n.gamma.dot(kx * c);
        est.penalty_term = -2.0 * m.kernel->lambda * inner / mean_abs;
    }
    est.value = est.base + est.penalty_term;
    est.stderr_hint = std::sqrt(m.d() * std::log(static_cast<double>(std::max(m.n(), 2))) /
                                static_cast<double>(m.n()));
    return est;
}

std::pair<double, double> lipschitz_coverage_bounds(const CalibratedModel& m,
                                                    const TiltSpec& tilt, double lip_f,
                                                    double mean_f) {
    if (m.model_class() != ModelClass::lipschitz || !m.base_lip || !m.lip_lambda)
        throw InvalidInput("lipschitz coverage bounds need a lipschitz-class model");
    check_tilt(tilt, m);
    if (!tilt.nonneg)
        throw InvalidInput("coverage bounds hold for nonnegative tilts; set the nonneg flag");
    if (!std::isfinite(lip_f) || lip_f < 0.0)
        throw InvalidInput("lip_f must be finite and nonnegative");
    if (!std::isfinite(mean_f) || !(mean_f > 0.0))
        throw InvalidInput("mean_f must be finite and positive");
    double spread = *m.lip_lambda * lip_f / mean_f;
    return {1.0 - m.alpha - spread, 1.0 - m.alpha + spread};
}

double interp_diagnostic(const CalibratedModel& m, const TiltSpec& tilt) {
    check_tilt(tilt, m);
    Vector fitted = base_fitted_values(m);
    double acc = 0.0;
    for (int i = 0; i < m.n(); ++i) {
        double tau = 1e-9 * (1.0 + std::abs(m.calib.s(i)));
        if (std::abs(m.calib.s(i) - fitted(i)) <= tau)
            acc += std::abs(tilt_eval(tilt, m, Vector(m.calib.x.row(i))));
    }
    return acc / m.n();
}

double cross_validate_lambda(const CalibrationSet& calib, const BasisSpec& basis,
                             const KernelSpec& kernel, const std::vector<double>& lambda_grid,
                             int folds, double alpha) {
    calib.validate();
    check_alpha(alpha);
    kernel.validate();
    if (!kernel.evaluable())
        throw InvalidInput("cross-validation needs a kernel it can evaluate at new points");
    if (lambda_grid.empty()) throw InvalidInput("lambda grid is empty");
    for (double l : lambda_grid)
        if (!std::isfinite(l) || !(l > 0.0))
            throw InvalidInput("lambda grid values must be positive and finite");
    const int n = calib.n();
    if (folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
    if (folds > n) throw InvalidInput("more folds than calibration rows");

    struct Fold {
        Matrix x_tr, phi_tr, k_tr, x_te, phi_te;
        Vector s_tr, s_te;
    };
    Matrix phi_all = evaluate_basis(basis, calib.x);
    std::vector<Fold> fold_data(static_cast<size_t>(folds));
    for (int k = 0; k < folds; ++k) {
        std::vector<int> tr, te;
        for (int i = 0; i < n; ++i) (i % folds == k ? te : tr).push_back(i);
        if (static_cast<int>(tr.size()) < std::max(2, basis.d()))
            throw InvalidInput("cross-validation training folds need at least two rows");
        Fold& f = fold_data[static_cast<size_t>(k)];
        f.x_tr.resize(tr.size(), calib.p());
        f.phi_tr.resize(tr.size(), basis.d());
        f.s_tr.resize(tr.size());
        for (size_t r = 0; r < tr.size(); ++r) {
            f.x_tr.row(static_cast<Eigen::Index>(r)) = calib.x.row(tr[r]);
            f.phi_tr.row(static_cast<Eigen::Index>(r)) = phi_all.row(tr[r]);
            f.s_tr(static_cast<Eigen::Index>(r)) = calib.s(tr[r]);
        }
        f.x_te.resize(te.size(), calib.p());
        f.phi_te.resize(te.size(), basis.d());
        f.s_te.resize(te.size());
        for (size_t r = 0; r < te.size(); ++r) {
            f.x_te.row(static_cast<Eigen::Index>(r)) = calib.x.row(te[r]);
            f.phi_te.row(static_cast<Eigen::Index>(r)) = phi_all.row(te[r]);
            f.s_te(static_cast<Eigen::Index>(r)) = calib.s(te[r]);
        }
        f.k_tr = gram(kernel, f.x_tr);
    }

    std::vector<double> grid = lambda_grid;
    std::sort(grid.begin(), grid.end());
    double best_lambda = grid.front();
    double best_loss = kInf;
    for (double lam : grid) {
        double total = 0.0;
        for (const Fold& f : fold_data) {
            KernelQrFit fit = solve_kernel_qr(f.k_tr, f.phi_tr, f.s_tr, alpha, lam);
            Matrix kx = cross_gram(kernel, f.x_tr, f.x_te);
            Vector pred = kx.transpose() * fit.gamma + f.phi_te * fit.beta;
            for (Eigen::Index j = 0; j < f.s_te.size(); ++j)
                total += pinball_loss(pred(j), f.s_te(j), alpha);
        }
        double mean_loss = total / n;
        if (mean_loss < best_loss) {
            best_loss = mean_loss;
            best_lambda = lam;
        }
    }
    return best_lambda;
}

}  // namespace condcal
