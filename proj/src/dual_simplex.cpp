#include "condcal/dual_simplex.hpp"

#include <algorithm>
#include <cmath>

#include "condcal/pinball.hpp"

namespace condcal {

namespace {

// Value plus eps coefficient; compared lexicographically with a tolerance on
// the value part so roundoff never masks the symbolic shift.
struct EpsVal {
    double v = 0.0;
    double e = 0.0;
};

inline EpsVal operator-(EpsVal a, EpsVal b) { return {a.v - b.v, a.e - b.e}; }
inline EpsVal operator+(EpsVal a, EpsVal b) { return {a.v + b.v, a.e + b.e}; }
inline EpsVal operator*(double c, EpsVal a) { return {c * a.v, c * a.e}; }
inline EpsVal operator/(EpsVal a, double c) { return {a.v / c, a.e / c}; }

constexpr double kValTol = 1e-10;
constexpr double kEpsTol = 1e-9;

inline bool eps_less(EpsVal a, EpsVal b) {
    if (a.v < b.v - kValTol) return true;
    if (a.v > b.v + kValTol) return false;
    return a.e < b.e - kEpsTol;
}

inline bool eps_nonneg(EpsVal a) {
    if (a.v > kValTol) return true;
    if (a.v < -kValTol) return false;
    return a.e >= -kEpsTol;
}

enum Status : int8_t { kBasic = 0, kAtLower = 1, kAtUpper = 2 };

class QuantileDualSimplex {
  public:
    QuantileDualSimplex(const Matrix& phi, const Vector& s, double alpha, const Vector& w,
                        bool eps_shift)
        : phi_(phi), s_(s), w_(w), m_(static_cast<int>(phi.rows())),
          d_(static_cast<int>(phi.cols())) {
        ncols_ = m_ + d_;
        lo_.resize(ncols_);
        up_.resize(ncols_);
        eta_.resize(ncols_);
        status_.assign(ncols_, kAtLower);
        art_sign_.assign(d_, 1.0);
        double shift = eps_shift ? 1.0 : 0.0;
        for (int j = 0; j < m_; ++j) {
            lo_[j] = {-alpha * w_(j), shift * w_(j)};
            up_[j] = {(1.0 - alpha) * w_(j), shift * w_(j)};
        }
        for (int k = 0; k < d_; ++k) {
            lo_[m_ + k] = {0.0, 0.0};
            up_[m_ + k] = {kInf, 0.0};
        }
        cost_tol_ = 1e-9 * (1.0 + s_.cwiseAbs().maxCoeff());
    }

    void run() {
        init_phase1();
        iterate(/*phase1=*/true);
        finish_phase1();
        iterate(/*phase1=*/false);
    }

    DualLpResult result() const {
        DualLpResult r;
        r.eta = Vector(m_);
        double dual = 0.0;
        for (int j = 0; j < m_; ++j) {
            double raw = std::clamp(eta_[j].v, lo_[j].v, up_[j].v);
            r.eta(j) = raw / w_(j);
            dual += s_(j) * raw;
        }
        r.beta = beta();
        r.basis.assign(basis_.begin(), basis_.end());
        std::sort(r.basis.begin(), r.basis.end());
        r.dual_objective = dual;
        r.iterations = iterations_;
        return r;
    }

    Vector beta() const {
        Vector sB(d_);
        for (int r = 0; r < d_; ++r) sB(r) = s_(basis_[r]);
        return lu_.transpose().solve(sB);
    }

  private:
    Vector col(int j) const {
        if (j < m_) return phi_.row(j).transpose();
        Vector a = Vector::Zero(d_);
        a(j - m_) = art_sign_[static_cast<size_t>(j - m_)];
        return a;
    }

    void factorize() {
        Matrix M(d_, d_);
        for (int r = 0; r < d_; ++r) M.col(r) = col(basis_[r]);
        lu_.compute(M);
    }

    // Basic values solve M eta_B = -(sum of nonbasic bound columns), value and
    // eps parts separately; recomputed from scratch each pivot to avoid drift.
    void recompute_basics() {
        Vector rv = Vector::Zero(d_), re = Vector::Zero(d_);
        for (int j = 0; j < ncols_; ++j) {
            if (status_[j] == kBasic) continue;
            const EpsVal b = status_[j] == kAtLower ? lo_[j] : up_[j];
            eta_[j] = b;
            if (b.v != 0.0) rv -= b.v * col(j);
            if (b.e != 0.0) re -= b.e * col(j);
        }
        Vector xv = lu_.solve(rv), xe = lu_.solve(re);
        for (int r = 0; r < d_; ++r) eta_[basis_[r]] = {xv(r), xe(r)};
    }

    void init_phase1() {
        // All real columns rest at their lower bound; signed artificials absorb
        // the residual so the starting basis is feasible by construction.
        Vector rv = Vector::Zero(d_), re = Vector::Zero(d_);
        for (int j = 0; j < m_; ++j) {
            status_[j] = kAtLower;
            rv -= lo_[j].v * col(j);
            re -= lo_[j].e * col(j);
        }
        basis_.resize(d_);
        for (int k = 0; k < d_; ++k) {
            EpsVal r{rv(k), re(k)};
            art_sign_[k] = (r.v < -kValTol || (std::abs(r.v) <= kValTol && r.e < 0)) ? -1.0 : 1.0;
            basis_[k] = m_ + k;
            status_[m_ + k] = kBasic;
        }
        factorize();
        recompute_basics();
    }

    void finish_phase1() {
        EpsVal infeas{0.0, 0.0};
        for (int k = 0; k < d_; ++k)
            if (status_[m_ + k] == kBasic) infeas = infeas + eta_[m_ + k];
        if (infeas.v > 1e-7 * (1.0 + w_.maxCoeff()))
            throw SolverFailure("quantile dual phase 1 did not reach feasibility");
        // Drive leftover zero-level artificials out of the basis; a row with no
        // eligible pivot certifies rank(phi) < d.
        for (int r = 0; r < d_; ++r) {
            if (basis_[r] < m_) continue;
            int pick = -1;
            double best = 0.0;
            for (int j = 0; j < m_; ++j) {
                if (status_[j] == kBasic) continue;
                Vector g = lu_.solve(col(j));
                if (std::abs(g(r)) > std::max(best, 1e-9)) {
                    best = std::abs(g(r));
                    pick = j;
                }
            }
            if (pick < 0)
                throw InvalidInput("basis columns are linearly dependent on the data (rank < d)");
            status_[basis_[r]] = kAtLower;
            status_[pick] = kBasic;
            basis_[r] = pick;
            factorize();
            recompute_basics();
        }
        for (int k = 0; k < d_; ++k) up_[m_ + k] = {0.0, 0.0};  // artificials frozen
    }

    // Reduced costs for the active phase objective.
    Vector reduced_costs(bool phase1) const {
        Vector cB(d_);
        for (int r = 0; r < d_; ++r)
            cB(r) = phase1 ? (basis_[r] >= m_ ? -1.0 : 0.0) : (basis_[r] < m_ ? s_(basis_[r]) : 0.0);
        Vector y = lu_.transpose().solve(cB);
        Vector cb(ncols_);
        Vector phy = phi_ * y;
        for (int j = 0; j < m_; ++j) cb(j) = (phase1 ? 0.0 : s_(j)) - phy(j);
        for (int k = 0; k < d_; ++k)
            cb(m_ + k) = (phase1 ? -1.0 : 0.0) - art_sign_[static_cast<size_t>(k)] * y(k);
        return cb;
    }

    void iterate(bool phase1) {
        const int max_iters = 200 * (m_ + d_) + 1000;
        const int stall_limit = 2 * (m_ + d_) + 10;
        // Phase 1 costs are unit scale regardless of the score magnitudes, so
        // its pivot tolerance must not inherit the score-relative scaling.
        const double tol = phase1 ? 1e-11 : cost_tol_;
        EpsVal best_obj = objective(phase1);
        int stall = 0;
        bland_ = false;
        for (;; ++iterations_) {
            if (iterations_ > max_iters)
                throw SolverFailure("simplex iteration limit exceeded");
            Vector cb = reduced_costs(phase1);
            int enter = -1;
            double best_viol = tol;
            for (int j = 0; j < ncols_; ++j) {
                if (status_[j] == kBasic) continue;
                if (up_[j].v <= lo_[j].v + kValTol && up_[j].e <= lo_[j].e + kEpsTol) continue;
                double viol = status_[j] == kAtLower ? cb(j) : -cb(j);
                if (viol > (bland_ ? tol : best_viol)) {
                    enter = j;
                    best_viol = viol;
                    if (bland_) break;  // smallest index wins
                }
            }
            if (enter < 0) return;  // optimal for this phase
            pivot(enter);
            EpsVal obj = objective(phase1);
            bool improved = eps_less(best_obj, obj);
            if (improved) {
                best_obj = obj;
                stall = 0;
            } else if (++stall > stall_limit) {
                bland_ = true;
            }
        }
    }

    EpsVal objective(bool phase1) const {
        EpsVal o{0.0, 0.0};
        for (int j = 0; j < ncols_; ++j) {
            double c = phase1 ? (j >= m_ ? -1.0 : 0.0) : (j < m_ ? s_(j) : 0.0);
            if (c != 0.0) o = o + c * eta_[j];
        }
        return o;
    }

    void pivot(int enter) {
        double dir = status_[enter] == kAtLower ? 1.0 : -1.0;
        Vector g = -lu_.solve(col(enter));  // d eta_B per unit increase of eta_enter
        EpsVal t_best = up_[enter] - lo_[enter];
        int leave = -1;  // -1: bound flip
        for (int r = 0; r < d_; ++r) {
            double gr = dir * g(r);
            EpsVal t;
            if (gr > 1e-9)
                t = (up_[basis_[r]] - eta_[basis_[r]]) / gr;
            else if (gr < -1e-9)
                t = (lo_[basis_[r]] - eta_[basis_[r]]) / gr;
            else
                continue;
            if (t.v < 0.0) t.v = 0.0;  // clip feasibility roundoff
            bool better = eps_less(t, t_best);
            bool tied = !better && !eps_less(t_best, t);
            if (better) {
                t_best = t;
                leave = r;
            } else if (tied && leave >= 0) {
                if (bland_ ? basis_[r] < basis_[leave] : std::abs(g(r)) > std::abs(g(leave)))
                    leave = r;
            }
        }
        if (leave < 0) {
            // Bound flip: the entering variable crosses its whole box.
            status_[enter] = status_[enter] == kAtLower ? kAtUpper : kAtLower;
        } else {
            int out = basis_[leave];
            status_[out] = dir * g(leave) > 0.0 ? kAtUpper : kAtLower;
            status_[enter] = kBasic;
            basis_[leave] = enter;
            factorize();
        }
        recompute_basics();
    }

    Matrix phi_;
    Vector s_, w_;
    int m_, d_, ncols_;
    std::vector<EpsVal> lo_, up_, eta_;
    std::vector<int8_t> status_;
    std::vector<double> art_sign_;
    std::vector<int> basis_;
    Eigen::PartialPivLU<Matrix> lu_;
    double cost_tol_;
    bool bland_ = false;
    int iterations_ = 0;
};

}  // namespace

DualLpResult solve_quantile_dual(const Matrix& phi, const Vector& s, double alpha,
                                 const Vector& w_hat, bool eps_shift) {
    check_alpha(alpha);
    if (phi.rows() != s.size()) throw InvalidInput("phi row count must match score count");
    if (phi.cols() == 0) throw InvalidInput("phi has no columns");
    if (phi.rows() < phi.cols())
        throw InvalidInput("underdetermined fit: need at least d rows for d basis columns");
    if (!all_finite(phi) || !all_finite(s)) throw InvalidInput("non-finite fit inputs");
    if (w_hat.size() != s.size() || (w_hat.array() <= 0.0).any() || !all_finite(w_hat))
        throw InvalidInput("weights must be positive and finite");
    QuantileDualSimplex solver(phi, s, alpha, w_hat, eps_shift);
    solver.run();
    return solver.result();
}

}  // namespace condcal
