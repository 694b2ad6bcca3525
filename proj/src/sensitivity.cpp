#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "condcal/calibrate.hpp"
#include "condcal/dual_simplex.hpp"
#include "condcal/pinball.hpp"

namespace condcal {

namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kTieTol = 1e-12;

enum class RowState { basic, at_lower, at_upper };

struct TraceOutcome {
    bool ok = false;
    bool singular = false;
    double s_star = 0.0;
    std::vector<std::pair<double, double>> eta_trace;
    int interp_count = 0;
    int pivots = 0;
};

// Parametric trace of the augmented dual as the imputed test score moves. The
// state is a bounded-variable basic solution: d interpolated rows, every other
// row pinned at a box bound. Two alternating phases:
//   rise    - at fixed S, the entering row's coordinate moves along the zero
//             reduced-cost direction until a box bound or the cutoff blocks it;
//   advance - S moves to the next value at which some nonbasic reduced cost
//             changes sign, which names the next entering row.
// Every visited state is dual-optimal at its S, so recorded (S, eta_test)
// pairs are nondecreasing across distinct S values.
class DualTrace {
  public:
    DualTrace(const Matrix& phi_aug, Vector s_aug, double alpha)
        : phi_(phi_aug),
          s_(std::move(s_aug)),
          alpha_(alpha),
          m_(static_cast<int>(phi_.rows())),
          d_(static_cast<int>(phi_.cols())),
          test_(m_ - 1),
          state_(static_cast<size_t>(m_), RowState::at_lower),
          eta_(Vector::Zero(m_)) {}

    TraceOutcome run(const QrFit& base, double s_hat, double cutoff, bool lower_side,
                     int max_pivots);

  private:
    bool factorize() {
        Matrix bt(d_, d_);
        for (int r = 0; r < d_; ++r) bt.col(r) = phi_.row(basis_[static_cast<size_t>(r)]).transpose();
        lu_.compute(bt);
        return lu_.rcond() > 1e-14;
    }

    // Exact basic coordinates from the pinned nonbasic values.
    void recompute_basics() {
        Vector rhs = Vector::Zero(d_);
        for (int j = 0; j < m_; ++j)
            if (state_[static_cast<size_t>(j)] != RowState::basic)
                rhs -= eta_(j) * phi_.row(j).transpose();
        Vector eb = lu_.solve(rhs);
        for (int r = 0; r < d_; ++r) eta_(basis_[static_cast<size_t>(r)]) = eb(r);
    }

    Vector beta() const {
        Vector sb(d_);
        for (int r = 0; r < d_; ++r) sb(r) = s_(basis_[static_cast<size_t>(r)]);
        return lu_.transpose().solve(sb);
    }

    int test_position() const {
        for (int r = 0; r < d_; ++r)
            if (basis_[static_cast<size_t>(r)] == test_) return r;
        return -1;
    }

    void push(TraceOutcome& out) { out.eta_trace.emplace_back(s_cur_, eta_(test_)); }

    void finalize(TraceOutcome& out) {
        Vector b = beta();
        out.interp_count = 0;
        for (int i = 0; i < m_; ++i)
            if (std::abs(s_(i) - phi_.row(i).dot(b)) <= 1e-9 * (1.0 + std::abs(s_(i))))
                ++out.interp_count;
    }

    Matrix phi_;
    Vector s_;
    double alpha_;
    int m_, d_, test_;
    std::vector<int> basis_;
    std::vector<RowState> state_;
    Vector eta_;
    double s_cur_ = 0.0;
    Eigen::PartialPivLU<Matrix> lu_;  // factors Phi_B^T
};

TraceOutcome DualTrace::run(const QrFit& base, double s_hat, double cutoff, bool lower_side,
                            int max_pivots) {
    TraceOutcome out;
    const double ub = 1.0 - alpha_;
    const double lb = -alpha_;

    s_cur_ = s_hat;
    s_(test_) = s_cur_;
    basis_ = base.basis_rows;
    for (int i = 0; i < m_ - 1; ++i) {
        state_[static_cast<size_t>(i)] =
            base.eta(i) < 0.5 - alpha_ ? RowState::at_lower : RowState::at_upper;
        eta_(i) = state_[static_cast<size_t>(i)] == RowState::at_lower ? lb : ub;
    }
    for (int r : basis_) state_[static_cast<size_t>(r)] = RowState::basic;
    state_[static_cast<size_t>(test_)] = RowState::at_lower;  // value 0, enters first
    eta_(test_) = 0.0;
    if (!factorize()) {
        out.singular = true;
        return out;
    }
    recompute_basics();

    const bool up = cutoff > 0.0 || (cutoff == 0.0 && lower_side);
    push(out);
    int ic = test_;
    int dir = up ? 1 : -1;

    while (true) {
        if (++out.pivots > max_pivots) return out;

        // ---- rise: move eta_ic at fixed S ----
        Vector dvec = lu_.solve(-phi_.row(ic).transpose());
        double t_best = dir > 0 ? ub - eta_(ic) : eta_(ic) - lb;
        if (t_best < 0.0) t_best = 0.0;
        int leave = -1;
        double best_rate = 1.0;  // the entering coordinate itself moves at unit rate
        for (int r = 0; r < d_; ++r) {
            double rate = dir * dvec(r);
            double t;
            if (rate > kPivotTol)
                t = (ub - eta_(basis_[static_cast<size_t>(r)])) / rate;
            else if (rate < -kPivotTol)
                t = (lb - eta_(basis_[static_cast<size_t>(r)])) / rate;
            else
                continue;
            if (t < 0.0) t = 0.0;
            bool better = t < t_best - kTieTol;
            bool tie = std::abs(t - t_best) <= kTieTol;
            if (better || (tie && std::abs(rate) > std::abs(best_rate) + kTieTol)) {
                t_best = std::min(t_best, t);
                leave = r;
                best_rate = rate;
            }
        }

        double rate_test = 0.0;
        if (ic == test_) {
            rate_test = dir;
        } else {
            int p = test_position();
            if (p >= 0) rate_test = dir * dvec(p);
        }
        double t_cut = kInf;
        if (up ? rate_test > kPivotTol : rate_test < -kPivotTol) {
            t_cut = (cutoff - eta_(test_)) / rate_test;
            if (t_cut < 0.0) t_cut = 0.0;
        }
        if (t_cut <= t_best + kTieTol) {
            for (int r = 0; r < d_; ++r) eta_(basis_[static_cast<size_t>(r)]) += dir * t_cut * dvec(r);
            if (ic != test_) eta_(ic) += dir * t_cut;
            eta_(test_) = cutoff;
            out.s_star = s_cur_;
            out.ok = true;
            push(out);
            finalize(out);
            return out;
        }

        for (int r = 0; r < d_; ++r) eta_(basis_[static_cast<size_t>(r)]) += dir * t_best * dvec(r);
        eta_(ic) += dir * t_best;
        if (leave < 0) {
            state_[static_cast<size_t>(ic)] = dir > 0 ? RowState::at_upper : RowState::at_lower;
            eta_(ic) = dir > 0 ? ub : lb;
        } else {
            int lv = basis_[static_cast<size_t>(leave)];
            bool hit_upper = dir * dvec(leave) > 0.0;
            state_[static_cast<size_t>(lv)] = hit_upper ? RowState::at_upper : RowState::at_lower;
            eta_(lv) = hit_upper ? ub : lb;
            basis_[static_cast<size_t>(leave)] = ic;
            state_[static_cast<size_t>(ic)] = RowState::basic;
            if (!factorize()) {
                out.singular = true;
                return out;
            }
        }
        recompute_basics();
        push(out);

        if (up ? eta_(test_) >= cutoff - kTieTol : eta_(test_) <= cutoff + kTieTol) {
            out.s_star = s_cur_;
            out.ok = true;
            finalize(out);
            return out;
        }

        // ---- advance: move S to the next reduced-cost sign change ----
        Vector b = beta();
        double t_adv = kInf;
        int enter = -1;
        if (state_[static_cast<size_t>(test_)] == RowState::basic) {
            int p = test_position();
            Vector ep = Vector::Zero(d_);
            ep(p) = 1.0;
            Vector v = lu_.transpose().solve(ep);  // d beta / d S
            for (int j = 0; j < m_; ++j) {
                RowState st = state_[static_cast<size_t>(j)];
                if (st == RowState::basic) continue;
                double cbar = s_(j) - phi_.row(j).dot(b);
                double sigma = phi_.row(j).dot(v);
                double t;
                if (up) {
                    if (st == RowState::at_lower && sigma < -kPivotTol)
                        t = cbar / sigma;
                    else if (st == RowState::at_upper && sigma > kPivotTol)
                        t = cbar / sigma;
                    else
                        continue;
                } else {
                    if (st == RowState::at_lower && sigma > kPivotTol)
                        t = -cbar / sigma;
                    else if (st == RowState::at_upper && sigma < -kPivotTol)
                        t = -cbar / sigma;
                    else
                        continue;
                }
                if (t < 0.0) t = 0.0;
                if (t < t_adv - kTieTol) {  // ascending j keeps the smallest row on ties
                    t_adv = t;
                    enter = j;
                }
            }
        } else {
            RowState st = state_[static_cast<size_t>(test_)];
            double cbar = s_cur_ - phi_.row(test_).dot(b);
            if (up && st == RowState::at_lower) {
                t_adv = std::max(0.0, -cbar);
                enter = test_;
            } else if (!up && st == RowState::at_upper) {
                t_adv = std::max(0.0, cbar);
                enter = test_;
            } else {
                // the test coordinate is already pinned past the cutoff side
                out.s_star = s_cur_;
                out.ok = true;
                finalize(out);
                return out;
            }
        }

        if (enter < 0) {
            out.s_star = up ? kInf : -kInf;
            out.ok = true;
            finalize(out);
            return out;
        }
        s_cur_ += up ? t_adv : -t_adv;
        s_(test_) = s_cur_;
        push(out);
        ic = enter;
        dir = state_[static_cast<size_t>(ic)] == RowState::at_lower ? 1 : -1;
    }
}

ThresholdResult sensitivity_driver(const CalibratedModel& m, const Vector& x_new, double cutoff,
                                   bool lower_side) {
    if (m.model_class() != ModelClass::linear)
        throw InvalidInput("sensitivity tracing supports only the unregularized linear class");
    if (!std::isfinite(cutoff) || cutoff > 1.0 - m.alpha)
        throw InvalidInput("cutoff must lie in (-alpha, 1-alpha]");

    ThresholdResult res;
    res.method = ThresholdMethod::sensitivity;
    if (!lower_side && cutoff <= -m.alpha) {
        res.s_star = -kInf;  // the dual coordinate never drops below the box floor
        return res;
    }
    if (lower_side && cutoff < -m.alpha) {
        res.s_star = -kInf;  // every coordinate value clears the cutoff
        return res;
    }

    const int n = m.n();
    const int d = m.d();
    Matrix phi_aug(n + 1, d);
    phi_aug.topRows(n) = m.phi;
    Vector phi_new = evaluate_basis(m.basis, x_new);
    phi_aug.row(n) = phi_new.transpose();
    Vector s_aug(n + 1);
    s_aug.head(n) = m.calib.s;
    s_aug(n) = 0.0;
    const int max_pivots = 10 * (n + d);

    DualTrace tr(phi_aug, s_aug, m.alpha);
    TraceOutcome out =
        tr.run(*m.base_linear, phi_new.dot(m.base_linear->beta), cutoff, lower_side, max_pivots);

    if (!out.ok && out.singular) {
        // Jitter the scores, refit, and retrace once before giving up.
        CounterRng rng(0x7ace5eedULL);
        uint64_t stream = fnv1a64("trace-perturb");
        Vector s_j = m.calib.s;
        for (int i = 0; i < n; ++i)
            s_j(i) += 1e-9 * (1.0 + std::abs(s_j(i))) * (rng.uniform01(stream, static_cast<uint64_t>(i)) - 0.5);
        PinballProblem p;
        p.phi = m.phi;
        p.s = s_j;
        p.alpha = m.alpha;
        QrFit base_j = solve_linear_qr(p);
        Vector s_aug_j(n + 1);
        s_aug_j.head(n) = s_j;
        s_aug_j(n) = 0.0;
        DualTrace tr2(phi_aug, s_aug_j, m.alpha);
        out = tr2.run(base_j, phi_new.dot(base_j.beta), cutoff, lower_side, max_pivots);
        res.perturbed = true;
    }

    if (!out.ok) {
        ThresholdResult bs = lower_side ? lower_threshold_binary_search(m, x_new, cutoff)
                                        : threshold_binary_search(m, x_new, cutoff);
        bs.fallback = true;
        bs.perturbed = res.perturbed;
        return bs;
    }

    res.s_star = out.s_star;
    res.eta_trace = std::move(out.eta_trace);
    res.interp_count = out.interp_count;
    res.iterations = out.pivots;
    return res;
}

}  // namespace

ThresholdResult threshold_sensitivity(const CalibratedModel& m, const Vector& x_new,
                                      double cutoff) {
    return sensitivity_driver(m, x_new, cutoff, false);
}

ThresholdResult lower_threshold_sensitivity(const CalibratedModel& m, const Vector& x_new,
                                            double cutoff) {
    if (std::isfinite(cutoff) && cutoff >= 1.0 - m.alpha) {
        // the dual coordinate never exceeds the box ceiling
        ThresholdResult res;
        res.method = ThresholdMethod::sensitivity;
        res.s_star = kInf;
        return res;
    }
    return sensitivity_driver(m, x_new, cutoff, true);
}

}  // namespace condcal
