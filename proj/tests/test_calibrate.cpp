#include <algorithm>
#include <cmath>
#include <vector>

#include "condcal/calibrate.hpp"
#include "condcal/dual_simplex.hpp"
#include "condcal/split.hpp"
#include "doctest.h"

using namespace condcal;

namespace {

CalibrationSet make_calib(const Matrix& x, const Vector& s) {
    CalibrationSet c;
    c.x = x;
    c.s = s;
    return c;
}

CalibrationSet random_calib(int n, int p, uint64_t seed) {
    CounterRng rng(seed);
    Matrix x(n, p);
    Vector s(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = rng.normal(1, static_cast<uint64_t>(i * p + j));
        s(i) = 2.0 * rng.normal(2, static_cast<uint64_t>(i)) + 0.5 * x(i, 0);
    }
    return make_calib(x, s);
}

// Independent threshold oracle: fresh augmented LP at each grid point, scan for
// the last imputed score whose test dual coordinate stays below (above) the
// cutoff, then bisect the flip to the requested resolution.
double grid_flip_oracle(const CalibratedModel& m, const Vector& x_new, double cutoff,
                        bool lower_side, double resolution) {
    const int n = m.n();
    Matrix phi_aug(n + 1, m.d());
    phi_aug.topRows(n) = m.phi;
    phi_aug.row(n) = evaluate_basis(m.basis, x_new).transpose();
    Vector s_aug(n + 1);
    s_aug.head(n) = m.calib.s;
    auto eta = [&](double s_imp) {
        s_aug(n) = s_imp;
        return solve_quantile_dual(phi_aug, s_aug, m.alpha, Vector::Ones(n + 1)).eta(n);
    };
    auto past = [&](double s_imp) {
        double e = eta(s_imp);
        return lower_side ? e > cutoff : e >= cutoff;
    };
    double span = m.calib.s.cwiseAbs().maxCoeff() + 1.0;
    double lo = -4.0 * span, hi = 4.0 * span;
    if (!past(hi)) return kInf;
    if (past(lo)) return -kInf;
    while (hi - lo > resolution) {
        double mid = 0.5 * (lo + hi);
        if (past(mid))
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_SUITE("calibrate") {

TEST_CASE("intercept-only base fit and eta_at match the dual box contract") {
    Vector s(9);
    s << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    auto m = fit(make_calib(Matrix::Ones(9, 1), s), BasisSpec::intercept_only(), std::nullopt,
                 0.1);
    Vector x_new = Vector::Ones(1);
    CHECK(m.base_fit_at(x_new) == doctest::Approx(9.0).epsilon(1e-12));

    CHECK(eta_at(m, x_new, 100.0) == doctest::Approx(0.9).epsilon(1e-9));
    CHECK(eta_at(m, x_new, -100.0) == doctest::Approx(-0.1).epsilon(1e-9));
    // strictly inside the data, below the fit
    CHECK(eta_at(m, x_new, 3.5) == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("fit is invariant to calibration row order") {
    auto c = random_calib(14, 2, 71);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});
    auto m1 = fit(c, b, std::nullopt, 0.2);

    std::vector<int> perm = {13, 4, 7, 1, 0, 11, 2, 9, 5, 12, 3, 8, 6, 10};
    Matrix xp(14, 2);
    Vector sp(14);
    for (int i = 0; i < 14; ++i) {
        xp.row(i) = c.x.row(perm[static_cast<size_t>(i)]);
        sp(i) = c.s(perm[static_cast<size_t>(i)]);
    }
    auto m2 = fit(make_calib(xp, sp), b, std::nullopt, 0.2);

    for (int t = 0; t < 5; ++t) {
        Vector x(2);
        x << -1.0 + 0.7 * t, 0.3 * t;
        CHECK(m1.base_fit_at(x) == doctest::Approx(m2.base_fit_at(x)).epsilon(1e-9));
    }
}

TEST_CASE("split-conformal recovery with the intercept-only basis") {
    Vector s(9);
    s << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    auto m = fit(make_calib(Matrix::Ones(9, 1), s), BasisSpec::intercept_only(), std::nullopt,
                 0.1);
    Vector x_new = Vector::Ones(1);

    auto th = threshold_sensitivity(m, x_new, 1.0 - m.alpha);
    CHECK(th.s_star == doctest::Approx(9.0).epsilon(1e-9));
    CHECK(th.method == ThresholdMethod::sensitivity);
    CHECK(!th.fallback);
    CHECK(th.interp_count >= 1);

    ScoreFunction sf{ScoreKind::absolute_residual, nullptr};
    PredictorOutputs out;
    out.mu_hat = 2.5;
    auto pred = predict_set(m, x_new, sf, out, PredictVariant::unrandomized, 1, 0);
    CHECK(pred.set.y_invertible);
    CHECK(pred.set.y_lo == doctest::Approx(2.5 - 9.0));
    CHECK(pred.set.y_hi == doctest::Approx(2.5 + 9.0));

    // random instances: threshold equals the split order statistic exactly
    for (uint64_t seed = 1; seed <= 25; ++seed) {
        CounterRng rng(seed);
        int n = 5 + static_cast<int>(rng.bits(0, 0) % 40);
        double alpha = 0.05 + 0.4 * rng.uniform01(0, 1);
        Vector sc(n);
        for (int i = 0; i < n; ++i) sc(i) = 3.0 * rng.normal(1, static_cast<uint64_t>(i));
        auto mm = fit(make_calib(Matrix::Ones(n, 1), sc), BasisSpec::intercept_only(),
                      std::nullopt, alpha);
        double want = split_conformal_threshold(sc, alpha);
        auto got = threshold_sensitivity(mm, Vector::Ones(1), 1.0 - alpha);
        if (std::isinf(want)) {
            CHECK(got.s_star == kInf);
        } else {
            CHECK(got.s_star == doctest::Approx(want).epsilon(1e-9));
        }
    }
}

TEST_CASE("sensitivity trace matches the grid-refit oracle") {
    for (uint64_t seed = 1; seed <= 12; ++seed) {
        CounterRng rng(seed * 13 + 5);
        int n = 8 + static_cast<int>(rng.bits(9, 0) % 14);
        auto c = random_calib(n, 2, seed * 977 + 3);
        BasisSpec b;
        b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
        b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});
        double alpha = 0.1 + 0.3 * rng.uniform01(7, 0);
        auto m = fit(c, b, std::nullopt, alpha);
        Vector x_new(2);
        x_new << rng.normal(3, 0), rng.normal(3, 1);

        // upper threshold at the deterministic cutoff and at a random draw
        double cuts[2] = {1.0 - alpha, rng.uniform(4, 0, -alpha, 1.0 - alpha)};
        for (double cut : cuts) {
            auto th = threshold_sensitivity(m, x_new, cut);
            double oracle = grid_flip_oracle(m, x_new, cut, false, 1e-7);
            if (std::isinf(oracle)) {
                CHECK(th.s_star == oracle);
            } else {
                CHECK(std::abs(th.s_star - oracle) <= 1e-5 * (1.0 + std::abs(oracle)));
            }
            // trace breakpoints are monotone across distinct S values
            for (size_t i = 1; i < th.eta_trace.size(); ++i) {
                auto [s0, e0] = th.eta_trace[i - 1];
                auto [s1, e1] = th.eta_trace[i];
                if (s1 > s0 + 1e-12) CHECK(e1 >= e0 - 1e-9);
                if (s1 < s0 - 1e-12) CHECK(e1 <= e0 + 1e-9);
            }
        }

        double cut_lo = rng.uniform(5, 0, -alpha, 1.0 - alpha);
        auto tl = lower_threshold_sensitivity(m, x_new, cut_lo);
        double oracle_lo = grid_flip_oracle(m, x_new, cut_lo, true, 1e-7);
        if (std::isinf(oracle_lo)) {
            CHECK(tl.s_star == oracle_lo);
        } else {
            CHECK(std::abs(tl.s_star - oracle_lo) <= 1e-5 * (1.0 + std::abs(oracle_lo)));
        }
    }
}

TEST_CASE("sensitivity trace agrees with binary search") {
    for (uint64_t seed = 40; seed < 52; ++seed) {
        CounterRng rng(seed);
        int n = 10 + static_cast<int>(rng.bits(2, 1) % 16);
        auto c = random_calib(n, 3, seed * 31 + 7);
        BasisSpec b;
        b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
        b.columns.push_back({BasisColKind::raw_feature, 1, {}, {}});
        b.columns.push_back({BasisColKind::raw_feature, 2, {}, {}});
        double alpha = 0.15;
        auto m = fit(c, b, std::nullopt, alpha);
        Vector x_new(3);
        x_new << rng.normal(8, 0), rng.normal(8, 1), rng.normal(8, 2);

        double cut = rng.uniform(6, 0, -alpha + 0.02, 1.0 - alpha);
        auto ts = threshold_sensitivity(m, x_new, cut);
        auto tb = threshold_binary_search(m, x_new, cut);
        double scale = 1.0 + m.calib.s.cwiseAbs().maxCoeff();
        if (std::isinf(ts.s_star)) {
            CHECK(ts.s_star == tb.s_star);
        } else {
            CHECK(std::abs(ts.s_star - tb.s_star) <= 1e-6 * scale);
        }

        auto ls = lower_threshold_sensitivity(m, x_new, cut);
        auto lbs = lower_threshold_binary_search(m, x_new, cut);
        if (std::isinf(ls.s_star)) {
            CHECK(ls.s_star == lbs.s_star);
        } else {
            CHECK(std::abs(ls.s_star - lbs.s_star) <= 1e-6 * scale);
        }
    }
}

TEST_CASE("threshold edge cases and validation") {
    Vector s(5);
    s << 0.3, 1.1, 2.2, 2.9, 4.0;
    auto m = fit(make_calib(Matrix::Ones(5, 1), s), BasisSpec::intercept_only(), std::nullopt,
                 0.25);
    Vector x_new = Vector::Ones(1);

    CHECK(threshold_sensitivity(m, x_new, -0.25).s_star == -kInf);
    CHECK(threshold_binary_search(m, x_new, -0.25).s_star == -kInf);
    CHECK_THROWS_AS(threshold_sensitivity(m, x_new, 0.76), InvalidInput);
    CHECK_THROWS_AS(threshold_binary_search(m, x_new, 0.9), InvalidInput);

    // bisection tolerance contract: coarse and fine eps agree to the coarse eps
    auto coarse = threshold_binary_search(m, x_new, 0.5, 1e-2);
    auto fine = threshold_binary_search(m, x_new, 0.5, 1e-8);
    CHECK(std::abs(coarse.s_star - fine.s_star) <= 1e-2);

    // a small-alpha instance where the augmented quantile index exceeds n
    auto m_inf = fit(make_calib(Matrix::Ones(5, 1), s), BasisSpec::intercept_only(),
                     std::nullopt, 0.05);
    CHECK(split_conformal_threshold(s, 0.05) == kInf);
    CHECK(threshold_sensitivity(m_inf, x_new, 0.95).s_star == kInf);
    CHECK(threshold_binary_search(m_inf, x_new, 0.95).s_star == kInf);

    // sensitivity tracing rejects regularized classes
    KernelSpec ks;
    ks.family = KernelFamily::gaussian;
    ks.gamma = 0.7;
    ks.lambda = 0.3;
    auto mk = fit(random_calib(8, 1, 5), BasisSpec::intercept_only(), ks, 0.2);
    CHECK_THROWS_AS(threshold_sensitivity(mk, Vector::Zero(1), 0.5), InvalidInput);
}

TEST_CASE("monotonicity of the imputed-score map for every class") {
    auto c = random_calib(12, 1, 99);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});
    Vector x_new(1);
    x_new << 0.4;

    auto grid_check = [&](const CalibratedModel& m, double tol) {
        AugmentedSolver solver(m, x_new);
        double span = m.calib.s.cwiseAbs().maxCoeff() + 1.0;
        double prev = -kInf;
        for (int g = 0; g <= 40; ++g) {
            double s_imp = -2.0 * span + 4.0 * span * g / 40.0;
            double e = solver.eta_at(s_imp);
            CHECK(e >= prev - tol);
            CHECK(e >= -m.alpha - 1e-9);
            CHECK(e <= 1.0 - m.alpha + 1e-9);
            prev = e;
        }
    };

    grid_check(fit(c, b, std::nullopt, 0.2), 1e-9);

    KernelSpec ks;
    ks.family = KernelFamily::gaussian;
    ks.gamma = 0.6;
    ks.lambda = 0.25;
    grid_check(fit(c, b, ks, 0.2), 1e-9);

    grid_check(fit_lipschitz(c, b, 0.2, 0.2), 1e-9);
}

TEST_CASE("kernel base fit leaves the appended test coordinate at zero") {
    auto c = random_calib(10, 2, 123);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    KernelSpec ks;
    ks.family = KernelFamily::gaussian;
    ks.gamma = 0.5;
    ks.lambda = 0.4;
    auto m = fit(c, b, ks, 0.2);
    for (int t = 0; t < 3; ++t) {
        Vector x_new(2);
        x_new << -0.8 + 0.9 * t, 0.2 * t;
        double g_hat = m.base_fit_at(x_new);
        CHECK(std::abs(eta_at(m, x_new, g_hat)) <= 1e-6);
    }
}

TEST_CASE("warm-started augmented solves match cold solves") {
    auto c = random_calib(9, 1, 321);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    KernelSpec ks;
    ks.family = KernelFamily::gaussian;
    ks.gamma = 1.1;
    ks.lambda = 0.3;
    auto m = fit(c, b, ks, 0.15);
    Vector x_new(1);
    x_new << 0.25;

    AugmentedSolver warm(m, x_new);
    double span = c.s.cwiseAbs().maxCoeff() + 1.0;
    for (int g = 0; g <= 10; ++g) {
        double s_imp = -span + 2.0 * span * g / 10.0;
        double via_warm = warm.eta_at(s_imp);
        AugmentedSolver cold(m, x_new);
        CHECK(std::abs(via_warm - cold.eta_at(s_imp)) <= 1e-7);
    }
}

TEST_CASE("binary search on regularized classes flips membership once") {
    auto c = random_calib(10, 1, 2024);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    Vector x_new(1);
    x_new << -0.3;

    KernelSpec ks;
    ks.family = KernelFamily::gaussian;
    ks.gamma = 0.8;
    ks.lambda = 0.5;
    auto mk = fit(c, b, ks, 0.2);
    auto th = threshold_binary_search(mk, x_new, 1.0 - mk.alpha);
    CHECK(std::isfinite(th.s_star));

    AugmentedSolver solver(mk, x_new);
    double span = c.s.cwiseAbs().maxCoeff() + 1.0;
    int flips = 0;
    bool prev_in = true;
    for (int g = 0; g <= 60; ++g) {
        double s_imp = -2.0 * span + 4.0 * span * g / 60.0;
        bool inside = solver.eta_at(s_imp) < 1.0 - mk.alpha;
        if (g > 0 && inside != prev_in) {
            ++flips;
            // the flip brackets the reported threshold
            CHECK(th.s_star >= -2.0 * span + 4.0 * span * (g - 1) / 60.0 - 1e-9);
            CHECK(th.s_star <= s_imp + 1e-9);
        }
        prev_in = inside;
    }
    CHECK(flips == 1);

    auto tl = fit_lipschitz(c, b, 0.3, 0.2);
    auto thl = threshold_binary_search(tl, x_new, 1.0 - tl.alpha);
    CHECK(std::isfinite(thl.s_star));
    AugmentedSolver ls(tl, x_new);
    CHECK(ls.eta_at(thl.s_star - 1e-3 * span) < 1.0 - tl.alpha);
    CHECK(ls.eta_at(thl.s_star + 1e-3 * span) >= 1.0 - tl.alpha - 1e-7);
}

TEST_CASE("conservative threshold contains the exact set") {
    for (uint64_t seed = 7; seed < 13; ++seed) {
        auto c = random_calib(11, 2, seed * 41);
        BasisSpec b;
        b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
        b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});
        auto m = fit(c, b, std::nullopt, 0.2);
        Vector x_new(2);
        x_new << 0.1 * static_cast<double>(seed), -0.2;

        double g_hat = m.base_fit_at(x_new);
        CHECK(conservative_threshold(m, x_new, g_hat).s_star ==
              doctest::Approx(g_hat).epsilon(1e-9));

        double m_upper = 3.0 * (c.s.cwiseAbs().maxCoeff() + 1.0);
        auto cons = conservative_threshold(m, x_new, m_upper);
        auto exact = threshold_sensitivity(m, x_new, 1.0 - m.alpha);
        double capped = std::min(exact.s_star, m_upper);
        CHECK(cons.s_star >= capped - 1e-7 * (1.0 + std::abs(capped)));
        CHECK(cons.method == ThresholdMethod::conservative);
    }

    Vector s(9);
    s << 1, 2, 3, 4, 5, 6, 7, 8, 9;
    auto m = fit(make_calib(Matrix::Ones(9, 1), s), BasisSpec::intercept_only(), std::nullopt,
                 0.1);
    auto cons = conservative_threshold(m, Vector::Ones(1), 1e9);
    CHECK(cons.s_star >= split_conformal_threshold(s, 0.1) - 1e-9);
}

TEST_CASE("randomized predictions reproduce their counter streams") {
    auto c = random_calib(12, 1, 888);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto m = fit(c, b, std::nullopt, 0.2);
    Vector x_new(1);
    x_new << 0.0;
    ScoreFunction sf{ScoreKind::identity, nullptr};
    PredictorOutputs out;

    auto p1 = predict_set(m, x_new, sf, out, PredictVariant::randomized, 42, 3);
    auto p2 = predict_set(m, x_new, sf, out, PredictVariant::randomized, 42, 3);
    CHECK(p1.upper.s_star == p2.upper.s_star);
    REQUIRE(p1.draw_upper.has_value());
    CHECK(p1.draw_upper->u == p2.draw_upper->u);

    CounterRng rng(42);
    double expect_u = rng.uniform(fnv1a64("predict-u"), 3, -m.alpha, 1.0 - m.alpha);
    CHECK(p1.draw_upper->u == expect_u);
    CHECK(p1.draw_upper->u >= -m.alpha);
    CHECK(p1.draw_upper->u < 1.0 - m.alpha);

    auto p3 = predict_set(m, x_new, sf, out, PredictVariant::randomized, 42, 4);
    CHECK(p3.draw_upper->u != p1.draw_upper->u);

    // the randomized threshold never exceeds the unrandomized one
    auto pu = predict_set(m, x_new, sf, out, PredictVariant::unrandomized, 42, 3);
    CHECK(p1.upper.s_star <= pu.upper.s_star + 1e-9);
    CHECK(!pu.draw_upper.has_value());
}

TEST_CASE("aps prediction sets collect the admissible labels") {
    Matrix x = Matrix::Ones(7, 1);
    Vector s(7);
    s << 0.0, 0.1, 0.25, 0.4, 0.55, 0.7, 0.8;
    auto m = fit(make_calib(x, s), BasisSpec::intercept_only(), std::nullopt, 0.25);
    // split threshold: ceil(8 * 0.75) = 6th smallest = 0.7
    ScoreFunction sf{ScoreKind::aps_classification, nullptr};
    PredictorOutputs out;
    out.pi = Vector(3);
    out.pi << 0.5, 0.3, 0.2;
    auto pred = predict_set(m, Vector::Ones(1), sf, out, PredictVariant::unrandomized, 0, 0);
    CHECK(pred.upper.s_star == doctest::Approx(0.7));
    // label scores: 0.0 (top class), 0.5, 0.8 -> members are labels 1 and 2
    REQUIRE(pred.set.labels.size() == 2);
    CHECK(pred.set.labels[0] == 1);
    CHECK(pred.set.labels[1] == 2);
}

TEST_CASE("two-sided set on three points covers half the exchangeable ranks") {
    // n = 3, scores (1,2,3), alpha = 0.5: the set must be [1, 3]; the test
    // point is covered exactly when its rank among the four values is 2 or 3.
    Vector s(3);
    s << 1, 2, 3;
    auto c = make_calib(Matrix::Ones(3, 1), s);
    auto m_lo = fit(c, BasisSpec::intercept_only(), std::nullopt, 0.75);
    auto m_hi = fit(c, BasisSpec::intercept_only(), std::nullopt, 0.25);
    ScoreFunction sf{ScoreKind::identity, nullptr};
    PredictorOutputs out;
    auto pred = predict_two_sided(m_lo, m_hi, Vector::Ones(1), sf, out,
                                  PredictVariant::unrandomized, 0, 0);
    CHECK(pred.set.y_lo == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pred.set.y_hi == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("two-sided intercept-only set matches augmented order statistics") {
    Vector s(19);
    for (int i = 0; i < 19; ++i) s(i) = static_cast<double>(i + 1) + 0.01 * i * i;
    auto c = make_calib(Matrix::Ones(19, 1), s);
    double alpha = 0.2;
    auto m_lo = fit(c, BasisSpec::intercept_only(), std::nullopt, 1.0 - alpha / 2.0);
    auto m_hi = fit(c, BasisSpec::intercept_only(), std::nullopt, alpha / 2.0);

    ScoreFunction sf{ScoreKind::identity, nullptr};
    PredictorOutputs out;
    auto pred = predict_two_sided(m_lo, m_hi, Vector::Ones(1), sf, out,
                                  PredictVariant::unrandomized, 0, 0);

    std::vector<double> sorted(s.data(), s.data() + 19);
    std::sort(sorted.begin(), sorted.end());
    // upper: k2 = ceil(20 * 0.9) = 18th smallest; lower is the mirror image,
    // the k2-th largest = (n + 1 - k2) = 2nd smallest
    CHECK(pred.upper.s_star == doctest::Approx(sorted[17]).epsilon(1e-9));
    REQUIRE(pred.lower.has_value());
    CHECK(pred.lower->s_star == doctest::Approx(sorted[1]).epsilon(1e-9));
    CHECK(!pred.set.empty);
    CHECK(pred.set.y_lo == doctest::Approx(sorted[1]));
    CHECK(pred.set.y_hi == doctest::Approx(sorted[17]));

    // grid oracle for the same thresholds
    CHECK(grid_flip_oracle(m_hi, Vector::Ones(1), 1.0 - m_hi.alpha, false, 1e-7) ==
          doctest::Approx(sorted[17]).epsilon(1e-6));
    CHECK(grid_flip_oracle(m_lo, Vector::Ones(1), -m_lo.alpha, true, 1e-7) ==
          doctest::Approx(sorted[1]).epsilon(1e-6));

    // boundary draws equal the unrandomized cutoffs by construction; here we
    // check the randomized draws land in the documented boxes
    auto pr = predict_two_sided(m_lo, m_hi, Vector::Ones(1), sf, out,
                                PredictVariant::randomized, 9, 2);
    REQUIRE(pr.draw_lower.has_value());
    REQUIRE(pr.draw_upper.has_value());
    CHECK(pr.draw_lower->u >= -(1.0 - alpha / 2.0));
    CHECK(pr.draw_lower->u < alpha / 2.0);
    CHECK(pr.draw_upper->u >= -alpha / 2.0);
    CHECK(pr.draw_upper->u < 1.0 - alpha / 2.0);
    CHECK(pr.set.s_lo <= pr.set.s_hi);

    CHECK_THROWS_AS(predict_two_sided(m_lo, m_lo, Vector::Ones(1), sf, out,
                                      PredictVariant::unrandomized, 0, 0),
                    InvalidInput);
    ScoreFunction bad{ScoreKind::absolute_residual, nullptr};
    CHECK_THROWS_AS(predict_two_sided(m_lo, m_hi, Vector::Ones(1), bad, out,
                                      PredictVariant::unrandomized, 0, 0),
                    InvalidInput);
}

TEST_CASE("crossing two-sided thresholds return an explicit empty set") {
    // The score spread pinches to zero at x = 1, so the two conformal quantile
    // lines cross just beyond the data before leverage blows the set up.
    const int n = 20;
    Matrix x(n, 1);
    Vector s(n);
    for (int i = 0; i < n / 2; ++i) {
        double xi = static_cast<double>(i) / (n / 2 - 1);
        x(2 * i, 0) = xi;
        x(2 * i + 1, 0) = xi;
        double spread = 1.0 - xi;
        s(2 * i) = -spread - 0.01 * i;
        s(2 * i + 1) = spread + 0.013 * i;
    }
    auto c = make_calib(x, s);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});
    double alpha = 0.4;
    auto m_lo = fit(c, b, std::nullopt, 1.0 - alpha / 2.0);
    auto m_hi = fit(c, b, std::nullopt, alpha / 2.0);
    ScoreFunction sf{ScoreKind::identity, nullptr};
    PredictorOutputs out;

    auto at = [&](double xn) {
        Vector q(1);
        q << xn;
        return predict_two_sided(m_lo, m_hi, q, sf, out, PredictVariant::unrandomized, 0, 0);
    };

    auto inside = at(1.0);
    CHECK(!inside.set.empty);
    CHECK(inside.set.y_lo <= inside.set.y_hi);

    auto crossed = at(1.5);
    CHECK(crossed.set.empty);
    REQUIRE(crossed.lower.has_value());
    CHECK(crossed.lower->s_star > crossed.upper.s_star);

    // far extrapolation: the appended row has enough leverage to chase any
    // imputed score, so both thresholds escape to infinity
    auto far = at(4.0);
    CHECK(!far.set.empty);
    CHECK(far.upper.s_star == kInf);
    CHECK(far.lower->s_star == -kInf);
}

TEST_CASE("degenerate tied scores stay consistent between methods") {
    Vector s(9);
    s << 1, 1, 2, 2, 2, 3, 3, 4, 4;
    auto m = fit(make_calib(Matrix::Ones(9, 1), s), BasisSpec::intercept_only(), std::nullopt,
                 0.3);
    Vector x_new = Vector::Ones(1);
    auto ts = threshold_sensitivity(m, x_new, 1.0 - m.alpha);
    auto tb = threshold_binary_search(m, x_new, 1.0 - m.alpha);
    CHECK(std::abs(ts.s_star - tb.s_star) <= 1e-6);
    CHECK(ts.s_star == doctest::Approx(split_conformal_threshold(s, 0.3)).epsilon(1e-9));
}

}  // TEST_SUITE
