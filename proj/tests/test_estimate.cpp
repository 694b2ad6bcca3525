#include <cmath>
#include <vector>

#include "condcal/estimate.hpp"
#include "condcal/pinball.hpp"
#include "condcal/qr.hpp"
#include "doctest.h"

using namespace condcal;

namespace {

CalibrationSet bump_data(int n, double x0, double height, uint64_t seed) {
    CounterRng rng(seed);
    Matrix x(n, 1);
    Vector s(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = -2.0 + 4.0 * i / (n - 1);
        double b = height * std::exp(-2.0 * (x(i, 0) - x0) * (x(i, 0) - x0));
        s(i) = b + 0.3 * rng.normal(1, static_cast<uint64_t>(i));
    }
    CalibrationSet c;
    c.x = x;
    c.s = s;
    return c;
}

KernelSpec gauss_kernel(double gamma, double lambda) {
    KernelSpec k;
    k.family = KernelFamily::gaussian;
    k.gamma = gamma;
    k.lambda = lambda;
    return k;
}

}  // namespace

TEST_SUITE("estimate") {

TEST_CASE("linear-span tilts report the nominal level exactly") {
    auto c = bump_data(12, 0.0, 1.0, 3);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});
    auto m = fit(c, b, gauss_kernel(0.5, 0.4), 0.2);

    TiltSpec t;
    t.kind = TiltKind::basis_column;
    t.column = 0;
    auto est = rkhs_coverage_estimate(m, t);
    CHECK(est.penalty_term == 0.0);
    CHECK(est.value == 1.0 - m.alpha);
    CHECK(est.base == 1.0 - m.alpha);
    REQUIRE(est.stderr_hint.has_value());
    CHECK(*est.stderr_hint > 0.0);
    CHECK(est.clamped() == est.value);
}

TEST_CASE("kernel-point estimate matches the hand-rolled formula") {
    auto c = bump_data(10, 0.5, 2.0, 11);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto k = gauss_kernel(0.8, 0.3);
    auto m = fit(c, b, k, 0.1);

    Vector x0(1);
    x0 << 0.5;
    TiltSpec t;
    t.kind = TiltKind::kernel_point;
    t.x0 = x0;
    t.nonneg = true;
    auto est = rkhs_coverage_estimate(m, t);

    // independent wiring check: n-weighted refit, reproducing-property inner
    // product, explicit mean
    Matrix phi = Matrix::Ones(10, 1);
    auto fit_n = solve_kernel_qr(gram(k, c.x), phi, c.s, 0.1, k.lambda);
    double inner = 0.0, mean_abs = 0.0;
    for (int i = 0; i < 10; ++i) {
        double kv = kernel_eval(k, Vector(c.x.row(i)), x0);
        inner += fit_n.gamma(i) * kv;
        mean_abs += std::abs(kv);
    }
    mean_abs /= 10.0;
    double want = 1.0 - 0.1 - 2.0 * k.lambda * inner / mean_abs;
    CHECK(est.value == doctest::Approx(want).epsilon(1e-9));
    CHECK(est.penalty_term == doctest::Approx(want - 0.9).epsilon(1e-7));

    // the dual identity gamma = eta / (2 lambda n) pins the fit normalization
    for (int i = 0; i < 10; ++i)
        CHECK(fit_n.gamma(i) ==
              doctest::Approx(fit_n.eta(i) / (2.0 * k.lambda * 10.0)).epsilon(1e-7));
}

TEST_CASE("penalty sign tracks the fitted kernel part at the tilt center") {
    // a strong positive score bump at the center forces a positive kernel fit
    auto c = bump_data(14, -0.5, 3.0, 21);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto k = gauss_kernel(1.0, 0.2);
    auto m = fit(c, b, k, 0.15);

    TiltSpec t;
    t.kind = TiltKind::kernel_point;
    t.x0 = Vector(1);
    t.x0 << -0.5;
    auto est = rkhs_coverage_estimate(m, t);

    auto fit_n = solve_kernel_qr(gram(k, c.x), Matrix::Ones(14, 1), c.s, 0.15, k.lambda);
    double g_at_center = 0.0;
    for (int i = 0; i < 14; ++i)
        g_at_center += fit_n.gamma(i) * kernel_eval(k, Vector(c.x.row(i)), t.x0);
    REQUIRE(std::abs(g_at_center) > 1e-8);
    CHECK(g_at_center > 0.0);
    CHECK(est.penalty_term < 0.0);
    CHECK(est.value < 1.0 - m.alpha);
}

TEST_CASE("gaussian tilts decompose only when widths match the kernel") {
    auto c = bump_data(9, 0.3, 1.5, 5);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    double gamma = 0.7;
    auto m = fit(c, b, gauss_kernel(gamma, 0.5), 0.2);

    TiltSpec g;
    g.kind = TiltKind::gaussian_tilt;
    g.mu = Vector(1);
    g.mu << 0.3;
    g.sigma = std::sqrt(1.0 / (2.0 * gamma));
    auto est_g = rkhs_coverage_estimate(m, g);

    TiltSpec p;
    p.kind = TiltKind::kernel_point;
    p.x0 = g.mu;
    auto est_p = rkhs_coverage_estimate(m, p);
    CHECK(est_g.value == doctest::Approx(est_p.value).epsilon(1e-12));

    g.sigma *= 1.3;
    CHECK_THROWS_AS(rkhs_coverage_estimate(m, g), InvalidInput);

    KernelSpec poly;
    poly.family = KernelFamily::polynomial;
    poly.poly_c = 1.0;
    poly.poly_degree = 2;
    poly.lambda = 0.5;
    auto mp = fit(c, b, poly, 0.2);
    g.sigma = std::sqrt(1.0 / (2.0 * gamma));
    CHECK_THROWS_AS(rkhs_coverage_estimate(mp, g), InvalidInput);
}

TEST_CASE("estimates are invariant to positive tilt rescaling") {
    auto c = bump_data(11, 0.0, 2.0, 31);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto k = gauss_kernel(0.6, 0.35);
    auto m = fit(c, b, k, 0.1);

    TiltSpec t;
    t.kind = TiltKind::custom_table;
    t.coef = Vector(2);
    t.coef << 0.8, 0.4;
    t.points = Matrix(2, 1);
    t.points << -0.4, 0.9;
    auto est1 = rkhs_coverage_estimate(m, t);
    t.coef *= 3.7;
    auto est2 = rkhs_coverage_estimate(m, t);
    CHECK(est1.value == doctest::Approx(est2.value).epsilon(1e-12));
    CHECK(est1.penalty_term == doctest::Approx(est2.penalty_term).epsilon(1e-12));
}

TEST_CASE("flat scores leave no kernel signal") {
    Matrix x(8, 1);
    for (int i = 0; i < 8; ++i) x(i, 0) = 0.5 * i;
    CalibrationSet c;
    c.x = x;
    c.s = Vector::Constant(8, 1.25);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto m = fit(c, b, gauss_kernel(0.5, 0.3), 0.2);

    TiltSpec t;
    t.kind = TiltKind::kernel_point;
    t.x0 = Vector(1);
    t.x0 << 1.0;
    auto est = rkhs_coverage_estimate(m, t);
    CHECK(std::abs(est.penalty_term) <= 1e-6);
    CHECK(est.value == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("estimate validation") {
    auto c = bump_data(8, 0.0, 1.0, 41);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto m_lin = fit(c, b, std::nullopt, 0.2);
    TiltSpec t;
    t.kind = TiltKind::kernel_point;
    t.x0 = Vector::Zero(1);
    CHECK_THROWS_AS(rkhs_coverage_estimate(m_lin, t), InvalidInput);

    auto m = fit(c, b, gauss_kernel(0.5, 0.3), 0.2);
    TiltSpec bad;
    bad.kind = TiltKind::basis_column;
    bad.column = 5;
    CHECK_THROWS_AS(rkhs_coverage_estimate(m, bad), InvalidInput);

    // a tilt that vanishes identically has no usable mean
    TiltSpec tz;
    tz.kind = TiltKind::custom_table;
    tz.coef = Vector::Zero(1);
    tz.points = Matrix::Zero(1, 1);
    CHECK_THROWS_AS(rkhs_coverage_estimate(m, tz), InvalidInput);
}

TEST_CASE("lipschitz coverage bounds are plain arithmetic") {
    auto c = bump_data(10, 0.0, 1.0, 51);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto m = fit_lipschitz(c, b, 0.1, 0.1);

    TiltSpec t;
    t.kind = TiltKind::gaussian_tilt;
    t.mu = Vector::Zero(1);
    t.sigma = 1.0;
    t.nonneg = true;

    auto [lo, hi] = lipschitz_coverage_bounds(m, t, 1.0, 0.5);
    CHECK(lo == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(hi == doctest::Approx(1.1).epsilon(1e-12));  // raw value, clamping is display-only

    auto [lo0, hi0] = lipschitz_coverage_bounds(m, t, 0.0, 0.5);
    CHECK(lo0 == doctest::Approx(0.9));
    CHECK(hi0 == doctest::Approx(0.9));

    auto [lo2, hi2] = lipschitz_coverage_bounds(m, t, 2.0, 1.0);
    CHECK(lo2 == doctest::Approx(lo).epsilon(1e-12));
    CHECK(hi2 == doctest::Approx(hi).epsilon(1e-12));

    CHECK_THROWS_AS(lipschitz_coverage_bounds(m, t, -1.0, 0.5), InvalidInput);
    CHECK_THROWS_AS(lipschitz_coverage_bounds(m, t, 1.0, 0.0), InvalidInput);
    TiltSpec unsigned_t = t;
    unsigned_t.nonneg = false;
    CHECK_THROWS_AS(lipschitz_coverage_bounds(m, unsigned_t, 1.0, 0.5), InvalidInput);
    auto m_lin = fit(c, b, std::nullopt, 0.1);
    CHECK_THROWS_AS(lipschitz_coverage_bounds(m_lin, t, 1.0, 0.5), InvalidInput);
}

TEST_CASE("interpolation diagnostic counts only interpolated rows") {
    CounterRng rng(61);
    int n = 20;
    Matrix x(n, 1);
    Vector s(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = rng.normal(0, static_cast<uint64_t>(i));
        s(i) = 1.5 * rng.normal(1, static_cast<uint64_t>(i)) + 0.7 * x(i, 0);
    }
    CalibrationSet c;
    c.x = x;
    c.s = s;
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});

    TiltSpec one;
    one.kind = TiltKind::basis_column;
    one.column = 0;  // intercept: f = 1
    one.nonneg = true;

    auto m_lin = fit(c, b, std::nullopt, 0.2);
    double diag = interp_diagnostic(m_lin, one);
    // continuous scores: exactly the d basis rows interpolate
    CHECK(diag == doctest::Approx(2.0 / n).epsilon(1e-12));

    // huge-lambda kernel fit: the kernel part is crushed to zero and the bound
    // from the linear part carries over
    auto m_big = fit(c, b, gauss_kernel(0.5, 1e6), 0.2);
    CHECK(interp_diagnostic(m_big, one) <= 2.0 / n + 1e-12);

    auto m_lip = fit_lipschitz(c, b, 0.5, 0.2);
    CHECK(interp_diagnostic(m_lip, one) >= 0.0);
    CHECK(interp_diagnostic(m_lip, one) <= 1.0);
}

TEST_CASE("cross-validation picks the out-of-fold pinball minimizer") {
    // single-value grid
    auto c = bump_data(12, 0.0, 1.5, 71);
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    auto k = gauss_kernel(0.5, 1.0);
    CHECK(cross_validate_lambda(c, b, k, {0.37}, 3, 0.2) == 0.37);

    // leave-one-out on six points matches an exhaustive manual loop
    CalibrationSet c6;
    c6.x = Matrix(6, 1);
    c6.x << -1.0, -0.4, 0.1, 0.6, 1.1, 1.7;
    c6.s = Vector(6);
    c6.s << 0.2, 1.4, 0.9, 2.2, 1.1, 0.5;
    std::vector<double> grid = {0.05, 0.5, 5.0};
    double alpha = 0.3;
    double best = kInf;
    double manual = grid.front();
    for (double lam : grid) {
        double total = 0.0;
        for (int hold = 0; hold < 6; ++hold) {
            Matrix xt(5, 1);
            Vector st(5);
            int r = 0;
            for (int i = 0; i < 6; ++i) {
                if (i == hold) continue;
                xt(r, 0) = c6.x(i, 0);
                st(r) = c6.s(i);
                ++r;
            }
            auto f = solve_kernel_qr(gram(k, xt), Matrix::Ones(5, 1), st, alpha, lam);
            double pred = f.beta(0);
            for (int i = 0; i < 5; ++i)
                pred += f.gamma(i) * kernel_eval(k, Vector(xt.row(i)), Vector(c6.x.row(hold)));
            total += pinball_loss(pred, c6.s(hold), alpha);
        }
        if (total / 6.0 < best) {
            best = total / 6.0;
            manual = lam;
        }
    }
    CHECK(cross_validate_lambda(c6, b, k, grid, 6, alpha) == manual);

    // validation
    CHECK_THROWS_AS(cross_validate_lambda(c, b, k, {}, 3, 0.2), InvalidInput);
    CHECK_THROWS_AS(cross_validate_lambda(c, b, k, {0.0}, 3, 0.2), InvalidInput);
    CHECK_THROWS_AS(cross_validate_lambda(c, b, k, {0.5}, 1, 0.2), InvalidInput);
    CHECK_THROWS_AS(cross_validate_lambda(c, b, k, {0.5}, 13, 0.2), InvalidInput);
    CalibrationSet c3;
    c3.x = Matrix(3, 1);
    c3.x << 0.0, 1.0, 2.0;
    c3.s = Vector(3);
    c3.s << 1.0, 2.0, 3.0;
    CHECK_THROWS_AS(cross_validate_lambda(c3, b, k, {0.5}, 2, 0.2), InvalidInput);
    KernelSpec cg;
    cg.family = KernelFamily::custom_gram;
    cg.custom = Matrix::Identity(12, 12);
    cg.lambda = 1.0;
    CHECK_THROWS_AS(cross_validate_lambda(c, b, cg, {0.5}, 3, 0.2), InvalidInput);
}

TEST_CASE("pure linear structure drives cross-validation to heavy smoothing") {
    CounterRng rng(81);
    int n = 24;
    Matrix x(n, 1);
    Vector s(n);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = -1.5 + 3.0 * i / (n - 1);
        s(i) = 2.0 + 1.5 * x(i, 0) + 0.4 * rng.normal(1, static_cast<uint64_t>(i));
    }
    CalibrationSet c;
    c.x = x;
    c.s = s;
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, {}});
    b.columns.push_back({BasisColKind::raw_feature, 0, {}, {}});
    auto k = gauss_kernel(2.0, 1.0);
    std::vector<double> grid = {0.001, 0.1, 10.0};
    CHECK(cross_validate_lambda(c, b, k, grid, 4, 0.2) == 10.0);
}

}  // TEST_SUITE
