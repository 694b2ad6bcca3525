#include "condcal/basis.hpp"

namespace condcal {

namespace {

double feature_at(const Vector& x, int j, const char* what) {
    if (j < 0 || j >= x.size())
        throw InvalidInput(std::string(what) + " feature index out of range");
    return x(j);
}

}  // namespace

BasisSpec BasisSpec::intercept_only() {
    BasisSpec b;
    b.columns.push_back({BasisColKind::intercept, 0, {}, nullptr});
    return b;
}

BasisSpec BasisSpec::intercept_plus_signs(int k) {
    BasisSpec b = intercept_only();
    for (int j = 0; j < k; ++j) {
        BasisColumn c;
        c.kind = BasisColKind::group_indicator;
        c.group = GroupInterval{j, 0.0, kInf, false, true};  // {x_j > 0}
        b.columns.push_back(c);
    }
    return b;
}

BasisSpec BasisSpec::interval_groups(int feature,
                                     const std::vector<std::pair<double, double>>& iv) {
    BasisSpec b;
    for (const auto& [lo, hi] : iv) {
        BasisColumn c;
        c.kind = BasisColKind::group_indicator;
        c.group = GroupInterval{feature, lo, hi, true, true};
        b.columns.push_back(c);
    }
    return b;
}

Vector evaluate_basis(const BasisSpec& b, const Vector& x) {
    if (b.columns.empty()) throw InvalidInput("basis has no columns");
    Vector phi(b.d());
    for (int j = 0; j < b.d(); ++j) {
        const BasisColumn& c = b.columns[static_cast<size_t>(j)];
        switch (c.kind) {
            case BasisColKind::intercept:
                phi(j) = 1.0;
                break;
            case BasisColKind::raw_feature:
                phi(j) = feature_at(x, c.feature, "raw-feature");
                break;
            case BasisColKind::group_indicator:
                phi(j) = c.group.contains(feature_at(x, c.group.feature, "group-indicator"))
                             ? 1.0
                             : 0.0;
                break;
            case BasisColKind::product:
                phi(j) = feature_at(x, c.feature, "product") *
                         (c.group.contains(feature_at(x, c.group.feature, "product")) ? 1.0 : 0.0);
                break;
            case BasisColKind::custom_table:
                phi(j) = feature_at(x, c.feature, "custom-table");
                break;
            case BasisColKind::custom_fn:
                if (!c.fn) throw InvalidInput("custom basis column has no callable");
                phi(j) = c.fn(x);
                break;
        }
    }
    if (!all_finite(phi)) throw InvalidInput("basis row evaluates to non-finite values");
    return phi;
}

Matrix evaluate_basis(const BasisSpec& b, const Matrix& x) {
    Matrix phi(x.rows(), b.d());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        phi.row(i) = evaluate_basis(b, Vector(x.row(i))).transpose();
    return phi;
}

}  // namespace condcal
