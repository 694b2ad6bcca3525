#pragma once

#include <functional>
#include <string>
#include <vector>

#include "condcal/types.hpp"

namespace condcal {

// One-feature interval predicate for group-indicator columns. Endpoints may be
// infinite; inclusivity is tracked so strict sign cells like {x_j > 0} are exact.
struct GroupInterval {
    int feature = 0;
    double lo = -kInf;
    double hi = kInf;
    bool incl_lo = true;
    bool incl_hi = true;

    bool contains(double v) const {
        bool above = incl_lo ? v >= lo : v > lo;
        bool below = incl_hi ? v <= hi : v < hi;
        return above && below;
    }
};

enum class BasisColKind {
    intercept,        // constant 1
    raw_feature,      // x_j verbatim
    group_indicator,  // 1{x_j in interval}
    product,          // x_j * 1{group}
    custom_table,     // covariate column used verbatim (precomputed by the caller)
    custom_fn,        // arbitrary callable column (library use only)
};

struct BasisColumn {
    BasisColKind kind = BasisColKind::intercept;
    int feature = 0;  // raw_feature / product / custom_table column index
    GroupInterval group;
    std::function<double(const Vector&)> fn;
};

struct BasisSpec {
    std::vector<BasisColumn> columns;

    int d() const { return static_cast<int>(columns.size()); }

    static BasisSpec intercept_only();
    // Intercept plus sign cells 1{x_j > 0} for j = 0..k-1.
    static BasisSpec intercept_plus_signs(int k);
    // Indicator columns for a list of closed intervals on one feature.
    static BasisSpec interval_groups(int feature, const std::vector<std::pair<double, double>>& iv);
};

// Basis row Phi(x) in R^d.
Vector evaluate_basis(const BasisSpec& b, const Vector& x);
// Stacked basis matrix, one row per covariate row.
Matrix evaluate_basis(const BasisSpec& b, const Matrix& x);

}  // namespace condcal
