#pragma once

#include <string>

#include "condcal/types.hpp"

namespace condcal {

enum class KernelFamily {
    gaussian,    // K(x,y) = exp(-gamma |x-y|^2)
    polynomial,  // K(x,y) = (x.y + c)^degree
    custom_gram, // caller-supplied Gram matrix; no out-of-sample evaluation
};

struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double gamma = 1.0;
    double poly_c = 1.0;
    int poly_degree = 2;
    double lambda = 1.0;  // ridge weight on the RKHS norm, must be > 0
    Matrix custom;        // custom_gram only

    void validate() const;
    bool evaluable() const { return family != KernelFamily::custom_gram; }
};

double kernel_eval(const KernelSpec& k, const Vector& a, const Vector& b);

// Gram matrix over the rows of X with a 1e-10 ridge floor on the diagonal.
// Custom Gram matrices are validated (symmetry, PSD within a 1e-8 eigenvalue
// floor) before the same floor is applied.
Matrix gram(const KernelSpec& k, const Matrix& X);

// Cross kernel block K(A_i, B_j); unavailable for custom_gram.
Matrix cross_gram(const KernelSpec& k, const Matrix& A, const Matrix& B);

inline constexpr double kGramRidgeFloor = 1e-10;

}  // namespace condcal
