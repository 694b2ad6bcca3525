#include "condcal/kernel.hpp"

#include <cmath>

namespace condcal {

void KernelSpec::validate() const {
    if (!(lambda > 0.0)) throw InvalidInput("kernel lambda must be positive");
    switch (family) {
        case KernelFamily::gaussian:
            if (!(gamma > 0.0)) throw InvalidInput("gaussian kernel gamma must be positive");
            break;
        case KernelFamily::polynomial:
            if (poly_degree < 1) throw InvalidInput("polynomial kernel degree must be >= 1");
            if (poly_c < 0.0) throw InvalidInput("polynomial kernel offset must be >= 0");
            break;
        case KernelFamily::custom_gram:
            if (custom.rows() == 0 || custom.rows() != custom.cols())
                throw InvalidInput("custom Gram matrix must be square and nonempty");
            break;
    }
}

double kernel_eval(const KernelSpec& k, const Vector& a, const Vector& b) {
    switch (k.family) {
        case KernelFamily::gaussian:
            return std::exp(-k.gamma * (a - b).squaredNorm());
        case KernelFamily::polynomial:
            return std::pow(a.dot(b) + k.poly_c, k.poly_degree);
        case KernelFamily::custom_gram:
            throw InvalidInput("custom Gram kernels cannot be evaluated at new points");
    }
    throw InvalidInput("unknown kernel family");
}

Matrix gram(const KernelSpec& k, const Matrix& X) {
    k.validate();
    const Eigen::Index m = X.rows();
    Matrix K(m, m);
    if (k.family == KernelFamily::custom_gram) {
        if (k.custom.rows() != m)
            throw InvalidInput("custom Gram size does not match the data");
        if (!all_finite(k.custom)) throw InvalidInput("custom Gram has non-finite entries");
        double scale = std::max(1.0, k.custom.cwiseAbs().maxCoeff());
        if ((k.custom - k.custom.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
            throw InvalidInput("custom Gram matrix is not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (k.custom + k.custom.transpose()),
                                                 Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-8 * scale)
            throw InvalidInput("custom Gram matrix is not positive semidefinite");
        K = 0.5 * (k.custom + k.custom.transpose());
    } else {
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                double v = kernel_eval(k, X.row(i), X.row(j));
                K(i, j) = v;
                K(j, i) = v;
            }
        }
    }
    K.diagonal().array() += kGramRidgeFloor;
    return K;
}

Matrix cross_gram(const KernelSpec& k, const Matrix& A, const Matrix& B) {
    Matrix K(A.rows(), B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < B.rows(); ++j) K(i, j) = kernel_eval(k, A.row(i), B.row(j));
    return K;
}

}  // namespace condcal
