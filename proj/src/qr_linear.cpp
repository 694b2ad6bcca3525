#include "condcal/dual_simplex.hpp"
#include "condcal/qr.hpp"

namespace condcal {

Vector PinballProblem::w_hat() const {
    if (weights.size() == 0) return Vector::Ones(m());
    return weights * static_cast<double>(m());
}

void PinballProblem::validate() const {
    check_alpha(alpha);
    if (s.size() == 0) throw InvalidInput("pinball problem has no rows");
    if (phi.rows() != s.size()) throw InvalidInput("phi rows must match score count");
    if (!all_finite(phi) || !all_finite(s)) throw InvalidInput("non-finite pinball inputs");
    if (weights.size() != 0) {
        if (weights.size() != s.size()) throw InvalidInput("weight length mismatch");
        if (!all_finite(weights) || (weights.array() <= 0.0).any())
            throw InvalidInput("weights must be positive and finite");
    }
}

QrFit solve_linear_qr(const PinballProblem& p) {
    p.validate();
    Vector w = p.w_hat();
    DualLpResult lp = solve_quantile_dual(p.phi, p.s, p.alpha, w);
    QrFit fit;
    fit.beta = lp.beta;
    fit.eta = lp.eta;
    fit.basis_rows = lp.basis;
    fit.iterations = lp.iterations;
    Vector fitted = p.phi * fit.beta;
    // Report on the user scale: weighted mean rather than the m-scaled LP value.
    fit.objective = pinball_objective(fitted, p.s, w / p.m(), p.alpha);
    fit.dual_objective = lp.dual_objective / p.m();
    fit.duality_gap = fit.objective - fit.dual_objective;
    return fit;
}

}  // namespace condcal
