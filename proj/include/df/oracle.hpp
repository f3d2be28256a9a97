#pragma once

#include <span>

#include "df/geometry.hpp"
#include "df/quad.hpp"
#include "df/signature.hpp"

namespace df {

// u^s with the u + i0 prescription: principal log with arg 0 on the positive
// axis and arg pi on the negative axis. Throws std::domain_error at u = 0.
Complex pow_i0(double u, Complex s);

// Lanczos approximation with reflection for Re z < 1/2.
Complex gamma_fn(Complex z);
Complex beta_fn(Complex a, Complex b);

// Two-variable Selberg value as a Gamma product; used only as an independent
// cross-check oracle.
Complex selberg2(Complex a, Complex b, Complex c);

// Integrand of the direct integral in cube coordinates, including the
// Jacobian of the fractional-linear coordinate maps on the outer groups.
// Requires an interior point with pairwise-distinct x values. The two-span
// overload takes the endpoint distances 1-a at full precision (quadrature
// tail nodes lose them to rounding otherwise).
Complex direct_integrand(const Signature& sig, const ParamSet& params,
                         std::span<const double> a);
Complex direct_integrand(const Signature& sig, const ParamSet& params,
                         std::span<const double> a, std::span<const double> one_minus_a);

// Verify the convergent-region conditions: all gamma components positive,
// alpha_j and beta_j positive on the middle group, alpha_j and zeta_{j}
// positive on the left group, beta_j and zeta_{j} positive on the right
// group (real parts). Throws NotInConvergentRegion naming the violation.
void require_convergent_region(const Signature& sig, const ParamSet& params);

// Endpoint exponents of each axis of the direct integrand in cube
// coordinates; feeds the quadrature substitution.
std::vector<AxisHint> direct_axis_hints(const Signature& sig, const ParamSet& params);

// The direct integral over the cube, gated on the convergent region.
QuadResult direct_integral(const Signature& sig, const ParamSet& params, const QuadSpec& spec,
                           WorkPool* pool = nullptr);

}  // namespace df
