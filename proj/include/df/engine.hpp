#pragma once

#include <optional>

#include "df/branch.hpp"
#include "df/contour.hpp"
#include "df/oracle.hpp"
#include "df/quad.hpp"
#include "df/signature.hpp"

namespace df {

struct RegularizedResult {
    Complex value{};                  // signed sum over sheets, canonical order
    std::vector<Complex> per_sheet;   // indexed by sheet mask (sign not applied)
    double error_estimate = 0.0;
    long long evaluations = 0;
    bool converged = false;
    ContourParams contour;
};

struct TheoremReport {
    Complex lhs{};
    Complex rhs{};               // prefactor * direct integral
    Complex prefactor_value{};
    Complex direct_value{};
    double lhs_error = 0.0;
    double direct_error = 0.0;
    Complex fitted_phase{1.0, 0.0};
    double rel_residual = 0.0;
    long long evaluations = 0;
};

// Complex Jacobian determinant det(dZ_j/da_k) by central finite differences
// with per-axis step min(1e-5, half the distance to the cube boundary).
Complex contour_jacobian(const FacetTable& table, const ContourParams& cp,
                         std::span<const double> a, const Sheet& sheet);

// Integrand of the regularized integral on one sheet: the branch-continued
// power product times the contour Jacobian.
Complex pullback_form(const Signature& sig, const ContourParams& cp, const CubePoint& p,
                      const Sheet& sheet, const SheetBranch& branch, const ParamSet& params);

// Signed sheet sum of the pullback integrals over the cube. Defined for
// arbitrary complex parameters (no convergence gate).
RegularizedResult regularized_integral(const Signature& sig, const ParamSet& params,
                                       const ContourParams& cp, const QuadSpec& spec,
                                       WorkPool* pool = nullptr);

// The signed-sum integrand at one point (the quantity regularized_integral
// integrates); exposed for diagnostics and tests.
Complex regularized_integrand_at(const Signature& sig, const ParamSet& params,
                                 const ContourParams& cp, const CubePoint& p);

// Both sides of the identity with a single fitted unit-modulus phase.
// Auto-tunes contour parameters when none are supplied. Throws
// PrefactorNearZero when the comparison is ill-conditioned.
TheoremReport verify_theorem(const Signature& sig, const ParamSet& params, const QuadSpec& spec,
                             WorkPool* pool = nullptr,
                             const std::optional<ContourParams>& cp = std::nullopt);

// The parameter-dependent phase between the sheet sum and prefactor * I,
// known in closed form from the per-facet monodromies: the product over
// facets of -e^{i pi e_S} with e_S the facet exponent sum.
Complex continuation_phase(const Signature& sig, const ParamSet& params);

// One-time per-signature calibration constant for the meromorphic
// continuation, fitted at a convergent reference point.
struct ContinuationCalibration {
    ContourParams contour;
    Complex kappa{1.0, 0.0};
};

// A convergent, non-degenerate reference parameter point for a signature.
ParamSet reference_params(const Signature& sig);

ContinuationCalibration calibrate_continuation(const Signature& sig, const ParamSet& ref,
                                               const QuadSpec& spec, WorkPool* pool = nullptr,
                                               const std::optional<ContourParams>& cp = std::nullopt);

// regularized / (kappa * continuation phase * prefactor): the meromorphic
// continuation of the direct integral, valid off the prefactor zeros.
Complex continued_value(const Signature& sig, const ParamSet& params,
                        const ContinuationCalibration& calib, const QuadSpec& spec,
                        WorkPool* pool = nullptr);

}  // namespace df
