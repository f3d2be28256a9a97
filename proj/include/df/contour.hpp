#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "df/geometry.hpp"
#include "df/signature.hpp"

namespace df {

// Regularization knobs of the multicontour.
struct ContourParams {
    MollifierParams mollifier{};
    double delta = 0.05;   // radius of the half-turn replacing the sign change
    double eps_p = 0.0125; // smoothing width, must lie in (0, delta/2)
    double twist = 64.0;   // twist scale: coordinate j is rotated by e^{ij/twist}

    ContourParams() = default;
    ContourParams(MollifierParams mp, double delta_, double eps_p_, double twist_);
};

struct ContourPoint {
    std::vector<Complex> z;
    std::vector<Complex> a_complex;
    Sheet sheet;
    CubePoint base;
};

// Facet list with per-coordinate product index sets, precomputed once per
// signature. own[j]: facets entering the product for A_j on the anchor side
// of coordinate j+1; comp[j]: facets entering the product for 1 - A_j on the
// opposite side.
struct FacetTable {
    Signature sig;
    std::vector<Facet> list;
    std::vector<std::vector<int>> own, comp;

    explicit FacetTable(const Signature& s);
    int count() const { return static_cast<int>(list.size()); }
};

// Smooth nonvanishing deformation of |r|: equals |r| for |r| >= delta and
// follows the half-turn delta*e^{i pi (1 - r/delta)} inside, blended by
// theta_reg over the eps_p window. Satisfies |P(r)| <= max(|r|, delta).
Complex pochhammer_p(const ContourParams& cp, double r);

// The stitched coordinate function on a sheet of the double. The case is
// selected by a_j < 1/2 (both cases agree on 1/3 < a_j < 2/3 for validated
// parameters); a_circ_case evaluates a stated case for the stitching test.
Complex a_circ(const Signature& sig, const ContourParams& cp, std::span<const double> a,
               const Sheet& sheet, int j);
Complex a_circ_case(const Signature& sig, const ContourParams& cp, std::span<const double> a,
                    const Sheet& sheet, int j, bool anchor_side);

// Hot kernel: all N twisted contour coordinates Z_j of a cube point on a
// sheet, without degeneracy checks.
void z_values(const FacetTable& table, const ContourParams& cp, std::span<const double> a,
              const Sheet& sheet, std::span<Complex> z_out);

// Full contour point with configuration-space checks; throws ContourDegenerate
// if any Z_j hits {0,1} or two coordinates collide within floating tolerance.
ContourPoint z_of(const Signature& sig, const ContourParams& cp, const CubePoint& p,
                  const Sheet& sheet);

// d pochhammer_p / dr
Complex pochhammer_p_deriv(const ContourParams& cp, double r);

// Analytic Jacobian matrix dZ_j/da_k (row-major, n x n) by the chain rule
// through psi, the bdf products and the Pochhammer smoothing. Near blowdown
// corners the determinant rests on a cancellation between entries of size
// ~1/r, which finite differences cannot deliver; the analytic form can.
void z_jacobian(const FacetTable& table, const ContourParams& cp, std::span<const double> a,
                const Sheet& sheet, Complex* jac_out);

struct ValidationReport {
    double min_abs_z = 0.0;
    double min_abs_z_minus_one = 0.0;
    double min_pair_separation = 0.0;  // +inf when N = 1
    // Whether every single-facet crossing produces the integer winding
    // pattern of its anchor class. A twist scale too coarse for the chosen
    // delta pushes a winding circle off its puncture and silently changes
    // the homotopy class; this flag is the runtime stand-in for the twist
    // and radius thresholds of the construction.
    bool windings_ok = false;
    bool passed = false;
};

// Sweep all sheets over a tensor grid of interior points and report the
// worst-case distances of Z from 0, from 1, and between coordinate pairs,
// plus the per-facet crossing winding check. Runtime surrogate for the
// distinctness and twist thresholds of the construction.
ValidationReport validate_contour(const Signature& sig, const ContourParams& cp,
                                  int grid_density);

// Deterministic parameter ladder: start from the sup-norm-based delta bound,
// eps_p = delta/4, twist = 64*N; on failure halve delta and double the twist
// scale (twist alone when only the winding check failed, since halving both
// would freeze their ratio). Throws TuningFailure after 20 steps.
ContourParams auto_tune(const Signature& sig, const MollifierParams& mp = MollifierParams{});

// Ladder preferring the widest valid contour: large delta (capped so the
// half-turn tubes stay clear of the case-overlap band) with the smallest
// twist scale that validates. Wide tubes and coarse twist keep the interior
// coincidence gaps fat, which is what makes continued exponents integrable
// at reasonable subdivision depths; the identity itself holds for any
// validated parameters.
ContourParams auto_tune_wide(const Signature& sig, const MollifierParams& mp = MollifierParams{});

}  // namespace df
