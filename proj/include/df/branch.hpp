#pragma once

#include <map>
#include <span>
#include <vector>

#include "df/contour.hpp"

namespace df {

// Factor bookkeeping for the multivalued integrand: N factors z_j, N factors
// (1 - z_j), then the N(N-1)/2 difference factors z_k - z_j for j < k in
// lexicographic pair order.
struct FactorLayout {
    int n = 0;

    explicit FactorLayout(int n_) : n(n_) {}
    int count() const { return 2 * n + n * (n - 1) / 2; }
    int z_index(int j) const { return j - 1; }
    int one_minus_z_index(int j) const { return n + j - 1; }
    int pair_index(int j, int k) const;  // 1-based, j < k
};

void factor_values(const FactorLayout& layout, std::span<const Complex> z,
                   std::span<Complex> out);

// Exponent of each factor in the integrand: alpha_j, beta_j, 2*gamma_{j,k},
// in FactorLayout order.
std::vector<Complex> factor_exponents(const Signature& sig, const ParamSet& params);

// Branch data transported along paths: the current factor values together
// with continuously tracked arguments. The tracked argument is snapped to
// principal-value-plus-integer-winding after every step, so a state is a pure
// function of (position, sheet, winding counts) regardless of the path taken.
struct BranchState {
    CubePoint at;
    Sheet sheet;
    std::vector<Complex> values;
    std::vector<double> theta;  // continued argument per factor (snapped)

    Complex log_of(int f) const;  // log|v| + i*theta
};

// State at a point with all arguments on the principal branch (the theta = 0
// normalization of the empty sheet).
BranchState init_branch(const FacetTable& table, const ContourParams& cp, const CubePoint& p,
                        const Sheet& sheet);

// Reusable buffers for allocation-free continuation in inner loops.
struct BranchWorkspace {
    std::vector<Complex> z;
    std::vector<Complex> vals;
    std::vector<Complex> vals_a, vals_b;
    std::vector<double> dtheta_a, dtheta_b;
};

// In-place same-sheet continuation along the straight segment to the target,
// with step-doubling verification of every factor's argument change.
void continue_in_place(const FacetTable& table, const ContourParams& cp, BranchState& st,
                       std::span<const double> target, BranchWorkspace& ws);

// Same-sheet continuation along the straight segment with a geometrically
// graded step schedule (finer toward the target). Straight segments from a
// sheet's base point cross each winding feature at most once, so per-step
// argument caps with bisection recover the exact winding; grading keeps the
// cost logarithmic when the target sits deep inside a half-turn tube.
void continue_graded(const FacetTable& table, const ContourParams& cp, BranchState& st,
                     std::span<const double> target, BranchWorkspace& ws);

// Continue the branch to another (point, sheet) differing in at most one
// facet membership. Same-sheet moves follow the straight cube segment; a
// facet change routes through the facet's blowdown corner, flipping the
// signed bdf through zero. Steps are bisected until every per-step argument
// change is below pi/2. min_steps pre-splits the path (discretization test
// hook). Throws NonvanishingViolated if a factor magnitude drops below 1e-14.
BranchState transport(const FacetTable& table, const ContourParams& cp,
                      const BranchState& state, const CubePoint& to_p, const Sheet& to_sheet,
                      int min_steps = 1);

struct SheetBranch {
    Sheet sheet;
    std::vector<double> offsets;  // per-factor argument offsets, multiples of 2*pi
};

// Per-sheet branch data at the cube center, built by crossing one facet at a
// time in canonical facet order and memoized.
class SheetBranchCache {
public:
    SheetBranchCache(const Signature& sig, const ContourParams& cp);

    const BranchState& state(const Sheet& sheet);
    SheetBranch branch(const Sheet& sheet);
    const FacetTable& table() const { return table_; }
    const CubePoint& base_point() const { return base_; }

private:
    FacetTable table_;
    ContourParams cp_;
    CubePoint base_;
    std::map<std::uint32_t, BranchState> states_;
};

// Transport around the loop through one facet (base sheet -> flipped sheet at
// the same base point) and contract the acquired windings with the exponents.
// Independent of the closed-form per-facet monodromies, which it is tested
// against.
Complex measure_monodromy(const Signature& sig, const ContourParams& cp, const Facet& facet,
                          const ParamSet& params);

// Whether every single-facet crossing acquires the integer winding pattern
// of its anchor class (coordinates in the subset circle their anchor once,
// pairs inside the subset wind once, everything else stays put; all windings
// reversed for the infinity anchor). Used by contour validation.
bool crossing_windings_valid(const Signature& sig, const ContourParams& cp);

}  // namespace df
