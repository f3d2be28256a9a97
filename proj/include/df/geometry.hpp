#pragma once

#include <array>
#include <span>
#include <vector>

#include "df/signature.hpp"

namespace df {

// A point of the closed unit cube in the global a-coordinates.
struct CubePoint {
    std::vector<double> a;

    CubePoint() = default;
    explicit CubePoint(std::vector<double> coords) : a(std::move(coords)) {}
    int dim() const { return static_cast<int>(a.size()); }
};

struct MollifierParams {
    double eps = 0.05;  // plateau width parameter, must lie in (0, 1/10]

    MollifierParams() = default;
    explicit MollifierParams(double e);
};

// Mollified Heaviside step: 0 for t <= -2, 1 for t >= 0, strictly increasing
// in between; the normalized cumulative integral of the bump exp(-1/(1-s^2)).
// Evaluated from a precomputed table of high-order quadratures of the bump.
double theta_reg(double t);
double theta_reg_deriv(double t);

// Smooth monotone cap: psi(t) = t for t <= 1-3*eps, psi(t) = 1-2*eps for
// t >= 1-eps, with psi(t) <= t everywhere. Throws std::domain_error for t < 0.
double psi_eps(const MollifierParams& mp, double t);
double psi_eps_deriv(const MollifierParams& mp, double t);

// Map a-coordinates to the x-coordinates of the three interval groups:
// x = 1 - 1/a on I1 (range [-inf, 0]), x = a on I2, x = 1/(1-a) on I3
// (range [1, inf]). Boundary points yield +-infinity where appropriate.
std::vector<double> to_x(const Signature& sig, const CubePoint& p);
void to_x(const Signature& sig, std::span<const double> a, std::span<double> x_out);

// psi values of a point, computed once and shared across facet evaluations
struct PsiValues {
    std::array<double, 32> at_a{};          // psi(a_j)
    std::array<double, 32> at_complement{}; // psi(1 - a_j)
    int n = 0;
};
PsiValues psi_values(const Signature& sig, const MollifierParams& mp,
                     std::span<const double> a);

// Boundary-defining function of a facet in cube coordinates: the square root
// of the alternating product over supersets S0 of the facet subset (within
// its anchor's index pool) of the bracket sums of squared psi values.
// Evaluated in log space. Vanishes exactly on the facet's blowdown locus;
// throws std::domain_error at corner points where an interior superset
// bracket vanishes (0/0).
double rho(const Signature& sig, const MollifierParams& mp, const Facet& facet,
           std::span<const double> a);
double rho_from_psi(const Signature& sig, const Facet& facet, const PsiValues& psi);

// Signed extension to a sheet of the double: -rho if the facet is flipped in
// the sheet, +rho otherwise. facet_index refers to the canonical facet list.
double rho_signed(const Signature& sig, const MollifierParams& mp, const Facet& facet,
                  int facet_index, std::span<const double> a, const Sheet& sheet);

// Max absolute residual, over all coordinates, of the identities recovering
// psi(a_j) and psi(1-a_j) as products of facet bdf values. Self-test; the
// residual is at roundoff scale for interior points.
double check_product_identity(const Signature& sig, const MollifierParams& mp,
                              const CubePoint& p);

}  // namespace df
