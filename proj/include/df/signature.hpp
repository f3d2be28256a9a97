#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace df {

using Complex = std::complex<double>;

// Index triple (ell, m, n) of the integration domain
// [-inf,0]^ell x [0,1]^m x [1,inf]^n. Coordinates are numbered 1..N with the
// three groups I1 = {1..ell}, I2 = {ell+1..ell+m}, I3 = {ell+m+1..N}.
struct Signature {
    int ell = 0;
    int m   = 0;
    int n   = 0;

    Signature() = default;
    Signature(int l, int m_, int n_);

    int size() const { return ell + m + n; }

    // group of a 1-based coordinate index: 1, 2 or 3
    int group(int j) const;

    // bitmasks over 1-based indices (bit j-1 represents index j)
    std::uint32_t mask_i1() const { return ((1u << ell) - 1u); }
    std::uint32_t mask_i2() const { return ((1u << m) - 1u) << ell; }
    std::uint32_t mask_i3() const { return ((1u << n) - 1u) << (ell + m); }
    std::uint32_t mask_all() const { return (size() >= 32) ? ~0u : ((1u << size()) - 1u); }
};

// Exponent data: alpha_j, beta_j per coordinate and symmetric gamma_{j,k}.
class ParamSet {
public:
    ParamSet() = default;
    ParamSet(std::vector<Complex> alpha, std::vector<Complex> beta,
             std::vector<Complex> gamma_upper);

    int size() const { return static_cast<int>(alpha_.size()); }

    const Complex& alpha(int j) const { return alpha_.at(j - 1); }
    const Complex& beta(int j) const { return beta_.at(j - 1); }

    // symmetric access, 1-based, j != k
    const Complex& gamma(int j, int k) const;
    Complex& gamma(int j, int k);

    const std::vector<Complex>& alphas() const { return alpha_; }
    const std::vector<Complex>& betas() const { return beta_; }
    const std::vector<Complex>& gammas_upper() const { return gamma_; }

private:
    std::vector<Complex> alpha_, beta_;
    std::vector<Complex> gamma_;  // row-major upper triangle, (j,k) with j<k
    int upper_index(int j, int k) const;
};

enum class Anchor : int { Zero = 0, One = 1, Infinity = 2 };

const char* anchor_name(Anchor a);

// A boundary hypersurface label: the index subset S (as a bitmask) together
// with the coordinate value 0, 1 or infinity it blows down to.
struct Facet {
    std::uint32_t subset = 0;
    Anchor anchor = Anchor::Zero;

    bool contains(int j) const { return (subset >> (j - 1)) & 1u; }
    bool operator==(const Facet& o) const { return subset == o.subset && anchor == o.anchor; }
};

// One copy of the domain inside its double, labeled by the set of facets it
// is reflected across (bitmask over the canonical facet list).
struct Sheet {
    std::uint32_t flipped = 0;

    bool has(int facet_index) const { return (flipped >> facet_index) & 1u; }
    int sign() const { return (__builtin_popcount(flipped) & 1) ? -1 : +1; }
};

// All facets in canonical order: anchor 0 first, then anchor 1, then anchor
// infinity, each block ordered by increasing subset bitmask. Count is
// (2^(ell+m)-1) + (2^(m+n)-1) + (2^(ell+n)-1).
std::vector<Facet> facets(const Signature& sig);

// Sum over S of alpha_j plus 2*gamma_{j,k} over pairs inside S.
Complex alpha_subset(const Signature& sig, const ParamSet& params, std::uint32_t subset);
// Same with beta_j.
Complex beta_subset(const Signature& sig, const ParamSet& params, std::uint32_t subset);
// -sum_{j in S}(alpha_j + beta_j) - 2*sum over pairs meeting S of gamma_{j,k}.
Complex zeta_subset(const Signature& sig, const ParamSet& params, std::uint32_t subset);

// alpha_S, beta_S or zeta_S according to the facet's anchor.
Complex facet_exponent_sum(const Signature& sig, const ParamSet& params, const Facet& f);

// Product over every facet of 2i*sin(pi * facet exponent sum). Empty products
// are 1; an exact zero of any sine factor makes the result 0.
Complex prefactor(const Signature& sig, const ParamSet& params);

// Genus of the double of a convex polygon with edge_count edges, computed by
// the closed formula N*2^(N-3) - 2^(N-1) + 1 and cross-checked against the
// Euler characteristic of the cell decomposition (F = 2^N copies, E = N*2^(N-1),
// V = N*2^(N-2)). Throws std::invalid_argument if edge_count < 3 or if the two
// routes disagree.
long long genus_of_polygon_double(int edge_count);

}  // namespace df
