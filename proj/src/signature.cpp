#include "df/signature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace df {

namespace {
constexpr double kPi = std::numbers::pi;
}

Signature::Signature(int l, int m_, int n_) : ell(l), m(m_), n(n_) {
    if (ell < 0 || m < 0 || n < 0)
        throw std::invalid_argument("signature components must be nonnegative");
    if (size() < 1)
        throw std::invalid_argument("signature (0,0,0) is not allowed");
    if (size() > 31)
        throw std::invalid_argument("signature too large");
}

int Signature::group(int j) const {
    if (j < 1 || j > size()) throw std::out_of_range("coordinate index out of range");
    if (j <= ell) return 1;
    if (j <= ell + m) return 2;
    return 3;
}

ParamSet::ParamSet(std::vector<Complex> alpha, std::vector<Complex> beta,
                   std::vector<Complex> gamma_upper)
    : alpha_(std::move(alpha)), beta_(std::move(beta)), gamma_(std::move(gamma_upper)) {
    const std::size_t n = alpha_.size();
    if (beta_.size() != n)
        throw std::invalid_argument("alpha and beta must have equal length");
    if (gamma_.size() != n * (n - 1) / 2)
        throw std::invalid_argument("gamma must have N(N-1)/2 entries");
}

int ParamSet::upper_index(int j, int k) const {
    if (j == k) throw std::domain_error("gamma(j,j) is undefined");
    if (j > k) std::swap(j, k);
    const int n = size();
    if (j < 1 || k > n) throw std::out_of_range("gamma index out of range");
    // row-major upper triangle: (1,2),(1,3),...,(1,n),(2,3),...
    return (j - 1) * n - j * (j - 1) / 2 + (k - j) - 1;
}

const Complex& ParamSet::gamma(int j, int k) const { return gamma_[upper_index(j, k)]; }
Complex& ParamSet::gamma(int j, int k) { return gamma_[upper_index(j, k)]; }

const char* anchor_name(Anchor a) {
    switch (a) {
        case Anchor::Zero: return "0";
        case Anchor::One: return "1";
        default: return "inf";
    }
}

std::vector<Facet> facets(const Signature& sig) {
    std::vector<Facet> out;
    auto emit = [&out](std::uint32_t pool, Anchor anchor) {
        // all nonempty subsets of the pool, ascending bitmask order
        for (std::uint32_t s = (pool & (~pool + 1u)); s != 0;
             s = ((s - pool) & pool) /* next subset */) {
            out.push_back(Facet{s, anchor});
            if (s == pool) break;
        }
    };
    const std::uint32_t i1 = sig.mask_i1(), i2 = sig.mask_i2(), i3 = sig.mask_i3();
    if (i1 | i2) emit(i1 | i2, Anchor::Zero);
    if (i2 | i3) emit(i2 | i3, Anchor::One);
    if (i1 | i3) emit(i1 | i3, Anchor::Infinity);
    return out;
}

Complex alpha_subset(const Signature& sig, const ParamSet& params, std::uint32_t subset) {
    const int n = sig.size();
    Complex acc = 0.0;
    for (int j = 1; j <= n; ++j) {
        if (!((subset >> (j - 1)) & 1u)) continue;
        acc += params.alpha(j);
        for (int k = j + 1; k <= n; ++k)
            if ((subset >> (k - 1)) & 1u) acc += 2.0 * params.gamma(j, k);
    }
    return acc;
}

Complex beta_subset(const Signature& sig, const ParamSet& params, std::uint32_t subset) {
    const int n = sig.size();
    Complex acc = 0.0;
    for (int j = 1; j <= n; ++j) {
        if (!((subset >> (j - 1)) & 1u)) continue;
        acc += params.beta(j);
        for (int k = j + 1; k <= n; ++k)
            if ((subset >> (k - 1)) & 1u) acc += 2.0 * params.gamma(j, k);
    }
    return acc;
}

Complex zeta_subset(const Signature& sig, const ParamSet& params, std::uint32_t subset) {
    const int n = sig.size();
    Complex acc = 0.0;
    for (int j = 1; j <= n; ++j)
        if ((subset >> (j - 1)) & 1u) acc -= params.alpha(j) + params.beta(j);
    for (int j = 1; j <= n; ++j)
        for (int k = j + 1; k <= n; ++k) {
            const bool jin = (subset >> (j - 1)) & 1u;
            const bool kin = (subset >> (k - 1)) & 1u;
            if (jin || kin) acc -= 2.0 * params.gamma(j, k);
        }
    return acc;
}

Complex facet_exponent_sum(const Signature& sig, const ParamSet& params, const Facet& f) {
    switch (f.anchor) {
        case Anchor::Zero: return alpha_subset(sig, params, f.subset);
        case Anchor::One: return beta_subset(sig, params, f.subset);
        default: return zeta_subset(sig, params, f.subset);
    }
}

Complex prefactor(const Signature& sig, const ParamSet& params) {
    const Complex two_i(0.0, 2.0);
    Complex acc = 1.0;
    for (const Facet& f : facets(sig))
        acc *= two_i * std::sin(kPi * facet_exponent_sum(sig, params, f));
    return acc;
}

long long genus_of_polygon_double(int edge_count) {
    if (edge_count < 3)
        throw std::invalid_argument("polygon needs at least 3 edges");
    if (edge_count > 60)
        throw std::invalid_argument("edge count too large for exact arithmetic");
    const long long N = edge_count;
    const long long by_formula = N * (1LL << (N - 3)) - (1LL << (N - 1)) + 1;
    const long long faces = 1LL << N;
    const long long edges = N * (1LL << (N - 1));
    const long long vertices = N * (1LL << (N - 2));
    const long long chi = faces - edges + vertices;
    const long long by_euler = 1 - chi / 2;
    if (chi % 2 != 0 || by_formula != by_euler)
        throw std::invalid_argument("genus cross-computation mismatch");
    return by_formula;
}

}  // namespace df
