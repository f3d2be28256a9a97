#include "df/geometry.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace df {

MollifierParams::MollifierParams(double e) : eps(e) {
    if (!(eps > 0.0) || !(eps <= 0.1))
        throw std::invalid_argument("mollifier eps must lie in (0, 1/10]");
}

namespace {

double bump(double s) {
    if (std::abs(s) >= 1.0) return 0.0;
    return std::exp(-1.0 / (1.0 - s * s));
}

// Cumulative integral table of the bump over [-1, 1], normalized so the total
// is 1. Knot values are composite 16-point Gauss-Legendre sums; between knots
// a cubic Hermite with the exact derivative bump(s)/c is used.
struct ThetaTable {
    static constexpr int kIntervals = 4096;
    std::array<double, kIntervals + 1> cum{};
    double norm = 0.0;

    ThetaTable() {
        // 16-point Gauss-Legendre nodes/weights on [-1, 1]
        static const double gx[8] = {
            0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
            0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
            0.9445750230732326, 0.9894009349916499};
        static const double gw[8] = {
            0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
            0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
            0.0622535239386479, 0.0271524594117541};
        const double h = 2.0 / kIntervals;
        double acc = 0.0;
        cum[0] = 0.0;
        for (int i = 0; i < kIntervals; ++i) {
            const double lo = -1.0 + i * h;
            const double mid = lo + 0.5 * h;
            double s = 0.0;
            for (int q = 0; q < 8; ++q) {
                s += gw[q] * (bump(mid + 0.5 * h * gx[q]) + bump(mid - 0.5 * h * gx[q]));
            }
            acc += 0.5 * h * s;
            cum[i + 1] = acc;
        }
        norm = acc;
    }
};

const ThetaTable& theta_table() {
    static const ThetaTable table;
    return table;
}

}  // namespace

double theta_reg(double t) {
    if (t <= -2.0) return 0.0;
    if (t >= 0.0) return 1.0;
    const ThetaTable& tab = theta_table();
    const double s = t + 1.0;  // integration variable in [-1, 1]
    const double h = 2.0 / ThetaTable::kIntervals;
    double fi = (s + 1.0) / h;
    int i = static_cast<int>(fi);
    if (i >= ThetaTable::kIntervals) i = ThetaTable::kIntervals - 1;
    const double s0 = -1.0 + i * h;
    const double u = (s - s0) / h;
    const double f0 = tab.cum[i], f1 = tab.cum[i + 1];
    const double d0 = bump(s0) * h, d1 = bump(s0 + h) * h;
    const double u2 = u * u, u3 = u2 * u;
    const double val = (2 * u3 - 3 * u2 + 1) * f0 + (u3 - 2 * u2 + u) * d0 +
                       (-2 * u3 + 3 * u2) * f1 + (u3 - u2) * d1;
    return val / tab.norm;
}

double theta_reg_deriv(double t) {
    if (t <= -2.0 || t >= 0.0) return 0.0;
    return bump(t + 1.0) / theta_table().norm;
}

double psi_eps(const MollifierParams& mp, double t) {
    if (t < 0.0) throw std::domain_error("psi_eps requires t >= 0");
    const double eps = mp.eps;
    if (t <= 1.0 - 3.0 * eps) return t;
    if (t >= 1.0 - eps) return 1.0 - 2.0 * eps;
    // Integral-form blend: slope 1 - theta'(2u-2) stays positive, psi <= t.
    const double u = (t - (1.0 - 3.0 * eps)) / (2.0 * eps);
    return t - eps * theta_reg(2.0 * u - 2.0);
}

double psi_eps_deriv(const MollifierParams& mp, double t) {
    if (t < 0.0) throw std::domain_error("psi_eps requires t >= 0");
    const double eps = mp.eps;
    if (t <= 1.0 - 3.0 * eps) return 1.0;
    if (t >= 1.0 - eps) return 0.0;
    const double u = (t - (1.0 - 3.0 * eps)) / (2.0 * eps);
    return 1.0 - theta_reg_deriv(2.0 * u - 2.0);
}

void to_x(const Signature& sig, std::span<const double> a, std::span<double> x_out) {
    const int n = sig.size();
    for (int j = 1; j <= n; ++j) {
        const double aj = a[j - 1];
        switch (sig.group(j)) {
            case 1:
                x_out[j - 1] = (aj == 0.0) ? -std::numeric_limits<double>::infinity()
                                           : 1.0 - 1.0 / aj;
                break;
            case 2: x_out[j - 1] = aj; break;
            default:
                x_out[j - 1] = (aj == 1.0) ? std::numeric_limits<double>::infinity()
                                           : 1.0 / (1.0 - aj);
                break;
        }
    }
}

std::vector<double> to_x(const Signature& sig, const CubePoint& p) {
    std::vector<double> x(sig.size());
    to_x(sig, p.a, x);
    return x;
}

namespace {

// pool1 members enter the brackets through psi(1-a_j), pool2 through psi(a_j)
void facet_pools(const Signature& sig, Anchor anchor, std::uint32_t& pool1,
                 std::uint32_t& pool2) {
    switch (anchor) {
        case Anchor::Zero: pool1 = sig.mask_i1(); pool2 = sig.mask_i2(); break;
        case Anchor::One: pool1 = sig.mask_i2(); pool2 = sig.mask_i3(); break;
        default: pool1 = sig.mask_i3(); pool2 = sig.mask_i1(); break;
    }
}

}  // namespace

PsiValues psi_values(const Signature& sig, const MollifierParams& mp,
                     std::span<const double> a) {
    PsiValues out;
    out.n = sig.size();
    for (int j = 0; j < out.n; ++j) {
        out.at_a[j] = psi_eps(mp, a[j]);
        out.at_complement[j] = psi_eps(mp, 1.0 - a[j]);
    }
    return out;
}

double rho_from_psi(const Signature& sig, const Facet& facet, const PsiValues& psi) {
    std::uint32_t pool1 = 0, pool2 = 0;
    facet_pools(sig, facet.anchor, pool1, pool2);
    const std::uint32_t pool = pool1 | pool2;
    const std::uint32_t free = pool & ~facet.subset;

    double log_acc = 0.0;
    std::uint32_t sub = 0;
    while (true) {
        const std::uint32_t s0 = facet.subset | sub;
        double bracket = 0.0;
        for (std::uint32_t rest = s0; rest != 0; rest &= rest - 1u) {
            const int j = __builtin_ctz(rest);
            const std::uint32_t bit = 1u << j;
            const double v = (bit & pool1) ? psi.at_complement[j] : psi.at_a[j];
            bracket += v * v;
        }
        if (bracket <= 0.0) {
            if (sub == 0) return 0.0;  // on the facet's own locus
            throw std::domain_error("rho undefined at corner locus (0/0)");
        }
        const int sign = (__builtin_popcount(sub) & 1) ? -1 : +1;
        log_acc += sign * std::log(bracket);
        if (sub == free) break;
        sub = (sub - free) & free;
    }
    return std::exp(0.5 * log_acc);
}

double rho(const Signature& sig, const MollifierParams& mp, const Facet& facet,
           std::span<const double> a) {
    return rho_from_psi(sig, facet, psi_values(sig, mp, a));
}

double rho_signed(const Signature& sig, const MollifierParams& mp, const Facet& facet,
                  int facet_index, std::span<const double> a, const Sheet& sheet) {
    const double r = rho(sig, mp, facet, a);
    return sheet.has(facet_index) ? -r : r;
}

double check_product_identity(const Signature& sig, const MollifierParams& mp,
                              const CubePoint& p) {
    const int n = sig.size();
    const std::vector<Facet> all = facets(sig);
    double worst = 0.0;
    for (int j = 1; j <= n; ++j) {
        const int g = sig.group(j);
        // anchor families recovering psi(a_j) and psi(1 - a_j)
        const Anchor for_a = (g == 1) ? Anchor::Infinity : (g == 2) ? Anchor::Zero : Anchor::One;
        const Anchor for_1ma = (g == 1) ? Anchor::Zero : (g == 2) ? Anchor::One : Anchor::Infinity;
        double prod_a = 1.0, prod_1ma = 1.0;
        for (const Facet& f : all) {
            if (!f.contains(j)) continue;
            if (f.anchor == for_a) prod_a *= rho(sig, mp, f, p.a);
            if (f.anchor == for_1ma) prod_1ma *= rho(sig, mp, f, p.a);
        }
        worst = std::max(worst, std::abs(prod_a - psi_eps(mp, p.a[j - 1])));
        worst = std::max(worst, std::abs(prod_1ma - psi_eps(mp, 1.0 - p.a[j - 1])));
    }
    return worst;
}

}  // namespace df
