#include "df/contour.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "df/branch.hpp"
#include "df/errors.hpp"

namespace df {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kDegenerateTol = 1e-12;
}

ContourParams::ContourParams(MollifierParams mp, double delta_, double eps_p_, double twist_)
    : mollifier(mp), delta(delta_), eps_p(eps_p_), twist(twist_) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (!(eps_p > 0.0) || !(eps_p < delta / 2.0))
        throw std::invalid_argument("eps_p must lie in (0, delta/2)");
    if (!(twist > 0.0)) throw std::invalid_argument("twist scale must be positive");
}

FacetTable::FacetTable(const Signature& s) : sig(s), list(facets(s)) {
    const int n = sig.size();
    own.resize(n);
    comp.resize(n);
    for (int j = 1; j <= n; ++j) {
        const int g = sig.group(j);
        const Anchor own_anchor = (g == 1) ? Anchor::Infinity : (g == 2) ? Anchor::Zero : Anchor::One;
        const Anchor comp_anchor = (g == 1) ? Anchor::Zero : (g == 2) ? Anchor::One : Anchor::Infinity;
        for (int i = 0; i < count(); ++i) {
            if (!list[i].contains(j)) continue;
            if (list[i].anchor == own_anchor) own[j - 1].push_back(i);
            if (list[i].anchor == comp_anchor) comp[j - 1].push_back(i);
        }
    }
}

Complex pochhammer_p(const ContourParams& cp, double r) {
    const double mag = std::abs(r);
    const double th = theta_reg((mag - cp.delta) / cp.eps_p);
    if (th >= 1.0) return Complex(mag, 0.0);
    const Complex arc = cp.delta * std::polar(1.0, kPi * (1.0 - r / cp.delta));
    return th * mag + (1.0 - th) * arc;
}

namespace {

Complex product_case(const FacetTable& table, const ContourParams& cp, const PsiValues& psi,
                     const Sheet& sheet, int j, bool anchor_side) {
    const auto& idx = anchor_side ? table.own[j - 1] : table.comp[j - 1];
    Complex prod = 1.0;
    for (int i : idx) {
        const double r = rho_from_psi(table.sig, table.list[i], psi);
        prod *= pochhammer_p(cp, sheet.has(i) ? -r : r);
    }
    return anchor_side ? prod : 1.0 - prod;
}

Complex z_from_a(int group, Complex a) {
    switch (group) {
        case 1: return -(1.0 - a) / a;
        case 2: return a;
        default: return 1.0 / (1.0 - a);
    }
}

}  // namespace

Complex a_circ_case(const Signature& sig, const ContourParams& cp, std::span<const double> a,
                    const Sheet& sheet, int j, bool anchor_side) {
    const FacetTable table(sig);
    const PsiValues psi = psi_values(sig, cp.mollifier, a);
    return product_case(table, cp, psi, sheet, j, anchor_side);
}

Complex a_circ(const Signature& sig, const ContourParams& cp, std::span<const double> a,
               const Sheet& sheet, int j) {
    return a_circ_case(sig, cp, a, sheet, j, a[j - 1] < 0.5);
}

void z_values(const FacetTable& table, const ContourParams& cp, std::span<const double> a,
              const Sheet& sheet, std::span<Complex> z_out) {
    const Signature& sig = table.sig;
    const int n = sig.size();
    const PsiValues psi = psi_values(sig, cp.mollifier, a);

    // signed Pochhammer values of every facet bdf, shared across coordinates
    Complex p_of_facet[32];
    for (int i = 0; i < table.count(); ++i) {
        const double r = rho_from_psi(sig, table.list[i], psi);
        p_of_facet[i] = pochhammer_p(cp, sheet.has(i) ? -r : r);
    }

    for (int j = 1; j <= n; ++j) {
        Complex circ;
        if (a[j - 1] < 0.5) {
            Complex prod = 1.0;
            for (int i : table.own[j - 1]) prod *= p_of_facet[i];
            circ = prod;
        } else {
            Complex prod = 1.0;
            for (int i : table.comp[j - 1]) prod *= p_of_facet[i];
            circ = 1.0 - prod;
        }
        const Complex twisted = circ * std::polar(1.0, static_cast<double>(j) / cp.twist);
        z_out[j - 1] = z_from_a(sig.group(j), twisted);
    }
}

ContourPoint z_of(const Signature& sig, const ContourParams& cp, const CubePoint& p,
                  const Sheet& sheet) {
    const FacetTable table(sig);
    const int n = sig.size();
    ContourPoint out;
    out.sheet = sheet;
    out.base = p;
    out.z.resize(n);
    out.a_complex.resize(n);

    const PsiValues psi = psi_values(sig, cp.mollifier, p.a);
    Complex p_of_facet[32];
    for (int i = 0; i < table.count(); ++i) {
        const double r = rho_from_psi(sig, table.list[i], psi);
        p_of_facet[i] = pochhammer_p(cp, sheet.has(i) ? -r : r);
    }
    for (int j = 1; j <= n; ++j) {
        Complex circ;
        if (p.a[j - 1] < 0.5) {
            circ = 1.0;
            for (int i : table.own[j - 1]) circ *= p_of_facet[i];
        } else {
            Complex prod = 1.0;
            for (int i : table.comp[j - 1]) prod *= p_of_facet[i];
            circ = 1.0 - prod;
        }
        out.a_complex[j - 1] = circ * std::polar(1.0, static_cast<double>(j) / cp.twist);
        out.z[j - 1] = z_from_a(sig.group(j), out.a_complex[j - 1]);
    }

    for (int j = 0; j < n; ++j) {
        if (std::abs(out.z[j]) < kDegenerateTol || std::abs(out.z[j] - 1.0) < kDegenerateTol) {
            std::ostringstream msg;
            msg << "contour coordinate " << (j + 1) << " degenerated onto {0,1}";
            throw ContourDegenerate(msg.str());
        }
        for (int k = j + 1; k < n; ++k) {
            const double scale = std::max(1.0, std::max(std::abs(out.z[j]), std::abs(out.z[k])));
            if (std::abs(out.z[j] - out.z[k]) < kDegenerateTol * scale) {
                std::ostringstream msg;
                msg << "contour coordinates " << (j + 1) << " and " << (k + 1) << " collided";
                throw ContourDegenerate(msg.str());
            }
        }
    }
    return out;
}

Complex pochhammer_p_deriv(const ContourParams& cp, double r) {
    const double mag = std::abs(r);
    const double sgn = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    const double t = (mag - cp.delta) / cp.eps_p;
    const double th = theta_reg(t);
    if (th >= 1.0) return Complex(sgn, 0.0);
    const double thd = theta_reg_deriv(t) * sgn / cp.eps_p;
    const Complex arc = cp.delta * std::polar(1.0, kPi * (1.0 - r / cp.delta));
    return thd * (mag - arc) + th * sgn + (1.0 - th) * arc * Complex(0.0, -kPi / cp.delta);
}

void z_jacobian(const FacetTable& table, const ContourParams& cp, std::span<const double> a,
                const Sheet& sheet, Complex* jac_out) {
    const Signature& sig = table.sig;
    const int n = sig.size();
    const MollifierParams& mp = cp.mollifier;

    double psi_a[8], psi_c[8], dpsi_a[8], dpsi_c[8];
    for (int k = 0; k < n; ++k) {
        psi_a[k] = psi_eps(mp, a[k]);
        psi_c[k] = psi_eps(mp, 1.0 - a[k]);
        dpsi_a[k] = psi_eps_deriv(mp, a[k]);                 // d psi(a_k) / d a_k
        dpsi_c[k] = -psi_eps_deriv(mp, 1.0 - a[k]);          // d psi(1-a_k) / d a_k
    }

    // per facet: P(signed rho) and the log-derivative of P w.r.t. each a_k
    Complex p_val[32];
    Complex p_logd[32][8];
    for (int i = 0; i < table.count(); ++i) {
        const Facet& f = table.list[i];
        std::uint32_t pool1 = 0, pool2 = 0;
        switch (f.anchor) {
            case Anchor::Zero: pool1 = sig.mask_i1(); pool2 = sig.mask_i2(); break;
            case Anchor::One: pool1 = sig.mask_i2(); pool2 = sig.mask_i3(); break;
            default: pool1 = sig.mask_i3(); pool2 = sig.mask_i1(); break;
        }
        const std::uint32_t pool = pool1 | pool2;
        const std::uint32_t free = pool & ~f.subset;

        double log_acc = 0.0;
        double dlog[8] = {0, 0, 0, 0, 0, 0, 0, 0};
        std::uint32_t sub = 0;
        for (;;) {
            const std::uint32_t s0 = f.subset | sub;
            double bracket = 0.0;
            for (std::uint32_t rest = s0; rest != 0; rest &= rest - 1u) {
                const int k = __builtin_ctz(rest);
                const std::uint32_t bit = 1u << k;
                const double v = (bit & pool1) ? psi_c[k] : psi_a[k];
                bracket += v * v;
            }
            if (bracket <= 0.0)
                throw std::domain_error("jacobian undefined on a blowdown locus");
            const int sign = (__builtin_popcount(sub) & 1) ? -1 : +1;
            log_acc += sign * std::log(bracket);
            for (std::uint32_t rest = s0; rest != 0; rest &= rest - 1u) {
                const int k = __builtin_ctz(rest);
                const std::uint32_t bit = 1u << k;
                const double db = (bit & pool1) ? 2.0 * psi_c[k] * dpsi_c[k]
                                                : 2.0 * psi_a[k] * dpsi_a[k];
                dlog[k] += sign * db / bracket;
            }
            if (sub == free) break;
            sub = (sub - free) & free;
        }
        const double rho_i = std::exp(0.5 * log_acc);
        const double rt = sheet.has(i) ? -rho_i : rho_i;
        p_val[i] = pochhammer_p(cp, rt);
        const Complex dP = pochhammer_p_deriv(cp, rt);
        for (int k = 0; k < n; ++k) {
            const double drho = rho_i * 0.5 * dlog[k];
            const double drt = sheet.has(i) ? -drho : drho;
            p_logd[i][k] = dP * drt / p_val[i];
        }
    }

    for (int j = 1; j <= n; ++j) {
        Complex circ, dcirc[8];
        if (a[j - 1] < 0.5) {
            Complex prod = 1.0;
            Complex logd[8] = {};
            for (int i : table.own[j - 1]) {
                prod *= p_val[i];
                for (int k = 0; k < n; ++k) logd[k] += p_logd[i][k];
            }
            circ = prod;
            for (int k = 0; k < n; ++k) dcirc[k] = prod * logd[k];
        } else {
            Complex prod = 1.0;
            Complex logd[8] = {};
            for (int i : table.comp[j - 1]) {
                prod *= p_val[i];
                for (int k = 0; k < n; ++k) logd[k] += p_logd[i][k];
            }
            circ = 1.0 - prod;
            for (int k = 0; k < n; ++k) dcirc[k] = -prod * logd[k];
        }
        const Complex twist = std::polar(1.0, static_cast<double>(j) / cp.twist);
        const Complex av = circ * twist;
        for (int k = 0; k < n; ++k) {
            const Complex da = dcirc[k] * twist;
            Complex dz;
            switch (sig.group(j)) {
                case 1: dz = da / (av * av); break;          // Z = 1 - 1/A
                case 2: dz = da; break;                      // Z = A
                default: dz = da / ((1.0 - av) * (1.0 - av)); break;  // Z = 1/(1-A)
            }
            jac_out[(j - 1) * n + k] = dz;
        }
    }
}

ValidationReport validate_contour(const Signature& sig, const ContourParams& cp,
                                  int grid_density) {
    if (grid_density < 8) throw std::invalid_argument("grid_density must be >= 8");
    const FacetTable table(sig);
    const int n = sig.size();
    const std::uint32_t n_sheets = 1u << table.count();

    ValidationReport rep;
    rep.min_abs_z = std::numeric_limits<double>::infinity();
    rep.min_abs_z_minus_one = std::numeric_limits<double>::infinity();
    rep.min_pair_separation = std::numeric_limits<double>::infinity();

    std::vector<double> a(n);
    std::vector<Complex> z(n);
    std::vector<int> idx(n, 0);
    const long long n_points = [&] {
        long long t = 1;
        for (int d = 0; d < n; ++d) t *= grid_density;
        return t;
    }();

    for (std::uint32_t sm = 0; sm < n_sheets; ++sm) {
        const Sheet sheet{sm};
        std::fill(idx.begin(), idx.end(), 0);
        for (long long pt = 0; pt < n_points; ++pt) {
            for (int d = 0; d < n; ++d) a[d] = (idx[d] + 0.5) / grid_density;
            z_values(table, cp, a, sheet, z);
            for (int j = 0; j < n; ++j) {
                rep.min_abs_z = std::min(rep.min_abs_z, std::abs(z[j]));
                rep.min_abs_z_minus_one = std::min(rep.min_abs_z_minus_one, std::abs(z[j] - 1.0));
                for (int k = j + 1; k < n; ++k)
                    rep.min_pair_separation =
                        std::min(rep.min_pair_separation, std::abs(z[j] - z[k]));
            }
            for (int d = 0; d < n; ++d) {
                if (++idx[d] < grid_density) break;
                idx[d] = 0;
            }
        }
    }

    // strictly positive, with a floor guarding the coincidence tolerance
    const double floor = 1e-10;
    const bool separated = rep.min_abs_z > floor && rep.min_abs_z_minus_one > floor &&
                           rep.min_pair_separation > floor;
    rep.windings_ok = separated && crossing_windings_valid(sig, cp);
    rep.passed = separated && rep.windings_ok;
    return rep;
}

ContourParams auto_tune(const Signature& sig, const MollifierParams& mp) {
    const FacetTable table(sig);
    const int n = sig.size();

    // sup norm of each bdf over a sample grid of the base copy
    const int density = 16;
    std::vector<double> sup(table.count(), 0.0);
    std::vector<double> a(n);
    std::vector<int> idx(n, 0);
    long long n_points = 1;
    for (int d = 0; d < n; ++d) n_points *= density;
    for (long long pt = 0; pt < n_points; ++pt) {
        for (int d = 0; d < n; ++d) a[d] = (idx[d] + 0.5) / density;
        const PsiValues psi = psi_values(sig, mp, a);
        for (int i = 0; i < table.count(); ++i)
            sup[i] = std::max(sup[i], rho_from_psi(sig, table.list[i], psi));
        for (int d = 0; d < n; ++d) {
            if (++idx[d] < density) break;
            idx[d] = 0;
        }
    }

    double bound = 0.5;
    for (double s : sup) bound /= (1.0 + s);

    double delta = bound;
    double twist = 64.0 * n;
    for (int step = 0; step < 20; ++step) {
        const ContourParams cp(mp, delta, delta / 4.0, twist);
        const ValidationReport rep = validate_contour(sig, cp, 8);
        if (rep.passed) return cp;
        if (rep.min_abs_z > 1e-10 && rep.min_abs_z_minus_one > 1e-10 &&
            rep.min_pair_separation > 1e-10 && !rep.windings_ok) {
            // separation is fine, only the twist is too coarse relative to
            // delta; halving both would freeze their ratio, so grow the
            // twist scale alone
            twist *= 2.0;
        } else {
            delta *= 0.5;
            twist *= 2.0;
        }
    }
    throw TuningFailure("no validated contour parameters found in 20 ladder steps");
}

ContourParams auto_tune_wide(const Signature& sig, const MollifierParams& mp) {
    const int n = sig.size();
    // keep the tubes below the smallest singleton bdf value on the overlap
    // band, so the stitched cases still agree there exactly
    const double band_floor =
        (1.0 / 3.0) / std::sqrt(1.0 / 9.0 + (n - 1) * (1.0 - 2.0 * mp.eps) * (1.0 - 2.0 * mp.eps));
    double delta = std::min(0.18, 0.8 * band_floor);
    for (int step = 0; step < 20; ++step) {
        double twist = 8.0 * n;
        for (int t = 0; t < 10; ++t) {
            const ContourParams cp(mp, delta, delta / 4.0, twist);
            if (validate_contour(sig, cp, 8).passed) return cp;
            twist *= 2.0;
        }
        delta *= 0.7;
    }
    throw TuningFailure("no validated wide contour parameters found");
}

}  // namespace df
