#include "df/oracle.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "df/errors.hpp"

namespace df {

namespace {
constexpr double kPi = std::numbers::pi;
}

Complex pow_i0(double u, Complex s) {
    if (u == 0.0) throw std::domain_error("pow_i0 undefined at u = 0");
    const double arg = (u > 0.0) ? 0.0 : kPi;
    return std::exp(s * Complex(std::log(std::abs(u)), arg));
}

Complex gamma_fn(Complex z) {
    // Lanczos, g = 7, 9 coefficients
    static const double coef[9] = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (z.real() < 0.5) {
        // reflection; poles at nonpositive integers surface as overflow
        const Complex s = std::sin(kPi * z);
        if (std::abs(s) == 0.0) throw std::domain_error("gamma_fn pole");
        return kPi / (s * gamma_fn(1.0 - z));
    }
    z -= 1.0;
    Complex x = coef[0];
    for (int i = 1; i < 9; ++i) x += coef[i] / (z + static_cast<double>(i));
    const Complex t = z + 7.5;
    return std::sqrt(2.0 * kPi) * std::pow(t, z + 0.5) * std::exp(-t) * x;
}

Complex beta_fn(Complex a, Complex b) { return gamma_fn(a) * gamma_fn(b) / gamma_fn(a + b); }

Complex selberg2(Complex a, Complex b, Complex c) {
    Complex acc = 1.0;
    for (int j = 0; j <= 1; ++j) {
        const double jd = j;
        acc *= gamma_fn(a + jd * c) * gamma_fn(b + jd * c) * gamma_fn(1.0 + (jd + 1.0) * c) /
               (gamma_fn(a + b + (2.0 + jd - 1.0) * c) * gamma_fn(1.0 + c));
    }
    return acc;
}

Complex direct_integrand(const Signature& sig, const ParamSet& params,
                         std::span<const double> a, std::span<const double> one_minus_a) {
    const int n = sig.size();

    // log-space accumulation so the wide dynamic range of the outer-group
    // factors (|x| up to ~1/a) cannot underflow intermediate products
    Complex log_acc = 0.0;
    double x[8];
    for (int j = 1; j <= n; ++j) {
        const double aj = a[j - 1];
        const double cj = one_minus_a[j - 1];
        if (aj <= 0.0 || cj <= 0.0)
            throw std::domain_error("direct integrand requires an interior point");
        const double la = std::log(aj), lc = std::log(cj);
        switch (sig.group(j)) {
            case 1:
                // x = -(1-a)/a < 0, 1-x = 1/a > 0, dx/da = 1/a^2
                x[j - 1] = -cj / aj;
                log_acc += params.alpha(j) * Complex(lc - la, kPi);
                log_acc += params.beta(j) * (-la);
                log_acc += -2.0 * la;
                break;
            case 2:
                // x = a, 1-x = 1-a
                x[j - 1] = aj;
                log_acc += params.alpha(j) * la;
                log_acc += params.beta(j) * lc;
                break;
            default:
                // x = 1/(1-a) > 1, 1-x = -a/(1-a) < 0, dx/da = 1/(1-a)^2
                x[j - 1] = 1.0 / cj;
                log_acc += params.alpha(j) * (-lc);
                log_acc += params.beta(j) * Complex(la - lc, kPi);
                log_acc += -2.0 * lc;
                break;
        }
    }
    for (int j = 1; j <= n; ++j)
        for (int k = j + 1; k <= n; ++k) {
            const double diff = x[k - 1] - x[j - 1];
            if (diff == 0.0) {
                // continuous limit when the difference power decays
                if (params.gamma(j, k).real() > 0.0) return Complex(0.0, 0.0);
                throw std::domain_error("direct integrand singular at coincident coordinates");
            }
            log_acc += 2.0 * params.gamma(j, k) *
                       Complex(std::log(std::abs(diff)), diff > 0.0 ? 0.0 : kPi);
        }
    return std::exp(log_acc);
}

Complex direct_integrand(const Signature& sig, const ParamSet& params,
                         std::span<const double> a) {
    const int n = sig.size();
    double ac[8];
    for (int j = 0; j < n; ++j) ac[j] = 1.0 - a[j];
    return direct_integrand(sig, params, a, std::span<const double>(ac, n));
}

void require_convergent_region(const Signature& sig, const ParamSet& params) {
    const int n = sig.size();
    std::ostringstream msg;
    for (int j = 1; j <= n; ++j)
        for (int k = j + 1; k <= n; ++k)
            if (!(params.gamma(j, k).real() > 0.0)) {
                msg << "gamma_" << j << "," << k << " must be positive";
                throw NotInConvergentRegion(msg.str());
            }
    for (int j = 1; j <= n; ++j) {
        const int g = sig.group(j);
        const Complex zeta_j = zeta_subset(sig, params, 1u << (j - 1));
        if (g == 2) {
            if (!(params.alpha(j).real() > 0.0)) {
                msg << "alpha_" << j << " must be positive";
                throw NotInConvergentRegion(msg.str());
            }
            if (!(params.beta(j).real() > 0.0)) {
                msg << "beta_" << j << " must be positive";
                throw NotInConvergentRegion(msg.str());
            }
        } else if (g == 1) {
            if (!(params.alpha(j).real() > 0.0)) {
                msg << "alpha_" << j << " must be positive";
                throw NotInConvergentRegion(msg.str());
            }
            if (!(zeta_j.real() > 0.0)) {
                msg << "zeta_{" << j << "} must be positive";
                throw NotInConvergentRegion(msg.str());
            }
        } else {
            if (!(params.beta(j).real() > 0.0)) {
                msg << "beta_" << j << " must be positive";
                throw NotInConvergentRegion(msg.str());
            }
            if (!(zeta_j.real() > 0.0)) {
                msg << "zeta_{" << j << "} must be positive";
                throw NotInConvergentRegion(msg.str());
            }
        }
    }
}

std::vector<AxisHint> direct_axis_hints(const Signature& sig, const ParamSet& params) {
    const int n = sig.size();
    std::vector<AxisHint> hints(n);
    for (int j = 1; j <= n; ++j) {
        const double alpha = params.alpha(j).real();
        const double beta = params.beta(j).real();
        const double zeta = zeta_subset(sig, params, 1u << (j - 1)).real();
        switch (sig.group(j)) {
            case 1: hints[j - 1] = {zeta - 2.0, alpha}; break;  // a=0 is x=-inf
            case 2: hints[j - 1] = {alpha, beta}; break;
            default: hints[j - 1] = {beta, zeta - 2.0}; break;  // a=1 is x=+inf
        }
    }
    return hints;
}

QuadResult direct_integral(const Signature& sig, const ParamSet& params, const QuadSpec& spec,
                           WorkPool* pool) {
    require_convergent_region(sig, params);
    const std::vector<AxisHint> hints = direct_axis_hints(sig, params);
    EndpointIntegrand f = [&sig, &params](std::span<const double> a,
                                          std::span<const double> one_minus_a, int) {
        return direct_integrand(sig, params, a, one_minus_a);
    };
    return integrate_endpoint_singular(f, sig.size(), spec, hints, pool);
}

}  // namespace df
