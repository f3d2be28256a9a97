#include "df/engine.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "df/errors.hpp"

namespace df {

namespace {
constexpr double kPi = std::numbers::pi;

Complex det_complex(const Complex m[4][4], int n) {
    switch (n) {
        case 1: return m[0][0];
        case 2: return m[0][0] * m[1][1] - m[0][1] * m[1][0];
        case 3:
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                   m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                   m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        default: {
            // Laplace expansion along the first row (n = 4)
            Complex acc = 0.0;
            for (int c = 0; c < 4; ++c) {
                Complex sub[4][4];
                for (int r = 1; r < 4; ++r) {
                    int cc = 0;
                    for (int c2 = 0; c2 < 4; ++c2) {
                        if (c2 == c) continue;
                        sub[r - 1][cc++] = m[r][c2];
                    }
                }
                const Complex minor = det_complex(sub, 3);
                acc += ((c & 1) ? -1.0 : 1.0) * m[0][c] * minor;
            }
            return acc;
        }
    }
}

}  // namespace

Complex contour_jacobian(const FacetTable& table, const ContourParams& cp,
                         std::span<const double> a, const Sheet& sheet) {
    const int n = table.sig.size();
    Complex flat[16];
    z_jacobian(table, cp, a, sheet, flat);
    Complex m[4][4];
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) m[j][k] = flat[j * n + k];
    return det_complex(m, n);
}

namespace {

// branch state at the cube center of a sheet, rebuilt from stored offsets
BranchState center_state_from_branch(const FacetTable& table, const ContourParams& cp,
                                     const SheetBranch& branch) {
    CubePoint center;
    center.a.assign(table.sig.size(), 0.5);
    BranchState st = init_branch(table, cp, center, branch.sheet);
    for (std::size_t f = 0; f < st.theta.size(); ++f) st.theta[f] += branch.offsets[f];
    return st;
}

struct CompensatedComplex {
    double sr = 0, cr = 0, si = 0, ci = 0;
    void add(Complex v) {
        auto part = [](double& s, double& c, double x) {
            const double t = s + x;
            if (std::abs(s) >= std::abs(x))
                c += (s - t) + x;
            else
                c += (x - t) + s;
            s = t;
        };
        part(sr, cr, v.real());
        part(si, ci, v.imag());
    }
    Complex sum() const { return Complex(sr + cr, si + ci); }
};

// Shared evaluator of all sheet integrands at one point. Away from a facet's
// half-turn tube the two bdf signs give bit-identical Pochhammer values, so
// two sheets that differ only in inactive facets have integrands equal up to
// the constant phase fixed by their winding offsets. Per point only the
// 2^|active| class representatives (sheets that are subsets of the active
// facet set) are evaluated; everything else is a table lookup.
class SheetSumEvaluator {
public:
    SheetSumEvaluator(const FacetTable& table, const ContourParams& cp, const ParamSet& params,
                      SheetBranchCache& cache, int n_workers)
        : table_(table), cp_(cp), exponents_(factor_exponents(table.sig, params)),
          n_(table.sig.size()), nf_(table.count()) {
        const std::uint32_t n_sheets = 1u << nf_;
        centers_.resize(n_sheets);
        phase_.resize(n_sheets);
        inv_phase_.resize(n_sheets);
        sign_.resize(n_sheets);
        for (std::uint32_t s = 0; s < n_sheets; ++s) {
            centers_[s] = &cache.state(Sheet{s});
            Complex theta = 0.0;
            const BranchState& base = cache.state(Sheet{0});
            for (std::size_t f = 0; f < exponents_.size(); ++f)
                theta += exponents_[f] * (centers_[s]->theta[f] - base.theta[f]);
            phase_[s] = std::exp(Complex(0.0, 1.0) * theta);
            inv_phase_[s] = 1.0 / phase_[s];
            sign_[s] = (Sheet{s}.sign() > 0) ? 1.0 : -1.0;
        }
        // signed phase totals per active set and class representative:
        // weight[A][c] = sum over sheets F with F & A == c of sign(F) phase(F)
        weights_.resize(n_sheets);
        for (std::uint32_t a = 0; a < n_sheets; ++a) {
            std::vector<Complex>& w = weights_[a];
            w.assign(1u << __builtin_popcount(a), Complex(0.0, 0.0));
            for (std::uint32_t f = 0; f < n_sheets; ++f)
                w[compress(f & a, a)] += sign_[f] * phase_[f];
        }
        scratch_.resize(static_cast<std::size_t>(n_workers));
    }

    int facet_count() const { return nf_; }
    Complex sheet_phase(std::uint32_t mask) const { return phase_[mask]; }

    // signed sum over all sheets (steering integrand)
    Complex total(std::span<const double> a, int worker) {
        Scratch& sc = scratch_[static_cast<std::size_t>(worker)];
        const std::uint32_t active = active_set(a, sc);
        evaluate_classes(a, active, sc);
        const std::vector<Complex>& w = weights_[active];
        Complex acc = 0.0;
        std::uint32_t c = 0;
        std::size_t idx = 0;
        for (;;) {
            acc += sc.class_vals[idx] * inv_phase_[c] * w[idx];
            ++idx;
            if (c == active) break;
            c = (c - active) & active;
        }
        return acc;
    }

    // per-sheet values at one point, in sheet-mask order (sign not applied)
    void components(std::span<const double> a, int worker, std::span<Complex> out) {
        Scratch& sc = scratch_[static_cast<std::size_t>(worker)];
        const std::uint32_t active = active_set(a, sc);
        evaluate_classes(a, active, sc);
        const std::uint32_t n_sheets = 1u << nf_;
        for (std::uint32_t f = 0; f < n_sheets; ++f) {
            const std::uint32_t c = f & active;
            out[f] = sc.class_vals[compress(c, active)] * inv_phase_[c] * phase_[f];
        }
    }

private:
    struct Scratch {
        BranchState st;
        BranchWorkspace ws;
        std::vector<Complex> class_vals;
    };

    const FacetTable& table_;
    ContourParams cp_;
    std::vector<Complex> exponents_;
    int n_, nf_;
    std::vector<const BranchState*> centers_;
    std::vector<Complex> phase_, inv_phase_;
    std::vector<double> sign_;
    std::vector<std::vector<Complex>> weights_;
    std::vector<Scratch> scratch_;

    // index of subset c within the subsets of mask a (bits of c packed)
    static std::uint32_t compress(std::uint32_t c, std::uint32_t a) {
        std::uint32_t idx = 0, bit = 1;
        for (std::uint32_t m = a; m != 0; m &= m - 1) {
            if (c & (m & ~(m - 1))) idx |= bit;
            bit <<= 1;
        }
        return idx;
    }

    std::uint32_t active_set(std::span<const double> a, Scratch&) const {
        const PsiValues psi = psi_values(table_.sig, cp_.mollifier, a);
        std::uint32_t active = 0;
        for (int i = 0; i < nf_; ++i)
            if (rho_from_psi(table_.sig, table_.list[i], psi) < cp_.delta) active |= 1u << i;
        return active;
    }

    void evaluate_classes(std::span<const double> a, std::uint32_t active, Scratch& sc) {
        sc.class_vals.resize(1u << __builtin_popcount(active));
        std::uint32_t c = 0;
        std::size_t idx = 0;
        for (;;) {
            // fresh continuation from the sheet's base state; straight paths
            // from the base point keep every winding single-crossing
            sc.st = *centers_[c];
            continue_graded(table_, cp_, sc.st, a, sc.ws);
            Complex log_sum = 0.0;
            for (std::size_t f = 0; f < exponents_.size(); ++f)
                log_sum += exponents_[f] * sc.st.log_of(f);
            sc.class_vals[idx] =
                std::exp(log_sum) * contour_jacobian(table_, cp_, a, Sheet{c});
            ++idx;
            if (c == active) break;
            c = (c - active) & active;
        }
    }
};

}  // namespace

Complex pullback_form(const Signature& sig, const ContourParams& cp, const CubePoint& p,
                      const Sheet& sheet, const SheetBranch& branch, const ParamSet& params) {
    const FacetTable table(sig);
    BranchState st = center_state_from_branch(table, cp, branch);
    BranchWorkspace ws;
    continue_in_place(table, cp, st, p.a, ws);
    const std::vector<Complex> exps = factor_exponents(sig, params);
    Complex log_sum = 0.0;
    for (std::size_t f = 0; f < exps.size(); ++f) log_sum += exps[f] * st.log_of(f);
    return std::exp(log_sum) * contour_jacobian(table, cp, p.a, sheet);
}

Complex regularized_integrand_at(const Signature& sig, const ParamSet& params,
                                 const ContourParams& cp, const CubePoint& p) {
    SheetBranchCache cache(sig, cp);
    const FacetTable& table = cache.table();
    SheetSumEvaluator eval(table, cp, params, cache, 1);
    return eval.total(p.a, 0);
}

RegularizedResult regularized_integral(const Signature& sig, const ParamSet& params,
                                       const ContourParams& cp, const QuadSpec& spec,
                                       WorkPool* pool) {
    const int n = sig.size();
    SheetBranchCache cache(sig, cp);
    const FacetTable& table = cache.table();
    const std::uint32_t n_sheets = 1u << table.count();
    const int n_workers = pool ? pool->size() : 1;

    SheetSumEvaluator eval(table, cp, params, cache, n_workers);

    // adaptive pass steered by the signed sheet sum
    std::vector<LeafBox> leaves;
    Integrand f = [&eval](std::span<const double> a, int worker) {
        return eval.total(a, worker);
    };
    const QuadResult qr = integrate(f, n, spec, pool, &leaves);

    RegularizedResult out;
    out.contour = cp;
    out.error_estimate = qr.error_estimate;
    out.evaluations = qr.evaluations;
    out.converged = qr.converged;

    // second pass over the final partition accumulating every sheet's
    // integral, folded in canonical leaf order
    std::vector<double> nodes, weights;
    gauss_rule_01(spec.base_order, nodes, weights);
    const int order = spec.base_order;
    long long nodes_per_cell = 1;
    for (int d = 0; d < n; ++d) nodes_per_cell *= order;

    std::vector<CompensatedComplex> sheet_acc(n_sheets);
    const std::size_t chunk = 256;
    std::vector<std::vector<Complex>> leaf_vals;
    for (std::size_t begin = 0; begin < leaves.size(); begin += chunk) {
        const std::size_t end = std::min(begin + chunk, leaves.size());
        leaf_vals.assign(end - begin, {});
        auto item = [&](std::size_t li, int worker) {
            const LeafBox& box = leaves[begin + li];
            std::vector<Complex> acc(n_sheets, Complex(0.0, 0.0));
            std::vector<Complex> comps(n_sheets);
            double volume = 1.0;
            for (int d = 0; d < n; ++d) volume *= box.hi[d] - box.lo[d];
            double point[4];
            int idx[4] = {0, 0, 0, 0};
            for (long long k = 0; k < nodes_per_cell; ++k) {
                double w = 1.0;
                for (int d = 0; d < n; ++d) {
                    point[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * nodes[idx[d]];
                    w *= weights[idx[d]];
                }
                eval.components(std::span<const double>(point, n), worker,
                                std::span<Complex>(comps));
                for (std::uint32_t s = 0; s < n_sheets; ++s) acc[s] += w * comps[s];
                for (int d = 0; d < n; ++d) {
                    if (++idx[d] < order) break;
                    idx[d] = 0;
                }
            }
            for (std::uint32_t s = 0; s < n_sheets; ++s) acc[s] *= volume;
            leaf_vals[li] = std::move(acc);
        };
        if (pool)
            pool->run(end - begin, item);
        else
            for (std::size_t li = 0; li < end - begin; ++li) item(li, 0);
        for (const auto& lv : leaf_vals)
            for (std::uint32_t s = 0; s < n_sheets; ++s) sheet_acc[s].add(lv[s]);
        out.evaluations += static_cast<long long>(end - begin) * nodes_per_cell;
    }

    out.per_sheet.resize(n_sheets);
    CompensatedComplex total;
    for (std::uint32_t s = 0; s < n_sheets; ++s) {
        out.per_sheet[s] = sheet_acc[s].sum();
        total.add((Sheet{s}.sign() > 0) ? out.per_sheet[s] : -out.per_sheet[s]);
    }
    out.value = total.sum();
    return out;
}

TheoremReport verify_theorem(const Signature& sig, const ParamSet& params, const QuadSpec& spec,
                             WorkPool* pool, const std::optional<ContourParams>& cp_in) {
    require_convergent_region(sig, params);
    const ContourParams cp = cp_in ? *cp_in : auto_tune_wide(sig);

    TheoremReport rep;
    rep.prefactor_value = prefactor(sig, params);
    const double prefactor_scale = std::pow(2.0, facets(sig).size());
    if (std::abs(rep.prefactor_value) < 1e-8 * prefactor_scale)
        throw PrefactorNearZero("prefactor too small for a conditioned comparison");

    QuadSpec direct_spec = spec;
    direct_spec.rel_tol = spec.rel_tol / 4.0;
    const QuadResult direct = direct_integral(sig, params, direct_spec, pool);
    rep.direct_value = direct.value;
    rep.direct_error = direct.error_estimate;

    const RegularizedResult reg = regularized_integral(sig, params, cp, spec, pool);
    rep.lhs = reg.value;
    rep.lhs_error = reg.error_estimate;
    rep.evaluations = reg.evaluations + direct.evaluations;

    rep.rhs = rep.prefactor_value * rep.direct_value;
    const Complex corr = rep.lhs * std::conj(rep.rhs);
    rep.fitted_phase = (std::abs(corr) > 0.0) ? corr / std::abs(corr) : Complex(1.0, 0.0);
    const double floor = 1e-300;
    rep.rel_residual =
        std::abs(rep.lhs - rep.fitted_phase * rep.rhs) / std::max(std::abs(rep.rhs), floor);
    return rep;
}

Complex continuation_phase(const Signature& sig, const ParamSet& params) {
    Complex acc = 1.0;
    const Complex i_pi(0.0, kPi);
    for (const Facet& f : facets(sig))
        acc *= -std::exp(i_pi * facet_exponent_sum(sig, params, f));
    return acc;
}

ParamSet reference_params(const Signature& sig) {
    const int n = sig.size();
    std::vector<Complex> alpha(n), beta(n);
    std::vector<Complex> gamma(n * (n - 1) / 2, Complex(0.1, 0.0));
    const double gamma_row_sum = 0.2 * (n - 1);  // 2 * sum_k gamma_{jk}
    for (int j = 1; j <= n; ++j) {
        const double jd = j;
        switch (sig.group(j)) {
            case 2:
                alpha[j - 1] = 0.28 + 0.015 * jd;
                beta[j - 1] = 0.37 + 0.015 * jd;
                break;
            case 1: {
                alpha[j - 1] = 0.31 + 0.01 * jd;
                const double zeta_target = 2.2 + 0.05 * jd;
                beta[j - 1] = -alpha[j - 1].real() - gamma_row_sum - zeta_target;
                break;
            }
            default: {
                beta[j - 1] = 0.33 + 0.01 * jd;
                const double zeta_target = 2.2 + 0.05 * jd;
                alpha[j - 1] = -beta[j - 1].real() - gamma_row_sum - zeta_target;
                break;
            }
        }
    }
    return ParamSet(std::move(alpha), std::move(beta), std::move(gamma));
}

ContinuationCalibration calibrate_continuation(const Signature& sig, const ParamSet& ref,
                                               const QuadSpec& spec, WorkPool* pool,
                                               const std::optional<ContourParams>& cp_in) {
    require_convergent_region(sig, ref);
    ContinuationCalibration calib;
    calib.contour = cp_in ? *cp_in : auto_tune_wide(sig);

    const Complex pre = prefactor(sig, ref);
    const double prefactor_scale = std::pow(2.0, facets(sig).size());
    if (std::abs(pre) < 1e-8 * prefactor_scale)
        throw PrefactorNearZero("reference point sits too close to a prefactor zero");

    QuadSpec direct_spec = spec;
    direct_spec.rel_tol = spec.rel_tol / 4.0;
    const QuadResult direct = direct_integral(sig, ref, direct_spec, pool);
    const RegularizedResult reg = regularized_integral(sig, ref, calib.contour, spec, pool);
    calib.kappa = reg.value / (continuation_phase(sig, ref) * pre * direct.value);
    return calib;
}

Complex continued_value(const Signature& sig, const ParamSet& params,
                        const ContinuationCalibration& calib, const QuadSpec& spec,
                        WorkPool* pool) {
    const Complex pre = prefactor(sig, params);
    const double prefactor_scale = std::pow(2.0, facets(sig).size());
    if (std::abs(pre) < 1e-8 * prefactor_scale)
        throw PrefactorNearZero("prefactor too small to divide out");
    const RegularizedResult reg = regularized_integral(sig, params, calib.contour, spec, pool);
    return reg.value / (calib.kappa * continuation_phase(sig, params) * pre);
}

}  // namespace df
