#include "df/branch.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "df/errors.hpp"

namespace df {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinFactorMag = 1e-14;
}

int FactorLayout::pair_index(int j, int k) const {
    if (j >= k) throw std::invalid_argument("pair_index requires j < k");
    return 2 * n + (j - 1) * n - j * (j - 1) / 2 + (k - j) - 1;
}

void factor_values(const FactorLayout& layout, std::span<const Complex> z,
                   std::span<Complex> out) {
    const int n = layout.n;
    for (int j = 1; j <= n; ++j) {
        out[layout.z_index(j)] = z[j - 1];
        out[layout.one_minus_z_index(j)] = 1.0 - z[j - 1];
    }
    for (int j = 1; j <= n; ++j)
        for (int k = j + 1; k <= n; ++k) out[layout.pair_index(j, k)] = z[k - 1] - z[j - 1];
}

std::vector<Complex> factor_exponents(const Signature& sig, const ParamSet& params) {
    const int n = sig.size();
    const FactorLayout layout(n);
    std::vector<Complex> e(layout.count());
    for (int j = 1; j <= n; ++j) {
        e[layout.z_index(j)] = params.alpha(j);
        e[layout.one_minus_z_index(j)] = params.beta(j);
    }
    for (int j = 1; j <= n; ++j)
        for (int k = j + 1; k <= n; ++k) e[layout.pair_index(j, k)] = 2.0 * params.gamma(j, k);
    return e;
}

Complex BranchState::log_of(int f) const {
    return Complex(std::log(std::abs(values[f])), theta[f]);
}

namespace {

// snap a continued argument to principal value plus exact 2*pi winding
inline double snap_arg(Complex v, double theta_cont) {
    const double principal = std::arg(v);
    const double winding = std::nearbyint((theta_cont - principal) / kTwoPi);
    return principal + kTwoPi * winding;
}

void eval_factors(const FacetTable& table, const ContourParams& cp, std::span<const double> a,
                  const Sheet& sheet, std::vector<Complex>& z_scratch,
                  std::vector<Complex>& out) {
    const FactorLayout layout(table.sig.size());
    z_scratch.resize(table.sig.size());
    out.resize(layout.count());
    z_values(table, cp, a, sheet, z_scratch);
    factor_values(layout, z_scratch, out);
    for (const Complex& v : out)
        if (std::abs(v) < kMinFactorMag)
            throw NonvanishingViolated("integrand factor vanished on the contour");
}

// one unwrapping step to precomputed target values; fails if any factor turns
// by pi/2 or more
bool try_step(BranchState& st, std::span<const double> p, const Sheet& sheet,
              const std::vector<Complex>& vals_new) {
    const std::size_t nf = st.values.size();
    for (std::size_t f = 0; f < nf; ++f) {
        const double dtheta = std::arg(vals_new[f] / st.values[f]);
        if (std::abs(dtheta) >= kPi / 2.0) return false;
    }
    for (std::size_t f = 0; f < nf; ++f) {
        const double dtheta = std::arg(vals_new[f] / st.values[f]);
        st.theta[f] = snap_arg(vals_new[f], st.theta[f] + dtheta);
        st.values[f] = vals_new[f];
    }
    for (std::size_t d = 0; d < st.at.a.size(); ++d) st.at.a[d] = p[d];
    st.sheet = sheet;
    return true;
}

// straight walk in `steps` uniform pieces; accumulates per-factor argument
// changes. Fails when a single piece turns any factor by pi/2 or more.
bool walk_uniform(const FacetTable& table, const ContourParams& cp, const BranchState& st,
                  std::span<const double> target, int steps, BranchWorkspace& ws,
                  std::vector<double>& dtheta_out, std::vector<Complex>& vals_out) {
    const int n = table.sig.size();
    const std::size_t nf = st.values.size();
    dtheta_out.assign(nf, 0.0);
    vals_out = st.values;
    double waypoint[8];
    for (int s = 1; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        for (int d = 0; d < n; ++d) waypoint[d] = st.at.a[d] + t * (target[d] - st.at.a[d]);
        eval_factors(table, cp, std::span<const double>(waypoint, n), st.sheet, ws.z, ws.vals);
        for (std::size_t f = 0; f < nf; ++f) {
            const double d = std::arg(ws.vals[f] / vals_out[f]);
            if (std::abs(d) >= kPi / 2.0) return false;
            dtheta_out[f] += d;
            vals_out[f] = ws.vals[f];
        }
    }
    return true;
}

// Continuation along the straight segment to the target. A step count is
// accepted only when doubling it reproduces every factor's total argument
// change: a coarse step can alias a full winding into a small principal
// argument, and only the doubling comparison detects that.
void continue_path(const FacetTable& table, const ContourParams& cp, BranchState& st,
                   std::span<const double> target, BranchWorkspace& ws, int min_steps) {
    const std::size_t nf = st.values.size();
    int steps = std::max(min_steps, 1);
    bool have_coarse = false;
    for (int attempt = 0; attempt < 26; ++attempt) {
        if (!have_coarse &&
            !walk_uniform(table, cp, st, target, steps, ws, ws.dtheta_a, ws.vals_a)) {
            steps *= 2;
            continue;
        }
        if (!walk_uniform(table, cp, st, target, 2 * steps, ws, ws.dtheta_b, ws.vals_b)) {
            steps *= 4;
            have_coarse = false;
            continue;
        }
        bool agree = true;
        for (std::size_t f = 0; f < nf; ++f)
            if (std::abs(ws.dtheta_a[f] - ws.dtheta_b[f]) > 1e-6) {
                agree = false;
                break;
            }
        if (agree) {
            for (std::size_t f = 0; f < nf; ++f) {
                st.theta[f] = snap_arg(ws.vals_b[f], st.theta[f] + ws.dtheta_b[f]);
                st.values[f] = ws.vals_b[f];
            }
            for (std::size_t d = 0; d < st.at.a.size(); ++d) st.at.a[d] = target[d];
            return;
        }
        // the finer pass becomes the coarse candidate of the next round
        std::swap(ws.dtheta_a, ws.dtheta_b);
        std::swap(ws.vals_a, ws.vals_b);
        steps *= 2;
        have_coarse = true;
    }
    throw NonvanishingViolated("branch continuation failed to resolve a winding");
}

// the blowdown corner of a facet: pool1 members sit at a = 1, pool2 at a = 0
CubePoint crossing_corner(const FacetTable& table, const Facet& facet, const CubePoint& from) {
    const Signature& sig = table.sig;
    CubePoint c = from;
    for (int j = 1; j <= sig.size(); ++j) {
        if (!facet.contains(j)) continue;
        const int g = sig.group(j);
        bool at_one = false;
        switch (facet.anchor) {
            case Anchor::Zero: at_one = (g == 1); break;
            case Anchor::One: at_one = (g == 2); break;
            default: at_one = (g == 3); break;
        }
        c.a[j - 1] = at_one ? 1.0 : 0.0;
    }
    return c;
}

// Approach point for a facet crossing: the subset coordinates get pairwise
// distinct distances from the corner, so the ray stays clear of the interior
// coincidence loci (an equal-speed approach would run straight along the
// diagonal the blowup separates).
CubePoint crossing_start(const FacetTable& table, const Facet& facet, const CubePoint& corner,
                         const CubePoint& from) {
    CubePoint p = from;
    const int members = __builtin_popcount(facet.subset);
    int rank = 0;
    for (int j = 1; j <= table.sig.size(); ++j) {
        if (!facet.contains(j)) continue;
        const double dist =
            (members == 1) ? 0.6 : 0.6 - 0.25 * rank / static_cast<double>(members - 1);
        ++rank;
        p.a[j - 1] = (corner.a[j - 1] == 1.0) ? 1.0 - dist : dist;
    }
    return p;
}

}  // namespace

BranchState init_branch(const FacetTable& table, const ContourParams& cp, const CubePoint& p,
                        const Sheet& sheet) {
    const int n = table.sig.size();
    const FactorLayout layout(n);
    BranchState st;
    st.at = p;
    st.sheet = sheet;
    st.values.resize(layout.count());
    st.theta.resize(layout.count());
    std::vector<Complex> z(n);
    eval_factors(table, cp, p.a, sheet, z, st.values);
    for (int f = 0; f < layout.count(); ++f) st.theta[f] = std::arg(st.values[f]);
    return st;
}

void continue_in_place(const FacetTable& table, const ContourParams& cp, BranchState& st,
                       std::span<const double> target, BranchWorkspace& ws) {
    continue_path(table, cp, st, target, ws, 1);
}

namespace {

// one straight step with caps; bisects on failure
void step_bisect(const FacetTable& table, const ContourParams& cp, BranchState& st,
                 std::span<const double> target, BranchWorkspace& ws, int depth) {
    const int n = table.sig.size();
    eval_factors(table, cp, target, st.sheet, ws.z, ws.vals);
    if (try_step(st, target, st.sheet, ws.vals)) return;
    if (depth >= 52)
        throw NonvanishingViolated("branch continuation failed to resolve a winding");
    double mid[8];
    for (int d = 0; d < n; ++d) mid[d] = 0.5 * (st.at.a[d] + target[d]);
    step_bisect(table, cp, st, std::span<const double>(mid, n), ws, depth + 1);
    step_bisect(table, cp, st, target, ws, depth + 1);
}

}  // namespace

void continue_graded(const FacetTable& table, const ContourParams& cp, BranchState& st,
                     std::span<const double> target, BranchWorkspace& ws) {
    const int n = table.sig.size();
    double from[8];
    double len2 = 0.0;
    for (int d = 0; d < n; ++d) {
        from[d] = st.at.a[d];
        const double diff = target[d] - from[d];
        len2 += diff * diff;
    }
    const double len = std::sqrt(len2);
    if (len == 0.0) return;

    constexpr double kShrink = 0.6;
    constexpr double kFloor = 1e-7;
    double remaining = len;
    double waypoint[8];
    while (remaining * kShrink > kFloor) {
        remaining *= kShrink;
        const double t = 1.0 - remaining / len;
        for (int d = 0; d < n; ++d) waypoint[d] = from[d] + t * (target[d] - from[d]);
        step_bisect(table, cp, st, std::span<const double>(waypoint, n), ws, 0);
    }
    step_bisect(table, cp, st, target, ws, 0);
}

BranchState transport(const FacetTable& table, const ContourParams& cp,
                      const BranchState& state, const CubePoint& to_p, const Sheet& to_sheet,
                      int min_steps) {
    BranchState st = state;
    BranchWorkspace ws;
    const std::uint32_t diff = st.sheet.flipped ^ to_sheet.flipped;
    if (diff == 0) {
        continue_path(table, cp, st, to_p.a, ws, min_steps);
        return st;
    }
    if (__builtin_popcount(diff) != 1)
        throw std::invalid_argument("transport endpoints differ in more than one facet");

    const int facet_index = __builtin_ctz(diff);
    const Facet& facet = table.list[facet_index];
    const CubePoint corner = crossing_corner(table, facet, st.at);
    const CubePoint start = crossing_start(table, facet, corner, st.at);
    const int n = table.sig.size();

    // move to the skewed approach point, then walk toward the corner until
    // the facet bdf is deep inside the half-turn
    continue_path(table, cp, st, start.a, ws, min_steps);
    double u = 1.0;
    CubePoint q;
    q.a.resize(n);
    auto q_at = [&](double uu) {
        for (int d = 0; d < n; ++d) q.a[d] = corner.a[d] + uu * (start.a[d] - corner.a[d]);
    };
    for (;;) {
        q_at(u);
        const double r = rho(table.sig, cp.mollifier, facet, q.a);
        if (r <= 0.01 * cp.delta || u < 1e-13) break;
        u *= 0.5;
    }

    for (int attempt = 0;; ++attempt) {
        q_at(u);
        continue_path(table, cp, st, q.a, ws, min_steps);
        // flip the sheet at the seam; the signed bdf passes through zero here
        std::vector<Complex> z, vals;
        eval_factors(table, cp, q.a, to_sheet, z, vals);
        if (try_step(st, q.a, to_sheet, vals)) break;
        if (attempt >= 24)
            throw NonvanishingViolated("facet crossing failed to converge");
        u *= 0.25;
    }
    // retrace the same skewed ray out of the corner; leaving along any other
    // direction can pick up a spurious turn around an interior coincidence
    continue_path(table, cp, st, start.a, ws, min_steps);
    continue_path(table, cp, st, to_p.a, ws, min_steps);
    return st;
}

SheetBranchCache::SheetBranchCache(const Signature& sig, const ContourParams& cp)
    : table_(sig), cp_(cp) {
    base_.a.assign(sig.size(), 0.5);
}

const BranchState& SheetBranchCache::state(const Sheet& sheet) {
    auto it = states_.find(sheet.flipped);
    if (it != states_.end()) return it->second;
    BranchState st;
    if (sheet.flipped == 0) {
        st = init_branch(table_, cp_, base_, sheet);
    } else {
        // cross facets in canonical order: the highest-index facet comes last
        const int last = 31 - __builtin_clz(sheet.flipped);
        const Sheet parent{sheet.flipped & ~(1u << last)};
        st = transport(table_, cp_, state(parent), base_, sheet);
    }
    return states_.emplace(sheet.flipped, std::move(st)).first->second;
}

SheetBranch SheetBranchCache::branch(const Sheet& sheet) {
    const BranchState& base = state(Sheet{0});
    const BranchState& st = state(sheet);
    SheetBranch out;
    out.sheet = sheet;
    out.offsets.resize(st.theta.size());
    for (std::size_t f = 0; f < st.theta.size(); ++f)
        out.offsets[f] = st.theta[f] - base.theta[f];
    return out;
}

bool crossing_windings_valid(const Signature& sig, const ContourParams& cp) {
    const FacetTable table(sig);
    const FactorLayout layout(sig.size());
    const int n = sig.size();
    CubePoint center;
    center.a.assign(n, 0.5);
    try {
        const BranchState base = init_branch(table, cp, center, Sheet{0});
        for (int i = 0; i < table.count(); ++i) {
            const Facet& f = table.list[i];
            const BranchState crossed = transport(table, cp, base, center, Sheet{1u << i});
            auto winding = [&](int factor) {
                const double off = crossed.theta[factor] - base.theta[factor];
                const double w = off / kTwoPi;
                const long long wi = std::llround(w);
                if (std::abs(w - wi) > 1e-6) return std::numeric_limits<long long>::min();
                return wi;
            };
            for (int j = 1; j <= n; ++j) {
                long long wz = 0, wc = 0;
                if (f.contains(j)) {
                    switch (f.anchor) {
                        case Anchor::Zero: wz = 1; wc = 0; break;
                        case Anchor::One: wz = 0; wc = 1; break;
                        default: wz = -1; wc = -1; break;
                    }
                }
                if (winding(layout.z_index(j)) != wz) return false;
                if (winding(layout.one_minus_z_index(j)) != wc) return false;
            }
            for (int j = 1; j <= n; ++j)
                for (int k = j + 1; k <= n; ++k) {
                    long long wp = 0;
                    if (f.anchor == Anchor::Infinity) {
                        if (f.contains(j) || f.contains(k)) wp = -1;
                    } else {
                        if (f.contains(j) && f.contains(k)) wp = 1;
                    }
                    if (winding(layout.pair_index(j, k)) != wp) return false;
                }
        }
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

Complex measure_monodromy(const Signature& sig, const ContourParams& cp, const Facet& facet,
                          const ParamSet& params) {
    const FacetTable table(sig);
    int facet_index = -1;
    for (int i = 0; i < table.count(); ++i)
        if (table.list[i] == facet) {
            facet_index = i;
            break;
        }
    if (facet_index < 0) throw std::invalid_argument("facet does not belong to the signature");

    SheetBranchCache cache(sig, cp);
    const SheetBranch sb = cache.branch(Sheet{1u << facet_index});
    const std::vector<Complex> exps = factor_exponents(sig, params);
    Complex theta = 0.0;
    for (std::size_t f = 0; f < exps.size(); ++f) theta += exps[f] * sb.offsets[f];
    return theta;
}

}  // namespace df
