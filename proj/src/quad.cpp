#include "df/quad.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <map>
#include <queue>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>
#include <cstdlib>

#include "df/errors.hpp"

namespace df {

void QuadSpec::validate() const {
    if (base_order < 4) throw std::invalid_argument("base_order must be >= 4");
    if (max_subdivisions < 1) throw std::invalid_argument("max_subdivisions must be >= 1");
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        throw std::invalid_argument("tolerances must be positive");
}

QuadSpec default_quad_spec(int dim) {
    QuadSpec s;
    s.base_order = 8;
    switch (dim) {
        case 1:
            s.rel_tol = 1e-6;
            s.abs_tol = 1e-14;
            s.max_subdivisions = 30;
            break;
        case 2:
            s.rel_tol = 1e-4;
            s.abs_tol = 1e-12;
            s.max_subdivisions = 28;
            break;
        default:
            s.rel_tol = 5e-3;
            s.abs_tol = 1e-10;
            s.max_subdivisions = 18;
            break;
    }
    return s;
}

// ---------------------------------------------------------------- WorkPool

struct WorkPool::Impl {
    std::vector<std::thread> threads;
    std::mutex mtx;
    std::condition_variable cv_work, cv_done;
    const std::function<void(std::size_t, int)>* job = nullptr;
    std::size_t total = 0;
    std::atomic<std::size_t> next{0};
    std::size_t remaining = 0;
    std::uint64_t generation = 0;
    bool stop = false;
    std::exception_ptr first_error;

    void worker(int id) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t, int)>* fn = nullptr;
            {
                std::unique_lock<std::mutex> lk(mtx);
                cv_work.wait(lk, [&] { return stop || generation != seen; });
                if (stop) return;
                seen = generation;
                fn = job;
            }
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= total) break;
                try {
                    (*fn)(i, id + 1);  // worker 0 is the caller
                } catch (...) {
                    std::lock_guard<std::mutex> lk(mtx);
                    if (!first_error) first_error = std::current_exception();
                }
            }
            {
                std::lock_guard<std::mutex> lk(mtx);
                if (--remaining == 0) cv_done.notify_all();
            }
        }
    }
};

namespace {
thread_local bool tls_inside_pool = false;
}

WorkPool::WorkPool(int threads) : impl_(new Impl) {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    int n = (threads <= 0) ? hw : threads;
    if (n > 64) n = 64;
    // n-1 helper threads; the calling thread participates as worker 0
    for (int i = 0; i < n - 1; ++i)
        impl_->threads.emplace_back([this, i] { impl_->worker(i); });
}

WorkPool::~WorkPool() {
    {
        std::lock_guard<std::mutex> lk(impl_->mtx);
        impl_->stop = true;
    }
    impl_->cv_work.notify_all();
    for (auto& t : impl_->threads) t.join();
}

int WorkPool::size() const { return static_cast<int>(impl_->threads.size()) + 1; }

void WorkPool::run(std::size_t n_items, const std::function<void(std::size_t, int)>& fn) {
    if (n_items == 0) return;
    if (tls_inside_pool || impl_->threads.empty()) {
        for (std::size_t i = 0; i < n_items; ++i) fn(i, 0);
        return;
    }
    {
        std::lock_guard<std::mutex> lk(impl_->mtx);
        impl_->job = &fn;
        impl_->total = n_items;
        impl_->next.store(0);
        impl_->remaining = impl_->threads.size();
        impl_->first_error = nullptr;
        ++impl_->generation;
    }
    impl_->cv_work.notify_all();

    tls_inside_pool = true;
    for (;;) {
        const std::size_t i = impl_->next.fetch_add(1);
        if (i >= n_items) break;
        try {
            fn(i, 0);
        } catch (...) {
            std::lock_guard<std::mutex> lk(impl_->mtx);
            if (!impl_->first_error) impl_->first_error = std::current_exception();
        }
    }
    tls_inside_pool = false;

    {
        std::unique_lock<std::mutex> lk(impl_->mtx);
        impl_->cv_done.wait(lk, [&] { return impl_->remaining == 0; });
        impl_->job = nullptr;
        if (impl_->first_error) std::rethrow_exception(impl_->first_error);
    }
}

// ------------------------------------------------------- Gauss-Legendre

namespace {

struct GaussRule {
    std::vector<double> nodes;    // on (0, 1)
    std::vector<double> weights;  // summing to 1
};

GaussRule make_gauss(int n) {
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        // Newton iteration from the Chebyshev-like initial guess
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            const double dp = n * (x * p0 - p1) / (x * x - 1.0);
            const double dx = p0 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        const double dp = n * (x * p0 - p1) / (x * x - 1.0);
        r.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        r.weights[n - 1 - i] = 0.5 * 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
}

const GaussRule& gauss_rule(int n) {
    static std::mutex mtx;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lk(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss(n)).first;
    return it->second;
}

// Compensated accumulation (Neumaier variant), applied separately to the real
// and imaginary parts so reductions are exact enough to be reproducible.
struct Accumulator {
    double sr = 0.0, cr = 0.0, si = 0.0, ci = 0.0;

    void add(Complex v) {
        add_part(sr, cr, v.real());
        add_part(si, ci, v.imag());
    }
    Complex sum() const { return Complex(sr + cr, si + ci); }

private:
    static void add_part(double& s, double& c, double x) {
        const double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
};

// Dyadic cell identified by its base index and the path of split choices
// (axis and side per level); the key orders disjoint leaves by depth-first
// traversal position. Splits are binary along one axis at a time, so long
// thin features refine only in their sharp direction.
struct Cell {
    double lo[4], hi[4];
    int depth = 0;
    std::uint64_t key = 0;  // (axis, side) bits per level, most significant first
    int base = 0;
    Complex value{};
    double err = 0.0;
    int split_axis = 0;

    bool touches_boundary(int dim) const {
        for (int d = 0; d < dim; ++d)
            if (lo[d] == 0.0 || hi[d] == 1.0) return true;
        return false;
    }
};

struct CellOrder {
    bool operator()(const Cell& a, const Cell& b) const {
        if (a.base != b.base) return a.base < b.base;
        if (a.key != b.key) return a.key < b.key;
        return a.depth < b.depth;
    }
};

// bits per tree level in the traversal key: axis choice plus side
inline int key_bits(int dim) { return (dim <= 2) ? 2 : 3; }
inline int max_key_depth(int dim) { return 62 / key_bits(dim); }

class CellEvaluator {
public:
    CellEvaluator(const Integrand& f, int dim, const QuadSpec& spec)
        : f_(f), dim_(dim), high_(gauss_rule(spec.base_order)),
          low_(gauss_rule(spec.base_order - 2)) {}

    // fills value, err and the preferred split axis; returns evaluation count
    long long evaluate(Cell& cell, int worker) const {
        long long evals = 0;
        const Complex hi = tensor(high_, cell.lo, cell.hi, worker, &evals, &cell.split_axis);
        const Complex lo = tensor(low_, cell.lo, cell.hi, worker, &evals, nullptr);
        cell.value = hi;
        cell.err = std::abs(hi - lo);
        return evals;
    }

    int dim() const { return dim_; }

private:
    const Integrand& f_;
    int dim_;
    const GaussRule& high_;
    const GaussRule& low_;

    Complex tensor(const GaussRule& rule, const double* lo, const double* hi, int worker,
                   long long* evals, int* split_axis) const {
        const int order = static_cast<int>(rule.nodes.size());
        double point[4];
        int idx[4] = {0, 0, 0, 0};
        long long total = 1;
        for (int d = 0; d < dim_; ++d) total *= order;
        double volume = 1.0;
        for (int d = 0; d < dim_; ++d) volume *= hi[d] - lo[d];

        thread_local std::vector<Complex> node_vals;
        if (split_axis) node_vals.assign(static_cast<std::size_t>(total), Complex(0, 0));

        Accumulator acc;
        for (long long k = 0; k < total; ++k) {
            double w = 1.0;
            for (int d = 0; d < dim_; ++d) {
                point[d] = lo[d] + (hi[d] - lo[d]) * rule.nodes[idx[d]];
                w *= rule.weights[idx[d]];
            }
            const Complex fv = f_(std::span<const double>(point, dim_), worker);
            if (split_axis) node_vals[static_cast<std::size_t>(k)] = fv;
            acc.add(w * fv);
            for (int d = 0; d < dim_; ++d) {
                if (++idx[d] < order) break;
                idx[d] = 0;
            }
        }
        *evals += total;

        if (split_axis) {
            // roughest axis by total second differences of the node grid
            double best = -1.0;
            int best_axis = 0;
            long long stride = 1;
            for (int d = 0; d < dim_; ++d) {
                double rough = 0.0;
                for (long long k = 0; k < total; ++k) {
                    const long long i_d = (k / stride) % order;
                    if (i_d + 2 < order) {
                        const Complex second = node_vals[k + 2 * stride] -
                                               2.0 * node_vals[k + stride] + node_vals[k];
                        rough += std::abs(second);
                    }
                }
                if (rough > best) {
                    best = rough;
                    best_axis = d;
                }
                stride *= order;
            }
            *split_axis = best_axis;
        }
        return acc.sum() * volume;
    }
};

}  // namespace

// Globally budgeted refinement: the worst cells (by embedded error, boundary
// cells boosted) are split until the accumulated error estimate meets the
// tolerance. Cell priorities never change, so a lazy heap over an append-only
// store suffices. The pop order is deterministic, child evaluations are
// independent, and the final reduction folds leaves in canonical traversal
// order, so results are identical across runs and thread counts.
void gauss_rule_01(int order, std::vector<double>& nodes, std::vector<double>& weights) {
    const GaussRule& r = gauss_rule(order);
    nodes = r.nodes;
    weights = r.weights;
}

QuadResult integrate(const Integrand& f, int dim, const QuadSpec& spec, WorkPool* pool,
                     std::vector<LeafBox>* leaves_out) {
    spec.validate();
    if (dim < 1 || dim > 4) throw std::invalid_argument("dimension must be in 1..4");

    CellEvaluator evaluator(f, dim, spec);
    const int n_children = 2;
    const int depth_cap = std::min(spec.max_subdivisions, max_key_depth(dim));
    // hard ceiling on the tree size; exceeding it reports non-convergence
    const std::size_t max_leaves =
        std::getenv("DFREG_MAX_LEAVES") ? std::strtoul(std::getenv("DFREG_MAX_LEAVES"), nullptr, 10)
                                        : 400000;

    long long evals_per_cell = 0;
    {
        long long t = 1, t2 = 1;
        for (int d = 0; d < dim; ++d) t *= spec.base_order;
        for (int d = 0; d < dim; ++d) t2 *= spec.base_order - 2;
        evals_per_cell = t + t2;
    }
    long long evals_total = 0;

    std::vector<Cell> store;
    std::vector<char> is_split;
    auto priority = [dim](const Cell& c) {
        return c.err * (c.touches_boundary(dim) ? 4.0 : 1.0);
    };
    // max-heap of (priority, store index); index order is deterministic
    using HeapItem = std::pair<double, std::size_t>;
    std::priority_queue<HeapItem> heap;

    // base grid: two cells per axis
    {
        const int per_axis = 2;
        int n_base = 1;
        for (int d = 0; d < dim; ++d) n_base *= per_axis;
        store.resize(n_base);
        for (int c = 0; c < n_base; ++c) {
            int rem = c;
            for (int d = 0; d < dim; ++d) {
                const int i = rem % per_axis;
                rem /= per_axis;
                store[c].lo[d] = static_cast<double>(i) / per_axis;
                store[c].hi[d] = static_cast<double>(i + 1) / per_axis;
            }
            store[c].base = c;
        }
        auto eval_item = [&](std::size_t i, int worker) { evaluator.evaluate(store[i], worker); };
        if (pool)
            pool->run(store.size(), eval_item);
        else
            for (std::size_t i = 0; i < store.size(); ++i) eval_item(i, 0);
        evals_total += static_cast<long long>(store.size()) * evals_per_cell;
        is_split.assign(store.size(), 0);
        for (std::size_t i = 0; i < store.size(); ++i)
            if (store[i].depth < depth_cap) heap.emplace(priority(store[i]), i);
    }

    // running totals steer the stopping test; the final sums are canonical
    Complex value_run = 0.0;
    double err_run = 0.0;
    std::size_t n_leaves = store.size();
    for (const auto& c : store) {
        value_run += c.value;
        err_run += c.err;
    }

    const int batch = pool ? std::max(2 * pool->size(), 2) : 2;
    std::vector<std::size_t> popped;
    std::vector<Cell> children;
    for (;;) {
        const double tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(value_run));
        if (err_run <= tol) break;
        if (n_leaves >= max_leaves || heap.empty()) break;

        popped.clear();
        while (!heap.empty() && static_cast<int>(popped.size()) < batch) {
            popped.push_back(heap.top().second);
            heap.pop();
        }

        children.assign(popped.size() * n_children, Cell{});
        for (std::size_t p = 0; p < popped.size(); ++p) {
            const Cell& parent = store[popped[p]];
            const int axis = parent.split_axis;
            for (int side = 0; side < 2; ++side) {
                Cell& ch = children[p * n_children + side];
                ch.depth = parent.depth + 1;
                ch.base = parent.base;
                const std::uint64_t level_code =
                    (static_cast<std::uint64_t>(axis) << 1) | static_cast<std::uint64_t>(side);
                ch.key = parent.key | (level_code << (62 - key_bits(dim) * ch.depth));
                for (int d = 0; d < dim; ++d) {
                    ch.lo[d] = parent.lo[d];
                    ch.hi[d] = parent.hi[d];
                }
                const double mid = 0.5 * (parent.lo[axis] + parent.hi[axis]);
                if (side)
                    ch.lo[axis] = mid;
                else
                    ch.hi[axis] = mid;
            }
        }
        auto child_item = [&](std::size_t i, int worker) {
            evaluator.evaluate(children[i], worker);
        };
        if (pool)
            pool->run(children.size(), child_item);
        else
            for (std::size_t i = 0; i < children.size(); ++i) child_item(i, 0);
        evals_total += static_cast<long long>(children.size()) * evals_per_cell;

        for (std::size_t p = 0; p < popped.size(); ++p) {
            const Cell& parent = store[popped[p]];
            value_run -= parent.value;
            err_run -= parent.err;
            is_split[popped[p]] = 1;
        }
        for (auto& ch : children) {
            value_run += ch.value;
            err_run += ch.err;
            store.push_back(ch);
            is_split.push_back(0);
            if (ch.depth < depth_cap) heap.emplace(priority(ch), store.size() - 1);
        }
        n_leaves += children.size() - popped.size();
    }

    if (std::getenv("DFREG_QUAD_STATS")) {
        int depth_hist[64] = {0};
        int max_depth_seen = 0;
        std::size_t frozen = 0;
        double frozen_err = 0, tot_err = 0;
        for (std::size_t i = 0; i < store.size(); ++i) {
            if (is_split[i]) continue;
            const Cell& c = store[i];
            depth_hist[c.depth]++;
            max_depth_seen = std::max(max_depth_seen, c.depth);
            tot_err += c.err;
            if (c.depth >= depth_cap) {
                ++frozen;
                frozen_err += c.err;
            }
        }
        std::fprintf(stderr, "[quad] leaves=%zu evals=%lld err=%.3g frozen=%zu frozen_err=%.3g value=(%.6g,%.6g)\n",
                     n_leaves, evals_total, tot_err, frozen, frozen_err, value_run.real(),
                     value_run.imag());
        std::fprintf(stderr, "[quad] depth hist:");
        for (int d = 0; d <= max_depth_seen; ++d)
            if (depth_hist[d]) std::fprintf(stderr, " %d:%d", d, depth_hist[d]);
        std::fprintf(stderr, "\n");
        int shown = 0;
        for (std::size_t i = 0; i < store.size() && shown < 8; ++i) {
            if (is_split[i] || store[i].depth < max_depth_seen - 1) continue;
            const Cell& c = store[i];
            std::fprintf(stderr, "[quad] deep cell err=%.3g box=[%.10g,%.10g]x[%.10g,%.10g]\n",
                         c.err, c.lo[0], c.hi[0], dim > 1 ? c.lo[1] : 0.0,
                         dim > 1 ? c.hi[1] : 0.0);
            ++shown;
        }
    }

    // canonical reduction over the leaves
    std::vector<Cell> leaves;
    leaves.reserve(n_leaves);
    for (std::size_t i = 0; i < store.size(); ++i)
        if (!is_split[i]) leaves.push_back(store[i]);
    std::sort(leaves.begin(), leaves.end(), CellOrder{});
    Accumulator v, e;
    for (const auto& c : leaves) {
        v.add(c.value);
        e.add(Complex(c.err, 0.0));
    }
    if (leaves_out) {
        leaves_out->clear();
        leaves_out->reserve(leaves.size());
        for (const auto& c : leaves) {
            LeafBox box{};
            for (int d = 0; d < dim; ++d) {
                box.lo[d] = c.lo[d];
                box.hi[d] = c.hi[d];
            }
            leaves_out->push_back(box);
        }
    }

    QuadResult res;
    res.value = v.sum();
    res.error_estimate = e.sum().real();
    res.evaluations = evals_total;
    res.converged =
        res.error_estimate <= std::max(spec.abs_tol, spec.rel_tol * std::abs(res.value)) * 1.0001;
    return res;
}

namespace {

struct AxisTransform {
    double T = 4.0;
};

// logistic form of the tanh-sinh map: a = 1/(1+e^{-pi sinh(T v)}), v = 2u-1.
// Returns a, 1-a and the Jacobian factor, each at full precision.
inline bool de_map(const AxisTransform& tr, double u, double& a, double& one_minus_a,
                   double& jac) {
    const double v = 2.0 * u - 1.0;
    const double sh = std::sinh(tr.T * v);
    const double x = std::numbers::pi * sh;
    const double ea = 1.0 / (1.0 + std::exp(-x));  // a
    const double ec = 1.0 / (1.0 + std::exp(x));   // 1 - a
    if (ea < 1e-160 || ec < 1e-160) return false;  // negligible tail node
    a = ea;
    one_minus_a = ec;
    jac = 2.0 * std::numbers::pi * tr.T * std::cosh(tr.T * v) * ea * ec;
    return true;
}

}  // namespace

QuadResult integrate_endpoint_singular(const EndpointIntegrand& f, int dim,
                                       const QuadSpec& spec, std::span<const AxisHint> hints,
                                       WorkPool* pool) {
    if (static_cast<int>(hints.size()) != dim)
        throw std::invalid_argument("one exponent hint pair per axis required");
    std::vector<AxisTransform> tr(dim);
    for (int d = 0; d < dim; ++d) {
        const double s_min = std::min(hints[d].at_zero, hints[d].at_one);
        if (s_min <= -1.0)
            throw HintViolation("endpoint exponent hint must exceed -1");
        // push the double-exponential tails below roundoff for this exponent
        const double target = 80.0 / (std::numbers::pi * std::min(1.0 + s_min, 1.0));
        tr[d].T = std::min(7.5, std::max(3.5, std::asinh(target)));
    }

    Integrand wrapped = [&f, tr, dim](std::span<const double> u, int worker) -> Complex {
        double a[4], ac[4];
        double jac = 1.0;
        for (int d = 0; d < dim; ++d) {
            double jd;
            if (!de_map(tr[d], u[d], a[d], ac[d], jd)) return Complex(0.0, 0.0);
            jac *= jd;
        }
        return jac * f(std::span<const double>(a, dim), std::span<const double>(ac, dim), worker);
    };
    return integrate(wrapped, dim, spec, pool);
}

}  // namespace df
