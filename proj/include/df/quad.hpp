#pragma once

#include <complex>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "df/signature.hpp"

namespace df {

struct QuadSpec {
    double rel_tol = 1e-6;
    double abs_tol = 1e-14;
    int max_subdivisions = 24;  // dyadic depth cap
    int base_order = 8;         // Gauss-Legendre points per axis per cell

    void validate() const;
};

// Defaults tuned per dimension.
QuadSpec default_quad_spec(int dim);

struct QuadResult {
    Complex value{0.0, 0.0};
    double error_estimate = 0.0;
    long long evaluations = 0;
    bool converged = false;
};

// Fixed-size thread pool distributing independent work items; results must be
// written to caller-owned slots so the reduction order stays canonical.
// run() from inside a worker executes inline (no nested parallelism).
class WorkPool {
public:
    explicit WorkPool(int threads = 0);  // 0 = hardware concurrency
    ~WorkPool();
    WorkPool(const WorkPool&) = delete;
    WorkPool& operator=(const WorkPool&) = delete;

    int size() const;
    void run(std::size_t n_items, const std::function<void(std::size_t, int)>& fn);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Integrand over the open unit cube; the worker index lets stateful-but-pure
// evaluators keep per-thread scratch.
using Integrand = std::function<Complex(std::span<const double>, int)>;

// Final cell partition of an adaptive run, in canonical traversal order.
struct LeafBox {
    double lo[4], hi[4];
};

// Adaptive dyadic subdivision with embedded tensor Gauss-Legendre error
// estimation (base_order vs base_order-2), open rules only, deterministic
// across runs and thread counts. A non-converged result carries the partial
// value with converged = false. leaves_out, when given, receives the final
// cell partition for follow-up passes over the same subdivision.
QuadResult integrate(const Integrand& f, int dim, const QuadSpec& spec,
                     WorkPool* pool = nullptr, std::vector<LeafBox>* leaves_out = nullptr);

// Gauss-Legendre nodes and weights on (0, 1); weights sum to 1.
void gauss_rule_01(int order, std::vector<double>& nodes, std::vector<double>& weights);

// Real parts of the endpoint exponents of one axis: the integrand behaves as
// a^at_zero near a = 0 and (1-a)^at_one near a = 1.
struct AxisHint {
    double at_zero = 0.0;
    double at_one = 0.0;
};

// Integrand receiving both a and 1-a per axis, so endpoint distances keep
// full precision deep inside the substituted tails where 1-a underflows the
// plain representation.
using EndpointIntegrand =
    std::function<Complex(std::span<const double>, std::span<const double>, int)>;

// Per-axis double-exponential substitution absorbing the hinted endpoint
// powers, then integrate. Throws HintViolation if a hint is <= -1.
QuadResult integrate_endpoint_singular(const EndpointIntegrand& f, int dim,
                                       const QuadSpec& spec, std::span<const AxisHint> hints,
                                       WorkPool* pool = nullptr);

}  // namespace df
