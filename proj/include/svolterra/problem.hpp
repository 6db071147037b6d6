#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kernel.hpp"
#include "random.hpp"
#include "special_functions.hpp"
#include "trajectory.hpp"

namespace svolterra {

using Vector = std::vector<double>;

/// Coefficient evaluation x -> out. Must be pure and thread-safe.
using VectorFn = std::function<void(std::span<const double> x, std::span<double> out)>;

/// Wraps a scalar function as a 1-d coefficient.
inline VectorFn scalar_fn(std::function<double(double)> f) {
    return [f = std::move(f)](std::span<const double> x, std::span<double> out) { out[0] = f(x[0]); };
}

/// One drift contribution: int_0^t kernel(t - s) fn(X(s)) ds.
struct DriftTerm {
    SingularKernel kernel;
    VectorFn fn;
};

/// Initial condition: a constant vector or a sampler keyed by (seed, path).
struct InitialCondition {
    Vector constant;
    std::function<Vector(std::uint64_t seed, std::uint64_t path_index)> sampler;

    Vector realize(std::uint64_t seed, std::uint64_t path_index) const {
        return sampler ? sampler(seed, path_index) : constant;
    }
};

/// Closed-form terminal value X(T) given X_0 and W(T), when one exists.
using AnalyticTerminal =
    std::function<Vector(std::span<const double> x0, std::span<const double> w_terminal, double horizon)>;

/// A stochastic Volterra integral equation
///
///   X(t) = X_0 + sum_j int_0^t k_j(t - s) a_j(X(s)) ds + int_0^t k_b(t - s) b(X(s)) dW(s)
///
/// with autonomous coefficients. The diffusion b maps R^d to d x m matrices
/// stored row-major (i * m + j); its Jacobian, needed only by the Milstein
/// scheme, is stored as ((i * m + j) * d + k) = d b_ij / d x_k.
struct SvieProblem {
    std::string name = "custom";
    std::size_t dim_state = 1;
    std::size_t dim_noise = 1;
    std::vector<DriftTerm> drift_terms;
    VectorFn diffusion;
    VectorFn diffusion_jacobian;
    SingularKernel diffusion_kernel;
    InitialCondition initial{Vector{1.0}, {}};
    double horizon = 1.0;
    std::optional<double> lipschitz_hint;
    /// Set when b is identically zero; enables the deterministic oracles.
    bool zero_diffusion = false;
    AnalyticTerminal analytic_terminal;

    /// Largest drift-kernel exponent (the alpha governing convergence rates).
    double drift_exponent() const {
        double e = 0.0;
        for (const auto& t : drift_terms) e = std::max(e, t.kernel.exponent());
        return e;
    }
    double diffusion_exponent() const { return diffusion_kernel.exponent(); }

    /// Throws std::invalid_argument when an invariant is broken.
    void check(bool need_jacobian = false) const {
        if (dim_state < 1 || dim_noise < 1) throw std::invalid_argument("dimensions must be >= 1");
        if (drift_terms.empty()) throw std::invalid_argument("problem needs at least one drift term");
        for (const auto& t : drift_terms) {
            if (!t.fn) throw std::invalid_argument("drift term without a function");
        }
        if (!diffusion) throw std::invalid_argument("problem needs a diffusion coefficient");
        if (!(diffusion_kernel.exponent() < 0.5)) {
            throw std::invalid_argument("diffusion kernel exponent must be < 1/2 (beta < 1/2)");
        }
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
        if (!initial.sampler && initial.constant.size() != dim_state) {
            throw std::invalid_argument("initial condition has the wrong dimension");
        }
        if (need_jacobian && !diffusion_jacobian) {
            throw std::invalid_argument("the Milstein scheme needs the diffusion Jacobian");
        }
    }

    /// Sum of all drift terms evaluated at x, ignoring kernels.
    void drift_sum(std::span<const double> x, std::span<double> out) const {
        std::fill(out.begin(), out.end(), 0.0);
        Vector tmp(dim_state);
        for (const auto& t : drift_terms) {
            t.fn(x, tmp);
            for (std::size_t i = 0; i < dim_state; ++i) out[i] += tmp[i];
        }
    }
};

/// Drift-only problem: X(t) = x0 + int_0^t (t-s)^(-alpha) a(X(s)) ds.
inline SvieProblem drift_only_problem(double alpha, std::function<double(double)> a, double x0,
                                      double horizon = 1.0) {
    SvieProblem p;
    p.name = "drift_only";
    p.drift_terms.push_back({SingularKernel(alpha), scalar_fn(std::move(a))});
    p.diffusion = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    p.diffusion_jacobian = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
    p.initial.constant = {x0};
    p.horizon = horizon;
    p.zero_diffusion = true;
    return p;
}

// ---------------------------------------------------------------------------
// Presets

using ParamMap = std::map<std::string, double>;

namespace detail {

inline double take(const ParamMap& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

inline void reject_unknown(const ParamMap& params, std::initializer_list<const char*> allowed,
                           const std::string& preset) {
    for (const auto& [key, value] : params) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw std::invalid_argument("preset '" + preset + "' has no parameter '" + key + "'");
    }
}

inline void set_example_coefficients(SvieProblem& p, const SingularKernel& drift_kernel,
                                   const SingularKernel& diffusion_kernel) {
    p.drift_terms = {{drift_kernel, scalar_fn([](double x) { return std::sin(x); })}};
    p.diffusion = scalar_fn([](double x) { return 0.5 * (std::cos(x) + 2.0); });
    p.diffusion_jacobian = scalar_fn([](double x) { return -0.5 * std::sin(x); });
    p.diffusion_kernel = diffusion_kernel;
    p.lipschitz_hint = 1.0;
}

}  // namespace detail

/// Names accepted by `preset`.
inline std::vector<std::string> preset_names() { return {"paper_example", "gbm", "caputo", "itodoob"}; }

/// Builds a named problem.
///
///  - paper_example: X = 1 + int (t-s)^-alpha sin X ds + 1/2 int (t-s)^-beta (cos X + 2) dW
///    (params alpha, beta, x0, T)
///  - gbm: alpha = beta = 0, a(x) = mu x, b(x) = sigma x, with analytic terminal
///    value (params mu, sigma, x0, T)
///  - caputo: Caputo equation of order alpha_c in (1/2, 1], both kernels
///    (t-s)^(alpha_c - 1) / Gamma(alpha_c), coefficients as paper_example
///    (params alpha_c, x0, T)
///  - itodoob: X = x0 + int sin X ds + int (cos X + 2)/2 dW + alpha int (t-s)^(alpha-1) cos X ds,
///    alpha in (0, 1] (params alpha, x0, T)
inline SvieProblem preset(const std::string& name, const ParamMap& params = {}) {
    using detail::take;
    SvieProblem p;
    p.name = name;
    if (name == "paper_example") {
        detail::reject_unknown(params, {"alpha", "beta", "x0", "T"}, name);
        const double alpha = take(params, "alpha", 0.3);
        const double beta = take(params, "beta", 0.1);
        if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
        if (!(beta >= 0.0 && beta < 0.5)) throw std::invalid_argument("beta must lie in [0, 1/2)");
        detail::set_example_coefficients(p, SingularKernel(alpha), SingularKernel(beta));
        p.initial.constant = {take(params, "x0", 1.0)};
        p.horizon = take(params, "T", 1.0);
    } else if (name == "gbm") {
        detail::reject_unknown(params, {"mu", "sigma", "x0", "T"}, name);
        const double mu = take(params, "mu", 0.0);
        const double sigma = take(params, "sigma", 1.0);
        p.drift_terms = {{SingularKernel(0.0), scalar_fn([mu](double x) { return mu * x; })}};
        p.diffusion = scalar_fn([sigma](double x) { return sigma * x; });
        p.diffusion_jacobian = scalar_fn([sigma](double) { return sigma; });
        p.diffusion_kernel = SingularKernel(0.0);
        p.initial.constant = {take(params, "x0", 1.0)};
        p.horizon = take(params, "T", 1.0);
        p.lipschitz_hint = std::max(std::abs(mu), std::abs(sigma));
        p.analytic_terminal = [mu, sigma](std::span<const double> x0, std::span<const double> w, double t) {
            return Vector{x0[0] * std::exp((mu - 0.5 * sigma * sigma) * t + sigma * w[0])};
        };
    } else if (name == "caputo") {
        detail::reject_unknown(params, {"alpha_c", "x0", "T"}, name);
        const double order = take(params, "alpha_c", 0.8);
        if (!(order > 0.5 && order <= 1.0)) {
            throw std::invalid_argument(
                "caputo order alpha_c must lie in (1/2, 1]: the diffusion kernel exponent 1 - alpha_c "
                "must stay below 1/2 (beta < 1/2)");
        }
        const SingularKernel k(1.0 - order, 1.0 / gamma_fn(order));
        detail::set_example_coefficients(p, k, k);
        p.initial.constant = {take(params, "x0", 1.0)};
        p.horizon = take(params, "T", 1.0);
    } else if (name == "itodoob") {
        detail::reject_unknown(params, {"alpha", "x0", "T"}, name);
        const double order = take(params, "alpha", 0.5);
        if (!(order > 0.0 && order <= 1.0)) throw std::invalid_argument("itodoob alpha must lie in (0, 1]");
        p.drift_terms = {
            {SingularKernel(0.0), scalar_fn([](double x) { return std::sin(x); })},
            {SingularKernel(1.0 - order, order), scalar_fn([](double x) { return std::cos(x); })}};
        p.diffusion = scalar_fn([](double x) { return 0.5 * (std::cos(x) + 2.0); });
        p.diffusion_jacobian = scalar_fn([](double x) { return -0.5 * std::sin(x); });
        p.diffusion_kernel = SingularKernel(0.0);
        p.initial.constant = {take(params, "x0", 1.0)};
        p.horizon = take(params, "T", 1.0);
        p.lipschitz_hint = 1.0;
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw std::invalid_argument("unknown preset '" + name + "' (known: " + known + ")");
    }
    p.check();
    return p;
}

// ---------------------------------------------------------------------------
// Coefficient probing

/// Axis-aligned box [lo, hi]^d.
struct SampleBox {
    double lo = -10.0;
    double hi = 10.0;
};

/// Empirical Lipschitz and linear-growth constants of the coefficients.
struct ValidationReport {
    double lipschitz_drift = 0.0;
    double lipschitz_diffusion = 0.0;
    double growth_drift = 0.0;      ///< max |a(x)| / (1 + |x|)
    double growth_diffusion = 0.0;  ///< max |b(x)|_F / (1 + |x|)
    std::size_t n_probes = 0;
    bool hint_violated = false;

    double lipschitz_observed() const { return std::max(lipschitz_drift, lipschitz_diffusion); }
    double growth_observed() const { return std::max(growth_drift, growth_diffusion); }
};

namespace detail {

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace detail

/// Probes random point pairs in the box. Deterministic given the seed.
/// Each drift term is probed separately; the report holds the maxima.
inline ValidationReport validate(const SvieProblem& problem, SampleBox box, std::size_t n_probes,
                                 std::uint64_t seed) {
    if (n_probes < 1) throw std::invalid_argument("n_probes must be >= 1");
    if (!(box.hi > box.lo)) throw std::invalid_argument("sample box is degenerate");
    const std::size_t d = problem.dim_state;
    const std::size_t m = problem.dim_noise;
    const Philox4x32 gen(derive_seed(seed, 0x7a11));
    Vector x(d), y(d), fx(d), fy(d), bx(d * m), by(d * m), diff(d), bdiff(d * m);
    ValidationReport rep;
    rep.n_probes = n_probes;
    for (std::size_t probe = 0; probe < n_probes; ++probe) {
        for (std::size_t i = 0; i < d; ++i) {
            x[i] = box.lo + (box.hi - box.lo) * uniform_at(gen, probe, 2 * i);
            y[i] = box.lo + (box.hi - box.lo) * uniform_at(gen, probe, 2 * i + 1);
            diff[i] = x[i] - y[i];
        }
        const double dist = detail::norm2(diff);
        const double xnorm = detail::norm2(x);
        for (const auto& term : problem.drift_terms) {
            term.fn(x, fx);
            term.fn(y, fy);
            for (std::size_t i = 0; i < d; ++i) fy[i] = fx[i] - fy[i];
            if (dist > 0.0) rep.lipschitz_drift = std::max(rep.lipschitz_drift, detail::norm2(fy) / dist);
            rep.growth_drift = std::max(rep.growth_drift, detail::norm2(fx) / (1.0 + xnorm));
        }
        problem.diffusion(x, bx);
        problem.diffusion(y, by);
        for (std::size_t i = 0; i < d * m; ++i) bdiff[i] = bx[i] - by[i];
        if (dist > 0.0) {
            rep.lipschitz_diffusion = std::max(rep.lipschitz_diffusion, detail::norm2(bdiff) / dist);
        }
        rep.growth_diffusion = std::max(rep.growth_diffusion, detail::norm2(bx) / (1.0 + xnorm));
    }
    if (problem.lipschitz_hint) {
        rep.hint_violated = rep.lipschitz_observed() > *problem.lipschitz_hint * (1.0 + 1e-9);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Deterministic oracle

struct PicardResult {
    Trajectory trajectory;
    std::size_t iterations = 0;
    double last_update = 0.0;  ///< sup-norm difference of the final two iterates
};

/// Fixed-point iteration of lambda -> X_0 + sum_j int_0^t k_j(t-s) a_j(lambda(s)) ds
/// on a uniform grid of n_steps cells, with lambda piecewise constant on each
/// cell and exact kernel weights. Whole-grid (Jacobi) sweeps are used, so the
/// code path shares nothing with the time-stepping schemes.
inline PicardResult picard_reference_solution(const SvieProblem& problem, std::size_t n_steps,
                                              double tol = 1e-13, std::size_t max_iter = 10000) {
    problem.check();
    if (!problem.zero_diffusion) {
        throw std::invalid_argument("picard_reference_solution needs a problem with zero diffusion");
    }
    if (n_steps < 1) throw std::invalid_argument("need at least one step");
    if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
    const std::size_t d = problem.dim_state;
    const double h = problem.horizon / static_cast<double>(n_steps);
    const Vector x0 = problem.initial.realize(0, 0);

    std::vector<LagWeights> weights;
    for (const auto& t : problem.drift_terms) weights.emplace_back(t.kernel, h, n_steps);

    PicardResult res;
    res.trajectory = Trajectory(problem.horizon, n_steps, d);
    Trajectory& cur = res.trajectory;
    for (std::size_t k = 0; k <= n_steps; ++k) std::copy(x0.begin(), x0.end(), cur.at(k).begin());

    const std::size_t n_terms = problem.drift_terms.size();
    std::vector<Vector> a_vals(n_terms, Vector(n_steps * d));
    Trajectory next = cur;
    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        for (std::size_t j = 0; j < n_terms; ++j) {
            for (std::size_t i = 0; i < n_steps; ++i) {
                problem.drift_terms[j].fn(cur.at(i), std::span<double>(a_vals[j].data() + i * d, d));
            }
        }
        double update = 0.0;
        for (std::size_t n = 1; n <= n_steps; ++n) {
            auto out = next.at(n);
            std::copy(x0.begin(), x0.end(), out.begin());
            for (std::size_t j = 0; j < n_terms; ++j) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double w = weights[j][n - 1 - i];
                    for (std::size_t c = 0; c < d; ++c) out[c] += w * a_vals[j][i * d + c];
                }
            }
            for (std::size_t c = 0; c < d; ++c) {
                update = std::max(update, std::abs(out[c] - cur.at(n)[c]));
            }
        }
        std::swap(cur.values, next.values);
        res.iterations = iter;
        res.last_update = update;
        if (!std::isfinite(update)) break;
        if (update <= tol) return res;
    }
    throw std::runtime_error("Picard iteration did not converge within max_iter (grid too coarse or "
                             "drift not Lipschitz)");
}

}  // namespace svolterra
