#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "kernel.hpp"
#include "problem.hpp"
#include "trajectory.hpp"

namespace svolterra {

/// Raised when a run produces non-finite values or the implicit solve fails.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SchemeKind { theta_em, milstein };

/// How the diffusion kernel is discretized in the theta-EM sum.
enum class DiffusionRule {
    left_point,    ///< (t_{n+1} - t_i)^(-beta) on cell i
    cell_average,  ///< exact average of the kernel over cell i
};

/// How the Milstein iterated integrals are reduced to the sub-grid.
enum class IteratedIntegralRule {
    /// Kernels averaged over both the outer and the inner sub-cell, plus the
    /// conditional mean of the same-cell double integral.
    projected,
    /// Inner kernel evaluated at the left sub-node of the outer cell; same-cell
    /// contributions dropped.
    left_node,
};

struct SchemeConfig {
    SchemeKind scheme = SchemeKind::theta_em;
    double theta = 0.0;
    std::size_t n_steps = 16;
    std::size_t substeps = 16;
    double fp_tol = 1e-12;
    std::size_t fp_max_iter = 100;
    DiffusionRule diffusion_rule = DiffusionRule::left_point;
    IteratedIntegralRule iterated_rule = IteratedIntegralRule::projected;

    void check() const {
        if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must lie in [0, 1]");
        if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
        if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
        if (!(fp_tol > 0.0)) throw std::invalid_argument("fp_tol must be positive");
        if (fp_max_iter < 1) throw std::invalid_argument("fp_max_iter must be >= 1");
    }

    /// Resolution of the Brownian path the scheme consumes.
    std::size_t path_resolution() const {
        return scheme == SchemeKind::milstein ? n_steps * substeps : n_steps;
    }
};

inline std::string to_string(SchemeKind k) { return k == SchemeKind::milstein ? "milstein" : "theta_em"; }

inline SchemeKind parse_scheme(const std::string& s) {
    if (s == "theta_em") return SchemeKind::theta_em;
    if (s == "milstein") return SchemeKind::milstein;
    throw std::invalid_argument("unknown scheme '" + s + "' (expected theta_em or milstein)");
}

inline std::string to_string(DiffusionRule r) { return r == DiffusionRule::cell_average ? "cell_average" : "left_point"; }

inline DiffusionRule parse_diffusion_rule(const std::string& s) {
    if (s == "left_point") return DiffusionRule::left_point;
    if (s == "cell_average") return DiffusionRule::cell_average;
    throw std::invalid_argument("unknown diffusion rule '" + s + "' (expected left_point or cell_average)");
}

inline std::string to_string(IteratedIntegralRule r) {
    return r == IteratedIntegralRule::left_node ? "left_node" : "projected";
}

inline IteratedIntegralRule parse_iterated_rule(const std::string& s) {
    if (s == "projected") return IteratedIntegralRule::projected;
    if (s == "left_node") return IteratedIntegralRule::left_node;
    throw std::invalid_argument("unknown iterated-integral rule '" + s + "' (expected projected or left_node)");
}

namespace detail {

inline void check_finite(std::span<const double> v, std::size_t step) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericalFailure("solution became non-finite at step " + std::to_string(step));
        }
    }
}

// Solves y = g + f(y) by Newton's method with a forward-difference Jacobian
// and backtracking on the residual norm. Used only when plain fixed-point
// iteration does not contract; the Jacobian steers the iteration but does
// not enter the solution, which is accepted on the residual alone.
template <class Map>
bool newton_solve(Vector& y, const Vector& g, Map&& f, double tol, std::size_t max_iter) {
    const std::size_t d = y.size();
    Vector fy(d), res(d), trial(d), ftrial(d), res_trial(d), step(d);
    std::vector<double> jac(d * d);
    auto residual = [&](const Vector& x, Vector& fx, Vector& r) {
        f(x, fx);
        double nrm = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            r[c] = x[c] - g[c] - fx[c];
            nrm = std::max(nrm, std::abs(r[c]));
        }
        return nrm;
    };
    double rnorm = residual(y, fy, res);
    for (std::size_t it = 0; it < max_iter; ++it) {
        double scale = 1.0;
        for (double v : y) scale = std::max(scale, std::abs(v));
        if (!std::isfinite(rnorm)) return false;
        if (rnorm <= tol * scale) return true;
        // J = I - df/dy by forward differences.
        for (std::size_t k = 0; k < d; ++k) {
            trial = y;
            const double eps = 1e-7 * std::max(1.0, std::abs(y[k]));
            trial[k] += eps;
            f(trial, ftrial);
            for (std::size_t c = 0; c < d; ++c) {
                jac[c * d + k] = (c == k ? 1.0 : 0.0) - (ftrial[c] - fy[c]) / eps;
            }
        }
        // Gaussian elimination with partial pivoting on a copy.
        std::vector<double> a = jac;
        step = res;
        for (std::size_t col = 0; col < d; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < d; ++r) {
                if (std::abs(a[r * d + col]) > std::abs(a[piv * d + col])) piv = r;
            }
            if (std::abs(a[piv * d + col]) < 1e-300) return false;
            if (piv != col) {
                for (std::size_t k = 0; k < d; ++k) std::swap(a[col * d + k], a[piv * d + k]);
                std::swap(step[col], step[piv]);
            }
            for (std::size_t r = col + 1; r < d; ++r) {
                const double fac = a[r * d + col] / a[col * d + col];
                for (std::size_t k = col; k < d; ++k) a[r * d + k] -= fac * a[col * d + k];
                step[r] -= fac * step[col];
            }
        }
        for (std::size_t col = d; col-- > 0;) {
            for (std::size_t k = col + 1; k < d; ++k) step[col] -= a[col * d + k] * step[k];
            step[col] /= a[col * d + col];
        }
        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 30; ++bt, lambda *= 0.5) {
            for (std::size_t c = 0; c < d; ++c) trial[c] = y[c] - lambda * step[c];
            const double tn = residual(trial, ftrial, res_trial);
            if (std::isfinite(tn) && tn < rnorm) {
                y = trial;
                fy = ftrial;
                res = res_trial;
                rnorm = tn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            double scale2 = 1.0;
            for (double v : y) scale2 = std::max(scale2, std::abs(v));
            return rnorm <= tol * scale2;
        }
    }
    double scale = 1.0;
    for (double v : y) scale = std::max(scale, std::abs(v));
    return rnorm <= tol * scale;
}

// Scalar fallback: the root of y - g - f(y) nearest to y0, found by
// bracketing outward from y0 and bisecting to full precision. The search
// stops at 1e6 * max(1, |y0|); beyond that rounding in y - g alone can fake
// a sign change.
template <class Map>
bool bracket_solve(double& y0, double g, Map&& f) {
    auto F = [&](double y) {
        Vector in{y}, out(1);
        f(in, out);
        return y - g - out[0];
    };
    const double f0 = F(y0);
    if (f0 == 0.0) return true;
    const double scale = std::max(1.0, std::abs(y0));
    double step = 1e-6 * scale;
    double lo_prev = y0, hi_prev = y0;
    double flo_prev = f0, fhi_prev = f0;
    for (; step <= 1e6 * scale; step *= 1.5) {
        const double hi = y0 + step;
        const double lo = y0 - step;
        const double fhi = F(hi);
        const double flo = F(lo);
        double a = 0, b = 0, fa = 0, fb = 0;
        bool found = false;
        if (std::signbit(fhi) != std::signbit(fhi_prev)) {
            a = hi_prev, b = hi, fa = fhi_prev, fb = fhi, found = true;
        } else if (std::signbit(flo) != std::signbit(flo_prev)) {
            a = lo, b = lo_prev, fa = flo, fb = flo_prev, found = true;
        }
        if (found) {
            for (int it = 0; it < 200 && b - a > 0.0; ++it) {
                const double mid = 0.5 * (a + b);
                if (mid <= a || mid >= b) break;
                const double fm = F(mid);
                if (fm == 0.0) {
                    a = b = mid;
                    break;
                }
                if (std::signbit(fm) == std::signbit(fa)) {
                    a = mid, fa = fm;
                } else {
                    b = mid, fb = fm;
                }
            }
            y0 = std::abs(fa) <= std::abs(fb) ? a : b;
            return std::isfinite(y0);
        }
        if (!std::isfinite(fhi) || !std::isfinite(flo)) return false;
        hi_prev = hi, fhi_prev = fhi, lo_prev = lo, flo_prev = flo;
    }
    return false;
}

}  // namespace detail

/// theta-Euler-Maruyama scheme on the grid of `path`:
///
///   Y_{n+1} = Y_0 + sum_i c_{n-i} [theta a(Y_{i+1}) + (1 - theta) a(Y_i)]
///                 + sum_i k_b(t_{n+1} - t_i) b(Y_i) dW_i
///
/// with exact drift weights c. For theta > 0 the i = n term is implicit and
/// is solved by fixed-point iteration from the explicit predictor. When that
/// does not contract (theta L h^(1-alpha) / (1-alpha) >= 1), a Newton solve
/// with a finite-difference Jacobian takes over, and in one dimension a
/// bracketing search for the root nearest the predictor after that.
inline Trajectory run_theta_em(const SvieProblem& problem, const SchemeConfig& config,
                               const BrownianPath& path, const Vector& x0) {
    problem.check();
    config.check();
    const std::size_t n_steps = config.n_steps;
    if (path.n_steps() != n_steps) {
        throw std::invalid_argument("path resolution " + std::to_string(path.n_steps()) +
                                    " does not match n_steps " + std::to_string(n_steps));
    }
    if (path.dim_noise() != problem.dim_noise) throw std::invalid_argument("path noise dimension mismatch");
    if (x0.size() != problem.dim_state) throw std::invalid_argument("initial value dimension mismatch");

    const std::size_t d = problem.dim_state;
    const std::size_t m = problem.dim_noise;
    const std::size_t n_terms = problem.drift_terms.size();
    const double h = problem.horizon / static_cast<double>(n_steps);
    const double theta = config.theta;

    std::vector<LagWeights> weights;
    weights.reserve(n_terms);
    for (const auto& t : problem.drift_terms) weights.emplace_back(t.kernel, h, n_steps);

    // Diffusion kernel by lag q = n + 1 - i.
    std::vector<double> kb;
    if (config.diffusion_rule == DiffusionRule::cell_average) {
        kb = cell_averages(problem.diffusion_kernel, h, n_steps);
    } else {
        kb.assign(n_steps + 1, 0.0);
        for (std::size_t q = 1; q <= n_steps; ++q) kb[q] = problem.diffusion_kernel(static_cast<double>(q) * h);
    }

    Trajectory traj(problem.horizon, n_steps, d);
    std::copy(x0.begin(), x0.end(), traj.at(0).begin());

    // Component-major histories: drift[j][c * (N + 1) + i], noise[c * N + i].
    const std::size_t stride = n_steps + 1;
    std::vector<Vector> drift(n_terms, Vector(d * stride, 0.0));
    Vector noise(d * n_steps, 0.0);
    Vector tmp(d), bmat(d * m), g(d), y(d), y_next(d), a_implicit(d);

    auto record = [&](std::size_t i) {
        const auto yi = traj.at(i);
        for (std::size_t j = 0; j < n_terms; ++j) {
            problem.drift_terms[j].fn(yi, tmp);
            for (std::size_t c = 0; c < d; ++c) drift[j][c * stride + i] = tmp[c];
        }
        if (i < n_steps) {
            problem.diffusion(yi, bmat);
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0.0;
                for (std::size_t k = 0; k < m; ++k) s += bmat[c * m + k] * path(k, i);
                noise[c * n_steps + i] = s;
            }
        }
    };

    auto implicit_drift = [&](std::span<const double> x, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        for (std::size_t j = 0; j < n_terms; ++j) {
            problem.drift_terms[j].fn(x, tmp);
            for (std::size_t c = 0; c < d; ++c) out[c] += theta * weights[j][0] * tmp[c];
        }
    };

    record(0);
    for (std::size_t n = 0; n < n_steps; ++n) {
        for (std::size_t c = 0; c < d; ++c) {
            double acc = x0[c];
            for (std::size_t j = 0; j < n_terms; ++j) {
                const double* w = weights[j].values().data();
                const double* a = drift[j].data() + c * stride;
                double explicit_part = 0.0;
                for (std::size_t i = 0; i <= n; ++i) explicit_part += w[n - i] * a[i];
                double implicit_part = 0.0;
                if (theta > 0.0) {
                    for (std::size_t i = 0; i < n; ++i) implicit_part += w[n - i] * a[i + 1];
                }
                acc += (1.0 - theta) * explicit_part + theta * implicit_part;
            }
            const double* z = noise.data() + c * n_steps;
            double diff = 0.0;
            for (std::size_t i = 0; i <= n; ++i) diff += kb[n + 1 - i] * z[i];
            g[c] = acc + diff;
        }

        auto out = traj.at(n + 1);
        if (theta > 0.0) {
            // Predictor uses a(Y_n) in place of a(Y_{n+1}).
            implicit_drift(traj.at(n), a_implicit);
            for (std::size_t c = 0; c < d; ++c) y[c] = g[c] + a_implicit[c];
            const Vector predictor = y;
            bool converged = false;
            for (std::size_t it = 0; it < config.fp_max_iter; ++it) {
                implicit_drift(y, a_implicit);
                double change = 0.0;
                double scale = 1.0;
                for (std::size_t c = 0; c < d; ++c) {
                    y_next[c] = g[c] + a_implicit[c];
                    change = std::max(change, std::abs(y_next[c] - y[c]));
                    scale = std::max(scale, std::abs(y_next[c]));
                }
                std::swap(y, y_next);
                if (!std::isfinite(change)) break;
                if (change <= config.fp_tol * scale) {
                    converged = true;
                    break;
                }
            }
            if (!converged) {
                y = predictor;
                converged = detail::newton_solve(y, g, implicit_drift, config.fp_tol, config.fp_max_iter);
                if (!converged && d == 1) {
                    y = predictor;
                    converged = detail::bracket_solve(y[0], g[0], implicit_drift);
                }
            }
            if (!converged) {
                throw NumericalFailure("implicit drift solve did not contract at step " + std::to_string(n + 1) +
                                       " (theta * L * h^(1-alpha) / (1-alpha) >= 1?); use a smaller step");
            }
            std::copy(y.begin(), y.end(), out.begin());
        } else {
            std::copy(g.begin(), g.end(), out.begin());
        }
        detail::check_finite(out, n + 1);
        record(n + 1);
    }
    return traj;
}

inline Trajectory run_theta_em(const SvieProblem& problem, const SchemeConfig& config,
                               const BrownianPath& path) {
    return run_theta_em(problem, config, path, problem.initial.realize(path.seed(), path.path_index()));
}

/// Milstein-type scheme for scalar problems (d = m = 1):
///
///   Z_{n+1} = Z_0 + sum_i c_{n-i} a(Z_i) + sum_i int_{t_i}^{t_{i+1}} k_b(t_{n+1} - s) b(Z_i) dW_s
///           + sum_i int k_b(t_{n+1} - s) b'(Z_i) [history_i(s) + local_i(s)] dW_s
///
/// history_i(s) = sum_{l<i} int_{t_l}^{t_{l+1}} [k_b(s - r) - k_b(t_i - r)] b(Z_l) dW_r
/// local_i(s)   = int_{t_i}^{s} k_b(s - r) b(Z_i) dW_r
///
/// Stochastic integrals are evaluated on a sub-grid of `substeps` cells per
/// step, so `path` must have n_steps * substeps increments. Outer kernels are
/// exact sub-cell averages; the inner reduction follows config.iterated_rule.
inline Trajectory run_milstein(const SvieProblem& problem, const SchemeConfig& config,
                               const BrownianPath& path, const Vector& x0) {
    problem.check(true);
    config.check();
    if (problem.dim_state != 1 || problem.dim_noise != 1) {
        throw std::invalid_argument("the Milstein scheme is implemented for d = m = 1 only");
    }
    const std::size_t n_steps = config.n_steps;
    const std::size_t sub = config.substeps;
    const std::size_t n_fine = n_steps * sub;
    if (path.n_steps() != n_fine) {
        throw std::invalid_argument("Milstein needs a path with n_steps * substeps = " + std::to_string(n_fine) +
                                    " increments, got " + std::to_string(path.n_steps()));
    }
    if (x0.size() != 1) throw std::invalid_argument("initial value dimension mismatch");

    const double h = problem.horizon / static_cast<double>(n_steps);
    const double delta = h / static_cast<double>(sub);
    const SingularKernel& kern = problem.diffusion_kernel;
    const double beta = kern.exponent();
    const std::size_t n_terms = problem.drift_terms.size();
    const bool projected = config.iterated_rule == IteratedIntegralRule::projected;

    std::vector<LagWeights> weights;
    for (const auto& t : problem.drift_terms) weights.emplace_back(t.kernel, h, n_steps);
    const std::vector<double> kbar = cell_averages(kern, delta, n_fine);
    const std::vector<double> inner = projected ? double_cell_averages(kern, delta, n_fine) : kbar;
    // Conditional mean of the same-cell double integral per unit (dw^2 - delta).
    const double c_diag =
        kern.is_regular() ? 0.5 * kern.scale()
                          : kern.scale() * std::pow(delta, -beta) / ((1.0 - beta) * (2.0 - beta));

    const auto dw = path.component(0);
    std::vector<double> f(n_fine, 0.0);  // b(Z_{cell}) * dw_j
    std::vector<double> e(n_fine, 0.0);  // full stochastic integrand per fine cell
    std::vector<std::vector<double>> drift(n_terms, std::vector<double>(n_steps + 1, 0.0));

    Trajectory traj(problem.horizon, n_steps, 1);
    traj.values[0] = x0[0];
    double tmp = 0.0;
    double b_val = 0.0;
    double bp_val = 0.0;

    auto eval = [](const VectorFn& fn, double x) {
        double out = 0.0;
        fn(std::span<const double>(&x, 1), std::span<double>(&out, 1));
        return out;
    };

    for (std::size_t i = 0; i < n_steps; ++i) {
        const double zi = traj.values[i];
        for (std::size_t j = 0; j < n_terms; ++j) {
            tmp = eval(problem.drift_terms[j].fn, zi);
            drift[j][i] = tmp;
        }
        b_val = eval(problem.diffusion, zi);
        bp_val = eval(problem.diffusion_jacobian, zi);

        // Fine cells of step i.
        const std::size_t first = i * sub;
        for (std::size_t k = first; k < first + sub; ++k) {
            // Kernel differences vanish identically for a regular kernel.
            double hist = 0.0;
            if (!kern.is_regular()) {
                for (std::size_t j = 0; j < first; ++j) hist += (inner[k - j] - kbar[first - j]) * f[j];
            }
            double local = 0.0;
            for (std::size_t j = first; j < k; ++j) local += inner[k - j] * dw[j];
            local *= b_val;
            double corr = (hist + local) * dw[k];
            if (projected) corr += b_val * c_diag * (dw[k] * dw[k] - delta);
            f[k] = b_val * dw[k];
            e[k] = f[k] + bp_val * corr;
        }

        // Z_{i+1}.
        double acc = x0[0];
        for (std::size_t j = 0; j < n_terms; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l <= i; ++l) s += weights[j][i - l] * drift[j][l];
            acc += s;
        }
        const std::size_t end = (i + 1) * sub;
        double stoch = 0.0;
        for (std::size_t k = 0; k < end; ++k) stoch += kbar[end - k] * e[k];
        acc += stoch;
        traj.values[i + 1] = acc;
        detail::check_finite(traj.at(i + 1), i + 1);
    }
    return traj;
}

inline Trajectory run_milstein(const SvieProblem& problem, const SchemeConfig& config,
                               const BrownianPath& path) {
    return run_milstein(problem, config, path, problem.initial.realize(path.seed(), path.path_index()));
}

/// Runs whichever scheme the config names.
inline Trajectory run_scheme(const SvieProblem& problem, const SchemeConfig& config, const BrownianPath& path,
                             const Vector& x0) {
    return config.scheme == SchemeKind::milstein ? run_milstein(problem, config, path, x0)
                                                 : run_theta_em(problem, config, path, x0);
}

inline Trajectory run_scheme(const SvieProblem& problem, const SchemeConfig& config, const BrownianPath& path) {
    return run_scheme(problem, config, path, problem.initial.realize(path.seed(), path.path_index()));
}

/// Explicit (theta = 0) theta-EM on the finest grid, used as the "exact"
/// solution of a convergence study. `path` is coarsened to n_fine if needed.
inline Trajectory run_reference(const SvieProblem& problem, std::size_t n_fine, const BrownianPath& path,
                                const Vector& x0, DiffusionRule rule = DiffusionRule::left_point) {
    if (n_fine == 0 || path.n_steps() % n_fine != 0) {
        throw std::invalid_argument("reference resolution must divide the path resolution");
    }
    SchemeConfig cfg;
    cfg.scheme = SchemeKind::theta_em;
    cfg.theta = 0.0;
    cfg.n_steps = n_fine;
    cfg.diffusion_rule = rule;
    const std::size_t factor = path.n_steps() / n_fine;
    return run_theta_em(problem, cfg, factor == 1 ? path : coarsen(path, factor), x0);
}

inline Trajectory run_reference(const SvieProblem& problem, std::size_t n_fine, const BrownianPath& path,
                                DiffusionRule rule = DiffusionRule::left_point) {
    return run_reference(problem, n_fine, path, problem.initial.realize(path.seed(), path.path_index()), rule);
}

}  // namespace svolterra
