#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brownian.hpp"
#include "parallel.hpp"
#include "problem.hpp"
#include "schemes.hpp"
#include "trajectory.hpp"

namespace svolterra {

// ---------------------------------------------------------------------------
// Error measures and regression

/// ((1/M) sum_i |exact_i - approx_i|^p)^(1/p).
inline double strong_error(std::span<const double> exact, std::span<const double> approx, double p) {
    if (exact.size() != approx.size()) throw std::invalid_argument("strong_error: length mismatch");
    if (exact.empty()) throw std::invalid_argument("strong_error: no samples");
    if (!(p >= 1.0)) throw std::invalid_argument("strong_error: p must be >= 1");
    double acc = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) acc += std::pow(std::abs(exact[i] - approx[i]), p);
    return std::pow(acc / static_cast<double>(exact.size()), 1.0 / p);
}

/// Ordinary least-squares line y = intercept + slope * x.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double slope_stderr = 0.0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("least_squares needs >= 2 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("least_squares: all abscissae equal");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        sse += r * r;
    }
    fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    fit.slope_stderr = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
    return fit;
}

/// Fits log(error) = log(C) + rate * log(h).
inline LinearFit fit_rate(std::span<const double> h, std::span<const double> err) {
    std::vector<double> lx(h.size()), ly(err.size());
    for (std::size_t i = 0; i < h.size(); ++i) lx[i] = std::log(h[i]);
    for (std::size_t i = 0; i < err.size(); ++i) {
        if (!(err[i] > 0.0)) throw std::invalid_argument("fit_rate: errors must be positive");
        ly[i] = std::log(err[i]);
    }
    return least_squares(lx, ly);
}

// ---------------------------------------------------------------------------
// Theoretical rates

inline bool is_half(double alpha) { return std::abs(alpha - 0.5) < 1e-12; }

/// Strong rate of the theta-EM scheme: min(1/2 - beta, 1 - alpha).
inline double theta_em_rate(double alpha, double beta) { return std::min(0.5 - beta, 1.0 - alpha); }

/// Strong rate of the Milstein scheme: min(1 - alpha, 1 - 2 beta) for
/// alpha != 1/2. At alpha = 1/2 the bound is
/// max{h^min(1/2, 1-2beta), h^(1-beta) sqrt(ln 1/h)}, whose leading exponent
/// is min(1/2, 1 - 2 beta).
inline double milstein_rate(double alpha, double beta) {
    if (is_half(alpha)) return std::min(0.5, 1.0 - 2.0 * beta);
    return std::min(1.0 - alpha, 1.0 - 2.0 * beta);
}

/// Shape of the Milstein error bound at step h (constant omitted).
inline double milstein_bound_shape(double alpha, double beta, double h) {
    if (is_half(alpha)) {
        return std::max(std::pow(h, std::min(0.5, 1.0 - 2.0 * beta)),
                        std::pow(h, 1.0 - beta) * std::sqrt(std::log(1.0 / h)));
    }
    return std::pow(h, milstein_rate(alpha, beta));
}

inline double theoretical_rate(SchemeKind scheme, double alpha, double beta) {
    return scheme == SchemeKind::milstein ? milstein_rate(alpha, beta) : theta_em_rate(alpha, beta);
}

/// Hoelder exponent of the exact solution: min(1/2 - beta, 1 - alpha).
inline double holder_exponent_theory(double alpha, double beta) { return theta_em_rate(alpha, beta); }

inline double default_rate_tolerance(SchemeKind scheme) { return scheme == SchemeKind::milstein ? 0.2 : 0.15; }

// ---------------------------------------------------------------------------
// Convergence study

enum class Oracle { fine_reference, analytic_gbm, picard };

inline std::string to_string(Oracle o) {
    switch (o) {
        case Oracle::analytic_gbm: return "analytic_gbm";
        case Oracle::picard: return "picard";
        default: return "fine_reference";
    }
}

inline Oracle parse_oracle(const std::string& s) {
    if (s == "fine_reference") return Oracle::fine_reference;
    if (s == "analytic_gbm") return Oracle::analytic_gbm;
    if (s == "picard") return Oracle::picard;
    throw std::invalid_argument("unknown oracle '" + s + "'");
}

struct ExperimentConfig {
    std::string preset = "paper_example";
    ParamMap params;
    SchemeConfig scheme;          ///< n_steps is replaced by each entry of `steps`
    std::vector<std::size_t> steps{128, 256, 512, 1024};
    std::size_t n_fine = 4096;
    std::size_t n_paths = 1000;
    double p_norm = 2.0;
    std::uint64_t seed = 42;
    Oracle oracle = Oracle::fine_reference;
    /// Diffusion discretization of the theta-EM fine reference.
    DiffusionRule reference_rule = DiffusionRule::cell_average;
    std::size_t workers = 0;
    std::optional<double> tolerance;  ///< pass band around the theoretical rate
    std::string output;

    void check() const {
        scheme.check();
        if (steps.size() < 2) throw std::invalid_argument("a study needs at least two step counts");
        if (!is_power_of_two(n_fine)) throw std::invalid_argument("n_fine must be a power of two");
        if (n_paths < 2) throw std::invalid_argument("n_paths must be >= 2");
        if (!(p_norm >= 1.0)) throw std::invalid_argument("p must be >= 1");
        const std::size_t sub = scheme.scheme == SchemeKind::milstein ? scheme.substeps : 1;
        for (std::size_t n : steps) {
            if (n == 0 || n_fine % (n * sub) != 0) {
                throw std::invalid_argument("step count " + std::to_string(n) + (sub > 1 ? " times substeps" : "") +
                                            " must divide n_fine = " + std::to_string(n_fine));
            }
        }
    }
};

struct ErrorPoint {
    std::size_t n_steps = 0;
    double h = 0.0;
    double error = 0.0;
    double stderr_ = 0.0;
};

struct ErrorReport {
    std::vector<ErrorPoint> points;
    LinearFit fit;
    double theory = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::uint64_t seed = 0;
};

namespace detail {

inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

inline std::string failure_context(std::uint64_t path, std::size_t n, const std::exception& e) {
    return "path " + std::to_string(path) + ", N = " + std::to_string(n) + ": " + e.what();
}

}  // namespace detail

/// Per-path absolute terminal errors, indexed [step index][path].
using ErrorSamples = std::vector<std::vector<double>>;

/// Runs the scheme at every step count on common Brownian paths and collects
/// |X(T) - X_N| per path.
///
/// The oracle is the analytic GBM terminal value, a Picard solution for
/// drift-only problems, or a run on the full fine path: explicit theta-EM
/// (with cfg.reference_rule) for theta-EM studies and the Milstein scheme
/// with one sub-cell per step for Milstein studies.
inline ErrorSamples collect_terminal_errors(const SvieProblem& problem, const ExperimentConfig& cfg) {
    cfg.check();
    const bool milstein = cfg.scheme.scheme == SchemeKind::milstein;
    problem.check(milstein);
    if (cfg.oracle == Oracle::analytic_gbm && !problem.analytic_terminal) {
        throw std::invalid_argument("oracle analytic_gbm needs a problem with a closed-form solution");
    }

    std::optional<Vector> picard_terminal;
    if (cfg.oracle == Oracle::picard) {
        const auto res = picard_reference_solution(problem, cfg.n_fine);
        const auto t = res.trajectory.terminal();
        picard_terminal = Vector(t.begin(), t.end());
    }

    const std::size_t n_levels = cfg.steps.size();
    ErrorSamples errors(n_levels, std::vector<double>(cfg.n_paths, 0.0));
    parallel_for(cfg.n_paths, cfg.workers, [&](std::size_t path_id) {
        const auto fine = generate_path(cfg.seed, path_id, cfg.n_fine, problem.dim_noise, problem.horizon);
        const Vector x0 = problem.initial.realize(cfg.seed, path_id);
        Vector exact;
        try {
            switch (cfg.oracle) {
                case Oracle::analytic_gbm:
                    exact = problem.analytic_terminal(x0, terminal_values(fine), problem.horizon);
                    break;
                case Oracle::picard:
                    exact = *picard_terminal;
                    break;
                case Oracle::fine_reference: {
                    Trajectory ref;
                    if (milstein) {
                        SchemeConfig rc = cfg.scheme;
                        rc.n_steps = cfg.n_fine;
                        rc.substeps = 1;
                        ref = run_milstein(problem, rc, fine, x0);
                    } else {
                        ref = run_reference(problem, cfg.n_fine, fine, x0, cfg.reference_rule);
                    }
                    const auto t = ref.terminal();
                    exact.assign(t.begin(), t.end());
                    break;
                }
            }
        } catch (const NumericalFailure& e) {
            throw NumericalFailure(detail::failure_context(path_id, cfg.n_fine, e));
        }
        for (std::size_t lvl = 0; lvl < n_levels; ++lvl) {
            SchemeConfig sc = cfg.scheme;
            sc.n_steps = cfg.steps[lvl];
            const std::size_t factor = cfg.n_fine / sc.path_resolution();
            try {
                const Trajectory traj = run_scheme(problem, sc, coarsen(fine, factor), x0);
                errors[lvl][path_id] = detail::distance(exact, traj.terminal());
            } catch (const NumericalFailure& e) {
                throw NumericalFailure(detail::failure_context(path_id, sc.n_steps, e));
            }
        }
    });
    return errors;
}

/// Reduces per-path errors (in path order) and fits the convergence rate.
inline ErrorReport summarize_errors(const ErrorSamples& errors, const std::vector<std::size_t>& steps,
                                    double horizon, double p, double theory, double tolerance,
                                    std::uint64_t seed) {
    ErrorReport rep;
    rep.theory = theory;
    rep.tolerance = tolerance;
    rep.seed = seed;
    std::vector<double> hs, es;
    for (std::size_t lvl = 0; lvl < steps.size(); ++lvl) {
        const auto& e = errors[lvl];
        const double m = static_cast<double>(e.size());
        double mean = 0.0;
        for (double v : e) mean += std::pow(v, p);
        mean /= m;
        double var = 0.0;
        for (double v : e) {
            const double d = std::pow(v, p) - mean;
            var += d * d;
        }
        var /= (m - 1.0);
        ErrorPoint pt;
        pt.n_steps = steps[lvl];
        pt.h = horizon / static_cast<double>(steps[lvl]);
        pt.error = std::pow(mean, 1.0 / p);
        // Delta method: d(mean^(1/p)) = mean^(1/p - 1) / p * d(mean).
        pt.stderr_ = mean > 0.0 ? std::pow(mean, 1.0 / p - 1.0) / p * std::sqrt(var / m) : 0.0;
        rep.points.push_back(pt);
        hs.push_back(pt.h);
        es.push_back(pt.error);
    }
    rep.fit = fit_rate(hs, es);
    rep.pass = std::isfinite(rep.fit.slope) && std::abs(rep.fit.slope - theory) <= tolerance;
    return rep;
}

inline ErrorReport run_convergence_study(const SvieProblem& problem, const ExperimentConfig& cfg) {
    const auto errors = collect_terminal_errors(problem, cfg);
    const double theory =
        theoretical_rate(cfg.scheme.scheme, problem.drift_exponent(), problem.diffusion_exponent());
    const double tol = cfg.tolerance.value_or(default_rate_tolerance(cfg.scheme.scheme));
    return summarize_errors(errors, cfg.steps, problem.horizon, cfg.p_norm, theory, tol, cfg.seed);
}

inline ErrorReport run_convergence_study(const ExperimentConfig& cfg) {
    return run_convergence_study(preset(cfg.preset, cfg.params), cfg);
}

/// CSV: `h,error,stderr` rows, then `# rate=... r2=... theory=... pass=... seed=...`.
inline void write_report_csv(std::ostream& os, const ErrorReport& rep) {
    os << "h,error,stderr\n";
    for (const auto& pt : rep.points) {
        os << format_g17(pt.h) << ',' << format_g17(pt.error) << ',' << format_g17(pt.stderr_) << '\n';
    }
    os << "# rate=" << format_g17(rep.fit.slope) << " r2=" << format_g17(rep.fit.r2)
       << " theory=" << format_g17(rep.theory) << " pass=" << (rep.pass ? "true" : "false")
       << " seed=" << rep.seed << '\n';
}

// ---------------------------------------------------------------------------
// Hoelder regularity

struct HolderEstimate {
    double exponent = 0.0;
    double stderr_ = 0.0;
    double theory = 0.0;
    std::vector<double> lags;             ///< in time units
    std::vector<double> mean_square;      ///< E|X(t + lag) - X(t)|^2
    bool deterministic = false;           ///< all paths coincide (no effective noise)
    std::uint64_t seed = 0;
};

/// Regresses log E|X(t+L) - X(t)|^2 on log L over dyadic lags L = 2^k h for
/// the fine-grid explicit reference solution; the exponent is half the
/// slope. Up to `pair_count` evenly spaced start nodes are used per lag.
inline HolderEstimate holder_exponent_estimate(const SvieProblem& problem, std::size_t n_fine,
                                               std::size_t n_paths, std::size_t pair_count,
                                               std::uint64_t seed, std::size_t workers = 0,
                                               DiffusionRule rule = DiffusionRule::cell_average) {
    problem.check();
    if (!is_power_of_two(n_fine) || n_fine < 64) {
        throw std::invalid_argument("holder estimate needs a power-of-two n_fine >= 64 (>= 4 dyadic lags)");
    }
    if (n_paths < 1 || pair_count < 1) throw std::invalid_argument("need at least one path and one pair");
    std::vector<std::size_t> lag_steps;
    for (std::size_t l = 1; l <= n_fine / 8; l *= 2) lag_steps.push_back(l);

    const std::size_t n_lags = lag_steps.size();
    std::vector<std::vector<double>> per_path(n_paths, std::vector<double>(n_lags, 0.0));
    std::vector<Vector> terminals(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t path_id) {
        const auto fine = generate_path(seed, path_id, n_fine, problem.dim_noise, problem.horizon);
        const Vector x0 = problem.initial.realize(seed, path_id);
        const Trajectory traj = run_reference(problem, n_fine, fine, x0, rule);
        const auto t = traj.terminal();
        terminals[path_id].assign(t.begin(), t.end());
        for (std::size_t li = 0; li < n_lags; ++li) {
            const std::size_t lag = lag_steps[li];
            const std::size_t available = n_fine + 1 - lag;
            const std::size_t pairs = std::min(pair_count, available);
            double acc = 0.0;
            for (std::size_t q = 0; q < pairs; ++q) {
                const std::size_t start = pairs == available ? q : (q * available) / pairs;
                const double dist = detail::distance(traj.at(start + lag), traj.at(start));
                acc += dist * dist;
            }
            per_path[path_id][li] = acc / static_cast<double>(pairs);
        }
    });

    HolderEstimate est;
    est.seed = seed;
    est.theory = holder_exponent_theory(problem.drift_exponent(), problem.diffusion_exponent());
    est.deterministic = true;
    for (std::size_t i = 1; i < n_paths && est.deterministic; ++i) {
        est.deterministic = terminals[i] == terminals[0];
    }
    const double h = problem.horizon / static_cast<double>(n_fine);
    std::vector<double> lx, ly;
    for (std::size_t li = 0; li < n_lags; ++li) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n_paths; ++i) mean += per_path[i][li];
        mean /= static_cast<double>(n_paths);
        const double lag = static_cast<double>(lag_steps[li]) * h;
        est.lags.push_back(lag);
        est.mean_square.push_back(mean);
        if (!(mean > 0.0)) throw std::runtime_error("holder estimate: degenerate (constant) trajectories");
        lx.push_back(std::log(lag));
        ly.push_back(std::log(mean));
    }
    const LinearFit fit = least_squares(lx, ly);
    est.exponent = 0.5 * fit.slope;
    est.stderr_ = 0.5 * fit.slope_stderr;
    return est;
}

inline void write_holder_csv(std::ostream& os, const HolderEstimate& est) {
    os << "lag,mean_square\n";
    for (std::size_t i = 0; i < est.lags.size(); ++i) {
        os << format_g17(est.lags[i]) << ',' << format_g17(est.mean_square[i]) << '\n';
    }
    os << "# exponent=" << format_g17(est.exponent) << " stderr=" << format_g17(est.stderr_)
       << " theory=" << format_g17(est.theory) << " deterministic=" << (est.deterministic ? "true" : "false")
       << " seed=" << est.seed << '\n';
}

// ---------------------------------------------------------------------------
// Moment bounds

struct MomentEntry {
    SchemeKind scheme = SchemeKind::theta_em;
    std::size_t n_steps = 0;
    double h = 0.0;
    double max_moment = 0.0;  ///< max over nodes of the Monte Carlo mean |Z_n|^p
    bool finite = true;
};

struct MomentReport {
    std::vector<MomentEntry> entries;
    double p = 2.0;
    double growth_ratio = 1.0;  ///< largest-N moment / smallest-N moment
    bool growth_flag = false;   ///< growth_ratio > 2
    bool explosion = false;     ///< some run produced non-finite values
    std::uint64_t seed = 0;
};

/// Monte Carlo sup-over-nodes p-th moment for each configuration, on common
/// Brownian paths generated at the finest resolution any configuration needs.
inline MomentReport moment_bound_check(const SvieProblem& problem, const std::vector<SchemeConfig>& configs,
                                       std::size_t n_paths, double p, std::uint64_t seed,
                                       std::size_t workers = 0) {
    if (configs.empty()) throw std::invalid_argument("moment check needs at least one scheme config");
    if (n_paths < 1) throw std::invalid_argument("need at least one path");
    if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    std::size_t finest = 1;
    for (const auto& c : configs) {
        c.check();
        finest = std::max(finest, c.path_resolution());
    }
    if (!is_power_of_two(finest)) throw std::invalid_argument("path resolutions must be powers of two");
    for (const auto& c : configs) {
        if (finest % c.path_resolution() != 0) throw std::invalid_argument("path resolutions must nest");
    }

    const std::size_t n_cfg = configs.size();
    // sums[path][cfg][node]
    std::vector<std::vector<std::vector<double>>> sums(n_paths);
    std::vector<std::vector<char>> exploded(n_paths, std::vector<char>(n_cfg, 0));
    parallel_for(n_paths, workers, [&](std::size_t path_id) {
        const auto fine = generate_path(seed, path_id, finest, problem.dim_noise, problem.horizon);
        const Vector x0 = problem.initial.realize(seed, path_id);
        sums[path_id].resize(n_cfg);
        for (std::size_t ci = 0; ci < n_cfg; ++ci) {
            const auto& c = configs[ci];
            try {
                const Trajectory traj = run_scheme(problem, c, coarsen(fine, finest / c.path_resolution()), x0);
                auto& s = sums[path_id][ci];
                s.resize(c.n_steps + 1);
                for (std::size_t k = 0; k <= c.n_steps; ++k) {
                    double norm = 0.0;
                    for (double v : traj.at(k)) norm += v * v;
                    s[k] = std::pow(std::sqrt(norm), p);
                }
            } catch (const NumericalFailure&) {
                exploded[path_id][ci] = 1;
            }
        }
    });

    MomentReport rep;
    rep.p = p;
    rep.seed = seed;
    for (std::size_t ci = 0; ci < n_cfg; ++ci) {
        const auto& c = configs[ci];
        MomentEntry e;
        e.scheme = c.scheme;
        e.n_steps = c.n_steps;
        e.h = problem.horizon / static_cast<double>(c.n_steps);
        std::vector<double> mean(c.n_steps + 1, 0.0);
        for (std::size_t path_id = 0; path_id < n_paths; ++path_id) {
            if (exploded[path_id][ci]) {
                e.finite = false;
                continue;
            }
            for (std::size_t k = 0; k <= c.n_steps; ++k) mean[k] += sums[path_id][ci][k];
        }
        for (double& v : mean) v /= static_cast<double>(n_paths);
        e.max_moment = *std::max_element(mean.begin(), mean.end());
        if (!std::isfinite(e.max_moment)) e.finite = false;
        rep.explosion = rep.explosion || !e.finite;
        rep.entries.push_back(e);
    }
    const auto by_n = [](const MomentEntry& a, const MomentEntry& b) { return a.n_steps < b.n_steps; };
    const auto lo = std::min_element(rep.entries.begin(), rep.entries.end(), by_n);
    const auto hi = std::max_element(rep.entries.begin(), rep.entries.end(), by_n);
    rep.growth_ratio = lo->max_moment > 0.0 ? hi->max_moment / lo->max_moment : 1.0;
    rep.growth_flag = rep.explosion || rep.growth_ratio > 2.0;
    return rep;
}

inline void write_moment_csv(std::ostream& os, const MomentReport& rep) {
    os << "scheme,n_steps,h,max_moment\n";
    for (const auto& e : rep.entries) {
        os << to_string(e.scheme) << ',' << e.n_steps << ',' << format_g17(e.h) << ','
           << format_g17(e.max_moment) << '\n';
    }
    os << "# p=" << format_g17(rep.p) << " growth_ratio=" << format_g17(rep.growth_ratio)
       << " bounded=" << (rep.growth_flag ? "false" : "true") << " explosion=" << (rep.explosion ? "true" : "false")
       << " seed=" << rep.seed << '\n';
}

}  // namespace svolterra
