// svolterra: command-line front end for convergence studies, Hölder and
// moment checks, coefficient validation and single-path export.
//
// Exit codes: 0 ok, 1 usage/config error, 2 numerical failure,
// 3 threshold failure (only with --assert).

#include "config.hpp"

#include <svolterra/svolterra.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace svolterra;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_numerical = 2;
constexpr int exit_threshold = 3;

// Flags shared by every subcommand. Each optional is applied on top of the
// JSON config only when given, so file values survive unless overridden.
struct Overrides {
    std::string config_file;
    std::optional<std::string> preset;
    std::optional<double> alpha, beta;
    std::vector<std::string> params;
    std::optional<std::string> scheme;
    std::optional<double> theta;
    std::optional<std::size_t> substeps;
    std::optional<std::string> diffusion_rule, iterated_rule;
    std::optional<std::size_t> n_fine, n_paths, workers;
    std::optional<std::string> steps;
    std::optional<double> p_norm, tolerance;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> oracle, reference_rule, output;
    bool assert_threshold = false;
};

std::vector<std::size_t> parse_steps(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size()) throw std::invalid_argument("bad step count '" + item + "' in --steps");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw std::invalid_argument("--steps is empty");
    return out;
}

ExperimentConfig resolve(const Overrides& o) {
    ExperimentConfig cfg;
    if (!o.config_file.empty()) cfg = cli::load_config(o.config_file, cfg);
    if (o.preset) cfg.preset = *o.preset;
    if (o.alpha) cfg.params["alpha"] = *o.alpha;
    if (o.beta) cfg.params["beta"] = *o.beta;
    for (const auto& kv : o.params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--param expects key=value, got '" + kv + "'");
        try {
            cfg.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("--param value is not a number: '" + kv + "'");
        }
    }
    if (o.scheme) cfg.scheme.scheme = parse_scheme(*o.scheme);
    if (o.theta) cfg.scheme.theta = *o.theta;
    if (o.substeps) cfg.scheme.substeps = *o.substeps;
    if (o.diffusion_rule) cfg.scheme.diffusion_rule = parse_diffusion_rule(*o.diffusion_rule);
    if (o.iterated_rule) cfg.scheme.iterated_rule = parse_iterated_rule(*o.iterated_rule);
    if (o.n_fine) cfg.n_fine = *o.n_fine;
    if (o.n_paths) cfg.n_paths = *o.n_paths;
    if (o.workers) cfg.workers = *o.workers;
    if (o.steps) cfg.steps = parse_steps(*o.steps);
    if (o.p_norm) cfg.p_norm = *o.p_norm;
    if (o.tolerance) cfg.tolerance = *o.tolerance;
    if (o.seed) cfg.seed = *o.seed;
    if (o.oracle) cfg.oracle = parse_oracle(*o.oracle);
    if (o.reference_rule) cfg.reference_rule = parse_diffusion_rule(*o.reference_rule);
    if (o.output) cfg.output = *o.output;
    return cfg;
}

// Writes to cfg.output, or stdout when it is empty or "-".
template <class Writer>
void emit(const std::string& output, Writer&& write) {
    if (output.empty() || output == "-") {
        write(std::cout);
        return;
    }
    std::ofstream os(output, std::ios::binary);
    if (!os) throw std::invalid_argument("cannot open output file '" + output + "'");
    write(os);
    if (!os) throw std::runtime_error("failed writing '" + output + "'");
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_file, "JSON config; flags override its values")->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "paper_example | gbm | caputo | itodoob");
    cmd->add_option("--alpha", o.alpha, "drift kernel exponent (paper_example, itodoob)");
    cmd->add_option("--beta", o.beta, "diffusion kernel exponent (paper_example)");
    cmd->add_option("--param", o.params, "extra preset parameter key=value (repeatable)");
    cmd->add_option("--seed", o.seed);
    cmd->add_option("--workers", o.workers, "worker threads, 0 = all cores");
    cmd->add_option("--out", o.output, "output file (default stdout)");
}

void add_scheme(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--scheme", o.scheme, "theta_em | milstein");
    cmd->add_option("--theta", o.theta, "drift implicitness in [0,1]");
    cmd->add_option("--substeps", o.substeps, "Milstein sub-grid factor K");
    cmd->add_option("--diffusion-rule", o.diffusion_rule, "left_point | cell_average");
    cmd->add_option("--iterated-rule", o.iterated_rule, "projected | left_node");
}

int run_study(const Overrides& o) {
    const ExperimentConfig cfg = resolve(o);
    const ErrorReport rep = run_convergence_study(cfg);
    emit(cfg.output, [&](std::ostream& os) { write_report_csv(os, rep); });
    std::cerr << "rate " << rep.fit.slope << " (theory " << rep.theory << " +/- " << rep.tolerance
              << "), r2 " << rep.fit.r2 << '\n';
    return o.assert_threshold && !rep.pass ? exit_threshold : 0;
}

int run_holder(const Overrides& o, std::size_t pairs) {
    const ExperimentConfig cfg = resolve(o);
    const SvieProblem problem = preset(cfg.preset, cfg.params);
    const HolderEstimate est =
        holder_exponent_estimate(problem, cfg.n_fine, cfg.n_paths, pairs, cfg.seed, cfg.workers, cfg.reference_rule);
    emit(cfg.output, [&](std::ostream& os) { write_holder_csv(os, est); });
    const double tol = cfg.tolerance.value_or(0.1);
    std::cerr << "exponent " << est.exponent << " (theory " << est.theory << ", tolerance " << tol << ")\n";
    return o.assert_threshold && est.exponent < est.theory - tol ? exit_threshold : 0;
}

int run_moments(const Overrides& o) {
    const ExperimentConfig cfg = resolve(o);
    const SvieProblem problem = preset(cfg.preset, cfg.params);
    std::vector<SchemeConfig> configs;
    for (std::size_t n : cfg.steps) {
        SchemeConfig s = cfg.scheme;
        s.n_steps = n;
        configs.push_back(s);
    }
    const MomentReport rep = moment_bound_check(problem, configs, cfg.n_paths, cfg.p_norm, cfg.seed, cfg.workers);
    emit(cfg.output, [&](std::ostream& os) { write_moment_csv(os, rep); });
    if (rep.explosion) {
        std::cerr << "error: numerical solution exploded\n";
        return exit_numerical;
    }
    return o.assert_threshold && rep.growth_flag ? exit_threshold : 0;
}

int run_validate(const Overrides& o, SampleBox box, std::size_t probes) {
    const ExperimentConfig cfg = resolve(o);
    const SvieProblem problem = preset(cfg.preset, cfg.params);
    problem.check();
    const ValidationReport rep = validate(problem, box, probes, cfg.seed);
    emit(cfg.output, [&](std::ostream& os) {
        os << "preset=" << problem.name << '\n'
           << "drift_exponent=" << format_g17(problem.drift_exponent()) << '\n'
           << "diffusion_exponent=" << format_g17(problem.diffusion_exponent()) << '\n'
           << "lipschitz_drift=" << format_g17(rep.lipschitz_drift) << '\n'
           << "lipschitz_diffusion=" << format_g17(rep.lipschitz_diffusion) << '\n'
           << "growth_drift=" << format_g17(rep.growth_drift) << '\n'
           << "growth_diffusion=" << format_g17(rep.growth_diffusion) << '\n'
           << "n_probes=" << rep.n_probes << '\n'
           << "hint_violated=" << (rep.hint_violated ? "true" : "false") << '\n';
    });
    return o.assert_threshold && rep.hint_violated ? exit_threshold : 0;
}

int run_trajectory(const Overrides& o, std::size_t n_steps, std::uint64_t path_index) {
    const ExperimentConfig cfg = resolve(o);
    const SvieProblem problem = preset(cfg.preset, cfg.params);
    SchemeConfig s = cfg.scheme;
    s.n_steps = n_steps;
    s.check();
    const std::size_t res = s.path_resolution();
    const BrownianPath path = generate_path(cfg.seed, path_index, res, problem.dim_noise, problem.horizon);
    const Trajectory traj = run_scheme(problem, s, path);
    emit(cfg.output, [&](std::ostream& os) { write_trajectory_csv(os, traj); });
    return 0;
}

int run_path(const Overrides& o, std::uint64_t path_index) {
    const ExperimentConfig cfg = resolve(o);
    const SvieProblem problem = preset(cfg.preset, cfg.params);
    const BrownianPath path = generate_path(cfg.seed, path_index, cfg.n_fine, problem.dim_noise, problem.horizon);
    if (cfg.output.empty() || cfg.output == "-") throw std::invalid_argument("path export is binary; give --out FILE");
    emit(cfg.output, [&](std::ostream& os) { write_path(os, path); });
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and convergence studies for stochastic Volterra integral equations"};
    app.require_subcommand(1);

    Overrides o;
    std::size_t pairs = 64, probes = 1000, traj_steps = 256;
    std::uint64_t path_index = 0;
    SampleBox box;

    auto* study = app.add_subcommand("study", "strong-error convergence study and rate fit");
    add_common(study, o);
    add_scheme(study, o);
    study->add_option("--nfine", o.n_fine, "fine-grid steps (power of two)");
    study->add_option("--steps", o.steps, "comma-separated coarse step counts");
    study->add_option("--paths", o.n_paths, "Monte Carlo sample paths");
    study->add_option("--p", o.p_norm, "order of the L^p error");
    study->add_option("--oracle", o.oracle, "fine_reference | analytic_gbm | picard");
    study->add_option("--reference-rule", o.reference_rule, "diffusion rule of the fine reference");
    study->add_option("--tolerance", o.tolerance, "pass band around the theoretical rate");
    study->add_flag("--assert", o.assert_threshold, "exit 3 when the fitted rate misses the band");

    auto* holder = app.add_subcommand("holder", "Hölder exponent estimate from dyadic lags");
    add_common(holder, o);
    holder->add_option("--nfine", o.n_fine, "fine-grid steps (power of two)");
    holder->add_option("--paths", o.n_paths, "Monte Carlo sample paths");
    holder->add_option("--pairs", pairs, "start nodes per lag")->capture_default_str();
    holder->add_option("--reference-rule", o.reference_rule, "diffusion rule of the fine solution");
    holder->add_option("--tolerance", o.tolerance, "allowed shortfall below theory (default 0.1)");
    holder->add_flag("--assert", o.assert_threshold, "exit 3 when the exponent falls short");

    auto* moments = app.add_subcommand("moments", "sup-over-nodes p-th moment across step sizes");
    add_common(moments, o);
    add_scheme(moments, o);
    moments->add_option("--steps", o.steps, "comma-separated step counts");
    moments->add_option("--paths", o.n_paths, "Monte Carlo sample paths");
    moments->add_option("--p", o.p_norm, "moment order");
    moments->add_flag("--assert", o.assert_threshold, "exit 3 when moments grow with N");

    auto* valid = app.add_subcommand("validate", "probe Lipschitz and growth constants");
    add_common(valid, o);
    valid->add_option("--probes", probes)->capture_default_str();
    valid->add_option("--box-lo", box.lo)->capture_default_str();
    valid->add_option("--box-hi", box.hi)->capture_default_str();
    valid->add_flag("--assert", o.assert_threshold, "exit 3 when the Lipschitz hint is violated");

    auto* traj = app.add_subcommand("trajectory", "one sample path of a scheme as CSV");
    add_common(traj, o);
    add_scheme(traj, o);
    traj->add_option("--n", traj_steps, "steps")->capture_default_str();
    traj->add_option("--path-index", path_index)->capture_default_str();

    auto* path = app.add_subcommand("path", "dump a Brownian path in binary form");
    add_common(path, o);
    path->add_option("--nfine", o.n_fine, "steps (power of two)");
    path->add_option("--path-index", path_index)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*study) return run_study(o);
        if (*holder) return run_holder(o, pairs);
        if (*moments) return run_moments(o);
        if (*valid) return run_validate(o, box, probes);
        if (*traj) return run_trajectory(o, traj_steps, path_index);
        if (*path) return run_path(o, path_index);
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::overflow_error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numerical;
    }
    return exit_usage;
}
