#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace svolterra {

/// Numerical solution at the N + 1 nodes of a uniform grid; values are
/// row-major (node * dim + component).
struct Trajectory {
    std::vector<double> nodes;
    std::vector<double> values;
    std::size_t dim = 1;

    Trajectory() = default;
    Trajectory(double horizon, std::size_t n_steps, std::size_t d)
        : nodes(n_steps + 1), values((n_steps + 1) * d, 0.0), dim(d) {
        const double h = horizon / static_cast<double>(n_steps);
        for (std::size_t k = 0; k <= n_steps; ++k) nodes[k] = static_cast<double>(k) * h;
        nodes[n_steps] = horizon;
    }

    std::size_t n_steps() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
    std::span<double> at(std::size_t k) { return {values.data() + k * dim, dim}; }
    std::span<const double> at(std::size_t k) const { return {values.data() + k * dim, dim}; }
    std::span<const double> terminal() const { return at(n_steps()); }

    bool all_finite() const {
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

/// Formats with 17 significant digits (round-trip exact for doubles).
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// CSV with header `t,x1,...,xd` and one row per node.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << 't';
    for (std::size_t c = 0; c < traj.dim; ++c) os << ",x" << (c + 1);
    os << '\n';
    for (std::size_t k = 0; k < traj.nodes.size(); ++k) {
        os << format_g17(traj.nodes[k]);
        for (double v : traj.at(k)) os << ',' << format_g17(v);
        os << '\n';
    }
}

}  // namespace svolterra
