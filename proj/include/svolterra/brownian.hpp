#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "random.hpp"

namespace svolterra {

/// Brownian increments of an m-dimensional Wiener process on a uniform grid.
///
/// Increments are stored row-major by noise component: entry (c, k) lives at
/// c * n_steps + k. A path is a pure function of (seed, path_index, n, m, T).
class BrownianPath {
public:
    BrownianPath() = default;

    BrownianPath(double horizon, std::size_t n_steps, std::size_t dim_noise,
                 std::vector<double> increments, std::uint64_t seed = 0,
                 std::uint64_t path_index = 0)
        : horizon_(horizon),
          n_steps_(n_steps),
          dim_noise_(dim_noise),
          seed_(seed),
          path_index_(path_index),
          increments_(std::move(increments)) {
        if (increments_.size() != n_steps_ * dim_noise_) {
            throw std::invalid_argument("increment array does not match (m, n)");
        }
    }

    double horizon() const noexcept { return horizon_; }
    std::size_t n_steps() const noexcept { return n_steps_; }
    std::size_t dim_noise() const noexcept { return dim_noise_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t path_index() const noexcept { return path_index_; }
    double step() const noexcept { return horizon_ / static_cast<double>(n_steps_); }

    std::span<const double> component(std::size_t c) const {
        return {increments_.data() + c * n_steps_, n_steps_};
    }
    double operator()(std::size_t c, std::size_t k) const { return increments_[c * n_steps_ + k]; }
    const std::vector<double>& increments() const noexcept { return increments_; }

private:
    double horizon_ = 1.0;
    std::size_t n_steps_ = 0;
    std::size_t dim_noise_ = 1;
    std::uint64_t seed_ = 0;
    std::uint64_t path_index_ = 0;
    std::vector<double> increments_;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && std::has_single_bit(n); }

/// Generates a fine path. The normal used for increment (c, k) is position
/// c * n_fine + k of the Philox stream keyed by `seed` with stream id
/// `path_index`, so replicates are independent and replayable in any order.
inline BrownianPath generate_path(std::uint64_t seed, std::uint64_t path_index,
                                  std::size_t n_fine, std::size_t dim_noise, double horizon) {
    if (!is_power_of_two(n_fine)) {
        throw std::invalid_argument("n_fine must be a power of two for nested coarsening");
    }
    if (dim_noise < 1) throw std::invalid_argument("noise dimension must be at least 1");
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    const Philox4x32 gen(seed);
    const double sd = std::sqrt(horizon / static_cast<double>(n_fine));
    const std::size_t total = n_fine * dim_noise;
    std::vector<double> inc(total);
    for (std::size_t k = 0; k + 1 < total; k += 2) {
        const auto u = uniform_pair(gen, path_index, k / 2);
        inc[k] = sd * normal_quantile(u[0]);
        inc[k + 1] = sd * normal_quantile(u[1]);
    }
    if (total % 2 == 1) inc[total - 1] = sd * normal_at(gen, path_index, total - 1);
    return BrownianPath(horizon, n_fine, dim_noise, std::move(inc), seed, path_index);
}

/// Sums blocks of `factor` consecutive increments.
///
/// Power-of-two factors are reduced by repeated pairwise halving, so
/// coarsen(coarsen(p, a), b) == coarsen(p, a * b) bit for bit. Other factors
/// are summed left to right.
inline BrownianPath coarsen(const BrownianPath& path, std::size_t factor) {
    if (factor == 0 || path.n_steps() % factor != 0) {
        throw std::invalid_argument("coarsening factor must divide the number of steps");
    }
    if (factor == 1) return path;
    const std::size_t m = path.dim_noise();
    std::vector<double> cur = path.increments();
    std::size_t n = path.n_steps();
    if (is_power_of_two(factor)) {
        for (std::size_t f = factor; f > 1; f /= 2) {
            const std::size_t half = n / 2;
            std::vector<double> next(half * m);
            for (std::size_t c = 0; c < m; ++c) {
                for (std::size_t j = 0; j < half; ++j) {
                    next[c * half + j] = cur[c * n + 2 * j] + cur[c * n + 2 * j + 1];
                }
            }
            cur = std::move(next);
            n = half;
        }
    } else {
        const std::size_t nc = n / factor;
        std::vector<double> next(nc * m);
        for (std::size_t c = 0; c < m; ++c) {
            for (std::size_t j = 0; j < nc; ++j) {
                double s = 0.0;
                for (std::size_t q = 0; q < factor; ++q) s += cur[c * n + j * factor + q];
                next[c * nc + j] = s;
            }
        }
        cur = std::move(next);
        n = nc;
    }
    return BrownianPath(path.horizon(), n, m, std::move(cur), path.seed(), path.path_index());
}

/// W(t_k) at every node for each component, W(t_0) = 0; row-major
/// (c * (n + 1) + k).
inline std::vector<double> partial_sums(const BrownianPath& path) {
    const std::size_t n = path.n_steps();
    const std::size_t m = path.n_steps() == 0 ? 1 : path.dim_noise();
    std::vector<double> w(m * (n + 1), 0.0);
    for (std::size_t c = 0; c < m && n > 0; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += path(c, k);
            w[c * (n + 1) + k + 1] = acc;
        }
    }
    return w;
}

/// Terminal value W(T) of each component.
inline std::vector<double> terminal_values(const BrownianPath& path) {
    std::vector<double> out(path.dim_noise(), 0.0);
    for (std::size_t c = 0; c < path.dim_noise(); ++c) {
        double acc = 0.0;
        for (double v : path.component(c)) acc += v;
        out[c] = acc;
    }
    return out;
}

namespace detail {

inline void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64_le(std::istream& is) {
    unsigned char buf[8];
    if (!is.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("truncated path file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

}  // namespace detail

/// Binary dump: seed, path_index, n, m as little-endian u64, T as
/// little-endian f64, then the increments row-major as little-endian f64.
inline void write_path(std::ostream& os, const BrownianPath& path) {
    detail::write_u64_le(os, path.seed());
    detail::write_u64_le(os, path.path_index());
    detail::write_u64_le(os, path.n_steps());
    detail::write_u64_le(os, path.dim_noise());
    detail::write_u64_le(os, std::bit_cast<std::uint64_t>(path.horizon()));
    for (double v : path.increments()) detail::write_u64_le(os, std::bit_cast<std::uint64_t>(v));
}

inline BrownianPath read_path(std::istream& is) {
    const std::uint64_t seed = detail::read_u64_le(is);
    const std::uint64_t index = detail::read_u64_le(is);
    const std::uint64_t n = detail::read_u64_le(is);
    const std::uint64_t m = detail::read_u64_le(is);
    const double horizon = std::bit_cast<double>(detail::read_u64_le(is));
    if (n > (std::uint64_t{1} << 40) || m > 4096) throw std::runtime_error("implausible path header");
    std::vector<double> inc(n * m);
    for (auto& v : inc) v = std::bit_cast<double>(detail::read_u64_le(is));
    return BrownianPath(horizon, n, m, std::move(inc), seed, index);
}

}  // namespace svolterra
