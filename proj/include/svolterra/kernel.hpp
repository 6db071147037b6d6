#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace svolterra {

/// Power-law kernel scale * (t - s)^(-exponent), 0 <= exponent < 1.
///
/// The kernel is role-agnostic; the tighter bound for the diffusion role
/// (exponent < 1/2) is enforced where a problem binds it.
class SingularKernel {
public:
    SingularKernel() = default;

    explicit SingularKernel(double exponent, double scale = 1.0)
        : exponent_(exponent), scale_(scale) {
        if (!(exponent >= 0.0) || !(exponent < 1.0)) {
            throw std::domain_error("kernel exponent must lie in [0, 1), got " +
                                    std::to_string(exponent));
        }
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            throw std::domain_error("kernel scale must be positive and finite");
        }
    }

    double exponent() const noexcept { return exponent_; }
    double scale() const noexcept { return scale_; }

    /// True when the exponent is close enough to zero that the kernel is
    /// treated as the constant `scale`.
    bool is_regular() const noexcept { return exponent_ < kRegularCutoff; }

    /// Pointwise value at distance `lag` > 0.
    double operator()(double lag) const {
        if (is_regular()) return scale_;
        return scale_ * std::pow(lag, -exponent_);
    }

    /// Antiderivative F(u) = u^(1-g) / (1-g) of u^(-g), without the scale.
    double antiderivative(double u) const {
        if (is_regular()) return u;
        const double p = 1.0 - exponent_;
        return std::pow(u, p) / p;
    }

    static constexpr double kRegularCutoff = 1e-12;

private:
    double exponent_ = 0.0;
    double scale_ = 1.0;
};

inline bool operator==(const SingularKernel& a, const SingularKernel& b) {
    return a.exponent() == b.exponent() && a.scale() == b.scale();
}

/// Exact value of the integral of k(t_eval - s) over s in [s_lo, s_hi].
inline double segment_integral(const SingularKernel& k, double t_eval, double s_lo,
                               double s_hi) {
    if (!(s_lo <= s_hi) || !(s_hi <= t_eval)) {
        throw std::domain_error("segment_integral requires s_lo <= s_hi <= t_eval");
    }
    if (k.is_regular()) return k.scale() * (s_hi - s_lo);
    return k.scale() * (k.antiderivative(t_eval - s_lo) - k.antiderivative(t_eval - s_hi));
}

/// Exact value of the integral over r in [r_lo, r_hi] of k(s - r) - k(t_anchor - r).
///
/// Non-positive for a singular kernel since t_anchor is the nearer anchor.
inline double difference_integral(const SingularKernel& k, double s, double t_anchor,
                                  double r_lo, double r_hi) {
    if (!(r_lo <= r_hi) || !(r_hi <= t_anchor) || !(t_anchor <= s)) {
        throw std::domain_error(
            "difference_integral requires r_lo <= r_hi <= t_anchor <= s");
    }
    if (k.is_regular() || s == t_anchor) return 0.0;
    return segment_integral(k, s, r_lo, r_hi) - segment_integral(k, t_anchor, r_lo, r_hi);
}

namespace detail {

// (q)^p - (q-1)^p for q >= 1 without cancellation at large q.
inline double first_difference(double q, double p) {
    if (q <= 1.0) return std::pow(q, p);
    return -std::pow(q, p) * std::expm1(p * std::log1p(-1.0 / q));
}

// (q+1)^p - 2 q^p + (q-1)^p for q >= 1.
inline double second_difference(double q, double p) {
    if (q <= 1.0) return std::pow(2.0, p) - 2.0;
    const double up = std::expm1(p * std::log1p(1.0 / q));
    const double down = std::expm1(p * std::log1p(-1.0 / q));
    return std::pow(q, p) * (up + down);
}

}  // namespace detail

/// Stationary product-integration weights on a uniform grid.
///
/// weight(lag) is the integral of the kernel over [t_i, t_{i+1}] evaluated at
/// t_{n+1}, where lag = n - i. Only the lag matters, so storage is O(N).
class LagWeights {
public:
    LagWeights() = default;

    LagWeights(const SingularKernel& k, double h, std::size_t n_steps) : h_(h) {
        if (!(h > 0.0)) throw std::domain_error("step size must be positive");
        if (n_steps < 1) throw std::domain_error("need at least one step");
        w_.resize(n_steps);
        if (k.is_regular()) {
            for (auto& w : w_) w = k.scale() * h;
            return;
        }
        const double p = 1.0 - k.exponent();
        const double factor = k.scale() * std::pow(h, p) / p;
        for (std::size_t lag = 0; lag < n_steps; ++lag) {
            w_[lag] = factor * detail::first_difference(static_cast<double>(lag + 1), p);
        }
    }

    double operator[](std::size_t lag) const { return w_[lag]; }
    std::size_t size() const noexcept { return w_.size(); }
    double step() const noexcept { return h_; }
    const std::vector<double>& values() const noexcept { return w_; }

private:
    double h_ = 0.0;
    std::vector<double> w_;
};

inline LagWeights weight_matrix(const SingularKernel& k, double h, std::size_t n_steps) {
    return LagWeights(k, h, n_steps);
}

/// Cell averages of the kernel on a uniform grid of width `delta`:
/// avg[q] = (1/delta) * integral of k(m*delta - r) over r in cell j = m - q,
/// i.e. [j*delta, (j+1)*delta], for q >= 1. Entry 0 is unused.
inline std::vector<double> cell_averages(const SingularKernel& k, double delta,
                                         std::size_t max_lag) {
    std::vector<double> avg(max_lag + 1, 0.0);
    if (k.is_regular()) {
        for (std::size_t q = 1; q <= max_lag; ++q) avg[q] = k.scale();
        return avg;
    }
    const double p = 1.0 - k.exponent();
    const double factor = k.scale() * std::pow(delta, -k.exponent()) / p;
    for (std::size_t q = 1; q <= max_lag; ++q) {
        avg[q] = factor * detail::first_difference(static_cast<double>(q), p);
    }
    return avg;
}

/// Double cell averages: avg[q] = (1/delta^2) * integral over s in cell k and
/// r in cell j of k(s - r), with q = k - j >= 1. Entry 0 is unused.
inline std::vector<double> double_cell_averages(const SingularKernel& k, double delta,
                                                std::size_t max_lag) {
    std::vector<double> avg(max_lag + 1, 0.0);
    if (k.is_regular()) {
        for (std::size_t q = 1; q <= max_lag; ++q) avg[q] = k.scale();
        return avg;
    }
    const double g = k.exponent();
    const double p = 2.0 - g;
    const double factor = k.scale() * std::pow(delta, -g) / ((1.0 - g) * p);
    for (std::size_t q = 1; q <= max_lag; ++q) {
        avg[q] = factor * detail::second_difference(static_cast<double>(q), p);
    }
    return avg;
}

}  // namespace svolterra
