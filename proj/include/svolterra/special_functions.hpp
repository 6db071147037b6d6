#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace svolterra {

namespace detail {

// Neumaier compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + carry; }
};

}  // namespace detail

/// Euler Gamma function for x > 0 (libm tgamma with domain checks).
inline double gamma_fn(double x) {
    if (!(x > 0.0)) throw std::domain_error("gamma_fn requires a positive argument");
    if (x > 171.6) throw std::overflow_error("gamma_fn overflows for x > 171.6");
    return std::tgamma(x);
}

/// Mittag-Leffler function E_a(x) = sum_k x^k / Gamma(a k + 1), a > 0.
///
/// Direct series with compensated summation. Terms stop once they have
/// passed their peak and fall below 1e-16 of the running sum. Throws
/// std::overflow_error when the value or the term count leaves double range.
inline double mittag_leffler(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("mittag_leffler requires a > 0");
    if (!std::isfinite(x)) throw std::domain_error("mittag_leffler requires finite x");
    if (x == 0.0) return 1.0;

    constexpr std::size_t kMaxTerms = 10000;
    const double log_abs_x = std::log(std::abs(x));
    detail::CompensatedSum acc;
    acc.add(1.0);
    double prev_mag = 1.0;
    double power = 1.0;
    bool log_form = false;
    for (std::size_t k = 1; k < kMaxTerms; ++k) {
        const double arg = a * static_cast<double>(k) + 1.0;
        double term;
        log_form = log_form || arg >= 170.0 || !std::isfinite(power * x);
        if (!log_form) {
            power *= x;
            term = power / gamma_fn(arg);
        } else {
            const double log_mag = static_cast<double>(k) * log_abs_x - std::lgamma(arg);
            if (log_mag > 709.0) throw std::overflow_error("mittag_leffler overflow");
            term = std::exp(log_mag);
            if (x < 0.0 && (k % 2 == 1)) term = -term;
        }
        acc.add(term);
        const double mag = std::abs(term);
        if (!std::isfinite(acc.value())) throw std::overflow_error("mittag_leffler overflow");
        if (mag <= prev_mag && mag < 1e-16 * std::abs(acc.value())) return acc.value();
        prev_mag = mag;
    }
    throw std::overflow_error("mittag_leffler: series did not settle within 1e4 terms");
}

/// Natural log of E_a(x) for x >= 0, usable far beyond the range where
/// E_a(x) itself fits in a double.
///
/// For 0 < a < 2 and x^{1/a} > 50 the asymptotic E_a(x) ~ exp(x^{1/a}) / a
/// is used; the neglected algebraic tail is below e^-50 relative.
inline double log_mittag_leffler(double a, double x) {
    if (!(a > 0.0)) throw std::domain_error("log_mittag_leffler requires a > 0");
    if (!(x >= 0.0)) throw std::domain_error("log_mittag_leffler requires x >= 0");
    if (x == 0.0) return 0.0;
    if (a < 2.0) {
        const double z = std::pow(x, 1.0 / a);
        if (z > 50.0) return z - std::log(a);
    }
    constexpr std::size_t kMaxTerms = 100000;
    const double lx = std::log(x);
    std::vector<double> logs;
    logs.reserve(256);
    double peak = 0.0;
    logs.push_back(0.0);
    for (std::size_t k = 1; k < kMaxTerms; ++k) {
        const double lt = static_cast<double>(k) * lx - std::lgamma(a * static_cast<double>(k) + 1.0);
        logs.push_back(lt);
        if (lt > peak) peak = lt;
        if (lt < logs[k - 1] && lt < peak - 40.0) {
            double s = 0.0;
            for (double l : logs) s += std::exp(l - peak);
            return peak + std::log(s);
        }
    }
    throw std::overflow_error("log_mittag_leffler: series did not settle");
}

/// Input to the singular Gronwall bounds.
struct GronwallInput {
    double gamma_exp = 0.5;  ///< kernel exponent, in (0, 1)
    double b_const = 1.0;    ///< multiplier of the history sum / integral, >= 0
    /// pi_n for the discrete lemma (indexed by n); ignored by the continuous one.
    std::vector<double> pi_seq;
    /// Non-decreasing g(t) for the continuous lemma.
    std::function<double(double)> g_fn;

    void validate() const {
        if (!(gamma_exp > 0.0 && gamma_exp < 1.0)) {
            throw std::domain_error("Gronwall exponent must lie in (0, 1)");
        }
        if (!(b_const >= 0.0)) throw std::domain_error("Gronwall constant b must be non-negative");
    }
};

/// E_{1-g}(Gamma(1-g) n^{1-g} b) * pi_n: bound on any non-negative H_n with
/// H_n <= pi_n + b sum_{l<n} (n-l)^{-g} H_l.
inline double gronwall_discrete_bound(const GronwallInput& inp, std::size_t n) {
    inp.validate();
    if (n >= inp.pi_seq.size()) throw std::out_of_range("pi sequence shorter than n + 1");
    const double pi_n = inp.pi_seq[n];
    if (pi_n < 0.0) throw std::domain_error("pi sequence must be non-negative");
    const double a = 1.0 - inp.gamma_exp;
    const double arg = gamma_fn(a) * std::pow(static_cast<double>(n), a) * inp.b_const;
    return mittag_leffler(a, arg) * pi_n;
}

/// Same bound in log form, for horizons where the bound overflows a double.
inline double log_gronwall_discrete_bound(const GronwallInput& inp, std::size_t n) {
    inp.validate();
    if (n >= inp.pi_seq.size()) throw std::out_of_range("pi sequence shorter than n + 1");
    const double a = 1.0 - inp.gamma_exp;
    const double arg = gamma_fn(a) * std::pow(static_cast<double>(n), a) * inp.b_const;
    return log_mittag_leffler(a, arg) + std::log(inp.pi_seq[n]);
}

/// E_{1-g}(Gamma(1-g) t^{1-g} b) * g(t): bound on any continuous non-negative
/// H with H(t) <= g(t) + b int_0^t (t-s)^{-g} H(s) ds.
inline double gronwall_continuous_bound(const GronwallInput& inp, double t) {
    inp.validate();
    if (!inp.g_fn) throw std::invalid_argument("continuous Gronwall bound needs g(t)");
    if (!(t >= 0.0)) throw std::domain_error("time must be non-negative");
    const double a = 1.0 - inp.gamma_exp;
    const double arg = gamma_fn(a) * std::pow(t, a) * inp.b_const;
    return mittag_leffler(a, arg) * inp.g_fn(t);
}

/// Log form of the continuous bound; g(t) must be positive.
inline double log_gronwall_continuous_bound(const GronwallInput& inp, double t) {
    inp.validate();
    if (!inp.g_fn) throw std::invalid_argument("continuous Gronwall bound needs g(t)");
    if (!(t >= 0.0)) throw std::domain_error("time must be non-negative");
    const double a = 1.0 - inp.gamma_exp;
    return log_mittag_leffler(a, gamma_fn(a) * std::pow(t, a) * inp.b_const) + std::log(inp.g_fn(t));
}

}  // namespace svolterra
