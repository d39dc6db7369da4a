#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace telic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNatsPerBit = 0.69314718055994530942;

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Standard normal density.
inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
}

/// log(sum(exp(values))) without overflow. Returns -inf for an empty span.
double log_sum_exp(std::span<const double> values);

/// p*log(p/q) with the 0*log(0/q) = 0 convention; +inf when p > 0 and q = 0.
double kl_term(double p, double q);

/// Binary KL divergence KL(Bern(p) || Bern(q)) in nats.
double binary_kl(double p, double q);

struct BisectionResult {
    double root = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Bisection for an increasing function on [lo, hi]: finds x with f(x) ~ target.
/// Stops when |f(x) - target| <= value_tol or the bracket is narrower than x_tol.
BisectionResult bisect_increasing(const std::function<double(double)>& f, double target, double lo,
                                  double hi, double value_tol, double x_tol, int max_iter);

/// Largest x in [lo, hi] with pred(x) true, assuming pred(lo) holds and pred is
/// monotone (true then false).
double bisect_last_true(const std::function<bool(double)>& pred, double lo, double hi, double x_tol,
                        int max_iter = 200);

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance abs_tol.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol,
                        int max_depth = 48);

/// Central-difference gradient of f at x with step h per coordinate.
std::vector<double> central_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h);

double norm2(std::span<const double> v);

/// Deterministic generator. Uniform and normal draws are derived from the raw
/// 64-bit stream so results do not depend on the standard library's
/// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform();

    /// Standard normal via Box-Muller.
    double normal();

    /// Index drawn from a probability vector.
    std::size_t discrete(std::span<const double> probs);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace telic
