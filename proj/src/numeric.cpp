#include "telic/numeric.hpp"

#include <algorithm>

namespace telic {

double log_sum_exp(std::span<const double> values) {
    if (values.empty()) return -kInf;
    const double top = *std::max_element(values.begin(), values.end());
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - top);
    return top + std::log(acc);
}

double kl_term(double p, double q) {
    if (p <= 0.0) return 0.0;
    if (q <= 0.0) return kInf;
    return p * std::log(p / q);
}

double binary_kl(double p, double q) { return kl_term(p, q) + kl_term(1.0 - p, 1.0 - q); }

BisectionResult bisect_increasing(const std::function<double(double)>& f, double target, double lo,
                                  double hi, double value_tol, double x_tol, int max_iter) {
    BisectionResult out;
    for (int it = 0; it < max_iter; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = f(mid);
        out.root = mid;
        out.iterations = it + 1;
        if (std::abs(v - target) <= value_tol) {
            out.converged = true;
            return out;
        }
        if (v < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo <= x_tol) {
            out.root = 0.5 * (lo + hi);
            out.converged = std::abs(f(out.root) - target) <= value_tol;
            return out;
        }
    }
    return out;
}

double bisect_last_true(const std::function<bool(double)>& pred, double lo, double hi, double x_tol,
                        int max_iter) {
    if (pred(hi)) return hi;
    for (int it = 0; it < max_iter && hi - lo > x_tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pred(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double abs_tol,
                        int max_depth) {
    if (b <= a) return 0.0;
    // Pre-split into a few panels so narrow features are not skipped by the
    // first coarse estimate.
    constexpr int kPanels = 16;
    const double width = (b - a) / kPanels;
    double total = 0.0;
    for (int i = 0; i < kPanels; ++i) {
        const double lo = a + i * width;
        const double hi = (i + 1 == kPanels) ? b : lo + width;
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fm = f(0.5 * (lo + hi));
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
        total += simpson_step(f, lo, hi, flo, fm, fhi, whole, abs_tol / kPanels, max_depth);
    }
    return total;
}

std::vector<double> central_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
    std::vector<double> point(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = point[i];
        point[i] = saved + h;
        const double up = f(point);
        point[i] = saved - h;
        const double down = f(point);
        point[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double Rng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::size_t Rng::discrete(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0) last_positive = i;
        acc += probs[i];
        if (u < acc) return i;
    }
    return last_positive;
}

} // namespace telic
