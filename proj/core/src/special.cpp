#include "evseg/special.hpp"

#include <cmath>

namespace evseg {

namespace {

// Lanczos coefficients for g = 7, n = 9 (Godfrey's tabulation).
constexpr double kLanczosG = 7.0;
constexpr double kLanczos[9] = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

double lgamma_lanczos(double x) {
    // Valid for x >= 0.5; callers shift smaller arguments.
    const double z = x - 1.0;
    double a = kLanczos[0];
    for (int i = 1; i < 9; ++i) a += kLanczos[i] / (z + i);
    const double t = z + kLanczosG + 0.5;
    constexpr double half_log_two_pi = 0.91893853320467274178;
    return half_log_two_pi + (z + 0.5) * std::log(t) - t + std::log(a);
}

}  // namespace

double lgamma(double x) {
    if (!(x > 0.0)) throw domain_error("lgamma: requires x > 0");
    if (x < 0.5) {
        // lgamma(x) = lgamma(x+1) - ln x
        return lgamma_lanczos(x + 1.0) - std::log(x);
    }
    return lgamma_lanczos(x);
}

double digamma(double x) {
    if (!(x > 0.0)) throw domain_error("digamma: requires x > 0");
    double result = 0.0;
    // psi(x) = psi(x+1) - 1/x: shift until the asymptotic series is accurate.
    while (x < 10.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli-number series, truncated at x^-14.
    double series = inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                    inv2 * (1.0 / 252.0 -
                    inv2 * (1.0 / 240.0 -
                    inv2 * (1.0 / 132.0 -
                    inv2 * (691.0 / 32760.0 -
                    inv2 * (1.0 / 12.0)))))));
    return result + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
    if (!(x > 0.0)) throw domain_error("trigamma: requires x > 0");
    double result = 0.0;
    while (x < 10.0) {
        result += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 1.0 +
                    inv * (0.5 +
                    inv * (1.0 / 6.0 -
                    inv2 * (1.0 / 30.0 -
                    inv2 * (1.0 / 42.0 -
                    inv2 * (1.0 / 30.0 -
                    inv2 * (5.0 / 66.0))))));
    return result + inv * series;
}

namespace {

template <class F, class D>
Tensor special_unary(Tape* tape, const Tensor& x, const char* op, F f, D d) {
    for (double v : x.data)
        if (!(v > 0.0)) throw domain_error(std::string(op) + ": requires x > 0");
    Tensor out = Tensor::zeros(x.shape);
    const int n = out.size();
    for (int i = 0; i < n; ++i) out.data[i] = f(x.data[i]);
    if (tape && x.traced()) {
        int idx = x.node;
        std::vector<double> xv = x.data;
        out.node = tape->add_node(
            [idx, xv, d, n](Tape& t, const std::vector<double>& g) {
                auto& gx = t.grad_buf(idx);
                for (int i = 0; i < n; ++i) gx[i] += g[i] * d(xv[i]);
            },
            n);
    }
    return out;
}

}  // namespace

Tensor lgamma(Tape* tape, const Tensor& x) {
    return special_unary(
        tape, x, "lgamma", [](double v) { return lgamma(v); },
        [](double v) { return digamma(v); });
}

Tensor digamma(Tape* tape, const Tensor& x) {
    return special_unary(
        tape, x, "digamma", [](double v) { return digamma(v); },
        [](double v) { return trigamma(v); });
}

}  // namespace evseg
