#include "zipf.hpp"

#include <cmath>
#include <stdexcept>

namespace ltkv::bench {

namespace {

// log1p(x)/x and expm1(x)/x, stable near zero.
double helper1(double x) {
    if (std::fabs(x) > 1e-8)
        return std::log1p(x) / x;
    return 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x));
}

double helper2(double x) {
    if (std::fabs(x) > 1e-8)
        return std::expm1(x) / x;
    return 1.0 + x * 0.5 * (1.0 + x / 3.0 * (1.0 + 0.25 * x));
}

} // namespace

Zipfian::Zipfian(std::uint64_t n, double theta) : n_(n), theta_(theta) {
    if (n == 0)
        throw std::invalid_argument("zipfian needs at least one item");
    if (!(theta > 0.0))
        throw std::invalid_argument("zipfian exponent must be positive");
    h_integral_x1_ = h_integral(1.5) - 1.0;
    h_integral_n_ = h_integral(static_cast<double>(n) + 0.5);
    s_ = 2.0 - h_integral_inverse(h_integral(2.5) - h(2.0));
}

double Zipfian::h(double x) const { return std::exp(-theta_ * std::log(x)); }

double Zipfian::h_integral(double x) const {
    const double lx = std::log(x);
    return helper2((1.0 - theta_) * lx) * lx;
}

double Zipfian::h_integral_inverse(double x) const {
    double t = x * (1.0 - theta_);
    if (t < -1.0)
        t = -1.0;
    return std::exp(helper1(t) * x);
}

std::uint64_t Zipfian::sample(Rng& rng) const {
    for (;;) {
        const double u = h_integral_n_ + rng.unit() * (h_integral_x1_ - h_integral_n_);
        const double x = h_integral_inverse(u);
        double kd = std::floor(x + 0.5);
        if (kd < 1.0)
            kd = 1.0;
        else if (kd > static_cast<double>(n_))
            kd = static_cast<double>(n_);
        if (kd - x <= s_ || u >= h_integral(kd + 0.5) - h(kd))
            return static_cast<std::uint64_t>(kd);
    }
}

} // namespace ltkv::bench
