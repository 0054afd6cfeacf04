#pragma once

#include "rng.hpp"

#include <cstdint>

namespace ltkv::bench {

// Zipf(n, theta) over ranks 1..n by rejection-inversion (Hörmann and
// Derflinger 1996). O(1) setup, no zeta table, so n can be large.
class Zipfian {
public:
    Zipfian(std::uint64_t n, double theta);

    std::uint64_t sample(Rng& rng) const; // rank in [1, n]
    std::uint64_t n() const { return n_; }
    double theta() const { return theta_; }

private:
    double h(double x) const;
    double h_integral(double x) const;
    double h_integral_inverse(double x) const;

    std::uint64_t n_;
    double theta_;
    double h_integral_x1_;
    double h_integral_n_;
    double s_;
};

} // namespace ltkv::bench
