#pragma once
// Splittable random streams: every Monte Carlo trial draws from its own
// substream derived from (master seed, stream index), so trials stay
// reproducible regardless of scheduling order.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace jwiet {

using Cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

class Substream {
  public:
    Substream(std::uint64_t master_seed, std::uint64_t stream_index)
        : gen_(detail::splitmix64(detail::splitmix64(master_seed) ^
                                  detail::splitmix64(stream_index * 0x9e3779b97f4a7c15ULL + 1))) {}

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }

    // Box-Muller keeps the stream layout independent of the stdlib's
    // normal_distribution internals.
    double gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // CN(0, var): independent real/imag parts with variance var/2 each.
    Cplx cgauss(double var = 1.0) {
        const double s = std::sqrt(var / 2.0);
        return {s * gauss(), s * gauss()};
    }

    MatC cgauss_matrix(int rows, int cols, double var = 1.0) {
        MatC m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = cgauss(var);
        return m;
    }

    VecC isotropic_unit(int m) {
        VecC v(m);
        for (int i = 0; i < m; ++i) v(i) = cgauss(1.0);
        return v / v.norm();
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace jwiet
