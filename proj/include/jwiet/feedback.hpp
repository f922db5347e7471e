#pragma once
// Random-vector-quantization codebooks, quantized geodesic reconstruction,
// closed-form energy/interference bounds under quantized feedback, and the
// adaptive feedback-bit split between the direct and cross links.

#include <fstream>
#include <sstream>

#include "beamform.hpp"

namespace jwiet {

struct Codebook {
    std::vector<VecC> entries;
    int bits = 0;
    std::uint64_t seed = 0;
    int m = 0;
};

inline Codebook build_codebook(std::uint64_t seed, int bits, int m) {
    if (bits < 0) throw std::invalid_argument("build_codebook: bits must be >= 0");
    if (bits > 20) throw std::runtime_error("build_codebook: 2^bits exceeds the 2^20 cap");
    Substream rs(seed, 0x0c0deb00c + static_cast<std::uint64_t>(bits));
    Codebook cb;
    cb.bits = bits;
    cb.seed = seed;
    cb.m = m;
    const std::size_t n = std::size_t{1} << bits;
    cb.entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) cb.entries.push_back(rs.isotropic_unit(m));
    return cb;
}

// Nearest codeword in chordal distance: argmax |v^H f|, ties to lowest index.
inline BeamVector quantize(const BeamVector& v, const Codebook& cb) {
    if (v.v.size() != cb.m) throw std::invalid_argument("quantize: dimension mismatch");
    std::size_t best = 0;
    double best_ip = -1.0;
    for (std::size_t i = 0; i < cb.entries.size(); ++i) {
        const double ip = std::abs(Cplx(v.v.adjoint() * cb.entries[i]));
        if (ip > best_ip + 1e-15) {
            best_ip = ip;
            best = i;
        }
    }
    return BeamVector(cb.entries[best]);
}

inline std::pair<GeodesicCurve, GeodesicCurve> quantized_geodesics(const BeamVector& ve_hat,
                                                                   const BeamVector& vl_hat,
                                                                   const BeamVector& wi_hat,
                                                                   const BeamVector& wl_hat) {
    return {geodesic(ve_hat, vl_hat), geodesic(wi_hat, wl_hat)};
}

// ---- codebook serialization (text; one codeword per line) ----

inline void save_codebook(const Codebook& cb, std::ostream& os) {
    os << "codebook " << cb.bits << " " << cb.m << " " << cb.seed << "\n";
    os.precision(17);
    for (std::size_t i = 0; i < cb.entries.size(); ++i) {
        os << i;
        for (int j = 0; j < cb.m; ++j)
            os << " " << cb.entries[i](j).real() << " " << cb.entries[i](j).imag();
        os << "\n";
    }
}

inline void save_codebook(const Codebook& cb, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_codebook: cannot open " + path);
    save_codebook(cb, f);
}

inline Codebook load_codebook(std::istream& is) {
    std::string magic;
    Codebook cb;
    if (!(is >> magic >> cb.bits >> cb.m >> cb.seed) || magic != "codebook")
        throw std::runtime_error("load_codebook: bad header");
    const std::size_t n = std::size_t{1} << cb.bits;
    cb.entries.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t idx;
        if (!(is >> idx) || idx != i) throw std::runtime_error("load_codebook: bad index");
        VecC v(cb.m);
        for (int j = 0; j < cb.m; ++j) {
            double re, im;
            if (!(is >> re >> im)) throw std::runtime_error("load_codebook: truncated entry");
            v(j) = Cplx(re, im);
        }
        cb.entries[i] = v;
    }
    return cb;
}

inline Codebook load_codebook(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_codebook: cannot open " + path);
    return load_codebook(f);
}

// ---- closed-form quantization statistics ----

inline double beta_fn(double x, double y) {
    return std::exp(std::lgamma(x) + std::lgamma(y) - std::lgamma(x + y));
}

// E[1 - |v^H v_hat|^2] for a B-bit random codebook in dimension m.
inline double rvq_mean_error(int bits, int m) {
    const double n = std::ldexp(1.0, bits);  // 2^B
    return n * beta_fn(n, static_cast<double>(m) / (m - 1));
}

// Frozen Monte Carlo means of the extreme squared singular values of an
// m x m standard complex Gaussian matrix (2e5 samples for m<=6, 6e4 above;
// ~0.2% standard error).
inline double expected_sigma_max_sq(int m) {
    static const double tab[] = {3.4987, 6.5142, 9.762,  13.1517, 16.6253, 20.1511, 23.753,
                                 27.3174, 31.0193, 34.68, 38.3559, 42.0504, 45.8198, 49.5329,
                                 53.2847};
    if (m < 2 || m > 16) throw std::domain_error("expected_sigma_max_sq: m outside table");
    return tab[m - 2];
}

inline double expected_sigma_min_sq(int m) {
    static const double tab[] = {0.499351, 0.333984, 0.249363, 0.200257, 0.166387, 0.143099,
                                 0.125008, 0.110575, 0.100402, 0.090655, 0.083338, 0.076943,
                                 0.071164, 0.066805, 0.062229};
    if (m < 2 || m > 16) throw std::domain_error("expected_sigma_min_sq: m outside table");
    return tab[m - 2];
}

struct BoundPair {
    double exact = 0.0;       // Beta-function form
    double asymptotic = 0.0;  // large-M approximation
};

namespace detail {
// E[||H v_hat||^2] for an m x m unit-variance-entry H whose exact top (or
// bottom) singular vector was quantized with `bits` bits: the quantized
// direction splits between the extreme direction and an isotropic remainder.
inline double mean_gain_quantized(int m, int bits, double extreme_gain) {
    const double d = rvq_mean_error(bits, m);
    return extreme_gain * (1.0 - d) +
           d * (static_cast<double>(m) * m - extreme_gain) / (m - 1);
}
}  // namespace detail

// Lower bound on the energy the energy transmitter delivers over its direct
// link with a tilted, quantized beam.
inline BoundPair e11_bound(int m, int b11, double p1, double theta1) {
    const double beta1 = static_cast<double>(m - 1) / m;  // Beta(1, m/(m-1))
    const double c = std::cos(theta1) * std::cos(theta1);
    const double s = 1.0 - c;
    BoundPair b;
    const double gain = detail::mean_gain_quantized(m, b11, expected_sigma_max_sq(m));
    b.exact = gain * p1 * (c - s * (1.0 - beta1)) + m * p1 * s;
    b.asymptotic = m * p1 * ((4.0 - 3.0 * std::exp2(-static_cast<double>(b11) / m)) * c + s);
    return b;
}

// Lower bound on the cross-link energy from the information transmitter's
// tilted, quantized beam (cross link has per-entry variance alpha12).
inline BoundPair e12_bound(int m, int b21, double alpha12, double power, double phi_i_hat,
                           double theta2) {
    const double beta1 = static_cast<double>(m - 1) / m;
    const double ang = phi_i_hat - theta2;
    const double c = std::cos(ang) * std::cos(ang);
    const double s = 1.0 - c;
    BoundPair b;
    const double gain =
        alpha12 * detail::mean_gain_quantized(m, b21, expected_sigma_max_sq(m));
    b.exact = gain * power * (c - s * (1.0 - beta1)) + alpha12 * power * m * s;
    b.asymptotic = alpha12 * m * power *
                   ((4.0 - 3.0 * std::exp2(-static_cast<double>(b21) / m)) * c + s);
    return b;
}

inline std::pair<BoundPair, BoundPair> e_bounds_eh(int m, int b11, int b21, double p1,
                                                   double theta1, double alpha12, double power,
                                                   double phi_i_hat, double theta2) {
    return {e11_bound(m, b11, p1, theta1), e12_bound(m, b21, alpha12, power, phi_i_hat, theta2)};
}

// Lower bound on the direct-link signal power at the ID receiver.
inline BoundPair s22_bound(int m, int b22, double power, double theta2) {
    const double beta1 = static_cast<double>(m - 1) / m;
    const double c = std::cos(theta2) * std::cos(theta2);
    const double s = 1.0 - c;
    BoundPair b;
    const double gain = detail::mean_gain_quantized(m, b22, expected_sigma_max_sq(m));
    b.exact = gain * power * (c - s * (1.0 - beta1)) + power * m * s;
    b.asymptotic = m * power * ((4.0 - 3.0 * std::exp2(-static_cast<double>(b22) / m)) * c + s);
    return b;
}

// Upper bound on the interference the energy transmitter leaks into the ID
// receiver: the quantized min-leakage endpoint contributes the quantized
// bottom-singular gain, the tilt contributes an isotropic term scaled by
// 1/Beta(1, m/(m-1)).
inline BoundPair in_bound_id(int m, int b12, double p1, double theta1, double phi_e_hat,
                             double alpha21) {
    if (p1 <= 0.0) return {0.0, 0.0};
    const double beta1 = static_cast<double>(m - 1) / m;
    const double ang = phi_e_hat - theta1;
    const double c = std::cos(ang) * std::cos(ang);
    const double s = 1.0 - c;
    BoundPair b;
    const double gain =
        alpha21 * detail::mean_gain_quantized(m, b12, expected_sigma_min_sq(m));
    b.exact = gain * p1 * c + (alpha21 * m * p1 / beta1) * s;
    b.asymptotic = alpha21 * m * p1 *
                   ((1.0 + 4.0 * std::exp2(-static_cast<double>(b12) / m)) * c + s);
    return b;
}

namespace detail {
// round half to even
inline long round_half_even(double x) {
    const double f = std::floor(x);
    const double frac = x - f;
    if (frac > 0.5) return static_cast<long>(f) + 1;
    if (frac < 0.5) return static_cast<long>(f);
    const long lf = static_cast<long>(f);
    return (lf % 2 == 0) ? lf : lf + 1;
}
}  // namespace detail

// Closed-form split of the EH receiver's feedback budget between the direct
// link (b11) and the cross link (b21), maximizing the asymptotic sum of the
// two energy lower bounds.
inline std::pair<int, int> allocate_bits_eh(int b_total, int m, double p1, double theta1,
                                            double alpha12, double power, double phi_i_hat,
                                            double theta2) {
    if (b_total < 0) throw std::invalid_argument("allocate_bits_eh: negative budget");
    if (p1 <= 0.0) return {0, b_total};
    const double c1 = std::cos(theta1) * std::cos(theta1);
    const double c2 = std::cos(phi_i_hat - theta2) * std::cos(phi_i_hat - theta2);
    const double denom = alpha12 * power * c2;
    if (denom <= 0.0) return {b_total, 0};
    if (p1 * c1 <= 0.0) return {0, b_total};
    const double x = b_total / 2.0 + (m / 2.0) * std::log2(p1 * c1 / denom);
    long b11 = detail::round_half_even(x);
    b11 = std::max(b11, 0L);
    b11 = std::min<long>(b11, b_total);
    return {static_cast<int>(b11), b_total - static_cast<int>(b11)};
}

struct IdAllocation {
    int b12 = 0, b22 = 0;
    double sinr_low = 0.0;
};

// ID receiver's split: exhaustive scan of the asymptotic SINR lower bound
// over b22 in {0..B}, b12 = B - b22.
inline IdAllocation sinr_bound_and_allocate_id(int b_total, int m, double p1, double theta1,
                                               double phi_e_hat, double alpha21, double power,
                                               double theta2) {
    IdAllocation out;
    out.sinr_low = -1.0;
    for (int b22 = 0; b22 <= b_total; ++b22) {
        const int b12 = b_total - b22;
        const double s = s22_bound(m, b22, power, theta2).asymptotic;
        const double in = in_bound_id(m, b12, p1, theta1, phi_e_hat, alpha21).asymptotic;
        const double sinr = s / (1.0 + in);
        if (sinr > out.sinr_low) {
            out.sinr_low = sinr;
            out.b22 = b22;
            out.b12 = b12;
        }
    }
    return out;
}

}  // namespace jwiet
