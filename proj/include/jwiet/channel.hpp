#pragma once
// Random MIMO channel realizations and SVD utilities shared by all solvers.
//
// Convention: direct links have unit per-entry variance, cross links variance
// alpha, in a unit-noise normalized system. Physical power/noise/path-loss
// enter only through effective_power(); all formulas downstream assume unit
// noise.

#include <optional>
#include <stdexcept>

#include "rng.hpp"

namespace jwiet {

struct SvdCache {
    MatC u;                 // left singular vectors
    Eigen::VectorXd sigma;  // nonincreasing, >= 0
    MatC v;                 // right singular vectors
};

// SVD with a deterministic phase convention: the first nonzero entry of each
// right singular vector is made real nonnegative (the matching column of U is
// rotated by the same phase so U*diag(sigma)*V^H is unchanged).
inline SvdCache compute_svd(const MatC& a) {
    if (!a.allFinite()) throw std::domain_error("compute_svd: non-finite entries");
    Eigen::JacobiSVD<MatC> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    SvdCache c{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    for (int k = 0; k < c.v.cols(); ++k) {
        for (int i = 0; i < c.v.rows(); ++i) {
            const Cplx e = c.v(i, k);
            if (std::abs(e) > 1e-12) {
                const Cplx phase = std::conj(e) / std::abs(e);
                c.v.col(k) *= phase;
                c.u.col(k) *= phase;
                break;
            }
        }
    }
    return c;
}

struct ChannelMatrix {
    MatC entries;
    mutable std::optional<SvdCache> svd_cache;

    ChannelMatrix() = default;
    explicit ChannelMatrix(MatC e) : entries(std::move(e)) {}

    int m() const { return static_cast<int>(entries.rows()); }
};

inline const SvdCache& decompose(const ChannelMatrix& h) {
    if (!h.svd_cache) h.svd_cache = compute_svd(h.entries);
    return *h.svd_cache;
}

// Squared spectral norm, sigma_1^2.
inline double top_gain(const ChannelMatrix& h) {
    const auto& s = decompose(h).sigma;
    return s(0) * s(0);
}

inline double min_gain(const ChannelMatrix& h) {
    const auto& s = decompose(h).sigma;
    const double x = s(s.size() - 1);
    return x * x;
}

struct NetworkRealization {
    ChannelMatrix h11, h12, h21, h22;  // h_ij: transmitter j -> receiver i
    int m = 0;
    double alpha12 = 0.0, alpha21 = 0.0;
    double power = 0.0;            // watts
    double noise = 0.0;            // watts
    double direct_pathloss = 1e-3; // applied to every link as a pure power rescale

    // Transmit budget in the unit-noise normalized system.
    double effective_power() const { return power * direct_pathloss / noise; }
};

inline NetworkRealization sample_network(std::uint64_t seed, int m, double alpha, double power,
                                         double noise) {
    if (m < 2) throw std::invalid_argument("sample_network: m must be >= 2");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("sample_network: alpha not in [0,1]");
    if (power <= 0.0 || noise <= 0.0)
        throw std::invalid_argument("sample_network: power and noise must be positive");
    Substream rs(seed, 0);
    NetworkRealization net;
    net.m = m;
    net.alpha12 = net.alpha21 = alpha;
    net.power = power;
    net.noise = noise;
    net.h11 = ChannelMatrix(rs.cgauss_matrix(m, m, 1.0));
    net.h12 = ChannelMatrix(rs.cgauss_matrix(m, m, alpha));
    net.h21 = ChannelMatrix(rs.cgauss_matrix(m, m, alpha));
    net.h22 = ChannelMatrix(rs.cgauss_matrix(m, m, 1.0));
    decompose(net.h11);
    decompose(net.h12);
    decompose(net.h21);
    decompose(net.h22);
    return net;
}

}  // namespace jwiet
