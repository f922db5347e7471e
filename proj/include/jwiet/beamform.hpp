#pragma once
// Rank-one beamformer constructions: max-energy (MEB), min-leakage (MLB),
// signal-to-leakage-and-energy ratio (SLER), and geodesic interpolation
// between two unit beams on the complex sphere.

#include <functional>
#include <limits>

#include "channel.hpp"

namespace jwiet {

struct BeamVector {
    VecC v;

    BeamVector() = default;
    explicit BeamVector(VecC x) : v(std::move(x)) {}
};

class DegenerateCurveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Max-energy beam: top right singular vector of the direct energy link.
inline BeamVector meb(const ChannelMatrix& h11) { return BeamVector(decompose(h11).v.col(0)); }

// Min-leakage beam: bottom right singular vector of the cross link.
inline BeamVector mlb(const ChannelMatrix& h21) {
    const auto& d = decompose(h21);
    return BeamVector(d.v.col(d.v.cols() - 1));
}

namespace detail {
// Normalize and fix phase (first nonzero entry real nonnegative) for
// deterministic eigenvector output.
inline VecC unit_phase_fixed(VecC v) {
    v /= v.norm();
    for (int i = 0; i < v.size(); ++i) {
        if (std::abs(v(i)) > 1e-12) {
            v *= std::conj(v(i)) / std::abs(v(i));
            break;
        }
    }
    return v;
}
}  // namespace detail

// Dominant generalized eigenvector of (H11^H H11, H21^H H21 + shift*I) with
// shift = max(ebar/power - sigma11_1^2, 0). Singular denominator (rank
// deficient H21 with zero shift) is regularized by 1e-12*||H21||^2 * I.
inline BeamVector sler(const ChannelMatrix& h11, const ChannelMatrix& h21, double ebar,
                       double power) {
    const int m = h11.m();
    const MatC a = h11.entries.adjoint() * h11.entries;
    const double shift = std::max(ebar / power - top_gain(h11), 0.0);
    MatC b = h21.entries.adjoint() * h21.entries + shift * MatC::Identity(m, m);
    if (min_gain(h21) + shift < 1e-12 * top_gain(h21))
        b += (1e-12 * top_gain(h21)) * MatC::Identity(m, m);
    Eigen::GeneralizedSelfAdjointEigenSolver<MatC> es(a, b);
    // eigenvalues ascending: dominant generalized eigenvector is the last
    return BeamVector(detail::unit_phase_fixed(es.eigenvectors().col(m - 1)));
}

struct GeodesicCurve {
    BeamVector start;       // v1
    BeamVector end;         // v2
    Cplx phase;             // u1 = v1^H v2 / |v1^H v2|
    double principal_angle; // phi1 = arccos |v1^H v2|
    BeamVector ortho_dir;   // unit vector orthogonal to v1 in span{v1, v2}
};

inline GeodesicCurve geodesic(const BeamVector& v1, const BeamVector& v2) {
    const Cplx ip = v1.v.adjoint() * v2.v;
    const double c = std::abs(ip);
    if (c >= 1.0 - 1e-9) throw DegenerateCurveError("geodesic: collinear endpoints");
    GeodesicCurve g;
    g.start = v1;
    g.end = v2;
    g.phase = (c > 0.0) ? ip / c : Cplx(1.0, 0.0);
    g.principal_angle = std::acos(std::min(c, 1.0));
    const double s = std::sin(g.principal_angle);
    g.ortho_dir = BeamVector(((v1.v * g.phase) * std::cos(g.principal_angle) - v2.v) / s);
    return g;
}

// v_G(theta) = v1*u1*cos(theta) - ortho*sin(theta); v_G(0) = v1*u1,
// v_G(phi) = v2.
inline BeamVector geodesic_point(const GeodesicCurve& g, double theta) {
    if (theta < -1e-12 || theta > g.principal_angle + 1e-12)
        throw std::domain_error("geodesic_point: theta outside [0, principal_angle]");
    return BeamVector(g.start.v * g.phase * std::cos(theta) - g.ortho_dir.v * std::sin(theta));
}

// Reversed curve (from end to start); its ortho_dir is the "(v2)^perp u"
// vector that appears in the scalarized eta form.
inline GeodesicCurve reverse(const GeodesicCurve& g) { return geodesic(g.end, g.start); }

// eta(theta1) = ||H11 v_G(theta1)||^2 / ||H21 v_G(theta1)||^2, the
// energy-to-leakage ratio along the energy geodesic.
inline double eta(double theta1, const GeodesicCurve& g, const ChannelMatrix& h11,
                  const ChannelMatrix& h21) {
    const VecC v = geodesic_point(g, theta1).v;
    const double num = (h11.entries * v).squaredNorm();
    const double den = (h21.entries * v).squaredNorm();
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    return num / den;
}

// Four-scalar form of eta: only these scalars (not full matrices) are needed
// at the transmitter.
struct EtaScalars {
    double sig11_sq;     // ||H11 v_E||^2 = sigma11_1^2
    double h11_ortho_sq; // ||H11 (v_E)^perp||^2
    double sig21m_sq;    // ||H21 v_L||^2 = sigma21_M^2
    double h21_ortho_sq; // ||H21 (v_L)^perp||^2 along the reversed curve
    double phi_e;        // principal angle
};

inline EtaScalars eta_scalars(const GeodesicCurve& g, const ChannelMatrix& h11,
                              const ChannelMatrix& h21) {
    const GeodesicCurve rev = reverse(g);
    EtaScalars s;
    s.sig11_sq = (h11.entries * g.start.v).squaredNorm();
    s.h11_ortho_sq = (h11.entries * g.ortho_dir.v).squaredNorm();
    s.sig21m_sq = (h21.entries * g.end.v).squaredNorm();
    s.h21_ortho_sq = (h21.entries * rev.ortho_dir.v).squaredNorm();
    s.phi_e = g.principal_angle;
    return s;
}

inline double eta_from_scalars(double theta1, const EtaScalars& s) {
    const double c1 = std::cos(theta1), s1 = std::sin(theta1);
    const double c2 = std::cos(s.phi_e - theta1), s2 = std::sin(s.phi_e - theta1);
    const double num = c1 * c1 * s.sig11_sq + s1 * s1 * s.h11_ortho_sq;
    const double den = c2 * c2 * s.sig21m_sq + s2 * s2 * s.h21_ortho_sq;
    if (den <= 0.0) return std::numeric_limits<double>::infinity();
    return num / den;
}

// Information-side endpoints: eigen-beam of the direct ID link and the top
// direction of the IAP -> EH MS cross link.
inline std::pair<BeamVector, BeamVector> info_endpoints(const ChannelMatrix& h22,
                                                        const ChannelMatrix& h12) {
    return {BeamVector(decompose(h22).v.col(0)), BeamVector(decompose(h12).v.col(0))};
}

// Scalar maximization on [lo, hi]: coarse grid to bracket the global maximum
// (the objectives here are ratios of sinusoid-quadratics with few local
// maxima), then golden-section refinement to `tol` radians.
inline double maximize_on_interval(const std::function<double(double)>& f, double lo, double hi,
                                   double tol = 1e-6, int grid = 128) {
    if (hi <= lo) return lo;
    double best_x = lo, best_f = f(lo);
    for (int i = 1; i <= grid; ++i) {
        const double x = lo + (hi - lo) * i / grid;
        const double fx = f(x);
        if (fx > best_f) {
            best_f = fx;
            best_x = x;
        }
    }
    const double h = (hi - lo) / grid;
    double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    const double mid = (a + b) / 2.0;
    return (f(mid) >= best_f) ? mid : best_x;
}

}  // namespace jwiet
