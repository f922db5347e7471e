#pragma once
// Rate-energy region solvers for the two-user setup: water-filling inner
// problems, the iterative energy-beam algorithms (full-rank and rank-one
// information covariance variants), and boundary sweeps.
//
// All quantities live in the unit-noise normalized system; P below is
// NetworkRealization::effective_power().

#include <optional>
#include <vector>

#include "beamform.hpp"

namespace jwiet {

struct TxCovariance {
    MatC q;
    double budget = 0.0;
};

struct DualState {
    double lambda = 0.0;  // energy-constraint multiplier
    double mu = 0.0;      // power-constraint multiplier
};

struct REPoint {
    double rate = 0.0;    // bits per channel use
    double energy = 0.0;  // harvested power, normalized units
    double p1 = 0.0;      // energy-transmitter power actually used
    std::optional<double> theta1, theta2;
};

enum class Strategy { MEB, MLB, SLER, GEO_E, GEO_EI3, GEO_EI4, TIMESHARE };

inline const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::MEB: return "MEB";
        case Strategy::MLB: return "MLB";
        case Strategy::SLER: return "SLER";
        case Strategy::GEO_E: return "GEO_E";
        case Strategy::GEO_EI3: return "GEO_EI3";
        case Strategy::GEO_EI4: return "GEO_EI4";
        case Strategy::TIMESHARE: return "TIMESHARE";
    }
    return "?";
}

struct BoundaryPoint {
    double target = 0.0;             // requested minimum harvested energy
    std::optional<REPoint> point;    // nullopt: target infeasible for this strategy
};

struct REBoundary {
    Strategy strategy = Strategy::MEB;
    std::vector<BoundaryPoint> points;
};

class InfeasibleError : public std::runtime_error {
  public:
    InfeasibleError(double max_energy, const std::string& what)
        : std::runtime_error(what), max_energy(max_energy) {}
    double max_energy;
};

inline double rate_bits(const MatC& h_eff, const MatC& q) {
    const int n = static_cast<int>(h_eff.rows());
    const MatC a = MatC::Identity(n, n) + h_eff * q * h_eff.adjoint();
    return std::log2(std::max(a.selfadjointView<Eigen::Lower>().eigenvalues()
                                  .array().max(1e-300).prod(),
                              1e-300));
}

// Classic water-filling: Q = V diag(p) V^H, p_i = (nu - 1/sigma_i^2)+,
// sum p = power.
inline TxCovariance waterfill(const ChannelMatrix& h_eff, double power) {
    const int m = h_eff.m();
    const auto& d = decompose(h_eff);
    std::vector<double> inv(m);
    int active = 0;
    for (int i = 0; i < m; ++i) {
        const double s2 = d.sigma(i) * d.sigma(i);
        if (s2 > 1e-15) {
            inv[i] = 1.0 / s2;
            ++active;
        } else {
            inv[i] = std::numeric_limits<double>::infinity();
        }
    }
    TxCovariance out{MatC::Zero(m, m), power};
    if (active == 0) return out;
    // water level: try k strongest modes, largest feasible k wins
    double nu = 0.0;
    for (int k = active; k >= 1; --k) {
        double sum_inv = 0.0;
        for (int i = 0; i < k; ++i) sum_inv += inv[i];
        nu = (power + sum_inv) / k;
        if (nu > inv[k - 1]) break;  // all k modes strictly above water
    }
    for (int i = 0; i < m; ++i) {
        const double p = std::max(nu - inv[i], 0.0);
        if (p > 0.0) out.q += p * (d.v.col(i) * d.v.col(i).adjoint());
    }
    return out;
}

namespace detail {

inline MatC herm_inv_sqrt(const MatC& r) {
    Eigen::SelfAdjointEigenSolver<MatC> es(r);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-12);
    return es.eigenvectors() * ev.cwiseInverse().cwiseSqrt().asDiagonal() *
           es.eigenvectors().adjoint();
}

// Energy-constrained water-filling at fixed duals: with
// A(lambda, mu) = mu*I - lambda*H12^H H12 (shares eigenvectors with H12),
// Q = A^{-1/2} V' diag((1 - 1/s'^2)+) V'^H A^{-1/2} where s' are the
// singular values of H22_eff A^{-1/2}. Parameterize by t = lambda/mu: then
// A^{-1/2} = mu^{-1/2} (I - t*B)^{-1/2} with B = H12^H H12, and with
// sigma_i(t), v'_i(t) the SVD of H22_eff (I - t*B)^{-1/2} the solution is
// Q(t, w) = sum_i (w - 1/sigma_i^2)+ q_i q_i^H, q_i = (I - t*B)^{-1/2} v'_i,
// where w = 1/mu. tr Q = sum c_i (w - 1/sigma_i^2)+ with c_i = ||q_i||^2 is
// piecewise linear increasing in w, so the power constraint pins w in closed
// form and only t needs a (single) bisection on the energy constraint.
struct P1Workspace {
    MatC v12;                // eigenvectors of H12^H H12
    Eigen::VectorXd sig12sq; // its eigenvalues (sigma12_i^2, nonincreasing)
    MatC g;                  // H22_eff * V12
    MatC f;                  // H12 * V12
};

struct P1Eval {
    double rate = 0.0;    // bits at the power-constrained point
    double energy = 0.0;  // tr(H12 Q H12^H)
    double mu = 0.0;      // power multiplier (1/w)
    MatC qcols;           // q_i columns (scaled eigvec directions)
    Eigen::VectorXd p;    // per-column weights (w - 1/sigma_i^2)+
};

inline P1Eval p1_eval_at_t(const P1Workspace& w, double t, double power,
                           bool want_q = false) {
    const int m = static_cast<int>(w.sig12sq.size());
    const Eigen::VectorXd dvec =
        (1.0 - t * w.sig12sq.array()).max(1e-14).inverse().sqrt().matrix();
    Eigen::JacobiSVD<MatC> svd(w.g * dvec.asDiagonal(), Eigen::ComputeFullV);
    const Eigen::VectorXd& sig = svd.singularValues();
    // weighted water-filling: largest feasible active set wins
    Eigen::VectorXd c(m), inv(m);
    for (int i = 0; i < m; ++i) {
        c(i) = (dvec.asDiagonal() * svd.matrixV().col(i)).squaredNorm();
        inv(i) = sig(i) * sig(i) > 1e-15 ? 1.0 / (sig(i) * sig(i))
                                         : std::numeric_limits<double>::infinity();
    }
    double wl = 0.0;
    for (int k = m; k >= 1; --k) {
        if (!std::isfinite(inv(k - 1))) continue;
        double num = power, den = 0.0;
        for (int i = 0; i < k; ++i) {
            num += c(i) * inv(i);
            den += c(i);
        }
        wl = num / den;
        if (wl > inv(k - 1)) break;
    }
    P1Eval out;
    out.mu = 1.0 / wl;
    out.p = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
        if (!std::isfinite(inv(i))) continue;
        out.p(i) = std::max(wl - inv(i), 0.0);
        if (out.p(i) > 0.0) {
            out.rate += std::log2(wl / inv(i));
            out.energy += out.p(i) * (w.f * (dvec.asDiagonal() * svd.matrixV().col(i)))
                                         .squaredNorm();
        }
    }
    if (want_q) out.qcols = w.v12 * dvec.asDiagonal() * svd.matrixV();
    return out;
}

inline MatC p1_q_of(const P1Eval& ev) {
    return ev.qcols * ev.p.asDiagonal() * ev.qcols.adjoint();
}

}  // namespace detail

// Inner convex problem: maximize log det(I + H22_eff Q H22_eff^H) s.t.
// tr(Q) <= P and tr(H12 Q H12^H) >= ebar - e11. Duals found by nested
// bisection (outer lambda on the energy constraint, inner mu on the power
// constraint), both monotone.
inline std::pair<TxCovariance, DualState> solve_p1(const ChannelMatrix& h12,
                                                   const ChannelMatrix& h22, const MatC& r_minus2,
                                                   double e11, double ebar, double power) {
    const int m = h12.m();
    const double sig12sq_top = top_gain(h12);
    const double e_req = ebar - e11;
    const MatC rinv_sqrt = detail::herm_inv_sqrt(r_minus2);
    const ChannelMatrix h22_eff(rinv_sqrt * h22.entries);

    const auto energy_of = [&](const MatC& q) {
        return (h12.entries * q * h12.entries.adjoint()).trace().real();
    };

    TxCovariance wf = waterfill(h22_eff, power);
    if (e_req <= 0.0 || energy_of(wf.q) >= e_req) {
        return {wf, DualState{0.0, 0.0}};
    }
    if (e_req > power * sig12sq_top * (1.0 + 1e-9)) {
        throw InfeasibleError(e11 + power * sig12sq_top,
                              "solve_p1: energy target exceeds max transferable energy");
    }

    detail::P1Workspace w;
    {
        const auto& d12 = decompose(h12);
        w.v12 = d12.v;
        w.sig12sq = d12.sigma.array().square().matrix();
        w.g = h22_eff.entries * d12.v;
        w.f = h12.entries * d12.v;
    }

    if (e_req >= power * sig12sq_top * (1.0 - 1e-10)) {
        // constraint forces all power onto H12's top direction
        const VecC wl = w.v12.col(0);
        TxCovariance q{power * (wl * wl.adjoint()), power};
        return {q, DualState{1.0, 1.0 + sig12sq_top}};
    }

    // Bisect t = lambda/mu in [0, 1/sigma12_1^2): the transferred energy of
    // the power-constrained solution grows from the plain-waterfill value to
    // the rank-one maximum as t approaches the pencil singularity.
    const double t_top = (1.0 - 1e-12) / w.sig12sq(0);
    double t_lo = 0.0, t_hi = t_top;
    detail::P1Eval ev;
    for (int it = 0; it < 90; ++it) {
        const double mid = 0.5 * (t_lo + t_hi);
        ev = detail::p1_eval_at_t(w, mid, power);
        if (std::abs(ev.energy - e_req) <= 1e-9 * e_req) {
            t_lo = t_hi = mid;
            break;
        }
        (ev.energy < e_req ? t_lo : t_hi) = mid;
    }
    ev = detail::p1_eval_at_t(w, t_hi, power, true);  // err on the feasible side
    MatC q = detail::p1_q_of(ev);
    if (ev.energy < e_req * (1.0 - 1e-6)) {
        // numerical flat spot: blend toward the rank-one point
        const VecC wl = w.v12.col(0);
        const MatC q1 = power * (wl * wl.adjoint());
        double tlo = 0.0, thi = 1.0;
        for (int it = 0; it < 100; ++it) {
            const double t = 0.5 * (tlo + thi);
            const MatC qt = (1.0 - t) * q + t * q1;
            (energy_of(qt) < e_req ? tlo : thi) = t;
        }
        q = (1.0 - thi) * q + thi * q1;
    }
    return {TxCovariance{q, power}, DualState{t_hi * ev.mu, ev.mu}};
}

struct SolveOptions {
    int n_max = 50;
    double gamma1 = 0.95;
    double delta_frac = 0.5;  // step = delta_frac * Delta_max
    bool accelerate = true;   // jump to the closed-form fixed point of the P1 loop
    std::vector<double>* objective_trace = nullptr;
    // Accelerated-path P1 search resolution; candidate scans in the geodesic
    // polish lower these and re-score the winners at full resolution.
    int p1_grid = 24;
    double p1_tol_frac = 1e-5;
};

namespace detail {
struct FixedBeamEval {
    REPoint point;
    DualState duals;
};

// Evaluate the boundary point for a fixed unit energy beam at energy-tx power
// p1: interference-whitened water-filling at the information transmitter.
inline FixedBeamEval eval_fixed_beam(const NetworkRealization& net, const VecC& v, double p1,
                                     double ebar) {
    const double power = net.effective_power();
    const int m = net.m;
    const double omega1 = (net.h11.entries * v).squaredNorm();
    const VecC h21v = net.h21.entries * v;
    const MatC r2 = MatC::Identity(m, m) + p1 * (h21v * h21v.adjoint());
    const double e11 = omega1 * p1;
    auto [q2, duals] = solve_p1(net.h12, net.h22, r2, e11, ebar, power);
    const MatC h22_eff = herm_inv_sqrt(r2) * net.h22.entries;
    FixedBeamEval out;
    out.point.rate = rate_bits(h22_eff, q2.q);
    out.point.energy =
        e11 + (net.h12.entries * q2.q * net.h12.entries.adjoint()).trace().real();
    out.point.p1 = p1;
    out.duals = duals;
    return out;
}
}  // namespace detail

// Iterative boundary-point search for a fixed rank-one energy beam: reduce
// the energy transmitter's power while the information transmitter
// compensates. Lowering P1 relaxes the interference seen by the information
// receiver but tightens the energy burden left to Q2, so the rate as a
// function of P1 is quasi-concave on the feasible range [p1_star, P]; the
// loop descends from P1 = P and stops at the crest, which the accelerated
// path locates directly by golden-section search.
inline REPoint algorithm1(const NetworkRealization& net, const BeamVector& energy_beam,
                          double ebar, const SolveOptions& opt = {}) {
    const double power = net.effective_power();
    const VecC& v = energy_beam.v;
    const double omega1 = (net.h11.entries * v).squaredNorm();
    const double sig12sq = top_gain(net.h12);
    const double e_max = omega1 * power + power * sig12sq;
    if (ebar > e_max * (1.0 + 1e-9))
        throw InfeasibleError(e_max, "algorithm1: energy target exceeds E_max");

    const double tol_eq = 1e-6 * std::max(1.0, ebar);
    // Least P1 keeping the information-side constraint satisfiable.
    const double p1_star =
        std::min(std::max((ebar - power * sig12sq) / omega1, 0.0), power);

    if (opt.accelerate && !opt.objective_trace) {
        const auto rate_at = [&](double p1) {
            return detail::eval_fixed_beam(net, v, p1, ebar).point.rate;
        };
        const double p1_opt = maximize_on_interval(rate_at, p1_star, power,
                                                   opt.p1_tol_frac * std::max(power, 1.0),
                                                   opt.p1_grid);
        return detail::eval_fixed_beam(net, v, p1_opt, ebar).point;
    }

    double p1 = power;
    auto ev = detail::eval_fixed_beam(net, v, p1, ebar);
    REPoint cur = ev.point;
    if (opt.objective_trace) opt.objective_trace->push_back(cur.rate);
    double gamma = opt.gamma1;
    bool gamma_step = false;
    for (int n = 1; n < opt.n_max; ++n) {
        double p1_next;
        if (cur.energy > ebar + tol_eq) {
            // Surplus: shed transmitter-1 power toward the equality manifold.
            const double delta_max = (cur.energy - ebar) / omega1;
            p1_next = std::max(p1 - opt.delta_frac * delta_max, 0.0);
            gamma_step = false;
        } else {
            // On the manifold: probe a further geometric reduction.
            p1_next = std::max(p1 * gamma, p1_star);
            gamma_step = true;
        }
        if (p1_next >= p1 - 1e-15 * std::max(power, 1.0)) break;
        auto evn = detail::eval_fixed_beam(net, v, p1_next, ebar);
        if (evn.point.rate < cur.rate - 1e-12 * std::max(1.0, cur.rate)) {
            // Past the crest: anneal the reduction factor toward 1 so the
            // loop settles onto the crest instead of overshooting it.
            if (!gamma_step || 1.0 - gamma < 1e-8) break;
            gamma = std::sqrt(gamma);
            continue;
        }
        const bool stalled = std::abs(evn.point.rate - cur.rate) < 1e-6 &&
                             std::abs(evn.point.energy - cur.energy) < 1e-6;
        p1 = p1_next;
        cur = evn.point;
        if (opt.objective_trace) opt.objective_trace->push_back(cur.rate);
        if (gamma_step && stalled) break;
    }
    return cur;
}

// Bisection on the energy geodesic: largest phi0 in [0, phi_E] such that
// P*||H11 v_G(phi0)||^2 >= target, using the monotone decay of the direct
// energy term along the curve.
inline double phi0_solve(const GeodesicCurve& curve, const ChannelMatrix& h11, double power,
                         double target) {
    const auto e11_at = [&](double th) {
        return power * (h11.entries * geodesic_point(curve, th).v).squaredNorm();
    };
    if (target <= e11_at(curve.principal_angle)) return curve.principal_angle;
    if (target > e11_at(0.0)) return 0.0;
    double lo = 0.0, hi = curve.principal_angle;
    while (hi - lo > 1e-8) {
        const double mid = 0.5 * (lo + hi);
        (e11_at(mid) >= target ? lo : hi) = mid;
    }
    return lo;
}

namespace detail {
// Shared driver for the geodesic energy-beam boundary point: fixed-point
// iteration over (theta1, inner solve), then a candidate polish that keeps
// the returned point no worse than the fixed-strategy endpoints.
inline REPoint geo_energy_point(const NetworkRealization& net, double ebar,
                                const SolveOptions& opt) {
    const double power = net.effective_power();
    const BeamVector ve = meb(net.h11);
    const BeamVector vl = mlb(net.h21);
    GeodesicCurve curve;
    try {
        curve = geodesic(ve, vl);
    } catch (const DegenerateCurveError&) {
        return algorithm1(net, ve, ebar, opt);  // measure-zero: curve collapses to a point
    }
    const double sig12sq = top_gain(net.h12);
    const double e_max = top_gain(net.h11) * power + power * sig12sq;
    if (ebar > e_max * (1.0 + 1e-9))
        throw InfeasibleError(e_max, "algorithm2: energy target exceeds E_max at theta1=0");

    const EtaScalars sc = eta_scalars(curve, net.h11, net.h21);
    double phi0 = phi0_solve(curve, net.h11, power, ebar - power * sig12sq);
    double theta1 = 0.0;
    REPoint best;
    best.rate = -1.0;
    double prev_theta = -1.0;
    for (int n = 0; n < opt.n_max; ++n) {
        theta1 = maximize_on_interval([&](double t) { return eta_from_scalars(t, sc); }, 0.0,
                                      phi0);
        REPoint p = algorithm1(net, geodesic_point(curve, theta1), ebar, opt);
        p.theta1 = theta1;
        if (p.rate > best.rate) best = p;
        const double e12 = p.energy - p.p1 * (net.h11.entries *
                                              geodesic_point(curve, theta1).v).squaredNorm();
        const double new_phi0 = phi0_solve(curve, net.h11, power, ebar - e12);
        if (std::abs(theta1 - prev_theta) < 1e-7 && std::abs(new_phi0 - phi0) < 1e-7) {
            phi0 = new_phi0;
            break;
        }
        prev_theta = theta1;
        phi0 = new_phi0;
    }
    // Candidate polish: the eta surrogate ignores the interference direction,
    // and past phi0 the information transmitter can still cover the energy
    // deficit, so sweep the whole arc and golden-refine the true rate around
    // the best candidate.
    const double phi = curve.principal_angle;
    SolveOptions coarse = opt;
    coarse.p1_grid = 10;
    coarse.p1_tol_frac = 1e-3;
    const auto rate_coarse = [&](double t) -> double {
        try {
            const REPoint p = algorithm1(net, geodesic_point(curve, t), ebar, coarse);
            if (p.energy < ebar * (1.0 - 1e-7)) return -1.0;
            return p.rate;
        } catch (const InfeasibleError&) {
            return -1.0;
        }
    };
    std::vector<double> cands = {0.0, phi0, phi, best.theta1.value_or(0.0)};
    for (int i = 1; i < 16; ++i) cands.push_back(phi * i / 16.0);
    double best_t = best.theta1.value_or(0.0), best_c = -1.0;
    for (double t : cands) {
        if (t < 0.0 || t > phi) continue;
        const double r = rate_coarse(t);
        if (r > best_c) {
            best_c = r;
            best_t = t;
        }
    }
    const double half = phi / 16.0;
    const double t_ref =
        maximize_on_interval(rate_coarse, std::max(0.0, best_t - half),
                             std::min(phi, best_t + half), std::max(1e-3, phi / 256.0), 4);
    for (double t : {best_t, t_ref}) {
        try {
            REPoint p = algorithm1(net, geodesic_point(curve, t), ebar, opt);
            if (p.energy >= ebar * (1.0 - 1e-7) && p.rate > best.rate) {
                p.theta1 = t;
                best = p;
            }
        } catch (const InfeasibleError&) {
        }
    }
    return best;
}
}  // namespace detail

// Geodesic energy beamforming boundary point.
inline REPoint algorithm2(const NetworkRealization& net, double ebar,
                          const SolveOptions& opt = {}) {
    return detail::geo_energy_point(net, ebar, opt);
}

// Rank-one information beam from the matrix pencil
// A(nu) = H22^H H22 + nu * H12^H H12. Sweeping nu >= 0 traces the Pareto
// frontier between the direct-link gain and the transferred energy of the
// dominant eigenvector (the latter nondecreasing in nu); the returned beam
// maximizes the interference-penalized SINR surrogate
// s / (1 + (alpha/omega1) * max(ebar - e, 0)) on that frontier, subject to
// the deficit staying coverable by the energy transmitter (e >= ebar -
// omega1*P).
namespace detail {
// Dominant-eigenvector family of the pencil H22^H H22 + nu * H12^H H12,
// nu >= 0: the Pareto frontier between direct-link gain and transferred
// energy of a unit-norm information beam.
struct PencilFamily {
    const ChannelMatrix* h12;
    const ChannelMatrix* h22;
    double power;
    MatC a22, a12;
    double nu_hi = 1.0;   // bracket whose beam reaches the energy ceiling
    double e_top = 0.0;   // P * sigma12_1^2 (ceiling, open)

    PencilFamily(const ChannelMatrix& h12_, const ChannelMatrix& h22_, double power_)
        : h12(&h12_), h22(&h22_), power(power_) {
        a22 = h22->entries.adjoint() * h22->entries;
        a12 = h12->entries.adjoint() * h12->entries;
        e_top = power * top_gain(*h12) * (1.0 - 1e-12);
        for (int i = 0; i < 200 && energy(beam(nu_hi)) < e_top; ++i) nu_hi *= 2.0;
    }
    VecC beam(double nu) const {
        Eigen::SelfAdjointEigenSolver<MatC> es(a22 + nu * a12);
        return unit_phase_fixed(es.eigenvectors().col(h12->m() - 1));
    }
    double energy(const VecC& w) const { return power * (h12->entries * w).squaredNorm(); }
    // Least nu whose beam transfers at least `target` (monotone in nu).
    double nu_for_energy(double target) const {
        if (energy(beam(0.0)) >= target) return 0.0;
        double lo = 0.0, hi = nu_hi;
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            (energy(beam(mid)) < target ? lo : hi) = mid;
        }
        return hi;
    }
};
}  // namespace detail

inline std::pair<BeamVector, DualState> solve_p2d(const ChannelMatrix& h12,
                                                  const ChannelMatrix& h22, double alpha_scalar,
                                                  double omega1, double ebar, double power) {
    if (omega1 <= 0.0) throw std::invalid_argument("solve_p2d: omega1 must be positive");
    const double sig12sq = top_gain(h12);
    if (ebar > omega1 * power + power * sig12sq * (1.0 + 1e-9))
        throw InfeasibleError(omega1 * power + power * sig12sq,
                              "solve_p2d: energy target infeasible");
    const detail::PencilFamily fam(h12, h22, power);
    const auto surrogate = [&](const VecC& w) {
        const double s = power * (h22.entries * w).squaredNorm();
        const double e = fam.energy(w);
        return s / (1.0 + (alpha_scalar / omega1) * std::max(ebar - e, 0.0));
    };

    VecC w0 = fam.beam(0.0);
    const double e0 = fam.energy(w0);
    // Excess energy is free in the surrogate: nothing beats the eigen-beam.
    if (e0 >= ebar * (1.0 - 1e-12)) return {BeamVector(w0), DualState{0.0, 0.0}};

    // Feasibility floor: below e_floor the residual deficit would need more
    // than the energy transmitter's full power.
    const double e_floor = std::max(ebar - omega1 * power, 0.0);
    // Ceiling: the surrogate only loses direct-link gain past e = ebar, and
    // the pencil cannot push energy past the top cross-link mode.
    const double e_cap = std::min(ebar, fam.e_top);

    const double lo_e = std::max(e0, e_floor);
    double best_nu;
    if (lo_e >= e_cap) {
        best_nu = fam.nu_for_energy(e_cap);
    } else {
        // Golden search over the achieved energy (well-scaled, unlike nu).
        const double e_opt = maximize_on_interval(
            [&](double e) { return surrogate(fam.beam(fam.nu_for_energy(e))); }, lo_e, e_cap,
            1e-7 * std::max(e_cap, 1.0), 32);
        best_nu = fam.nu_for_energy(e_opt);
        // The floor may bind: make sure the floor point itself was considered.
        if (e_floor > e0) {
            const double nu_f = fam.nu_for_energy(e_floor);
            if (surrogate(fam.beam(nu_f)) > surrogate(fam.beam(best_nu))) best_nu = nu_f;
        }
    }
    return {BeamVector(fam.beam(best_nu)), DualState{best_nu, 0.0}};
}

enum class EnergyStrategy { MEB, MLB, GEO };

namespace detail {
struct RankOneState {
    BeamVector v;        // energy beam
    BeamVector w;        // information beam
    double theta1 = 0.0;
    double theta2 = 0.0;
    double p1 = 0.0;
};

inline REPoint finish_rank_one(const NetworkRealization& net, const RankOneState& st,
                               double ebar) {
    const double power = net.effective_power();
    const int m = net.m;
    const double omega1 = (net.h11.entries * st.v.v).squaredNorm();
    const double e12 = power * (net.h12.entries * st.w.v).squaredNorm();
    const double p1 = std::min(std::max(ebar - e12, 0.0) / omega1, net.effective_power());
    const VecC h21v = net.h21.entries * st.v.v;
    const MatC r2 = MatC::Identity(m, m) + p1 * (h21v * h21v.adjoint());
    const VecC hw = net.h22.entries * st.w.v;
    const double sinr = power * (hw.adjoint() * r2.inverse() * hw).real()(0, 0);
    REPoint p;
    p.rate = std::log2(1.0 + sinr);
    p.energy = omega1 * p1 + e12;
    p.p1 = p1;
    p.theta1 = st.theta1;
    p.theta2 = st.theta2;
    return p;
}
}  // namespace detail

// Geodesic/fixed energy beam + rank-one information beam: the information
// transmitter sends a single stream chosen by the dual-pencil solver; the
// energy transmitter covers any remaining deficit.
inline REPoint algorithm3(const NetworkRealization& net, EnergyStrategy strat, double ebar,
                          const SolveOptions& opt = {}) {
    const double power = net.effective_power();
    auto [wi, wl] = info_endpoints(net.h22, net.h12);
    // early exit: the information beam alone already meets the target
    const double e_wi = power * (net.h12.entries * wi.v).squaredNorm();
    if (e_wi >= ebar) {
        REPoint p;
        p.rate = std::log2(1.0 + power * top_gain(net.h22));
        p.energy = e_wi;
        p.p1 = 0.0;
        p.theta1 = 0.0;
        p.theta2 = 0.0;
        return p;
    }
    const BeamVector ve = meb(net.h11);
    const BeamVector vlb = mlb(net.h21);
    GeodesicCurve curve;
    bool have_curve = true;
    try {
        curve = geodesic(ve, vlb);
    } catch (const DegenerateCurveError&) {
        have_curve = false;
    }
    const double sig12sq = top_gain(net.h12);
    const double omega_max = (strat == EnergyStrategy::MLB) ? (net.h11.entries * vlb.v).squaredNorm()
                                                            : top_gain(net.h11);
    const double e_max = omega_max * power + power * sig12sq;
    if (ebar > e_max * (1.0 + 1e-9))
        throw InfeasibleError(e_max, "algorithm3: energy target exceeds E_max");

    EtaScalars sc{};
    if (have_curve) sc = eta_scalars(curve, net.h11, net.h21);

    detail::RankOneState st;
    st.w = wi;
    double phi0 = have_curve ? phi0_solve(curve, net.h11, power, ebar - e_wi)
                             : 0.0;
    double prev_theta = -1.0;
    VecC prev_w;
    for (int n = 0; n < opt.n_max; ++n) {
        switch (strat) {
            case EnergyStrategy::MEB: st.theta1 = 0.0; break;
            case EnergyStrategy::MLB:
                st.theta1 = have_curve ? curve.principal_angle : 0.0;
                break;
            case EnergyStrategy::GEO:
                st.theta1 = have_curve
                                ? maximize_on_interval(
                                      [&](double t) { return eta_from_scalars(t, sc); }, 0.0, phi0)
                                : 0.0;
                break;
        }
        st.v = have_curve ? geodesic_point(curve, st.theta1) : ve;
        const double omega1 = (net.h11.entries * st.v.v).squaredNorm();
        const double alpha_scalar = (net.h21.entries * st.v.v).squaredNorm();
        auto [w2, duals] = solve_p2d(net.h12, net.h22, alpha_scalar, omega1, ebar, power);
        st.w = w2;
        const double e12 = power * (net.h12.entries * st.w.v).squaredNorm();
        if (have_curve) phi0 = phi0_solve(curve, net.h11, power, ebar - e12);
        const bool conv = prev_theta >= 0.0 && std::abs(st.theta1 - prev_theta) < 1e-7 &&
                          prev_w.size() > 0 && (st.w.v - prev_w).norm() < 1e-7;
        prev_theta = st.theta1;
        prev_w = st.w.v;
        if (conv) break;
    }
    // True-rate polish: the dual surrogate charges the full leakage power
    // against the information beam regardless of its direction, so its argmax
    // can sit away from the actual rate maximizer. Re-score a sweep of pencil
    // beams (and, for the geodesic strategy, energy tilts) with the exact
    // single-stream rate and keep the best target-meeting point.
    const detail::PencilFamily fam(net.h12, net.h22, power);
    REPoint best;
    best.rate = -1.0;
    double max_seen = -1.0;
    const auto consider = [&](const detail::RankOneState& s) {
        const REPoint p = detail::finish_rank_one(net, s, ebar);
        max_seen = std::max(max_seen, p.energy);
        if (p.energy >= ebar * (1.0 - 1e-9) && p.rate > best.rate) best = p;
    };
    std::vector<double> theta_cands = {st.theta1};
    if (strat == EnergyStrategy::GEO && have_curve)
        for (int i = 0; i <= 8; ++i)
            theta_cands.push_back(curve.principal_angle * i / 8.0);
    const double e_lo_sweep = std::min(e_wi, fam.e_top);
    std::vector<VecC> beam_cands = {st.w.v};
    for (int i = 0; i <= 16; ++i) {
        const double e = e_lo_sweep + (fam.e_top - e_lo_sweep) * i / 16.0;
        beam_cands.push_back(fam.beam(fam.nu_for_energy(e)));
    }
    for (double t1 : theta_cands) {
        detail::RankOneState s = st;
        s.theta1 = t1;
        s.v = have_curve ? geodesic_point(curve, t1) : st.v;
        for (const VecC& w : beam_cands) {
            s.w = BeamVector(w);
            consider(s);
        }
    }
    if (best.rate >= 0.0) {
        // Golden refinement of the transferred energy at the winning tilt.
        detail::RankOneState s = st;
        s.theta1 = best.theta1 ? *best.theta1 : st.theta1;
        s.v = have_curve ? geodesic_point(curve, s.theta1) : st.v;
        const auto rate_at_e = [&](double e) {
            detail::RankOneState c = s;
            c.w = BeamVector(fam.beam(fam.nu_for_energy(e)));
            const REPoint p = detail::finish_rank_one(net, c, ebar);
            return p.energy >= ebar * (1.0 - 1e-9) ? p.rate : -1.0;
        };
        const double e_ref = maximize_on_interval(rate_at_e, e_lo_sweep, fam.e_top,
                                                  1e-7 * std::max(fam.e_top, 1.0), 32);
        s.w = BeamVector(fam.beam(fam.nu_for_energy(e_ref)));
        consider(s);
    }
    if (best.rate < 0.0)
        throw InfeasibleError(max_seen, "algorithm3: converged point misses target");
    return best;
}

// Tradeoff objective along the information geodesic: direct-link gain over
// the interference the energy transmitter must create to cover the deficit.
inline double optimal_theta2(const GeodesicCurve& curve_i, const ChannelMatrix& h22,
                             const ChannelMatrix& h12, double alpha_scalar, double omega1,
                             double ebar, double power) {
    const auto j = [&](double t) {
        const VecC w = geodesic_point(curve_i, t).v;
        const double s = power * (h22.entries * w).squaredNorm();
        const double e = power * (h12.entries * w).squaredNorm();
        return s / (1.0 + (alpha_scalar / omega1) * std::max(ebar - e, 0.0));
    };
    return maximize_on_interval(j, 0.0, curve_i.principal_angle);
}

// Geodesic beams at both transmitters: alternate the energy tilt (eta
// argmax) and the information tilt (tradeoff argmax).
inline REPoint algorithm4(const NetworkRealization& net, double ebar,
                          const SolveOptions& opt = {}) {
    const double power = net.effective_power();
    auto [wi, wl] = info_endpoints(net.h22, net.h12);
    const double e_wi = power * (net.h12.entries * wi.v).squaredNorm();
    if (e_wi >= ebar) {
        REPoint p;
        p.rate = std::log2(1.0 + power * top_gain(net.h22));
        p.energy = e_wi;
        p.p1 = 0.0;
        p.theta1 = 0.0;
        p.theta2 = 0.0;
        return p;
    }
    const BeamVector ve = meb(net.h11);
    const BeamVector vlb = mlb(net.h21);
    const double sig12sq = top_gain(net.h12);
    const double e_max = top_gain(net.h11) * power + power * sig12sq;
    if (ebar > e_max * (1.0 + 1e-9))
        throw InfeasibleError(e_max, "algorithm4: energy target exceeds E_max");

    GeodesicCurve ec, ic;
    bool have_ec = true, have_ic = true;
    try {
        ec = geodesic(ve, vlb);
    } catch (const DegenerateCurveError&) {
        have_ec = false;
    }
    try {
        ic = geodesic(wi, wl);
    } catch (const DegenerateCurveError&) {
        have_ic = false;
    }
    EtaScalars sc{};
    if (have_ec) sc = eta_scalars(ec, net.h11, net.h21);

    detail::RankOneState st;
    st.w = wi;
    double phi0 = have_ec ? phi0_solve(ec, net.h11, power, ebar - e_wi) : 0.0;
    double pt1 = -1.0, pt2 = -1.0;
    for (int n = 0; n < opt.n_max; ++n) {
        st.theta1 = have_ec ? maximize_on_interval(
                                  [&](double t) { return eta_from_scalars(t, sc); }, 0.0, phi0)
                            : 0.0;
        st.v = have_ec ? geodesic_point(ec, st.theta1) : ve;
        const double omega1 = (net.h11.entries * st.v.v).squaredNorm();
        const double alpha_scalar = (net.h21.entries * st.v.v).squaredNorm();
        st.theta2 = have_ic ? optimal_theta2(ic, net.h22, net.h12, alpha_scalar, omega1, ebar,
                                             power)
                            : 0.0;
        st.w = have_ic ? geodesic_point(ic, st.theta2) : wi;
        const double e12 = power * (net.h12.entries * st.w.v).squaredNorm();
        if (have_ec) phi0 = phi0_solve(ec, net.h11, power, ebar - e12);
        const bool conv = pt1 >= 0.0 && std::abs(st.theta1 - pt1) < 1e-7 &&
                          std::abs(st.theta2 - pt2) < 1e-7;
        pt1 = st.theta1;
        pt2 = st.theta2;
        if (conv) break;
    }
    // Pick the best target-meeting point among the converged iterate and a
    // coarse (theta1, theta2) sweep; the sweep guards against local maxima of
    // the tradeoff surrogate (which charges leakage independently of the
    // beams' relative geometry) and against the surrogate ignoring the
    // P1 <= P cap near the full-energy endpoint.
    REPoint best;
    best.rate = -1.0;
    double max_seen = -1.0;
    const auto consider = [&](const detail::RankOneState& s) {
        const REPoint p = detail::finish_rank_one(net, s, ebar);
        max_seen = std::max(max_seen, p.energy);
        if (p.energy >= ebar * (1.0 - 1e-9) && p.rate > best.rate) best = p;
    };
    consider(st);
    std::vector<double> t1_cands = {st.theta1};
    if (have_ec)
        for (int i = 0; i <= 8; ++i) t1_cands.push_back(ec.principal_angle * i / 8.0);
    std::vector<double> t2_cands = {st.theta2};
    if (have_ic)
        for (int i = 0; i <= 16; ++i) t2_cands.push_back(ic.principal_angle * i / 16.0);
    for (double t1 : t1_cands) {
        detail::RankOneState alt = st;
        alt.theta1 = t1;
        alt.v = have_ec ? geodesic_point(ec, t1) : st.v;
        for (double t2 : t2_cands) {
            alt.theta2 = t2;
            alt.w = have_ic ? geodesic_point(ic, t2) : st.w;
            consider(alt);
        }
    }
    if (best.rate >= 0.0 && have_ic) {
        // Golden refinement of each tilt at the winning point.
        detail::RankOneState s = st;
        s.theta1 = best.theta1 ? *best.theta1 : st.theta1;
        s.v = have_ec ? geodesic_point(ec, s.theta1) : st.v;
        const auto rate_at_t2 = [&](double t2) {
            detail::RankOneState c = s;
            c.theta2 = t2;
            c.w = geodesic_point(ic, t2);
            const REPoint p = detail::finish_rank_one(net, c, ebar);
            return p.energy >= ebar * (1.0 - 1e-9) ? p.rate : -1.0;
        };
        s.theta2 = maximize_on_interval(rate_at_t2, 0.0, ic.principal_angle, 1e-7, 64);
        s.w = geodesic_point(ic, s.theta2);
        if (have_ec) {
            const auto rate_at_t1 = [&](double t1) {
                detail::RankOneState c = s;
                c.theta1 = t1;
                c.v = geodesic_point(ec, t1);
                const REPoint p = detail::finish_rank_one(net, c, ebar);
                return p.energy >= ebar * (1.0 - 1e-9) ? p.rate : -1.0;
            };
            s.theta1 = maximize_on_interval(rate_at_t1, 0.0, ec.principal_angle, 1e-7, 64);
            s.v = geodesic_point(ec, s.theta1);
        }
        consider(s);
    }
    if (best.rate < 0.0)
        throw InfeasibleError(max_seen, "algorithm4: converged point misses target");
    return best;
}

// Time-sharing baseline between (a) no energy transmission + water-filling
// at the information transmitter and (b) full-power max-energy beams at both
// transmitters.
inline REPoint timeshare_point(const NetworkRealization& net, double share) {
    const double power = net.effective_power();
    // endpoint A: waterfilling, EAP silent
    TxCovariance wf = waterfill(net.h22, power);
    const double rate_a = rate_bits(net.h22.entries, wf.q);
    const double energy_a =
        (net.h12.entries * wf.q * net.h12.entries.adjoint()).trace().real();
    // endpoint B: MEB at EAP, all IAP power on the top H12 direction
    const BeamVector ve = meb(net.h11);
    const BeamVector wl = BeamVector(decompose(net.h12).v.col(0));
    const double energy_b = power * top_gain(net.h11) + power * top_gain(net.h12);
    const VecC h21v = net.h21.entries * ve.v;
    const MatC r2 = MatC::Identity(net.m, net.m) + power * (h21v * h21v.adjoint());
    const VecC hw = net.h22.entries * wl.v;
    const double rate_b = std::log2(1.0 + power * (hw.adjoint() * r2.inverse() * hw).real()(0, 0));
    REPoint p;
    p.rate = (1.0 - share) * rate_a + share * rate_b;
    p.energy = (1.0 - share) * energy_a + share * energy_b;
    p.p1 = share * power;
    return p;
}

inline REBoundary timeshare_baseline(const NetworkRealization& net,
                                     const std::vector<double>& ebar_grid) {
    REBoundary b;
    b.strategy = Strategy::TIMESHARE;
    const REPoint p0 = timeshare_point(net, 0.0);
    const REPoint p1 = timeshare_point(net, 1.0);
    for (double ebar : ebar_grid) {
        BoundaryPoint bp;
        bp.target = ebar;
        if (ebar <= p0.energy) {
            bp.point = p0;
        } else if (ebar > p1.energy * (1.0 + 1e-9)) {
            bp.point = std::nullopt;
        } else {
            const double share = (ebar - p0.energy) / (p1.energy - p0.energy);
            bp.point = timeshare_point(net, std::min(std::max(share, 0.0), 1.0));
        }
        b.points.push_back(bp);
    }
    return b;
}

// Maximum harvestable energy for a strategy (used to scale target grids).
inline double strategy_emax(const NetworkRealization& net, Strategy s) {
    const double power = net.effective_power();
    const double e12 = power * top_gain(net.h12);
    switch (s) {
        case Strategy::MLB: {
            const BeamVector v = mlb(net.h21);
            return power * (net.h11.entries * v.v).squaredNorm() + e12;
        }
        case Strategy::SLER: {
            // SLER at the tight end coincides with MEB (large shift)
            return power * top_gain(net.h11) + e12;
        }
        case Strategy::TIMESHARE:
        case Strategy::MEB:
        case Strategy::GEO_E:
        case Strategy::GEO_EI3:
        case Strategy::GEO_EI4:
        default:
            return power * top_gain(net.h11) + e12;
    }
}

inline REBoundary re_boundary(const NetworkRealization& net, Strategy s,
                              const std::vector<double>& ebar_grid,
                              const SolveOptions& opt = {}) {
    if (ebar_grid.empty()) throw std::domain_error("re_boundary: empty target grid");
    if (s == Strategy::TIMESHARE) return timeshare_baseline(net, ebar_grid);
    REBoundary b;
    b.strategy = s;
    for (double ebar : ebar_grid) {
        BoundaryPoint bp;
        bp.target = ebar;
        try {
            switch (s) {
                case Strategy::MEB:
                    bp.point = algorithm1(net, meb(net.h11), ebar, opt);
                    break;
                case Strategy::MLB:
                    bp.point = algorithm1(net, mlb(net.h21), ebar, opt);
                    break;
                case Strategy::SLER:
                    bp.point = algorithm1(net, sler(net.h11, net.h21, ebar,
                                                    net.effective_power()),
                                          ebar, opt);
                    break;
                case Strategy::GEO_E:
                    bp.point = algorithm2(net, ebar, opt);
                    break;
                case Strategy::GEO_EI3:
                    bp.point = algorithm3(net, EnergyStrategy::GEO, ebar, opt);
                    break;
                case Strategy::GEO_EI4:
                    bp.point = algorithm4(net, ebar, opt);
                    break;
                default:
                    break;
            }
        } catch (const InfeasibleError&) {
            bp.point = std::nullopt;
        }
        b.points.push_back(bp);
    }
    return b;
}

}  // namespace jwiet
