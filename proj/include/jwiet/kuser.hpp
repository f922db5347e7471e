#pragma once
// K-user extension: energy-maximum / interference-minimum direction (EMD/IMD)
// estimation from partial per-link feedback, and the distributed
// tilt-and-power-backoff procedure run by the energy transmitters.

#include "reopt.hpp"

namespace jwiet {

struct KNetwork {
    int k = 0;   // transceiver pairs
    int k1 = 0;  // first k1 receivers harvest energy
    std::vector<std::vector<ChannelMatrix>> channels;  // channels[i][j]: tx j -> rx i
    int m = 0;
    double alpha = 0.0;
    double power = 0.0;
    double noise = 0.0;
    double direct_pathloss = 1e-3;

    double effective_power() const { return power * direct_pathloss / noise; }
    bool is_eh(int rx) const { return rx < k1; }
};

inline KNetwork sample_knetwork(std::uint64_t seed, int k, int k1, int m, double alpha,
                                double power, double noise) {
    if (k1 < 1 || k1 >= k) throw std::invalid_argument("sample_knetwork: need 1 <= k1 < k");
    if (m < 2) throw std::invalid_argument("sample_knetwork: m must be >= 2");
    Substream rs(seed, 0);
    KNetwork net;
    net.k = k;
    net.k1 = k1;
    net.m = m;
    net.alpha = alpha;
    net.power = power;
    net.noise = noise;
    net.channels.resize(k);
    for (int i = 0; i < k; ++i) {
        net.channels[i].resize(k);
        for (int j = 0; j < k; ++j) {
            const double var = (i == j) ? 1.0 : alpha;
            net.channels[i][j] = ChannelMatrix(rs.cgauss_matrix(m, m, var));
            decompose(net.channels[i][j]);
        }
    }
    return net;
}

// One report per (receiver, transmitter): EH receivers report their top
// right singular vector and gain; ID receivers report the top vector to
// their serving transmitter and the bottom vector (with its gain) to all
// interfering transmitters.
struct FeedbackReport {
    VecC vec;
    double gain = 0.0;  // sigma^2 of the reported vector
    bool from_eh = false;
};

struct PartialFeedback {
    int k = 0, k1 = 0, m = 0;
    std::vector<std::vector<FeedbackReport>> reports;  // [rx][tx]
};

inline PartialFeedback build_feedback(const KNetwork& net) {
    PartialFeedback fb;
    fb.k = net.k;
    fb.k1 = net.k1;
    fb.m = net.m;
    fb.reports.resize(net.k);
    for (int i = 0; i < net.k; ++i) {
        fb.reports[i].resize(net.k);
        for (int j = 0; j < net.k; ++j) {
            const auto& d = decompose(net.channels[i][j]);
            FeedbackReport r;
            r.from_eh = net.is_eh(i);
            if (net.is_eh(i) || i == j) {
                r.vec = d.v.col(0);
                r.gain = d.sigma(0) * d.sigma(0);
            } else {
                r.vec = d.v.col(net.m - 1);
                r.gain = d.sigma(net.m - 1) * d.sigma(net.m - 1);
            }
            fb.reports[i][j] = r;
        }
    }
    return fb;
}

// EMD by selection: the reported top vector of the EH receiver with the
// largest reported gain.
inline BeamVector emd_select(const PartialFeedback& fb, int tx) {
    int best = -1;
    for (int i = 0; i < fb.k1; ++i)
        if (best < 0 || fb.reports[i][tx].gain > fb.reports[best][tx].gain) best = i;
    if (best < 0) throw std::domain_error("emd_select: no EH reports");
    return BeamVector(fb.reports[best][tx].vec);
}

namespace detail {
inline MatC stack_weighted(const PartialFeedback& fb, int tx, bool eh_rows) {
    std::vector<int> rows;
    for (int i = 0; i < fb.k; ++i) {
        if (eh_rows && i < fb.k1) rows.push_back(i);
        if (!eh_rows && i >= fb.k1 && i != tx) rows.push_back(i);
    }
    if (rows.empty()) throw std::domain_error("stacked feedback: no reports");
    MatC s(fb.m, static_cast<int>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c)
        s.col(static_cast<int>(c)) =
            fb.reports[rows[c]][tx].vec * std::sqrt(fb.reports[rows[c]][tx].gain);
    return s;
}
}  // namespace detail

// EMD by SVD: dominant left singular vector of the gain-weighted stack of
// reported top vectors.
inline BeamVector emd_svd(const PartialFeedback& fb, int tx) {
    const MatC s = detail::stack_weighted(fb, tx, /*eh_rows=*/true);
    Eigen::JacobiSVD<MatC> svd(s, Eigen::ComputeFullU);
    return BeamVector(detail::unit_phase_fixed(svd.matrixU().col(0)));
}

// Full-CSI reference EMD: top right singular vector of the true stacked EH
// channel seen from transmitter tx.
inline BeamVector emd_full(const KNetwork& net, int tx) {
    MatC s(net.k1 * net.m, net.m);
    for (int i = 0; i < net.k1; ++i)
        s.middleRows(i * net.m, net.m) = net.channels[i][tx].entries;
    Eigen::JacobiSVD<MatC> svd(s, Eigen::ComputeFullV);
    return BeamVector(detail::unit_phase_fixed(svd.matrixV().col(0)));
}

enum class EstimationMethod { Select, Svd, FullCsi };

inline const char* estimation_name(EstimationMethod m) {
    switch (m) {
        case EstimationMethod::Select: return "EMD_SELECT";
        case EstimationMethod::Svd: return "EMD_SVD";
        case EstimationMethod::FullCsi: return "FULL_CSI";
    }
    return "?";
}

// IMD estimate for transmitter tx. Each ID receiver reports the direction
// that leaks least into it; the estimate is a compromise across receivers.
// select: the reported bottom vector of the ID receiver with the largest
// avoided interference gain. svd: largest left singular vector of the
// gain-weighted stack of reported bottom vectors (mirror of the EMD
// construction; with a single report this is that report).
inline BeamVector imd_estimate(const PartialFeedback& fb, int tx, EstimationMethod method) {
    if (method == EstimationMethod::Select) {
        int best = -1;
        for (int i = fb.k1; i < fb.k; ++i) {
            if (i == tx) continue;
            if (best < 0 || fb.reports[i][tx].gain > fb.reports[best][tx].gain) best = i;
        }
        if (best < 0) throw std::domain_error("imd_estimate: no ID reports");
        return BeamVector(fb.reports[best][tx].vec);
    }
    const MatC s = detail::stack_weighted(fb, tx, /*eh_rows=*/false);
    Eigen::JacobiSVD<MatC> svd(s, Eigen::ComputeFullU);
    return BeamVector(detail::unit_phase_fixed(svd.matrixU().col(0)));
}

// Full-CSI reference IMD: bottom right singular vector of the true stacked
// cross channel into the ID receivers.
inline BeamVector imd_full(const KNetwork& net, int tx) {
    std::vector<int> rows;
    for (int i = net.k1; i < net.k; ++i)
        if (i != tx) rows.push_back(i);
    if (rows.empty()) throw std::domain_error("imd_full: no ID receivers");
    MatC s(static_cast<int>(rows.size()) * net.m, net.m);
    for (std::size_t c = 0; c < rows.size(); ++c)
        s.middleRows(static_cast<int>(c) * net.m, net.m) = net.channels[rows[c]][tx].entries;
    Eigen::JacobiSVD<MatC> svd(s, Eigen::ComputeFullV);
    return BeamVector(detail::unit_phase_fixed(svd.matrixV().col(net.m - 1)));
}

struct TiltResult {
    std::vector<double> theta;     // per-EAP tilt (and per-IAP info tilt at the tail)
    std::vector<double> tx_power;  // per-transmitter power actually used
    double sum_rate = 0.0;
    double energy = 0.0;
    std::vector<double> per_user_rate;       // ID receivers, in index order
    std::vector<double> energy_trajectory;   // harvested energy per tilt iteration
};

namespace detail {
struct KBeams {
    std::vector<GeodesicCurve> eap_curve;  // EMD -> IMD per EAP
    std::vector<bool> eap_have_curve;
    std::vector<BeamVector> eap_emd;
    std::vector<GeodesicCurve> iap_curve;  // eigen-beam -> EMD per IAP
    std::vector<bool> iap_have_curve;
    std::vector<BeamVector> iap_wi;
};

inline KBeams make_kbeams(const KNetwork& net, EstimationMethod method) {
    const PartialFeedback fb = build_feedback(net);
    KBeams b;
    b.eap_curve.resize(net.k);
    b.eap_have_curve.assign(net.k, false);
    b.eap_emd.resize(net.k);
    b.iap_curve.resize(net.k);
    b.iap_have_curve.assign(net.k, false);
    b.iap_wi.resize(net.k);
    for (int j = 0; j < net.k; ++j) {
        BeamVector emd_j;
        if (method == EstimationMethod::FullCsi)
            emd_j = emd_full(net, j);
        else if (method == EstimationMethod::Select)
            emd_j = emd_select(fb, j);
        else
            emd_j = emd_svd(fb, j);
        if (j < net.k1) {
            // only EAPs tilt away from interfering ID receivers
            const BeamVector imd_j =
                method == EstimationMethod::FullCsi
                    ? imd_full(net, j)
                    : imd_estimate(fb, j,
                                   method == EstimationMethod::Select
                                       ? EstimationMethod::Select
                                       : EstimationMethod::Svd);
            b.eap_emd[j] = emd_j;
            try {
                b.eap_curve[j] = geodesic(emd_j, imd_j);
                b.eap_have_curve[j] = true;
            } catch (const DegenerateCurveError&) {
            }
        } else {
            b.iap_wi[j] = BeamVector(decompose(net.channels[j][j]).v.col(0));
            try {
                b.iap_curve[j] = geodesic(b.iap_wi[j], emd_j);
                b.iap_have_curve[j] = true;
            } catch (const DegenerateCurveError&) {
            }
        }
    }
    return b;
}

inline double harvested(const KNetwork& net, const std::vector<VecC>& beams,
                        const std::vector<double>& pw) {
    double e = 0.0;
    for (int i = 0; i < net.k1; ++i)
        for (int j = 0; j < net.k; ++j)
            e += pw[j] * (net.channels[i][j].entries * beams[j]).squaredNorm();
    return e;
}
}  // namespace detail

// Distributed tilt: EAPs start at full power on their EMD, then step along
// their geodesic toward the IMD while backing off power until the harvested
// energy meets the target. IAPs pick the smallest tilt toward their EMD
// direction that covers the remaining deficit.
inline TiltResult distributed_tilt(const KNetwork& net, double ebar, EstimationMethod method) {
    const double power = net.effective_power();
    const detail::KBeams b = detail::make_kbeams(net, method);
    const int k = net.k;

    std::vector<double> theta(k, 0.0), pw(k, power);
    const auto eap_beam = [&](int j) {
        return b.eap_have_curve[j] ? geodesic_point(b.eap_curve[j], theta[j]).v : b.eap_emd[j].v;
    };
    const auto iap_beam = [&](int j) {
        return b.iap_have_curve[j] ? geodesic_point(b.iap_curve[j], theta[j]).v : b.iap_wi[j].v;
    };
    const auto all_beams = [&]() {
        std::vector<VecC> beams(k);
        for (int j = 0; j < k; ++j) beams[j] = (j < net.k1) ? eap_beam(j) : iap_beam(j);
        return beams;
    };

    // IAP tilt policy: smallest tilt (grid of 128) whose extra transfer
    // covers the deficit left by the EAPs.
    const auto set_iap_tilts = [&]() {
        std::vector<VecC> beams = all_beams();
        for (int j = net.k1; j < k; ++j) {
            if (!b.iap_have_curve[j]) continue;
            const double phi = b.iap_curve[j].principal_angle;
            double others = 0.0;
            for (int i = 0; i < net.k1; ++i)
                for (int jj = 0; jj < k; ++jj)
                    if (jj != j)
                        others += pw[jj] * (net.channels[i][jj].entries * beams[jj]).squaredNorm();
            const double deficit = ebar - others;
            const auto transfer = [&](double t) {
                const VecC w = geodesic_point(b.iap_curve[j], t).v;
                double e = 0.0;
                for (int i = 0; i < net.k1; ++i)
                    e += pw[j] * (net.channels[i][j].entries * w).squaredNorm();
                return e;
            };
            double chosen = phi;
            for (int g = 0; g <= 128; ++g) {
                const double t = phi * g / 128.0;
                if (transfer(t) >= deficit) {
                    if (g > 0) {
                        // refine the crossing so the target is met without overshoot
                        double lo = phi * (g - 1) / 128.0, hi = t;
                        for (int r = 0; r < 40; ++r) {
                            const double mid = 0.5 * (lo + hi);
                            (transfer(mid) >= deficit ? hi : lo) = mid;
                        }
                        chosen = hi;
                    } else {
                        chosen = t;
                    }
                    break;
                }
            }
            theta[j] = chosen;
            beams[j] = iap_beam(j);
        }
    };

    // feasibility at the max-energy configuration (all tilts toward energy)
    {
        std::vector<double> th_save = theta;
        for (int j = net.k1; j < k; ++j)
            theta[j] = b.iap_have_curve[j] ? b.iap_curve[j].principal_angle : 0.0;
        const double e_max = detail::harvested(net, all_beams(), pw);
        if (ebar > e_max * (1.0 + 1e-9))
            throw InfeasibleError(e_max, "distributed_tilt: target exceeds max harvest");
        theta = th_save;
    }

    // exact EAP power scale so the harvested energy lands on the target
    const auto scale_eaps_to = [&](double target) {
        const double e_now = detail::harvested(net, all_beams(), pw);
        std::vector<double> pz = pw;
        for (int j = 0; j < net.k1; ++j) pz[j] = 0.0;
        const double others = detail::harvested(net, all_beams(), pz);
        const double scale = std::min(
            std::max((target - others) / std::max(e_now - others, 1e-300), 0.0), 1.0);
        for (int j = 0; j < net.k1; ++j) pw[j] *= scale;
    };

    TiltResult out;
    const double tol = 1e-3;
    const int iter_cap = 4000;
    std::vector<double> prev_theta = theta, prev_pw = pw;
    for (int it = 0; it < iter_cap; ++it) {
        set_iap_tilts();
        double e = detail::harvested(net, all_beams(), pw);
        if (ebar > 0.0 && it > 0 && e < ebar * (1.0 - 1e-12)) {
            // last EAP step dropped below the target even after the IAPs
            // re-covered: revert it and finish with an exact power scale
            theta = prev_theta;
            pw = prev_pw;
            set_iap_tilts();
            if (detail::harvested(net, all_beams(), pw) > ebar) scale_eaps_to(ebar);
            e = detail::harvested(net, all_beams(), pw);
            out.energy_trajectory.push_back(e);
            break;
        }
        out.energy_trajectory.push_back(e);
        if (e <= ebar * (1.0 + tol) && ebar > 0.0) break;
        if (ebar <= 0.0) {
            double p_eap = 0.0;
            for (int j = 0; j < net.k1; ++j) p_eap = std::max(p_eap, pw[j]);
            bool capped = true;
            for (int j = 0; j < net.k1; ++j)
                if (b.eap_have_curve[j] && theta[j] < b.eap_curve[j].principal_angle)
                    capped = false;
            if (capped && p_eap < 1e-10 * power) break;
        }
        prev_theta = theta;
        prev_pw = pw;
        bool moved = false;
        for (int j = 0; j < net.k1; ++j) {
            if (b.eap_have_curve[j] && theta[j] < b.eap_curve[j].principal_angle) {
                theta[j] = std::min(theta[j] + b.eap_curve[j].principal_angle / 64.0,
                                    b.eap_curve[j].principal_angle);
                moved = true;
            }
            pw[j] *= 0.95;
        }
        if (!moved && ebar > 0.0) {
            // tilts exhausted: finish with an exact power scale on the EAPs
            if (detail::harvested(net, all_beams(), pw) > ebar) scale_eaps_to(ebar);
            set_iap_tilts();
            out.energy_trajectory.push_back(detail::harvested(net, all_beams(), pw));
            break;
        }
    }

    const std::vector<VecC> beams = all_beams();
    out.theta = theta;
    out.tx_power = pw;
    out.energy = detail::harvested(net, beams, pw);
    const int m = net.m;
    for (int i = net.k1; i < k; ++i) {
        MatC r = MatC::Identity(m, m);
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const VecC hv = net.channels[i][j].entries * beams[j];
            r += pw[j] * (hv * hv.adjoint());
        }
        const VecC hw = net.channels[i][i].entries * beams[i];
        const double sinr = pw[i] * (hw.adjoint() * r.inverse() * hw).real()(0, 0);
        const double ri = std::log2(1.0 + sinr);
        out.per_user_rate.push_back(ri);
        out.sum_rate += ri;
    }
    return out;
}

}  // namespace jwiet
