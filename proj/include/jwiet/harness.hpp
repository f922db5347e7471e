#pragma once
// Experiment orchestration: Monte Carlo sweeps over channel realizations,
// strategy/grid products, aggregation, and CSV emission.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <thread>

#include "feedback.hpp"
#include "kuser.hpp"
#include "reopt.hpp"

namespace jwiet {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string mode = "re_region";  // re_region | kuser | feedback_rate
    int m = 4;
    double alpha = 0.6;
    double power_mw = 50.0;
    double noise_uw = 1.0;
    std::vector<double> ebar_frac_grid;     // fractions of per-realization max harvest
    std::vector<std::string> strategies;    // mode-dependent names
    int trials = 50;
    std::uint64_t seed = 1;
    std::vector<int> bits;                  // feedback budgets B
    std::string allocation = "adaptive";    // adaptive | equal | both
    std::vector<double> snr_db_grid;        // feedback_rate sweep (P_eff in dB)
    double ebar_snr_scale = 7.0;            // feedback_rate target = scale * P_eff
    int k = 3, k1 = 2;                      // kuser topology
    std::string out_path;
    std::string codebook_in, codebook_out;

    double power_w() const { return power_mw * 1e-3; }
    double noise_w() const { return noise_uw * 1e-6; }
};

struct ResultRow {
    std::string mode, strategy;
    int m = 0;
    double alpha = 0.0;
    double ebar = 0.0;  // grid fraction (re_region/kuser) or SNR in dB (feedback_rate)
    double mean_rate_bits = 0.0, mean_energy = 0.0;
    double std_rate = 0.0, std_energy = 0.0;
    double b11 = 0.0, b21 = 0.0, b12 = 0.0, b22 = 0.0;
    double runtime_ms = 0.0;
};

namespace detail {

struct Stats {
    std::vector<double> xs;
    void add(double x) { xs.push_back(x); }
    double mean() const {
        if (xs.empty()) return std::nan("");
        return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    }
    double stdev() const {
        if (xs.empty()) return std::nan("");
        const double mu = mean();
        double s = 0.0;
        for (double x : xs) s += (x - mu) * (x - mu);
        return std::sqrt(s / xs.size());
    }
    std::size_t n() const { return xs.size(); }
};

// Fixed-size worker pool over trial indices; results land in preallocated
// slots so aggregation order never depends on scheduling.
template <class F>
inline void parallel_trials(int trials, F&& body) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(trials));
    if (workers <= 1) {
        for (int t = 0; t < trials; ++t) body(t);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (int t = next.fetch_add(1); t < trials; t = next.fetch_add(1)) body(t);
        });
    }
    for (auto& th : pool) th.join();
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "MEB") return Strategy::MEB;
    if (s == "MLB") return Strategy::MLB;
    if (s == "SLER") return Strategy::SLER;
    if (s == "GEO_E") return Strategy::GEO_E;
    if (s == "GEO_EI3") return Strategy::GEO_EI3;
    if (s == "GEO_EI4") return Strategy::GEO_EI4;
    if (s == "TIMESHARE") return Strategy::TIMESHARE;
    throw ConfigError("strategy: unknown name '" + s + "'");
}

struct FeedbackOutcome {
    double rate = 0.0, energy = 0.0;
    int b11 = 0, b21 = 0, b12 = 0, b22 = 0;
};

// One limited-feedback trial: run the perfect-CSIT geodesic optimization,
// treat its tilt angles as reported scalars, quantize the four link
// directions with the allocated bits, and evaluate the achieved single-stream
// operating point. quant=false gives the perfect-CSIT reference.
inline FeedbackOutcome feedback_trial(const NetworkRealization& net, double ebar, int b_total,
                                      bool adaptive, bool quant, std::uint64_t seed,
                                      std::uint64_t trial, const Codebook* shared_cb) {
    const double power = net.effective_power();
    FeedbackOutcome out;

    REPoint ref;
    try {
        ref = algorithm4(net, ebar);
    } catch (const InfeasibleError&) {
        ref = algorithm4(net, 0.0);  // fall back to the unconstrained point
        ebar = 0.0;
    }
    const double theta1 = ref.theta1.value_or(0.0);
    const double theta2 = ref.theta2.value_or(0.0);

    const BeamVector ve = meb(net.h11);
    const BeamVector vl = mlb(net.h21);
    auto [wi, wl] = info_endpoints(net.h22, net.h12);

    BeamVector ve_h = ve, vl_h = vl, wi_h = wi, wl_h = wl;
    if (quant) {
        const double phi_i =
            std::acos(std::min(std::abs(Cplx(wi.v.adjoint() * wl.v)), 1.0));
        if (adaptive) {
            const double phi_e =
                std::acos(std::min(std::abs(Cplx(ve.v.adjoint() * vl.v)), 1.0));
            auto [b11, b21] = allocate_bits_eh(b_total, net.m, ref.p1, theta1, net.alpha12,
                                               power, phi_i, theta2);
            const IdAllocation id = sinr_bound_and_allocate_id(b_total, net.m, ref.p1, theta1,
                                                               phi_e, net.alpha21, power, theta2);
            out.b11 = b11;
            out.b21 = b21;
            out.b12 = id.b12;
            out.b22 = id.b22;
        } else {
            out.b11 = out.b21 = out.b12 = out.b22 = b_total / 2;
        }
        const auto q = [&](const BeamVector& v, int bits, std::uint64_t link) {
            if (shared_cb && shared_cb->bits == bits && shared_cb->m == net.m)
                return quantize(v, *shared_cb);
            return quantize(v, build_codebook(detail::splitmix64(seed) ^ (trial * 131 + link),
                                              bits, net.m));
        };
        ve_h = q(ve, out.b11, 1);
        wl_h = q(wl, out.b21, 2);
        vl_h = q(vl, out.b12, 3);
        wi_h = q(wi, out.b22, 4);
    }

    const auto curve_or = [&](const BeamVector& a, const BeamVector& b,
                              bool& ok) -> GeodesicCurve {
        try {
            ok = true;
            return geodesic(a, b);
        } catch (const DegenerateCurveError&) {
            ok = false;
            return GeodesicCurve{};
        }
    };
    bool ok_e = false, ok_i = false;
    const GeodesicCurve ec = curve_or(ve_h, vl_h, ok_e);
    const GeodesicCurve ic = curve_or(wi_h, wl_h, ok_i);

    const VecC v = ok_e ? geodesic_point(ec, std::min(theta1, ec.principal_angle)).v : ve_h.v;
    const VecC w = ok_i ? geodesic_point(ic, std::min(theta2, ic.principal_angle)).v : wi_h.v;

    const double omega1 = (net.h11.entries * v).squaredNorm();
    const double e12 = power * (net.h12.entries * w).squaredNorm();
    const double p1 = std::min(std::max(ebar - e12, 0.0) / std::max(omega1, 1e-300), power);
    const double s22 = power * (net.h22.entries * w).squaredNorm();
    const double in21 = p1 * (net.h21.entries * v).squaredNorm();
    out.rate = std::log2(1.0 + s22 / (1.0 + in21));
    out.energy = p1 * omega1 + e12;
    return out;
}

}  // namespace detail

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.mode != "re_region" && cfg.mode != "kuser" && cfg.mode != "feedback_rate")
        throw ConfigError("mode: must be re_region, kuser, or feedback_rate");
    if (cfg.trials < 1) throw ConfigError("trials: must be >= 1");
    if (cfg.m < 2) throw ConfigError("m: must be >= 2");
    if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("alpha: must be in [0,1]");
    if (cfg.power_mw <= 0.0) throw ConfigError("power-mw: must be positive");
    if (cfg.noise_uw <= 0.0) throw ConfigError("noise-uw: must be positive");
    if (cfg.mode == "feedback_rate") {
        if (cfg.bits.empty()) throw ConfigError("bits: required for mode feedback_rate");
        for (int b : cfg.bits)
            if (b < 0 || b > 20) throw ConfigError("bits: each budget must be in [0,20]");
        if (cfg.allocation != "adaptive" && cfg.allocation != "equal" &&
            cfg.allocation != "both")
            throw ConfigError("allocation: must be adaptive, equal, or both");
    }
    if (cfg.mode == "kuser" && !(cfg.k1 >= 1 && cfg.k1 < cfg.k))
        throw ConfigError("k1: need 1 <= k1 < k");
    for (double f : cfg.ebar_frac_grid)
        if (f < 0.0 || f > 1.0) throw ConfigError("ebar-frac-grid: fractions must be in [0,1]");
}

inline std::vector<double> default_frac_grid() {
    std::vector<double> g;
    for (int i = 0; i < 20; ++i) g.push_back(0.95 * i / 19.0);
    return g;
}

inline std::vector<ResultRow> run(const ExperimentConfig& cfg_in) {
    ExperimentConfig cfg = cfg_in;
    validate(cfg);
    if (cfg.ebar_frac_grid.empty()) cfg.ebar_frac_grid = default_frac_grid();
    std::vector<ResultRow> rows;

    const auto now = []() { return std::chrono::steady_clock::now(); };
    using ms = std::chrono::duration<double, std::milli>;

    if (cfg.mode == "re_region") {
        if (cfg.strategies.empty()) cfg.strategies = {"MEB", "MLB", "SLER", "GEO_E"};
        std::vector<Strategy> strats;
        for (const auto& s : cfg.strategies) strats.push_back(detail::parse_strategy(s));
        const std::size_t ns = strats.size(), ng = cfg.ebar_frac_grid.size();
        // per (strategy, gridpoint): list over trials of optional REPoint
        std::vector<std::vector<std::optional<REPoint>>> res(
            ns * ng, std::vector<std::optional<REPoint>>(cfg.trials));
        std::vector<double> elapsed(ns * ng, 0.0);
        std::mutex elapsed_mu;
        detail::parallel_trials(cfg.trials, [&](int t) {
            const NetworkRealization net = sample_network(
                detail::splitmix64(cfg.seed) + static_cast<std::uint64_t>(t), cfg.m, cfg.alpha,
                cfg.power_w(), cfg.noise_w());
            const double e_max = strategy_emax(net, Strategy::MEB);
            for (std::size_t si = 0; si < ns; ++si) {
                std::vector<double> grid;
                for (double f : cfg.ebar_frac_grid) grid.push_back(f * e_max);
                const auto t0 = now();
                const REBoundary b = re_boundary(net, strats[si], grid);
                const double dt = ms(now() - t0).count();
                for (std::size_t gi = 0; gi < ng; ++gi)
                    res[si * ng + gi][t] = b.points[gi].point;
                std::lock_guard<std::mutex> lk(elapsed_mu);
                for (std::size_t gi = 0; gi < ng; ++gi) elapsed[si * ng + gi] += dt / ng;
            }
        });
        for (std::size_t si = 0; si < ns; ++si) {
            for (std::size_t gi = 0; gi < ng; ++gi) {
                detail::Stats sr, se;
                for (int t = 0; t < cfg.trials; ++t) {
                    if (res[si * ng + gi][t]) {
                        sr.add(res[si * ng + gi][t]->rate);
                        se.add(res[si * ng + gi][t]->energy);
                    }
                }
                ResultRow r;
                r.mode = cfg.mode;
                r.strategy = strategy_name(strats[si]);
                r.m = cfg.m;
                r.alpha = cfg.alpha;
                r.ebar = cfg.ebar_frac_grid[gi];
                r.mean_rate_bits = sr.mean();
                r.mean_energy = se.mean();
                r.std_rate = sr.stdev();
                r.std_energy = se.stdev();
                r.runtime_ms = elapsed[si * ng + gi];
                rows.push_back(r);
            }
        }
        bool any = false;
        for (const auto& cell : res)
            for (const auto& p : cell)
                if (p) any = true;
        if (!any) throw InfeasibleError(0.0, "run: every grid point infeasible");
    } else if (cfg.mode == "kuser") {
        if (cfg.strategies.empty()) cfg.strategies = {"FULL_CSI", "EMD_SVD", "EMD_SELECT"};
        std::vector<EstimationMethod> methods;
        for (const auto& s : cfg.strategies) {
            if (s == "FULL_CSI") methods.push_back(EstimationMethod::FullCsi);
            else if (s == "EMD_SVD") methods.push_back(EstimationMethod::Svd);
            else if (s == "EMD_SELECT") methods.push_back(EstimationMethod::Select);
            else throw ConfigError("strategy: unknown kuser method '" + s + "'");
        }
        const std::size_t ns = methods.size(), ng = cfg.ebar_frac_grid.size();
        struct Cell { double rate, energy; bool ok; };
        std::vector<std::vector<Cell>> res(ns * ng,
                                           std::vector<Cell>(cfg.trials, {0, 0, false}));
        std::vector<double> elapsed(ns * ng, 0.0);
        std::mutex elapsed_mu;
        detail::parallel_trials(cfg.trials, [&](int t) {
            const KNetwork net = sample_knetwork(
                detail::splitmix64(cfg.seed) + static_cast<std::uint64_t>(t), cfg.k, cfg.k1,
                cfg.m, cfg.alpha, cfg.power_w(), cfg.noise_w());
            // max harvest: full-CSI beams fully tilted toward energy at full power
            double e_max = 0.0;
            {
                const double pw = net.effective_power();
                for (int i = 0; i < net.k1; ++i) {
                    for (int j = 0; j < net.k; ++j) {
                        const VecC b = emd_full(net, j).v;  // every tx fully toward energy
                        e_max += pw * (net.channels[i][j].entries * b).squaredNorm();
                    }
                }
            }
            for (std::size_t si = 0; si < ns; ++si) {
                for (std::size_t gi = 0; gi < ng; ++gi) {
                    const double ebar = cfg.ebar_frac_grid[gi] * e_max;
                    const auto t0 = now();
                    try {
                        const TiltResult tr = distributed_tilt(net, ebar, methods[si]);
                        res[si * ng + gi][t] = {tr.sum_rate, tr.energy, true};
                    } catch (const InfeasibleError&) {
                    }
                    const double dt = ms(now() - t0).count();
                    std::lock_guard<std::mutex> lk(elapsed_mu);
                    elapsed[si * ng + gi] += dt;
                }
            }
        });
        for (std::size_t si = 0; si < ns; ++si) {
            for (std::size_t gi = 0; gi < ng; ++gi) {
                detail::Stats sr, se;
                for (int t = 0; t < cfg.trials; ++t)
                    if (res[si * ng + gi][t].ok) {
                        sr.add(res[si * ng + gi][t].rate);
                        se.add(res[si * ng + gi][t].energy);
                    }
                ResultRow r;
                r.mode = cfg.mode;
                r.strategy = cfg.strategies[si];
                r.m = cfg.m;
                r.alpha = cfg.alpha;
                r.ebar = cfg.ebar_frac_grid[gi];
                r.mean_rate_bits = sr.mean();
                r.mean_energy = se.mean();
                r.std_rate = sr.stdev();
                r.std_energy = se.stdev();
                r.runtime_ms = elapsed[si * ng + gi];
                rows.push_back(r);
            }
        }
    } else {  // feedback_rate
        if (cfg.snr_db_grid.empty())
            for (int s = 0; s <= 40; s += 5) cfg.snr_db_grid.push_back(s);
        std::vector<std::string> allocs;
        if (cfg.allocation == "both") allocs = {"adaptive", "equal"};
        else allocs = {cfg.allocation};
        std::optional<Codebook> shared;
        if (!cfg.codebook_in.empty()) shared = load_codebook(cfg.codebook_in);

        struct Key { int bi, ai, si; };
        std::vector<Key> keys;
        for (std::size_t bi = 0; bi < cfg.bits.size(); ++bi)
            for (std::size_t ai = 0; ai < allocs.size(); ++ai)
                for (std::size_t si = 0; si < cfg.snr_db_grid.size(); ++si)
                    keys.push_back({static_cast<int>(bi), static_cast<int>(ai),
                                    static_cast<int>(si)});
        // plus the perfect-CSIT reference sweep
        const std::size_t nk = keys.size();
        std::vector<std::vector<detail::FeedbackOutcome>> res(
            nk + cfg.snr_db_grid.size(), std::vector<detail::FeedbackOutcome>(cfg.trials));
        std::vector<double> elapsed(res.size(), 0.0);
        std::mutex elapsed_mu;
        detail::parallel_trials(cfg.trials, [&](int t) {
            for (std::size_t si = 0; si < cfg.snr_db_grid.size(); ++si) {
                // SNR sweep varies power at fixed noise; direct path loss fixed.
                const double p_eff = std::pow(10.0, cfg.snr_db_grid[si] / 10.0);
                const double power_w = p_eff * cfg.noise_w() / 1e-3;
                NetworkRealization net = sample_network(
                    detail::splitmix64(cfg.seed) + static_cast<std::uint64_t>(t), cfg.m,
                    cfg.alpha, power_w, cfg.noise_w());
                const double ebar = cfg.ebar_snr_scale * net.effective_power();
                {
                    const auto t0 = now();
                    const auto o = detail::feedback_trial(net, ebar, 0, false, false, cfg.seed,
                                                          t, nullptr);
                    res[nk + si][t] = o;
                    std::lock_guard<std::mutex> lk(elapsed_mu);
                    elapsed[nk + si] += ms(now() - t0).count();
                }
                for (std::size_t ki = 0; ki < nk; ++ki) {
                    if (keys[ki].si != static_cast<int>(si)) continue;
                    const auto t0 = now();
                    const auto o = detail::feedback_trial(
                        net, ebar, cfg.bits[keys[ki].bi], allocs[keys[ki].ai] == "adaptive",
                        true, cfg.seed, t, shared ? &*shared : nullptr);
                    res[ki][t] = o;
                    std::lock_guard<std::mutex> lk(elapsed_mu);
                    elapsed[ki] += ms(now() - t0).count();
                }
            }
        });
        const auto emit = [&](const std::string& strat, std::size_t idx, double snr) {
            detail::Stats sr, se, b11, b21, b12, b22;
            for (int t = 0; t < cfg.trials; ++t) {
                sr.add(res[idx][t].rate);
                se.add(res[idx][t].energy);
                b11.add(res[idx][t].b11);
                b21.add(res[idx][t].b21);
                b12.add(res[idx][t].b12);
                b22.add(res[idx][t].b22);
            }
            ResultRow r;
            r.mode = cfg.mode;
            r.strategy = strat;
            r.m = cfg.m;
            r.alpha = cfg.alpha;
            r.ebar = snr;
            r.mean_rate_bits = sr.mean();
            r.mean_energy = se.mean();
            r.std_rate = sr.stdev();
            r.std_energy = se.stdev();
            r.b11 = b11.mean();
            r.b21 = b21.mean();
            r.b12 = b12.mean();
            r.b22 = b22.mean();
            r.runtime_ms = elapsed[idx];
            rows.push_back(r);
        };
        for (std::size_t si = 0; si < cfg.snr_db_grid.size(); ++si)
            emit("PERFECT", nk + si, cfg.snr_db_grid[si]);
        for (std::size_t ki = 0; ki < nk; ++ki) {
            const std::string strat =
                (allocs[keys[ki].ai] == "adaptive" ? "RVQ_ADAPTIVE_B" : "RVQ_EQUAL_B") +
                std::to_string(cfg.bits[keys[ki].bi]);
            emit(strat, ki, cfg.snr_db_grid[keys[ki].si]);
        }
        if (!cfg.codebook_out.empty() && !cfg.bits.empty())
            save_codebook(build_codebook(detail::splitmix64(cfg.seed) ^ 131, cfg.bits.front(),
                                         cfg.m),
                          cfg.codebook_out);
    }
    return rows;
}

inline std::string format_g9(double x) {
    std::ostringstream os;
    os << std::setprecision(9) << x;
    return os.str();
}

inline void emit_csv(const std::vector<ResultRow>& rows, std::ostream& os) {
    if (rows.empty()) throw std::invalid_argument("emit_csv: no rows");
    os << "mode,strategy,m,alpha,ebar,mean_rate_bits,mean_energy,std_rate,std_energy,"
          "b11,b21,b12,b22,runtime_ms\n";
    for (const auto& r : rows) {
        os << r.mode << ',' << r.strategy << ',' << r.m << ',' << format_g9(r.alpha) << ','
           << format_g9(r.ebar) << ',' << format_g9(r.mean_rate_bits) << ','
           << format_g9(r.mean_energy) << ',' << format_g9(r.std_rate) << ','
           << format_g9(r.std_energy) << ',' << format_g9(r.b11) << ',' << format_g9(r.b21)
           << ',' << format_g9(r.b12) << ',' << format_g9(r.b22) << ','
           << format_g9(r.runtime_ms) << '\n';
    }
}

inline void emit_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("emit_csv: cannot open " + path);
    emit_csv(rows, f);
}

}  // namespace jwiet
