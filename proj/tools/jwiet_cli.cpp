// Batch CLI for the rate-energy region experiments. Emits CSV to --out (or
// stdout). Exit codes: 0 success, 2 config error, 3 every grid point
// infeasible.

#include <CLI11.hpp>
#include <iostream>

#include "jwiet/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"rate-energy region simulator for two-user and K-user MIMO interference "
                 "channels with wireless energy transfer"};
    argv = app.ensure_utf8(argv);

    jwiet::ExperimentConfig cfg;
    std::string out;

    app.set_config("--config")->configurable(false);
    app.add_option("--mode", cfg.mode, "re_region | kuser | feedback_rate")
        ->capture_default_str();
    app.add_option("--m", cfg.m, "antennas per node")->capture_default_str();
    app.add_option("--alpha", cfg.alpha, "cross-link variance in [0,1]")->capture_default_str();
    app.add_option("--power-mw", cfg.power_mw, "transmit power per tx, mW")
        ->capture_default_str();
    app.add_option("--noise-uw", cfg.noise_uw, "noise power, uW")->capture_default_str();
    app.add_option("--ebar-frac-grid", cfg.ebar_frac_grid,
                   "energy targets as fractions of per-realization max harvest "
                   "(default: 20 points, 0 to 0.95)");
    app.add_option("--strategy", cfg.strategies,
                   "repeatable; re_region: MEB MLB SLER GEO_E GEO_EI3 GEO_EI4 TIMESHARE; "
                   "kuser: FULL_CSI EMD_SVD EMD_SELECT");
    app.add_option("--trials", cfg.trials, "Monte Carlo trials")->capture_default_str();
    app.add_option("--seed", cfg.seed, "master RNG seed")->capture_default_str();
    app.add_option("--bits", cfg.bits, "feedback bit budgets B (feedback_rate mode)");
    app.add_option("--allocation", cfg.allocation, "adaptive | equal | both")
        ->capture_default_str();
    app.add_option("--snr-db-grid", cfg.snr_db_grid,
                   "SNR sweep in dB (feedback_rate mode; default 0..40 step 5)");
    app.add_option("--ebar-snr-scale", cfg.ebar_snr_scale,
                   "feedback_rate energy target as a multiple of effective power")
        ->capture_default_str();
    app.add_option("--k", cfg.k, "total pairs (kuser mode)")->capture_default_str();
    app.add_option("--k1", cfg.k1, "energy pairs (kuser mode)")->capture_default_str();
    app.add_option("--out", out, "output CSV path (default: stdout)");
    app.add_option("--codebook-in", cfg.codebook_in,
                   "reuse a saved codebook when bits/m match");
    app.add_option("--codebook-out", cfg.codebook_out,
                   "save the first budget's codebook for reuse");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const std::vector<jwiet::ResultRow> rows = jwiet::run(cfg);
        if (out.empty())
            jwiet::emit_csv(rows, std::cout);
        else
            jwiet::emit_csv(rows, out);
    } catch (const jwiet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const jwiet::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
