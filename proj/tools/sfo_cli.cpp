// Monte-Carlo runner for joint SFO/STO estimation experiments.
//
//   sfo_cli --experiment ex1 --trials 1000 --out runs/ex1
//   sfo_cli --experiment ex5 --snr-db 30 --delta-sweep -500,500 --out runs/ex5
//   sfo_cli --config run.cfg --seed 7
//
// The config file holds one key=value per line, keys named like the long flags
// (e.g. "trials=200", "snr-db=[10,20,30]"); flags given on the command line win.

#include <sfo/error.hpp>
#include <sfo/experiment.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Overrides {
    std::string                experiment = "ex1";
    std::optional<std::size_t> trials;
    std::optional<std::size_t> n;
    std::optional<int>         order;
    std::optional<double>      delta_ppm;
    std::optional<double>      epsilon;
    std::vector<std::string>   snr_db;
    std::vector<double>        delta_sweep;
    std::vector<double>        epsilon_sweep;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> signal;
    std::optional<std::string> design;
    std::optional<std::string> component;
    std::optional<int>         tones;
    std::optional<double>      band_lo;
    std::optional<double>      band_hi;
    std::optional<std::size_t> symbols;
    std::optional<double>      cfo;
    std::optional<double>      po;
    std::optional<int>         max_iters;
    std::optional<unsigned>    jobs;
};

double parse_snr(const std::string& s) {
    if (s == "inf" || s == "none" || s == "clean") {
        return sfo::no_noise;
    }
    std::size_t used  = 0;
    const double v    = std::stod(s, &used);
    if (used != s.size()) {
        throw sfo::Error(sfo::ErrorCode::Parameter, fmt::format("bad SNR value '{}'", s));
    }
    return v;
}

sfo::ExperimentConfig build_config(const Overrides& o) {
    auto cfg = sfo::preset(sfo::parse_experiment_kind(o.experiment));
    if (o.trials) cfg.trials = *o.trials;
    if (o.n) cfg.n_samples = *o.n;
    if (o.order) cfg.order = *o.order;
    if (o.delta_ppm) cfg.delta_ppm = *o.delta_ppm;
    if (o.epsilon) cfg.epsilon = *o.epsilon;
    if (!o.snr_db.empty()) {
        cfg.snr_db.clear();
        for (const auto& s : o.snr_db) {
            cfg.snr_db.push_back(parse_snr(s));
        }
    }
    if (!o.delta_sweep.empty()) cfg.delta_sweep_ppm = o.delta_sweep;
    if (!o.epsilon_sweep.empty()) cfg.epsilon_sweep = o.epsilon_sweep;
    if (o.seed) cfg.seed = *o.seed;
    if (o.out) cfg.out = *o.out;
    if (o.signal) cfg.signal = sfo::parse_signal_kind(*o.signal);
    if (o.design) cfg.design = sfo::parse_design_kind(*o.design);
    if (o.component) cfg.component = sfo::parse_component(*o.component);
    if (o.tones) cfg.n_tones = *o.tones;
    if (o.band_lo) cfg.band_lo = *o.band_lo;
    if (o.band_hi) cfg.band_hi = *o.band_hi;
    if (o.symbols) cfg.ofdm.symbols = *o.symbols;
    if (o.cfo) cfg.cfo_fraction = *o.cfo;
    if (o.po) cfg.phase_offset = *o.po;
    if (o.max_iters) cfg.max_iters = *o.max_iters;
    if (o.jobs) cfg.jobs = *o.jobs;
    return cfg;
}

void print_summary(const sfo::ExperimentConfig& cfg, const sfo::ExperimentSummary& s) {
    fmt::print("experiment {} ({}), {} trials per point, N={}, L={}, seed {}\n", sfo::to_string(cfg.experiment), sfo::to_string(cfg.signal), cfg.trials, cfg.n_samples, cfg.order,
               cfg.seed);
    fmt::print("{:>12} {:>14} {:>16} {:>12} {:>10} {:>10}\n", "sweep", "mean_nmse_dB", "median_nmse_dB", "mean_ber", "within1%", "within3%");
    for (const auto& r : s.aggregate) {
        fmt::print("{:>12.6g} {:>14.3f} {:>16.3f} {:>12.3g} {:>10.3f} {:>10.3f}\n", r.sweep_value, r.mean_nmse_post_db, r.median_nmse_post_db, r.mean_ber_post, r.frac_within_1pct,
                   r.frac_within_3pct);
    }
    fmt::print("wall time {:.2f} s\n", s.wall_seconds);
    if (!cfg.out.empty()) {
        fmt::print("wrote {}/trials.csv and {}/aggregate.csv\n", cfg.out.string(), cfg.out.string());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint sampling-frequency and sampling-time offset estimation experiments"};
    app.set_config("--config", "", "flat key=value file mirroring the long flags");

    Overrides o;
    app.add_option("--experiment", o.experiment, "ex1..ex5 or custom")->capture_default_str();
    app.add_option("--trials", o.trials, "trials per sweep point");
    app.add_option("--n", o.n, "estimation block length N");
    app.add_option("--order", o.order, "Farrow polynomial order L (1..5)");
    app.add_option("--delta-ppm", o.delta_ppm, "period difference in ppm");
    app.add_option("--epsilon", o.epsilon, "timing offset in reference samples");
    app.add_option("--snr-db", o.snr_db, "SNR in dB (repeatable or comma separated; 'inf' for no noise)")->delimiter(',');
    app.add_option("--delta-sweep", o.delta_sweep, "delta values in ppm to sweep")->delimiter(',');
    app.add_option("--epsilon-sweep", o.epsilon_sweep, "epsilon values to sweep")->delimiter(',');
    app.add_option("--seed", o.seed, "base seed; trial t uses seed + t");
    app.add_option("--out", o.out, "output directory for CSV files");
    app.add_option("--signal", o.signal, "multisine, noise or ofdm");
    app.add_option("--design", o.design, "Farrow bank: wideband or lagrange");
    app.add_option("--component", o.component, "component of complex signals used for estimation: real or imag");
    app.add_option("--tones", o.tones, "number of multi-sine tones");
    app.add_option("--band-lo", o.band_lo, "bandpass noise lower edge (cycles/sample)");
    app.add_option("--band-hi", o.band_hi, "bandpass noise upper edge (cycles/sample)");
    app.add_option("--symbols", o.symbols, "OFDM symbols per trial");
    app.add_option("--cfo", o.cfo, "carrier offset as a fraction of the subcarrier spacing");
    app.add_option("--po", o.po, "phase offset in radians");
    app.add_option("--max-iters", o.max_iters, "Newton iteration limit");
    app.add_option("--jobs", o.jobs, "worker threads");

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg     = build_config(o);
        const auto summary = sfo::run_experiment(cfg);
        print_summary(cfg, summary);
    } catch (const sfo::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 2;
    }
    return 0;
}
