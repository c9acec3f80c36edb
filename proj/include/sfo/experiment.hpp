#pragma once

#include <sfo/estimator.hpp>
#include <sfo/farrow.hpp>
#include <sfo/sigsim.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sfo {

enum class ExperimentKind { Ex1, Ex2, Ex3, Ex4, Ex5, Custom };
enum class SignalKind { MultiSine, BandpassNoise, Ofdm };
enum class DesignKind { Wideband, Lagrange };

[[nodiscard]] ExperimentKind parse_experiment_kind(std::string_view s);
[[nodiscard]] SignalKind     parse_signal_kind(std::string_view s);
[[nodiscard]] DesignKind     parse_design_kind(std::string_view s);
[[nodiscard]] Component      parse_component(std::string_view s);
[[nodiscard]] std::string_view to_string(ExperimentKind k) noexcept;
[[nodiscard]] std::string_view to_string(SignalKind k) noexcept;

struct ExperimentConfig {
    ExperimentKind      experiment = ExperimentKind::Custom;
    std::size_t         trials     = 1000; // per sweep point
    std::size_t         n_samples  = 256;
    int                 order      = 3;
    DesignKind          design     = DesignKind::Wideband;
    double              delta_ppm  = -200.0;
    double              epsilon    = 0.03;
    std::vector<double> snr_db{60.0};
    std::vector<double> delta_sweep_ppm;
    std::vector<double> epsilon_sweep;
    std::uint64_t       seed = 1;
    std::filesystem::path out; // empty: no files written

    SignalKind signal  = SignalKind::MultiSine;
    int        n_tones = 8;
    double     band_lo = 0.05;
    double     band_hi = 0.35;
    OfdmSpec   ofdm;
    double     cfo_fraction = 0.0;
    double     phase_offset = 0.0;
    Component  component    = Component::Real;
    int        max_iters    = 10;
    unsigned   jobs         = 1;

    void validate() const;
};

/// Defaults of a preset experiment (ex1..ex5) or of a custom run.
[[nodiscard]] ExperimentConfig preset(ExperimentKind kind);

[[nodiscard]] FarrowBank make_bank(const ExperimentConfig& cfg);

struct SweepPoint {
    double value     = 0.0; // reported sweep_value
    double delta_ppm = 0.0;
    double epsilon   = 0.0;
    double snr_db    = 0.0;
};

/// One point per entry of the swept list (delta, epsilon or SNR; at most one may have several entries).
[[nodiscard]] std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg);

struct TrialRecord {
    std::size_t trial          = 0;
    double      delta_true_ppm = 0.0;
    double      eps_true       = 0.0;
    double      delta_hat_ppm  = 0.0;
    double      eps_hat        = 0.0;
    double      delta_relerr   = 0.0;
    double      eps_relerr     = 0.0;
    int         iters          = 0;
    double      nmse_pre_db    = 0.0;
    double      nmse_post_db   = 0.0;
    double      ber_pre        = 0.0; // NaN without OFDM payload
    double      ber_post       = 0.0;

    bool        converged              = false;
    bool        failed                 = false; // estimation raised an error
    double      one_iter_delta_relerr  = 0.0;
    double      one_iter_eps_relerr    = 0.0;
    double      wall_ms                = 0.0;
};

struct AggregateRow {
    double sweep_value         = 0.0;
    double mean_nmse_post_db   = 0.0;
    double median_nmse_post_db = 0.0;
    double mean_ber_post       = 0.0;
    double frac_within_1pct    = 0.0; // both parameters
    double frac_within_3pct    = 0.0;
};

struct ExperimentSummary {
    std::vector<TrialRecord>  trials; // sweep point major, trial index order
    std::vector<AggregateRow> aggregate;
    double                    wall_seconds = 0.0;
};

/// |hat - truth| / |truth|, or |hat| when truth is zero.
[[nodiscard]] double relative_error(double hat, double truth) noexcept;

/// One Monte-Carlo trial; trial_seed fixes the signal and noise realizations.
[[nodiscard]] TrialRecord run_trial(const ExperimentConfig& cfg, const FarrowBank& bank, const SweepPoint& point, std::uint64_t trial_seed, std::size_t trial_index,
                                    const std::filesystem::path& dump_dir = {});

[[nodiscard]] std::vector<AggregateRow> aggregate(std::span<const TrialRecord> trials, std::span<const SweepPoint> points, std::size_t trials_per_point);

/// Runs every trial of every sweep point and writes trials.csv and aggregate.csv to cfg.out (if set).
[[nodiscard]] ExperimentSummary run_experiment(const ExperimentConfig& cfg);
/// run_experiment with experiment = custom.
[[nodiscard]] ExperimentSummary run_custom(ExperimentConfig cfg);

inline constexpr std::string_view trials_csv_header    = "trial,delta_true_ppm,eps_true,delta_hat_ppm,eps_hat,delta_relerr,eps_relerr,iters,nmse_pre_db,nmse_post_db,ber_pre,ber_post";
inline constexpr std::string_view aggregate_csv_header = "sweep_value,mean_nmse_post_db,median_nmse_post_db,mean_ber_post,frac_within_1pct,frac_within_3pct";

[[nodiscard]] std::string trials_csv(std::span<const TrialRecord> trials);
[[nodiscard]] std::string aggregate_csv(std::span<const AggregateRow> rows);

/// Parses trials.csv text back into records (only the CSV columns are restored).
[[nodiscard]] std::vector<TrialRecord> parse_trials_csv(std::string_view text);

} // namespace sfo
