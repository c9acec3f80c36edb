#include <sfo/experiment.hpp>

#include <sfo/error.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <thread>

#include <fmt/format.h>

namespace sfo {

namespace {

constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

} // namespace

ExperimentKind parse_experiment_kind(std::string_view s) {
    const auto v = lower(s);
    if (v == "ex1") return ExperimentKind::Ex1;
    if (v == "ex2") return ExperimentKind::Ex2;
    if (v == "ex3") return ExperimentKind::Ex3;
    if (v == "ex4") return ExperimentKind::Ex4;
    if (v == "ex5") return ExperimentKind::Ex5;
    if (v == "custom") return ExperimentKind::Custom;
    throw Error(ErrorCode::Parameter, fmt::format("unknown experiment '{}' (ex1..ex5, custom)", s));
}

SignalKind parse_signal_kind(std::string_view s) {
    const auto v = lower(s);
    if (v == "multisine") return SignalKind::MultiSine;
    if (v == "noise" || v == "bandpass") return SignalKind::BandpassNoise;
    if (v == "ofdm") return SignalKind::Ofdm;
    throw Error(ErrorCode::Parameter, fmt::format("unknown signal '{}' (multisine, noise, ofdm)", s));
}

DesignKind parse_design_kind(std::string_view s) {
    const auto v = lower(s);
    if (v == "wideband") return DesignKind::Wideband;
    if (v == "lagrange") return DesignKind::Lagrange;
    throw Error(ErrorCode::Parameter, fmt::format("unknown bank design '{}' (wideband, lagrange)", s));
}

Component parse_component(std::string_view s) {
    const auto v = lower(s);
    if (v == "real") return Component::Real;
    if (v == "imag") return Component::Imag;
    throw Error(ErrorCode::Parameter, fmt::format("unknown component '{}' (real, imag)", s));
}

std::string_view to_string(ExperimentKind k) noexcept {
    switch (k) {
    case ExperimentKind::Ex1: return "ex1";
    case ExperimentKind::Ex2: return "ex2";
    case ExperimentKind::Ex3: return "ex3";
    case ExperimentKind::Ex4: return "ex4";
    case ExperimentKind::Ex5: return "ex5";
    case ExperimentKind::Custom: return "custom";
    }
    return "custom";
}

std::string_view to_string(SignalKind k) noexcept {
    switch (k) {
    case SignalKind::MultiSine: return "multisine";
    case SignalKind::BandpassNoise: return "noise";
    case SignalKind::Ofdm: return "ofdm";
    }
    return "multisine";
}

ExperimentConfig preset(ExperimentKind kind) {
    ExperimentConfig cfg;
    cfg.experiment = kind;
    switch (kind) {
    case ExperimentKind::Ex1:
    case ExperimentKind::Custom: break;
    case ExperimentKind::Ex2: cfg.signal = SignalKind::BandpassNoise; break;
    case ExperimentKind::Ex3:
        cfg.signal       = SignalKind::Ofdm;
        cfg.cfo_fraction = 0.05;
        cfg.phase_offset = 0.05 * 2.0 * std::numbers::pi;
        break;
    case ExperimentKind::Ex4:
        cfg.signal  = SignalKind::Ofdm;
        cfg.epsilon = 300e-6;
        cfg.snr_db  = {10.0, 20.0, 30.0, 40.0, 50.0, 60.0};
        break;
    case ExperimentKind::Ex5:
        cfg.signal          = SignalKind::Ofdm;
        cfg.epsilon         = 300e-6;
        cfg.snr_db          = {30.0};
        cfg.delta_sweep_ppm = {-1000.0, -500.0, -200.0, -50.0, 50.0, 200.0, 500.0, 1000.0};
        break;
    }
    return cfg;
}

void ExperimentConfig::validate() const {
    if (trials < 1) {
        throw Error(ErrorCode::Parameter, "trials must be at least 1");
    }
    if (order < 1 || order > 5) {
        throw Error(ErrorCode::InvalidOrder, fmt::format("order must be in [1, 5], got {}", order));
    }
    if (snr_db.empty()) {
        throw Error(ErrorCode::Parameter, "SNR list is empty");
    }
    const int swept = (snr_db.size() > 1) + (delta_sweep_ppm.size() > 1) + (epsilon_sweep.size() > 1);
    if (swept > 1) {
        throw Error(ErrorCode::Parameter, "only one of the SNR, delta and epsilon lists may hold several values");
    }
    const auto check_delta = [](double ppm) {
        if (!(std::abs(ppm) < 1e4)) {
            throw Error(ErrorCode::Parameter, fmt::format("|delta| must stay below 10000 ppm, got {}", ppm));
        }
    };
    check_delta(delta_ppm);
    std::ranges::for_each(delta_sweep_ppm, check_delta);
    for (double s : snr_db) {
        if (std::isnan(s)) {
            throw Error(ErrorCode::Parameter, "SNR must be a number");
        }
    }
    if (jobs < 1 || max_iters < 1) {
        throw Error(ErrorCode::Parameter, "jobs and max_iters must be positive");
    }
    if (signal == SignalKind::Ofdm) {
        ofdm.validate();
    }
    if (signal == SignalKind::MultiSine && n_tones < 2) {
        throw Error(ErrorCode::Parameter, "multi-sine needs at least 2 tones");
    }
    if (signal == SignalKind::BandpassNoise && !(band_lo > 0.0 && band_lo < band_hi && band_hi < 0.5)) {
        throw Error(ErrorCode::Parameter, fmt::format("invalid noise band [{}, {}]", band_lo, band_hi));
    }
}

FarrowBank make_bank(const ExperimentConfig& cfg) { return cfg.design == DesignKind::Lagrange ? design_lagrange(cfg.order) : design_wideband(cfg.order); }

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
    const std::vector<double> delta = cfg.delta_sweep_ppm.empty() ? std::vector<double>{cfg.delta_ppm} : cfg.delta_sweep_ppm;
    const std::vector<double> eps   = cfg.epsilon_sweep.empty() ? std::vector<double>{cfg.epsilon} : cfg.epsilon_sweep;

    // the list with several entries is swept; with none, an explicit delta or epsilon list names the axis
    const bool by_delta = delta.size() > 1 || (!cfg.delta_sweep_ppm.empty() && cfg.snr_db.size() == 1 && eps.size() == 1);
    const bool by_eps   = !by_delta && (eps.size() > 1 || (!cfg.epsilon_sweep.empty() && cfg.snr_db.size() == 1));

    std::vector<SweepPoint> points;
    if (by_delta) {
        for (double d : delta) {
            points.push_back({d, d, eps.front(), cfg.snr_db.front()});
        }
    } else if (by_eps) {
        for (double e : eps) {
            points.push_back({e, delta.front(), e, cfg.snr_db.front()});
        }
    } else {
        for (double snr : cfg.snr_db) {
            points.push_back({snr, delta.front(), eps.front(), snr});
        }
    }
    return points;
}

double relative_error(double hat, double truth) noexcept { return truth == 0.0 ? std::abs(hat) : std::abs(hat - truth) / std::abs(truth); }

namespace {

std::vector<cplx> flatten(const std::vector<std::vector<cplx>>& symbols) {
    std::vector<cplx> out;
    for (const auto& s : symbols) {
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

double ofdm_ber(const std::vector<std::vector<cplx>>& demod, const Ofdm& burst) { return ber_qam16(flatten(demod), burst.payload()); }

// a single-symbol burst only supports a common phase correction
PhaseFit carrier_fit(const PilotSet& pilots, const OfdmSpec& spec) {
    if (spec.symbols > 1) {
        return residual_phase_fit(pilots.equalized, pilots.pilots, pilots.times, spec.fft_size);
    }
    cplx acc{};
    for (std::size_t i = 0; i < pilots.pilots.size(); ++i) {
        acc += pilots.equalized[i] * std::conj(pilots.pilots[i]);
    }
    return {0.0, std::arg(acc)};
}

struct Estimated {
    double delta   = 0.0;
    double epsilon = 0.0;
};

Estimated record_estimate(TrialRecord& r, const std::function<EstimateResult()>& run, const SweepPoint& point) {
    const double delta_true = point.delta_ppm * 1e-6;
    try {
        const auto est = run();
        r.iters        = est.iterations;
        r.converged    = est.converged;
        const auto& w1 = est.step_history.size() > 1 ? est.step_history[1] : est.step_history[0];
        r.one_iter_delta_relerr = relative_error(w1[0], delta_true);
        r.one_iter_eps_relerr   = relative_error(w1[1], point.epsilon);
        r.delta_hat_ppm         = est.delta_hat * 1e6;
        r.eps_hat               = est.epsilon_hat;
        r.delta_relerr          = relative_error(est.delta_hat, delta_true);
        r.eps_relerr            = relative_error(est.epsilon_hat, point.epsilon);
        return {est.delta_hat, est.epsilon_hat};
    } catch (const Error&) {
        r.failed                = true;
        r.delta_relerr          = relative_error(0.0, delta_true);
        r.eps_relerr            = relative_error(0.0, point.epsilon);
        r.one_iter_delta_relerr = r.delta_relerr;
        r.one_iter_eps_relerr   = r.eps_relerr;
        return {};
    }
}

void run_real_trial(TrialRecord& r, const ExperimentConfig& cfg, const FarrowBank& bank, const SweepPoint& point, std::uint64_t trial_seed, const std::filesystem::path& dump_dir) {
    const double         delta = point.delta_ppm * 1e-6;
    const std::size_t    N     = cfg.n_samples;
    const std::size_t    pre   = bank.history();
    const std::size_t    len   = N + bank.taps() - 1;
    const auto           first = -static_cast<std::ptrdiff_t>(pre);
    const std::uint64_t  sig   = derive_seed(trial_seed, 0);

    std::optional<SignalSampler> sampler;
    if (cfg.signal == SignalKind::MultiSine) {
        sampler.emplace(gen_multisine(cfg.n_tones, sig));
    } else {
        NoiseSpec spec;
        spec.f_lo            = cfg.band_lo;
        spec.f_hi            = cfg.band_hi;
        const double margin  = 4.0 + std::abs(point.epsilon) + std::abs(delta) * static_cast<double>(len);
        spec.t_begin         = static_cast<double>(first) - margin;
        spec.t_end           = static_cast<double>(len - pre) + margin;
        sampler.emplace(gen_bandpass_noise(spec, sig));
    }

    const auto pair = sample_pair_real(*sampler, len, delta, point.epsilon, first);
    const auto x1   = add_awgn(pair.x1, point.snr_db, derive_seed(trial_seed, 1));

    EstimatorConfig ecfg;
    ecfg.n_samples = N;
    ecfg.max_iters = cfg.max_iters;
    ecfg.origin    = static_cast<std::ptrdiff_t>(pre);
    const auto w   = record_estimate(r, [&] { return estimate(std::span<const double>(pair.x0), std::span<const double>(x1), bank, ecfg); }, point);

    // compensate with d expressed in array indices: d(c) = (c - pre) delta + eps
    const double        eps_array = w.epsilon - static_cast<double>(pre) * w.delta;
    std::vector<double> y;
    try {
        const auto block = compensate_block(bank, x1, w.delta, eps_array);
        y.assign(block.samples.begin(), block.samples.begin() + static_cast<std::ptrdiff_t>(N));
    } catch (const Error&) {
        const auto full = stream_compensate(bank, x1, w.delta, eps_array);
        y.assign(full.begin() + static_cast<std::ptrdiff_t>(pre), full.begin() + static_cast<std::ptrdiff_t>(pre + N));
    }

    const std::span<const double> ref(pair.x0.data() + pre, N);
    r.nmse_pre_db  = nmse(std::span<const double>(x1.data() + pre, N), ref);
    r.nmse_post_db = nmse(y, ref);
    r.ber_pre      = nan_value;
    r.ber_post     = nan_value;

    if (!dump_dir.empty()) {
        write_real_csv(dump_dir / "x0.csv", pair.x0, first);
        write_real_csv(dump_dir / "x1.csv", x1, first);
        write_real_csv(dump_dir / "compensated.csv", y, 0);
    }
}

void run_ofdm_trial(TrialRecord& r, const ExperimentConfig& cfg, const FarrowBank& bank, const SweepPoint& point, std::uint64_t trial_seed, const std::filesystem::path& dump_dir) {
    const double        delta = point.delta_ppm * 1e-6;
    const std::size_t   N     = cfg.n_samples;
    const std::size_t   pre   = bank.history();
    const std::size_t   body  = cfg.ofdm.length();
    const std::size_t   pad   = bank.lookahead() + 4 + static_cast<std::size_t>(std::ceil(std::abs(delta) * static_cast<double>(body + pre) + std::abs(point.epsilon)));
    const std::size_t   len   = pre + body + pad;
    const auto          first = -static_cast<std::ptrdiff_t>(pre);

    const Ofdm          burst = gen_ofdm(cfg.ofdm, derive_seed(trial_seed, 0));
    const CarrierOffset carrier{cfg.cfo_fraction, cfg.phase_offset, cfg.ofdm.fft_size};
    const auto sampler = SignalSampler(burst).with_carrier_offset(carrier);

    const auto pair = sample_pair(sampler, len, delta, point.epsilon, first);
    const auto x1   = add_awgn(pair.x1, point.snr_db, derive_seed(trial_seed, 1));

    EstimatorConfig ecfg;
    ecfg.n_samples = N;
    ecfg.max_iters = cfg.max_iters;
    ecfg.origin    = static_cast<std::ptrdiff_t>(pre);
    ecfg.component = cfg.component;
    const auto w   = record_estimate(r, [&] { return estimate(std::span<const cplx>(pair.x0), std::span<const cplx>(x1), bank, ecfg); }, point);

    const auto y = stream_compensate_complex(bank, x1, w.delta, w.epsilon - static_cast<double>(pre) * w.delta);

    const std::span<const cplx> ref(pair.x0.data() + pre, N);
    r.nmse_pre_db  = nmse(std::span<const cplx>(x1.data() + pre, N), ref);
    r.nmse_post_db = nmse(std::span<const cplx>(y.data() + pre, N), ref);

    const auto raw = ofdm_demodulate(x1, cfg.ofdm, first);
    r.ber_pre      = ofdm_ber(raw, burst);

    const auto sfo_only = ofdm_demodulate(y, cfg.ofdm, first);
    const auto pilots   = collect_pilots(sfo_only, burst);
    const auto fit      = carrier_fit(pilots, cfg.ofdm);
    const auto derot    = apply_cfo_po(y, -fit.cfo_fraction, -fit.phase, cfg.ofdm.fft_size, first);
    const auto post     = ofdm_demodulate(derot, cfg.ofdm, first);
    r.ber_post          = ofdm_ber(post, burst);

    if (!dump_dir.empty()) {
        write_complex_csv(dump_dir / "constellation_pre.csv", flatten(raw));
        write_complex_csv(dump_dir / "constellation_sfo.csv", flatten(sfo_only));
        write_complex_csv(dump_dir / "constellation_post.csv", flatten(post));
        write_complex_csv(dump_dir / "x0.csv", pair.x0, first);
        write_complex_csv(dump_dir / "x1.csv", x1, first);
        write_complex_csv(dump_dir / "compensated.csv", derot, first);
    }
}

} // namespace

TrialRecord run_trial(const ExperimentConfig& cfg, const FarrowBank& bank, const SweepPoint& point, std::uint64_t trial_seed, std::size_t trial_index, const std::filesystem::path& dump_dir) {
    const auto start = std::chrono::steady_clock::now();

    TrialRecord r;
    r.trial          = trial_index;
    r.delta_true_ppm = point.delta_ppm;
    r.eps_true       = point.epsilon;
    if (cfg.signal == SignalKind::Ofdm) {
        run_ofdm_trial(r, cfg, bank, point, trial_seed, dump_dir);
    } else {
        run_real_trial(r, cfg, bank, point, trial_seed, dump_dir);
    }
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::vector<AggregateRow> aggregate(std::span<const TrialRecord> trials, std::span<const SweepPoint> points, std::size_t trials_per_point) {
    if (trials.size() != points.size() * trials_per_point) {
        throw Error(ErrorCode::Parameter, fmt::format("{} trial records do not fill {} points of {} trials", trials.size(), points.size(), trials_per_point));
    }
    std::vector<AggregateRow> rows;
    for (std::size_t p = 0; p < points.size(); ++p) {
        const auto          block = trials.subspan(p * trials_per_point, trials_per_point);
        AggregateRow        row;
        std::vector<double> nm;
        double              ber    = 0.0;
        std::size_t         in1    = 0;
        std::size_t         in3    = 0;
        double              nm_sum = 0.0;
        for (const auto& t : block) {
            nm.push_back(t.nmse_post_db);
            nm_sum += t.nmse_post_db;
            ber += t.ber_post;
            in1 += (t.delta_relerr <= 0.01 && t.eps_relerr <= 0.01) ? 1 : 0;
            in3 += (t.delta_relerr <= 0.03 && t.eps_relerr <= 0.03) ? 1 : 0;
        }
        const double count = static_cast<double>(block.size());
        std::ranges::sort(nm);
        const std::size_t mid = nm.size() / 2;
        row.sweep_value         = points[p].value;
        row.mean_nmse_post_db   = nm_sum / count;
        row.median_nmse_post_db = nm.size() % 2 == 1 ? nm[mid] : 0.5 * (nm[mid - 1] + nm[mid]);
        row.mean_ber_post       = ber / count;
        row.frac_within_1pct    = static_cast<double>(in1) / count;
        row.frac_within_3pct    = static_cast<double>(in3) / count;
        rows.push_back(row);
    }
    return rows;
}

std::string trials_csv(std::span<const TrialRecord> trials) {
    std::string text(trials_csv_header);
    text += '\n';
    for (const auto& t : trials) {
        text += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{:.17g},{:.17g},{:.17g}\n", t.trial, t.delta_true_ppm, t.eps_true, t.delta_hat_ppm, t.eps_hat,
                            t.delta_relerr, t.eps_relerr, t.iters, t.nmse_pre_db, t.nmse_post_db, t.ber_pre, t.ber_post);
    }
    return text;
}

std::string aggregate_csv(std::span<const AggregateRow> rows) {
    std::string text(aggregate_csv_header);
    text += '\n';
    for (const auto& r : rows) {
        text += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.sweep_value, r.mean_nmse_post_db, r.median_nmse_post_db, r.mean_ber_post, r.frac_within_1pct,
                            r.frac_within_3pct);
    }
    return text;
}

namespace {

template<typename T>
T parse_field(std::string_view field) {
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::Parameter, fmt::format("bad CSV field '{}'", field));
    }
    return value;
}

} // namespace

std::vector<TrialRecord> parse_trials_csv(std::string_view text) {
    std::vector<TrialRecord> out;
    bool                     header = true;
    while (!text.empty()) {
        const auto       eol  = text.find('\n');
        std::string_view line = text.substr(0, eol);
        text                  = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
        if (line.empty()) {
            continue;
        }
        if (header) {
            if (line != trials_csv_header) {
                throw Error(ErrorCode::Parameter, "unexpected trials.csv header");
            }
            header = false;
            continue;
        }
        std::vector<std::string_view> f;
        while (true) {
            const auto comma = line.find(',');
            f.push_back(line.substr(0, comma));
            if (comma == std::string_view::npos) {
                break;
            }
            line.remove_prefix(comma + 1);
        }
        if (f.size() != 12) {
            throw Error(ErrorCode::Parameter, fmt::format("trials.csv row has {} fields", f.size()));
        }
        TrialRecord r;
        r.trial          = parse_field<std::size_t>(f[0]);
        r.delta_true_ppm = parse_field<double>(f[1]);
        r.eps_true       = parse_field<double>(f[2]);
        r.delta_hat_ppm  = parse_field<double>(f[3]);
        r.eps_hat        = parse_field<double>(f[4]);
        r.delta_relerr   = parse_field<double>(f[5]);
        r.eps_relerr     = parse_field<double>(f[6]);
        r.iters          = parse_field<int>(f[7]);
        r.nmse_pre_db    = parse_field<double>(f[8]);
        r.nmse_post_db   = parse_field<double>(f[9]);
        r.ber_pre        = parse_field<double>(f[10]);
        r.ber_post       = parse_field<double>(f[11]);
        out.push_back(r);
    }
    return out;
}

ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start  = std::chrono::steady_clock::now();
    const auto bank   = make_bank(cfg);
    const auto points = sweep_points(cfg);
    const auto total  = points.size() * cfg.trials;

    if (!cfg.out.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.out, ec);
        if (ec) {
            throw Error(ErrorCode::Io, fmt::format("cannot create output directory '{}': {}", cfg.out.string(), ec.message()));
        }
    }

    ExperimentSummary summary;
    summary.trials.resize(total);
    std::atomic<std::size_t> next{0};
    std::exception_ptr       failure;
    std::mutex               failure_mutex;
    const auto               worker = [&] {
        for (std::size_t i = next++; i < total; i = next++) {
            const std::size_t p = i / cfg.trials;
            const std::size_t t = i % cfg.trials;
            try {
                summary.trials[i] = run_trial(cfg, bank, points[p], cfg.seed + t, i, i == 0 ? cfg.out : std::filesystem::path{});
            } catch (...) {
                std::scoped_lock lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = total;
            }
        }
    };
    const unsigned workers = std::min<std::size_t>(cfg.jobs, total);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    summary.aggregate    = aggregate(summary.trials, points, cfg.trials);
    summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (!cfg.out.empty()) {
        for (const auto& [name, text] : {std::pair{"trials.csv", trials_csv(summary.trials)}, std::pair{"aggregate.csv", aggregate_csv(summary.aggregate)}}) {
            std::ofstream f(cfg.out / name);
            if (!f || !(f << text)) {
                throw Error(ErrorCode::Io, fmt::format("cannot write '{}'", (cfg.out / name).string()));
            }
        }
    }
    return summary;
}

ExperimentSummary run_custom(ExperimentConfig cfg) {
    cfg.experiment = ExperimentKind::Custom;
    return run_experiment(cfg);
}

} // namespace sfo
