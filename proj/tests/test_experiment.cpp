#include <doctest.h>

#include <sfo/error.hpp>
#include <sfo/experiment.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace sfo;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream     in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("sfo_exp_" + name);
    std::filesystem::remove_all(p);
    return p;
}

} // namespace

TEST_CASE("presets") {
    const auto ex1 = preset(ExperimentKind::Ex1);
    CHECK(ex1.signal == SignalKind::MultiSine);
    CHECK(ex1.trials == 1000);
    CHECK(ex1.n_samples == 256);
    CHECK(ex1.order == 3);
    CHECK(ex1.delta_ppm == -200.0);
    CHECK(ex1.epsilon == 0.03);
    CHECK(ex1.snr_db == std::vector<double>{60.0});

    CHECK(preset(ExperimentKind::Ex2).signal == SignalKind::BandpassNoise);

    const auto ex3 = preset(ExperimentKind::Ex3);
    CHECK(ex3.signal == SignalKind::Ofdm);
    CHECK(ex3.ofdm.fft_size == 2048);
    CHECK(ex3.ofdm.active == 1536);
    CHECK(ex3.cfo_fraction == 0.05);
    CHECK(ex3.phase_offset == doctest::Approx(0.1 * std::numbers::pi));
    CHECK(ex3.component == Component::Real);

    const auto ex4 = preset(ExperimentKind::Ex4);
    CHECK(ex4.epsilon == 300e-6);
    CHECK(ex4.snr_db == std::vector<double>{10, 20, 30, 40, 50, 60});

    const auto ex5 = preset(ExperimentKind::Ex5);
    CHECK(ex5.epsilon == 300e-6);
    CHECK(ex5.snr_db == std::vector<double>{30.0});
    CHECK(ex5.delta_sweep_ppm == std::vector<double>{-1000, -500, -200, -50, 50, 200, 500, 1000});
}

TEST_CASE("name parsing") {
    CHECK(parse_experiment_kind("ex4") == ExperimentKind::Ex4);
    CHECK(parse_experiment_kind("Custom") == ExperimentKind::Custom);
    CHECK(parse_signal_kind("noise") == SignalKind::BandpassNoise);
    CHECK(parse_design_kind("lagrange") == DesignKind::Lagrange);
    CHECK(parse_component("imag") == Component::Imag);
    CHECK(to_string(ExperimentKind::Ex2) == "ex2");
    CHECK_THROWS_AS((void)parse_experiment_kind("ex9"), Error);
    CHECK_THROWS_AS((void)parse_signal_kind("chirp"), Error);
}

TEST_CASE("sweep points") {
    SUBCASE("SNR sweep") {
        const auto pts = sweep_points(preset(ExperimentKind::Ex4));
        REQUIRE(pts.size() == 6);
        CHECK(pts[2].value == 30.0);
        CHECK(pts[2].snr_db == 30.0);
        CHECK(pts[2].delta_ppm == -200.0);
        CHECK(pts[2].epsilon == 300e-6);
    }
    SUBCASE("delta sweep") {
        const auto pts = sweep_points(preset(ExperimentKind::Ex5));
        REQUIRE(pts.size() == 8);
        CHECK(pts[0].value == -1000.0);
        CHECK(pts[0].delta_ppm == -1000.0);
        CHECK(pts[7].snr_db == 30.0);
    }
    SUBCASE("single point") {
        const auto pts = sweep_points(preset(ExperimentKind::Ex1));
        REQUIRE(pts.size() == 1);
        CHECK(pts[0].value == 60.0);
    }
    SUBCASE("epsilon sweep") {
        auto cfg          = preset(ExperimentKind::Custom);
        cfg.epsilon_sweep = {0.01, 0.02, 0.05};
        const auto pts    = sweep_points(cfg);
        REQUIRE(pts.size() == 3);
        CHECK(pts[1].value == 0.02);
        CHECK(pts[1].epsilon == 0.02);
        CHECK(pts[1].delta_ppm == -200.0);
    }
}

TEST_CASE("relative error") {
    CHECK(relative_error(1.01, 1.0) == doctest::Approx(0.01));
    CHECK(relative_error(-1.97e-4, -2e-4) == doctest::Approx(0.015));
    CHECK(relative_error(3e-8, 0.0) == 3e-8);
}

TEST_CASE("config validation") {
    const auto expect_error = [](ExperimentConfig cfg, ErrorCode code) {
        try {
            cfg.validate();
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    auto c = preset(ExperimentKind::Ex1);
    c.trials = 0;
    expect_error(c, ErrorCode::Parameter);
    c       = preset(ExperimentKind::Ex1);
    c.order = 6;
    expect_error(c, ErrorCode::InvalidOrder);
    c           = preset(ExperimentKind::Ex1);
    c.delta_ppm = 10000.0;
    expect_error(c, ErrorCode::Parameter);
    c        = preset(ExperimentKind::Ex1);
    c.snr_db = {};
    expect_error(c, ErrorCode::Parameter);
    c                 = preset(ExperimentKind::Ex4);
    c.delta_sweep_ppm = {-100, 100};
    expect_error(c, ErrorCode::Parameter);
    c         = preset(ExperimentKind::Ex2);
    c.band_hi = 0.6;
    expect_error(c, ErrorCode::Parameter);
    c = preset(ExperimentKind::Ex1);
    CHECK_NOTHROW(c.validate());
    c        = preset(ExperimentKind::Ex1);
    c.trials = 0;
    CHECK_THROWS_AS((void)run_experiment(c), Error);
}

TEST_CASE("CSV format") {
    TrialRecord r;
    r.trial          = 3;
    r.delta_true_ppm = -200;
    r.eps_true       = 0.03;
    r.delta_hat_ppm  = -199.5;
    r.eps_hat        = 0.0301;
    r.delta_relerr   = 0.0025;
    r.eps_relerr     = 1.0 / 300.0;
    r.iters          = 2;
    r.nmse_pre_db    = -20.5;
    r.nmse_post_db   = -59.9;
    r.ber_pre        = std::nan("");
    r.ber_post       = std::nan("");
    const std::vector<TrialRecord> v{r};
    const auto                     text = trials_csv(v);
    CHECK(text.substr(0, text.find('\n')) == trials_csv_header);
    const auto back = parse_trials_csv(text);
    REQUIRE(back.size() == 1);
    CHECK(back[0].trial == 3);
    CHECK(back[0].eps_relerr == r.eps_relerr);
    CHECK(back[0].iters == 2);
    CHECK(std::isnan(back[0].ber_post));
    CHECK(trials_csv_header == "trial,delta_true_ppm,eps_true,delta_hat_ppm,eps_hat,delta_relerr,eps_relerr,iters,nmse_pre_db,nmse_post_db,ber_pre,ber_post");
    CHECK(aggregate_csv_header == "sweep_value,mean_nmse_post_db,median_nmse_post_db,mean_ber_post,frac_within_1pct,frac_within_3pct");
    CHECK_THROWS_AS((void)parse_trials_csv("bad,header\n"), Error);
}

TEST_CASE("aggregate statistics") {
    std::vector<TrialRecord> t(4);
    const double             nm[] = {-10.0, -30.0, -20.0, -40.0};
    const double             de[] = {0.005, 0.02, 0.005, 0.5};
    const double             ee[] = {0.001, 0.001, 0.02, 0.001};
    for (std::size_t i = 0; i < 4; ++i) {
        t[i].nmse_post_db = nm[i];
        t[i].delta_relerr = de[i];
        t[i].eps_relerr   = ee[i];
        t[i].ber_post     = 0.25 * static_cast<double>(i);
    }
    const std::vector<SweepPoint> pts{{7.0, 0, 0, 0}};
    const auto                    rows = aggregate(t, pts, 4);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].sweep_value == 7.0);
    CHECK(rows[0].mean_nmse_post_db == -25.0);
    CHECK(rows[0].median_nmse_post_db == -25.0);
    CHECK(rows[0].mean_ber_post == doctest::Approx(0.375));
    CHECK(rows[0].frac_within_1pct == 0.25);
    CHECK(rows[0].frac_within_3pct == 0.75);
    CHECK_THROWS_AS((void)aggregate(t, pts, 3), Error);
}

TEST_CASE("runs are deterministic and self-consistent") {
    auto cfg   = preset(ExperimentKind::Ex1);
    cfg.trials = 1;
    const auto a = scratch_dir("a");
    const auto b = scratch_dir("b");
    cfg.out      = a;
    (void)run_experiment(cfg);
    cfg.out = b;
    (void)run_experiment(cfg);
    CHECK(slurp(a / "trials.csv") == slurp(b / "trials.csv"));
    CHECK(slurp(a / "aggregate.csv") == slurp(b / "aggregate.csv"));
    CHECK(std::filesystem::exists(a / "x0.csv"));
    CHECK(std::filesystem::exists(a / "compensated.csv"));

    SUBCASE("aggregate recomputed from the trial file matches") {
        auto multi          = preset(ExperimentKind::Ex5);
        multi.trials        = 3;
        multi.ofdm.symbols  = 1;
        multi.delta_sweep_ppm = {-500.0, 500.0};
        multi.out           = scratch_dir("agg");
        const auto summary  = run_experiment(multi);
        const auto parsed   = parse_trials_csv(slurp(multi.out / "trials.csv"));
        REQUIRE(parsed.size() == 6);
        const auto pts = sweep_points(multi);
        CHECK(aggregate_csv(aggregate(parsed, pts, multi.trials)) == slurp(multi.out / "aggregate.csv"));
        CHECK(aggregate_csv(summary.aggregate) == slurp(multi.out / "aggregate.csv"));
        CHECK(std::filesystem::exists(multi.out / "constellation_post.csv"));
        std::filesystem::remove_all(multi.out);
    }
    SUBCASE("thread count does not change the output") {
        auto par   = preset(ExperimentKind::Ex2);
        par.trials = 6;
        par.jobs   = 1;
        const auto one = run_experiment(par);
        par.jobs       = 3;
        const auto three = run_experiment(par);
        CHECK(trials_csv(one.trials) == trials_csv(three.trials));
    }
    std::filesystem::remove_all(a);
    std::filesystem::remove_all(b);
}

TEST_CASE("custom runs") {
    SUBCASE("no offset and no noise") {
        auto cfg      = preset(ExperimentKind::Custom);
        cfg.trials    = 3;
        cfg.delta_ppm = 0.0;
        cfg.epsilon   = 0.0;
        cfg.snr_db    = {no_noise};
        const auto s  = run_custom(cfg);
        for (const auto& t : s.trials) {
            CHECK(std::abs(t.delta_hat_ppm * 1e-6) < 1e-7);
            CHECK(std::abs(t.eps_hat) < 1e-6);
        }
    }
    SUBCASE("single trial with ex2 parameters equals the first ex2 trial") {
        auto ex2       = preset(ExperimentKind::Ex2);
        ex2.trials     = 2;
        auto custom    = ex2;
        custom.trials  = 1;
        const auto a   = run_experiment(ex2);
        const auto b   = run_custom(custom);
        const std::vector<TrialRecord> first{a.trials[0]};
        CHECK(trials_csv(first) == trials_csv(b.trials));
    }
    SUBCASE("epsilon sweep emits one row per value") {
        auto cfg          = preset(ExperimentKind::Custom);
        cfg.trials        = 2;
        cfg.epsilon_sweep = {0.01, 0.03, 0.1, -0.05};
        const auto s      = run_custom(cfg);
        REQUIRE(s.aggregate.size() == 4);
        CHECK(s.aggregate[3].sweep_value == -0.05);
        CHECK(s.trials.size() == 8);
    }
}

TEST_CASE("unwritable output path") {
    auto cfg   = preset(ExperimentKind::Ex1);
    cfg.trials = 1;
    cfg.out    = "/proc/sfo-no-such-dir/out";
    try {
        (void)run_experiment(cfg);
        FAIL("expected io error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Io);
    }
}

TEST_CASE("single-symbol OFDM burst falls back to a common phase correction") {
    auto cfg         = preset(ExperimentKind::Ex3);
    cfg.trials       = 2;
    cfg.ofdm.symbols = 1;
    const auto s     = run_experiment(cfg);
    for (const auto& t : s.trials) {
        CHECK(t.ber_post == 0.0);
        CHECK(t.delta_relerr <= 0.03);
    }
}
