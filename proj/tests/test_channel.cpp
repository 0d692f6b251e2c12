#include "skinsense/channel.hpp"
#include "skinsense/demodulator.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace skinsense;

namespace {

std::vector<double> axis_window(const AccelTrace& t, std::size_t axis, std::size_t start, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = t.samples[start + i][axis];
    return out;
}

double rms(const AccelTrace& t) {
    double s = 0;
    for (const auto& v : t.samples) s += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    return std::sqrt(s / static_cast<double>(t.samples.size()));
}

AccelTrace tone(double hz, double rate, std::size_t n) {
    AccelTrace t;
    t.sampling_rate = rate;
    t.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double v = std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(k) / rate);
        t.samples[k] = {v, 0.5 * v, 0.0};
    }
    return t;
}

} // namespace

TEST(Channel, EmptyScheduleGivesEmptyTrace) {
    const auto t = synthesize(DriveSchedule{}, ChannelConfig::clean(), 1);
    EXPECT_EQ(t.size(), 0u);
}

TEST(Channel, TraceLengthIsCeilOfDuration) {
    DriveSchedule s{{{20, 0, 250}}, 401};
    EXPECT_EQ(synthesize(s, ChannelConfig::clean(), 1).size(), 281u); // ceil(0.401 * 700)
}

TEST(Channel, ToneFrequenciesMatchOvertonesByDft) {
    const auto cfg = ChannelConfig::clean();
    const auto sched = schedule(std::vector<Symbol>{{60, 500, 300}});
    const auto t = synthesize(sched, cfg, 5);
    // A window fully inside the ON interval, after the ramp.
    const auto x = axis_window(t, 0, 150, 128);
    std::vector<double> w(128);
    for (std::size_t i = 0; i < 128; ++i)
        w[i] = x[i] * (0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / 128.0));
    const auto mags = oracle::dft_magnitudes(w);
    const double bin = 700.0 / 128.0;
    // Two largest local maxima.
    std::vector<std::pair<double, std::size_t>> peaks;
    for (std::size_t k = 1; k + 1 < mags.size(); ++k)
        if (mags[k] > mags[k - 1] && mags[k] >= mags[k + 1]) peaks.emplace_back(mags[k], k);
    std::sort(peaks.rbegin(), peaks.rend());
    ASSERT_GE(peaks.size(), 2u);
    std::array<double, 2> found{peaks[0].second * bin, peaks[1].second * bin};
    std::sort(found.begin(), found.end());
    EXPECT_NEAR(found[0], 150.0, bin);
    EXPECT_NEAR(found[1], 300.0, bin);

    // The library spectrogram agrees on the strongest bin.
    const auto spec = spectrogram(t);
    const auto col = spec.window(150 / 4 + 1);
    const auto best = std::max_element(col.begin(), col.end()) - col.begin();
    EXPECT_NEAR(spec.frequency(static_cast<std::size_t>(best)), 150.0, bin);
}

TEST(Channel, DeterministicPerSeed) {
    const auto cfg = ChannelConfig::defaults();
    const auto sched = schedule(encode(BitMessage::from_hex("5a"), EncodingProfile::full()));
    const auto a = synthesize(sched, cfg, 11);
    const auto b = synthesize(sched, cfg, 11);
    const auto c = synthesize(sched, cfg, 12);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Channel, SeedsDifferButDecodeAgreesAtHighSnr) {
    auto cfg = ChannelConfig::defaults();
    cfg.white_sigma = 0.02;
    const auto p = EncodingProfile::full();
    const auto msg = BitMessage::from_hex("9e37");
    const auto sched = with_margins(schedule(encode(msg, p)), 200, 200);
    const auto a = synthesize(sched, cfg, 1);
    const auto b = synthesize(sched, cfg, 2);
    EXPECT_NE(a, b);
    const auto ra = decode(a, p, cfg);
    const auto rb = decode(b, p, cfg);
    EXPECT_TRUE(ra.ok());
    EXPECT_EQ(ra.bits, msg);
    EXPECT_EQ(rb.bits, msg);
}

TEST(Channel, NyquistViolationIsConfigError) {
    auto cfg = ChannelConfig::clean();
    cfg.sampling_rate = 200;
    EXPECT_THROW(synthesize(schedule(std::vector<Symbol>{{60, 250, 150}}), cfg, 1), ConfigError);
    cfg = ChannelConfig::clean();
    cfg.overtones[60].f2_hz = 350.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Channel, AttenuationScalesRms) {
    auto cfg = ChannelConfig::clean();
    const auto sched = schedule(encode(BitMessage::from_hex("d2"), EncodingProfile::full()));
    const double full = rms(synthesize(sched, cfg, 4));
    cfg.attenuation = 0.5;
    const double half = rms(synthesize(sched, cfg, 4));
    EXPECT_NEAR(half / full, 0.5, 1e-12);
}

TEST(Channel, ForceAndOmegaIncreaseOverPwmRange) {
    const MotorModel m;
    for (int pwm = 20; pwm < 240; ++pwm) {
        EXPECT_LT(m.omega(pwm), m.omega(pwm + 1));
        EXPECT_GE(m.force(pwm), 0.0);
        EXPECT_LT(m.force(pwm), m.force(pwm + 1));
    }
    const double w = m.omega(60);
    EXPECT_DOUBLE_EQ(m.force(60), m.mass_kg * m.radius_m * w * w);
}

TEST(Channel, ResonanceMaximalAt60) {
    const ResonanceProfile r;
    for (int pwm = 20; pwm <= 240; ++pwm) {
        if (pwm != 60) {
            EXPECT_LT(r.gain(pwm), r.gain(60));
        }
    }
}

TEST(Channel, RingingFallsBelowPresenceWithinShortestGap) {
    const MotorModel m;
    // Envelope after the shortest OFF gap relative to its switch-off level.
    EXPECT_LT(std::exp(-150.0 / m.ramp_down_ms), 0.05);

    // Two short pulses separated by the shortest gap stay separable.
    const auto cfg = ChannelConfig::clean();
    const std::vector<Symbol> syms{{60, 250, 150}, {60, 250, 150}};
    const auto trace = synthesize(with_margins(schedule(syms), 200, 200), cfg, 3);
    const auto est = separate_symbols(track_frequency(spectrogram(trace)));
    EXPECT_EQ(est.symbols.size(), 2u);
}

TEST(Channel, SuperimposeLinearity) {
    const auto cfg = ChannelConfig::defaults();
    const auto t = synthesize(schedule(std::vector<Symbol>{{30, 250, 150}}), cfg, 9);
    AccelTrace zero = t;
    for (auto& s : zero.samples) s = {0, 0, 0};
    EXPECT_EQ(superimpose(t, zero), t);
    const auto doubled = superimpose(t, t);
    for (std::size_t k = 0; k < t.size(); ++k)
        for (std::size_t a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(doubled.samples[k][a], 2.0 * t.samples[k][a]);
}

TEST(Channel, SuperimposeTilesShortNoise) {
    AccelTrace t;
    t.samples.assign(5, {1, 1, 1});
    AccelTrace n;
    n.samples = {{1, 0, 0}, {2, 0, 0}};
    const auto out = superimpose(t, n);
    ASSERT_EQ(out.size(), 5u);
    EXPECT_EQ(out.samples[4][0], 2.0);
    EXPECT_EQ(out.samples[3][0], 3.0);
}

TEST(Channel, SuperimposeRateMismatch) {
    AccelTrace t, n;
    n.sampling_rate = 200;
    EXPECT_THROW(superimpose(t, n), RateMismatch);
}

TEST(Channel, ResampleIdentityAndErrors) {
    const auto t = tone(100, 700, 700);
    EXPECT_EQ(resample(t, 700), t);
    EXPECT_THROW(resample(t, 800), UpsampleUnsupported);
}

TEST(Channel, ResampleRemovesToneAboveNewNyquist) {
    const auto hi = resample(tone(300, 700, 2800), 200);
    EXPECT_EQ(hi.size(), 800u);
    const auto lo = resample(tone(50, 700, 2800), 200);
    // Interior window, DFT energy relative to a unit tone of the same length.
    auto level = [](const AccelTrace& t) {
        const auto x = axis_window(t, 0, 200, 400);
        double peak = 0;
        for (double m : oracle::dft_magnitudes(x)) peak = std::max(peak, m);
        return peak / 200.0; // unit sinusoid over 400 samples -> 200
    };
    EXPECT_LT(level(hi), 0.01);
    EXPECT_NEAR(level(lo), 1.0, 0.05);
}

TEST(Channel, ResamplePreservesDuration) {
    const auto t = synthesize(schedule(std::vector<Symbol>{{60, 500, 300}}), ChannelConfig::defaults(), 1);
    const auto r = resample(t, 200);
    EXPECT_NEAR(r.duration_s(), t.duration_s(), 1.0 / 200.0);
}

TEST(Channel, SineSweepShape) {
    const auto cfg = ChannelConfig::clean();
    EXPECT_EQ(sine_sweep(cfg, 60, 60, 10, 500).size(), 350u);
    EXPECT_EQ(sine_sweep(cfg, 20, 100, 10, 500).size(), 9u * 350u);
    EXPECT_THROW(sine_sweep(cfg, 20, 100, 0, 500), ConfigError);
}

TEST(Channel, SineSweepPeaksAtPwm60) {
    const auto cfg = ChannelConfig::clean();
    const int dwell = 1000;
    const auto t = sine_sweep(cfg, 20, 240, 10, dwell);
    const std::size_t seg = 700;
    int best_pwm = 0;
    double best = -1;
    for (int i = 0, pwm = 20; pwm <= 240; ++i, pwm += 10) {
        // Spectral energy of the segment's steady part via the DFT oracle.
        double e = 0;
        for (std::size_t a = 0; a < 3; ++a) {
            const auto x = axis_window(t, a, static_cast<std::size_t>(i) * seg + 200, 256);
            for (double m : oracle::dft_magnitudes(x)) e += m * m;
        }
        if (e > best) {
            best = e;
            best_pwm = pwm;
        }
    }
    EXPECT_EQ(best_pwm, 60);
}

TEST(Channel, TraceCsvRoundTrip) {
    const auto t = synthesize(schedule(std::vector<Symbol>{{20, 250, 150}}), ChannelConfig::defaults(), 2);
    std::stringstream ss;
    write_trace_csv(ss, t);
    EXPECT_EQ(ss.str().substr(0, 11), "t,ax,ay,az\n");
    const auto back = read_trace_csv(ss);
    EXPECT_DOUBLE_EQ(back.sampling_rate, 700.0);
    ASSERT_EQ(back.size(), t.size());
    for (std::size_t k = 0; k < t.size(); ++k)
        for (std::size_t a = 0; a < 3; ++a) EXPECT_NEAR(back.samples[k][a], t.samples[k][a], 1e-8);
}

TEST(Channel, TraceCsvErrorsCarryLineNumbers) {
    std::stringstream truncated("t,ax,ay,az\n0.000000,1,2,3\n0.001429,1,2\n");
    try {
        read_trace_csv(truncated);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
    std::stringstream garbage("t,ax,ay,az\n0.0,1,2,3\n0.1,x,2,3\n");
    EXPECT_THROW(read_trace_csv(garbage), ParseError);
    std::stringstream no_header("0.0,1,2,3\n");
    EXPECT_THROW(read_trace_csv(no_header), ParseError);
}

TEST(Channel, ConfigFileRoundTrip) {
    auto c = ChannelConfig::defaults();
    c.white_sigma = 0.3;
    c.overtones[45] = {120, 240, 1, 0.5};
    std::stringstream ss;
    write_channel_config(ss, c);
    const auto back = read_channel_config(ss);
    EXPECT_EQ(back.white_sigma, 0.3);
    EXPECT_EQ(back.overtones, c.overtones);
    EXPECT_EQ(back.motor.omega_base, c.motor.omega_base);

    std::stringstream placed("placement = middle\n# comment\nnoise.white_sigma = 0.1 # trailing\n");
    const auto p = read_channel_config(placed);
    EXPECT_DOUBLE_EQ(p.attenuation, 0.7);
    EXPECT_DOUBLE_EQ(p.white_sigma, 0.1);

    std::stringstream unknown("bogus = 1\n");
    EXPECT_THROW(read_channel_config(unknown), ConfigError);
    std::stringstream nyq("overtone.60 = 150, 360, 1, 0.5\n");
    EXPECT_THROW(read_channel_config(nyq), ConfigError);
}

TEST(Channel, OvertoneInterpolation) {
    const auto c = ChannelConfig::defaults();
    EXPECT_EQ(c.overtones_at(60), c.overtones.at(60));
    const auto mid = c.overtones_at(25);
    EXPECT_DOUBLE_EQ(mid.f1_hz, 82.5);
    EXPECT_EQ(c.overtones_at(240), c.overtones.at(100));
}
