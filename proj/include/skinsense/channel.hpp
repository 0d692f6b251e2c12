#pragma once

// Motor -> skin -> accelerometer channel simulator.
//
// A drive schedule is turned into a 3-axis acceleration trace. Each ON
// interval emits two overtones whose amplitude follows the eccentric-mass
// force F = m r w^2, shaped by a resonance profile over PWM and a placement
// attenuation. The envelope rises with a first-order time constant and rings
// down exponentially after the motor is switched off. White noise and a
// sub-40 Hz drift are added on every axis.

#include "skinsense/errors.hpp"
#include "skinsense/modulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace skinsense {

struct MotorModel {
    double mass_kg = 1e-3;
    double radius_m = 1e-3;
    // Angular velocity is affine in PWM: omega = omega_base + omega_per_pwm * pwm.
    double omega_base = 2.0 * std::numbers::pi * 100.0;
    double omega_per_pwm = 2.0 * std::numbers::pi * 0.5;
    double ramp_up_ms = 30.0;
    double ramp_down_ms = 50.0;

    double omega(double pwm) const { return omega_base + omega_per_pwm * pwm; }
    double force(double pwm) const {
        const double w = omega(pwm);
        return mass_kg * radius_m * w * w;
    }
};

struct Overtones {
    double f1_hz = 0;
    double f2_hz = 0;
    double a1 = 1;
    double a2 = 0;

    friend bool operator==(const Overtones&, const Overtones&) = default;
};

// Multiplier over PWM with a cusp at `center_pwm`: 1 / (1 + |pwm - c| / width)
// with separate widths below and above the centre.
struct ResonanceProfile {
    double center_pwm = 60.0;
    double lower_width = 240.0;
    double upper_width = 40.0;

    double gain(double pwm) const {
        const double d = pwm - center_pwm;
        return 1.0 / (1.0 + (d < 0 ? -d / lower_width : d / upper_width));
    }
};

enum class Placement { Top, Middle, Bottom };

inline double attenuation_for(Placement p) {
    switch (p) {
    case Placement::Top: return 1.0;
    case Placement::Middle: return 0.7;
    case Placement::Bottom: return 0.95;
    }
    return 1.0;
}

inline Placement parse_placement(const std::string& s) {
    if (s == "top") return Placement::Top;
    if (s == "middle") return Placement::Middle;
    if (s == "bottom") return Placement::Bottom;
    throw ConfigError("unknown placement '" + s + "'");
}

inline const char* to_string(Placement p) {
    switch (p) {
    case Placement::Top: return "top";
    case Placement::Middle: return "middle";
    case Placement::Bottom: return "bottom";
    }
    return "top";
}

inline std::map<int, Overtones> default_overtone_table() {
    return {
        {20, {70.0, 140.0, 1.0, 0.6}},
        {30, {95.0, 190.0, 1.0, 0.45}},
        {60, {150.0, 300.0, 1.0, 0.7}},
        {100, {250.0, 125.0, 1.0, 0.04}},
    };
}

struct ChannelConfig {
    std::map<int, Overtones> overtones = default_overtone_table();
    ResonanceProfile resonance;
    MotorModel motor;
    double coupling_gain = 1.5; // (m/s^2) per newton
    double attenuation = 1.0;
    std::array<double, 3> axis{0.8, 0.4, 0.45}; // normalised on use
    double white_sigma = 0.05;                  // m/s^2 per axis
    double drift_amplitude = 0.5;               // m/s^2, components below 5 Hz
    double sampling_rate = 700.0;

    static ChannelConfig defaults() { return {}; }

    static ChannelConfig clean() {
        ChannelConfig c;
        c.white_sigma = 0.0;
        c.drift_amplitude = 0.0;
        return c;
    }

    // Linear interpolation between table rows, held constant outside.
    Overtones overtones_at(double pwm) const {
        if (overtones.empty()) throw ConfigError("empty overtone table");
        auto hi = overtones.lower_bound(static_cast<int>(std::ceil(pwm)));
        if (hi == overtones.end()) return std::prev(hi)->second;
        if (hi == overtones.begin() || hi->first == pwm) return hi->second;
        auto lo = std::prev(hi);
        const double t = (pwm - lo->first) / (hi->first - lo->first);
        auto lerp = [t](double a, double b) { return a + (b - a) * t; };
        return {lerp(lo->second.f1_hz, hi->second.f1_hz), lerp(lo->second.f2_hz, hi->second.f2_hz),
                lerp(lo->second.a1, hi->second.a1), lerp(lo->second.a2, hi->second.a2)};
    }

    // Peak acceleration scale (m/s^2) of the drive at `pwm`.
    double amplitude(double pwm) const {
        return coupling_gain * resonance.gain(pwm) * motor.force(pwm) * attenuation;
    }

    std::array<double, 3> unit_axis() const {
        const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
        if (n <= 0) throw ConfigError("axis direction has zero length");
        return {axis[0] / n, axis[1] / n, axis[2] / n};
    }

    void validate() const {
        if (!(sampling_rate > 0)) throw ConfigError("sampling_rate must be positive");
        const double nyquist = sampling_rate / 2.0;
        for (const auto& [pwm, o] : overtones) {
            for (double f : {o.f1_hz, o.f2_hz}) {
                if (!(f > 0) || f >= nyquist)
                    throw ConfigError("overtone " + std::to_string(f) + " Hz for PWM " + std::to_string(pwm) +
                                      " is outside (0, " + std::to_string(nyquist) + ") Hz");
            }
            if (o.a1 < 0 || o.a2 < 0) throw ConfigError("negative overtone amplitude");
        }
        if (white_sigma < 0 || drift_amplitude < 0) throw ConfigError("negative noise level");
        if (attenuation < 0) throw ConfigError("negative attenuation");
        if (motor.ramp_up_ms <= 0 || motor.ramp_down_ms <= 0) throw ConfigError("ramp constants must be positive");
        if (resonance.lower_width <= 0 || resonance.upper_width <= 0)
            throw ConfigError("resonance widths must be positive");
        unit_axis();
    }
};

struct AccelTrace {
    double sampling_rate = 700.0;
    std::vector<std::array<double, 3>> samples;

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sampling_rate; }

    friend bool operator==(const AccelTrace&, const AccelTrace&) = default;
};

inline std::size_t samples_for(std::int64_t duration_ms, double rate) {
    return static_cast<std::size_t>(std::ceil(static_cast<double>(duration_ms) * rate / 1000.0 - 1e-9));
}

namespace detail {

// Ringing is cut once the envelope is below e^-12 of its switch-off level.
constexpr double kRingingCutoff = 12.0;

inline void add_drive(std::vector<double>& signal, const DriveCommand& cmd, const ChannelConfig& config,
                      double phase1, double phase2) {
    const double rate = config.sampling_rate;
    const Overtones o = config.overtones_at(cmd.pwm);
    const double amp = config.amplitude(cmd.pwm);
    const double tau_up = config.motor.ramp_up_ms / 1000.0;
    const double tau_down = config.motor.ramp_down_ms / 1000.0;
    const double t0 = static_cast<double>(cmd.start_ms) / 1000.0;
    const double on = cmd.duration_ms / 1000.0;
    const double env_off = 1.0 - std::exp(-on / tau_up);
    const double t_end = t0 + on + kRingingCutoff * tau_down;

    const auto first = static_cast<std::size_t>(std::ceil(t0 * rate - 1e-9));
    const auto last = std::min(signal.size(), static_cast<std::size_t>(std::ceil(t_end * rate)));
    const double w1 = 2.0 * std::numbers::pi * o.f1_hz;
    const double w2 = 2.0 * std::numbers::pi * o.f2_hz;
    for (std::size_t k = first; k < last; ++k) {
        const double ts = static_cast<double>(k) / rate - t0;
        if (ts < 0) continue;
        const double env = ts < on ? 1.0 - std::exp(-ts / tau_up) : env_off * std::exp(-(ts - on) / tau_down);
        signal[k] += amp * env * (o.a1 * std::sin(w1 * ts + phase1) + o.a2 * std::sin(w2 * ts + phase2));
    }
}

} // namespace detail

// Deterministic in (schedule, config, seed).
inline AccelTrace synthesize(const DriveSchedule& sched, const ChannelConfig& config, std::uint64_t seed) {
    config.validate();
    AccelTrace out;
    out.sampling_rate = config.sampling_rate;
    const std::size_t n = samples_for(sched.total_ms, config.sampling_rate);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

    std::vector<double> signal(n, 0.0);
    for (const auto& cmd : sched.commands) {
        const double p1 = phase(rng);
        const double p2 = phase(rng);
        detail::add_drive(signal, cmd, config, p1, p2);
    }

    const auto dir = config.unit_axis();
    out.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t a = 0; a < 3; ++a) out.samples[k][a] = dir[a] * signal[k];

    if (config.drift_amplitude > 0) {
        // Three slow sinusoids per axis, 0.3-4 Hz.
        std::uniform_real_distribution<double> freq(0.3, 4.0);
        const double each = config.drift_amplitude / std::sqrt(3.0);
        for (std::size_t a = 0; a < 3; ++a) {
            for (int c = 0; c < 3; ++c) {
                const double w = 2.0 * std::numbers::pi * freq(rng);
                const double ph = phase(rng);
                for (std::size_t k = 0; k < n; ++k)
                    out.samples[k][a] += each * std::sin(w * static_cast<double>(k) / config.sampling_rate + ph);
            }
        }
    }
    if (config.white_sigma > 0) {
        std::normal_distribution<double> noise(0.0, config.white_sigma);
        for (auto& s : out.samples)
            for (auto& v : s) v += noise(rng);
    }
    return out;
}

// Element-wise sum; a shorter noise trace is tiled periodically.
inline AccelTrace superimpose(const AccelTrace& trace, const AccelTrace& noise) {
    if (std::abs(trace.sampling_rate - noise.sampling_rate) > 1e-9)
        throw RateMismatch("cannot superimpose " + std::to_string(noise.sampling_rate) + " Hz noise on " +
                           std::to_string(trace.sampling_rate) + " Hz trace");
    AccelTrace out = trace;
    if (noise.samples.empty()) return out;
    for (std::size_t k = 0; k < out.samples.size(); ++k) {
        const auto& nz = noise.samples[k % noise.samples.size()];
        for (std::size_t a = 0; a < 3; ++a) out.samples[k][a] += nz[a];
    }
    return out;
}

// Band-limited rate reduction: Blackman-windowed sinc low-pass with cutoff
// 0.45 * target_rate evaluated directly at the output instants.
inline AccelTrace resample(const AccelTrace& trace, double target_rate) {
    if (!(target_rate > 0)) throw ConfigError("target rate must be positive");
    if (target_rate > trace.sampling_rate + 1e-9)
        throw UpsampleUnsupported("cannot resample " + std::to_string(trace.sampling_rate) + " Hz to " +
                                  std::to_string(target_rate) + " Hz");
    if (std::abs(target_rate - trace.sampling_rate) <= 1e-9) return trace;

    const double src = trace.sampling_rate;
    const double fc = 0.45 * target_rate / src; // cycles per source sample
    const double half = 16.0 / (2.0 * fc);      // 16 zero crossings per side
    const auto n_in = static_cast<std::ptrdiff_t>(trace.samples.size());
    const auto n_out = static_cast<std::size_t>(std::ceil(static_cast<double>(n_in) * target_rate / src - 1e-9));

    AccelTrace out;
    out.sampling_rate = target_rate;
    out.samples.assign(n_out, {0.0, 0.0, 0.0});
    for (std::size_t j = 0; j < n_out; ++j) {
        const double x = static_cast<double>(j) * src / target_rate;
        const auto k0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(x - half)));
        const auto k1 = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(x + half)));
        std::array<double, 3> acc{0.0, 0.0, 0.0};
        for (auto k = k0; k <= k1; ++k) {
            const double u = x - static_cast<double>(k);
            const double arg = 2.0 * fc * u;
            const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
            const double r = (u + half) / (2.0 * half);
            const double win = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * r) + 0.08 * std::cos(4.0 * std::numbers::pi * r);
            const double h = 2.0 * fc * sinc * win;
            const auto& s = trace.samples[static_cast<std::size_t>(k)];
            for (std::size_t a = 0; a < 3; ++a) acc[a] += h * s[a];
        }
        out.samples[j] = acc;
    }
    return out;
}

// Back-to-back dwell segments stepping PWM from `pwm_lo` to `pwm_hi`.
inline AccelTrace sine_sweep(const ChannelConfig& config, int pwm_lo, int pwm_hi, int step, int dwell_ms,
                             std::uint64_t seed = 0) {
    if (step <= 0) throw ConfigError("sweep step must be positive");
    if (pwm_hi < pwm_lo) throw ConfigError("sweep range is empty");
    if (dwell_ms <= 0) throw ConfigError("dwell must be positive");
    DriveSchedule sched;
    std::int64_t t = 0;
    for (int pwm = pwm_lo; pwm <= pwm_hi; pwm += step) {
        sched.commands.push_back(DriveCommand{pwm, t, dwell_ms});
        t += dwell_ms;
    }
    sched.total_ms = t;
    return synthesize(sched, config, seed);
}

// ---- text formats -------------------------------------------------------

// Trace CSV: header `t,ax,ay,az`, t in seconds with 6 decimals.
inline void write_trace_csv(std::ostream& os, const AccelTrace& trace) {
    os << "t,ax,ay,az\n";
    char buf[128];
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        const auto& s = trace.samples[k];
        std::snprintf(buf, sizeof buf, "%.6f,%.9g,%.9g,%.9g\n", static_cast<double>(k) / trace.sampling_rate, s[0],
                      s[1], s[2]);
        os << buf;
    }
}

// The sampling rate is recovered from the timestamps (rounded to 0.01 Hz);
// `fallback_rate` is used for traces with fewer than two rows.
inline AccelTrace read_trace_csv(std::istream& is, double fallback_rate = 700.0) {
    AccelTrace out;
    std::vector<double> times;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "t,ax,ay,az") throw ParseError("line " + std::to_string(line_no) + ": expected header t,ax,ay,az");
            header = true;
            continue;
        }
        if (std::count(line.begin(), line.end(), ',') != 3)
            throw ParseError("line " + std::to_string(line_no) + ": expected 4 fields");
        std::array<double, 4> v{};
        std::size_t pos = 0;
        for (std::size_t f = 0; f < 4; ++f) {
            const std::size_t end = f < 3 ? line.find(',', pos) : line.size();
            const std::string field = line.substr(pos, end - pos);
            std::size_t used = 0;
            try {
                v[f] = std::stod(field, &used);
            } catch (const std::exception&) {
                throw ParseError("line " + std::to_string(line_no) + ": bad number '" + field + "'");
            }
            if (used != field.size()) throw ParseError("line " + std::to_string(line_no) + ": bad number '" + field + "'");
            pos = end + 1;
        }
        times.push_back(v[0]);
        out.samples.push_back({v[1], v[2], v[3]});
        if (times.size() >= 2 && !(times.back() > times[times.size() - 2]))
            throw ParseError("line " + std::to_string(line_no) + ": timestamps not increasing");
    }
    if (!header) throw ParseError("line 1: missing header");
    if (times.size() < 2) {
        out.sampling_rate = fallback_rate;
        return out;
    }
    const double span = times.back() - times.front();
    const double rate = std::round(static_cast<double>(times.size() - 1) / span * 100.0) / 100.0;
    const double dt = 1.0 / rate;
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (std::abs(times[k] - times[0] - static_cast<double>(k) * dt) > 2e-6 + 1e-9 * static_cast<double>(k))
            throw ParseError("non-uniform sampling near sample " + std::to_string(k));
    }
    out.sampling_rate = rate;
    return out;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<double> parse_numbers(const std::string& value, std::size_t line_no) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size())
            throw ConfigError("line " + std::to_string(line_no) + ": bad number '" + item + "'");
        out.push_back(v);
    }
    return out;
}

} // namespace detail

// Key-value channel config. One `key = value` per line, `#` starts a
// comment. Unset keys keep their defaults. Keys:
//   sampling_rate, attenuation, placement (top|middle|bottom),
//   noise.white_sigma, noise.drift_amplitude, coupling_gain, axis = x,y,z,
//   motor.{mass_kg,radius_m,omega_base,omega_per_pwm,ramp_up_ms,ramp_down_ms},
//   resonance.{center_pwm,lower_width,upper_width},
//   overtone.<pwm> = f1,f2,a1,a2
inline ChannelConfig read_channel_config(std::istream& is, ChannelConfig base = ChannelConfig::defaults()) {
    ChannelConfig c = std::move(base);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto scalar = [&]() {
            auto v = detail::parse_numbers(value, line_no);
            if (v.size() != 1) throw ConfigError("line " + std::to_string(line_no) + ": expected one number");
            return v[0];
        };
        if (key == "sampling_rate") c.sampling_rate = scalar();
        else if (key == "attenuation") c.attenuation = scalar();
        else if (key == "placement") c.attenuation = attenuation_for(parse_placement(value));
        else if (key == "noise.white_sigma") c.white_sigma = scalar();
        else if (key == "noise.drift_amplitude") c.drift_amplitude = scalar();
        else if (key == "coupling_gain") c.coupling_gain = scalar();
        else if (key == "axis") {
            auto v = detail::parse_numbers(value, line_no);
            if (v.size() != 3) throw ConfigError("line " + std::to_string(line_no) + ": axis needs 3 numbers");
            c.axis = {v[0], v[1], v[2]};
        } else if (key == "motor.mass_kg") c.motor.mass_kg = scalar();
        else if (key == "motor.radius_m") c.motor.radius_m = scalar();
        else if (key == "motor.omega_base") c.motor.omega_base = scalar();
        else if (key == "motor.omega_per_pwm") c.motor.omega_per_pwm = scalar();
        else if (key == "motor.ramp_up_ms") c.motor.ramp_up_ms = scalar();
        else if (key == "motor.ramp_down_ms") c.motor.ramp_down_ms = scalar();
        else if (key == "resonance.center_pwm") c.resonance.center_pwm = scalar();
        else if (key == "resonance.lower_width") c.resonance.lower_width = scalar();
        else if (key == "resonance.upper_width") c.resonance.upper_width = scalar();
        else if (key.rfind("overtone.", 0) == 0) {
            int pwm = 0;
            try {
                pwm = std::stoi(key.substr(9));
            } catch (const std::exception&) {
                throw ConfigError("line " + std::to_string(line_no) + ": bad overtone key '" + key + "'");
            }
            auto v = detail::parse_numbers(value, line_no);
            if (v.size() != 4) throw ConfigError("line " + std::to_string(line_no) + ": overtone needs f1,f2,a1,a2");
            c.overtones[pwm] = Overtones{v[0], v[1], v[2], v[3]};
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    c.validate();
    return c;
}

inline void write_channel_config(std::ostream& os, const ChannelConfig& c) {
    auto num = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    os << "sampling_rate = " << num(c.sampling_rate) << '\n'
       << "attenuation = " << num(c.attenuation) << '\n'
       << "noise.white_sigma = " << num(c.white_sigma) << '\n'
       << "noise.drift_amplitude = " << num(c.drift_amplitude) << '\n'
       << "coupling_gain = " << num(c.coupling_gain) << '\n'
       << "axis = " << num(c.axis[0]) << ", " << num(c.axis[1]) << ", " << num(c.axis[2]) << '\n'
       << "motor.mass_kg = " << num(c.motor.mass_kg) << '\n'
       << "motor.radius_m = " << num(c.motor.radius_m) << '\n'
       << "motor.omega_base = " << num(c.motor.omega_base) << '\n'
       << "motor.omega_per_pwm = " << num(c.motor.omega_per_pwm) << '\n'
       << "motor.ramp_up_ms = " << num(c.motor.ramp_up_ms) << '\n'
       << "motor.ramp_down_ms = " << num(c.motor.ramp_down_ms) << '\n'
       << "resonance.center_pwm = " << num(c.resonance.center_pwm) << '\n'
       << "resonance.lower_width = " << num(c.resonance.lower_width) << '\n'
       << "resonance.upper_width = " << num(c.resonance.upper_width) << '\n';
    for (const auto& [pwm, o] : c.overtones)
        os << "overtone." << pwm << " = " << num(o.f1_hz) << ", " << num(o.f2_hz) << ", " << num(o.a1) << ", "
           << num(o.a2) << '\n';
}

} // namespace skinsense
