#pragma once

// Accelerometer trace -> symbols -> bits.
//
// Stages: STFT spectrogram (128-sample Hann window, hop 4, bins below 40 Hz
// dropped, mean/variance normalised), per-window frequency tracking from the
// two most prominent peaks, run-based symbol separation, and pilot-calibrated
// parameter mapping.

#include "skinsense/channel.hpp"
#include "skinsense/detail/fft.hpp"
#include "skinsense/errors.hpp"
#include "skinsense/framing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace skinsense {

// ---- spectrogram --------------------------------------------------------

struct Spectrogram {
    double sampling_rate = 700.0;
    std::size_t window_size = 128;
    std::size_t hop_samples = 4;
    std::size_t first_bin = 0; // FFT bin index of row 0
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> magnitudes; // column-major: window c occupies [c*rows, (c+1)*rows)

    double bin_hz() const { return sampling_rate / static_cast<double>(window_size); }
    double frequency(std::size_t row) const { return static_cast<double>(first_bin + row) * bin_hz(); }
    double window_start_time(std::size_t col) const {
        return static_cast<double>(col * hop_samples) / sampling_rate;
    }
    double window_step_ms() const { return 1000.0 * static_cast<double>(hop_samples) / sampling_rate; }

    std::span<const double> window(std::size_t col) const { return {magnitudes.data() + col * rows, rows}; }
    double at(std::size_t row, std::size_t col) const { return magnitudes[col * rows + row]; }
};

struct SpectrogramParams {
    std::size_t window_size = 128;
    std::size_t hop_samples = 4;
    double min_hz = 40.0;
};

inline std::size_t window_count(std::size_t n_samples, std::size_t window = 128, std::size_t hop = 4) {
    return n_samples < window ? 0 : (n_samples - window) / hop + 1;
}

// Axes are combined per bin as the L2 norm of the three per-axis spectra,
// which makes the result independent of sensor orientation.
inline Spectrogram spectrogram(const AccelTrace& trace, const SpectrogramParams& params = {}) {
    const std::size_t n = trace.samples.size();
    const std::size_t w = params.window_size;
    if (n < w)
        throw TooShort("trace has " + std::to_string(n) + " samples, need at least " + std::to_string(w));

    Spectrogram s;
    s.sampling_rate = trace.sampling_rate;
    s.window_size = w;
    s.hop_samples = params.hop_samples;
    s.first_bin = static_cast<std::size_t>(std::ceil(params.min_hz / s.bin_hz() - 1e-12));
    const std::size_t last_bin = w / 2;
    s.rows = s.first_bin <= last_bin ? last_bin - s.first_bin + 1 : 0;
    s.cols = window_count(n, w, params.hop_samples);
    s.magnitudes.assign(s.rows * s.cols, 0.0);

    std::array<double, 3> mean{0.0, 0.0, 0.0};
    for (const auto& v : trace.samples)
        for (std::size_t a = 0; a < 3; ++a) mean[a] += v[a];
    for (auto& m : mean) m /= static_cast<double>(n);

    std::vector<double> hann(w);
    for (std::size_t i = 0; i < w; ++i)
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(w));

    const detail::Fft fft(w);
    std::vector<std::complex<double>> xy(w), zz(w);
    for (std::size_t c = 0; c < s.cols; ++c) {
        const std::size_t off = c * params.hop_samples;
        for (std::size_t i = 0; i < w; ++i) {
            const auto& v = trace.samples[off + i];
            xy[i] = {(v[0] - mean[0]) * hann[i], (v[1] - mean[1]) * hann[i]};
            zz[i] = {(v[2] - mean[2]) * hann[i], 0.0};
        }
        fft.forward(xy);
        fft.forward(zz);
        // Two real axes packed as x + iy: |X_k|^2 + |Y_k|^2 = (|Z_k|^2 + |Z_{N-k}|^2) / 2.
        for (std::size_t r = 0; r < s.rows; ++r) {
            const std::size_t k = s.first_bin + r;
            const std::size_t mk = (w - k) % w;
            const double p = 0.5 * (std::norm(xy[k]) + std::norm(xy[mk])) + std::norm(zz[k]);
            s.magnitudes[c * s.rows + r] = std::sqrt(p);
        }
    }

    if (!s.magnitudes.empty()) {
        double mu = 0.0;
        for (double v : s.magnitudes) mu += v;
        mu /= static_cast<double>(s.magnitudes.size());
        double var = 0.0;
        for (double v : s.magnitudes) var += (v - mu) * (v - mu);
        var /= static_cast<double>(s.magnitudes.size());
        const double sd = std::sqrt(var);
        // Rounding residue of a constant input is not signal.
        double peak = 0.0;
        for (const auto& v : trace.samples)
            for (double c : v) peak = std::max(peak, std::abs(c));
        const bool flat = sd <= 1e-12 * peak * static_cast<double>(w);
        for (double& v : s.magnitudes) v = flat ? 0.0 : (v - mu) / sd;
    }
    return s;
}

// ---- frequency tracking -------------------------------------------------

struct TrackerParams {
    double presence_threshold = 3.0; // normalised magnitude units
    double same_order_ratio = 0.1;   // second/first peak ratio for averaging
    std::size_t min_peak_separation = 2;
};

struct FrequencyTrack {
    std::vector<double> y; // Hz per window, 0 where no vibration
    double window_step_ms = 1000.0 * 4.0 / 700.0;
};

struct Peak {
    std::size_t row = 0;
    double magnitude = 0.0;
};

// The two most prominent local maxima of one window, at least
// `min_separation` rows apart. Ties go to the lower frequency.
inline std::pair<std::optional<Peak>, std::optional<Peak>> two_prominent_peaks(std::span<const double> col,
                                                                               std::size_t min_separation = 2) {
    std::optional<Peak> first, second;
    const std::size_t n = col.size();
    auto is_peak = [&](std::size_t k) {
        return (k == 0 || col[k] > col[k - 1]) && (k + 1 == n || col[k] >= col[k + 1]);
    };
    for (std::size_t k = 0; k < n; ++k)
        if (is_peak(k) && (!first || col[k] > first->magnitude)) first = Peak{k, col[k]};
    if (!first) return {};
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t d = k > first->row ? k - first->row : first->row - k;
        if (d >= min_separation && is_peak(k) && (!second || col[k] > second->magnitude)) second = Peak{k, col[k]};
    }
    return {first, second};
}

inline FrequencyTrack track_frequency(const Spectrogram& spec, const TrackerParams& params = {}) {
    FrequencyTrack out;
    out.window_step_ms = spec.window_step_ms();
    out.y.assign(spec.cols, 0.0);
    for (std::size_t c = 0; c < spec.cols; ++c) {
        const auto col = spec.window(c);
        const auto [p1, p2] = two_prominent_peaks(col, params.min_peak_separation);
        if (!p1 || p1->magnitude < params.presence_threshold) continue;
        const double f1 = spec.frequency(p1->row);
        if (p2 && p2->magnitude / p1->magnitude >= params.same_order_ratio)
            out.y[c] = 0.5 * (f1 + spec.frequency(p2->row));
        else
            out.y[c] = f1;
    }
    return out;
}

// ---- symbol separation --------------------------------------------------

struct SymbolEstimate {
    std::size_t start_window = 0;
    std::size_t end_window = 0; // inclusive
    double on_ms = 0.0;
    std::optional<double> off_ms; // gap to the next retained symbol
    double freq_hz = 0.0;         // mean tracked frequency over the active windows

    friend bool operator==(const SymbolEstimate&, const SymbolEstimate&) = default;
};

struct RawSymbolEstimates {
    std::vector<SymbolEstimate> symbols;
    double window_step_ms = 0.0;
};

// A vibration starts at window i when y[i] > 0 and the three preceding
// windows are silent, and ends at i when y[i] > 0 and the three following
// windows are silent (windows outside the track count as silent). ON time is
// the inclusive window count times the step; runs shorter than `min_on_ms`
// are dropped and the gaps around them merge.
inline RawSymbolEstimates separate_symbols(const FrequencyTrack& track, double min_on_ms = 200.0) {
    const auto& y = track.y;
    const std::size_t n = y.size();
    auto silent = [&](std::ptrdiff_t j) { return j < 0 || j >= static_cast<std::ptrdiff_t>(n) || y[static_cast<std::size_t>(j)] == 0.0; };

    std::vector<std::size_t> starts, ends;
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] <= 0.0) continue;
        const auto si = static_cast<std::ptrdiff_t>(i);
        if (silent(si + 1) && silent(si + 2) && silent(si + 3)) ends.push_back(i);
        if (silent(si - 1) && silent(si - 2) && silent(si - 3)) starts.push_back(i);
    }

    RawSymbolEstimates out;
    out.window_step_ms = track.window_step_ms;
    for (std::size_t j = 0; j < starts.size() && j < ends.size(); ++j) {
        SymbolEstimate e;
        e.start_window = starts[j];
        e.end_window = ends[j];
        e.on_ms = static_cast<double>(ends[j] - starts[j] + 1) * track.window_step_ms;
        if (e.on_ms < min_on_ms) continue;
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = starts[j]; i <= ends[j]; ++i) {
            if (y[i] > 0.0) {
                sum += y[i];
                ++cnt;
            }
        }
        e.freq_hz = sum / static_cast<double>(cnt);
        out.symbols.push_back(e);
    }
    if (out.symbols.empty()) throw NoSymbolsFound();
    for (std::size_t j = 0; j + 1 < out.symbols.size(); ++j) {
        const auto gap = out.symbols[j + 1].start_window - out.symbols[j].end_window - 1;
        out.symbols[j].off_ms = static_cast<double>(gap) * track.window_step_ms;
    }
    return out;
}

// ---- pilot-based mapping ------------------------------------------------

// Tracked frequency the channel is expected to produce for each PWM level,
// in profile order. Only the last entry (the level the pilot does not carry)
// is used directly; the others are calibrated from the pilot.
using PwmAnchors = std::array<double, 4>;

inline PwmAnchors nominal_pwm_anchors(const ChannelConfig& config, const EncodingProfile& profile,
                                      double same_order_ratio = 0.1) {
    PwmAnchors a{};
    for (std::size_t i = 0; i < 4; ++i) {
        const Overtones o = config.overtones_at(profile.pwm_levels[i]);
        const double hi = std::max(o.a1, o.a2);
        const double lo = std::min(o.a1, o.a2);
        if (hi > 0 && lo / hi >= same_order_ratio) a[i] = 0.5 * (o.f1_hz + o.f2_hz);
        else a[i] = o.a1 >= o.a2 ? o.f1_hz : o.f2_hz;
    }
    return a;
}

struct PilotOffsets {
    double pwm_hz = 0.0; // mean (estimate - nominal anchor) over the pilot PWMs
    double on_ms = 0.0;
    double off_ms = 0.0;
};

// Reference points used to classify message estimates.
struct PilotCalibration {
    std::array<double, 4> pwm_hz{};
    std::array<double, 2> on_ms{};
    std::array<double, 2> off_ms{};
    PilotOffsets offsets;
};

// Relative tolerance for pilot ON/OFF estimates against nominal values.
constexpr double kPilotTimeTolerance = 0.4;

namespace detail {

template <std::size_t N>
inline std::size_t nearest(const std::array<double, N>& anchors, double v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < N; ++i)
        if (std::abs(v - anchors[i]) < std::abs(v - anchors[best])) best = i;
    return best;
}

inline bool within(double est, double nominal, double tol) { return std::abs(est - nominal) <= tol * nominal; }

} // namespace detail

// Checks the three tail estimates against the nominal pilot shape.
inline bool pilot_matches(std::span<const SymbolEstimate> pilot, const EncodingProfile& profile) {
    if (pilot.size() != 3 || !pilot[0].off_ms || !pilot[1].off_ms) return false;
    const auto nominal = profile.pilot().symbols;
    for (std::size_t i = 0; i < 3; ++i)
        if (!detail::within(pilot[i].on_ms, nominal[i].on_ms, kPilotTimeTolerance)) return false;
    for (std::size_t i = 0; i < 2; ++i)
        if (!detail::within(*pilot[i].off_ms, nominal[i].off_ms, kPilotTimeTolerance)) return false;
    if (!(pilot[1].on_ms > pilot[0].on_ms && pilot[1].on_ms > pilot[2].on_ms)) return false;
    if (!(*pilot[1].off_ms > *pilot[0].off_ms)) return false;
    if (profile.mode == EncodingMode::Full &&
        !(pilot[0].freq_hz < pilot[1].freq_hz && pilot[1].freq_hz < pilot[2].freq_hz))
        return false;
    return true;
}

// Each estimated pilot parameter stands for its nominal value. The top PWM
// level has no pilot symbol; its reference is the nominal anchor shifted by
// the mean pilot frequency offset.
inline PilotCalibration calibrate_from_pilot(std::span<const SymbolEstimate> pilot, const EncodingProfile& profile,
                                             const PwmAnchors& anchors) {
    PilotCalibration cal;
    const auto nominal = profile.pilot().symbols;
    double pwm_off = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        cal.pwm_hz[i] = pilot[i].freq_hz;
        pwm_off += pilot[i].freq_hz - anchors[i];
    }
    pwm_off /= 3.0;
    cal.pwm_hz[3] = anchors[3] + pwm_off;
    cal.offsets.pwm_hz = pwm_off;

    cal.on_ms = {0.5 * (pilot[0].on_ms + pilot[2].on_ms), pilot[1].on_ms};
    cal.offsets.on_ms = 0.0;
    for (std::size_t i = 0; i < 3; ++i) cal.offsets.on_ms += (pilot[i].on_ms - nominal[i].on_ms) / 3.0;

    const double off0 = pilot[0].off_ms.value_or(nominal[0].off_ms);
    const double off1 = pilot[1].off_ms.value_or(nominal[1].off_ms);
    cal.off_ms = {off0, off1};
    cal.offsets.off_ms = 0.5 * ((off0 - nominal[0].off_ms) + (off1 - nominal[1].off_ms));
    return cal;
}

// Calibration from nominal values only, for streams too short to carry a pilot.
inline PilotCalibration nominal_calibration(const EncodingProfile& profile, const PwmAnchors& anchors) {
    PilotCalibration cal;
    cal.pwm_hz = anchors;
    cal.on_ms = {static_cast<double>(profile.on_ms[0]), static_cast<double>(profile.on_ms[1])};
    cal.off_ms = {static_cast<double>(profile.off_ms[0]), static_cast<double>(profile.off_ms[1])};
    return cal;
}

// Each estimate maps to the closest reference, which is the midpoint rule
// between consecutive references.
inline Symbol classify(const SymbolEstimate& e, const PilotCalibration& cal, const EncodingProfile& profile) {
    Symbol s;
    s.pwm = profile.mode == EncodingMode::Full ? profile.pwm_levels[detail::nearest(cal.pwm_hz, e.freq_hz)]
                                               : profile.fixed_pwm;
    s.on_ms = profile.on_ms[detail::nearest(cal.on_ms, e.on_ms)];
    s.off_ms = e.off_ms ? profile.off_ms[detail::nearest(cal.off_ms, *e.off_ms)] : profile.off_ms[0];
    return s;
}

struct MappedSymbols {
    std::vector<Symbol> message;
    PilotOffsets offsets;
};

// Treats the final three estimates as the pilot and maps the rest.
inline MappedSymbols map_with_pilot(const RawSymbolEstimates& est, const EncodingProfile& profile,
                                    const PwmAnchors& anchors) {
    const auto& s = est.symbols;
    if (s.size() < 3) throw PilotNotFound("need at least 3 symbols for the pilot, got " + std::to_string(s.size()));
    const std::span<const SymbolEstimate> pilot(s.data() + s.size() - 3, 3);
    if (!pilot_matches(pilot, profile)) throw PilotNotFound("tail symbols do not match the pilot");
    const PilotCalibration cal = calibrate_from_pilot(pilot, profile, anchors);
    MappedSymbols out;
    out.offsets = cal.offsets;
    for (std::size_t i = 0; i + 3 < s.size(); ++i) out.message.push_back(classify(s[i], cal, profile));
    return out;
}

// ---- full pipeline ------------------------------------------------------

enum class DecodeFlag : unsigned {
    None = 0,
    LengthMismatch = 1u << 0,
    PilotNotFound = 1u << 1,
    NoSymbolsFound = 1u << 2,
};

struct DecoderOptions {
    SpectrogramParams spectrogram;
    TrackerParams tracker;
    double min_on_ms = 200.0;
    std::optional<std::size_t> expected_bits;
};

struct DecodeResult {
    BitMessage bits;
    std::vector<Symbol> symbols; // message symbols, pilot stripped
    RawSymbolEstimates estimates;
    PilotOffsets pilot_offsets;
    unsigned flags = 0;

    bool has(DecodeFlag f) const { return (flags & static_cast<unsigned>(f)) != 0; }
    void set(DecodeFlag f) { flags |= static_cast<unsigned>(f); }
    bool ok() const { return flags == 0; }
};

// Stage failures become flags; whatever could be decoded is returned.
inline DecodeResult decode(const AccelTrace& trace, const EncodingProfile& profile, const PwmAnchors& anchors,
                           const DecoderOptions& options = {}) {
    DecodeResult r;
    try {
        const Spectrogram spec = spectrogram(trace, options.spectrogram);
        const FrequencyTrack track = track_frequency(spec, options.tracker);
        r.estimates = separate_symbols(track, options.min_on_ms);
    } catch (const TooShort&) {
        r.set(DecodeFlag::NoSymbolsFound);
    } catch (const NoSymbolsFound&) {
        r.set(DecodeFlag::NoSymbolsFound);
    }

    const auto& s = r.estimates.symbols;
    if (s.size() >= 3) {
        const std::span<const SymbolEstimate> pilot(s.data() + s.size() - 3, 3);
        if (!pilot_matches(pilot, profile)) r.set(DecodeFlag::PilotNotFound);
        const PilotCalibration cal = calibrate_from_pilot(pilot, profile, anchors);
        r.pilot_offsets = cal.offsets;
        for (std::size_t i = 0; i + 3 < s.size(); ++i) r.symbols.push_back(classify(s[i], cal, profile));
    } else if (!r.has(DecodeFlag::NoSymbolsFound)) {
        r.set(DecodeFlag::PilotNotFound);
        const PilotCalibration cal = nominal_calibration(profile, anchors);
        for (const auto& e : s) r.symbols.push_back(classify(e, cal, profile));
    }

    r.bits = decode_symbols(r.symbols, profile);
    if (options.expected_bits) {
        const std::size_t word = profile.bits_per_symbol();
        const std::size_t expected_symbols = (*options.expected_bits + word - 1) / word;
        if (r.symbols.size() != expected_symbols) r.set(DecodeFlag::LengthMismatch);
        else r.bits = r.bits.prefix(*options.expected_bits);
    }
    return r;
}

inline DecodeResult decode(const AccelTrace& trace, const EncodingProfile& profile, const ChannelConfig& config,
                           const DecoderOptions& options = {}) {
    return decode(trace, profile, nominal_pwm_anchors(config, profile, options.tracker.same_order_ratio), options);
}

inline std::string flags_to_string(unsigned flags) {
    if (flags == 0) return "none";
    std::string s;
    auto add = [&](DecodeFlag f, const char* name) {
        if (flags & static_cast<unsigned>(f)) {
            if (!s.empty()) s += ',';
            s += name;
        }
    };
    add(DecodeFlag::LengthMismatch, "LengthMismatch");
    add(DecodeFlag::PilotNotFound, "PilotNotFound");
    add(DecodeFlag::NoSymbolsFound, "NoSymbolsFound");
    return s;
}

// Structured text, one `key: value` per line; see README for the fields.
inline void write_decode_result(std::ostream& os, const DecodeResult& r) {
    char buf[256];
    os << "bits: " << r.bits.to_string() << '\n';
    os << "bit_count: " << r.bits.size() << '\n';
    os << "flags: " << flags_to_string(r.flags) << '\n';
    os << "symbol_count: " << r.symbols.size() << '\n';
    os << "symbols:";
    for (const auto& s : r.symbols) os << ' ' << s.pwm << '/' << s.on_ms << '/' << s.off_ms;
    os << '\n';
    std::snprintf(buf, sizeof buf, "pilot_offset_pwm_hz: %.3f\npilot_offset_on_ms: %.3f\npilot_offset_off_ms: %.3f\n",
                  r.pilot_offsets.pwm_hz, r.pilot_offsets.on_ms, r.pilot_offsets.off_ms);
    os << buf;
    os << "estimate_count: " << r.estimates.symbols.size() << '\n';
    for (std::size_t i = 0; i < r.estimates.symbols.size(); ++i) {
        const auto& e = r.estimates.symbols[i];
        if (e.off_ms)
            std::snprintf(buf, sizeof buf, "estimate: %zu start=%zu end=%zu on_ms=%.2f off_ms=%.2f freq_hz=%.2f\n", i,
                          e.start_window, e.end_window, e.on_ms, *e.off_ms, e.freq_hz);
        else
            std::snprintf(buf, sizeof buf, "estimate: %zu start=%zu end=%zu on_ms=%.2f off_ms=- freq_hz=%.2f\n", i,
                          e.start_window, e.end_window, e.on_ms, e.freq_hz);
        os << buf;
    }
}

} // namespace skinsense
