#pragma once

// Error metrics and the experiment harness: BER, bit rate, symbol confusion,
// failed-transmission detection with retransmission, and parameter sweeps.

#include "skinsense/channel.hpp"
#include "skinsense/demodulator.hpp"
#include "skinsense/errors.hpp"
#include "skinsense/framing.hpp"
#include "skinsense/modulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace skinsense {

// Unit-cost Levenshtein distance.
inline std::size_t edit_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1] ? 1 : 0);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Bit errors between what was sent and what came back. Equal lengths use the
// Hamming distance; otherwise the edit distance.
inline std::size_t bit_errors(const BitMessage& sent, const BitMessage& received) {
    if (sent.size() == received.size()) {
        std::size_t d = 0;
        for (std::size_t i = 0; i < sent.size(); ++i) d += sent[i] != received[i];
        return d;
    }
    return edit_distance(sent.bits(), received.bits());
}

inline double bit_error_rate(const BitMessage& sent, const BitMessage& received) {
    if (sent.empty()) return received.empty() ? 0.0 : 1.0;
    const double ber = static_cast<double>(bit_errors(sent, received)) / static_cast<double>(sent.size());
    return std::min(ber, 1.0);
}

inline double bit_rate(std::size_t payload_bits, double duration_s) {
    if (payload_bits == 0) return 0.0;
    if (!(duration_s > 0)) throw std::invalid_argument("duration must be positive");
    return static_cast<double>(payload_bits) / duration_s;
}

// Payload airtime: ON + OFF of the message symbols, pilot excluded.
inline double payload_seconds(std::span<const Symbol> message_symbols) {
    std::int64_t ms = 0;
    for (const auto& s : message_symbols) ms += s.on_ms + s.off_ms;
    return static_cast<double>(ms) / 1000.0;
}

// ---- confusion ----------------------------------------------------------

// Classes 0-3: PWM levels, 4-5: ON values, 6-7: OFF values (profile order).
// Counts are [sent][received]; only the three diagonal blocks are populated.
struct ConfusionMatrix {
    std::array<std::array<std::uint64_t, 8>, 8> counts{};

    std::uint64_t row_sum(std::size_t i) const {
        std::uint64_t s = 0;
        for (auto v : counts[i]) s += v;
        return s;
    }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        for (std::size_t i = 0; i < 8; ++i)
            for (std::size_t j = 0; j < 8; ++j) counts[i][j] += o.counts[i][j];
        return *this;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ModeErrors {
    double pwm = 0.0;
    double on = 0.0;
    double off = 0.0;
};

inline ConfusionMatrix confusion_matrix(std::span<const Symbol> sent, std::span<const Symbol> received,
                                        const EncodingProfile& profile = EncodingProfile::full()) {
    if (sent.size() != received.size()) throw std::invalid_argument("confusion matrix needs aligned symbol sequences");
    ConfusionMatrix m;
    auto tally = [&](int base, int s, int r) {
        if (s >= 0 && r >= 0) ++m.counts[static_cast<std::size_t>(base + s)][static_cast<std::size_t>(base + r)];
    };
    for (std::size_t i = 0; i < sent.size(); ++i) {
        tally(0, detail::index_of(profile.pwm_levels, sent[i].pwm), detail::index_of(profile.pwm_levels, received[i].pwm));
        tally(4, detail::index_of(profile.on_ms, sent[i].on_ms), detail::index_of(profile.on_ms, received[i].on_ms));
        tally(6, detail::index_of(profile.off_ms, sent[i].off_ms), detail::index_of(profile.off_ms, received[i].off_ms));
    }
    return m;
}

// Per-mode error rates recomputed from the matrix blocks.
inline ModeErrors mode_errors(const ConfusionMatrix& m) {
    auto block = [&](std::size_t lo, std::size_t hi) {
        std::uint64_t total = 0, wrong = 0;
        for (std::size_t i = lo; i < hi; ++i)
            for (std::size_t j = lo; j < hi; ++j) {
                total += m.counts[i][j];
                if (i != j) wrong += m.counts[i][j];
            }
        return total == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(total);
    };
    return {block(0, 4), block(4, 6), block(6, 8)};
}

// Per-class error rate: off-diagonal share of each row.
inline std::array<double, 8> symbol_error_rates(const ConfusionMatrix& m) {
    std::array<double, 8> out{};
    for (std::size_t i = 0; i < 8; ++i) {
        const auto total = m.row_sum(i);
        out[i] = total == 0 ? 0.0 : static_cast<double>(total - m.counts[i][i]) / static_cast<double>(total);
    }
    return out;
}

// Fixed-length protocol: a transmission failed when the bit count is off.
inline bool detect_failed(std::size_t expected_bits, const DecodeResult& result) {
    return result.bits.size() != expected_bits;
}

// ---- single trial -------------------------------------------------------

struct FaultPolicy {
    // Probability that the first transmission of a message loses one
    // message symbol. Retransmissions are clean.
    double deletion_rate = 0.0;
};

struct TrialSpec {
    EncodingProfile profile = EncodingProfile::full();
    ChannelConfig channel = ChannelConfig::defaults();
    std::optional<double> receiver_rate; // resample before decoding
    std::shared_ptr<const AccelTrace> noise_trace;
    std::size_t message_bits = 128;
    FaultPolicy faults;
    bool retransmit = false;
    int max_retries = 3;
    std::int64_t capture_margin_ms = 200; // silence recorded before and after
    DecoderOptions decoder;
};

// Decoder settings matched to a profile: the short-pulse cut sits at 80% of
// the shortest ON value (200 ms for the standard 250 ms).
inline DecoderOptions decoder_options_for(const EncodingProfile& profile) {
    DecoderOptions o;
    o.min_on_ms = 0.8 * profile.min_on_ms();
    return o;
}

struct Attempt {
    std::uint64_t channel_seed = 0;
    bool fault_injected = false;
    bool failed = false;
    unsigned flags = 0;
};

struct TrialOutcome {
    std::uint64_t seed = 0;
    BitMessage sent;
    BitMessage received;
    std::vector<Symbol> sent_symbols;     // message symbols, pilot excluded
    std::vector<Symbol> received_symbols; // from the final attempt
    std::vector<Attempt> attempts;
    std::size_t bit_errors = 0;
    double ber = 0.0;
    double bit_rate_bps = 0.0;
    unsigned flags = 0; // final attempt
    bool accepted = false;

    int retransmissions() const { return attempts.empty() ? 0 : static_cast<int>(attempts.size()) - 1; }
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline BitMessage random_message(std::size_t n_bits, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed, 0x6d657373));
    std::vector<std::uint8_t> bits(n_bits);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
    return BitMessage(std::move(bits));
}

// One transmission through the simulated channel.
inline DecodeResult transmit(const DriveSchedule& sched, const TrialSpec& spec, std::uint64_t channel_seed,
                             std::size_t expected_bits) {
    const DriveSchedule captured = with_margins(sched, spec.capture_margin_ms, spec.capture_margin_ms);
    AccelTrace trace = synthesize(captured, spec.channel, channel_seed);
    if (spec.noise_trace) trace = superimpose(trace, *spec.noise_trace);
    if (spec.receiver_rate) trace = resample(trace, *spec.receiver_rate);
    DecoderOptions opts = spec.decoder;
    opts.expected_bits = expected_bits;
    return decode(trace, spec.profile, spec.channel, opts);
}

// Sends one random message; with `retransmit`, a length mismatch triggers up
// to `max_retries` further attempts.
inline TrialOutcome run_trial(const TrialSpec& spec, std::uint64_t seed) {
    TrialOutcome out;
    out.seed = seed;
    out.sent = random_message(spec.message_bits, seed);
    const std::vector<Symbol> symbols = encode(out.sent, spec.profile);
    out.sent_symbols = strip_pilot(symbols);
    const DriveSchedule sched = schedule(symbols);
    out.bit_rate_bps = bit_rate(out.sent.size(), payload_seconds(out.sent_symbols));

    std::mt19937_64 fault_rng(mix_seed(seed, 0x6661756c));
    const int max_attempts = spec.retransmit ? 1 + std::max(0, spec.max_retries) : 1;
    DecodeResult result;
    for (int a = 0; a < max_attempts; ++a) {
        Attempt att;
        att.channel_seed = mix_seed(seed, 0x6368616e + static_cast<std::uint64_t>(a));
        DriveSchedule sent = sched;
        if (a == 0 && spec.faults.deletion_rate > 0) {
            std::bernoulli_distribution inject(std::min(1.0, spec.faults.deletion_rate));
            if (inject(fault_rng) && !out.sent_symbols.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, out.sent_symbols.size() - 1);
                sent = without_command(sched, pick(fault_rng));
                att.fault_injected = true;
            }
        }
        result = transmit(sent, spec, att.channel_seed, out.sent.size());
        att.failed = detect_failed(out.sent.size(), result);
        att.flags = result.flags;
        out.attempts.push_back(att);
        if (!att.failed) break;
    }
    out.received = result.bits;
    out.received_symbols = result.symbols;
    out.flags = result.flags;
    out.accepted = !out.attempts.back().failed;
    out.bit_errors = bit_errors(out.sent, out.received);
    out.ber = bit_error_rate(out.sent, out.received);
    return out;
}

// ---- sweeps -------------------------------------------------------------

struct SweepCell {
    double white_sigma = 0.0;
    std::optional<Placement> placement;
    double rate_hz = 700.0; // receiver rate
    double time_scale = 1.0;
    EncodingMode mode = EncodingMode::Full;
};

struct ExperimentSpec {
    ChannelConfig channel = ChannelConfig::defaults();
    EncodingMode mode = EncodingMode::Full;
    std::size_t messages = 10;
    std::size_t message_bits = 128;
    std::uint64_t seed = 1;
    bool retransmit = false;
    double fault_rate = 0.0;
    std::shared_ptr<const AccelTrace> noise_trace;
    // Grid axes; an empty axis means "use the base value".
    std::vector<double> noise_sigma;
    std::vector<Placement> placement;
    std::vector<double> rate_hz;
    std::vector<double> time_scale;

    std::vector<SweepCell> cells() const {
        const std::vector<double> sig = noise_sigma.empty() ? std::vector<double>{channel.white_sigma} : noise_sigma;
        const std::vector<double> rates = rate_hz.empty() ? std::vector<double>{channel.sampling_rate} : rate_hz;
        const std::vector<double> scales = time_scale.empty() ? std::vector<double>{1.0} : time_scale;
        std::vector<std::optional<Placement>> places;
        if (placement.empty()) places.push_back(std::nullopt);
        for (auto p : placement) places.push_back(p);
        std::vector<SweepCell> out;
        for (double s : sig)
            for (const auto& p : places)
                for (double r : rates)
                    for (double t : scales) out.push_back(SweepCell{s, p, r, t, mode});
        return out;
    }
};

// Aggregate over the messages of one sweep cell.
struct TrialReport {
    SweepCell cell;
    std::size_t messages = 0;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0; // bit_errors / bits
    double ber_mean = 0.0;
    double ber_std = 0.0;
    double ber_p50 = 0.0;
    double ber_p90 = 0.0;
    double ber_p95 = 0.0;
    double bit_rate_bps = 0.0; // mean payload rate
    std::uint64_t failed = 0;   // attempts flagged by length mismatch
    std::uint64_t retransmissions = 0;
    std::uint64_t accepted = 0;
    ConfusionMatrix confusion;
    ModeErrors mode_errors;
};

struct TrialRecord {
    std::size_t trial = 0;
    std::size_t cell = 0;
    std::uint64_t seed = 0;
    double ber = 0.0;
    double bit_rate_bps = 0.0;
    unsigned flags = 0;
};

struct SweepReport {
    std::vector<TrialReport> cells;
    std::vector<TrialRecord> trials;
};

inline TrialSpec trial_spec_for(const ExperimentSpec& exp, const SweepCell& cell) {
    TrialSpec t;
    t.profile = cell.mode == EncodingMode::Full ? EncodingProfile::full() : EncodingProfile::time_only();
    if (cell.time_scale != 1.0) t.profile = t.profile.scaled(cell.time_scale);
    t.channel = exp.channel;
    t.channel.white_sigma = cell.white_sigma;
    if (cell.placement) t.channel.attenuation = attenuation_for(*cell.placement);
    if (cell.rate_hz < t.channel.sampling_rate) t.receiver_rate = cell.rate_hz;
    t.noise_trace = exp.noise_trace;
    t.message_bits = exp.message_bits;
    t.faults.deletion_rate = exp.fault_rate;
    t.retransmit = exp.retransmit;
    t.decoder = decoder_options_for(t.profile);
    return t;
}

// Nearest-rank percentile of a sorted sample.
inline double percentile(std::span<const double> sorted, double p) {
    if (sorted.empty()) return 0.0;
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
    return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

inline TrialReport aggregate(const SweepCell& cell, std::span<const TrialOutcome> outcomes,
                             const EncodingProfile& profile) {
    TrialReport r;
    r.cell = cell;
    r.messages = outcomes.size();
    std::vector<double> bers;
    double rate_sum = 0.0;
    for (const auto& o : outcomes) {
        r.bits += o.sent.size();
        r.bit_errors += o.bit_errors;
        bers.push_back(o.ber);
        rate_sum += o.bit_rate_bps;
        for (const auto& a : o.attempts) r.failed += a.failed;
        r.retransmissions += static_cast<std::uint64_t>(o.retransmissions());
        r.accepted += o.accepted;
        if (o.sent_symbols.size() == o.received_symbols.size())
            r.confusion += confusion_matrix(o.sent_symbols, o.received_symbols, profile);
    }
    if (!outcomes.empty()) {
        const double n = static_cast<double>(outcomes.size());
        r.ber = r.bits == 0 ? 0.0 : static_cast<double>(r.bit_errors) / static_cast<double>(r.bits);
        double sum = 0.0;
        for (double b : bers) sum += b;
        r.ber_mean = sum / n;
        double ss = 0.0;
        for (double b : bers) ss += (b - r.ber_mean) * (b - r.ber_mean);
        r.ber_std = std::sqrt(ss / n);
        std::sort(bers.begin(), bers.end());
        r.ber_p50 = percentile(bers, 50);
        r.ber_p90 = percentile(bers, 90);
        r.ber_p95 = percentile(bers, 95);
        r.bit_rate_bps = rate_sum / n;
    }
    r.mode_errors = mode_errors(r.confusion);
    return r;
}

// Message i of every cell uses seed `seed + i`, so cells see the same
// messages and channel draws and differ only in their parameters.
inline SweepReport run_sweep(const ExperimentSpec& exp) {
    SweepReport report;
    const auto cells = exp.cells();
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const TrialSpec spec = trial_spec_for(exp, cells[c]);
        std::vector<TrialOutcome> outcomes;
        outcomes.reserve(exp.messages);
        for (std::size_t i = 0; i < exp.messages; ++i) {
            const std::uint64_t seed = exp.seed + i;
            outcomes.push_back(run_trial(spec, seed));
            const auto& o = outcomes.back();
            report.trials.push_back(TrialRecord{i, c, seed, o.ber, o.bit_rate_bps, o.flags});
        }
        report.cells.push_back(aggregate(cells[c], outcomes, spec.profile));
    }
    return report;
}

// ---- report I/O ---------------------------------------------------------

inline void write_sweep_report(std::ostream& os, const SweepReport& report) {
    char buf[256];
    os << "cells: " << report.cells.size() << '\n';
    for (std::size_t c = 0; c < report.cells.size(); ++c) {
        const auto& r = report.cells[c];
        os << "cell: " << c << '\n';
        std::snprintf(buf, sizeof buf, "  noise_sigma: %.6g\n  placement: %s\n  rate_hz: %.6g\n  time_scale: %.6g\n",
                      r.cell.white_sigma, r.cell.placement ? to_string(*r.cell.placement) : "config",
                      r.cell.rate_hz, r.cell.time_scale);
        os << buf;
        os << "  mode: " << (r.cell.mode == EncodingMode::Full ? "full" : "time-only") << '\n';
        os << "  messages: " << r.messages << '\n';
        os << "  bits: " << r.bits << '\n';
        os << "  bit_errors: " << r.bit_errors << '\n';
        std::snprintf(buf, sizeof buf,
                      "  ber: %.6f\n  ber_mean: %.6f\n  ber_std: %.6f\n  ber_p50: %.6f\n  ber_p90: %.6f\n"
                      "  ber_p95: %.6f\n  bit_rate_bps: %.4f\n",
                      r.ber, r.ber_mean, r.ber_std, r.ber_p50, r.ber_p90, r.ber_p95, r.bit_rate_bps);
        os << buf;
        os << "  failed: " << r.failed << '\n';
        os << "  retransmissions: " << r.retransmissions << '\n';
        os << "  accepted: " << r.accepted << '\n';
        std::snprintf(buf, sizeof buf, "  mode_error_pwm: %.6f\n  mode_error_on: %.6f\n  mode_error_off: %.6f\n",
                      r.mode_errors.pwm, r.mode_errors.on, r.mode_errors.off);
        os << buf;
        for (std::size_t i = 0; i < 8; ++i) {
            os << "  confusion_" << (i + 1) << ':';
            for (auto v : r.confusion.counts[i]) os << ' ' << v;
            os << '\n';
        }
    }
}

// Per-trial CSV: `trial,seed,ber,bit_rate_bps,flags`.
inline void write_trial_csv(std::ostream& os, const SweepReport& report) {
    os << "trial,seed,ber,bit_rate_bps,flags\n";
    char buf[160];
    for (std::size_t k = 0; k < report.trials.size(); ++k) {
        const auto& t = report.trials[k];
        std::snprintf(buf, sizeof buf, "%zu,%llu,%.6f,%.4f,", k, static_cast<unsigned long long>(t.seed), t.ber,
                      t.bit_rate_bps);
        os << buf << flags_to_string(t.flags) << '\n';
    }
}

inline AccelTrace load_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open trace file " + path.string());
    return read_trace_csv(in);
}

inline ChannelConfig load_channel_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open channel config " + path.string());
    return read_channel_config(in);
}

// Key-value experiment file, same syntax as the channel config. Keys:
//   channel (path), noise_trace (path), mode (full|time-only), messages,
//   message_bits, seed, retransmit (0|1), fault_rate,
//   grid.noise_sigma, grid.placement, grid.rate, grid.time_scale (lists).
// Relative paths resolve against `base_dir`.
inline ExperimentSpec read_experiment_spec(std::istream& is, const std::filesystem::path& base_dir = ".") {
    ExperimentSpec e;
    std::string raw;
    std::size_t line_no = 0;
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    while (std::getline(is, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto nums = [&]() { return detail::parse_numbers(value, line_no); };
        auto scalar = [&]() {
            auto v = nums();
            if (v.size() != 1) throw ConfigError("line " + std::to_string(line_no) + ": expected one number");
            return v[0];
        };
        auto count = [&]() {
            const double v = scalar();
            if (v < 0 || v != std::floor(v)) throw ConfigError("line " + std::to_string(line_no) + ": expected a count");
            return static_cast<std::uint64_t>(v);
        };
        if (key == "channel") {
            e.channel = load_channel_config(resolve(value));
        } else if (key == "noise_trace") {
            e.noise_trace = std::make_shared<const AccelTrace>(load_trace_file(resolve(value)));
        } else if (key == "mode") {
            if (value == "full") e.mode = EncodingMode::Full;
            else if (value == "time-only") e.mode = EncodingMode::TimeOnly;
            else throw ConfigError("line " + std::to_string(line_no) + ": unknown mode '" + value + "'");
        } else if (key == "messages") e.messages = count();
        else if (key == "message_bits") {
            e.message_bits = count();
            if (e.message_bits == 0) throw ConfigError("line " + std::to_string(line_no) + ": message_bits must be > 0");
        } else if (key == "seed") e.seed = count();
        else if (key == "retransmit") e.retransmit = scalar() != 0.0;
        else if (key == "fault_rate") e.fault_rate = scalar();
        else if (key == "grid.noise_sigma") e.noise_sigma = nums();
        else if (key == "grid.rate") e.rate_hz = nums();
        else if (key == "grid.time_scale") e.time_scale = nums();
        else if (key == "grid.placement") {
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ',')) e.placement.push_back(parse_placement(detail::trim(item)));
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    for (double r : e.rate_hz)
        if (!(r > 0) || r > e.channel.sampling_rate)
            throw ConfigError("grid.rate values must be in (0, channel sampling_rate]");
    for (double t : e.time_scale)
        if (!(t > 0)) throw ConfigError("grid.time_scale values must be positive");
    return e;
}

} // namespace skinsense
