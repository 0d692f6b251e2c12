// skinsense: encode, simulate, decode and evaluate vibration transmissions.
//
//   skinsense encode   --bits 1011... | --hex c3 | --ascii 5926   -> schedule CSV
//   skinsense simulate --schedule s.csv [--channel c.cfg] [--seed N]  -> trace CSV
//   skinsense decode   --trace t.csv [--expected-len N]            -> key: value text
//   skinsense evaluate --sent BITS --received BITS                  -> BER
//   skinsense roundtrip / demo / sweep
//
// Exit codes: 0 ok, 1 other error, 2 bad input, 3 bad config, 4 decode flagged.

#include "skinsense/skinsense.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

using namespace skinsense;

namespace {

enum Exit { kOk = 0, kOther = 1, kParse = 2, kConfig = 3, kDecodeFlagged = 4 };

struct MessageArgs {
    std::string bits, hex, ascii;

    void add(CLI::App* app) {
        auto* g = app->add_option_group("message");
        g->add_option("--bits", bits, "Message as a 0/1 string");
        g->add_option("--hex", hex, "Message as hex digits");
        g->add_option("--ascii", ascii, "Message as ASCII text, 8 bits per char");
        g->require_option(1);
    }

    BitMessage get() const {
        if (!bits.empty()) return BitMessage::from_string(bits);
        if (!hex.empty()) return BitMessage::from_hex(hex);
        return BitMessage::from_ascii(ascii);
    }
};

struct ChannelArgs {
    std::string channel;
    std::string noise;
    std::uint64_t seed = 1;
    std::optional<double> rate;
    std::optional<double> white_sigma;
    std::int64_t margin_ms = 200;

    void add(CLI::App* app) {
        app->add_option("--channel", channel, "Channel config file (key = value)");
        app->add_option("--noise", noise, "Recorded noise trace CSV to superimpose");
        app->add_option("--seed", seed, "Channel RNG seed");
        app->add_option("--rate", rate, "Receiver sampling rate in Hz (resampled down)")->check(CLI::PositiveNumber);
        app->add_option("--sigma", white_sigma, "Override white-noise sigma")->check(CLI::NonNegativeNumber);
        app->add_option("--margin", margin_ms, "Silence recorded before and after the schedule, ms")
            ->check(CLI::NonNegativeNumber);
    }

    ChannelConfig config() const {
        ChannelConfig c = channel.empty() ? ChannelConfig::defaults() : load_channel_config(channel);
        if (white_sigma) c.white_sigma = *white_sigma;
        return c;
    }

    AccelTrace run(const DriveSchedule& sched, const ChannelConfig& cfg) const {
        AccelTrace t = synthesize(with_margins(sched, margin_ms, margin_ms), cfg, seed);
        if (!noise.empty()) t = superimpose(t, load_trace_file(noise));
        if (rate) t = resample(t, *rate);
        return t;
    }
};

EncodingProfile profile_named(const std::string& name) {
    return name == "time-only" ? EncodingProfile::time_only() : EncodingProfile::full();
}

void add_profile(CLI::App* app, std::string& profile) {
    app->add_option("--profile", profile, "Encoding profile")->check(CLI::IsMember({"full", "time-only"}));
}

// Writes to `path`, or stdout when empty or "-".
template <class F>
void with_output(const std::string& path, F&& write) {
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    write(out);
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return in;
}

void print_roundtrip(const BitMessage& sent, const DecodeResult& r, const EncodingProfile& profile) {
    const auto symbols = strip_pilot(encode(sent, profile));
    std::printf("sent: %s\n", sent.to_string().c_str());
    std::printf("received: %s\n", r.bits.to_string().c_str());
    std::printf("flags: %s\n", flags_to_string(r.flags).c_str());
    std::printf("bit_errors: %zu\n", bit_errors(sent, r.bits));
    std::printf("ber: %.6f\n", bit_error_rate(sent, r.bits));
    std::printf("bit_rate_bps: %.4f\n", bit_rate(sent.size(), payload_seconds(symbols)));
    std::printf("airtime_s: %.3f\n", static_cast<double>(duration_ms(schedule(encode(sent, profile)))) / 1000.0);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vibration modem: encode, simulate, decode and evaluate"};
    app.require_subcommand(1);

    // encode
    auto* enc = app.add_subcommand("encode", "Bits to a motor drive schedule (CSV)");
    MessageArgs enc_msg;
    std::string enc_profile = "full", enc_out;
    bool enc_symbols = false;
    enc_msg.add(enc);
    add_profile(enc, enc_profile);
    enc->add_option("-o,--out", enc_out, "Output file (default stdout)");
    enc->add_flag("--symbols", enc_symbols, "List symbols as pwm/on/off instead of the schedule");

    // simulate
    auto* sim = app.add_subcommand("simulate", "Schedule to accelerometer trace (CSV)");
    std::string sim_schedule, sim_out;
    ChannelArgs sim_ch;
    sim->add_option("--schedule", sim_schedule, "Schedule CSV")->required();
    sim->add_option("-o,--out", sim_out, "Output file (default stdout)");
    sim_ch.add(sim);

    // decode
    auto* dec = app.add_subcommand("decode", "Accelerometer trace to bits");
    std::string dec_trace, dec_profile = "full", dec_channel, dec_out;
    std::optional<std::size_t> dec_expected;
    dec->add_option("--trace", dec_trace, "Trace CSV")->required();
    dec->add_option("--channel", dec_channel, "Channel config used for the nominal PWM anchors");
    dec->add_option("--expected-len", dec_expected, "Expected message length in bits");
    dec->add_option("-o,--out", dec_out, "Output file (default stdout)");
    add_profile(dec, dec_profile);

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "Bit error rate between two bit strings");
    std::string eva_sent, eva_recv;
    eva->add_option("--sent", eva_sent, "Transmitted bits")->required();
    eva->add_option("--received", eva_recv, "Decoded bits")->required();

    // roundtrip
    auto* rt = app.add_subcommand("roundtrip", "Encode, simulate and decode one message");
    MessageArgs rt_msg;
    ChannelArgs rt_ch;
    std::string rt_profile = "full";
    rt_msg.add(rt);
    rt_ch.add(rt);
    add_profile(rt, rt_profile);

    // demo
    auto* demo = app.add_subcommand("demo", "Send a PIN over the default channel");
    std::string demo_pin = "5926";
    std::uint64_t demo_seed = 1;
    demo->add_option("--pin", demo_pin, "PIN or password, sent as ASCII");
    demo->add_option("--seed", demo_seed, "Channel RNG seed");

    // sweep
    auto* sw = app.add_subcommand("sweep", "Run an experiment grid from a spec file");
    std::string sw_spec, sw_out, sw_trials;
    std::optional<std::size_t> sw_messages;
    sw->add_option("--spec", sw_spec, "Experiment spec file")->required()->check(CLI::ExistingFile);
    sw->add_option("-o,--out", sw_out, "Report output (default stdout)");
    sw->add_option("--trials-csv", sw_trials, "Per-trial CSV output");
    sw->add_option("--messages", sw_messages, "Override the message count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kParse;
    }

    try {
        if (*enc) {
            const auto p = profile_named(enc_profile);
            const auto symbols = encode(enc_msg.get(), p);
            with_output(enc_out, [&](std::ostream& os) {
                if (enc_symbols) {
                    for (const auto& s : symbols) os << s.pwm << '/' << s.on_ms << '/' << s.off_ms << '\n';
                } else {
                    write_schedule_csv(os, schedule(symbols));
                }
            });
        } else if (*sim) {
            auto in = open_input(sim_schedule);
            const auto sched = read_schedule_csv(in);
            const auto trace = sim_ch.run(sched, sim_ch.config());
            with_output(sim_out, [&](std::ostream& os) { write_trace_csv(os, trace); });
        } else if (*dec) {
            const auto cfg = dec_channel.empty() ? ChannelConfig::defaults() : load_channel_config(dec_channel);
            const auto profile = profile_named(dec_profile);
            auto in = open_input(dec_trace);
            const auto trace = read_trace_csv(in);
            DecoderOptions opts = decoder_options_for(profile);
            opts.expected_bits = dec_expected;
            const auto r = decode(trace, profile, cfg, opts);
            with_output(dec_out, [&](std::ostream& os) { write_decode_result(os, r); });
            if (!r.ok()) {
                std::fprintf(stderr, "decode: %s\n", flags_to_string(r.flags).c_str());
                return kDecodeFlagged;
            }
        } else if (*eva) {
            const auto a = BitMessage::from_string(eva_sent);
            const auto b = BitMessage::from_string(eva_recv);
            std::printf("sent_bits: %zu\nreceived_bits: %zu\nbit_errors: %zu\nber: %.6f\n", a.size(), b.size(),
                        bit_errors(a, b), bit_error_rate(a, b));
        } else if (*rt || *demo) {
            const BitMessage msg = *rt ? rt_msg.get() : BitMessage::from_ascii(demo_pin);
            const auto profile = *rt ? profile_named(rt_profile) : EncodingProfile::full();
            ChannelArgs ch = *rt ? rt_ch : ChannelArgs{};
            if (*demo) ch.seed = demo_seed;
            const auto cfg = ch.config();
            const auto trace = ch.run(schedule(encode(msg, profile)), cfg);
            DecoderOptions opts = decoder_options_for(profile);
            opts.expected_bits = msg.size();
            const auto r = decode(trace, profile, cfg, opts);
            print_roundtrip(msg, r, profile);
            if (*demo) std::printf("text: %s\n", r.bits.to_ascii().c_str());
            if (!r.ok()) return kDecodeFlagged;
        } else if (*sw) {
            auto in = open_input(sw_spec);
            auto spec = read_experiment_spec(in, std::filesystem::path(sw_spec).parent_path());
            if (sw_messages) spec.messages = *sw_messages;
            const auto report = run_sweep(spec);
            with_output(sw_out, [&](std::ostream& os) { write_sweep_report(os, report); });
            if (!sw_trials.empty()) with_output(sw_trials, [&](std::ostream& os) { write_trial_csv(os, report); });
        }
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kParse;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfig;
    } catch (const EmptyMessage& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kParse;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kOther;
    }
    return kOk;
}
