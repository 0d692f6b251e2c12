#pragma once

// Bit <-> symbol framing: word partitioning, parameter mapping, padding and
// the trailing pilot sequence.

#include "skinsense/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace skinsense {

// Ordered sequence of binary digits.
class BitMessage {
public:
    BitMessage() = default;

    explicit BitMessage(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
        for (auto b : bits_) {
            if (b > 1) throw ParseError("bit value out of range");
        }
    }

    BitMessage(std::initializer_list<int> bits) {
        bits_.reserve(bits.size());
        for (int b : bits) {
            if (b != 0 && b != 1) throw ParseError("bit value out of range");
            bits_.push_back(static_cast<std::uint8_t>(b));
        }
    }

    // ASCII '0'/'1' string.
    static BitMessage from_string(std::string_view text) {
        std::vector<std::uint8_t> bits;
        bits.reserve(text.size());
        for (std::size_t i = 0; i < text.size(); ++i) {
            char c = text[i];
            if (c != '0' && c != '1')
                throw ParseError("invalid bit character at position " + std::to_string(i));
            bits.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        return BitMessage(std::move(bits));
    }

    // Hex digits, most significant bit first; an optional 0x prefix is accepted.
    static BitMessage from_hex(std::string_view text) {
        if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
            text.remove_prefix(2);
        std::vector<std::uint8_t> bits;
        bits.reserve(text.size() * 4);
        for (std::size_t i = 0; i < text.size(); ++i) {
            int c = std::tolower(static_cast<unsigned char>(text[i]));
            int v;
            if (c >= '0' && c <= '9') v = c - '0';
            else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
            else throw ParseError("invalid hex character at position " + std::to_string(i));
            for (int s = 3; s >= 0; --s) bits.push_back(static_cast<std::uint8_t>((v >> s) & 1));
        }
        return BitMessage(std::move(bits));
    }

    // 8 bits per character, most significant bit first.
    static BitMessage from_ascii(std::string_view text) {
        std::vector<std::uint8_t> bits;
        bits.reserve(text.size() * 8);
        for (unsigned char c : text)
            for (int s = 7; s >= 0; --s) bits.push_back(static_cast<std::uint8_t>((c >> s) & 1));
        return BitMessage(std::move(bits));
    }

    // Whole bytes only; non-printable bytes become '?'.
    std::string to_ascii() const {
        std::string out;
        for (std::size_t i = 0; i + 8 <= bits_.size(); i += 8) {
            unsigned c = 0;
            for (std::size_t k = 0; k < 8; ++k) c = (c << 1) | bits_[i + k];
            out.push_back(c >= 0x20 && c < 0x7f ? static_cast<char>(c) : '?');
        }
        return out;
    }

    std::string to_string() const {
        std::string s;
        s.reserve(bits_.size());
        for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
        return s;
    }

    std::size_t size() const { return bits_.size(); }
    bool empty() const { return bits_.empty(); }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
    std::span<const std::uint8_t> bits() const { return bits_; }

    void push_back(std::uint8_t b) {
        if (b > 1) throw ParseError("bit value out of range");
        bits_.push_back(b);
    }

    BitMessage prefix(std::size_t n) const {
        n = std::min(n, bits_.size());
        return BitMessage(std::vector<std::uint8_t>(bits_.begin(), bits_.begin() + static_cast<std::ptrdiff_t>(n)));
    }

    friend bool operator==(const BitMessage&, const BitMessage&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

struct Symbol {
    int pwm = 0;
    int on_ms = 0;
    int off_ms = 0;

    friend bool operator==(const Symbol&, const Symbol&) = default;
};

enum class EncodingMode {
    Full,     // PWM + ON + OFF, 4 bits per symbol
    TimeOnly, // ON + OFF at a fixed PWM, 2 bits per symbol
};

struct PilotSequence {
    std::array<Symbol, 3> symbols;
};

// Parameter value sets and the bit -> value tables. Index i of each array is
// the value selected by bit pattern i (PWM: 00,01,10,11; ON/OFF: 0,1).
struct EncodingProfile {
    EncodingMode mode = EncodingMode::Full;
    std::array<int, 4> pwm_levels{20, 30, 60, 100};
    std::array<int, 2> on_ms{250, 500};
    std::array<int, 2> off_ms{150, 300};
    int fixed_pwm = 60; // used in time-only mode

    static EncodingProfile full() { return {}; }

    static EncodingProfile time_only(int pwm = 60) {
        EncodingProfile p;
        p.mode = EncodingMode::TimeOnly;
        p.fixed_pwm = pwm;
        return p;
    }

    // Same profile with every ON/OFF duration multiplied by `factor`.
    EncodingProfile scaled(double factor) const {
        EncodingProfile p = *this;
        for (auto& v : p.on_ms) v = static_cast<int>(std::lround(v * factor));
        for (auto& v : p.off_ms) v = static_cast<int>(std::lround(v * factor));
        return p;
    }

    std::size_t bits_per_symbol() const { return mode == EncodingMode::Full ? 4 : 2; }

    // Pilot: ON [short,long,short], OFF [short,long] plus a trailing short
    // OFF, PWM [lowest three levels] (or the fixed level in time-only mode).
    PilotSequence pilot() const {
        auto pwm = [&](int i) { return mode == EncodingMode::Full ? pwm_levels[static_cast<std::size_t>(i)] : fixed_pwm; };
        return PilotSequence{{Symbol{pwm(0), on_ms[0], off_ms[0]},
                              Symbol{pwm(1), on_ms[1], off_ms[1]},
                              Symbol{pwm(2), on_ms[0], off_ms[0]}}};
    }

    int min_on_ms() const { return std::min(on_ms[0], on_ms[1]); }
};

struct PaddedMessage {
    BitMessage bits;
    std::size_t original_length = 0;
};

// Zero-pads to a multiple of `word_bits`.
inline PaddedMessage pad(const BitMessage& message, std::size_t word_bits = 4) {
    std::vector<std::uint8_t> bits(message.bits().begin(), message.bits().end());
    while (bits.size() % word_bits != 0) bits.push_back(0);
    return PaddedMessage{BitMessage(std::move(bits)), message.size()};
}

namespace detail {

template <std::size_t N>
inline int index_of(const std::array<int, N>& values, int v) {
    for (std::size_t i = 0; i < N; ++i)
        if (values[i] == v) return static_cast<int>(i);
    return -1;
}

} // namespace detail

inline Symbol symbol_for_word(std::span<const std::uint8_t> word, const EncodingProfile& profile) {
    if (profile.mode == EncodingMode::Full)
        return Symbol{profile.pwm_levels[static_cast<std::size_t>(word[0] * 2 + word[1])],
                      profile.on_ms[word[2]], profile.off_ms[word[3]]};
    return Symbol{profile.fixed_pwm, profile.on_ms[word[0]], profile.off_ms[word[1]]};
}

// Message symbols followed by the three pilot symbols.
inline std::vector<Symbol> encode(const BitMessage& message, const EncodingProfile& profile) {
    if (message.empty()) throw EmptyMessage();
    const std::size_t word = profile.bits_per_symbol();
    const PaddedMessage padded = pad(message, word);
    std::vector<Symbol> out;
    out.reserve(padded.bits.size() / word + 3);
    auto bits = padded.bits.bits();
    for (std::size_t i = 0; i < bits.size(); i += word)
        out.push_back(symbol_for_word(bits.subspan(i, word), profile));
    for (const auto& s : profile.pilot().symbols) out.push_back(s);
    return out;
}

// Drops the trailing pilot.
inline std::vector<Symbol> strip_pilot(std::span<const Symbol> symbols) {
    if (symbols.size() < 3) return {};
    return {symbols.begin(), symbols.end() - 3};
}

inline BitMessage decode_symbols(std::span<const Symbol> symbols, const EncodingProfile& profile) {
    BitMessage out;
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const Symbol& s = symbols[k];
        int on = detail::index_of(profile.on_ms, s.on_ms);
        int off = detail::index_of(profile.off_ms, s.off_ms);
        int pwm = profile.mode == EncodingMode::Full ? detail::index_of(profile.pwm_levels, s.pwm)
                                                     : (s.pwm == profile.fixed_pwm ? 0 : -1);
        if (on < 0 || off < 0 || pwm < 0)
            throw IllegalParameter("symbol " + std::to_string(k) + " has an illegal parameter (" +
                                   std::to_string(s.pwm) + "," + std::to_string(s.on_ms) + "," +
                                   std::to_string(s.off_ms) + ")");
        if (profile.mode == EncodingMode::Full) {
            out.push_back(static_cast<std::uint8_t>(pwm >> 1));
            out.push_back(static_cast<std::uint8_t>(pwm & 1));
        }
        out.push_back(static_cast<std::uint8_t>(on));
        out.push_back(static_cast<std::uint8_t>(off));
    }
    return out;
}

} // namespace skinsense
