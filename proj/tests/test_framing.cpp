#include "skinsense/framing.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace skinsense;

TEST(Framing, WordMappingExamples) {
    const auto p = EncodingProfile::full();
    auto first = [&](const char* bits) { return encode(BitMessage::from_string(bits), p).front(); };
    EXPECT_EQ(first("0000"), (Symbol{20, 250, 150}));
    EXPECT_EQ(first("1111"), (Symbol{100, 500, 300}));
    EXPECT_EQ(first("0100"), (Symbol{30, 250, 150}));
    EXPECT_EQ(first("1010"), (Symbol{60, 500, 150}));
}

TEST(Framing, SingleBitPadsToOneSymbolPlusPilot) {
    const auto p = EncodingProfile::full();
    const auto syms = encode(BitMessage::from_string("0"), p);
    ASSERT_EQ(syms.size(), 4u);
    EXPECT_EQ(syms[0], (Symbol{20, 250, 150}));
}

TEST(Framing, DecodeSymbolExample) {
    const std::vector<Symbol> s{{60, 250, 300}};
    EXPECT_EQ(decode_symbols(s, EncodingProfile::full()).to_string(), "1001");
}

TEST(Framing, AllZeroSymbols) {
    const std::vector<Symbol> s(32, Symbol{20, 250, 150});
    const auto bits = decode_symbols(s, EncodingProfile::full());
    ASSERT_EQ(bits.size(), 128u);
    for (std::size_t i = 0; i < bits.size(); ++i) EXPECT_EQ(bits[i], 0);
}

TEST(Framing, IllegalParameterRejected) {
    const auto p = EncodingProfile::full();
    EXPECT_THROW(decode_symbols(std::vector<Symbol>{{40, 250, 150}}, p), IllegalParameter);
    EXPECT_THROW(decode_symbols(std::vector<Symbol>{{20, 300, 150}}, p), IllegalParameter);
    EXPECT_THROW(decode_symbols(std::vector<Symbol>{{20, 250, 200}}, p), IllegalParameter);
    EXPECT_THROW(decode_symbols(std::vector<Symbol>{{30, 250, 150}}, EncodingProfile::time_only()), IllegalParameter);
}

TEST(Framing, EmptyMessageRejected) {
    EXPECT_THROW(encode(BitMessage{}, EncodingProfile::full()), EmptyMessage);
}

TEST(Framing, Padding) {
    const auto five = pad(BitMessage::from_string("10111"));
    EXPECT_EQ(five.bits.to_string(), "10111000");
    EXPECT_EQ(five.original_length, 5u);

    const auto eight = pad(BitMessage::from_string("10110110"));
    EXPECT_EQ(eight.bits.to_string(), "10110110");

    const auto empty = pad(BitMessage{});
    EXPECT_EQ(empty.bits.size(), 0u);
    EXPECT_EQ(empty.original_length, 0u);
}

TEST(Framing, BijectiveOverAllWords) {
    const auto p = EncodingProfile::full();
    for (int w = 0; w < 16; ++w) {
        const BitMessage m{(w >> 3) & 1, (w >> 2) & 1, (w >> 1) & 1, w & 1};
        const auto syms = encode(m, p);
        EXPECT_EQ(decode_symbols(strip_pilot(syms), p), m) << "word " << w;
    }
}

TEST(Framing, PilotIsLastAndCountMatches) {
    const auto p = EncodingProfile::full();
    const auto pilot = p.pilot().symbols;
    EXPECT_EQ(pilot[0], (Symbol{20, 250, 150}));
    EXPECT_EQ(pilot[1], (Symbol{30, 500, 300}));
    EXPECT_EQ(pilot[2], (Symbol{60, 250, 150}));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 300;
        std::vector<std::uint8_t> bits(n);
        for (auto& b : bits) b = rng() & 1;
        const BitMessage m(bits);
        const auto syms = encode(m, p);
        ASSERT_EQ(syms.size(), (n + 3) / 4 + 3);
        for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(syms[syms.size() - 3 + k], pilot[k]);
        EXPECT_EQ(decode_symbols(strip_pilot(syms), p).prefix(n), m);
    }
}

TEST(Framing, TimeOnlyModeRoundTrip) {
    const auto p = EncodingProfile::time_only();
    EXPECT_EQ(p.bits_per_symbol(), 2u);
    const auto m = BitMessage::from_string("0110111");
    const auto syms = encode(m, p);
    ASSERT_EQ(syms.size(), 4u + 3u);
    for (const auto& s : syms) EXPECT_EQ(s.pwm, 60);
    EXPECT_EQ(syms[0], (Symbol{60, 250, 300}));
    EXPECT_EQ(decode_symbols(strip_pilot(syms), p).prefix(m.size()), m);
}

TEST(Framing, TextConversions) {
    EXPECT_EQ(BitMessage::from_hex("ff").to_string(), "11111111");
    EXPECT_EQ(BitMessage::from_hex("0xA5").to_string(), "10100101");
    EXPECT_EQ(BitMessage::from_ascii("5").to_string(), "00110101");
    EXPECT_THROW(BitMessage::from_string("01x"), ParseError);
    EXPECT_THROW(BitMessage::from_hex("fg"), ParseError);
}

TEST(Framing, ScaledProfile) {
    const auto p = EncodingProfile::full().scaled(0.5);
    EXPECT_EQ(p.on_ms[0], 125);
    EXPECT_EQ(p.off_ms[1], 150);
    EXPECT_EQ(p.pilot().symbols[1], (Symbol{30, 250, 150}));
}
