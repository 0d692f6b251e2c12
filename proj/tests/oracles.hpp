#pragma once

// Independent reference computations used to check the library. None of
// these share code with the implementation they verify.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

// Direct O(N^2) DFT of a real sequence, bin k.
inline std::complex<double> dft_bin(std::span<const double> x, std::size_t k) {
    std::complex<double> acc{0.0, 0.0};
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / n);
    return acc;
}

inline std::vector<double> dft_magnitudes(std::span<const double> x) {
    std::vector<double> out(x.size() / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(dft_bin(x, k));
    return out;
}

struct RefSymbol {
    std::size_t start = 0;
    std::size_t end = 0;
    double on_ms = 0.0;
    std::optional<double> off_ms;
    double freq = 0.0;
};

// Run-length reference for symbol separation: collect maximal runs of
// non-zero values, glue runs whose zero gap is shorter than 3 windows, drop
// clusters shorter than `min_on_ms`, then measure gaps between survivors.
inline std::vector<RefSymbol> separate_reference(const std::vector<double>& y, double step_ms, double min_on_ms) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    std::size_t i = 0;
    while (i < y.size()) {
        if (y[i] == 0.0) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < y.size() && y[j + 1] != 0.0) ++j;
        runs.emplace_back(i, j);
        i = j + 1;
    }
    std::vector<std::pair<std::size_t, std::size_t>> clusters;
    for (const auto& r : runs) {
        if (!clusters.empty() && r.first - clusters.back().second - 1 < 3) clusters.back().second = r.second;
        else clusters.push_back(r);
    }
    std::vector<RefSymbol> out;
    for (const auto& [s, e] : clusters) {
        const double on = static_cast<double>(e - s + 1) * step_ms;
        if (on < min_on_ms) continue;
        double sum = 0.0;
        int n = 0;
        for (std::size_t k = s; k <= e; ++k)
            if (y[k] != 0.0) {
                sum += y[k];
                ++n;
            }
        out.push_back({s, e, on, std::nullopt, sum / n});
    }
    for (std::size_t k = 0; k + 1 < out.size(); ++k)
        out[k].off_ms = static_cast<double>(out[k + 1].start - out[k].end - 1) * step_ms;
    return out;
}

// Exhaustive edit distance by plain recursion (exponential; short inputs only).
inline std::size_t edit_distance_naive(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.empty()) return b.size();
    if (b.empty()) return a.size();
    const std::size_t sub = edit_distance_naive(a.subspan(1), b.subspan(1)) + (a[0] != b[0] ? 1 : 0);
    const std::size_t del = edit_distance_naive(a.subspan(1), b) + 1;
    const std::size_t ins = edit_distance_naive(a, b.subspan(1)) + 1;
    return std::min({sub, del, ins});
}

// Top-down memoised alignment over suffixes, for longer inputs.
inline std::size_t edit_distance_memo(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
    std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
        if (i == a.size()) return b.size() - j;
        if (j == b.size()) return a.size() - i;
        auto it = memo.find({i, j});
        if (it != memo.end()) return it->second;
        const std::size_t v = std::min({go(i + 1, j + 1) + (a[i] != b[j] ? 1 : 0), go(i + 1, j) + 1, go(i, j + 1) + 1});
        memo[{i, j}] = v;
        return v;
    };
    return go(0, 0);
}

} // namespace oracle
