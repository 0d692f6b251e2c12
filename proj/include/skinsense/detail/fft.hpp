#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace skinsense::detail {

// In-place iterative radix-2 FFT with precomputed twiddles.
class Fft {
public:
    explicit Fft(std::size_t n) : n_(n), twiddle_(n / 2), rev_(n) {
        if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("FFT size must be a power of two");
        for (std::size_t k = 0; k < n / 2; ++k)
            twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
        std::size_t bits = 0;
        while ((std::size_t{1} << bits) < n) ++bits;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < bits; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
            rev_[i] = r;
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::span<std::complex<double>> x) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t half = len / 2;
            const std::size_t stride = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t j = 0; j < half; ++j) {
                    const auto t = twiddle_[j * stride] * x[i + j + half];
                    x[i + j + half] = x[i + j] - t;
                    x[i + j] += t;
                }
            }
        }
    }

private:
    std::size_t n_;
    std::vector<std::complex<double>> twiddle_;
    std::vector<std::size_t> rev_;
};

} // namespace skinsense::detail
