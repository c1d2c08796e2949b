#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace barl {

/// The generator used everywhere a stream of randomness is needed.
using Rng = std::mt19937_64;

/// SplitMix64 finalizer (Steele, Lea & Flood 2014). Bijective on 64-bit words.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// 64-bit FNV-1a over the bytes of a label.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Child seed for a named stream: splitmix64(master ^ splitmix64(fnv1a64(label))).
/// Platform independent, so a (master, label) pair always names the same stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
    return splitmix64(master ^ splitmix64(fnv1a64(label)));
}

/// Indexed variant, e.g. one stream per replicate.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                    std::uint64_t index) noexcept {
    return splitmix64(derive_seed(master, label) + splitmix64(index));
}

inline Rng make_rng(std::uint64_t master, std::string_view label) {
    return Rng{derive_seed(master, label)};
}

inline Rng make_rng(std::uint64_t master, std::string_view label, std::uint64_t index) {
    return Rng{derive_seed(master, label, index)};
}

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform index in [0, n). n must be positive.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>{0, n - 1}(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

inline double sample_gamma(Rng& rng, double shape) {
    return std::gamma_distribution<double>{shape, 1.0}(rng);
}

/// Beta(a, b) through two gamma draws. When both draws underflow (tiny shapes)
/// the variate is effectively at an endpoint, chosen with the Beta mean.
inline double sample_beta(Rng& rng, double a, double b) {
    const double x = sample_gamma(rng, a);
    const double y = sample_gamma(rng, b);
    const double sum = x + y;
    if (!(sum > 0.0)) {
        return bernoulli(rng, a / (a + b)) ? 1.0 : 0.0;
    }
    return x / sum;
}

/// Dirichlet(alpha) into `out` (same length). Falls back to a point mass on a
/// category drawn with the Dirichlet mean if every gamma draw underflows.
inline void sample_dirichlet(Rng& rng, std::span<const double> alpha, std::span<double> out) {
    double sum = 0.0;
    double alpha_sum = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        out[i] = alpha[i] > 0.0 ? sample_gamma(rng, alpha[i]) : 0.0;
        sum += out[i];
        alpha_sum += alpha[i];
    }
    if (sum > 0.0) {
        for (double& v : out) v /= sum;
        return;
    }
    double u = uniform01(rng) * alpha_sum;
    std::size_t pick = alpha.size() - 1;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (u < alpha[i]) {
            pick = i;
            break;
        }
        u -= alpha[i];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i == pick ? 1.0 : 0.0;
}

/// Index drawn from unnormalized non-negative weights.
inline std::size_t sample_weighted(Rng& rng, std::span<const double> weights, double total) {
    double u = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    // Rounding left u just past the end; return the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;) {
        if (weights[i] > 0.0) return i;
    }
    return weights.size() - 1;
}

inline std::size_t sample_categorical(Rng& rng, std::span<const double> probs) {
    return sample_weighted(rng, probs, 1.0);
}

/// Position of the maximum of `values`, ties broken uniformly at random.
/// Consumes one generator draw only when there is more than one maximizer.
template <class Range>
std::size_t argmax_random_tie(const Range& values, Rng& rng) {
    std::size_t best = 0;
    std::size_t ties = 0;
    std::size_t i = 0;
    double best_value = -INFINITY;
    for (const double v : values) {
        if (v > best_value) {
            best_value = v;
            best = i;
            ties = 1;
        } else if (v == best_value) {
            ++ties;
        }
        ++i;
    }
    if (ties <= 1) return best;
    std::size_t pick = uniform_index(rng, ties);
    i = 0;
    for (const double v : values) {
        if (v == best_value && pick-- == 0) return i;
        ++i;
    }
    return best;
}

}  // namespace barl
