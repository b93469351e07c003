#include "stiffsim/noise.hpp"

#include <cmath>

#include "stiffsim/errors.hpp"

namespace stiffsim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer; full-avalanche 64-bit bijection.
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

PathStream::PathStream(std::uint64_t master_seed, std::uint64_t path_index)
    : master_seed_(master_seed), path_index_(path_index) {
    key_ = mix64(mix64(master_seed + kGolden) ^ mix64(path_index + 2 * kGolden));
}

std::uint64_t PathStream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double PathStream::next_uniform() {
    // 53 random bits; (0, 1] so log() below is always finite.
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1p-53;
}

double PathStream::next_normal() {
    if (have_cached_) {
        have_cached_ = false;
        return cached_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    cached_ = r * std::sin(angle);
    have_cached_ = true;
    return r * std::cos(angle);
}

std::vector<PathStream> make_path_streams(std::uint64_t master_seed, int n_paths) {
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    std::vector<PathStream> streams;
    streams.reserve(n_paths);
    for (int i = 0; i < n_paths; ++i) streams.emplace_back(master_seed, i);
    return streams;
}

BrownianGrid brownian_grid(PathStream& stream, double h, double span, Index noise_dim) {
    if (!(h > 0.0) || !(span > 0.0)) throw GridMismatchError("h and span must be positive");
    const double ratio = span / h;
    const auto n = static_cast<Index>(std::llround(ratio));
    if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9)
        throw GridMismatchError("span must be an integer multiple of h");

    BrownianGrid grid;
    grid.h = h;
    grid.span = span;
    grid.increments.resize(noise_dim, n);
    const double scale = std::sqrt(h);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < noise_dim; ++i) grid.increments(i, j) = scale * stream.next_normal();
    return grid;
}

}  // namespace stiffsim
