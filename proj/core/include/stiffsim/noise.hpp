#pragma once

#include <cstdint>
#include <vector>

#include "stiffsim/types.hpp"

namespace stiffsim {

/// Counter-based random stream keyed on (masterSeed, pathIndex). Output i is
/// a fixed bijective mix of (key, i), so streams are reproducible, support
/// O(1) seek, and distinct path indices give statistically independent
/// sequences regardless of how work is scheduled across threads.
class PathStream {
  public:
    PathStream(std::uint64_t master_seed, std::uint64_t path_index);

    std::uint64_t next_u64();
    /// Uniform on (0, 1].
    double next_uniform();
    /// Standard normal via Box-Muller (explicit formula, one value cached).
    double next_normal();

    void seek(std::uint64_t counter) {
        counter_ = counter;
        have_cached_ = false;
    }

    std::uint64_t master_seed() const { return master_seed_; }
    std::uint64_t path_index() const { return path_index_; }

  private:
    std::uint64_t master_seed_;
    std::uint64_t path_index_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

/// Streams for paths 0..n_paths-1 of one master seed.
std::vector<PathStream> make_path_streams(std::uint64_t master_seed, int n_paths);

/// Uniform fine grid of Brownian increments dW_j ~ N(0, h I) spanning [0, span].
/// One grid drives both the fine reference integrator (one increment per
/// substep) and SIM kicks (aggregated per macro step), implementing
/// common-random-path strong-error estimation.
struct BrownianGrid {
    double h = 0.0;
    double span = 0.0;
    Matrix increments;  // noise_dim x count

    Index count() const { return increments.cols(); }
    Index noise_dim() const { return increments.rows(); }
};

BrownianGrid brownian_grid(PathStream& stream, double h, double span, Index noise_dim);

}  // namespace stiffsim
