#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "histoprism/model.hpp"

namespace histoprism {

/// Forward-pass FLOPs per stage, counted as 2 per multiply-accumulate of the
/// projection/attention matmuls ("projection-dominated convention":
/// softmax, normalization, GELU, scaling and bias adds are not counted).
/// The conditioning terms are zero when cross-attention is off.
struct FlopsBreakdown {
  std::uint64_t cancer_embed = 0;
  std::uint64_t cross_attention = 0;
  std::uint64_t hidden_projection = 0;
  std::uint64_t encoder = 0;
  std::uint64_t head_hidden = 0;
  std::uint64_t head_output = 0;

  std::uint64_t conditioning() const { return cancer_embed + cross_attention; }
  std::uint64_t total() const {
    return cancer_embed + cross_attention + hidden_projection + encoder + head_hidden +
           head_output;
  }
};

/// FLOPs of one linear map applied to n rows under the 2-per-MAC convention.
std::uint64_t linear_flops(std::uint64_t n_rows, std::uint64_t d_in, std::uint64_t d_out);

/// Closed-form forward-pass cost; matches the instrumented matmul MAC count
/// of an actual forward exactly (FLOPs == 2 * MACs).
FlopsBreakdown count_flops(const ModelConfig& cfg, std::size_t n_patches);

struct ProfilePoint {
  std::size_t n_patches = 0;
  std::uint64_t analytical_flops = 0;
  double wall_mean_s = 0.0;
  double wall_std_s = 0.0;
  std::uint64_t peak_bytes = 0;
  bool timer_flagged = false;  // mean below the trustworthy-timer floor
};

struct ProfileReport {
  ModelConfig config;
  std::size_t runs = 0;
  std::size_t warmup = 0;
  std::uint64_t seed = 0;
  std::vector<ProfilePoint> points;  // strictly increasing n_patches
  // log-log regression slopes over n_patches
  double slope_flops = 0.0;
  double slope_wall = 0.0;
  double slope_mem = 0.0;
};

/// Times `runs` forward passes per patch count on a fixed seeded slide after
/// 5 discarded warm-up runs; peak memory comes from the matrix allocation
/// ledger. Reports measured growth exponents without asserting any model of
/// them.
ProfileReport benchmark_forward(const ModelConfig& cfg, const ModelParams& params,
                                const std::vector<std::size_t>& n_patches_list,
                                std::size_t runs = 100, std::uint64_t seed = 0);

/// Lossless CSV round trip (full f64 precision).
void write_profile_csv(const ProfileReport& report, std::ostream& out);
ProfileReport read_profile_csv(std::istream& in, const std::string& source);

}  // namespace histoprism
