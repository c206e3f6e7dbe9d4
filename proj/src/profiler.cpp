#include "histoprism/profiler.hpp"

#include "histoprism/num_format.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "histoprism/checkpoint.hpp"
#include "histoprism/rng.hpp"

namespace histoprism {

namespace {

constexpr std::size_t kWarmupRuns = 5;
constexpr double kTimerFloorSeconds = 1e-6;

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  // OLS slope of ln(y) on ln(x)
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double lx = std::log(x[i]);
    double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

SlideSample profile_slide(const ModelConfig& cfg, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, n);
  SlideSample s;
  s.slide_id = "profile_n" + std::to_string(n);
  s.cancer_label = "profile";
  s.cancer_index = 0;
  s.cancer_onehot.assign(cfg.d_onco, 0.0);
  s.cancer_onehot[0] = 1.0;
  s.patch_features = Matrix(n, cfg.d_img);
  for (std::size_t i = 0; i < s.patch_features.size(); ++i)
    s.patch_features.data()[i] = rng.next_gaussian();
  if (cfg.use_positional_encoding) {
    std::size_t side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    Matrix coords(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
      coords(i, 0) = static_cast<double>(i % side);
      coords(i, 1) = static_cast<double>(i / side);
    }
    s.coords = coords;
  }
  return s;
}

}  // namespace

std::uint64_t linear_flops(std::uint64_t n_rows, std::uint64_t d_in, std::uint64_t d_out) {
  return 2 * n_rows * d_in * d_out;
}

FlopsBreakdown count_flops(const ModelConfig& cfg, std::size_t n_patches) {
  cfg.validate();
  const std::uint64_t n = n_patches;
  const std::uint64_t di = cfg.d_img;
  const std::uint64_t dh = cfg.d_hidden;
  FlopsBreakdown f;

  if (cfg.use_cross_attention) {
    f.cancer_embed = linear_flops(1, cfg.d_onco, di);
    // per layer: Q projection over patches, K/V projections of the single
    // context token, per-head score and value mix against one key, output
    // projection. Head splits partition the same MACs, so totals are
    // head-count independent.
    std::uint64_t per_layer = linear_flops(n, di, di)       // Q
                              + 2 * linear_flops(1, di, di)  // K, V
                              + 2 * n * di                   // scores: N x d_head x 1 per head
                              + 2 * n * di                   // value mix: N x 1 x d_head per head
                              + linear_flops(n, di, di);     // output projection
    f.cross_attention = cfg.n_cross_layers * per_layer;
  }

  f.hidden_projection = linear_flops(n, di, dh);

  // per layer: Q/K/V/out projections, N x N attention per head (scores and
  // value mix), feed-forward expansion 4x.
  std::uint64_t enc_layer = 4 * linear_flops(n, dh, dh)  // Q, K, V, out
                            + 2 * n * n * dh             // scores over all heads
                            + 2 * n * n * dh             // value mix over all heads
                            + linear_flops(n, dh, 4 * dh) + linear_flops(n, 4 * dh, dh);
  f.encoder = cfg.n_enc_layers * enc_layer;

  f.head_hidden = linear_flops(n, dh, dh);
  f.head_output = linear_flops(n, dh, cfg.d_gene);
  return f;
}

ProfileReport benchmark_forward(const ModelConfig& cfg, const ModelParams& params,
                                const std::vector<std::size_t>& n_patches_list,
                                std::size_t runs, std::uint64_t seed) {
  if (runs < 3) throw std::invalid_argument("benchmark_forward: need at least 3 runs");
  for (std::size_t i = 1; i < n_patches_list.size(); ++i)
    if (n_patches_list[i] <= n_patches_list[i - 1])
      throw std::invalid_argument("benchmark_forward: patch counts must be strictly increasing");

  ProfileReport report;
  report.config = cfg;
  report.runs = runs;
  report.warmup = kWarmupRuns;
  report.seed = seed;

  for (std::size_t n : n_patches_list) {
    SlideSample slide = profile_slide(cfg, n, seed);
    ProfilePoint pt;
    pt.n_patches = n;
    pt.analytical_flops = count_flops(cfg, n).total();

    for (std::size_t w = 0; w < kWarmupRuns; ++w) (void)forward(slide, params, cfg);

    memtrack::reset_peak();
    (void)forward(slide, params, cfg);
    pt.peak_bytes = memtrack::peak_bytes();

    std::vector<double> times(runs);
    for (std::size_t r = 0; r < runs; ++r) {
      auto t0 = std::chrono::steady_clock::now();
      (void)forward(slide, params, cfg);
      auto t1 = std::chrono::steady_clock::now();
      times[r] = std::chrono::duration<double>(t1 - t0).count();
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(runs);
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    pt.wall_mean_s = mean;
    pt.wall_std_s = std::sqrt(var / static_cast<double>(runs));
    pt.timer_flagged = mean < kTimerFloorSeconds;
    report.points.push_back(pt);
  }

  std::vector<double> xs, flops, wall, mem;
  for (const ProfilePoint& p : report.points) {
    xs.push_back(static_cast<double>(p.n_patches));
    flops.push_back(static_cast<double>(p.analytical_flops));
    wall.push_back(p.wall_mean_s);
    mem.push_back(static_cast<double>(p.peak_bytes));
  }
  report.slope_flops = loglog_slope(xs, flops);
  report.slope_wall = loglog_slope(xs, wall);
  report.slope_mem = loglog_slope(xs, mem);
  return report;
}

void write_profile_csv(const ProfileReport& report, std::ostream& out) {
  out << "# histoprism-profile-v1\n";
  // single-line config so the header stays line-oriented
  out << "# config "
      << nlohmann::ordered_json::parse(model_config_to_json_text(report.config)).dump() << "\n";
  out << "# runs " << report.runs << "\n";
  out << "# warmup " << report.warmup << "\n";
  out << "# seed " << report.seed << "\n";
  out << "# slopes flops=" << format_double(report.slope_flops) << " wall=" << format_double(report.slope_wall)
      << " mem=" << format_double(report.slope_mem) << "\n";
  out << "n_patches,analytical_flops,wall_mean_s,wall_std_s,peak_bytes,timer_flagged\n";
  for (const ProfilePoint& p : report.points) {
    out << p.n_patches << ',' << p.analytical_flops << ',' << format_double(p.wall_mean_s) << ','
        << format_double(p.wall_std_s) << ',' << p.peak_bytes << ',' << (p.timer_flagged ? 1 : 0)
        << "\n";
  }
}

ProfileReport read_profile_csv(std::istream& in, const std::string& source) {
  ProfileReport report;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key;
      ss >> key;
      if (key == "config") {
        std::string rest;
        std::getline(ss, rest);
        report.config = model_config_from_json_text(rest, source);
      } else if (key == "runs") {
        ss >> report.runs;
      } else if (key == "warmup") {
        ss >> report.warmup;
      } else if (key == "seed") {
        ss >> report.seed;
      } else if (key == "slopes") {
        std::string tok;
        while (ss >> tok) {
          auto eq = tok.find('=');
          if (eq == std::string::npos) continue;
          double v = std::strtod(tok.c_str() + eq + 1, nullptr);
          std::string name = tok.substr(0, eq);
          if (name == "flops") report.slope_flops = v;
          if (name == "wall") report.slope_wall = v;
          if (name == "mem") report.slope_mem = v;
        }
      }
      continue;
    }
    if (!seen_header) {
      if (line.rfind("n_patches,", 0) != 0)
        throw std::runtime_error(source + ": missing profile CSV header");
      seen_header = true;
      continue;
    }
    ProfilePoint p;
    std::istringstream ss(line);
    std::string field;
    auto next = [&]() {
      if (!std::getline(ss, field, ','))
        throw std::runtime_error(source + ": short CSV row: " + line);
      return field;
    };
    p.n_patches = std::stoull(next());
    p.analytical_flops = std::stoull(next());
    p.wall_mean_s = std::strtod(next().c_str(), nullptr);
    p.wall_std_s = std::strtod(next().c_str(), nullptr);
    p.peak_bytes = std::stoull(next());
    p.timer_flagged = next() == "1";
    report.points.push_back(p);
  }
  if (!seen_header) throw std::runtime_error(source + ": not a profile CSV");
  return report;
}

}  // namespace histoprism
