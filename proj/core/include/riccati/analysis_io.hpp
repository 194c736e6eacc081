#pragma once

// Result files and run provenance.
//
//   series CSV     t,mean,stderr,n_samples   (stderr, n_samples empty for
//                                             deterministic rows)
//   histogram CSV  bin_lo,bin_hi,count       then footer rows
//                                             total,,N / truncated_count,,N /
//                                             max_observed,,N
//   manifest JSON  canonical: sorted keys, two-space indent
//
// Numbers are written with 17 significant digits so they read back exactly.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riccati/grid.hpp"
#include "riccati/monte_carlo.hpp"

namespace riccati {

std::string tool_version();

struct SeriesRow {
  double t = 0.0;
  double mean = 0.0;
  std::optional<double> std_error;
  std::optional<std::size_t> n_samples;
};

void write_series_csv(const EstimateSeries& series, const std::filesystem::path& path);
void write_series_csv(const GridFunction& f, const std::filesystem::path& path);
std::vector<SeriesRow> read_series_csv(const std::filesystem::path& path);

void write_histogram_csv(const Histogram& h, const std::filesystem::path& path);
Histogram read_histogram_csv(const std::filesystem::path& path);

struct RunManifest {
  std::string tool_version;
  std::string command;
  std::optional<double> alpha;
  double t_max = 8.0;
  double step = 0.01;
  double eps_tail = 1e-6;
  std::size_t max_nodes = 0;
  int depth = 10;
  int picard_k = 5;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::string timestamp;
  std::map<std::string, std::string> extra;
  /// Output file name (relative to the manifest's directory) -> SHA-256 hex.
  std::map<std::string, std::string> outputs;

  /// Canonical JSON of everything, or only of the reproducible configuration
  /// (no timestamp, worker count or output digests).
  std::string to_json(bool configuration_only = false) const;
  static RunManifest from_json(std::string_view text);

  /// SHA-256 of the configuration-only JSON.
  std::string config_digest() const;
};

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

/// Records the digest of `files` (relative to the manifest directory) in
/// `manifest.outputs` and writes it to `path`.
void write_manifest(RunManifest manifest, const std::filesystem::path& path,
                    const std::vector<std::string>& files);
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Files whose current digest differs from the manifest (missing files
/// included). Empty means the manifest verifies.
std::vector<std::string> verify_manifest(const std::filesystem::path& path);

struct FigurePreset {
  std::string name;
  double alpha = 0.0;
};

/// fig1 -> alpha 0.66, fig2 -> 1.5, fig3 -> 3. Throws std::invalid_argument.
FigurePreset figure_preset(std::string_view name);

struct BundleConfig {
  std::uint64_t seed = 0;
  unsigned workers = 1;
  std::size_t samples = 10000;
  int depth = 10;        // n for W_n and v_n
  int picard_k = 5;
  double leaf_t = 2.0;   // horizon of the histogram
  double t_max = 8.0;
  double step = 0.01;
  double point_step = 0.5;  // spacing of Monte Carlo v-curve points
  TailOptions tail;
};

struct BundleResult {
  std::filesystem::path directory;
  std::vector<std::string> files;
  RunManifest manifest;
};

/// Emits histogram.csv, vcurve.csv (Monte Carlo), vn.csv (deterministic),
/// u_k.csv + u_k.json (Picard surrogate) and manifest.json into `directory`.
BundleResult figure_bundle(const FigurePreset& preset, const BundleConfig& cfg,
                           const std::filesystem::path& directory);

}  // namespace riccati
