#include "riccati/analysis_io.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace riccati {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double x) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return buf.data();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed number '" + s + "' in " + path.string());
  }
}

std::uint64_t parse_count(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const auto x = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw std::runtime_error("malformed count '" + s + "' in " + path.string());
  }
}

// Reads non-empty lines after the header, which must match `header`.
std::vector<std::vector<std::string>> read_rows(const fs::path& path,
                                                const std::string& header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw std::runtime_error(path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv(line));
  }
  return rows;
}

}  // namespace

std::string tool_version() { return RICCATI_VERSION_STRING; }

void write_series_csv(const EstimateSeries& series, const fs::path& path) {
  auto out = open_out(path);
  out << "t,mean,stderr,n_samples\n";
  for (const EstimatePoint& p : series.points) {
    out << format_double(p.t) << ',' << format_double(p.mean) << ','
        << format_double(p.std_error) << ',' << p.n_samples << '\n';
  }
  finish(out, path);
}

void write_series_csv(const GridFunction& f, const fs::path& path) {
  auto out = open_out(path);
  out << "t,mean,stderr,n_samples\n";
  const auto values = f.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << format_double(f.grid().node(i)) << ',' << format_double(values[i]) << ",,\n";
  }
  finish(out, path);
}

std::vector<SeriesRow> read_series_csv(const fs::path& path) {
  std::vector<SeriesRow> rows;
  for (const auto& fields : read_rows(path, "t,mean,stderr,n_samples")) {
    if (fields.size() != 4) throw std::runtime_error(path.string() + ": expected 4 columns");
    SeriesRow row;
    row.t = parse_double(fields[0], path);
    row.mean = parse_double(fields[1], path);
    if (!fields[2].empty()) row.std_error = parse_double(fields[2], path);
    if (!fields[3].empty()) row.n_samples = parse_count(fields[3], path);
    rows.push_back(row);
  }
  return rows;
}

void write_histogram_csv(const Histogram& h, const fs::path& path) {
  auto out = open_out(path);
  out << "bin_lo,bin_hi,count\n";
  for (const auto& bin : h.bins) out << bin.lo << ',' << bin.hi << ',' << bin.count << '\n';
  out << "total,," << h.total << '\n';
  out << "truncated_count,," << h.truncated_count << '\n';
  out << "max_observed,," << h.max_observed << '\n';
  finish(out, path);
}

Histogram read_histogram_csv(const fs::path& path) {
  Histogram h;
  bool saw_total = false;
  for (const auto& fields : read_rows(path, "bin_lo,bin_hi,count")) {
    if (fields.size() != 3) throw std::runtime_error(path.string() + ": expected 3 columns");
    if (fields[0] == "total") {
      h.total = parse_count(fields[2], path);
      saw_total = true;
    } else if (fields[0] == "truncated_count") {
      h.truncated_count = parse_count(fields[2], path);
    } else if (fields[0] == "max_observed") {
      h.max_observed = parse_count(fields[2], path);
    } else {
      h.bins.push_back({parse_count(fields[0], path), parse_count(fields[1], path),
                        parse_count(fields[2], path)});
    }
  }
  if (!saw_total) throw std::runtime_error(path.string() + ": missing total row");
  return h;
}

std::string RunManifest::to_json(bool configuration_only) const {
  json j;
  j["tool_version"] = tool_version;
  j["command"] = command;
  j["alpha"] = alpha ? json(*alpha) : json(nullptr);
  j["grid"] = {{"t_max", t_max}, {"step", step}, {"eps_tail", eps_tail},
               {"max_nodes", max_nodes}};
  j["depths"] = {{"n", depth}, {"k", picard_k}};
  j["samples"] = samples;
  j["seed"] = seed;
  j["extra"] = extra;
  if (!configuration_only) {
    j["workers"] = workers;
    j["timestamp"] = timestamp;
    j["outputs"] = outputs;
  }
  return j.dump(2);
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const json j = json::parse(text);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    if (!j.at("alpha").is_null()) m.alpha = j.at("alpha").get<double>();
    const json& grid = j.at("grid");
    m.t_max = grid.at("t_max").get<double>();
    m.step = grid.at("step").get<double>();
    m.eps_tail = grid.at("eps_tail").get<double>();
    m.max_nodes = grid.at("max_nodes").get<std::size_t>();
    m.depth = j.at("depths").at("n").get<int>();
    m.picard_k = j.at("depths").at("k").get<int>();
    m.samples = j.at("samples").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.extra = j.at("extra").get<std::map<std::string, std::string>>();
    m.workers = j.value("workers", 1u);
    m.timestamp = j.value("timestamp", std::string{});
    if (j.contains("outputs")) {
      m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

std::string RunManifest::config_digest() const { return sha256_hex(to_json(true)); }

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(slurp(path)); }

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf.data();
}

void write_manifest(RunManifest manifest, const fs::path& path,
                    const std::vector<std::string>& files) {
  const fs::path dir = path.parent_path();
  for (const auto& name : files) manifest.outputs[name] = sha256_file(dir / name);
  write_manifest(manifest, path);
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
  auto out = open_out(path);
  out << manifest.to_json() << '\n';
  finish(out, path);
}

RunManifest read_manifest(const fs::path& path) { return RunManifest::from_json(slurp(path)); }

std::vector<std::string> verify_manifest(const fs::path& path) {
  const RunManifest m = read_manifest(path);
  std::vector<std::string> mismatched;
  for (const auto& [name, digest] : m.outputs) {
    const fs::path file = path.parent_path() / name;
    if (!fs::exists(file) || sha256_file(file) != digest) mismatched.push_back(name);
  }
  return mismatched;
}

FigurePreset figure_preset(std::string_view name) {
  if (name == "fig1") return {"fig1", 0.66};
  if (name == "fig2") return {"fig2", 1.5};
  if (name == "fig3") return {"fig3", 3.0};
  throw std::invalid_argument("unknown preset '" + std::string(name) +
                              "' (expected fig1, fig2 or fig3)");
}

BundleResult figure_bundle(const FigurePreset& preset, const BundleConfig& cfg,
                           const fs::path& directory) {
  fs::create_directories(directory);
  const McConfig mc{cfg.samples, cfg.depth, cfg.seed, cfg.workers};
  const UniformGrid grid(cfg.t_max, cfg.step);

  BundleResult result;
  result.directory = directory;

  write_histogram_csv(estimate_leaf_histogram(preset.alpha, cfg.leaf_t, cfg.depth, mc),
                      directory / "histogram.csv");
  result.files.emplace_back("histogram.csv");

  const GridFunction u_k = picard_v0(preset.alpha, grid, cfg.picard_k, cfg.tail);
  write_grid_function(u_k, directory / "u_k.csv");
  result.files.emplace_back("u_k.csv");
  result.files.emplace_back("u_k.json");

  write_series_csv(iterate_vn(preset.alpha, grid, cfg.depth, u_k, cfg.tail).restrict_to(grid),
                   directory / "vn.csv");
  result.files.emplace_back("vn.csv");

  const auto points = time_points(cfg.t_max, cfg.point_step);
  write_series_csv(estimate_v_curve(preset.alpha, points, cfg.depth, u_k, mc),
                   directory / "vcurve.csv");
  result.files.emplace_back("vcurve.csv");

  RunManifest& m = result.manifest;
  m.tool_version = tool_version();
  m.command = "figures --preset " + preset.name;
  m.alpha = preset.alpha;
  m.t_max = cfg.t_max;
  m.step = cfg.step;
  m.eps_tail = cfg.tail.eps_tail;
  m.max_nodes = cfg.tail.max_nodes;
  m.depth = cfg.depth;
  m.picard_k = cfg.picard_k;
  m.samples = cfg.samples;
  m.seed = cfg.seed;
  m.workers = cfg.workers;
  m.timestamp = utc_timestamp();
  m.extra = {{"preset", preset.name},
             {"leaf_t", json(cfg.leaf_t).dump()},
             {"point_step", json(cfg.point_step).dump()}};
  write_manifest(m, directory / "manifest.json", result.files);
  m = read_manifest(directory / "manifest.json");
  return result;
}

}  // namespace riccati
