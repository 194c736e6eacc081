#include "riccati/analysis_io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace riccati {
namespace {

namespace fs = std::filesystem;

class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("riccati-io-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(IoTest, SeriesRoundTripIsLossless) {
  EstimateSeries s;
  s.points = {{0.0, 1.0, 0.0, 10000}, {0.5, 0.1 + 0.2, 1.0 / 3.0, 10000}, {8.0, 1e-300, 5e-7, 3}};
  write_series_csv(s, dir_ / "s.csv");
  const auto rows = read_series_csv(dir_ / "s.csv");
  ASSERT_EQ(rows.size(), 3u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].t, s.points[i].t);
    EXPECT_EQ(rows[i].mean, s.points[i].mean);
    EXPECT_EQ(rows[i].std_error, s.points[i].std_error);
    EXPECT_EQ(rows[i].n_samples, s.points[i].n_samples);
  }
  EXPECT_EQ(read(dir_ / "s.csv").substr(0, 25), "t,mean,stderr,n_samples\n0");
}

TEST_F(IoTest, DeterministicSeriesHasEmptyErrorColumns) {
  const UniformGrid g(1.0, 0.5);
  write_series_csv(GridFunction(g, {1.0, 0.75, 0.5}, 0.5, true), dir_ / "d.csv");
  const auto rows = read_series_csv(dir_ / "d.csv");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[1].std_error.has_value());
  EXPECT_FALSE(rows[1].n_samples.has_value());
  EXPECT_EQ(rows[1].mean, 0.75);
}

TEST_F(IoTest, HistogramRoundTrip) {
  const auto h = estimate_leaf_histogram(1.5, 2.0, 10, {2000, 10, 3, 1});
  write_histogram_csv(h, dir_ / "h.csv");
  EXPECT_EQ(read_histogram_csv(dir_ / "h.csv"), h);
  const std::string text = read(dir_ / "h.csv");
  EXPECT_NE(text.find("\ntotal,,2000\n"), std::string::npos);
  EXPECT_NE(text.find("\nmax_observed,,"), std::string::npos);
}

TEST_F(IoTest, MalformedFilesRejected) {
  std::ofstream(dir_ / "bad.csv") << "x,y\n1,2\n";
  EXPECT_THROW(read_series_csv(dir_ / "bad.csv"), std::runtime_error);
  std::ofstream(dir_ / "bad2.csv") << "t,mean,stderr,n_samples\n1,abc,,\n";
  EXPECT_THROW(read_series_csv(dir_ / "bad2.csv"), std::runtime_error);
  std::ofstream(dir_ / "h.csv") << "bin_lo,bin_hi,count\n1,2,3\n";
  EXPECT_THROW(read_histogram_csv(dir_ / "h.csv"), std::runtime_error);
  EXPECT_THROW(read_series_csv(dir_ / "missing.csv"), std::runtime_error);
}

TEST_F(IoTest, ManifestRoundTripAndDigest) {
  RunManifest m;
  m.tool_version = tool_version();
  m.command = "hist";
  m.alpha = 1.5;
  m.seed = 18446744073709551615ull;
  m.extra = {{"t", "2"}};
  std::ofstream(dir_ / "a.csv") << "payload\n";
  write_manifest(m, dir_ / "manifest.json", {"a.csv"});
  const RunManifest back = read_manifest(dir_ / "manifest.json");
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(back.alpha, m.alpha);
  EXPECT_EQ(back.extra, m.extra);
  EXPECT_EQ(back.outputs.at("a.csv"), sha256_hex("payload\n"));
  EXPECT_EQ(back.config_digest(), m.config_digest());
  EXPECT_TRUE(verify_manifest(dir_ / "manifest.json").empty());

  std::ofstream(dir_ / "a.csv") << "tampered\n";
  EXPECT_EQ(verify_manifest(dir_ / "manifest.json"), std::vector<std::string>{"a.csv"});
}

TEST(Manifest, DigestIgnoresVolatileFields) {
  RunManifest a;
  a.command = "vcurve";
  a.alpha = 1.5;
  RunManifest b = a;
  b.timestamp = "2030-01-01T00:00:00Z";
  b.workers = 8;
  b.outputs["x"] = "y";
  EXPECT_EQ(a.config_digest(), b.config_digest());
  b.seed = 1;
  EXPECT_NE(a.config_digest(), b.config_digest());
  // Canonical form: sorted keys.
  const std::string json = a.to_json();
  EXPECT_LT(json.find("\"alpha\""), json.find("\"command\""));
  EXPECT_LT(json.find("\"command\""), json.find("\"seed\""));
}

TEST(Presets, FigureMapping) {
  EXPECT_EQ(figure_preset("fig1").alpha, 0.66);
  EXPECT_EQ(figure_preset("fig2").alpha, 1.5);
  EXPECT_EQ(figure_preset("fig3").alpha, 3.0);
  EXPECT_THROW(figure_preset("fig4"), std::invalid_argument);
}

TEST_F(IoTest, FigureBundleIsCompleteAndReproducible) {
  BundleConfig cfg;
  cfg.seed = 42;
  cfg.samples = 500;
  const auto a = figure_bundle(figure_preset("fig2"), cfg, dir_ / "a");
  cfg.workers = 3;
  const auto b = figure_bundle(figure_preset("fig2"), cfg, dir_ / "b");
  for (const char* f : {"histogram.csv", "vcurve.csv", "vn.csv", "u_k.csv", "u_k.json"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(read(dir_ / "a" / f), read(dir_ / "b" / f)) << f;
  }
  EXPECT_TRUE(verify_manifest(dir_ / "a" / "manifest.json").empty());
  EXPECT_EQ(a.manifest.alpha, 1.5);
  EXPECT_EQ(a.manifest.config_digest(), b.manifest.config_digest());
  EXPECT_EQ(read_series_csv(dir_ / "a" / "vcurve.csv").size(), 17u);
  EXPECT_EQ(read_series_csv(dir_ / "a" / "vn.csv").size(), 801u);
}

}  // namespace
}  // namespace riccati
