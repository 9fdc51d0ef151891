#include <doctest.h>

#include <filesystem>
#include <cstring>
#include <fstream>

#include "dpgd/config.hpp"
#include "dpgd/errors.hpp"
#include "dpgd/io.hpp"
#include "dpgd/svg.hpp"

using namespace dpgd;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "dpgd_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("dataset binary round trip") {
  const Dataset data = sample_dataset(7, SignalSpec::along_first_axis(11, 1.5), NoiseSpec{0.4}, 5);
  const fs::path p = scratch("data.bin");
  write_dataset(p, data);
  CHECK(fs::file_size(p) == 8 + 4 + 4 + 8 + 8 + 8 * 11 + 7 * (2 + 8 * 11));
  const Dataset back = read_dataset(p);
  CHECK(back.n() == 7);
  CHECK(back.seed() == 5);
  CHECK(back.noise().sigma_p == 0.4);
  CHECK(back.signal().mu == data.signal().mu);
  CHECK(back.noise_matrix() == data.noise_matrix());
  CHECK(back.labels() == data.labels());
  for (Eigen::Index i = 0; i < 7; ++i) CHECK(back[i].patch_a == data[i].patch_a);

  std::ifstream in(p, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  CHECK(std::string(magic, 8) == "DPGDDS01");
  unsigned char n_le[4];
  in.read(reinterpret_cast<char*>(n_le), 4);
  CHECK(n_le[0] == 7);
  CHECK(n_le[1] == 0);
}

TEST_CASE("weights binary round trip and corruption") {
  Weights w(3, 4);
  for (std::size_t b = 0; b < 2; ++b) {
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 4; ++k) w.banks[b](r, k) = (b ? -1.0 : 1.0) * (10 * r + k) + 0.125;
    }
  }
  const fs::path p = scratch("w.bin");
  write_weights(p, w);
  CHECK(fs::file_size(p) == 8 + 8 + 2 * 3 * 4 * 8);
  CHECK(read_weights(p) == w);

  std::ifstream in(p, std::ios::binary);
  in.seekg(16 + 8 * 5);
  unsigned char raw[8];
  in.read(reinterpret_cast<char*>(raw), 8);
  double v = 0;
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(raw[k]) << (8 * k);
  std::memcpy(&v, &bits, 8);
  CHECK(v == w.banks[0](1, 1));

  const fs::path bad = scratch("bad.bin");
  write_text(bad, "NOTMAGIC");
  try {
    read_weights(bad);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
}

TEST_CASE("metrics csv") {
  std::vector<MetricsRow> rows(2);
  rows[0].step = 0;
  rows[0].train_loss = 0.6931471805599453;
  rows[1].step = 100;
  rows[1].train_loss = 0.1;
  rows[1].test_loss = 0.3;
  rows[1].test_error = 0.25;
  rows[1].test_acc = 0.75;
  const fs::path p = scratch("m.csv");
  write_metrics_csv(p, rows);
  const std::string text = read_text(p);
  CHECK(text.rfind("step,train_loss,test_loss,test_error,test_acc,gamma_mean,rho_pos_mean,rho_neg_mean\n", 0) == 0);
  CHECK(text.find("0,0.6931471805599453,,,,,,\n") != std::string::npos);
  const auto back = read_metrics_csv(p);
  REQUIRE(back.size() == 2);
  CHECK(back[0].train_loss == rows[0].train_loss);
  CHECK(!back[0].test_loss);
  CHECK(*back[1].test_acc == 0.75);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(
      "# comment\n"
      "data.n = 12   # trailing\n"
      "\n"
      "train.algo = dpgd\n"
      "train.sigma_b = 0.02\n"
      "analysis.c_values = 1, 2\n"
      "analysis.c_T1 = 4\n"
      "train.checkpoint_every = never\n");
  CHECK(c.n == 12);
  CHECK(c.train.algo == Algorithm::dpgd);
  CHECK(c.train.sigma_b == 0.02);
  CHECK(c.c_values == std::vector<double>{1, 2});
  CHECK(c.timescale_constants.at("c_T1") == 4.0);
  CHECK(c.train.checkpoint_every == 0);
  CHECK(c.activation.kappa == 0.1);

  const ExperimentConfig round = parse_config(to_config_text(c));
  CHECK(to_config_text(round) == to_config_text(c));

  auto line_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("data.n = 5\nbogus.key = 1\n") == 2);
  CHECK(line_of("data.n = five\n") == 1);
  CHECK(line_of("data.n 5\n") == 1);
  CHECK(line_of("data.n = 5\ndata.n = 6\n") == 2);
  CHECK(line_of("data.n = 5\n\ntrain.algo = dpgd\n") == 3);
  CHECK(line_of("train.sigma_b = 0\ntrain.algo = dpgd\n") == 1);
  CHECK(line_of("train.mode = sideways\n") == 1);
  CHECK(line_of("data.n = 0\n") == 1);
}

TEST_CASE("svg chart") {
  const std::string svg = render_line_chart(
      {{"a", {0, 1, 2}, {1.0, 0.1, 0.01}, ""}, {"b<c", {0, 2}, {0.5, 0.0}, ""}},
      {"title", "iteration", "loss", true});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("b&lt;c") != std::string::npos);
  CHECK(svg.find("nan") == std::string::npos);
  const std::string empty = render_line_chart({}, {"empty"});
  CHECK(empty.find("</svg>") != std::string::npos);
}
