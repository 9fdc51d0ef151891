#include "dpgd/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dpgd/errors.hpp"

namespace dpgd {

namespace {

constexpr char kDatasetMagic[8] = {'D', 'P', 'G', 'D', 'D', 'S', '0', '1'};
constexpr char kWeightsMagic[8] = {'D', 'P', 'G', 'D', 'W', '0', '0', '1'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(reinterpret_cast<const char*>(&v), 1); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::io, "write failed for " + path_.string());
  }

 private:
  template <typename U>
  void le(U v) {
    std::array<char, sizeof(U)> buf{};
    for (std::size_t k = 0; k < sizeof(U); ++k) buf[k] = static_cast<char>((v >> (8 * k)) & 0xFF);
    bytes(buf.data(), buf.size());
  }
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw Error(ErrorCode::io, "cannot open " + path.string());
  }
  void bytes(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) throw Error(ErrorCode::io, "truncated file " + path_.string());
  }
  std::uint8_t u8() {
    char c = 0;
    bytes(&c, 1);
    return static_cast<std::uint8_t>(c);
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  void expect_magic(const char (&magic)[8]) {
    char buf[8];
    bytes(buf, 8);
    if (std::memcmp(buf, magic, 8) != 0) {
      throw Error(ErrorCode::io, path_.string() + ": bad magic, expected " +
                                     std::string(magic, 8));
    }
  }
  void expect_end() {
    if (in_.peek() != std::char_traits<char>::eof()) {
      throw Error(ErrorCode::io, path_.string() + ": trailing bytes");
    }
  }

 private:
  template <typename U>
  U le() {
    std::array<unsigned char, sizeof(U)> buf{};
    bytes(reinterpret_cast<char*>(buf.data()), buf.size());
    U v = 0;
    for (std::size_t k = 0; k < sizeof(U); ++k) v |= static_cast<U>(buf[k]) << (8 * k);
    return v;
  }
  std::filesystem::path path_;
  std::ifstream in_;
};

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::io, "bad numeric CSV field '" + s + "'");
  }
  return v;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  Writer w(path);
  w.bytes(kDatasetMagic, 8);
  w.u32(static_cast<std::uint32_t>(data.n()));
  w.u32(static_cast<std::uint32_t>(data.d()));
  w.f64(data.noise().sigma_p);
  w.u64(data.seed());
  for (Eigen::Index k = 0; k < data.d(); ++k) w.f64(data.signal().mu[k]);
  for (const Example& ex : data.examples()) {
    w.u8(ex.label > 0 ? 0x01 : 0xFF);
    w.u8(static_cast<std::uint8_t>(ex.signal_slot));
    for (Eigen::Index k = 0; k < data.d(); ++k) w.f64(ex.xi[k]);
  }
  w.finish();
}

Dataset read_dataset(const std::filesystem::path& path, bool with_gram) {
  Reader r(path);
  r.expect_magic(kDatasetMagic);
  const std::uint32_t n = r.u32();
  const std::uint32_t d = r.u32();
  const double sigma_p = r.f64();
  const std::uint64_t seed = r.u64();
  SignalSpec signal{Eigen::VectorXd(d)};
  for (std::uint32_t k = 0; k < d; ++k) signal.mu[k] = r.f64();
  std::vector<Example> examples;
  examples.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint8_t label = r.u8();
    const std::uint8_t slot = r.u8();
    if ((label != 0x01 && label != 0xFF) || slot > 1) {
      throw Error(ErrorCode::io, path.string() + ": corrupt example record " + std::to_string(i));
    }
    Eigen::VectorXd xi(d);
    for (std::uint32_t k = 0; k < d; ++k) xi[k] = r.f64();
    examples.push_back(make_example(signal, label == 0x01 ? 1 : -1,
                                    slot == 0 ? PatchSlot::first : PatchSlot::second,
                                    std::move(xi)));
  }
  r.expect_end();
  return Dataset(std::move(examples), std::move(signal), NoiseSpec{sigma_p}, seed, with_gram);
}

void write_weights(const std::filesystem::path& path, const Weights& wt) {
  Writer w(path);
  w.bytes(kWeightsMagic, 8);
  w.u32(static_cast<std::uint32_t>(wt.m()));
  w.u32(static_cast<std::uint32_t>(wt.d()));
  for (const auto& bank : wt.banks) {
    for (Eigen::Index r = 0; r < bank.rows(); ++r) {
      for (Eigen::Index k = 0; k < bank.cols(); ++k) w.f64(bank(r, k));
    }
  }
  w.finish();
}

Weights read_weights(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kWeightsMagic);
  const std::uint32_t m = r.u32();
  const std::uint32_t d = r.u32();
  Weights w;
  for (auto& bank : w.banks) {
    bank.resize(m, d);
    for (std::uint32_t row = 0; row < m; ++row) {
      for (std::uint32_t k = 0; k < d; ++k) bank(row, k) = r.f64();
    }
  }
  r.expect_end();
  return w;
}

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os << "step,train_loss,test_loss,test_error,test_acc,gamma_mean,rho_pos_mean,rho_neg_mean\n";
  for (const auto& r : rows) {
    os << r.step << ',' << format_double(r.train_loss) << ',' << opt(r.test_loss) << ','
       << opt(r.test_error) << ',' << opt(r.test_acc) << ',' << opt(r.gamma_mean) << ','
       << opt(r.rho_pos_mean) << ',' << opt(r.rho_neg_mean) << '\n';
  }
  write_text(path, os.str());
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("step,train_loss", 0) != 0) {
    throw Error(ErrorCode::io, path.string() + ": not a metrics CSV");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 8) throw Error(ErrorCode::io, path.string() + ": bad row '" + line + "'");
    MetricsRow r;
    r.step = static_cast<std::int64_t>(*parse_opt(cells[0]));
    r.train_loss = *parse_opt(cells[1]);
    r.test_loss = parse_opt(cells[2]);
    r.test_error = parse_opt(cells[3]);
    r.test_acc = parse_opt(cells[4]);
    r.gamma_mean = parse_opt(cells[5]);
    r.rho_pos_mean = parse_opt(cells[6]);
    r.rho_neg_mean = parse_opt(cells[7]);
    rows.push_back(r);
  }
  return rows;
}

void write_decomposition_csv(const std::filesystem::path& path,
                             const std::vector<DecompositionRow>& rows) {
  std::ostringstream os;
  os << "step,j,r,gamma,rho_pos_sum,rho_neg_sum\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.j << ',' << r.r << ',' << format_double(r.gamma) << ','
       << format_double(r.rho_pos_sum) << ',' << format_double(r.rho_neg_sum) << '\n';
  }
  write_text(path, os.str());
}

void write_lambda_csv(const std::filesystem::path& path, const std::vector<LambdaRow>& rows) {
  std::ostringstream os;
  os << "step,i,lambda\n";
  for (const auto& r : rows) os << r.step << ',' << r.i << ',' << format_double(r.lambda) << '\n';
  write_text(path, os.str());
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "sigma_p,algo,step,train_loss,test_loss,test_acc\n";
  for (const auto& r : rows) {
    os << format_double(r.sigma_p) << ',' << to_string(r.algo) << ',' << r.metrics.step << ','
       << format_double(r.metrics.train_loss) << ',' << opt(r.metrics.test_loss) << ','
       << opt(r.metrics.test_acc) << '\n';
  }
  write_text(path, os.str());
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dpgd
