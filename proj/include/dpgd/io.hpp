#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpgd/data.hpp"
#include "dpgd/decomp.hpp"
#include "dpgd/model.hpp"
#include "dpgd/train.hpp"

namespace dpgd {

/// "DPGDDS01", little-endian: u32 n, u32 d, f64 sigma_p, u64 seed, f64[d] mu,
/// then per example i8 label (+1/-1), u8 signal slot, f64[d] xi.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path, bool with_gram = true);

/// "DPGDW001", little-endian: u32 m, u32 d, then the j=+1 rows and the j=-1 rows, row-major f64.
void write_weights(const std::filesystem::path& path, const Weights& w);
Weights read_weights(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double x);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);
void write_decomposition_csv(const std::filesystem::path& path,
                             const std::vector<DecompositionRow>& rows);
void write_lambda_csv(const std::filesystem::path& path, const std::vector<LambdaRow>& rows);

struct SweepRow {
  double sigma_p;
  Algorithm algo;
  MetricsRow metrics;
};
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace dpgd
