#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "strokeforge/case_record.hpp"
#include "strokeforge/pipeline.hpp"

namespace strokeforge {

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(const std::string& text);
std::string sha256_file(const std::filesystem::path& path);
/// Digest over case ids and every tensor's raw bytes, in case order.
std::string dataset_checksum(const std::vector<CaseRecord>& cases);

/// Replaces cfg.seed with $STROKEFORGE_SEED when set; returns true if it did.
/// Throws ConfigError when the variable is not an unsigned integer.
bool apply_seed_override(TrainConfig& cfg);

/// Machine-readable record of one run.
struct RunReport {
  std::string command;
  std::optional<TrainConfig> config;
  std::uint64_t seed = 0;
  std::vector<FoldReport> folds;
  std::optional<double> mean_dice;
  double wall_seconds = 0;
  /// Artifact name -> SHA-256 hex digest.
  std::map<std::string, std::string> checksums;
  /// Command-specific fields merged into the top level.
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

RunReport make_run_report(const std::string& command, const TrainConfig& cfg, const CvReport& cv);

/// fold,epoch,lr,total,extractor,generator,segmentor with full precision.
std::string loss_csv(const std::vector<FoldReport>& folds);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace strokeforge
