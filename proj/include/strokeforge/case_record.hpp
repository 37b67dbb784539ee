#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "strokeforge/geometry.hpp"
#include "strokeforge/perfusion.hpp"

namespace strokeforge {

struct PerfusionMaps {
  Tensor cbf, cbv, mtt, tmax;  // each [H,W]
};

struct CaseRecord {
  std::string case_id;
  CtpVolume ctp;
  PerfusionMaps maps;
  std::optional<Tensor> dwi;         // [H,W]
  std::optional<LesionMask> mask;

  std::size_t height() const { return ctp.height(); }
  std::size_t width() const { return ctp.width(); }
  bool has_labels() const { return dwi.has_value() && mask.has_value(); }
  /// Throws ShapeError / InputError when shapes disagree or data is invalid.
  void validate() const;
};

/// Case directory layout: ctp.sfv, cbf.sfv, cbv.sfv, mtt.sfv, tmax.sfv and,
/// for labelled cases, dwi.sfv and mask.sfv, plus a case.json manifest.
void write_case(const std::filesystem::path& dir, const CaseRecord& c);
CaseRecord read_case(const std::filesystem::path& dir);

/// Source of cases. A loader for clinical data formats would implement this.
class CaseLoader {
 public:
  virtual ~CaseLoader() = default;
  virtual std::vector<CaseRecord> load(const std::filesystem::path& root) const = 0;
};

/// Every immediate subdirectory of `root` holding a case.json, sorted by name.
class SfvDirectoryLoader : public CaseLoader {
 public:
  std::vector<CaseRecord> load(const std::filesystem::path& root) const override;
};

}  // namespace strokeforge
