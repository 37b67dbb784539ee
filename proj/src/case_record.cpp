#include "strokeforge/case_record.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>

#include "strokeforge/errors.hpp"
#include "strokeforge/volume.hpp"

namespace strokeforge {

void CaseRecord::validate() const {
  ctp.validate();
  const Shape plane{height(), width()};
  auto check = [&](const Tensor& t, const char* name) {
    if (!t.defined() || t.shape() != plane) {
      throw ShapeError(std::string(name) + " must be " + shape_str(plane) + " in case " + case_id);
    }
  };
  check(maps.cbf, "CBF");
  check(maps.cbv, "CBV");
  check(maps.mtt, "MTT");
  check(maps.tmax, "Tmax");
  if (dwi) check(*dwi, "DWI");
  if (mask && (mask->height != height() || mask->width != width())) {
    throw ShapeError("mask extent does not match the CTP plane in case " + case_id);
  }
}

void write_case(const std::filesystem::path& dir, const CaseRecord& c) {
  c.validate();
  std::filesystem::create_directories(dir);
  write_volume(dir / "ctp.sfv", c.ctp.frames, {"ctp"});
  write_volume(dir / "cbf.sfv", c.maps.cbf, {"cbf"});
  write_volume(dir / "cbv.sfv", c.maps.cbv, {"cbv"});
  write_volume(dir / "mtt.sfv", c.maps.mtt, {"mtt"});
  write_volume(dir / "tmax.sfv", c.maps.tmax, {"tmax"});
  if (c.dwi) write_volume(dir / "dwi.sfv", *c.dwi, {"dwi"});
  if (c.mask) write_volume(dir / "mask.sfv", c.mask->to_tensor(), {"mask"});
  nlohmann::json manifest = {
      {"case_id", c.case_id},
      {"frame_interval", c.ctp.frame_interval},
      {"frames", c.ctp.n_frames()},
      {"height", c.height()},
      {"width", c.width()},
      {"labelled", c.has_labels()},
  };
  std::ofstream(dir / "case.json") << manifest.dump(2) << '\n';
}

CaseRecord read_case(const std::filesystem::path& dir) {
  std::ifstream is(dir / "case.json");
  if (!is) throw InputError("missing case manifest " + (dir / "case.json").string());
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed case manifest in " + dir.string() + ": " + e.what());
  }
  CaseRecord c;
  c.case_id = manifest.value("case_id", dir.filename().string());
  c.ctp.frames = read_volume(dir / "ctp.sfv").data;
  c.ctp.frame_interval = manifest.value("frame_interval", 1.0);
  c.maps.cbf = read_volume(dir / "cbf.sfv").data;
  c.maps.cbv = read_volume(dir / "cbv.sfv").data;
  c.maps.mtt = read_volume(dir / "mtt.sfv").data;
  c.maps.tmax = read_volume(dir / "tmax.sfv").data;
  if (std::filesystem::exists(dir / "dwi.sfv")) c.dwi = read_volume(dir / "dwi.sfv").data;
  if (std::filesystem::exists(dir / "mask.sfv")) c.mask = LesionMask::from_tensor(read_volume(dir / "mask.sfv").data);
  c.validate();
  return c;
}

std::vector<CaseRecord> SfvDirectoryLoader::load(const std::filesystem::path& root) const {
  if (!std::filesystem::is_directory(root)) throw InputError("data directory '" + root.string() + "' does not exist");
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "case.json")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<CaseRecord> cases;
  cases.reserve(dirs.size());
  for (const auto& d : dirs) cases.push_back(read_case(d));
  return cases;
}

}  // namespace strokeforge
