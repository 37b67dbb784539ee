#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "strokeforge/case_record.hpp"
#include "strokeforge/errors.hpp"
#include "strokeforge/phantom.hpp"
#include "strokeforge/volume.hpp"
#include "test_util.hpp"

using namespace strokeforge;
using testutil::random_tensor;
using testutil::values;

namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

VolumeErrorKind kind_of(const fs::path& p) {
  try {
    read_volume(p);
  } catch (const VolumeError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error for " << p;
  return VolumeErrorKind::io;
}

}  // namespace

TEST(VolumeFile, RoundTripIsBitExact) {
  TempDir dir("sf_volume_rt");
  auto t = random_tensor({6, 64, 64}, 1, -1e6, 1e6);
  write_volume(dir.path() / "a.sfv", t, {"f0", "f1", "f2", "f3", "f4", "f5"});
  auto v = read_volume(dir.path() / "a.sfv");
  EXPECT_EQ(v.data.shape(), t.shape());
  EXPECT_EQ(std::memcmp(v.data.data().data(), t.data().data(), t.numel() * 8), 0);
  EXPECT_EQ(v.channels.size(), 6u);
  EXPECT_EQ(v.channels[5], "f5");
  // Writing the read volume back reproduces the file byte for byte.
  write_volume(dir.path() / "b.sfv", v.data, v.channels);
  EXPECT_EQ(slurp(dir.path() / "a.sfv"), slurp(dir.path() / "b.sfv"));
}

TEST(VolumeFile, HeaderIsPlainText) {
  TempDir dir("sf_volume_header");
  write_volume(dir.path() / "a.sfv", Tensor::from_data({2, 1}, {1.0, -2.0}), {"x"});
  const auto bytes = slurp(dir.path() / "a.sfv");
  const std::string header = "SFV1\ndims 2 2 1\nchannels 1 x\ntype f64le\nend\n";
  ASSERT_EQ(bytes.size(), header.size() + 16);
  EXPECT_EQ(bytes.substr(0, header.size()), header);
  // 1.0 little-endian: 00 .. 00 f0 3f.
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 6]), 0xf0);
}

TEST(VolumeFile, DistinctNamedErrors) {
  TempDir dir("sf_volume_err");
  const auto good = dir.path() / "good.sfv";
  write_volume(good, random_tensor({2, 3, 4}, 2));
  const auto bytes = slurp(good);

  auto corrupt = bytes;
  corrupt[1] = 'X';
  spit(dir.path() / "magic.sfv", corrupt);
  EXPECT_EQ(kind_of(dir.path() / "magic.sfv"), VolumeErrorKind::bad_magic);

  spit(dir.path() / "short.sfv", bytes.substr(0, bytes.size() - 8));
  EXPECT_EQ(kind_of(dir.path() / "short.sfv"), VolumeErrorKind::truncated);
  try {
    read_volume(dir.path() / "short.sfv");
  } catch (const VolumeError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 192 bytes, found 184"), std::string::npos) << e.what();
  }

  spit(dir.path() / "long.sfv", bytes + std::string(8, '\0'));
  EXPECT_EQ(kind_of(dir.path() / "long.sfv"), VolumeErrorKind::dims_mismatch);

  auto header = bytes;
  header.replace(header.find("dims 3"), 6, "dimz 3");
  spit(dir.path() / "header.sfv", header);
  EXPECT_EQ(kind_of(dir.path() / "header.sfv"), VolumeErrorKind::bad_header);

  EXPECT_EQ(kind_of(dir.path() / "missing.sfv"), VolumeErrorKind::io);
  EXPECT_THROW(write_volume(dir.path() / "r5.sfv", Tensor::zeros({1, 1, 1, 1, 1})), VolumeError);
}

TEST(CaseFiles, RoundTripPhantomCase) {
  TempDir dir("sf_case_rt");
  PhantomSpec spec;
  spec.image_size = 16;
  spec.lesion_radius_min = 1.5;
  spec.lesion_radius_max = 3.0;
  auto c = generate_phantom_case(spec, 2);
  write_case(dir.path() / c.case_id, c);
  for (const char* f : {"ctp.sfv", "cbf.sfv", "cbv.sfv", "mtt.sfv", "tmax.sfv", "dwi.sfv", "mask.sfv", "case.json"}) {
    EXPECT_TRUE(fs::exists(dir.path() / c.case_id / f)) << f;
  }
  auto r = read_case(dir.path() / c.case_id);
  EXPECT_EQ(r.case_id, c.case_id);
  EXPECT_EQ(values(r.ctp.frames), values(c.ctp.frames));
  EXPECT_EQ(values(r.maps.tmax), values(c.maps.tmax));
  EXPECT_EQ(values(*r.dwi), values(*c.dwi));
  EXPECT_EQ(*r.mask, *c.mask);
  EXPECT_EQ(r.ctp.frame_interval, c.ctp.frame_interval);

  auto loaded = SfvDirectoryLoader{}.load(dir.path());
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].case_id, c.case_id);
}

TEST(CaseFiles, UnlabelledCaseAndMissingManifest) {
  TempDir dir("sf_case_unlabelled");
  PhantomSpec spec;
  spec.image_size = 16;
  spec.lesion_radius_min = 1.5;
  spec.lesion_radius_max = 3.0;
  auto c = generate_phantom_case(spec, 0);
  c.dwi.reset();
  c.mask.reset();
  write_case(dir.path() / "u", c);
  EXPECT_FALSE(fs::exists(dir.path() / "u" / "mask.sfv"));
  auto r = read_case(dir.path() / "u");
  EXPECT_FALSE(r.has_labels());
  EXPECT_THROW(read_case(dir.path() / "nothing"), InputError);
  EXPECT_THROW(SfvDirectoryLoader{}.load(dir.path() / "nothing"), InputError);
}

TEST(CaseFiles, ValidationCatchesShapeMismatch) {
  PhantomSpec spec;
  spec.image_size = 16;
  spec.lesion_radius_min = 1.5;
  spec.lesion_radius_max = 3.0;
  auto c = generate_phantom_case(spec, 0);
  c.maps.cbf = Tensor::zeros({16, 8});
  EXPECT_THROW(c.validate(), ShapeError);
}
