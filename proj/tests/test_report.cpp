#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <set>

#include "strokeforge/errors.hpp"
#include "strokeforge/overlay.hpp"
#include "strokeforge/phantom.hpp"
#include "strokeforge/report.hpp"
#include "test_util.hpp"

using namespace strokeforge;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("sf_report_" + name);
  std::filesystem::remove_all(p);
  return p;
}

LesionMask square_mask(std::size_t n, std::size_t y0, std::size_t x0, std::size_t side) {
  LesionMask m(n, n, std::vector<std::uint8_t>(n * n, 0));
  for (std::size_t y = y0; y < y0 + side; ++y)
    for (std::size_t x = x0; x < x0 + side; ++x) m.values[y * n + x] = 1;
  return m;
}

}  // namespace

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(std::string{}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex(std::string{"abc"}), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto path = scratch("abc.txt");
  write_text(path, "abc");
  EXPECT_EQ(sha256_file(path), sha256_hex(std::string{"abc"}));
  std::filesystem::remove(path);
}

TEST(Sha256, DatasetChecksumTracksContent) {
  PhantomSpec spec;
  spec.n_cases = 2;
  spec.image_size = 32;
  spec.lesion_radius_min = 3;
  spec.lesion_radius_max = 5;
  auto a = generate_phantom_set(spec);
  const auto base = dataset_checksum(a);
  EXPECT_EQ(dataset_checksum(generate_phantom_set(spec)), base);
  a[1].maps.cbf.mutable_data()[7] += 1e-12;
  EXPECT_NE(dataset_checksum(a), base);
  spec.seed += 1;
  EXPECT_NE(dataset_checksum(generate_phantom_set(spec)), base);
}

TEST(SeedOverride, EnvironmentReplacesSeed) {
  auto cfg = TrainConfig::desk();
  ::unsetenv("STROKEFORGE_SEED");
  EXPECT_FALSE(apply_seed_override(cfg));
  ::setenv("STROKEFORGE_SEED", "99", 1);
  EXPECT_TRUE(apply_seed_override(cfg));
  EXPECT_EQ(cfg.seed, 99u);
  ::setenv("STROKEFORGE_SEED", "9x", 1);
  EXPECT_THROW(apply_seed_override(cfg), ConfigError);
  ::unsetenv("STROKEFORGE_SEED");
}

TEST(Report, JsonAndCsvCarryFoldsAndLosses) {
  FoldReport f{1, {"case_0001", "case_0003"}, {0.5, 1.0}, 0.75, {{0, 0.1, 2.0, 0.5, 0.25, 1.25}}};
  CvReport cv{{f}, 0.75};
  auto cfg = TrainConfig::desk();
  auto r = make_run_report("train", cfg, cv);
  const auto j = r.to_json();
  EXPECT_EQ(j["command"], "train");
  EXPECT_EQ(j["mean_dice"], 0.75);
  EXPECT_EQ(j["folds"][0]["case_dice"]["case_0003"], 1.0);
  EXPECT_EQ(j["folds"][0]["losses"][0]["generator"], 0.25);
  EXPECT_EQ(j["config"]["base_lr"], "0.002");
  EXPECT_EQ(j["checksums"]["config"], sha256_hex(cfg.to_text()));
  EXPECT_EQ(loss_csv(cv.folds), "fold,epoch,lr,total,extractor,generator,segmentor\n1,0,0.1,2,0.5,0.25,1.25\n");
}

TEST(Overlay, EmptyMasksGiveGrayscale) {
  const auto img = testutil::random_tensor({12, 9}, 3, 0.0, 5.0);
  LesionMask empty(12, 9, std::vector<std::uint8_t>(108, 0));
  const auto o = render_overlay(img, empty, empty);
  std::set<int> levels;
  for (std::size_t y = 0; y < 12; ++y)
    for (std::size_t x = 0; x < 9; ++x) {
      const auto px = o.at(y, x);
      EXPECT_EQ(px[0], px[1]);
      EXPECT_EQ(px[1], px[2]);
      levels.insert(px[0]);
    }
  EXPECT_TRUE(levels.count(0) && levels.count(255));
}

TEST(Overlay, ContoursCarryTheirColours) {
  const auto img = Tensor::full({10, 10}, 2.0);
  const auto truth = square_mask(10, 2, 2, 4);
  const auto pred = square_mask(10, 2, 4, 4);
  const auto o = render_overlay(img, truth, pred);
  EXPECT_EQ(o.at(3, 2), (std::array<std::uint8_t, 3>{0, 255, 0}));
  EXPECT_EQ(o.at(3, 7), (std::array<std::uint8_t, 3>{255, 0, 0}));
  EXPECT_EQ(o.at(2, 4), (std::array<std::uint8_t, 3>{255, 255, 0}));
  // Interior of the truth square is not a contour.
  EXPECT_EQ(o.at(3, 3), (std::array<std::uint8_t, 3>{0, 0, 0}));
  EXPECT_THROW(render_overlay(Tensor::zeros({10, 9}), truth, pred), ShapeError);
}

TEST(Overlay, PngRoundTripKeepsPixels) {
  const auto img = testutil::random_tensor({17, 23}, 4, -1.0, 1.0);
  const auto truth = square_mask(23, 5, 5, 6);
  LesionMask t(17, 23, std::vector<std::uint8_t>(truth.values.begin(), truth.values.begin() + 17 * 23));
  const auto rendered = render_overlay(img, t, t);
  const auto path = scratch("overlay.png");
  emit_overlay(path, img, t, t);
  const auto decoded = read_png(path);
  EXPECT_EQ(decoded.height, 17u);
  EXPECT_EQ(decoded.width, 23u);
  EXPECT_EQ(decoded.rgb, rendered.rgb);
  std::filesystem::remove(path);
  EXPECT_THROW(read_png(path), InputError);
}
