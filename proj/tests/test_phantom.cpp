#include <gtest/gtest.h>

#include <cmath>

#include "strokeforge/config.hpp"
#include "strokeforge/errors.hpp"
#include "strokeforge/perfusion.hpp"
#include "strokeforge/phantom.hpp"

using namespace strokeforge;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.n_cases = 6;
  s.image_size = 32;
  s.lesion_radius_min = 2.0;
  s.lesion_radius_max = 5.0;
  return s;
}

std::vector<double> bytes_of(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Config, ParsesValuesListsAndComments) {
  auto cfg = KeyValueConfig::parse("# header\nalpha = 1.5\nmilestones = 24, 34  # trailing\nname = x\nflag = true\n");
  EXPECT_DOUBLE_EQ(cfg.get_double("alpha", 0.0), 1.5);
  EXPECT_EQ(cfg.get_uints("milestones", {}), (std::vector<std::uint64_t>{24, 34}));
  EXPECT_EQ(cfg.get_string("name", ""), "x");
  EXPECT_TRUE(cfg.get_bool("flag", false));
  EXPECT_EQ(cfg.get_uint("missing", 7), 7u);
  EXPECT_NO_THROW(cfg.reject_unused());
}

TEST(Config, ErrorsNameTheOffendingToken) {
  try {
    KeyValueConfig::parse("alpha = 1\nbogus line\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus line"), std::string::npos);
  }
  auto cfg = KeyValueConfig::parse("alhpa = 1\n");
  try {
    cfg.reject_unused();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("alhpa"), std::string::npos);
  }
  auto bad = KeyValueConfig::parse("alpha = one\n");
  EXPECT_THROW(bad.get_double("alpha", 0.0), ConfigError);
  EXPECT_THROW(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
}

TEST(Phantom, GammaVariatePeaksAtOne) {
  EXPECT_DOUBLE_EQ(gamma_variate(1.0), 1.0);
  EXPECT_DOUBLE_EQ(gamma_variate(0.0), 0.0);
  EXPECT_DOUBLE_EQ(gamma_variate(-1.0), 0.0);
  EXPECT_LT(gamma_variate(0.9), 1.0);
  EXPECT_LT(gamma_variate(1.1), 1.0);
}

TEST(Phantom, MaskIsExactlyTheDisk) {
  auto spec = small_spec();
  for (std::size_t i = 0; i < spec.n_cases; ++i) {
    auto c = generate_phantom_case(spec, i);
    ASSERT_TRUE(c.has_labels());
    EXPECT_NO_THROW(c.validate());
    const auto& m = *c.mask;
    // The disk is recovered from its pixel centroid and the area bound.
    double cy = 0, cx = 0;
    const double count = static_cast<double>(m.count());
    ASSERT_GT(count, 0.0);
    for (std::size_t y = 0; y < m.height; ++y)
      for (std::size_t x = 0; x < m.width; ++x)
        if (m.values[y * m.width + x]) {
          cy += y;
          cx += x;
        }
    cy /= count;
    cx /= count;
    const double r_est = std::sqrt(count / M_PI);
    EXPECT_GE(r_est, spec.lesion_radius_min - 1.0);
    EXPECT_LE(r_est, spec.lesion_radius_max + 1.0);
    // Every mask pixel lies within the estimated radius (plus a pixel) of the centroid.
    for (std::size_t y = 0; y < m.height; ++y)
      for (std::size_t x = 0; x < m.width; ++x)
        if (m.values[y * m.width + x]) EXPECT_LE(std::hypot(y - cy, x - cx), r_est + 1.5);
  }
}

TEST(Phantom, NoiseNeverTouchesTheMask) {
  auto clean = small_spec();
  clean.noise_sigma = 0.0;
  auto noisy = small_spec();
  noisy.noise_sigma = 0.3;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(*generate_phantom_case(clean, i).mask, *generate_phantom_case(noisy, i).mask);
  }
}

TEST(Phantom, LesionHasProlongedTmaxAndBrightDwi) {
  auto spec = small_spec();
  spec.n_cases = 10;
  for (const auto& c : generate_phantom_set(spec)) {
    const auto& m = *c.mask;
    double in = 0, out = 0, din = 0, dout = 0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (m.values[i]) {
        in += c.maps.tmax[i];
        din += (*c.dwi)[i];
        ++nin;
      } else {
        out += c.maps.tmax[i];
        dout += (*c.dwi)[i];
        ++nout;
      }
    }
    EXPECT_GT(in / nin, out / nout) << c.case_id;
    EXPECT_GT(din / nin - dout / nout, 3.0 * spec.noise_sigma) << c.case_id;
  }
}

TEST(Phantom, DeterministicPerCaseIndex) {
  auto spec = small_spec();
  auto a = generate_phantom_case(spec, 3);
  auto b = generate_phantom_case(spec, 3);
  auto other = generate_phantom_case(spec, 4);
  EXPECT_EQ(bytes_of(a.ctp.frames), bytes_of(b.ctp.frames));
  EXPECT_EQ(bytes_of(a.maps.cbf), bytes_of(b.maps.cbf));
  EXPECT_EQ(bytes_of(*a.dwi), bytes_of(*b.dwi));
  EXPECT_NE(bytes_of(a.ctp.frames), bytes_of(other.ctp.frames));
  EXPECT_EQ(a.case_id, "case_0003");
}

TEST(Phantom, NoiseFreeCurvePeaksAtConfiguredFrame) {
  auto spec = small_spec();
  spec.noise_sigma = 0.0;
  for (std::size_t i = 0; i < spec.n_cases; ++i) {
    auto c = generate_phantom_case(spec, i);
    auto tdc = analyze_curve(c.ctp);
    EXPECT_FALSE(tdc.fallback);
    const auto raw_peak = std::max_element(tdc.values.begin(), tdc.values.end()) - tdc.values.begin();
    EXPECT_EQ(static_cast<double>(raw_peak), spec.peak_frame);
    EXPECT_EQ(static_cast<double>(tdc.points.peak), spec.peak_frame);
  }
}

TEST(Phantom, OversizedLesionIsRejected) {
  auto spec = small_spec();
  spec.lesion_radius_max = 14.0;
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(generate_phantom_case(spec, 0), ConfigError);
  spec = small_spec();
  spec.n_frames = 7;
  EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Phantom, SpecFromConfig) {
  auto cfg = KeyValueConfig::parse(
      "n_cases = 3\nimage_size = 32\nlesion_radius_range = 2, 4\ncontrast_curve_params = 3, 8, 50\nseed = 9\n");
  auto s = PhantomSpec::from_config(cfg);
  EXPECT_EQ(s.n_cases, 3u);
  EXPECT_DOUBLE_EQ(s.lesion_radius_max, 4.0);
  EXPECT_DOUBLE_EQ(s.onset_frame, 3.0);
  EXPECT_DOUBLE_EQ(s.peak_frame, 8.0);
  EXPECT_DOUBLE_EQ(s.peak_height, 50.0);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_THROW(PhantomSpec::from_config(KeyValueConfig::parse("n_case = 3\n")), ConfigError);
}
