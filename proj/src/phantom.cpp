#include "strokeforge/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "strokeforge/errors.hpp"

namespace strokeforge {

namespace {

constexpr double kBrainSemiAxisY = 0.44;
constexpr double kBrainSemiAxisX = 0.38;
constexpr double kHealthyDwi = 0.3;
constexpr double kCtpBaseline = 20.0;
constexpr double kPenumbraCbf = 0.85;
constexpr double kPenumbraTransit = 1.5;
constexpr int kMaxPlacementTries = 10000;

struct Ellipse {
  double cy, cx, ry, rx;
  double level(double y, double x) const {
    const double a = (y - cy) / ry;
    const double b = (x - cx) / rx;
    return a * a + b * b;
  }
};

Ellipse brain_of(std::size_t s) {
  const double c = (static_cast<double>(s) - 1.0) / 2.0;
  return {c, c, kBrainSemiAxisY * static_cast<double>(s), kBrainSemiAxisX * static_cast<double>(s)};
}

// The disk (with a one-pixel margin) lies inside the ellipse when every
// boundary sample of the enlarged circle does.
bool disk_inside(const Ellipse& e, double y, double x, double r) {
  constexpr int kSamples = 128;
  for (int i = 0; i < kSamples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / kSamples;
    if (e.level(y + (r + 1.0) * std::sin(t), x + (r + 1.0) * std::cos(t)) > 1.0) return false;
  }
  return true;
}

Tensor plane(std::size_t s, std::vector<double> v) { return Tensor::from_data({s, s}, std::move(v)); }

}  // namespace

void PhantomSpec::validate() const {
  if (n_cases == 0) throw ConfigError("phantom n_cases must be positive");
  if (image_size < 8) throw ConfigError("phantom image_size must be at least 8");
  if (n_frames < kMinFrames) {
    throw ConfigError("phantom n_frames must be at least " + std::to_string(kMinFrames) + ", got " +
                      std::to_string(n_frames));
  }
  if (!(lesion_radius_min > 0.0) || lesion_radius_max < lesion_radius_min) {
    throw ConfigError("phantom lesion_radius_range must satisfy 0 < min <= max");
  }
  const auto e = brain_of(image_size);
  if (lesion_radius_max + 1.0 >= std::min(e.ry, e.rx)) {
    throw ConfigError("phantom lesion radius " + std::to_string(lesion_radius_max) +
                      " does not fit inside the brain ellipse (semi-axes " + std::to_string(e.ry) + ", " +
                      std::to_string(e.rx) + ")");
  }
  if (!(onset_frame >= 0.0) || !(peak_frame > onset_frame) ||
      peak_frame + core_delay >= static_cast<double>(n_frames)) {
    throw ConfigError("phantom contrast_curve_params need 0 <= onset < peak and a delayed peak before the last frame");
  }
  if (!(peak_height > 0.0)) throw ConfigError("phantom contrast peak height must be positive");
  if (!(noise_sigma >= 0.0) || !(map_noise_factor >= 0.0)) throw ConfigError("phantom noise must be non-negative");
  if (!(penumbra_ratio >= 1.0)) throw ConfigError("phantom penumbra_ratio must be at least 1");
  if (!(core_delay >= 0.0)) throw ConfigError("phantom core_delay must be non-negative");
}

PhantomSpec PhantomSpec::from_config(const KeyValueConfig& cfg) {
  PhantomSpec s;
  s.n_cases = cfg.get_uint("n_cases", s.n_cases);
  s.image_size = cfg.get_uint("image_size", s.image_size);
  s.n_frames = cfg.get_uint("n_frames", s.n_frames);
  const auto range = cfg.get_doubles("lesion_radius_range", {s.lesion_radius_min, s.lesion_radius_max});
  if (range.size() != 2) throw ConfigError("lesion_radius_range expects 'min, max'");
  s.lesion_radius_min = cfg.get_double("lesion_radius_min", range[0]);
  s.lesion_radius_max = cfg.get_double("lesion_radius_max", range[1]);
  const auto curve = cfg.get_doubles("contrast_curve_params", {s.onset_frame, s.peak_frame, s.peak_height});
  if (curve.size() != 3) throw ConfigError("contrast_curve_params expects 'onset, peak, height'");
  s.onset_frame = cfg.get_double("onset_frame", curve[0]);
  s.peak_frame = cfg.get_double("peak_frame", curve[1]);
  s.peak_height = cfg.get_double("peak_height", curve[2]);
  s.noise_sigma = cfg.get_double("noise_sigma", s.noise_sigma);
  s.seed = cfg.get_uint("seed", s.seed);
  s.cbf_factor = cfg.get_double("cbf_factor", s.cbf_factor);
  s.cbv_factor = cfg.get_double("cbv_factor", s.cbv_factor);
  s.mtt_factor = cfg.get_double("mtt_factor", s.mtt_factor);
  s.tmax_factor = cfg.get_double("tmax_factor", s.tmax_factor);
  s.dwi_boost = cfg.get_double("dwi_boost", s.dwi_boost);
  s.core_delay = cfg.get_double("core_delay", s.core_delay);
  s.penumbra_ratio = cfg.get_double("penumbra_ratio", s.penumbra_ratio);
  s.map_noise_factor = cfg.get_double("map_noise_factor", s.map_noise_factor);
  cfg.reject_unused();
  s.validate();
  return s;
}

double gamma_variate(double tau, double alpha) {
  if (tau <= 0.0) return 0.0;
  return std::pow(tau, alpha) * std::exp(alpha * (1.0 - tau));
}

CaseRecord generate_phantom_case(const PhantomSpec& spec, std::size_t case_index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(case_index), static_cast<std::uint32_t>(case_index >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t s = spec.image_size;
  const auto brain = brain_of(s);
  const double r = spec.lesion_radius_min + (spec.lesion_radius_max - spec.lesion_radius_min) * unit(rng);
  double ly = brain.cy, lx = brain.cx;
  bool placed = false;
  for (int i = 0; i < kMaxPlacementTries && !placed; ++i) {
    ly = brain.cy + (2.0 * unit(rng) - 1.0) * (brain.ry - r - 1.0);
    lx = brain.cx + (2.0 * unit(rng) - 1.0) * (brain.rx - r - 1.0);
    placed = disk_inside(brain, ly, lx, r);
  }
  if (!placed) throw ConfigError("could not place a lesion of radius " + std::to_string(r) + " inside the brain");

  // Smooth tissue texture so the healthy background is not flat.
  const double fy = 1.0 + 2.0 * unit(rng), fx = 1.0 + 2.0 * unit(rng);
  const double py = 2.0 * std::numbers::pi * unit(rng), px = 2.0 * std::numbers::pi * unit(rng);

  const std::size_t n = s * s;
  std::vector<double> cbf(n, 0.0), cbv(n, 0.0), mtt(n, 0.0), tmax(n, 0.0), dwi(n, 0.0);
  std::vector<double> delay(n, 0.0), volume(n, 0.0);
  std::vector<std::uint8_t> mask(n, 0);
  std::vector<bool> in_brain(n, false);
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      const std::size_t i = y * s + x;
      const double yd = static_cast<double>(y), xd = static_cast<double>(x);
      if (brain.level(yd, xd) > 1.0) continue;
      in_brain[i] = true;
      const double t = 1.0 + 0.1 * std::sin(2.0 * std::numbers::pi * fy * yd / s + py) *
                                 std::cos(2.0 * std::numbers::pi * fx * xd / s + px);
      const double d = std::hypot(yd - ly, xd - lx);
      double f_cbf = 1.0, f_cbv = 1.0, f_mtt = 1.0, f_tmax = 1.0, f_delay = 0.0, f_dwi = 0.0;
      if (d <= r) {
        mask[i] = 1;
        f_cbf = spec.cbf_factor;
        f_cbv = spec.cbv_factor;
        f_mtt = spec.mtt_factor;
        f_tmax = spec.tmax_factor;
        f_delay = spec.core_delay;
        f_dwi = spec.dwi_boost;
      } else if (d <= r * spec.penumbra_ratio) {
        f_cbf = kPenumbraCbf;
        f_mtt = kPenumbraTransit;
        f_tmax = kPenumbraTransit;
      }
      cbf[i] = t * f_cbf;
      cbv[i] = t * f_cbv;
      mtt[i] = f_mtt;
      tmax[i] = f_tmax;
      dwi[i] = kHealthyDwi * t + f_dwi;
      delay[i] = f_delay;
      volume[i] = t * f_cbv;
    }
  }

  const std::size_t frames = spec.n_frames;
  std::vector<double> ctp(frames * n, 0.0);
  const double rise = spec.peak_frame - spec.onset_frame;
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!in_brain[i]) continue;
      const double tau = (static_cast<double>(f) - spec.onset_frame - delay[i]) / rise;
      ctp[f * n + i] = kCtpBaseline + spec.peak_height * volume[i] * gamma_variate(tau);
    }
  }

  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> map_noise(0.0, spec.noise_sigma * spec.map_noise_factor);
    for (auto* m : {&cbf, &cbv, &mtt, &tmax}) {
      for (auto& v : *m) v += map_noise(rng);
    }
    std::normal_distribution<double> ctp_noise(0.0, spec.noise_sigma * spec.peak_height);
    for (auto& v : ctp) v += ctp_noise(rng);
    std::normal_distribution<double> dwi_noise(0.0, spec.noise_sigma);
    for (auto& v : dwi) v += dwi_noise(rng);
  }

  CaseRecord c;
  char id[32];
  std::snprintf(id, sizeof id, "case_%04zu", case_index);
  c.case_id = id;
  c.ctp.frames = Tensor::from_data({frames, s, s}, std::move(ctp));
  c.maps = {plane(s, std::move(cbf)), plane(s, std::move(cbv)), plane(s, std::move(mtt)), plane(s, std::move(tmax))};
  c.dwi = plane(s, std::move(dwi));
  c.mask = LesionMask(s, s, std::move(mask));
  return c;
}

std::vector<CaseRecord> generate_phantom_set(const PhantomSpec& spec) {
  std::vector<CaseRecord> out;
  out.reserve(spec.n_cases);
  for (std::size_t i = 0; i < spec.n_cases; ++i) out.push_back(generate_phantom_case(spec, i));
  return out;
}

}  // namespace strokeforge
