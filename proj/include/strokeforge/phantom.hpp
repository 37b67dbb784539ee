#pragma once

// Synthetic perfusion phantoms: an elliptical brain with a disk-shaped
// infarct core and a surrounding penumbra ring. The core shows reduced
// CBF/CBV, prolonged MTT/Tmax, an attenuated and delayed contrast bolus and
// a hyperintense DWI signal; the penumbra shows milder perfusion changes
// and no DWI change and no bolus delay.

#include <cstdint>

#include "strokeforge/case_record.hpp"
#include "strokeforge/config.hpp"

namespace strokeforge {

struct PhantomSpec {
  std::size_t n_cases = 40;
  std::size_t image_size = 64;
  std::size_t n_frames = 20;
  double lesion_radius_min = 4.0;
  double lesion_radius_max = 9.0;
  double onset_frame = 4.0;
  double peak_frame = 9.0;
  double peak_height = 60.0;
  double noise_sigma = 0.1;
  std::uint64_t seed = 2018;

  // Core effect sizes.
  double cbf_factor = 0.4;
  double cbv_factor = 0.4;
  double mtt_factor = 2.0;
  double tmax_factor = 2.0;
  double dwi_boost = 0.5;
  /// Bolus delay inside the core, in frames. The smoothed whole-image curve
  /// keeps its maximum at peak_frame while the core covers less than about
  /// 18% of the brain and the rise spans at least 5 frames.
  double core_delay = 1.0;
  /// Penumbra outer radius as a multiple of the core radius; 1 disables it.
  double penumbra_ratio = 1.6;
  /// Perfusion-map noise is noise_sigma * map_noise_factor.
  double map_noise_factor = 8.0;

  /// Throws ConfigError for inconsistent values, including a core that
  /// cannot fit inside the brain ellipse.
  void validate() const;
  /// Reads keys mirroring the field names; lesion_radius_range = min,max and
  /// contrast_curve_params = onset,peak,height are accepted as well.
  static PhantomSpec from_config(const KeyValueConfig& cfg);
};

/// Gamma-variate bolus shape normalised to 1 at tau = 1 (0 for tau <= 0).
double gamma_variate(double tau, double alpha = 3.0);

/// Pure function of (spec, case_index).
CaseRecord generate_phantom_case(const PhantomSpec& spec, std::size_t case_index);

std::vector<CaseRecord> generate_phantom_set(const PhantomSpec& spec);

}  // namespace strokeforge
