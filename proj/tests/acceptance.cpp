// Acceptance run: one PASS/FAIL line per criterion. Optional arguments pick a
// subset of criteria by number, e.g. `acceptance 1 6`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"
#include "strokeforge/errors.hpp"
#include "strokeforge/gradsuite.hpp"
#include "strokeforge/losses.hpp"
#include "strokeforge/ops.hpp"
#include "strokeforge/perfusion.hpp"
#include "strokeforge/phantom.hpp"
#include "strokeforge/pipeline.hpp"
#include "strokeforge/report.hpp"
#include "strokeforge/volume.hpp"

using namespace strokeforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = run_gradient_suite(1);
  const double t = seconds_since(t0);
  double worst = 0;
  std::string failed;
  for (const auto& r : results) {
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed) failed += " " + r.name;
  }
  const bool ok = failed.empty() && t < 120.0;
  return {ok, fmt("%zu checks, worst rel. error %.2e (< 1e-4), %.1f s (< 120 s)%s%s", results.size(), worst, t,
                  failed.empty() ? "" : "; failing:", failed.c_str())};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  double worst = 0;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const auto in = oracle::random_instance(rng, 1, 8, 8);
    const auto p = Tensor::from_data({1, 2, 8, 8}, in.p.v);
    const auto y = Tensor::from_data({1, 2, 8, 8}, in.y.v);
    const auto w = Tensor::from_data({1, 1, 8, 8}, in.weights);
    track(generalized_dice(p, y).item(), oracle::generalized_dice(in.p, in.y, kDiceEps));
    track(weighted_ce(p, y, w).item(), oracle::weighted_ce(in.p, in.y, in.weights));
    track(pr_loss(p, y, w, 1.0).item(), oracle::pr_loss(in.p, in.y, in.weights, 1.0, kDiceEps));

    const std::vector<double> fg(in.y.v.begin() + 64, in.y.v.end());
    const std::vector<double> q(in.p.v.begin() + 64, in.p.v.end());
    track(extractor_loss(Tensor::from_data({1, 1, 8, 8}, q), Tensor::from_data({1, 1, 8, 8}, fg), 1.0).item(),
          oracle::extractor(q, fg, 1.0));

    std::vector<double> g(64), o(64);
    for (auto& v : g) v = unit(rng);
    for (auto& v : o) v = unit(rng);
    // Features with a closed form: x^2 and 3x, so the oracle needs no network.
    FeatureFn features = [](const Tensor& x) { return std::vector<Tensor>{square(x), scale(x, 3.0)}; };
    auto oracle_features = [](const std::vector<double>& x) {
      std::vector<std::vector<double>> f(2, std::vector<double>(x.size()));
      for (std::size_t i = 0; i < x.size(); ++i) {
        f[0][i] = x[i] * x[i];
        f[1][i] = 3.0 * x[i];
      }
      return f;
    };
    const double expected = 0.002 * oracle::generator_image(g, o, in.weights) +
                            1.2 * oracle::feature_distance(oracle_features(g), oracle_features(o));
    track(generator_loss(Tensor::from_data({1, 1, 8, 8}, g), Tensor::from_data({1, 1, 8, 8}, o), w, features, 0.002,
                         1.2)
              .item(),
          expected);
  }

  std::size_t sdf_mismatch = 0;
  std::uniform_int_distribution<int> side(1, 16);
  for (int k = 0; k < 500; ++k) {
    const std::size_t h = side(rng), w = side(rng);
    std::bernoulli_distribution on(unit(rng));
    LesionMask m(h, w, std::vector<std::uint8_t>(h * w));
    for (auto& v : m.values) v = on(rng) ? 1 : 0;
    const auto fast = signed_distance(m);
    const auto brute = oracle::signed_distance(m.values, static_cast<long>(h), static_cast<long>(w));
    if (fast.values != brute) ++sdf_mismatch;
  }
  const bool ok = worst <= 1e-10 && sdf_mismatch == 0;
  return {ok, fmt("5 losses x 200 instances, max abs deviation %.2e (<= 1e-10); signed distance exact on %zu/500 masks",
                  worst, 500 - sdf_mismatch)};
}

Outcome preprocessing() {
  PhantomSpec spec;
  spec.n_cases = 100;
  spec.noise_sigma = 0.0;
  spec.seed = 77;
  std::size_t peak_ok = 0, sample_ok = 0, affine_ok = 0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> scale_d(0.01, 100.0), shift_d(-1000.0, 1000.0);
  for (std::size_t i = 0; i < spec.n_cases; ++i) {
    const auto c = generate_phantom_case(spec, i);
    const auto tdc = analyze_curve(c.ctp);
    if (!tdc.fallback && tdc.points.peak == spec.peak_frame) ++peak_ok;
    const auto idx = sample_indices(tdc.points.onset, tdc.points.end);
    const auto stack = sample_frames(c.ctp, tdc.points.onset, tdc.points.end);
    bool good = idx.size() == kSampledFrames && stack.dim(0) == kSampledFrames;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      good = good && idx[k] >= tdc.points.onset && idx[k] <= tdc.points.end && (k == 0 || idx[k] >= idx[k - 1]);
    }
    if (good) ++sample_ok;
    const double a = scale_d(rng), b = shift_d(rng);
    auto curve = tdc.smoothed;
    for (auto& v : curve) v = a * v + b;
    if (detect_time_points(curve) == tdc.points) ++affine_ok;
  }
  const bool ok = peak_ok == 100 && sample_ok == 100 && affine_ok == 100;
  return {ok, fmt("peak at configured frame %zu/100, 6 in-range nondecreasing samples %zu/100, affine-invariant "
                  "detection %zu/100",
                  peak_ok, sample_ok, affine_ok)};
}

struct CvRun {
  CvReport report;
  double seconds;
};

CvRun run_cv(Variant v, const std::vector<CaseRecord>& data) {
  auto cfg = TrainConfig::desk();
  cfg.variant = v;
  const auto t0 = std::chrono::steady_clock::now();
  CvOptions opt;
  opt.on_epoch = [&](std::size_t fold, const EpochRecord& r) {
    std::fprintf(stderr, "  [%s] fold %zu epoch %zu loss %.4f (%.0f s)\n", to_string(v).c_str(), fold, r.epoch, r.total,
                 seconds_since(t0));
  };
  auto rep = cross_validate(data, cfg, opt);
  return {std::move(rep), seconds_since(t0)};
}

std::vector<CaseRecord> desk_dataset() {
  PhantomSpec spec;
  spec.n_cases = 40;
  spec.image_size = 64;
  return generate_phantom_set(spec);
}

Outcome desk_scale(const CvRun& full) {
  std::string folds;
  for (const auto& f : full.report.folds) folds += fmt(" %.3f", f.mean_dice);
  const bool ok = full.report.mean_dice >= 0.70 && full.seconds < 1800.0;
  return {ok, fmt("40 phantoms 64x64, 4-fold CV, full pipeline: mean held-out Dice %.4f (>= 0.70), folds%s, %.0f s "
                  "(< 1800 s)",
                  full.report.mean_dice, folds.c_str(), full.seconds)};
}

Outcome ablation(const CvRun& full, const std::vector<CaseRecord>& data) {
  const double f = full.report.mean_dice;
  const double g = run_cv(Variant::gen, data).report.mean_dice;
  const double s = run_cv(Variant::segonly, data).report.mean_dice;
  const bool ok = f >= g && g >= s && f - s >= 0.02;
  return {ok, fmt("mean Dice full %.4f, gen %.4f, segonly %.4f; need full >= gen >= segonly and full - segonly = "
                  "%.4f >= 0.02",
                  f, g, s, f - s)};
}

Outcome schedule() {
  const auto cfg = TrainConfig::paper();
  struct Probe {
    std::size_t epoch;
    double expected;
  };
  const Probe probes[] = {{5, 0.002}, {100, 0.002}, {179, 0.002}, {180, 4e-4}, {250, 4e-4}, {299, 4e-4}, {300, 8e-5}, {399, 8e-5}};
  double worst = 0;
  for (const auto& p : probes) worst = std::max(worst, std::abs(lr_schedule(p.epoch, cfg) - p.expected) / p.expected);
  bool monotone = true;
  for (std::size_t e = cfg.warmup_epochs + 1; e < cfg.total_epochs; ++e) {
    monotone = monotone && lr_schedule(e, cfg) <= lr_schedule(e - 1, cfg);
  }
  const bool ok = worst < 1e-12 && monotone;
  return {ok, fmt("paper config: 0.002 before 180, 4e-4 on [180,300), 8e-5 from 300; max rel. deviation %.1e; "
                  "nonincreasing after warm-up: %s",
                  worst, monotone ? "yes" : "no")};
}

Outcome determinism() {
  auto cfg = TrainConfig::desk();
  cfg.image_size = 32;
  cfg.segmentor_base_channels = cfg.generator_base_channels = 4;
  cfg.extractor_base_channels = 2;
  cfg.total_epochs = 4;
  cfg.warmup_epochs = 2;
  cfg.lr_decay_epochs = {3};
  PhantomSpec spec;
  spec.n_cases = 8;
  spec.image_size = 32;
  spec.lesion_radius_min = 3;
  spec.lesion_radius_max = 5;
  const auto data = generate_phantom_set(spec);
  const auto csv1 = loss_csv(cross_validate(data, cfg).folds);
  const auto csv2 = loss_csv(cross_validate(data, cfg).folds);
  const bool same_csv = csv1 == csv2;

  std::vector<PreparedCase> prepared;
  for (const auto& c : data) prepared.push_back(prepare_case(c, cfg));
  const auto path = fs::temp_directory_path() / "sf_acceptance_resume.sfck";
  Trainer straight(cfg, prepared, 0);
  straight.run(4);
  Trainer first(cfg, prepared, 0);
  first.run(2);
  first.save(path);
  Trainer resumed(cfg, prepared, 0);
  resumed.load(path);
  resumed.run(2);
  fs::remove(path);
  bool same_resume = resumed.history().size() == 4;
  for (std::size_t e = 0; same_resume && e < 4; ++e) {
    same_resume = resumed.history()[e].total == straight.history()[e].total;
  }
  const auto pa = straight.state().parameters(), pb = resumed.state().parameters();
  for (std::size_t k = 0; same_resume && k < pa.size(); ++k) same_resume = values(pa[k].second) == values(pb[k].second);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01(0.0, 1e3);
  std::vector<double> v(6 * 64 * 64);
  for (auto& x : v) x = n01(rng);
  v[0] = -0.0;
  v[1] = std::numeric_limits<double>::denorm_min();
  const auto vol_path = fs::temp_directory_path() / "sf_acceptance_volume.sfv";
  write_volume(vol_path, Tensor::from_data({6, 64, 64}, v), {"a", "b", "c", "d", "e", "f"});
  const auto back = read_volume(vol_path);
  fs::remove(vol_path);
  const bool same_volume = back.data.shape() == Shape{6, 64, 64} &&
                           std::memcmp(back.data.data().data(), v.data(), v.size() * sizeof(double)) == 0;
  return {same_csv && same_resume && same_volume,
          fmt("identical loss CSVs: %s; resumed checkpoint bit-identical: %s; volume round trip bit-exact: %s",
              same_csv ? "yes" : "no", same_resume ? "yes" : "no", same_volume ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int k) { return selected.empty() || selected.count(k) > 0; };

  int failures = 0;
  auto report = [&](int k, const char* name, const Outcome& o) {
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", k, name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };
  auto guarded = [&](int k, const char* name, const std::function<Outcome()>& f) {
    if (!wanted(k)) return;
    try {
      report(k, name, f());
    } catch (const std::exception& e) {
      report(k, name, {false, std::string("exception: ") + e.what()});
    }
  };

  guarded(1, "gradient suite", gradient_suite);
  guarded(2, "oracle equivalence", oracle_equivalence);
  guarded(3, "preprocessing", preprocessing);
  guarded(6, "schedule exactness", schedule);
  guarded(7, "determinism and persistence", determinism);
  if (wanted(4) || wanted(5)) {
    std::optional<std::vector<CaseRecord>> data;
    std::optional<CvRun> full;
    try {
      data = desk_dataset();
      full = run_cv(Variant::full, *data);
    } catch (const std::exception& e) {
      if (wanted(4)) report(4, "desk-scale end-to-end", {false, std::string("exception: ") + e.what()});
      if (wanted(5)) report(5, "ablation ordering", {false, std::string("exception: ") + e.what()});
    }
    if (full) {
      guarded(4, "desk-scale end-to-end", [&] { return desk_scale(*full); });
      guarded(5, "ablation ordering", [&] { return ablation(*full, *data); });
    }
  }
  return failures == 0 ? 0 : 1;
}
