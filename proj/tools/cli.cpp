#include "cli.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <filesystem>
#include <iostream>

#include "strokeforge/checkpoint.hpp"
#include "strokeforge/errors.hpp"
#include "strokeforge/gradsuite.hpp"
#include "strokeforge/overlay.hpp"
#include "strokeforge/phantom.hpp"
#include "strokeforge/pipeline.hpp"
#include "strokeforge/report.hpp"
#include "strokeforge/volume.hpp"

namespace fs = std::filesystem;

namespace strokeforge::cli {

namespace {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

TrainConfig load_train_config(const fs::path& path) {
  auto cfg = TrainConfig::from_config(KeyValueConfig::load(path));
  if (apply_seed_override(cfg)) spdlog::info("seed overridden by STROKEFORGE_SEED: {}", cfg.seed);
  cfg.validate();
  return cfg;
}

std::vector<CaseRecord> load_dataset(const fs::path& dir) {
  auto cases = SfvDirectoryLoader{}.load(dir);
  if (cases.empty()) throw InputError("no cases (subdirectories with case.json) under " + dir.string());
  spdlog::info("loaded {} cases from {}", cases.size(), dir.string());
  return cases;
}

LesionMask read_mask(const fs::path& path) {
  if (!fs::exists(path)) throw InputError("missing mask file " + path.string());
  return LesionMask::from_tensor(read_volume(path).data);
}

std::string relative_name(const fs::path& file, const fs::path& root) {
  return fs::relative(file, root).generic_string();
}

void add_file_checksums(RunReport& report, const fs::path& root, const std::vector<fs::path>& files) {
  for (const auto& f : files) report.checksums[relative_name(f, root)] = sha256_file(f);
}

Tensor plane(const Tensor& t) {
  // [1,1,H,W] or [1,H,W] -> [H,W]
  const auto& s = t.shape();
  return Tensor::from_data({s[s.size() - 2], s[s.size() - 1]}, std::vector<double>(t.data().begin(), t.data().end()));
}

int cmd_phantom_gen(const fs::path& spec_path, const fs::path& out) {
  Stopwatch clock;
  const auto kv = KeyValueConfig::load(spec_path);
  const auto spec = PhantomSpec::from_config(kv);
  const auto cases = generate_phantom_set(spec);
  fs::create_directories(out);
  for (const auto& c : cases) write_case(out / c.case_id, c);
  RunReport report;
  report.command = "phantom-gen";
  report.seed = spec.seed;
  report.checksums["dataset"] = dataset_checksum(cases);
  report.checksums["spec"] = sha256_file(spec_path);
  report.extra["spec"] = kv.entries();
  report.extra["n_cases"] = cases.size();
  report.wall_seconds = clock.seconds();
  report.write(out / "report.json");
  spdlog::info("wrote {} phantom cases to {}", cases.size(), out.string());
  return 0;
}

int cmd_preprocess(const fs::path& data, const fs::path& out) {
  Stopwatch clock;
  const auto cases = load_dataset(data);
  RunReport report;
  report.command = "preprocess";
  report.checksums["dataset"] = dataset_checksum(cases);
  nlohmann::json per_case = nlohmann::json::object();
  std::vector<fs::path> written;
  for (const auto& c : cases) {
    const auto tdc = analyze_curve(c.ctp);
    const auto idx = sample_indices(tdc.points.onset, tdc.points.end);
    const fs::path dir = out / c.case_id;
    std::string csv = "frame_index,raw,smoothed\n";
    for (std::size_t t = 0; t < tdc.values.size(); ++t) {
      csv += std::to_string(t) + ',' + nlohmann::json(tdc.values[t]).dump() + ',' + nlohmann::json(tdc.smoothed[t]).dump() +
             '\n';
    }
    write_text(dir / "curve.csv", csv);
    std::vector<std::string> names;
    for (auto i : idx) names.push_back("frame_" + std::to_string(i));
    write_volume(dir / "frames.sfv", sample_frames(c.ctp, tdc.points.onset, tdc.points.end), names);
    written.push_back(dir / "curve.csv");
    written.push_back(dir / "frames.sfv");
    if (tdc.fallback) spdlog::warn("{}: no enhancement detected, using the full frame range", c.case_id);
    per_case[c.case_id] = {{"onset", tdc.points.onset},
                           {"peak", tdc.points.peak},
                           {"end", tdc.points.end},
                           {"fallback", tdc.fallback},
                           {"sampled_indices", idx}};
  }
  report.extra["cases"] = per_case;
  add_file_checksums(report, out, written);
  report.wall_seconds = clock.seconds();
  report.write(out / "report.json");
  return 0;
}

void write_fold_overlays(const fs::path& dir, const std::vector<CaseRecord>& cases,
                         const std::vector<std::size_t>& fold_of, std::size_t fold, PipelineState& state) {
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (fold_of[i] != fold) continue;
    const auto pred = infer(cases[i], state);
    const Tensor base = pred.dwi_g.defined() ? pred.dwi_g : *cases[i].dwi;
    emit_overlay(dir / (cases[i].case_id + ".png"), base, *cases[i].mask, pred.mask);
  }
}

RunReport train_variant(const TrainConfig& cfg, const std::vector<CaseRecord>& cases, const fs::path& out,
                        const std::string& command) {
  Stopwatch clock;
  fs::create_directories(out);
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.case_id);
  const auto fold_of = assign_folds(ids, cfg.folds, cfg.seed);
  std::vector<fs::path> written;
  CvOptions opt;
  opt.on_epoch = [&](std::size_t fold, const EpochRecord& r) {
    spdlog::info("[{}] fold {} epoch {:3d} lr {:.2e} loss {:.4f} (ext {:.4f} gen {:.4f} seg {:.4f})", to_string(cfg.variant),
                 fold, r.epoch, r.lr, r.total, r.extractor, r.generator, r.segmentor);
  };
  opt.on_fold_done = [&](std::size_t fold, PipelineState& state) {
    const auto ckpt = out / ("fold" + std::to_string(fold) + ".sfck");
    save_state(ckpt, state, {}, fold);
    written.push_back(ckpt);
    write_fold_overlays(out / "overlays", cases, fold_of, fold, state);
  };
  const auto cv = cross_validate(cases, cfg, opt);
  auto report = make_run_report(command, cfg, cv);
  report.checksums["dataset"] = dataset_checksum(cases);
  write_text(out / "losses.csv", loss_csv(cv.folds));
  written.push_back(out / "losses.csv");
  add_file_checksums(report, out, written);
  report.wall_seconds = clock.seconds();
  report.write(out / "report.json");
  spdlog::info("[{}] mean held-out Dice {:.4f} in {:.0f} s", to_string(cfg.variant), cv.mean_dice, report.wall_seconds);
  return report;
}

int cmd_train(const fs::path& config, const fs::path& data, const fs::path& out) {
  const auto cfg = load_train_config(config);
  const auto cases = load_dataset(data);
  train_variant(cfg, cases, out, "train");
  return 0;
}

int cmd_infer(const fs::path& checkpoint, const fs::path& case_dir, const fs::path& out) {
  Stopwatch clock;
  auto state = load_state(checkpoint);
  const auto c = read_case(case_dir);
  const auto pred = infer(c, state);
  const fs::path dir = out / c.case_id;
  write_volume(dir / "mask.sfv", pred.mask.to_tensor(), {"mask"});
  write_volume(dir / "seg_prob.sfv", pred.seg_prob, {"background", "foreground"});
  std::vector<fs::path> written{dir / "mask.sfv", dir / "seg_prob.sfv"};
  if (pred.dwi_g.defined()) {
    write_volume(dir / "dwi_g.sfv", pred.dwi_g, {"dwi_g"});
    written.push_back(dir / "dwi_g.sfv");
  }
  const Tensor base = pred.dwi_g.defined() ? pred.dwi_g : c.dwi ? *c.dwi : c.maps.cbf;
  const LesionMask truth = c.mask ? *c.mask : LesionMask(c.height(), c.width(), std::vector<std::uint8_t>(c.height() * c.width(), 0));
  emit_overlay(dir / "overlay.png", base, truth, pred.mask);
  written.push_back(dir / "overlay.png");

  RunReport report;
  report.command = "infer";
  report.config = state.cfg;
  report.seed = state.cfg.seed;
  report.checksums["checkpoint"] = sha256_file(checkpoint);
  report.checksums["case"] = dataset_checksum({c});
  add_file_checksums(report, out, written);
  report.extra["case_id"] = c.case_id;
  report.extra["foreground_pixels"] = pred.mask.count();
  if (c.mask) report.extra["dice"] = dice_score(pred.mask, *c.mask);
  report.wall_seconds = clock.seconds();
  report.write(dir / "report.json");
  return 0;
}

int cmd_evaluate(const fs::path& pred_dir, const fs::path& truth_dir, const fs::path& out, bool dump_heatmaps) {
  Stopwatch clock;
  std::vector<fs::path> truth_cases;
  for (const auto& e : fs::directory_iterator(truth_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "mask.sfv")) truth_cases.push_back(e.path());
  }
  std::sort(truth_cases.begin(), truth_cases.end());
  if (truth_cases.empty()) throw InputError("no case directories with mask.sfv under " + truth_dir.string());
  RunReport report;
  report.command = "evaluate";
  nlohmann::json per_case = nlohmann::json::object();
  std::vector<fs::path> written;
  double total = 0;
  for (const auto& tdir : truth_cases) {
    const std::string id = tdir.filename().string();
    const auto truth = read_mask(tdir / "mask.sfv");
    const auto pred = read_mask(pred_dir / id / "mask.sfv");
    if (pred.height != truth.height || pred.width != truth.width) {
      throw ShapeError("prediction for " + id + " is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                       ", truth is " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
    }
    const double d = dice_score(pred, truth);
    per_case[id] = d;
    total += d;
    report.checksums["pred/" + id] = sha256_file(pred_dir / id / "mask.sfv");
    report.checksums["truth/" + id] = sha256_file(tdir / "mask.sfv");
    if (dump_heatmaps) {
      const auto sdf = signed_distance(truth);
      const auto w = heatmap_from_sdf(sdf);
      write_volume(out / id / "sdf.sfv", sdf.to_tensor(), {"sdf"});
      write_volume(out / id / "heatmap.sfv", w.to_tensor(), {"heatmap"});
      written.push_back(out / id / "sdf.sfv");
      written.push_back(out / id / "heatmap.sfv");
    }
    const fs::path dwi = fs::exists(pred_dir / id / "dwi_g.sfv") ? pred_dir / id / "dwi_g.sfv" : tdir / "dwi.sfv";
    const Tensor base = fs::exists(dwi) ? plane(read_volume(dwi).data) : truth.to_tensor();
    emit_overlay(out / id / "overlay.png", base, truth, pred);
    written.push_back(out / id / "overlay.png");
  }
  report.mean_dice = total / static_cast<double>(truth_cases.size());
  report.extra["case_dice"] = per_case;
  add_file_checksums(report, out, written);
  report.wall_seconds = clock.seconds();
  report.write(out / "report.json");
  std::cout << "mean Dice " << *report.mean_dice << " over " << truth_cases.size() << " cases\n";
  return 0;
}

int cmd_gradcheck(const std::optional<fs::path>& out, std::uint64_t seed) {
  Stopwatch clock;
  const auto results = run_gradient_suite(seed);
  bool ok = true;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : results) {
    std::printf("%-20s %.3e  %s\n", r.name.c_str(), r.max_rel_error, r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
    table.push_back({{"op", r.name}, {"max_rel_error", r.max_rel_error}, {"passed", r.passed}});
  }
  if (out) {
    RunReport report;
    report.command = "gradcheck";
    report.seed = seed;
    report.extra["tolerance"] = kGradcheckTolerance;
    report.extra["results"] = table;
    report.extra["all_passed"] = ok;
    report.wall_seconds = clock.seconds();
    report.write(*out / "report.json");
  }
  return ok ? 0 : 1;
}

int cmd_ablate(const fs::path& config, const fs::path& data, const fs::path& out, const std::string& variants) {
  const auto base = load_train_config(config);
  std::vector<Variant> list;
  std::string token;
  std::istringstream in(variants);
  while (std::getline(in, token, ',')) list.push_back(parse_variant(token));
  if (list.empty()) throw ConfigError("--variants lists no variants");
  const auto cases = load_dataset(data);
  Stopwatch clock;
  std::map<std::string, double> dice;
  RunReport summary;
  summary.command = "ablate";
  summary.config = base;
  summary.seed = base.seed;
  for (auto v : list) {
    auto cfg = base;
    cfg.variant = v;
    const auto r = train_variant(cfg, cases, out / to_string(v), "ablate");
    dice[to_string(v)] = *r.mean_dice;
    summary.checksums[to_string(v) + "/report.json"] = sha256_file(out / to_string(v) / "report.json");
  }
  summary.extra["mean_dice"] = dice;
  if (dice.count("segonly") && dice.count("gen") && dice.count("full")) {
    const double s = dice["segonly"], g = dice["gen"], f = dice["full"];
    const bool holds = f >= g && g >= s && f - s >= 0.02;
    summary.extra["ordering_holds"] = holds;
    summary.extra["full_minus_segonly"] = f - s;
    if (!holds) {
      summary.extra["ordering_violation"] =
          "expected full >= gen >= segonly with full - segonly >= 0.02, got full " + std::to_string(f) + ", gen " +
          std::to_string(g) + ", segonly " + std::to_string(s);
      spdlog::warn("ablation ordering violated: {}", summary.extra["ordering_violation"].get<std::string>());
    }
  }
  summary.checksums["dataset"] = dataset_checksum(cases);
  summary.wall_seconds = clock.seconds();
  summary.write(out / "report.json");
  for (const auto& [v, d] : dice) std::cout << v << " mean Dice " << d << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Stroke lesion segmentation from CT perfusion: extractor, generator, segmentor", "strokeforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  fs::path spec, data, out, config, checkpoint, case_dir, pred, truth;
  std::optional<fs::path> gc_out;
  std::uint64_t gc_seed = 1;
  bool dump_heatmaps = false;
  std::string variants = "segonly,gen,full";

  auto* phantom = app.add_subcommand("phantom-gen", "Generate a synthetic perfusion phantom dataset");
  phantom->add_option("--spec", spec, "Phantom spec (key = value)")->required()->check(CLI::ExistingFile);
  phantom->add_option("--out", out, "Output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Time-density curves, time points and sampled frame stacks");
  pre->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  pre->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "k-fold cross-validated training");
  train->add_option("--config", config, "Training config (key = value)")->required()->check(CLI::ExistingFile);
  train->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", out, "Output directory")->required();

  auto* inf = app.add_subcommand("infer", "Segment one case with a trained checkpoint");
  inf->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  inf->add_option("--case", case_dir, "Case directory")->required()->check(CLI::ExistingDirectory);
  inf->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("evaluate", "Dice of predicted masks against ground truth");
  eval->add_option("--pred", pred, "Directory of <case>/mask.sfv predictions")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--truth", truth, "Directory of <case>/mask.sfv ground truth")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--out", out, "Output directory")->required();
  eval->add_flag("--dump-heatmaps", dump_heatmaps, "Also write the signed distance and heatmap of each truth mask");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable operation");
  gc->add_option("--out", gc_out, "Output directory for report.json");
  gc->add_option("--seed", gc_seed, "Seed for the random instances");

  auto* abl = app.add_subcommand("ablate", "Cross-validate several pipeline variants on the same folds");
  abl->add_option("--config", config, "Training config (key = value)")->required()->check(CLI::ExistingFile);
  abl->add_option("--data", data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  abl->add_option("--out", out, "Output directory")->required();
  abl->add_option("--variants", variants, "Comma-separated subset of segonly,gen,full");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  if (!argv.empty()) argv.pop_back();  // program name
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*phantom) return cmd_phantom_gen(spec, out);
    if (*pre) return cmd_preprocess(data, out);
    if (*train) return cmd_train(config, data, out);
    if (*inf) return cmd_infer(checkpoint, case_dir, out);
    if (*eval) return cmd_evaluate(pred, truth, out, dump_heatmaps);
    if (*gc) return cmd_gradcheck(gc_out, gc_seed);
    if (*abl) return cmd_ablate(config, data, out, variants);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 1;
  } catch (const GeometryError& e) {
    std::cerr << "geometry error: " << e.what() << "\n";
    return 1;
  } catch (const VolumeError& e) {
    std::cerr << "volume error: " << e.what() << "\n";
    return 1;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace strokeforge::cli
