#include "strokeforge/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "strokeforge/checkpoint.hpp"
#include "strokeforge/errors.hpp"
#include "strokeforge/ops.hpp"
#include "strokeforge/optim.hpp"

namespace strokeforge {

namespace {

constexpr double kChannelEps = 1e-5;

std::uint64_t mix(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor plane4(const Tensor& t) { return reshape(t, {1, 1, t.dim(0), t.dim(1)}); }

void require_plane(const Tensor& t, const Shape& plane, const char* what) {
  if (t.shape() != plane) {
    throw ShapeError(std::string(what) + " is " + shape_str(t.shape()) + ", expected " + shape_str(plane));
  }
}

Tensor min_max(const Tensor& t) {
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  const double a = *lo, span = *hi - *lo;
  std::vector<double> v(t.numel(), 0.0);
  if (span > 0) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (t[i] - a) / span;
  }
  return Tensor::from_data(t.shape(), std::move(v));
}

Tensor temporal_reduce(const Tensor& frames, bool use_max) {
  const std::size_t t = frames.dim(0), plane = frames.dim(1) * frames.dim(2);
  std::vector<double> out(plane, use_max ? -std::numeric_limits<double>::infinity() : 0.0);
  for (std::size_t f = 0; f < t; ++f) {
    for (std::size_t i = 0; i < plane; ++i) {
      const double v = frames[f * plane + i];
      out[i] = use_max ? std::max(out[i], v) : out[i] + v / static_cast<double>(t);
    }
  }
  return Tensor::from_data({frames.dim(1), frames.dim(2)}, std::move(out));
}

Tensor cat0(const std::vector<const PreparedCase*>& cases, Tensor PreparedCase::*field) {
  std::vector<Tensor> parts;
  for (const auto* c : cases) parts.push_back(c->*field);
  return parts.size() == 1 ? parts[0] : concat(parts, 0);
}

UNet make_net(std::size_t in, std::size_t out, std::size_t base, std::size_t depth, bool se, NormKind norm,
              FinalActivation act, const TrainConfig& cfg, std::uint64_t seed) {
  UNet net(UNetSpec{in, out, base, depth, se, norm, act, cfg.se_reduction, cfg.image_size});
  xavier_init(net, seed);
  return net;
}

void add_prefixed(std::vector<NamedTensor>& out, const std::string& prefix, const std::vector<NamedTensor>& src) {
  for (const auto& [name, t] : src) out.emplace_back(prefix + name, t);
}

}  // namespace

Tensor zscore_channels(const Tensor& x, double eps) {
  if (x.rank() != 4) throw ShapeError("zscore_channels expects [N,C,H,W], got " + shape_str(x.shape()));
  auto mu = mean(x, {2, 3}, true);
  auto centred = sub(x, mu);
  auto var = mean(square(centred), {2, 3}, true);
  return div(centred, sqrt(add_scalar(var, eps)));
}

Tensor assemble_generator_input(const Tensor& map_pre, const Tensor& map_prob, const PerfusionMaps& maps,
                                const Tensor& ctp_mean) {
  if (map_pre.rank() != 2) throw ShapeError("map_pre must be [H,W], got " + shape_str(map_pre.shape()));
  const Shape plane = map_pre.shape();
  require_plane(map_prob, plane, "map_prob");
  require_plane(maps.cbf, plane, "CBF");
  require_plane(maps.cbv, plane, "CBV");
  require_plane(maps.mtt, plane, "MTT");
  require_plane(maps.tmax, plane, "Tmax");
  require_plane(ctp_mean, plane, "ctp_mean");
  auto stacked = concat({plane4(map_pre), plane4(map_prob), plane4(maps.cbf), plane4(maps.cbv), plane4(maps.mtt),
                         plane4(maps.tmax), plane4(ctp_mean)},
                        1);
  return reshape(zscore_channels(stacked, kChannelEps), {kGeneratorChannels, plane[0], plane[1]});
}

PreparedCase prepare_case(const CaseRecord& c, const TrainConfig& cfg) {
  c.validate();
  if (c.height() != cfg.image_size || c.width() != cfg.image_size) {
    throw ShapeError("case " + c.case_id + " is " + std::to_string(c.height()) + "x" + std::to_string(c.width()) +
                     ", config expects " + std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size));
  }
  NoGradGuard no_grad;
  const std::size_t h = c.height(), w = c.width();
  PreparedCase p;
  p.case_id = c.case_id;
  const auto tdc = analyze_curve(c.ctp);
  p.points = tdc.points;
  p.fallback = tdc.fallback;
  if (tdc.fallback) spdlog::warn("case {}: no contrast enhancement detected, sampling the full frame range", c.case_id);
  p.frames = reshape(zscore(sample_frames(c.ctp, tdc.points.onset, tdc.points.end)), {1, kSampledFrames, h, w});
  p.maps = zscore_channels(concat({plane4(c.maps.cbf), plane4(c.maps.cbv), plane4(c.maps.mtt), plane4(c.maps.tmax)}, 1),
                           kChannelEps);
  p.ctp_mean = zscore_channels(plane4(temporal_reduce(c.ctp.frames, cfg.seventh_channel == "ctp_max")), kChannelEps);
  if (c.has_labels()) {
    p.mask = *c.mask;
    p.dwi = plane4(min_max(*c.dwi));
    p.target = plane4(c.mask->to_tensor());
    p.one_hot = one_hot2(p.target);
    p.weights = plane4(heatmap_from_mask(*c.mask, cfg.heatmap()).to_tensor());
  }
  return p;
}

Batch make_batch(const std::vector<const PreparedCase*>& cases) {
  if (cases.empty()) throw InputError("cannot build an empty batch");
  NoGradGuard no_grad;
  Batch b;
  for (const auto* c : cases) b.case_ids.push_back(c->case_id);
  b.frames = cat0(cases, &PreparedCase::frames);
  b.maps = cat0(cases, &PreparedCase::maps);
  b.ctp_mean = cat0(cases, &PreparedCase::ctp_mean);
  const bool labelled = std::all_of(cases.begin(), cases.end(), [](const auto* c) { return c->mask.has_value(); });
  if (labelled) {
    b.dwi = cat0(cases, &PreparedCase::dwi);
    b.target = cat0(cases, &PreparedCase::target);
    b.one_hot = cat0(cases, &PreparedCase::one_hot);
    b.weights = cat0(cases, &PreparedCase::weights);
  }
  return b;
}

PipelineState::PipelineState(const TrainConfig& c, std::uint64_t init_seed)
    : cfg(c),
      segmentor(make_net(c.variant == Variant::segonly ? kMapChannels : 1, 2, c.segmentor_base_channels, c.segmentor_depth, true,
                         NormKind::switchable, FinalActivation::none, c, mix(init_seed, 2))) {
  cfg.validate();
  if (c.variant != Variant::segonly) {
    const std::size_t in = c.variant == Variant::full ? kGeneratorChannels : kMapChannels + 1;
    generator.emplace(make_net(in, 1, c.generator_base_channels, c.generator_depth, false, NormKind::batch,
                               FinalActivation::sigmoid, c, mix(init_seed, 1)));
  }
  if (c.variant == Variant::full) {
    extractor.emplace(make_net(kSampledFrames, 1, c.extractor_base_channels, c.extractor_depth, false,
                               NormKind::batch, FinalActivation::none, c, mix(init_seed, 0)));
  }
}

std::vector<NamedTensor> PipelineState::parameters() const {
  std::vector<NamedTensor> out;
  if (extractor) add_prefixed(out, "extractor.", extractor->parameters());
  if (generator) add_prefixed(out, "generator.", generator->parameters());
  add_prefixed(out, "segmentor.", segmentor.parameters());
  return out;
}

std::vector<NamedTensor> PipelineState::buffers() const {
  std::vector<NamedTensor> out;
  if (extractor) add_prefixed(out, "extractor.", extractor->buffers());
  if (generator) add_prefixed(out, "generator.", generator->buffers());
  add_prefixed(out, "segmentor.", segmentor.buffers());
  return out;
}

PipelineOutputs forward_pipeline(const Batch& batch, PipelineState& state, const ForwardMode& mode) {
  PipelineOutputs out;
  const bool detach = state.cfg.detach_stages;
  Tensor seg_in;
  if (state.cfg.variant == Variant::segonly) {
    seg_in = batch.maps;
  } else {
    Tensor gen_in;
    if (state.cfg.variant == Variant::full) {
      out.map_pre = state.extractor->forward(batch.frames, mode);
      out.map_prob = sigmoid(out.map_pre);
      const Tensor pre = detach ? out.map_pre.detach() : out.map_pre;
      const Tensor prob = detach ? out.map_prob.detach() : out.map_prob;
      gen_in = concat({zscore_channels(pre, kChannelEps), zscore_channels(prob, kChannelEps), batch.maps,
                       batch.ctp_mean},
                      1);
    } else {
      gen_in = concat({batch.maps, batch.ctp_mean}, 1);
    }
    out.dwi_g = state.generator->forward(gen_in, mode);
    seg_in = detach ? out.dwi_g.detach() : out.dwi_g;
  }
  out.seg_prob = softmax(state.segmentor.forward(seg_in, mode), 1);
  return out;
}

LossParts total_loss(const PipelineOutputs& out, const Batch& batch, PipelineState& state, UNet* feature_net) {
  if (!batch.target.defined()) throw InputError("total_loss needs labelled cases (dwi and mask)");
  const auto& w = state.cfg.loss_weights;
  LossParts parts;
  parts.total = pr_loss(out.seg_prob, batch.one_hot, batch.weights, w.delta);
  parts.segmentor = parts.total.item();
  if (out.dwi_g.defined()) {
    const std::size_t stages = state.cfg.feature_stages;
    UNet& seg = feature_net ? *feature_net : state.segmentor;
    FeatureFn features = [&seg, stages](const Tensor& x) {
      return seg.encoder_features(x, stages, ForwardMode{false, false, true});
    };
    auto lg = generator_loss(out.dwi_g, batch.dwi, batch.weights, features, w.beta, w.gamma, state.cfg.generator_norm);
    parts.generator = lg.item();
    parts.total = add(parts.total, lg);
  }
  if (out.map_prob.defined()) {
    auto le = extractor_loss(out.map_prob, batch.target, w.alpha);
    parts.extractor = le.item();
    parts.total = add(parts.total, le);
  }
  return parts;
}

Trainer::Trainer(const TrainConfig& cfg, std::vector<PreparedCase> cases, std::size_t fold)
    : state_(cfg, mix(cfg.seed, 100 + fold)), cases_(std::move(cases)), fold_(fold) {
  if (cases_.empty()) throw InputError("no training cases");
  for (const auto& c : cases_) {
    if (!c.mask) throw InputError("training case " + c.case_id + " has no dwi/mask");
  }
}

EpochRecord Trainer::run_epoch() {
  const auto& cfg = state_.cfg;
  const std::size_t epoch = state_.epoch;
  const double lr = lr_schedule(epoch, cfg);
  std::vector<std::size_t> order(cases_.size());
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(fold_), static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  const auto params = state_.parameters();
  EpochRecord rec{epoch, lr, 0, 0, 0, 0};
  std::size_t steps = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    std::vector<const PreparedCase*> members;
    for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k) {
      members.push_back(&cases_[order[k]]);
    }
    const auto batch = make_batch(members);
    for (const auto& [name, t] : params) {
      Tensor p = t;
      p.zero_grad();
    }
    auto out = forward_pipeline(batch, state_);
    auto parts = total_loss(out, batch, state_);
    parts.total.backward();
    for (const auto& [name, t] : params) {
      Tensor p = t;
      if (!p.has_grad()) continue;
      auto& buf = state_.optimizer[name];
      if (buf.empty()) buf.assign(p.numel(), 0.0);
      rmsprop_step(p.mutable_data(), p.node().grad, buf, lr, cfg.rmsprop_rho, cfg.rmsprop_eps);
    }
    rec.total += parts.total.item();
    rec.extractor += parts.extractor;
    rec.generator += parts.generator;
    rec.segmentor += parts.segmentor;
    ++steps;
  }
  const double n = static_cast<double>(steps);
  rec.total /= n;
  rec.extractor /= n;
  rec.generator /= n;
  rec.segmentor /= n;
  state_.epoch = epoch + 1;
  history_.push_back(rec);
  return rec;
}

void Trainer::run(std::size_t epochs, const std::function<void(const EpochRecord&)>& on_epoch) {
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto rec = run_epoch();
    if (on_epoch) on_epoch(rec);
  }
}

void Trainer::save(const std::filesystem::path& path) const { save_state(path, state_, history_, fold_); }

void Trainer::load(const std::filesystem::path& path) {
  std::size_t fold = 0;
  std::vector<EpochRecord> history;
  auto loaded = load_state(path, &history, &fold);
  if (!(loaded.cfg == state_.cfg)) throw CheckpointError("checkpoint config differs from the trainer's config");
  state_ = std::move(loaded);
  history_ = std::move(history);
  fold_ = fold;
}

void save_state(const std::filesystem::path& path, const PipelineState& state, const std::vector<EpochRecord>& history,
                std::size_t fold) {
  Checkpoint ck;
  ck.meta["format"] = "strokeforge-pipeline-1";
  ck.meta["epoch"] = std::to_string(state.epoch);
  ck.meta["fold"] = std::to_string(fold);
  std::istringstream cfg(state.cfg.to_text());
  std::string line;
  while (std::getline(cfg, line)) {
    const auto eq = line.find(" = ");
    ck.meta["config." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto add = [&](const std::string& name, const Tensor& t) {
    ck.arrays.push_back({name, t.shape(), {t.data().begin(), t.data().end()}});
  };
  for (const auto& [name, t] : state.parameters()) add(name, t);
  for (const auto& [name, t] : state.buffers()) add(name, t);
  for (const auto& [name, buf] : state.optimizer) ck.arrays.push_back({"optimizer." + name, {buf.size()}, buf});
  if (!history.empty()) {
    std::vector<double> rows;
    for (const auto& r : history) {
      rows.insert(rows.end(), {static_cast<double>(r.epoch), r.lr, r.total, r.extractor, r.generator, r.segmentor});
    }
    ck.arrays.push_back({"history", {history.size(), 6}, std::move(rows)});
  }
  write_checkpoint(path, ck);
}

PipelineState load_state(const std::filesystem::path& path, std::vector<EpochRecord>* history, std::size_t* fold) {
  const auto ck = read_checkpoint(path);
  auto meta = [&](const std::string& key) -> const std::string& {
    auto it = ck.meta.find(key);
    if (it == ck.meta.end()) throw CheckpointError("checkpoint lacks '" + key + "'");
    return it->second;
  };
  if (meta("format") != "strokeforge-pipeline-1") throw CheckpointError("not a pipeline checkpoint: " + path.string());
  std::string text;
  for (const auto& [key, value] : ck.meta) {
    if (key.rfind("config.", 0) == 0) text += key.substr(7) + " = " + value + "\n";
  }
  const auto cfg = TrainConfig::from_config(KeyValueConfig::parse(text, path.string()));
  PipelineState state(cfg, 0);
  state.epoch = std::stoul(meta("epoch"));
  if (fold) *fold = std::stoul(meta("fold"));
  auto restore = [&](const std::string& name, const Tensor& t) {
    if (!ck.contains(name)) throw CheckpointError("checkpoint lacks array '" + name + "'");
    const auto& a = ck.at(name);
    if (a.shape != t.shape()) {
      throw CheckpointError("array '" + name + "' has shape " + shape_str(a.shape) + ", network expects " +
                            shape_str(t.shape()));
    }
    Tensor dst = t;
    std::copy(a.values.begin(), a.values.end(), dst.mutable_data().begin());
  };
  for (const auto& [name, t] : state.parameters()) restore(name, t);
  for (const auto& [name, t] : state.buffers()) restore(name, t);
  for (const auto& a : ck.arrays) {
    if (a.name.rfind("optimizer.", 0) == 0) state.optimizer[a.name.substr(10)] = a.values;
  }
  if (history && ck.contains("history")) {
    const auto& h = ck.at("history");
    for (std::size_t r = 0; r < h.shape[0]; ++r) {
      const double* v = &h.values[r * 6];
      history->push_back({static_cast<std::size_t>(v[0]), v[1], v[2], v[3], v[4], v[5]});
    }
  }
  return state;
}

Prediction infer(const PreparedCase& c, PipelineState& state) {
  NoGradGuard no_grad;
  const auto batch = make_batch({&c});
  const auto out = forward_pipeline(batch, state, ForwardMode::inference());
  const std::size_t h = out.seg_prob.dim(2), w = out.seg_prob.dim(3);
  Prediction p;
  p.seg_prob = reshape(out.seg_prob, {2, h, w});
  const auto fg = p.seg_prob.data().subspan(h * w, h * w);
  p.mask = LesionMask::threshold(fg, h, w, 0.5);
  if (out.dwi_g.defined()) p.dwi_g = reshape(out.dwi_g, {h, w});
  return p;
}

Prediction infer(const CaseRecord& c, PipelineState& state) { return infer(prepare_case(c, state.cfg), state); }

double dice_score(const LesionMask& pred, const LesionMask& truth) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw ShapeError("dice_score: masks are " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                     " and " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
  }
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    a += pred.values[i];
    b += truth.values[i];
    both += pred.values[i] & truth.values[i];
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

std::vector<std::size_t> assign_folds(const std::vector<std::string>& case_ids, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least 2 folds");
  if (case_ids.size() < folds) {
    throw InputError("cannot split " + std::to_string(case_ids.size()) + " cases into " + std::to_string(folds) +
                     " folds");
  }
  std::vector<std::size_t> order(case_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return case_ids[x] < case_ids[y]; });
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(case_ids.size());
  for (std::size_t k = 0; k < order.size(); ++k) fold[order[k]] = k % folds;
  return fold;
}

CvReport cross_validate(const std::vector<CaseRecord>& dataset, const TrainConfig& cfg, const CvOptions& options) {
  cfg.validate();
  std::vector<PreparedCase> prepared;
  std::vector<std::string> ids;
  for (const auto& c : dataset) {
    if (!c.has_labels()) throw InputError("cross-validation case " + c.case_id + " has no dwi/mask");
    prepared.push_back(prepare_case(c, cfg));
    ids.push_back(c.case_id);
  }
  const auto fold_of = assign_folds(ids, cfg.folds, cfg.seed);
  CvReport report{{}, 0.0};
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    std::vector<PreparedCase> train;
    std::vector<const PreparedCase*> val;
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      if (fold_of[i] == f) {
        val.push_back(&prepared[i]);
      } else {
        train.push_back(prepared[i]);
      }
    }
    Trainer trainer(cfg, std::move(train), f);
    trainer.run(cfg.total_epochs, [&](const EpochRecord& r) {
      if (options.on_epoch) options.on_epoch(f, r);
    });
    FoldReport fr{f, {}, {}, 0.0, trainer.history()};
    for (const auto* c : val) {
      fr.validation_ids.push_back(c->case_id);
      fr.case_dice.push_back(dice_score(infer(*c, trainer.state()).mask, *c->mask));
    }
    fr.mean_dice = std::accumulate(fr.case_dice.begin(), fr.case_dice.end(), 0.0) / fr.case_dice.size();
    if (options.on_fold_done) options.on_fold_done(f, trainer.state());
    report.folds.push_back(std::move(fr));
  }
  double s = 0;
  for (const auto& f : report.folds) s += f.mean_dice;
  report.mean_dice = s / static_cast<double>(report.folds.size());
  return report;
}

}  // namespace strokeforge
