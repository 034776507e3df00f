#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/data/idx.hpp"
#include "splitguard/harness/config.hpp"
#include "splitguard/protocol/fsha.hpp"
#include "splitguard/protocol/session.hpp"
#include "splitguard/sgad/detector.hpp"
#include "splitguard/sglc/detector.hpp"

namespace splitguard::harness {

enum class Truth { honest, attack };

inline std::string_view to_string(Truth t) { return t == Truth::honest ? "honest" : "attack"; }

inline Truth parse_truth(std::string_view s) {
  if (s == "honest") return Truth::honest;
  if (s == "attack") return Truth::attack;
  throw ConfigError("unknown truth '" + std::string(s) + "'");
}

// Independent 64-bit seed for one purpose within a trial.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), 0x5347u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

enum SeedStream : std::uint64_t {
  kClientInit = 1,
  kServerInit,
  kFshaInit,
  kFshaSetup,
  kBatchOrder,
  kSgLc,
  kSimulation,
};

// Everything shared read-only by all trials of one experiment.
struct ExperimentContext {
  ExperimentConfig config;
  data::DataSplits splits;
  std::shared_ptr<const data::Dataset> pub;
  std::size_t batches_per_epoch = 0;
  std::size_t warmup = 0;
  std::size_t max_batches = 0;
  nn::Matrix eval_inputs;  // private examples used to measure reconstruction error
  double baseline_mse = 0.0;
};

inline data::Dataset load_dataset(const DataConfig& d) {
  if (d.source == "idx") {
    std::optional<std::size_t> ds;
    if (d.downsample > 0) ds = d.downsample;
    return data::load_idx(d.idx_images, d.idx_labels, ds, d.classes);
  }
  return data::synth_blobs(d.n, d.dim, d.classes, d.spread, d.seed);
}

inline ExperimentContext prepare_experiment(ExperimentConfig cfg) {
  cfg.validate();
  ExperimentContext ctx;
  const data::Dataset full = load_dataset(cfg.data);
  cfg.model.input_dim = full.dim();
  cfg.model.num_classes = full.num_classes;
  data::SplitSpec split{cfg.sg_ad.sim_data_rate, cfg.data.pub_fraction, cfg.data.pub_noise};
  ctx.splits = data::split_dataset(full, split, derive_seed(cfg.data.seed, 99));
  ctx.pub = std::make_shared<const data::Dataset>(ctx.splits.pub);
  ctx.batches_per_epoch = ctx.splits.train.size() / cfg.batch_size;
  if (ctx.batches_per_epoch == 0) throw ConfigError("training split smaller than one batch");
  ctx.warmup = cfg.sg_lc_warmup.value_or(static_cast<std::size_t>(
      std::llround(cfg.sg_lc_warmup_fraction * static_cast<double>(ctx.batches_per_epoch))));
  ctx.max_batches = cfg.max_batches == 0 ? ctx.batches_per_epoch : cfg.max_batches;
  const std::size_t n_eval = std::min<std::size_t>(512, ctx.splits.train.size());
  std::vector<std::size_t> idx(n_eval);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  ctx.eval_inputs = nn::select_rows(ctx.splits.train.examples, idx);
  ctx.baseline_mse = data::mean_image_baseline_mse(ctx.eval_inputs);
  ctx.config = std::move(cfg);
  return ctx;
}

// Fresh models and detectors for one trial, ready to run.
struct TrialSetup {
  protocol::SessionState state;
  std::unique_ptr<sglc::SgLcDetector> sg_lc;
  std::unique_ptr<sgad::AdDetector> sg_ad;
  double detector_prepare_ms = 0.0;

  std::vector<protocol::Detector*> detectors() const {
    std::vector<protocol::Detector*> out;
    if (sg_lc) out.push_back(sg_lc.get());
    if (sg_ad) out.push_back(sg_ad.get());
    return out;
  }
};

inline protocol::ServerModel make_trial_server(const ExperimentContext& ctx, Truth truth,
                                               std::uint64_t seed) {
  const auto& cfg = ctx.config;
  std::mt19937_64 server_rng(derive_seed(seed, kServerInit));
  if (truth == Truth::honest) {
    return protocol::make_server(cfg.model, {protocol::BehaviorKind::honest, 0.0}, cfg.train,
                                 std::nullopt, server_rng);
  }
  protocol::FshaConfig fcfg = cfg.fsha;
  fcfg.batch_size = cfg.batch_size;
  std::mt19937_64 fsha_rng(derive_seed(seed, kFshaInit));
  auto st = protocol::make_fsha_state(cfg.model, ctx.pub, fcfg, fsha_rng);
  std::mt19937_64 setup_rng(derive_seed(seed, kFshaSetup));
  st = protocol::fsha_setup(std::move(st), setup_rng);
  return protocol::make_server(cfg.model, cfg.attack, cfg.train, std::move(st), server_rng);
}

inline TrialSetup build_trial(const ExperimentContext& ctx, Truth truth, std::uint64_t seed,
                              DetectorSelection detectors) {
  const auto& cfg = ctx.config;
  TrialSetup t;
  std::mt19937_64 client_rng(derive_seed(seed, kClientInit));
  t.state.setup = cfg.model;
  t.state.client = protocol::make_client(cfg.model, cfg.train, client_rng);
  t.state.server = make_trial_server(ctx, truth, seed);

  const auto prep_start = std::chrono::steady_clock::now();
  if (detectors == DetectorSelection::sg_lc || detectors == DetectorSelection::both) {
    sglc::SgLcParams p = cfg.sg_lc;
    p.warmup = ctx.warmup;
    sglc::PolicyConfig pol = cfg.policy;
    pol.min_index = std::max(pol.min_index, ctx.warmup);
    t.sg_lc = std::make_unique<sglc::SgLcDetector>(p, pol, derive_seed(seed, kSgLc));
  }
  if (detectors == DetectorSelection::sg_ad || detectors == DetectorSelection::both) {
    auto grads = sgad::collect_honest_gradients(t.state.client, cfg.model, ctx.splits.sim,
                                                cfg.batch_size, cfg.sg_ad.min_train_points(),
                                                cfg.train, derive_seed(seed, kSimulation));
    auto model = std::make_shared<const sgad::LofModel>(sgad::fit_lof(grads, cfg.sg_ad));
    t.sg_ad = std::make_unique<sgad::AdDetector>(std::move(model), cfg.sg_ad);
  }
  t.detector_prepare_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - prep_start)
          .count();
  return t;
}

inline protocol::SessionConfig session_config(const ExperimentContext& ctx, std::uint64_t seed) {
  protocol::SessionConfig s;
  s.batch_size = ctx.config.batch_size;
  s.order_seed = derive_seed(seed, kBatchOrder);
  s.max_batches = ctx.max_batches;
  s.record_gradients = false;
  return s;
}

inline double reconstruction_mse(const ExperimentContext& ctx, const protocol::SessionState& st) {
  const nn::Matrix out = nn::predict(st.client.front, ctx.eval_inputs);
  return nn::mean_squared_error(protocol::reconstruct(st.server, out), ctx.eval_inputs);
}

struct RunResult {
  std::size_t trial = 0;
  Truth truth = Truth::honest;
  protocol::Verdict verdict = protocol::Verdict::undecided;
  std::optional<double> detection_t;
  double wall_detector_ms = 0.0;
  double wall_total_ms = 0.0;
  std::optional<double> reconstruction_mse;
  bool aborted = false;
  std::uint64_t seed = 0;
  std::size_t batches_run = 0;
  std::optional<double> wall_baseline_ms;  // same seed and batch count, no detectors

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

using DetectorFactory =
    std::function<std::unique_ptr<protocol::Detector>(Truth truth, std::uint64_t seed)>;

struct TrialOptions {
  std::optional<DetectorSelection> detectors;  // overrides the config selection
  bool measure_overhead = false;
  DetectorFactory custom;  // when set, replaces the built-in detectors
};

// One first-epoch session with fresh models for the given seed.
inline RunResult run_trial(const ExperimentContext& ctx, Truth truth, std::uint64_t seed,
                           const TrialOptions& opt = {}) {
  const DetectorSelection sel =
      opt.custom ? DetectorSelection::none : opt.detectors.value_or(ctx.config.detector);
  RunResult r;
  r.truth = truth;
  r.seed = seed;
  TrialSetup t;
  try {
    t = build_trial(ctx, truth, seed, sel);
  } catch (const NumericError&) {
    r.aborted = true;
    return r;
  }
  std::unique_ptr<protocol::Detector> custom;
  auto dets = t.detectors();
  if (opt.custom) {
    custom = opt.custom(truth, seed);
    if (custom) dets.push_back(custom.get());
  }
  auto res = protocol::run_session(t.state, ctx.splits.train, dets, session_config(ctx, seed));
  r.verdict = res.verdict;
  r.detection_t = res.detection_t;
  r.aborted = res.aborted;
  r.batches_run = res.batches_run;
  r.wall_detector_ms = res.wall_detector_ms + t.detector_prepare_ms;
  r.wall_total_ms = res.wall_total_ms + t.detector_prepare_ms;
  if (truth == Truth::attack && !res.aborted) {
    const double mse = reconstruction_mse(ctx, t.state);
    if (std::isfinite(mse)) r.reconstruction_mse = mse;
  }
  if (opt.measure_overhead && !dets.empty() && res.batches_run > 0) {
    TrialSetup base = build_trial(ctx, truth, seed, DetectorSelection::none);
    auto scfg = session_config(ctx, seed);
    scfg.max_batches = res.batches_run;
    auto b = protocol::run_session(base.state, ctx.splits.train, {}, scfg);
    r.wall_baseline_ms = b.wall_total_ms;
  }
  return r;
}

}  // namespace splitguard::harness
