#pragma once

// Experiment configuration. The on-disk form is flat `key=value` text, one
// entry per line, keys prefixed by section (e.g. `sg_lc.alpha=7`). Blank lines
// and lines starting with '#' are ignored.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "splitguard/error.hpp"
#include "splitguard/protocol/models.hpp"
#include "splitguard/sgad/detector.hpp"
#include "splitguard/sglc/policy.hpp"
#include "splitguard/sglc/score.hpp"

namespace splitguard::harness {

enum class DetectorSelection { none, sg_lc, sg_ad, both };

inline std::string_view to_string(DetectorSelection d) {
  switch (d) {
    case DetectorSelection::none: return "none";
    case DetectorSelection::sg_lc: return "sg-lc";
    case DetectorSelection::sg_ad: return "sg-ad";
    case DetectorSelection::both: return "both";
  }
  return "?";
}

inline DetectorSelection parse_detector(std::string_view s) {
  if (s == "none") return DetectorSelection::none;
  if (s == "sg-lc" || s == "sg_lc") return DetectorSelection::sg_lc;
  if (s == "sg-ad" || s == "sg_ad") return DetectorSelection::sg_ad;
  if (s == "both") return DetectorSelection::both;
  throw ConfigError("unknown detector '" + std::string(s) + "'");
}

struct DataConfig {
  std::string source = "synth";  // synth | idx
  std::size_t n = 30000;
  std::size_t dim = 16;
  int classes = 4;
  double spread = 1.0;
  std::uint64_t seed = 1;
  std::string idx_images;
  std::string idx_labels;
  std::size_t downsample = 8;  // 0 keeps full resolution
  double pub_fraction = 0.1;
  double pub_noise = 0.0;
};

struct ExperimentConfig {
  DataConfig data;
  protocol::SplitSetup model;
  std::size_t batch_size = 32;
  protocol::OptimConfig train;
  protocol::ServerBehavior attack{protocol::BehaviorKind::fsha, 1.0};
  protocol::FshaConfig fsha;

  DetectorSelection detector = DetectorSelection::sg_lc;
  sglc::SgLcParams sg_lc;
  std::optional<std::size_t> sg_lc_warmup;  // explicit N; otherwise warmup_fraction of an epoch
  double sg_lc_warmup_fraction = 0.02;
  sglc::PolicyConfig policy;
  // LOF with k = n-1 scores nearly every query at or above 1, so the runner
  // flags outliers above 1.5 rather than the module default of 1.
  sgad::AdParams sg_ad{.lof_threshold = 1.5};

  std::size_t trials = 20;
  std::uint64_t base_seed = 1;
  std::size_t max_batches = 0;  // 0 = one epoch
  bool measure_overhead = true;
  std::size_t threads = 0;      // 0 = hardware concurrency

  std::string output_csv;
  std::string output_json;

  void validate() const {
    model.validate();
    attack.validate();
    if (attack.kind == protocol::BehaviorKind::honest) {
      throw ConfigError("attack.behavior must be fsha or multitask");
    }
    if (data.source != "synth" && data.source != "idx") {
      throw ConfigError("data.source must be synth or idx");
    }
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (trials < 1) throw ConfigError("run.trials must be >= 1");
    if (sg_lc_warmup_fraction < 0.0 || sg_lc_warmup_fraction >= 1.0) {
      throw ConfigError("sg_lc.warmup_fraction must be in [0,1)");
    }
    if (policy.group_size == 0 || policy.k == 0) {
      throw ConfigError("sg_lc.group_size and sg_lc.k must be >= 1");
    }
    sg_ad.validate();
    if (attack.kind == protocol::BehaviorKind::multitask &&
        model.variant == protocol::SetupVariant::private_label) {
      throw ConfigError("multitask attack requires the label-sharing setup");
    }
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("config: bad numeric value '" + std::string(v) + "' for " + std::string(key));
  }
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean '" + std::string(v) + "' for " + std::string(key));
}

}  // namespace detail

// Applies one key=value setting. Unknown keys are configuration errors.
inline void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view v) {
  using detail::parse_bool;
  using detail::parse_number;
  using Setter = std::function<void(std::string_view)>;
  const auto num_sz = [&](std::size_t& dst) { return Setter([&dst, key](std::string_view s) { dst = parse_number<std::size_t>(key, s); }); };
  const auto num_d = [&](double& dst) { return Setter([&dst, key](std::string_view s) { dst = parse_number<double>(key, s); }); };
  const auto num_u64 = [&](std::uint64_t& dst) { return Setter([&dst, key](std::string_view s) { dst = parse_number<std::uint64_t>(key, s); }); };
  const auto flag = [&](bool& dst) { return Setter([&dst, key](std::string_view s) { dst = parse_bool(key, s); }); };
  const auto str = [&](std::string& dst) { return Setter([&dst](std::string_view s) { dst = std::string(s); }); };

  const std::map<std::string_view, Setter> table = {
      {"data.source", str(c.data.source)},
      {"data.n", num_sz(c.data.n)},
      {"data.dim", num_sz(c.data.dim)},
      {"data.classes", [&](std::string_view s) { c.data.classes = parse_number<int>(key, s); }},
      {"data.spread", num_d(c.data.spread)},
      {"data.seed", num_u64(c.data.seed)},
      {"data.idx_images", str(c.data.idx_images)},
      {"data.idx_labels", str(c.data.idx_labels)},
      {"data.downsample", num_sz(c.data.downsample)},
      {"data.pub_fraction", num_d(c.data.pub_fraction)},
      {"data.pub_noise", num_d(c.data.pub_noise)},
      {"model.variant", [&](std::string_view s) { c.model.variant = protocol::parse_variant(s); }},
      {"model.client_hidden", num_sz(c.model.client_hidden)},
      {"model.boundary_dim", num_sz(c.model.boundary_dim)},
      {"model.server_hidden", num_sz(c.model.server_hidden)},
      {"model.boundary_activation", [&](std::string_view s) { c.model.boundary_activation = nn::parse_activation(s); }},
      {"train.batch_size", num_sz(c.batch_size)},
      {"train.lr", num_d(c.train.lr)},
      {"train.momentum", num_d(c.train.momentum)},
      {"attack.behavior", [&](std::string_view s) { c.attack.kind = protocol::parse_behavior(s); }},
      {"attack.weight", num_d(c.attack.attack_weight)},
      {"fsha.setup_epochs", num_sz(c.fsha.setup_epochs)},
      {"fsha.autoencoder_lr", num_d(c.fsha.autoencoder_lr)},
      {"fsha.distinguisher_lr", num_d(c.fsha.distinguisher_lr)},
      {"fsha.momentum", num_d(c.fsha.momentum)},
      {"fsha.distinguisher_loss", [&](std::string_view s) { c.fsha.distinguisher_loss = protocol::parse_distinguisher_loss(s); }},
      {"detector.kind", [&](std::string_view s) { c.detector = parse_detector(s); }},
      {"sg_lc.alpha", num_d(c.sg_lc.alpha)},
      {"sg_lc.beta", num_d(c.sg_lc.beta)},
      {"sg_lc.p_fake", num_d(c.sg_lc.p_fake)},
      {"sg_lc.b_fake", num_d(c.sg_lc.b_fake)},
      {"sg_lc.warmup", [&](std::string_view s) { c.sg_lc_warmup = parse_number<std::size_t>(key, s); }},
      {"sg_lc.warmup_fraction", num_d(c.sg_lc_warmup_fraction)},
      {"sg_lc.threshold", num_d(c.sg_lc.threshold)},
      {"sg_lc.epsilon", num_d(c.sg_lc.epsilon)},
      {"sg_lc.exclude_true_label", flag(c.sg_lc.exclude_true_label)},
      {"sg_lc.policy", [&](std::string_view s) { c.policy.kind = sglc::parse_policy(s); }},
      {"sg_lc.k", num_sz(c.policy.k)},
      {"sg_lc.group_size", num_sz(c.policy.group_size)},
      {"sg_lc.min_groups", num_sz(c.policy.min_groups)},
      {"sg_lc.min_index", num_sz(c.policy.min_index)},
      {"sg_ad.sim_data_rate", num_d(c.sg_ad.sim_data_rate)},
      {"sg_ad.window", num_sz(c.sg_ad.window)},
      {"sg_ad.lof_threshold", num_d(c.sg_ad.lof_threshold)},
      {"sg_ad.k", [&](std::string_view s) {
         const auto k = parse_number<std::size_t>(key, s);
         c.sg_ad.k = k == 0 ? std::nullopt : std::optional<std::size_t>(k);
       }},
      {"sg_ad.reach", [&](std::string_view s) {
         if (s == "neighbor") c.sg_ad.reach = sgad::ReachMode::neighbor;
         else if (s == "query") c.sg_ad.reach = sgad::ReachMode::query;
         else throw ConfigError("sg_ad.reach must be neighbor or query");
       }},
      {"sg_ad.unit_norm", flag(c.sg_ad.unit_norm)},
      {"run.trials", num_sz(c.trials)},
      {"run.base_seed", num_u64(c.base_seed)},
      {"run.max_batches", num_sz(c.max_batches)},
      {"run.measure_overhead", flag(c.measure_overhead)},
      {"run.threads", num_sz(c.threads)},
      {"output.csv", str(c.output_csv)},
      {"output.json", str(c.output_json)},
  };
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("config: unknown key '" + std::string(key) + "'");
  it->second(v);
}

inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {}) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    apply_setting(base, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace splitguard::harness
