#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/error.hpp"
#include "splitguard/protocol/detector.hpp"
#include "splitguard/protocol/exchange.hpp"
#include "splitguard/protocol/session.hpp"
#include "splitguard/sgad/lof.hpp"

namespace splitguard::sgad {

struct AdParams {
  double sim_data_rate = 0.01;  // share of client data reserved for local simulation
  std::size_t window = 10;      // w
  double lof_threshold = 1.0;
  std::optional<std::size_t> k;  // LOF neighbours; default |train_LOF| - 1
  ReachMode reach = ReachMode::neighbor;
  bool unit_norm = false;

  void validate() const {
    if (!(sim_data_rate > 0.0 && sim_data_rate <= 1.0)) {
      throw ConfigError("sg_ad.sim_data_rate must be in (0,1]");
    }
    if (window < 1) throw ConfigError("sg_ad.window must be >= 1");
  }

  // LOF needs at least window + 1 training gradients.
  std::size_t min_train_points() const noexcept { return window + 1; }
};

// Trains a local copy of the client together with a freshly initialized
// simulated server on train_SIM and returns one client-front gradient per
// batch. Passes over train_SIM repeat (reshuffled) until `min_points`
// gradients exist. The caller's client model is not modified.
inline std::vector<nn::GradVec> collect_honest_gradients(
    const protocol::ClientModel& client, const protocol::SplitSetup& setup,
    const data::Dataset& train_sim, std::size_t batch_size, std::size_t min_points,
    const protocol::OptimConfig& opt, std::uint64_t seed) {
  if (train_sim.size() == 0) throw ConfigError("collect_honest_gradients: empty train_SIM");
  std::mt19937_64 rng(seed);
  protocol::SessionState sim{setup, client,
                             protocol::make_server(setup, {protocol::BehaviorKind::honest, 0.0},
                                                   opt, std::nullopt, rng)};
  sim.client.front_opt = nn::SgdOptimizer(opt.lr, opt.momentum);
  if (sim.client.head) sim.client.head_opt = nn::SgdOptimizer(opt.lr, opt.momentum);

  protocol::SessionConfig cfg;
  cfg.batch_size = std::min(batch_size, train_sim.size());
  cfg.order_seed = rng();
  cfg.max_batches = std::max(train_sim.size() / cfg.batch_size, min_points);
  cfg.record_gradients = true;
  auto res = protocol::run_session(sim, train_sim, {}, cfg);
  if (res.aborted) throw NumericError("collect_honest_gradients: " + res.abort_reason);
  std::vector<nn::GradVec> out;
  out.reserve(res.transcript.records.size());
  for (auto& r : res.transcript.records) out.push_back(std::move(r.client_grad));
  return out;
}

inline LofModel fit_lof(std::span<const nn::GradVec> grads, const AdParams& p) {
  LofOptions opt;
  opt.k = p.k;
  opt.reach = p.reach;
  opt.unit_norm = p.unit_norm;
  return LofModel::fit(grads, opt);
}

// Windowed LOF vote: after w decisions, attack iff a strict majority of the
// last w gradients are outliers.
class AdDetector final : public protocol::Detector {
 public:
  AdDetector(std::shared_ptr<const LofModel> model, AdParams params)
      : model_(std::move(model)), params_(params) {
    params_.validate();
    if (!model_) throw ConfigError("AdDetector: no LOF model");
  }

  std::string_view name() const override { return "sg-ad"; }

  // Fake-batch gradients (from a co-running label-changing detector) are skipped.
  protocol::Verdict observe(std::size_t /*batch_index*/, bool is_fake,
                            const nn::GradVec& grad) override {
    if (is_fake) return last_;
    return step(grad);
  }

  protocol::Verdict step(const nn::GradVec& grad) {
    last_score_ = model_->score(grad);
    window_.push_back(last_score_ > params_.lof_threshold);
    while (window_.size() > params_.window) window_.pop_front();
    if (window_.size() < params_.window) return last_ = protocol::Verdict::undecided;
    const auto outliers = static_cast<std::size_t>(std::count(window_.begin(), window_.end(), true));
    last_ = 2 * outliers > params_.window ? protocol::Verdict::attack : protocol::Verdict::no_attack;
    return last_;
  }

  double last_score() const noexcept { return last_score_; }
  const std::deque<bool>& recent_decisions() const noexcept { return window_; }
  const LofModel& model() const noexcept { return *model_; }

 private:
  std::shared_ptr<const LofModel> model_;
  AdParams params_;
  std::deque<bool> window_;
  double last_score_ = 0.0;
  protocol::Verdict last_ = protocol::Verdict::undecided;
};

// Convenience free function matching the detector's per-gradient step.
inline protocol::Verdict ad_step(AdDetector& state, const nn::GradVec& g) { return state.step(g); }

}  // namespace splitguard::sgad
