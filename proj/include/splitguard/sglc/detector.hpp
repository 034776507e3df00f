#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/protocol/detector.hpp"
#include "splitguard/sglc/policy.hpp"
#include "splitguard/sglc/score.hpp"

namespace splitguard::sglc {

// Label-changing detector. From batch N on, each batch is sent with randomized
// labels with probability P_F. Fake-batch gradients go to F and trigger a
// score; regular gradients are split between R1 and R2 by a fair coin.
class SgLcDetector final : public protocol::Detector {
 public:
  SgLcDetector(SgLcParams params, PolicyConfig policy, std::uint64_t seed)
      : params_(params), policy_(policy, params.threshold), rng_(seed) {
    params_.validate();
  }

  std::string_view name() const override { return "sg-lc"; }

  std::optional<data::Labels> plan_batch(std::size_t batch_index, std::span<const int> labels,
                                         int num_classes) override {
    if (batch_index < params_.warmup) return std::nullopt;
    std::bernoulli_distribution fake(params_.p_fake);
    if (!fake(rng_)) return std::nullopt;
    return data::randomize_labels(labels, params_.b_fake, num_classes, rng_,
                                  params_.exclude_true_label);
  }

  protocol::Verdict observe(std::size_t batch_index, bool is_fake,
                            const nn::GradVec& grad) override {
    if (batch_index < params_.warmup) return policy_.last();
    if (is_fake) {
      update_summary(fake_, grad);
      if (auto terms = score_terms(fake_, regular1_, regular2_, params_.epsilon)) {
        scores_.push_back({batch_index, terms->s, sg_score(terms->s, params_), *terms});
        return policy_.decide(scores_);
      }
      return policy_.last();
    }
    std::bernoulli_distribution coin(0.5);
    update_summary(coin(rng_) ? regular1_ : regular2_, grad);
    return policy_.last();
  }

  const std::vector<ScorePoint>& scores() const noexcept { return scores_; }
  const GradSetSummary& fake_set() const noexcept { return fake_; }
  const GradSetSummary& regular1() const noexcept { return regular1_; }
  const GradSetSummary& regular2() const noexcept { return regular2_; }
  const SgLcParams& params() const noexcept { return params_; }

 private:
  SgLcParams params_;
  DecisionPolicy policy_;
  std::mt19937_64 rng_;
  GradSetSummary fake_, regular1_, regular2_;
  std::vector<ScorePoint> scores_;
};

}  // namespace splitguard::sglc
