#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/protocol/detector.hpp"
#include "splitguard/sglc/score.hpp"

namespace splitguard::sglc {

using protocol::Verdict;

enum class PolicyKind { fast, avg_k, voting };

inline std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::fast: return "fast";
    case PolicyKind::avg_k: return "avg-k";
    case PolicyKind::voting: return "voting";
  }
  return "?";
}

inline PolicyKind parse_policy(std::string_view s) {
  if (s == "fast") return PolicyKind::fast;
  if (s == "avg-k" || s == "avg_k") return PolicyKind::avg_k;
  if (s == "voting") return PolicyKind::voting;
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

struct PolicyConfig {
  PolicyKind kind = PolicyKind::voting;
  std::size_t k = 10;            // avg-k window
  std::size_t group_size = 5;    // voting n
  std::size_t min_groups = 10;   // voting c required before the first verdict
  std::size_t min_index = 0;     // fast: earliest batch index whose score may decide
};

// Attack iff the latest score is below T. Scores before `min_index` never decide.
inline Verdict policy_fast(std::span<const ScorePoint> scores, double threshold,
                           std::size_t min_index = 0) {
  if (scores.empty() || scores.back().batch_index < min_index) return Verdict::undecided;
  return scores.back().sg_value < threshold ? Verdict::attack : Verdict::no_attack;
}

// Attack iff the mean of the last k scores is below T.
inline Verdict policy_avg_k(std::span<const ScorePoint> scores, std::size_t k, double threshold) {
  if (k == 0) throw ConfigError("policy_avg_k: k must be >= 1");
  if (scores.size() < k) return Verdict::undecided;
  double sum = 0.0;
  for (std::size_t i = scores.size() - k; i < scores.size(); ++i) sum += scores[i].sg_value;
  return sum / static_cast<double>(k) < threshold ? Verdict::attack : Verdict::no_attack;
}

// Scores are cut sequentially into c = ceil(len / n) groups (the last may be
// short); each group votes attack when its mean is below T; attack iff
// votes > c / 2.
inline Verdict policy_voting(std::span<const ScorePoint> scores, std::size_t group_size,
                             double threshold) {
  if (group_size == 0) throw ConfigError("policy_voting: group size must be >= 1");
  if (scores.empty()) return Verdict::undecided;
  const std::size_t groups = (scores.size() + group_size - 1) / group_size;
  std::size_t votes = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * group_size;
    const std::size_t hi = std::min(lo + group_size, scores.size());
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += scores[i].sg_value;
    if (sum / static_cast<double>(hi - lo) < threshold) ++votes;
  }
  return 2 * votes > groups ? Verdict::attack : Verdict::no_attack;
}

// Drives a policy over a growing score history. Voting is consulted only when
// a group completes and at least `min_groups` groups exist; between group
// completions the previous verdict stands.
class DecisionPolicy {
 public:
  DecisionPolicy() = default;
  DecisionPolicy(PolicyConfig cfg, double threshold) : cfg_(cfg), threshold_(threshold) {}

  const PolicyConfig& config() const noexcept { return cfg_; }

  Verdict decide(std::span<const ScorePoint> scores) {
    switch (cfg_.kind) {
      case PolicyKind::fast:
        last_ = policy_fast(scores, threshold_, cfg_.min_index);
        break;
      case PolicyKind::avg_k:
        last_ = policy_avg_k(scores, cfg_.k, threshold_);
        break;
      case PolicyKind::voting:
        if (!scores.empty() && scores.size() % cfg_.group_size == 0 &&
            scores.size() >= cfg_.group_size * cfg_.min_groups) {
          last_ = policy_voting(scores, cfg_.group_size, threshold_);
        }
        break;
    }
    return last_;
  }

  Verdict last() const noexcept { return last_; }

 private:
  PolicyConfig cfg_;
  double threshold_ = 0.9;
  Verdict last_ = Verdict::undecided;
};

}  // namespace splitguard::sglc
