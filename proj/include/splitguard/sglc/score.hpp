#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/network.hpp"

namespace splitguard::sglc {

struct SgLcParams {
  double alpha = 7.0;
  double beta = 1.0;
  double p_fake = 0.1;
  double b_fake = 1.0;
  std::size_t warmup = 20;  // N: first batch index eligible for fake batches and recording
  double threshold = 0.9;
  double epsilon = 1e-6;
  bool exclude_true_label = false;  // draw randomized labels from the other L-1 classes

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("sg_lc.alpha must be > 0");
    if (!(beta >= 1.0)) throw ConfigError("sg_lc.beta must be >= 1");
    if (!(p_fake > 0.0 && p_fake < 1.0)) throw ConfigError("sg_lc.p_fake must be in (0,1)");
    if (!(b_fake > 0.0 && b_fake <= 1.0)) throw ConfigError("sg_lc.b_fake must be in (0,1]");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("sg_lc.threshold must be in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("sg_lc.epsilon must be > 0");
  }
};

// Running summary of a gradient set: the vector sum and the mean L2 norm.
// Constant memory regardless of how many gradients were folded in.
struct GradSetSummary {
  std::vector<double> sum_vec;
  double mean_mag = 0.0;
  std::size_t count = 0;

  GradSetSummary() = default;
  explicit GradSetSummary(std::size_t dim) : sum_vec(dim, 0.0) {}

  bool empty() const noexcept { return count == 0; }
};

inline void update_summary(GradSetSummary& s, const nn::GradVec& g) {
  if (s.sum_vec.empty() && s.count == 0) s.sum_vec.assign(g.dim(), 0.0);
  if (g.dim() != s.sum_vec.size()) {
    throw ConfigError("update_summary: gradient dim " + std::to_string(g.dim()) +
                      " != summary dim " + std::to_string(s.sum_vec.size()));
  }
  for (std::size_t i = 0; i < g.dim(); ++i) s.sum_vec[i] += g.values[i];
  const double n = static_cast<double>(s.count);
  s.mean_mag = (s.mean_mag * n + g.norm()) / (n + 1.0);
  ++s.count;
}

// Union of two summaries: sums add, mean magnitudes combine count-weighted.
inline GradSetSummary merge(const GradSetSummary& a, const GradSetSummary& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.sum_vec.size() != b.sum_vec.size()) throw ConfigError("merge: dimension mismatch");
  GradSetSummary out(a.sum_vec.size());
  for (std::size_t i = 0; i < out.sum_vec.size(); ++i) out.sum_vec[i] = a.sum_vec[i] + b.sum_vec[i];
  out.count = a.count + b.count;
  out.mean_mag = (a.mean_mag * static_cast<double>(a.count) +
                  b.mean_mag * static_cast<double>(b.count)) /
                 static_cast<double>(out.count);
  return out;
}

// |mean_mag(A) - mean_mag(B)|; nullopt when either set is empty.
inline std::optional<double> set_distance(const GradSetSummary& a, const GradSetSummary& b) {
  if (a.empty() || b.empty()) return std::nullopt;
  return std::abs(a.mean_mag - b.mean_mag);
}

// Angle in [0, pi] between the set sums; nullopt for empty sets or zero-norm sums.
inline std::optional<double> set_angle(const GradSetSummary& a, const GradSetSummary& b) {
  if (a.empty() || b.empty() || a.sum_vec.size() != b.sum_vec.size()) return std::nullopt;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.sum_vec.size(); ++i) {
    dot += a.sum_vec[i] * b.sum_vec[i];
    na += a.sum_vec[i] * a.sum_vec[i];
    nb += b.sum_vec[i] * b.sum_vec[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  const double cosine = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return std::acos(cosine);
}

// Components of one S evaluation, kept for diagnostics.
struct ScoreTerms {
  double theta_fr = 0.0;
  double d_fr = 0.0;
  double theta_r = 0.0;
  double d_r = 0.0;
  double s = 0.0;
};

// S = [theta(F,R) d(F,R) - theta(R1,R2) d(R1,R2)] / [d(F,R) + d(R1,R2) + eps],
// with R the merged summary of R1 and R2.
inline std::optional<ScoreTerms> score_terms(const GradSetSummary& f, const GradSetSummary& r1,
                                             const GradSetSummary& r2, double epsilon) {
  const GradSetSummary r = merge(r1, r2);
  const auto theta_fr = set_angle(f, r);
  const auto d_fr = set_distance(f, r);
  const auto theta_r = set_angle(r1, r2);
  const auto d_r = set_distance(r1, r2);
  if (!theta_fr || !d_fr || !theta_r || !d_r) return std::nullopt;
  ScoreTerms t{*theta_fr, *d_fr, *theta_r, *d_r, 0.0};
  t.s = (t.theta_fr * t.d_fr - t.theta_r * t.d_r) / (t.d_fr + t.d_r + epsilon);
  return t;
}

inline std::optional<double> s_value(const GradSetSummary& f, const GradSetSummary& r1,
                                     const GradSetSummary& r2, double epsilon) {
  if (auto t = score_terms(f, r1, r2, epsilon)) return t->s;
  return std::nullopt;
}

// sigma(alpha * S)^beta.
inline double sg_score(double s, double alpha, double beta) {
  const double z = alpha * s;
  const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::pow(sig, beta);
}

inline double sg_score(double s, const SgLcParams& p) { return sg_score(s, p.alpha, p.beta); }

struct ScorePoint {
  std::size_t batch_index = 0;
  double s_value = 0.0;
  double sg_value = 0.0;
  ScoreTerms terms;
};

}  // namespace splitguard::sglc
