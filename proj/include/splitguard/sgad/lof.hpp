#pragma once

// Local Outlier Factor over a fixed reference set, fitted once and then used
// to score new points one at a time.
//
//   d_k(p)        distance from p to its k-th nearest reference point
//   N_k(p)        reference points within d_k(p) (ties included, so |N_k| >= k)
//   reach(p, o)   max(d(p, o), d_k(o))
//   lrd(p)        |N_k(p)| / sum_{o in N_k(p)} reach(p, o)
//   LOF(p)        mean_{o in N_k(p)} lrd(o) / lrd(p)
//
// A zero reachability sum (p coincides with all its neighbours) gives
// lrd = +inf. Ratios of two infinite densities count as 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitguard/error.hpp"
#include "splitguard/nn/network.hpp"

namespace splitguard::sgad {

inline constexpr double kInfiniteDensity = std::numeric_limits<double>::infinity();

// Which k-distance bounds the reachability distance. The standard algorithm
// uses the reached point's own k-distance; `query` uses the k-distance of the
// point doing the reaching.
enum class ReachMode { neighbor, query };

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Distance from p to its k-th nearest point in `others`.
inline double k_distance(std::span<const double> p, std::span<const std::vector<double>> others,
                         std::size_t k) {
  if (k == 0 || others.size() < k) {
    throw UsageError("k_distance: need 1 <= k <= |others| (k=" + std::to_string(k) +
                     ", |others|=" + std::to_string(others.size()) + ")");
  }
  std::vector<double> d;
  d.reserve(others.size());
  for (const auto& o : others) d.push_back(euclidean(p, o));
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
  return d[k - 1];
}

inline double reach_dist(double d_pq, double k_dist) { return std::max(d_pq, k_dist); }

// Local reachability density from the reach distances to each neighbour.
inline double lrd(std::span<const double> reach_distances) {
  if (reach_distances.empty()) throw UsageError("lrd: empty neighbourhood");
  const double sum = std::accumulate(reach_distances.begin(), reach_distances.end(), 0.0);
  if (sum == 0.0) return kInfiniteDensity;
  return static_cast<double>(reach_distances.size()) / sum;
}

// LOF ratio with the +inf conventions: inf/inf counts as 1, finite/inf as 0.
inline double lof_ratio(std::span<const double> neighbor_lrds, double own_lrd) {
  const double n = static_cast<double>(neighbor_lrds.size());
  if (own_lrd == kInfiniteDensity) {
    const auto inf = std::count(neighbor_lrds.begin(), neighbor_lrds.end(), kInfiniteDensity);
    return static_cast<double>(inf) / n;
  }
  double sum = 0.0;
  for (double v : neighbor_lrds) {
    if (v == kInfiniteDensity) return kInfiniteDensity;
    sum += v;
  }
  return sum / (n * own_lrd);
}

struct LofOptions {
  std::optional<std::size_t> k;  // default |train| - 1
  ReachMode reach = ReachMode::neighbor;
  bool unit_norm = false;        // scale every point to unit L2 norm first
};

class LofModel {
 public:
  static LofModel fit(std::vector<std::vector<double>> points, const LofOptions& opt = {}) {
    if (points.size() < 2) throw ConfigError("LofModel: need at least 2 training points");
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
      if (p.size() != dim) throw ConfigError("LofModel: inconsistent point dimensions");
    }
    const std::size_t k = opt.k.value_or(points.size() - 1);
    if (k < 1 || k > points.size() - 1) {
      throw ConfigError("LofModel: k must be in [1, |train| - 1]");
    }
    LofModel m;
    m.opt_ = opt;
    m.k_ = k;
    m.points_ = std::move(points);
    if (opt.unit_norm) {
      for (auto& p : m.points_) normalize(p);
    }
    const std::size_t n = m.points_.size();
    m.dist_.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double d = euclidean(m.points_[i], m.points_[j]);
        m.dist_[i * n + j] = d;
        m.dist_[j * n + i] = d;
      }
    }
    m.neighbors_.resize(n);
    m.kdist_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(m.dist_.begin() + static_cast<std::ptrdiff_t>(i * n),
                              m.dist_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
      auto nb = m.neighbourhood(row, i);
      m.kdist_[i] = nb.k_distance;
      m.neighbors_[i] = std::move(nb.members);
    }
    m.lrd_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> reach;
      for (std::size_t o : m.neighbors_[i]) {
        reach.push_back(reach_dist(m.dist_[i * n + o], m.bound(o, m.kdist_[i])));
      }
      m.lrd_[i] = lrd(reach);
    }
    return m;
  }

  static LofModel fit(std::span<const nn::GradVec> grads, const LofOptions& opt = {}) {
    std::vector<std::vector<double>> pts;
    pts.reserve(grads.size());
    for (const auto& g : grads) pts.push_back(g.values);
    return fit(std::move(pts), opt);
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return points_.size(); }
  std::size_t dim() const noexcept { return points_.empty() ? 0 : points_.front().size(); }
  const std::vector<std::vector<double>>& points() const noexcept { return points_; }
  double train_k_distance(std::size_t i) const { return kdist_.at(i); }
  double train_lrd(std::size_t i) const { return lrd_.at(i); }

  // LOF of a new point against the reference set.
  double score(std::span<const double> p_in) const {
    if (p_in.size() != dim()) {
      throw UsageError("lof_score: point dim " + std::to_string(p_in.size()) +
                       " != model dim " + std::to_string(dim()));
    }
    std::vector<double> p(p_in.begin(), p_in.end());
    if (opt_.unit_norm) normalize(p);
    std::vector<double> d(points_.size());
    for (std::size_t j = 0; j < points_.size(); ++j) d[j] = euclidean(p, points_[j]);
    const auto nb = neighbourhood(d, points_.size());
    std::vector<double> reach, nlrd;
    for (std::size_t o : nb.members) {
      reach.push_back(reach_dist(d[o], bound(o, nb.k_distance)));
      nlrd.push_back(lrd_[o]);
    }
    return lof_ratio(nlrd, lrd(reach));
  }

  double score(const nn::GradVec& g) const { return score(std::span<const double>(g.values)); }

  // LOF of reference point i within the reference set (i excluded from its own neighbourhood).
  double train_score(std::size_t i) const {
    std::vector<double> nlrd;
    for (std::size_t o : neighbors_.at(i)) nlrd.push_back(lrd_[o]);
    return lof_ratio(nlrd, lrd_[i]);
  }

 private:
  struct Neighbourhood {
    double k_distance = 0.0;
    std::vector<std::size_t> members;
  };

  // Neighbourhood from a distance row; `self` is skipped (pass size() for none).
  // Ties at the k-distance are all included; order is stable by index.
  Neighbourhood neighbourhood(const std::vector<double>& d, std::size_t self) const {
    std::vector<std::size_t> idx;
    idx.reserve(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (j != self) idx.push_back(j);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    Neighbourhood nb;
    nb.k_distance = d[idx[k_ - 1]];
    for (std::size_t j : idx) {
      if (d[j] > nb.k_distance) break;
      nb.members.push_back(j);
    }
    return nb;
  }

  double bound(std::size_t neighbor, double query_kdist) const {
    return opt_.reach == ReachMode::neighbor ? kdist_[neighbor] : query_kdist;
  }

  static void normalize(std::vector<double>& p) {
    double n = 0.0;
    for (double v : p) n += v * v;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& v : p) v /= n;
    }
  }

  LofOptions opt_;
  std::size_t k_ = 1;
  std::vector<std::vector<double>> points_;
  std::vector<double> dist_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<double> kdist_;
  std::vector<double> lrd_;
};

inline double lof_score(const LofModel& model, std::span<const double> p) { return model.score(p); }

// Outlier iff LOF exceeds the threshold (1.0 by default).
inline bool classify(const LofModel& model, std::span<const double> p, double threshold = 1.0) {
  return model.score(p) > threshold;
}

}  // namespace splitguard::sgad
