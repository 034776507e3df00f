#pragma once

// Invariant checks run by `splitguard selftest`. Each check is small enough to
// finish in well under a second.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/nn/loss.hpp"
#include "splitguard/nn/network.hpp"
#include "splitguard/protocol/exchange.hpp"
#include "splitguard/protocol/fsha.hpp"
#include "splitguard/sgad/lof.hpp"
#include "splitguard/sglc/score.hpp"

namespace splitguard::harness {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace selftest {

// Share of parameters whose backprop gradient agrees with a central difference
// to relative error 1e-4.
inline CheckResult gradients(std::size_t seeds = 20) {
  std::size_t ok = 0, total = 0;
  const std::vector<nn::Activation> acts = {nn::Activation::tanh, nn::Activation::sigmoid,
                                            nn::Activation::relu, nn::Activation::identity};
  for (std::size_t s = 0; s < seeds; ++s) {
    std::mt19937_64 rng(1000 + s);
    std::uniform_int_distribution<std::size_t> dim(1, 6), depth(1, 3);
    std::vector<std::size_t> dims{dim(rng)};
    const std::size_t layers = depth(rng);
    for (std::size_t l = 0; l < layers; ++l) dims.push_back(dim(rng));
    auto net = nn::make_mlp(std::span<const std::size_t>(dims), acts[s % acts.size()],
                            nn::Activation::identity, rng);
    std::normal_distribution<double> n01;
    nn::Matrix x(3, dims.front()), y(3, dims.back());
    for (double& v : x.data()) v = n01(rng);
    for (double& v : y.data()) v = n01(rng);
    const auto loss_at = [&](const nn::Network& m) { return nn::mse(nn::predict(m, x), y).loss; };
    const auto fwd = nn::forward(net, x);
    const auto grad = nn::backward(net, fwd.cache, nn::mse(fwd.output, y).grad).param_grad;
    auto params = net.parameters();
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params;
      p[i] += h;
      nn::Network up = net;
      up.set_parameters(p);
      p[i] -= 2 * h;
      nn::Network down = net;
      down.set_parameters(p);
      const double numeric = (loss_at(up) - loss_at(down)) / (2 * h);
      const double a = grad.values[i];
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-6});
      if (std::abs(a - numeric) / scale < 1e-4) ++ok;
      ++total;
    }
  }
  const double share = static_cast<double>(ok) / static_cast<double>(total);
  return {"gradient-fd", share >= 0.99, std::to_string(ok) + "/" + std::to_string(total)};
}

// LOF scores against a direct evaluation of the definitions.
inline CheckResult lof_reference(std::size_t datasets = 20) {
  double worst = 0.0;
  for (std::size_t s = 0; s < datasets; ++s) {
    std::mt19937_64 rng(2000 + s);
    std::uniform_int_distribution<std::size_t> size(4, 12), dim(1, 3);
    const std::size_t n = size(rng), d = dim(rng);
    std::normal_distribution<double> n01;
    std::vector<std::vector<double>> pts(n, std::vector<double>(d));
    for (auto& p : pts) for (double& v : p) v = n01(rng);
    std::vector<double> q(d);
    for (double& v : q) v = 2.0 * n01(rng);
    for (std::size_t k = 1; k < n; ++k) {
      const auto model = sgad::LofModel::fit(pts, {.k = k});
      const auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(acc);
      };
      // k-neighbourhood (with ties) of `p` among pts, skipping index `self`.
      const auto knn = [&](const std::vector<double>& p, std::size_t self) {
        std::vector<double> ds;
        for (std::size_t j = 0; j < n; ++j) if (j != self) ds.push_back(dist(p, pts[j]));
        std::sort(ds.begin(), ds.end());
        const double kd = ds[k - 1];
        std::vector<std::size_t> nb;
        for (std::size_t j = 0; j < n; ++j) if (j != self && dist(p, pts[j]) <= kd) nb.push_back(j);
        return std::pair{kd, nb};
      };
      std::vector<double> kd(n), lrd(n);
      for (std::size_t i = 0; i < n; ++i) kd[i] = knn(pts[i], i).first;
      const auto density = [&](const std::vector<double>& p, const std::vector<std::size_t>& nb) {
        double sum = 0.0;
        for (std::size_t o : nb) sum += std::max(dist(p, pts[o]), kd[o]);
        return sum == 0.0 ? sgad::kInfiniteDensity : static_cast<double>(nb.size()) / sum;
      };
      for (std::size_t i = 0; i < n; ++i) lrd[i] = density(pts[i], knn(pts[i], i).second);
      const auto nb = knn(q, n).second;
      const double own = density(q, nb);
      double acc = 0.0;
      for (std::size_t o : nb) acc += lrd[o];
      const double expect = acc / (static_cast<double>(nb.size()) * own);
      const double got = model.score(q);
      worst = std::max(worst, std::abs(got - expect) / std::max(1.0, std::abs(expect)));
    }
  }
  return {"lof-reference", worst < 1e-9, "max rel err " + std::to_string(worst)};
}

inline CheckResult score_bounds(std::size_t draws = 2000) {
  std::mt19937_64 rng(3000);
  std::normal_distribution<double> n01;
  std::exponential_distribution<double> scale(0.5);
  std::size_t bad = 0;
  for (std::size_t t = 0; t < draws; ++t) {
    sglc::GradSetSummary sets[3];
    for (auto& s : sets) {
      const double c = scale(rng);
      for (int g = 0; g < 3; ++g) {
        nn::GradVec v(4);
        for (double& x : v.values) x = c * n01(rng);
        sglc::update_summary(s, v);
      }
    }
    const auto s = sglc::s_value(sets[0], sets[1], sets[2], 1e-6);
    if (!s) continue;
    const double sg = sglc::sg_score(*s, 7.0, 1.0);
    if (*s < -std::numbers::pi || *s > std::numbers::pi || !(sg > 0.0 && sg < 1.0)) ++bad;
  }
  return {"score-bounds", bad == 0, std::to_string(bad) + " violations"};
}

namespace detail {

inline protocol::ServerModel small_attacker(std::uint64_t seed, protocol::ServerBehavior b) {
  std::mt19937_64 rng(seed);
  protocol::SplitSetup s{.input_dim = 6, .client_hidden = 8, .boundary_dim = 4,
                         .server_hidden = 8, .num_classes = 3};
  auto pub = std::make_shared<const data::Dataset>(data::synth_blobs(64, 6, 3, 1.0, seed));
  protocol::FshaConfig cfg;
  cfg.setup_epochs = 1;
  cfg.batch_size = 16;
  auto st = protocol::fsha_setup(protocol::make_fsha_state(s, pub, cfg, rng), rng);
  return protocol::make_server(s, b, {}, std::move(st), rng);
}

inline nn::Matrix random_boundary(std::mt19937_64& rng, std::size_t rows) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::Matrix m(rows, 4);
  for (double& v : m.data()) v = u(rng);
  return m;
}

}  // namespace detail

// FSHA boundary gradients do not depend on the labels sent with the batch.
inline CheckResult label_independence(std::size_t states = 10) {
  std::size_t bad = 0;
  for (std::size_t t = 0; t < states; ++t) {
    auto server = detail::small_attacker(4000 + t, {protocol::BehaviorKind::fsha, 1.0});
    std::mt19937_64 rng(5000 + t);
    const auto out = detail::random_boundary(rng, 8);
    data::Labels y(8);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 3);
    data::Labels perm = y;
    std::shuffle(perm.begin(), perm.end(), rng);
    auto a = server, b = server;
    const auto ga = protocol::server_step(a, out, std::span<const int>(y)).boundary_grad;
    const auto gb = protocol::server_step(b, out, std::span<const int>(perm)).boundary_grad;
    if (ga.data() != gb.data()) ++bad;
  }
  return {"fsha-label-independence", bad == 0, std::to_string(bad) + " mismatches"};
}

// Multitask gradient is the convex blend of its endpoints.
inline CheckResult blend_linearity() {
  double worst = 0.0;
  for (double w : {0.0, 0.25, 0.5, 1.0}) {
    auto base = detail::small_attacker(6000, {protocol::BehaviorKind::multitask, w});
    std::mt19937_64 rng(6001);
    const auto out = detail::random_boundary(rng, 8);
    const data::Labels y = {0, 1, 2, 0, 1, 2, 0, 1};
    const auto at = [&](double weight) {
      auto s = base;
      s.behavior.attack_weight = weight;
      return protocol::server_step(s, out, std::span<const int>(y)).boundary_grad;
    };
    const auto g = at(w), g0 = at(0.0), g1 = at(1.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double blend = w * g1.data()[i] + (1.0 - w) * g0.data()[i];
      worst = std::max(worst, std::abs(g.data()[i] - blend));
    }
  }
  return {"multitask-blend", worst <= 1e-9, "max abs err " + std::to_string(worst)};
}

}  // namespace selftest

inline std::vector<CheckResult> run_selftest() {
  return {selftest::gradients(), selftest::lof_reference(), selftest::score_bounds(),
          selftest::label_independence(), selftest::blend_linearity()};
}

}  // namespace splitguard::harness
