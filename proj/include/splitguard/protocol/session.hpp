#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitguard/data/dataset.hpp"
#include "splitguard/error.hpp"
#include "splitguard/nn/loss.hpp"
#include "splitguard/protocol/detector.hpp"
#include "splitguard/protocol/exchange.hpp"
#include "splitguard/protocol/models.hpp"

namespace splitguard::protocol {

struct SessionState {
  SplitSetup setup;
  ClientModel client;
  ServerModel server;
};

struct SessionConfig {
  std::size_t batch_size = 32;
  std::uint64_t order_seed = 0;  // epoch e shuffles with order_seed + e
  std::optional<std::size_t> max_batches;  // one epoch when unset
  bool stop_on_attack = true;
  bool record_gradients = true;
  std::function<void(std::size_t batch_index, const SessionState&)> on_batch_end;
};

struct BatchRecord {
  std::size_t batch_index = 0;
  bool is_fake = false;
  nn::GradVec client_grad;  // empty unless SessionConfig::record_gradients
  double loss = 0.0;
  double wall_ms = 0.0;
  double detector_ms = 0.0;
  Verdict verdict = Verdict::undecided;
};

struct SessionTranscript {
  std::vector<BatchRecord> records;
};

struct SessionResult {
  SessionTranscript transcript;
  Verdict verdict = Verdict::undecided;
  std::optional<std::size_t> detection_batch;
  std::optional<double> detection_t;  // (detection_batch + 1) / batches per epoch
  std::size_t batches_per_epoch = 0;
  std::size_t batches_run = 0;
  double wall_total_ms = 0.0;
  double wall_detector_ms = 0.0;
  bool aborted = false;
  std::string abort_reason;
};

namespace detail {
using Clock = std::chrono::steady_clock;
inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}
}  // namespace detail

// Runs the client/server exchange over `train`, routing every client gradient
// to the detectors. Stops at the first attack verdict (unless observe-only)
// or after max_batches. Numeric failures end the session as aborted.
inline SessionResult run_session(SessionState& state, const data::Dataset& train,
                                 std::span<Detector* const> detectors, const SessionConfig& cfg) {
  if (train.dim() != state.setup.input_dim) {
    throw ConfigError("run_session: data dim does not match client input dim");
  }
  if (cfg.batch_size == 0 || train.size() < cfg.batch_size) {
    throw ConfigError("run_session: training set smaller than one batch");
  }
  SessionResult res;
  res.batches_per_epoch = train.size() / cfg.batch_size;
  const auto session_start = detail::Clock::now();
  bool decided = false;
  const bool private_label = state.setup.variant == SetupVariant::private_label;

  data::BatchPlan plan;
  std::size_t plan_epoch = std::numeric_limits<std::size_t>::max();
  const std::size_t limit = cfg.max_batches.value_or(res.batches_per_epoch);
  try {
    for (std::size_t i = 0; i < limit; ++i) {
      const auto batch_start = detail::Clock::now();
      const std::size_t epoch = i / res.batches_per_epoch;
      if (epoch != plan_epoch) {
        plan = data::BatchPlan::make(train.size(), cfg.batch_size, cfg.order_seed + epoch);
        plan_epoch = epoch;
      }
      const auto idx = plan.batch(i % res.batches_per_epoch);
      const nn::Matrix x = nn::select_rows(train.examples, idx);
      data::Labels labels;
      labels.reserve(idx.size());
      for (std::size_t j : idx) labels.push_back(train.labels[j]);

      double det_ms = 0.0;
      auto t_det = detail::Clock::now();
      std::optional<data::Labels> fake;
      for (Detector* d : detectors) {
        if (auto l = d->plan_batch(i, labels, train.num_classes); l && !fake) fake = std::move(l);
      }
      det_ms += detail::ms_since(t_det);
      const bool is_fake = fake.has_value();
      const bool apply = !is_fake;
      const data::Labels& sent = is_fake ? *fake : labels;

      auto front = nn::forward(state.client.front, x);
      ServerStepResult reply;
      if (private_label) {
        HeadCallback head = [&](const nn::Matrix& server_out) {
          auto hf = nn::forward(*state.client.head, server_out);
          auto l = nn::cross_entropy(hf.output, sent);
          auto hb = nn::backward(*state.client.head, hf.cache, l.grad);
          if (apply) state.client.head_opt.step(*state.client.head, hb.param_grad);
          return HeadResult{std::move(hb.input_grad), l.loss};
        };
        reply = server_step(state.server, front.output, std::nullopt, &head);
      } else {
        reply = server_step(state.server, front.output, std::span<const int>(sent));
      }
      nn::GradVec grad = client_step(state.client, front, reply.boundary_grad, apply);

      t_det = detail::Clock::now();
      Verdict v = Verdict::undecided;
      for (Detector* d : detectors) {
        const Verdict dv = d->observe(i, is_fake, grad);
        if (dv != Verdict::undecided) decided = true;
        if (dv == Verdict::attack) v = Verdict::attack;
        else if (dv == Verdict::no_attack && v == Verdict::undecided) v = Verdict::no_attack;
      }
      det_ms += detail::ms_since(t_det);

      BatchRecord rec;
      rec.batch_index = i;
      rec.is_fake = is_fake;
      if (cfg.record_gradients) rec.client_grad = std::move(grad);
      rec.loss = reply.loss;
      rec.detector_ms = det_ms;
      rec.verdict = v;
      rec.wall_ms = detail::ms_since(batch_start);
      res.wall_detector_ms += det_ms;
      res.transcript.records.push_back(std::move(rec));
      res.batches_run = i + 1;

      if (cfg.on_batch_end) cfg.on_batch_end(i, state);

      if (v == Verdict::attack && !res.detection_batch) {
        res.detection_batch = i;
        res.detection_t =
            static_cast<double>(i + 1) / static_cast<double>(res.batches_per_epoch);
        if (cfg.stop_on_attack) break;
      }
    }
  } catch (const NumericError& e) {
    res.aborted = true;
    res.abort_reason = e.what();
  }

  if (res.detection_batch) {
    res.verdict = Verdict::attack;
  } else if (res.aborted || res.batches_run == 0) {
    res.verdict = Verdict::undecided;
  } else if (detectors.empty() || decided) {
    res.verdict = Verdict::no_attack;
  } else {
    res.verdict = Verdict::undecided;
  }
  res.wall_total_ms = detail::ms_since(session_start);
  return res;
}

}  // namespace splitguard::protocol
