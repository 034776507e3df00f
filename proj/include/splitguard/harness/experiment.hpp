#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "splitguard/harness/report.hpp"
#include "splitguard/harness/trial.hpp"

namespace splitguard::harness {

// Honest trials use seeds base..base+trials-1, attack trials the next
// `trials` seeds. Row order is fixed by trial id regardless of threading.
inline std::vector<RunResult> run_trials(const ExperimentContext& ctx, const TrialOptions& opt = {}) {
  const auto& cfg = ctx.config;
  const std::size_t total = 2 * cfg.trials;
  std::vector<RunResult> out(total);
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, total);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  const auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      try {
        const Truth truth = i < cfg.trials ? Truth::honest : Truth::attack;
        RunResult r = run_trial(ctx, truth, cfg.base_seed + i, opt);
        r.trial = i;
        out[i] = std::move(r);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = total;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

inline AggregateReport run_experiment(const ExperimentContext& ctx, TrialOptions opt = {}) {
  opt.measure_overhead = opt.measure_overhead || ctx.config.measure_overhead;
  const auto results = run_trials(ctx, opt);
  return aggregate(results);
}

inline AggregateReport run_experiment(const ExperimentConfig& cfg, TrialOptions opt = {}) {
  return run_experiment(prepare_experiment(cfg), std::move(opt));
}

}  // namespace splitguard::harness
