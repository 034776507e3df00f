#pragma once

// Command-line front end.
//   run          honest + attack trials, aggregate report (CSV or JSON)
//   trace        one session, per-batch SG-LC and LOF scores
//   attack-demo  one unhindered FSHA session, reconstruction error over time
//   selftest     invariant checks
// Exit codes: 0 ok, 1 usage or configuration error, 2 numeric abort or failed
// self-check, 3 IO error.

#include <cstddef>
#include <cstdint>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "splitguard/error.hpp"
#include "splitguard/harness/config.hpp"
#include "splitguard/harness/experiment.hpp"
#include "splitguard/harness/report.hpp"
#include "splitguard/harness/selftest.hpp"
#include "splitguard/harness/trial.hpp"

namespace splitguard::harness {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumeric = 2, kExitIo = 3 };

namespace cli_detail {

struct CommonArgs {
  std::string config;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string detector;
  std::string policy;
  std::string out;
};

inline void add_common(CLI::App& app, CommonArgs& a) {
  app.add_option("--config", a.config, "key=value config file");
  app.add_option("--set", a.set, "extra key=value setting (repeatable)");
  app.add_option("--seed", a.seed, "base seed");
  app.add_option("--trials", a.trials, "trials per truth");
  app.add_option("--detector", a.detector, "detector")
      ->check(CLI::IsMember({"sg-lc", "sg-ad", "both"}));
  app.add_option("--policy", a.policy, "SG-LC decision policy")
      ->check(CLI::IsMember({"fast", "avg-k", "voting"}));
  app.add_option("--out", a.out, "output path (.json selects JSON); stdout if omitted");
}

inline ExperimentConfig resolve(const CommonArgs& a) {
  ExperimentConfig cfg = a.config.empty() ? ExperimentConfig{} : load_config(a.config);
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) cfg.base_seed = *a.seed;
  if (a.trials) cfg.trials = *a.trials;
  if (!a.detector.empty()) cfg.detector = parse_detector(a.detector);
  if (!a.policy.empty()) cfg.policy.kind = sglc::parse_policy(a.policy);
  cfg.validate();
  return cfg;
}

inline void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    detail::write_file(path, text);
  }
}

inline bool ends_with_json(const std::string& p) { return p.size() >= 5 && p.ends_with(".json"); }

inline std::string cell(const std::optional<double>& v) { return v ? detail::fmt(*v) : std::string(); }

inline int cmd_run(const CommonArgs& a, std::ostream& out) {
  const ExperimentConfig cfg = resolve(a);
  const AggregateReport rep = run_experiment(cfg);
  if (!a.out.empty()) {
    emit_report(rep, ends_with_json(a.out) ? ReportFormat::json : ReportFormat::csv, a.out);
  } else if (cfg.output_csv.empty() && cfg.output_json.empty()) {
    out << to_csv(rep);
  }
  if (!cfg.output_csv.empty()) emit_report(rep, ReportFormat::csv, cfg.output_csv);
  if (!cfg.output_json.empty()) emit_report(rep, ReportFormat::json, cfg.output_json);
  return rep.aborted ? kExitNumeric : kExitOk;
}

inline int cmd_trace(const CommonArgs& a, const std::string& truth_name, bool stop_on_detect,
                     std::ostream& out) {
  const ExperimentConfig cfg = resolve(a);
  const Truth truth = parse_truth(truth_name);
  const ExperimentContext ctx = prepare_experiment(cfg);
  TrialSetup t = build_trial(ctx, truth, cfg.base_seed, cfg.detector);
  const auto dets = t.detectors();

  struct Row {
    std::optional<double> s, sg, lof;
  };
  std::vector<Row> rows;
  std::size_t seen_scores = 0;
  auto scfg = session_config(ctx, cfg.base_seed);
  scfg.stop_on_attack = stop_on_detect;
  scfg.on_batch_end = [&](std::size_t i, const protocol::SessionState&) {
    Row r;
    if (t.sg_lc && t.sg_lc->scores().size() > seen_scores) {
      seen_scores = t.sg_lc->scores().size();
      const auto& p = t.sg_lc->scores().back();
      if (p.batch_index == i) r.s = p.s_value, r.sg = p.sg_value;
    }
    if (t.sg_ad) r.lof = t.sg_ad->last_score();
    rows.push_back(r);
  };
  const auto res = protocol::run_session(t.state, ctx.splits.train, dets, scfg);

  std::string text = "batch_index,is_fake,s_value,sg_value,lof_score\n";
  for (std::size_t i = 0; i < res.transcript.records.size(); ++i) {
    const auto& rec = res.transcript.records[i];
    const Row& r = rows[i];
    text += std::to_string(rec.batch_index) + ',' + (rec.is_fake ? "1" : "0") + ',' + cell(r.s) +
            ',' + cell(r.sg) + ',' + (rec.is_fake ? std::string() : cell(r.lof)) + '\n';
  }
  write_text(a.out, text, out);
  return res.aborted ? kExitNumeric : kExitOk;
}

inline int cmd_attack_demo(const CommonArgs& a, std::size_t every, std::ostream& out) {
  if (every == 0) throw ConfigError("--every must be >= 1");
  ExperimentConfig cfg = resolve(a);
  const ExperimentContext ctx = prepare_experiment(cfg);
  TrialSetup t = build_trial(ctx, Truth::attack, cfg.base_seed, DetectorSelection::none);
  std::string text = "batch_index,t,reconstruction_mse,baseline_mse\n";
  const auto per_epoch = static_cast<double>(ctx.batches_per_epoch);
  auto scfg = session_config(ctx, cfg.base_seed);
  scfg.on_batch_end = [&](std::size_t i, const protocol::SessionState& st) {
    if ((i + 1) % every != 0 && i + 1 != ctx.max_batches) return;
    text += std::to_string(i) + ',' + detail::fmt(static_cast<double>(i + 1) / per_epoch) + ',' +
            detail::fmt(reconstruction_mse(ctx, st)) + ',' + detail::fmt(ctx.baseline_mse) + '\n';
  };
  const auto res = protocol::run_session(t.state, ctx.splits.train, {}, scfg);
  write_text(a.out, text, out);
  return res.aborted ? kExitNumeric : kExitOk;
}

inline int cmd_selftest(std::ostream& out) {
  bool all = true;
  for (const auto& r : run_selftest()) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << r.detail << ")\n";
    all = all && r.passed;
  }
  return all ? kExitOk : kExitNumeric;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Split-learning simulator with training-hijacking detectors", "splitguard"};
  app.require_subcommand(1);

  cli_detail::CommonArgs run_args, trace_args, demo_args;
  auto* run = app.add_subcommand("run", "honest and attack trials with an aggregate report");
  cli_detail::add_common(*run, run_args);

  auto* trace = app.add_subcommand("trace", "single session score trace");
  cli_detail::add_common(*trace, trace_args);
  std::string truth = "honest";
  bool stop_on_detect = false;
  trace->add_option("--truth", truth, "server behaviour")->check(CLI::IsMember({"honest", "attack"}));
  trace->add_flag("--stop-on-detect", stop_on_detect, "end the session at the first attack verdict");

  auto* demo = app.add_subcommand("attack-demo", "reconstruction error of an unhindered attack");
  cli_detail::add_common(*demo, demo_args);
  std::size_t every = 10;
  demo->add_option("--every", every, "sampling interval in batches");

  auto* self = app.add_subcommand("selftest", "invariant checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*run) return cli_detail::cmd_run(run_args, out);
    if (*trace) return cli_detail::cmd_trace(trace_args, truth, stop_on_detect, out);
    if (*demo) return cli_detail::cmd_attack_demo(demo_args, every, out);
    if (*self) return cli_detail::cmd_selftest(out);
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace splitguard::harness
