#pragma once

// Aggregate statistics over a batch of trials and their CSV / JSON encodings.
//
// CSV layout:
//   # aggregate tpr=<r> fpr=<r> mean_t=<r|> mean_overhead_share=<r|> honest=<n> attack=<n> aborted=<n>
//   trial,truth,verdict,detection_t,wall_detector_ms,wall_total_ms,reconstruction_mse
//   <one row per trial>
// Absent values are empty cells. A report without rows is written as the
// column header alone.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "splitguard/error.hpp"
#include "splitguard/harness/trial.hpp"
#include "splitguard/protocol/detector.hpp"

namespace splitguard::harness {

inline constexpr std::string_view kCsvHeader =
    "trial,truth,verdict,detection_t,wall_detector_ms,wall_total_ms,reconstruction_mse";

struct ReportRow {
  std::size_t trial = 0;
  Truth truth = Truth::honest;
  protocol::Verdict verdict = protocol::Verdict::undecided;
  std::optional<double> detection_t;
  double wall_detector_ms = 0.0;
  double wall_total_ms = 0.0;
  std::optional<double> reconstruction_mse;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct AggregateReport {
  double tpr = 0.0;
  double fpr = 0.0;
  std::optional<double> mean_t;               // over attack trials that were detected
  std::optional<double> mean_overhead_share;  // over trials with a paired baseline
  std::size_t honest_trials = 0;
  std::size_t attack_trials = 0;
  std::size_t aborted = 0;
  std::vector<ReportRow> rows;

  friend bool operator==(const AggregateReport&, const AggregateReport&) = default;
};

inline ReportRow to_row(const RunResult& r) {
  return {r.trial, r.truth, r.verdict, r.detection_t, r.wall_detector_ms, r.wall_total_ms,
          r.reconstruction_mse};
}

inline AggregateReport aggregate(std::span<const RunResult> results) {
  AggregateReport rep;
  std::size_t tp = 0, fp = 0, n_t = 0, n_over = 0;
  double sum_t = 0.0, sum_over = 0.0;
  for (const auto& r : results) {
    const bool fired = r.verdict == protocol::Verdict::attack;
    if (r.truth == Truth::attack) {
      ++rep.attack_trials;
      if (fired) {
        ++tp;
        if (r.detection_t) sum_t += *r.detection_t, ++n_t;
      }
    } else {
      ++rep.honest_trials;
      if (fired) ++fp;
    }
    if (r.aborted) ++rep.aborted;
    if (r.wall_baseline_ms && *r.wall_baseline_ms > 0.0) {
      sum_over += (r.wall_total_ms - *r.wall_baseline_ms) / *r.wall_baseline_ms;
      ++n_over;
    }
    rep.rows.push_back(to_row(r));
  }
  if (rep.attack_trials) rep.tpr = static_cast<double>(tp) / static_cast<double>(rep.attack_trials);
  if (rep.honest_trials) rep.fpr = static_cast<double>(fp) / static_cast<double>(rep.honest_trials);
  if (n_t) rep.mean_t = sum_t / static_cast<double>(n_t);
  if (n_over) rep.mean_overhead_share = sum_over / static_cast<double>(n_over);
  return rep;
}

namespace detail {

// Shortest text that parses back to the same double.
inline std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("report: bad number '" + std::string(s) + "' for " + std::string(what));
  }
  return v;
}

inline std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("report: bad count '" + std::string(s) + "' for " + std::string(what));
  }
  return v;
}

inline std::optional<double> parse_opt(std::string_view s, std::string_view what) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, what);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

inline std::string to_csv(const AggregateReport& rep) {
  using detail::fmt;
  std::string out;
  if (!rep.rows.empty()) {
    out += "# aggregate tpr=" + fmt(rep.tpr) + " fpr=" + fmt(rep.fpr) + " mean_t=" + fmt(rep.mean_t) +
           " mean_overhead_share=" + fmt(rep.mean_overhead_share) +
           " honest=" + std::to_string(rep.honest_trials) +
           " attack=" + std::to_string(rep.attack_trials) + " aborted=" + std::to_string(rep.aborted) +
           "\n";
  }
  out += kCsvHeader;
  out += '\n';
  for (const auto& r : rep.rows) {
    out += std::to_string(r.trial) + ',' + std::string(to_string(r.truth)) + ',' +
           std::string(protocol::to_string(r.verdict)) + ',' + fmt(r.detection_t) + ',' +
           fmt(r.wall_detector_ms) + ',' + fmt(r.wall_total_ms) + ',' + fmt(r.reconstruction_mse) +
           '\n';
  }
  return out;
}

inline AggregateReport parse_csv(std::string_view text) {
  AggregateReport rep;
  bool header_seen = false;
  for (auto line : detail::split(text, '\n')) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with("# aggregate")) {
      std::map<std::string_view, std::string_view> kv;
      for (auto tok : detail::split(line.substr(11), ' ')) {
        if (tok.empty()) continue;
        const auto eq = tok.find('=');
        if (eq == std::string_view::npos) throw IoError("report: bad aggregate token");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      const auto get = [&](std::string_view k) {
        const auto it = kv.find(k);
        if (it == kv.end()) throw IoError("report: aggregate line lacks " + std::string(k));
        return it->second;
      };
      rep.tpr = detail::parse_double(get("tpr"), "tpr");
      rep.fpr = detail::parse_double(get("fpr"), "fpr");
      rep.mean_t = detail::parse_opt(get("mean_t"), "mean_t");
      rep.mean_overhead_share = detail::parse_opt(get("mean_overhead_share"), "mean_overhead_share");
      rep.honest_trials = detail::parse_count(get("honest"), "honest");
      rep.attack_trials = detail::parse_count(get("attack"), "attack");
      rep.aborted = detail::parse_count(get("aborted"), "aborted");
      continue;
    }
    if (line.front() == '#') continue;
    if (!header_seen) {
      if (line != kCsvHeader) throw IoError("report: unexpected CSV header");
      header_seen = true;
      continue;
    }
    const auto cells = detail::split(line, ',');
    if (cells.size() != 7) throw IoError("report: expected 7 cells per row");
    ReportRow r;
    r.trial = detail::parse_count(cells[0], "trial");
    try {
      r.truth = parse_truth(cells[1]);
      r.verdict = protocol::parse_verdict(cells[2]);
    } catch (const ConfigError& e) {
      throw IoError(std::string("report: ") + e.what());
    }
    r.detection_t = detail::parse_opt(cells[3], "detection_t");
    r.wall_detector_ms = detail::parse_double(cells[4], "wall_detector_ms");
    r.wall_total_ms = detail::parse_double(cells[5], "wall_total_ms");
    r.reconstruction_mse = detail::parse_opt(cells[6], "reconstruction_mse");
    rep.rows.push_back(r);
  }
  if (!header_seen) throw IoError("report: missing CSV header");
  return rep;
}

inline nlohmann::json to_json(const AggregateReport& rep) {
  using nlohmann::json;
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json rows = json::array();
  for (const auto& r : rep.rows) {
    rows.push_back({{"trial", r.trial},
                    {"truth", to_string(r.truth)},
                    {"verdict", protocol::to_string(r.verdict)},
                    {"detection_t", opt(r.detection_t)},
                    {"wall_detector_ms", r.wall_detector_ms},
                    {"wall_total_ms", r.wall_total_ms},
                    {"reconstruction_mse", opt(r.reconstruction_mse)}});
  }
  return {{"aggregate",
           {{"tpr", rep.tpr},
            {"fpr", rep.fpr},
            {"mean_t", opt(rep.mean_t)},
            {"mean_overhead_share", opt(rep.mean_overhead_share)},
            {"honest", rep.honest_trials},
            {"attack", rep.attack_trials},
            {"aborted", rep.aborted}}},
          {"rows", rows}};
}

inline AggregateReport parse_json(std::string_view text) {
  AggregateReport rep;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto opt = [](const nlohmann::json& v) {
      return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
    };
    const auto& a = j.at("aggregate");
    rep.tpr = a.at("tpr").get<double>();
    rep.fpr = a.at("fpr").get<double>();
    rep.mean_t = opt(a.at("mean_t"));
    rep.mean_overhead_share = opt(a.at("mean_overhead_share"));
    rep.honest_trials = a.at("honest").get<std::size_t>();
    rep.attack_trials = a.at("attack").get<std::size_t>();
    rep.aborted = a.at("aborted").get<std::size_t>();
    for (const auto& r : j.at("rows")) {
      ReportRow row;
      row.trial = r.at("trial").get<std::size_t>();
      row.truth = parse_truth(r.at("truth").get<std::string>());
      row.verdict = protocol::parse_verdict(r.at("verdict").get<std::string>());
      row.detection_t = opt(r.at("detection_t"));
      row.wall_detector_ms = r.at("wall_detector_ms").get<double>();
      row.wall_total_ms = r.at("wall_total_ms").get<double>();
      row.reconstruction_mse = opt(r.at("reconstruction_mse"));
      rep.rows.push_back(row);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("report: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("report: ") + e.what());
  }
  return rep;
}

enum class ReportFormat { csv, json };

inline void emit_report(const AggregateReport& rep, ReportFormat fmt, const std::string& path) {
  detail::write_file(path, fmt == ReportFormat::csv ? to_csv(rep) : to_json(rep).dump(2) + "\n");
}

inline AggregateReport load_report(const std::string& path, ReportFormat fmt) {
  const auto text = detail::read_file(path);
  return fmt == ReportFormat::csv ? parse_csv(text) : parse_json(text);
}

}  // namespace splitguard::harness
