#pragma once

#include <cstdio>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "extremeforge/error.hpp"
#include "extremeforge/eval.hpp"

namespace extremeforge {

struct LabeledReport {
  std::string label;
  EvalReport report;
};

struct ReportDelta {
  std::string minuend;
  std::string subtrahend;
  double map50 = 0.0;
  double map5095 = 0.0;
};

struct RobustnessReport {
  std::vector<LabeledReport> reports;
  std::vector<ReportDelta> deltas;
};

// delta = minuend - subtrahend. A decline between a clean and an extreme
// test set is (clean, extreme); an improvement is (new model, baseline).
inline RobustnessReport robustness_report(std::vector<LabeledReport> reports,
                                          std::span<const std::pair<std::string, std::string>> pairs) {
  auto lookup = [&](const std::string& label) -> const EvalReport& {
    for (const auto& r : reports)
      if (r.label == label) return r.report;
    throw Error(ErrorCode::UnknownLabel, label);
  };
  RobustnessReport out;
  for (const auto& [minuend, subtrahend] : pairs) {
    const auto& a = lookup(minuend);
    const auto& b = lookup(subtrahend);
    out.deltas.push_back({minuend, subtrahend, a.map50 - b.map50, a.map5095 - b.map5095});
  }
  out.reports = std::move(reports);
  return out;
}

namespace detail {

inline std::string cell(double v, int width = 9) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%*.3f", width, v);
  return buf;
}

inline std::string cell(const std::optional<double>& v, int width = 9) {
  if (v) return cell(*v, width);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%*s", width, "-");
  return buf;
}

inline std::string text_cell(const std::string& s, int width) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*.*s", width, width, s.c_str());
  return buf;
}

}  // namespace detail

// Rows: test set x metric; columns: per-class AP then mAP.
inline std::string render_table(const RobustnessReport& rr) {
  std::string out = std::string("# ") + kProtocolNote + "\n";
  std::vector<std::string> classes;
  if (!rr.reports.empty()) {
    for (const auto& c : rr.reports.front().report.classes) classes.push_back(c.name);
  }
  out += detail::text_cell("Test set", 16) + detail::text_cell("Metric", 10);
  for (const auto& name : classes) out += " " + detail::text_cell(name, 8);
  out += " mAP\n";
  for (const auto& lr : rr.reports) {
    const auto& r = lr.report;
    auto row = [&](const char* metric, std::optional<double> ClassReport::*field, double map,
                   bool first) {
      out += detail::text_cell(first ? lr.label : "", 16) + detail::text_cell(metric, 10);
      for (std::size_t c = 0; c < classes.size(); ++c) {
        out += c < r.classes.size() ? detail::cell(r.classes[c].*field) : detail::cell(std::nullopt);
      }
      out += detail::cell(map) + "\n";
    };
    row("AP50", &ClassReport::ap50, r.map50, true);
    row("AP50:95", &ClassReport::ap5095, r.map5095, false);
  }
  if (!rr.deltas.empty()) {
    out += "\n" + detail::text_cell("Minuend", 16) + detail::text_cell("Subtrahend", 16) +
           "  dmAP50 dmAP50:95\n";
    for (const auto& d : rr.deltas) {
      out += detail::text_cell(d.minuend, 16) + detail::text_cell(d.subtrahend, 16) +
             detail::cell(d.map50, 8) + detail::cell(d.map5095, 10) + "\n";
    }
  }
  return out;
}

inline nlohmann::json to_json(const RobustnessReport& rr) {
  nlohmann::json reports = nlohmann::json::object();
  for (const auto& lr : rr.reports) reports[lr.label] = to_json(lr.report);
  nlohmann::json deltas = nlohmann::json::array();
  for (const auto& d : rr.deltas) {
    deltas.push_back({{"minuend", d.minuend},
                      {"subtrahend", d.subtrahend},
                      {"map50", d.map50},
                      {"map5095", d.map5095}});
  }
  return {{"reports", std::move(reports)}, {"deltas", std::move(deltas)}};
}

}  // namespace extremeforge
