// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tolebi/core/errors.hpp"
#include "tolebi/eval/harness.hpp"

namespace tolebi::eval {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kReportHeader =
    "scenario,fault_type,joint,episodes,success_rate,mean_survival,lin_rmse,lin_mbe,ang_rmse,ang_mbe";

inline void write_report_csv(const std::filesystem::path& path, const std::vector<ScenarioResult>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write report: " + path.string());
  os << kReportHeader << '\n';
  for (const auto& r : rows)
    os << r.name << ',' << r.fault_type << ',' << r.joint << ',' << r.episodes << ',' << num(r.success_rate) << ','
       << num(r.mean_survival) << ',' << num(r.lin_rmse) << ',' << num(r.lin_mbe) << ',' << num(r.ang_rmse) << ','
       << num(r.ang_mbe) << '\n';
  if (!os) throw IoError("short write on report: " + path.string());
}

inline std::vector<ScenarioResult> read_report_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read report: " + path.string());
  std::string line;
  std::getline(is, line);
  if (line != kReportHeader) throw IoError("unexpected report header in " + path.string());
  std::vector<ScenarioResult> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10) throw IoError("malformed report row in " + path.string() + ": " + line);
    ScenarioResult r;
    r.name = f[0];
    r.fault_type = f[1];
    r.joint = f[2];
    r.episodes = std::stoi(f[3]);
    double* dst[] = {&r.success_rate, &r.mean_survival, &r.lin_rmse, &r.lin_mbe, &r.ang_rmse, &r.ang_mbe};
    for (int k = 0; k < 6; ++k) *dst[k] = std::strtod(f[4 + k].c_str(), nullptr);
    rows.push_back(r);
  }
  return rows;
}

inline nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline void write_traces_jsonl(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write traces: " + path.string());
  for (const auto& [label, steps] : report.traces)
    for (const auto& s : steps) {
      nlohmann::json j{{"episode", label},
                       {"t", s.t},
                       {"vx", s.vx},
                       {"vx_cmd", s.vx_cmd},
                       {"pitch_rate", s.pitch_rate},
                       {"fz_left", s.fz_left},
                       {"fz_right", s.fz_right},
                       {"fz_ref_left", s.fz_ref_left},
                       {"fz_ref_right", s.fz_ref_right},
                       {"phase_modulation", s.modulation},
                       {"fault_active", s.fault_active},
                       {"status_probability", vec_json(s.probability)},
                       {"status", vec_json(s.status)},
                       {"label", vec_json(s.label)}};
      os << j.dump() << '\n';
    }
}

struct Series {
  std::string name;
  std::string color;
  std::vector<double> x, y;
};

/// Minimal line chart.
inline void write_svg(const std::filesystem::path& path, const std::string& title, const std::string& y_label,
                      const std::vector<Series>& series) {
  const double W = 640, H = 320, L = 60, R = 20, T = 30, B = 40;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  std::ofstream os(path);
  if (!os) throw IoError("cannot write plot: " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << L << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << title << "</text>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" font-family=\"sans-serif\" font-size=\"11\">t [s]</text>\n"
     << "<text x=\"4\" y=\"" << T - 6 << "\" font-family=\"sans-serif\" font-size=\"11\">" << y_label << "</text>\n"
     << "<text x=\"4\" y=\"" << py(y1) + 4 << "\" font-family=\"sans-serif\" font-size=\"10\">" << num(y1).substr(0, 7)
     << "</text>\n"
     << "<text x=\"4\" y=\"" << py(y0) << "\" font-family=\"sans-serif\" font-size=\"10\">" << num(y0).substr(0, 7)
     << "</text>\n";
  int k = 0;
  for (const auto& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    os << "\"/>\n<text x=\"" << W - R - 140 << "\" y=\"" << T + 14 * (k + 1) << "\" fill=\"" << s.color
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.name << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
}

/// Velocity and vertical-force plots for every traced episode.
inline void write_trace_plots(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  for (const auto& [label, steps] : report.traces) {
    Series vx{"vx", "#1f77b4", {}, {}}, cmd{"vx_cmd", "#7f7f7f", {}, {}};
    Series fl{"fz_left", "#d62728", {}, {}}, fr{"fz_right", "#2ca02c", {}, {}};
    Series rl{"fz_ref_left", "#ff9896", {}, {}}, rr{"fz_ref_right", "#98df8a", {}, {}};
    for (const auto& s : steps) {
      for (Series* p : {&vx, &cmd, &fl, &fr, &rl, &rr}) p->x.push_back(s.t);
      vx.y.push_back(s.vx);
      cmd.y.push_back(s.vx_cmd);
      fl.y.push_back(s.fz_left);
      fr.y.push_back(s.fz_right);
      rl.y.push_back(s.fz_ref_left);
      rr.y.push_back(s.fz_ref_right);
    }
    std::string stem = label;
    std::replace(stem.begin(), stem.end(), '/', '_');
    write_svg(dir / (stem + "_velocity.svg"), label + " base velocity", "m/s", {cmd, vx});
    write_svg(dir / (stem + "_fz.svg"), label + " vertical foot force", "N", {rl, rr, fl, fr});
  }
}

/// Planar joints stand in for these rows of the spatial joint table.
inline nlohmann::json joint_row_mapping() {
  return {{"hip_pitch", {"hip_yaw", "hip_roll", "hip_pitch"}},
          {"knee_pitch", {"knee_pitch"}},
          {"ankle_pitch", {"ankle_pitch", "ankle_roll"}}};
}

inline void write_metadata(const std::filesystem::path& path, const nlohmann::json& extra) {
  nlohmann::json j = extra;
  j["joint_row_mapping"] = joint_row_mapping();
  j["columns"] = kReportHeader;
  j["error_convention"] = "actual minus commanded";
  std::ofstream os(path);
  if (!os) throw IoError("cannot write metadata: " + path.string());
  os << j.dump(2) << '\n';
}

/// Per-fault-type and overall fault averages (rows with no episodes skipped).
inline std::vector<ScenarioResult> summary_rows(const EvalReport& report) {
  std::vector<ScenarioResult> rows;
  for (const char* type : {"joint_locking", "power_loss", ""}) {
    const ScenarioResult avg = fault_average(report, type);
    if (avg.episodes > 0) rows.push_back(avg);
  }
  return rows;
}

/// report.csv (one row per scenario), summary.csv (fault averages),
/// traces.jsonl, plots/*.svg and metadata.json under dir.
inline void emit_report(const std::filesystem::path& dir, const EvalReport& report, const nlohmann::json& meta) {
  std::filesystem::create_directories(dir);
  write_report_csv(dir / "report.csv", report.rows);
  write_report_csv(dir / "summary.csv", summary_rows(report));
  write_traces_jsonl(dir / "traces.jsonl", report);
  write_trace_plots(dir / "plots", report);
  write_metadata(dir / "metadata.json", meta);
}

}  // namespace tolebi::eval
