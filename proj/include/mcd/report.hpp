// Copyright 2026 The mcd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Run outputs: trajectory CSV, metric summaries, SVG plots and the manifest.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcd/optimizer.hpp"

namespace mcd {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

/// Full-precision number formatting so CSV round trips are exact.
inline std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// One row per planner sample: joint states, recheck torques, task error on
/// all six axes and the tolerance bound on the high-priority axes.
inline std::string trajectory_csv(const Evaluation& ev, const PreparedScenario& ps) {
  std::ostringstream os;
  const int n = ev.model.dof();
  os << "t";
  for (const char* p : {"q", "qd", "qdd", "tau"})
    for (int j = 0; j < n; ++j) os << ',' << p << j;
  for (const char* a : kTaskAxisNames) os << ",err_" << a;
  for (const char* a : kTaskAxisNames) os << ",bound_" << a;
  os << '\n';
  for (std::size_t i = 0; i < ev.q.size(); ++i) {
    os << num(ev.t[i]);
    for (const auto* v : {&ev.q[i], &ev.qd[i], &ev.qdd[i], &ev.torque.profile.tau[i]})
      for (int j = 0; j < n; ++j) os << ',' << num((*v)[j]);
    const Vec6& e = ev.plan.error[i];
    for (int a = 0; a < 6; ++a) os << ',' << num(e[a]);
    const Vec6 b = ps.bounds.bounds(ev.t[i]);
    for (int a = 0; a < 6; ++a)
      os << ',' << (ps.sc.partition.high.contains(a) ? num(b[a]) : std::string("nan"));
    os << '\n';
  }
  return os.str();
}

/// Parsed trajectory CSV: column name to values.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return static_cast<int>(k);
    return -1;
  }
};

inline CsvTable parse_numeric_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("csv: empty");
  std::istringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');)
      row.push_back(cell == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cell));
    if (row.size() != t.header.size()) throw ConfigError("csv: ragged row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Metric table row for one design.
struct DesignSummary {
  std::string morphology;
  int main_dof = 0, assist_dof = 0;
  double F_eff = 0.0, M_man = 0.0;
  double max_torque = 0.0;  // max |tau| over joints and steps of the recheck
  int modules = 0;
  double E_total = 0.0;
  int delta = 0;
};

inline const char* kSummaryColumns =
    "morphology,main_dof,assist_dof,F_eff,M_man,max_torque,modules,E_total,delta";

inline DesignSummary summarize(const Evaluation& ev, const Catalog& cat) {
  DesignSummary s;
  s.morphology = morphology_label(ev.candidate, cat);
  if (ev.assembled) {
    s.main_dof = ev.model.main_dof();
    s.assist_dof = ev.model.assist_dof();
  }
  s.F_eff = ev.cost.F_eff;
  s.M_man = ev.cost.M_man;
  for (const auto& tau : ev.torque.profile.tau) s.max_torque = std::max(s.max_torque, tau.cwiseAbs().maxCoeff());
  s.modules = ev.cost.modules;
  s.E_total = ev.cost.E_total;
  s.delta = ev.cost.delta;
  return s;
}

inline std::string summary_csv(const DesignSummary& s) {
  std::ostringstream os;
  os << kSummaryColumns << '\n'
     << '"' << s.morphology << "\"," << s.main_dof << ',' << s.assist_dof << ',' << num(s.F_eff)
     << ',' << num(s.M_man) << ',' << num(s.max_torque) << ',' << s.modules << ','
     << num(s.E_total) << ',' << s.delta << '\n';
  return os.str();
}

inline std::string summary_table(const DesignSummary& s) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "morphology" << s.morphology << '\n'
     << std::setw(14) << "main DoF" << s.main_dof << '\n'
     << std::setw(14) << "assist DoF" << s.assist_dof << '\n'
     << std::setw(14) << "effort" << s.F_eff << '\n'
     << std::setw(14) << "manip." << s.M_man << '\n'
     << std::setw(14) << "max torque" << s.max_torque << '\n'
     << std::setw(14) << "modules" << s.modules << '\n'
     << std::setw(14) << "cost" << s.E_total << (s.delta ? " (accepted)" : " (rejected)") << '\n';
  return os.str();
}

/// Metrics re-run plans are compared against.
inline nlohmann::json plan_summary_json(const Evaluation& ev, const Catalog& cat) {
  const DesignSummary s = summarize(ev, cat);
  return {{"design", candidate_to_json(ev.candidate)},
          {"cost", cost_to_json(ev.cost)},
          {"main_dof", s.main_dof},
          {"assist_dof", s.assist_dof},
          {"max_torque", s.max_torque},
          {"assist_active", ev.assist_active},
          {"tracking_pass", ev.tracking.pass},
          {"self_collision_pass", ev.self_collision.pass},
          {"env_collision_pass", ev.env_collision.pass},
          {"torque_feasible", ev.torque.report.feasible}};
}

// ---------------------------------------------------------------------------
// SVG

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct Panel {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
};

namespace detail {

inline std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline void draw_panel(std::ostringstream& os, const Panel& p, double ox, double oy, double w,
                       double h) {
  const double l = 70, r = 20, t = 30, b = 45;
  const double pw = w - l - r, ph = h - t - b;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : p.series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto X = [&](double v) { return ox + l + (v - x0) / (x1 - x0) * pw; };
  auto Y = [&](double v) { return oy + t + (1.0 - (v - y0) / (y1 - y0)) * ph; };

  os << "<rect x='" << ox + l << "' y='" << oy + t << "' width='" << pw << "' height='" << ph
     << "' fill='none' stroke='#444'/>\n";
  os << "<text x='" << ox + l + pw / 2 << "' y='" << oy + 18
     << "' text-anchor='middle' font-size='14'>" << esc(p.title) << "</text>\n";
  os << "<text x='" << ox + l + pw / 2 << "' y='" << oy + h - 8
     << "' text-anchor='middle' font-size='12'>" << esc(p.xlabel) << "</text>\n";
  os << "<text transform='translate(" << ox + 16 << ',' << oy + t + ph / 2
     << ") rotate(-90)' text-anchor='middle' font-size='12'>" << esc(p.ylabel) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + k * (x1 - x0) / 4, yv = y0 + k * (y1 - y0) / 4;
    os << "<text x='" << X(xv) << "' y='" << oy + t + ph + 15
       << "' text-anchor='middle' font-size='10'>" << std::setprecision(3) << xv << "</text>\n";
    os << "<text x='" << ox + l - 4 << "' y='" << Y(yv) + 3
       << "' text-anchor='end' font-size='10'>" << std::setprecision(3) << yv << "</text>\n";
    os << "<line x1='" << ox + l << "' x2='" << ox + l + pw << "' y1='" << Y(yv) << "' y2='"
       << Y(yv) << "' stroke='#ddd'/>\n";
  }
  int legend = 0;
  for (const auto& s : p.series) {
    os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5'"
       << (s.dashed ? " stroke-dasharray='5,3'" : "") << " points='";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
        os << std::setprecision(6) << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
    os << "'/>\n";
    if (!s.label.empty()) {
      const double lx = ox + l + pw - 120, ly = oy + t + 14 + 14 * legend++;
      os << "<line x1='" << lx << "' x2='" << lx + 18 << "' y1='" << ly - 4 << "' y2='" << ly - 4
         << "' stroke='" << s.color << "'" << (s.dashed ? " stroke-dasharray='5,3'" : "")
         << "/>\n<text x='" << lx + 22 << "' y='" << ly << "' font-size='11'>" << esc(s.label)
         << "</text>\n";
    }
  }
}

}  // namespace detail

/// Panels stacked vertically in one SVG document.
inline std::string svg_panels(const std::vector<Panel>& panels, double width = 720,
                              double panel_height = 260) {
  std::ostringstream os;
  const double h = panel_height * std::max<std::size_t>(panels.size(), 1);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << h
     << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n";
  for (std::size_t k = 0; k < panels.size(); ++k)
    detail::draw_panel(os, panels[k], 0, k * panel_height, width, panel_height);
  os << "</svg>\n";
  return os.str();
}

/// Best cost per generation and best so far. Costs span penalties of 1e3 and
/// more down to negative accepted values, so the axis is sign(c) log10(1+|c|).
inline std::string convergence_svg(const RunResult& r) {
  auto slog = [](double c) { return std::copysign(std::log10(1.0 + std::abs(c)), c); };
  Series best{"generation best", {}, {}, "#1f77b4"};
  Series so_far{"best so far", {}, {}, "#d62728", true};
  for (const auto& g : r.log) {
    best.x.push_back(g.generation);
    best.y.push_back(slog(g.best));
    so_far.x.push_back(g.generation);
    so_far.y.push_back(slog(g.best_so_far));
  }
  return svg_panels({{r.algo + " convergence", "generation", "sign(E) log10(1+|E|)",
                      {best, so_far}}});
}

/// One panel per high-priority axis: signed tracking error inside the
/// symmetric tolerance envelope. Millimetres and milliradians.
inline std::string tracking_svg(const Evaluation& ev, const PreparedScenario& ps) {
  std::vector<Panel> panels;
  for (int a = 0; a < 6; ++a) {
    if (!ps.sc.partition.high.contains(a)) continue;
    const bool pos = a < 3;
    Series e{"error", {}, {}, "#1f77b4"}, up{"bound", {}, {}, "#d62728", true},
        dn{"", {}, {}, "#d62728", true};
    for (std::size_t i = 0; i < ev.plan.error.size(); ++i) {
      const double t = ev.plan.t[i], b = ps.bounds.bounds(t)[a] * 1e3;
      e.x.push_back(t);
      e.y.push_back(ev.plan.error[i][a] * 1e3);
      up.x.push_back(t);
      up.y.push_back(b);
      dn.x.push_back(t);
      dn.y.push_back(-b);
    }
    panels.push_back({std::string("tracking error ") + kTaskAxisNames[a], "time [s]",
                      pos ? "error [mm]" : "error [mrad]", {e, up, dn}});
  }
  return svg_panels(panels);
}

}  // namespace mcd
