#pragma once

// Post-hoc score analysis over run directories: maximal evaluation scores,
// oracle-normalised scores, performance profiles and SVG learning curves.
//
// A run directory holds metrics.csv and config.cfg as written by Trainer::run,
// plus an optional one-line `label` file naming the variant (the config's
// `variant` value is used otherwise).
//
// The maximal evaluation score of a run is the largest per-row mean of its
// metrics file (max over evaluation points of the episode-mean return).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bdqn/config.hpp"
#include "bdqn/envs.hpp"
#include "bdqn/errors.hpp"
#include "bdqn/trainer.hpp"

namespace bdqn {

/// (raw - random_ref) / (optimal_ref - random_ref).
inline double normalized_score(double raw, double random_ref, double optimal_ref) {
  if (!std::isfinite(random_ref) || !std::isfinite(optimal_ref) || optimal_ref == random_ref) {
    throw ArgumentError("normalized_score: degenerate references");
  }
  return (raw - random_ref) / (optimal_ref - random_ref);
}

struct ProfilePoint {
  double tau = 0.0;
  double fraction = 0.0;
};

/// Fraction of scores strictly greater than each tau.
inline std::vector<ProfilePoint> performance_profile(std::vector<double> scores, const std::vector<double>& tau_grid) {
  if (scores.empty() || tau_grid.empty()) throw ArgumentError("performance_profile: empty input");
  for (std::size_t i = 1; i < tau_grid.size(); ++i) {
    if (!(tau_grid[i] > tau_grid[i - 1])) throw ArgumentError("performance_profile: tau grid must be strictly increasing");
  }
  std::sort(scores.begin(), scores.end());
  const double n = static_cast<double>(scores.size());
  std::vector<ProfilePoint> out;
  out.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    const auto above = scores.end() - std::upper_bound(scores.begin(), scores.end(), tau);
    out.push_back({tau, static_cast<double>(above) / n});
  }
  return out;
}

/// -0.5, -0.45, ..., 1.5.
inline std::vector<double> default_tau_grid() {
  std::vector<double> g;
  for (int i = -10; i <= 30; ++i) g.push_back(static_cast<double>(i) / 20.0);
  return g;
}

struct ParsedMetrics {
  std::size_t episodes = 0;
  RunMetrics metrics;
};

/// Reads a metrics.csv written by the trainer. Errors name the file and line.
inline ParsedMetrics read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open metrics file");
  auto fail = [&](int line, const std::string& what) { throw ParseError(path + ":" + std::to_string(line) + ": " + what); };

  std::string line;
  if (!std::getline(in, line)) fail(1, "missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 8 || header.front() != "frames") fail(1, "unexpected header");
  ParsedMetrics pm;
  pm.episodes = header.size() - 7;
  if (metrics_header(pm.episodes) != line) fail(1, "unexpected header");

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) fail(lineno, "expected " + std::to_string(header.size()) + " fields");
    auto num = [&](const std::string& s) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc{} || ptr != s.data() + s.size()) fail(lineno, "bad number '" + s + "'");
      return v;
    };
    EvalRow row;
    std::uint64_t frames = 0;
    const auto [ptr, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), frames);
    if (ec != std::errc{} || ptr != cells[0].data() + cells[0].size()) fail(lineno, "bad frame count");
    row.frames = frames;
    for (std::size_t e = 0; e < pm.episodes; ++e) row.returns.push_back(num(cells[1 + e]));
    const std::size_t base = 1 + pm.episodes;
    row.mean = num(cells[base]);
    row.std = num(cells[base + 1]);
    row.qmax = num(cells[base + 2]);
    row.scale = num(cells[base + 3]);
    row.disagreement = num(cells[base + 4]);
    row.wallclock_s = num(cells[base + 5]);
    if (!pm.metrics.rows.empty() && row.frames < pm.metrics.rows.back().frames) fail(lineno, "rows not ordered by frames");
    pm.metrics.rows.push_back(std::move(row));
  }
  return pm;
}

struct RunRecord {
  std::string dir;
  std::string env;
  std::string variant;
  std::uint64_t seed = 0;
  double random_ref = 0.0;
  double optimal_ref = 0.0;
  RunMetrics metrics;
};

inline RunRecord load_run(const std::string& dir) {
  namespace fs = std::filesystem;
  RunRecord rec;
  rec.dir = dir;
  const TrainConfig cfg = load_config((fs::path(dir) / "config.cfg").string());
  rec.seed = cfg.seed;
  rec.variant = std::string(to_string(cfg.variant));
  if (std::ifstream label(fs::path(dir) / "label"); label) {
    std::string l;
    if (std::getline(label, l) && !detail::trim(l).empty()) rec.variant = detail::trim(l);
  }
  const auto env = make_env(cfg.env);
  rec.env = env->spec().name;
  if (cfg.env.name == "nchain" || cfg.env.name == "deepsea") rec.env += std::to_string(cfg.env.n);
  if (cfg.env.name == "cliff") rec.env += std::to_string(cfg.env.width) + "x" + std::to_string(cfg.env.height);
  rec.random_ref = env->spec().random_return;
  rec.optimal_ref = env->spec().optimal_return;
  rec.metrics = read_metrics_csv((fs::path(dir) / "metrics.csv").string()).metrics;
  return rec;
}

struct ScoreRow {
  std::string env;
  std::string variant;
  std::uint64_t seed = 0;
  double max_score = 0.0;
  double final_mean = 0.0;
  double final_std = 0.0;
  double normalized = 0.0;
};

struct ScoreTable {
  std::vector<ScoreRow> rows;
};

inline ScoreRow score_run(const RunRecord& run) {
  if (run.metrics.rows.empty()) throw ParseError(run.dir + "/metrics.csv: no evaluation rows");
  ScoreRow row;
  row.env = run.env;
  row.variant = run.variant;
  row.seed = run.seed;
  row.max_score = run.metrics.rows.front().mean;
  for (const auto& r : run.metrics.rows) row.max_score = std::max(row.max_score, r.mean);
  row.final_mean = run.metrics.rows.back().mean;
  row.final_std = run.metrics.rows.back().std;
  row.normalized = normalized_score(row.max_score, run.random_ref, run.optimal_ref);
  return row;
}

inline std::string scores_csv(const ScoreTable& t) {
  using detail::format_double;
  std::string out = "env,variant,seed,max_score,final_mean,final_std,normalized\n";
  for (const auto& r : t.rows) {
    out += r.env + "," + r.variant + "," + std::to_string(r.seed) + "," + format_double(r.max_score) + "," +
           format_double(r.final_mean) + "," + format_double(r.final_std) + "," + format_double(r.normalized) + "\n";
  }
  return out;
}

/// One profile per variant over all of its (env, seed) runs.
inline std::string profile_csv(const ScoreTable& t, const std::vector<double>& tau_grid) {
  using detail::format_double;
  std::map<std::string, std::vector<double>> by_variant;
  for (const auto& r : t.rows) by_variant[r.variant].push_back(r.normalized);
  std::string out = "variant,tau,fraction\n";
  for (const auto& [variant, scores] : by_variant) {
    for (const auto& p : performance_profile(scores, tau_grid)) {
      out += variant + "," + format_double(p.tau) + "," + format_double(p.fraction) + "\n";
    }
  }
  return out;
}

namespace detail {

inline std::string svg_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", x);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Mean +- std evaluation curves for one environment; one line per variant,
/// averaged over seeds at each evaluation frame.
inline std::string curves_svg(const std::string& env, const std::vector<const RunRecord*>& runs) {
  using detail::svg_num;
  struct Curve {
    std::map<std::uint64_t, std::pair<double, double>> sum;  // frames -> (sum mean, sum std)
    std::map<std::uint64_t, int> count;
  };
  std::map<std::string, Curve> curves;
  double xmax = 1.0, ymin = 0.0, ymax = 1.0;
  for (const RunRecord* r : runs) {
    auto& c = curves[r->variant];
    for (const auto& row : r->metrics.rows) {
      c.sum[row.frames].first += row.mean;
      c.sum[row.frames].second += row.std;
      c.count[row.frames] += 1;
      xmax = std::max(xmax, static_cast<double>(row.frames));
      ymin = std::min(ymin, row.mean - row.std);
      ymax = std::max(ymax, row.mean + row.std);
    }
  }
  const double W = 640, H = 400, L = 60, R = 20, T = 30, B = 40;
  auto px = [&](double x) { return L + (W - L - R) * x / xmax; };
  auto py = [&](double y) { return H - B - (H - T - B) * (y - ymin) / (ymax - ymin); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
       detail::xml_escape(env) + "</text>\n";
  s += "<line x1=\"" + svg_num(L) + "\" y1=\"" + svg_num(H - B) + "\" x2=\"" + svg_num(W - R) + "\" y2=\"" + svg_num(H - B) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + svg_num(L) + "\" y1=\"" + svg_num(T) + "\" x2=\"" + svg_num(L) + "\" y2=\"" + svg_num(H - B) +
       "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + svg_num(W - R) + "\" y=\"" + svg_num(H - 10) + "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">frames (max " +
       std::to_string(static_cast<std::uint64_t>(xmax)) + ")</text>\n";
  s += "<text x=\"5\" y=\"" + svg_num(T) + "\" font-family=\"sans-serif\" font-size=\"11\">" + svg_num(ymax) + "</text>\n";
  s += "<text x=\"5\" y=\"" + svg_num(H - B) + "\" font-family=\"sans-serif\" font-size=\"11\">" + svg_num(ymin) + "</text>\n";

  std::size_t idx = 0;
  for (const auto& [variant, c] : curves) {
    const std::string color = palette[idx % 6];
    std::string upper, lower, line;
    for (const auto& [frames, sums] : c.sum) {
      const double n = c.count.at(frames);
      const double m = sums.first / n, sd = sums.second / n;
      const std::string x = svg_num(px(static_cast<double>(frames)));
      line += x + "," + svg_num(py(m)) + " ";
      upper += x + "," + svg_num(py(m + sd)) + " ";
      lower = x + "," + svg_num(py(m - sd)) + " " + lower;
    }
    s += "<polygon points=\"" + upper + lower + "\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    s += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    s += "<text x=\"" + svg_num(L + 10) + "\" y=\"" + svg_num(T + 15 + 15 * static_cast<double>(idx)) +
         "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" + color + "\">" + detail::xml_escape(variant) + "</text>\n";
    ++idx;
  }
  s += "</svg>\n";
  return s;
}

struct ReportOutput {
  ScoreTable table;
  std::vector<std::string> files;
};

/// Scores every run directory and writes scores.csv, profile.csv and
/// curves_<env>.svg into out_dir. Output depends only on the input files.
inline ReportOutput report(const std::vector<std::string>& run_dirs, const std::string& out_dir,
                           const std::vector<double>& tau_grid = default_tau_grid()) {
  namespace fs = std::filesystem;
  if (run_dirs.empty()) throw ArgumentError("report: no run directories");
  std::vector<RunRecord> runs;
  for (const auto& d : run_dirs) runs.push_back(load_run(d));
  std::stable_sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) {
    return std::tie(a.env, a.variant, a.seed, a.dir) < std::tie(b.env, b.variant, b.seed, b.dir);
  });

  ReportOutput out;
  for (const auto& r : runs) out.table.rows.push_back(score_run(r));

  fs::create_directories(out_dir);
  auto write = [&](const std::string& name, const std::string& body) {
    const auto path = (fs::path(out_dir) / name).string();
    std::ofstream(path, std::ios::trunc) << body;
    out.files.push_back(path);
  };
  write("scores.csv", scores_csv(out.table));
  write("profile.csv", profile_csv(out.table, tau_grid));
  std::map<std::string, std::vector<const RunRecord*>> by_env;
  for (const auto& r : runs) by_env[r.env].push_back(&r);
  for (const auto& [env, rs] : by_env) write("curves_" + env + ".svg", curves_svg(env, rs));
  return out;
}

}  // namespace bdqn
