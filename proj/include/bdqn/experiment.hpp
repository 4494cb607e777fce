#pragma once

// A/B ablation harness: every variant of a matrix file is trained on every
// seed with the same master seed per seed index, so variants differ only in
// their config deltas.
//
// Matrix file format, one variant per line:
//
//     # comment
//     boot_dqn_np: variant=boot_dqn_np noise.sigma=0.02
//     boot_dqn_star: variant=boot_dqn
//
// Whitespace separates overrides; names may use [A-Za-z0-9_.-].

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bdqn/config.hpp"
#include "bdqn/report.hpp"
#include "bdqn/trainer.hpp"

namespace bdqn {

struct MatrixVariant {
  std::string name;
  std::vector<std::string> overrides;
};

inline std::vector<MatrixVariant> parse_matrix(std::string_view text, const std::string& origin = "<matrix>") {
  std::vector<MatrixVariant> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 'name: overrides'");
    MatrixVariant v;
    v.name = detail::trim(t.substr(0, colon));
    const bool valid_name = !v.name.empty() && std::all_of(v.name.begin(), v.name.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
    if (!valid_name) throw ParseError(origin + ":" + std::to_string(lineno) + ": bad variant name '" + v.name + "'");
    for (const auto& existing : out) {
      if (existing.name == v.name) throw ParseError(origin + ":" + std::to_string(lineno) + ": duplicate variant '" + v.name + "'");
    }
    std::istringstream rest(t.substr(colon + 1));
    std::string tok;
    while (rest >> tok) v.overrides.push_back(tok);
    out.push_back(std::move(v));
  }
  if (out.empty()) throw ParseError(origin + ": no variants");
  return out;
}

inline std::vector<MatrixVariant> load_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open matrix file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matrix(buf.str(), path);
}

struct CellFailure {
  std::string variant;
  std::uint64_t seed = 0;
  std::string error;
};

struct AblationResult {
  ScoreTable table;
  std::vector<std::string> run_dirs;
  std::vector<CellFailure> failures;
};

inline std::string cell_dir(const std::string& out_dir, const std::string& variant, std::uint64_t seed) {
  return (std::filesystem::path(out_dir) / variant / ("seed_" + std::to_string(seed))).string();
}

/// Trains the cross product variants x seeds under out_dir/<variant>/seed_<s>,
/// then reports over the successful cells into out_dir/report. A failing cell
/// is recorded and skipped. `jobs` cells run concurrently.
inline AblationResult run_ablation(const TrainConfig& base, const std::vector<MatrixVariant>& matrix,
                                   const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                                   unsigned jobs = 1) {
  struct Cell {
    const MatrixVariant* variant;
    std::uint64_t seed;
    std::string dir;
    bool ok = false;
    std::string error;
  };
  std::vector<Cell> cells;
  for (const auto& v : matrix) {
    for (auto s : seeds) cells.push_back({&v, s, cell_dir(out_dir, v.name, s), false, {}});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      Cell& c = cells[i];
      try {
        TrainConfig cfg = base;
        for (const auto& o : c.variant->overrides) apply_override(cfg, o);
        cfg.seed = c.seed;
        cfg.validate();
        std::filesystem::create_directories(c.dir);
        std::ofstream(std::filesystem::path(c.dir) / "label") << c.variant->name << "\n";
        Trainer(cfg).run(c.dir);
        c.ok = true;
      } catch (const std::exception& e) {
        c.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < std::max(1u, jobs); ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  AblationResult res;
  for (const auto& c : cells) {
    if (c.ok) {
      res.run_dirs.push_back(c.dir);
    } else {
      res.failures.push_back({c.variant->name, c.seed, c.error});
    }
  }
  if (!res.run_dirs.empty()) {
    res.table = report(res.run_dirs, (std::filesystem::path(out_dir) / "report").string()).table;
  }
  if (!res.failures.empty()) {
    std::ofstream f(std::filesystem::path(out_dir) / "failures.txt");
    for (const auto& x : res.failures) f << x.variant << " seed " << x.seed << ": " << x.error << "\n";
  }
  return res;
}

}  // namespace bdqn
