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

// Design search: CMA-ES over the normalized design vector, the grid-pose GA
// baseline and brute-force enumeration for small catalogs.

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcd/cmaes.hpp"
#include "mcd/evaluate.hpp"
#include "mcd/parallel.hpp"

namespace mcd {

struct EvalRecord {
  Candidate candidate;
  CostBreakdown cost;
};

/// One log row, shared by both algorithms. Generation 0 is the initial guess.
struct GenerationRecord {
  int generation = 0;
  double best = 0.0;
  double best_so_far = 0.0;
  double sigma = std::numeric_limits<double>::quiet_NaN();  // CMA-ES only
  long evaluations = 0;
  Candidate best_candidate;  // argmin of this generation
};

struct RunOptions {
  bool keep_history = true;
  unsigned workers = default_workers();
  std::function<void(const GenerationRecord&)> on_generation;
};

struct RunResult {
  std::string algo;
  std::uint64_t seed = 0;
  std::vector<GenerationRecord> log;
  Candidate best;
  CostBreakdown best_cost;
  VecX best_x;  // CMA-ES only
  long evaluations = 0;
  std::string stop;
  double seconds = 0.0;
  std::vector<EvalRecord> history;  // every evaluation in order
};

/// Identity module order, Y ports (1, 2) and the centre of the mount range.
inline Candidate default_initial_guess(const PreparedScenario& ps) {
  Candidate c;
  c.C_v.resize(ps.layout.m + 3);
  std::iota(c.C_v.begin(), c.C_v.end(), 1);
  c.pose = 0.5 * (ps.sc.mount.lo + ps.sc.mount.hi);
  return c;
}

/// Module ids up to and including the end effector, e.g. "3 1 2 4".
inline std::string morphology_label(const Candidate& c, const Catalog& cat) {
  std::ostringstream os;
  for (std::size_t k = 0; k < c.C_v.size(); ++k) {
    if (k) os << ' ';
    os << c.C_v[k];
    if (c.C_v[k] == cat.eom_id()) break;
  }
  return os.str();
}

namespace detail {

inline std::vector<CostBreakdown> evaluate_batch(const std::vector<Candidate>& cands,
                                                 const PreparedScenario& ps, unsigned workers) {
  return parallel_map<CostBreakdown>(
      cands.size(), [&](std::size_t i) { return evaluate_candidate(cands[i], ps).cost; },
      workers);
}

inline void record(RunResult& r, const std::vector<Candidate>& cands,
                   const std::vector<CostBreakdown>& costs, int generation,
                   double sigma, const RunOptions& opt) {
  int top = 0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (opt.keep_history) r.history.push_back({cands[i], costs[i]});
    if (costs[i].E_total < costs[top].E_total) top = static_cast<int>(i);
  }
  r.evaluations += static_cast<long>(cands.size());
  if (r.log.empty() || costs[top].E_total < r.best_cost.E_total) {
    r.best = cands[top];
    r.best_cost = costs[top];
  }
  GenerationRecord g;
  g.generation = generation;
  g.best = costs[top].E_total;
  g.best_so_far = r.best_cost.E_total;
  g.sigma = sigma;
  g.evaluations = r.evaluations;
  g.best_candidate = cands[top];
  r.log.push_back(g);
  if (opt.on_generation) opt.on_generation(g);
}

}  // namespace detail

inline RunResult cmaes_run(const PreparedScenario& ps, const CMAESConfig& cfg,
                           const std::optional<Candidate>& initial = std::nullopt,
                           const RunOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.algo = "cmaes";
  r.seed = static_cast<std::uint64_t>(cfg.seed);

  CMAESOptions o;
  o.population = cfg.population;
  o.sigma0 = cfg.sigma0;
  o.generations = cfg.generations;
  o.max_generations = cfg.max_generations;
  o.sigma_stop = cfg.sigma_stop;
  o.unit_box = true;
  o.seed = r.seed;
  if (o.population < 4) throw ConfigError("cmaes: population must be at least 4");

  const VecX x0 = ps.layout.encode(initial ? *initial : default_initial_guess(ps));
  RunOptions quiet = opt;
  quiet.on_generation = nullptr;
  int generation = 0;
  auto batch = [&](const std::vector<VecX>& xs) {
    std::vector<Candidate> cands;
    cands.reserve(xs.size());
    for (const auto& x : xs) cands.push_back(ps.layout.decode(x));
    const auto costs = detail::evaluate_batch(cands, ps, opt.workers);
    detail::record(r, cands, costs, generation++, std::nan(""), quiet);
    std::vector<double> f;
    f.reserve(costs.size());
    for (const auto& c : costs) f.push_back(c.E_total);
    return f;
  };
  // Sigma in the log is the step size after that generation's update.
  auto on_gen = [&](const CMAESGeneration& g) {
    r.log.back().sigma = g.sigma;
    if (opt.on_generation) opt.on_generation(r.log.back());
  };
  const CMAESResult inner = cmaes_minimize(batch, x0, o, on_gen);
  r.best_x = inner.x_best;
  r.stop = inner.stop;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Discrete pose grid used by the GA and by enumeration. Only components the
/// mount range leaves free are varied; the others stay at the lower bound.
struct PoseGrid {
  std::vector<double> x, y, yaw;
  Vec6 fixed = Vec6::Zero();

  static PoseGrid from(const GAConfig& ga, const MountRange& mount) {
    PoseGrid g;
    g.fixed = mount.lo;
    g.x = mount.free[0] ? ga.x.values() : std::vector<double>{mount.lo[0]};
    g.y = mount.free[1] ? ga.y.values() : std::vector<double>{mount.lo[1]};
    g.yaw = mount.free[5] ? ga.yaw.values() : std::vector<double>{mount.lo[5]};
    return g;
  }
  std::size_t size() const { return x.size() * y.size() * yaw.size(); }
  Vec6 pose(int ix, int iy, int iyaw) const {
    Vec6 p = fixed;
    p[0] = x.at(ix);
    p[1] = y.at(iy);
    p[5] = yaw.at(iyaw);
    return p;
  }
  std::array<int, 3> nearest(const Vec6& p) const {
    auto idx = [](const std::vector<double>& v, double a) {
      int best = 0;
      for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i] - a) < std::abs(v[best] - a)) best = static_cast<int>(i);
      return best;
    };
    return {idx(x, p[0]), idx(y, p[1]), idx(yaw, p[5])};
  }
};

namespace detail {

struct Genome {
  std::vector<int> order;  // permutation of 1..m+3
  bool flip = false;       // S = {2, 1}
  std::array<int, 3> pose{0, 0, 0};
};

inline Candidate to_candidate(const Genome& g, const PoseGrid& grid) {
  Candidate c;
  c.C_v = g.order;
  c.S = g.flip ? std::array<int, 2>{2, 1} : std::array<int, 2>{1, 2};
  c.pose = grid.pose(g.pose[0], g.pose[1], g.pose[2]);
  return c;
}

// Order crossover (OX1): a slice from one parent, the rest in the order of
// the other.
inline std::vector<int> order_crossover(const std::vector<int>& a, const std::vector<int>& b,
                                        std::mt19937_64& rng) {
  const int n = static_cast<int>(a.size());
  std::uniform_int_distribution<int> pick(0, n - 1);
  int i = pick(rng), j = pick(rng);
  if (i > j) std::swap(i, j);
  std::vector<int> child(n, 0);
  std::vector<bool> used(n + 1, false);
  for (int k = i; k <= j; ++k) {
    child[k] = a[k];
    used[a[k]] = true;
  }
  int pos = (j + 1) % n;
  for (int k = 0; k < n; ++k) {
    const int v = b[(j + 1 + k) % n];
    if (used[v]) continue;
    child[pos] = v;
    pos = (pos + 1) % n;
  }
  return child;
}

}  // namespace detail

inline RunResult ga_baseline_run(const PreparedScenario& ps, const GAConfig& cfg,
                                 const std::optional<Candidate>& initial = std::nullopt,
                                 const RunOptions& opt = {}) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.algo = "ga";
  r.seed = static_cast<std::uint64_t>(cfg.seed);
  const PoseGrid grid = PoseGrid::from(cfg, ps.sc.mount);
  const int n = ps.layout.m + 3;
  const int pop = cfg.population;
  const int elites = std::min(2, pop - 1);
  std::mt19937_64 rng(r.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](int k) { return std::uniform_int_distribution<int>(0, k - 1)(rng); };
  const int sizes[3] = {static_cast<int>(grid.x.size()), static_cast<int>(grid.y.size()),
                        static_cast<int>(grid.yaw.size())};

  detail::Genome seed_genome;
  {
    const Candidate c0 = initial ? *initial : default_initial_guess(ps);
    seed_genome.order = c0.C_v;
    seed_genome.flip = c0.S[0] == 2;
    seed_genome.pose = grid.nearest(c0.pose);
  }
  auto evaluate = [&](const std::vector<detail::Genome>& gs, int generation) {
    std::vector<Candidate> cands;
    for (const auto& g : gs) cands.push_back(detail::to_candidate(g, grid));
    const auto costs = detail::evaluate_batch(cands, ps, opt.workers);
    detail::record(r, cands, costs, generation, std::nan(""), opt);
    return costs;
  };

  evaluate({seed_genome}, 0);

  std::vector<detail::Genome> popn{seed_genome};
  while (static_cast<int>(popn.size()) < pop) {
    detail::Genome g;
    g.order.resize(n);
    std::iota(g.order.begin(), g.order.end(), 1);
    std::shuffle(g.order.begin(), g.order.end(), rng);
    g.flip = uniform(2) == 1;
    for (int k = 0; k < 3; ++k) g.pose[k] = uniform(sizes[k]);
    popn.push_back(std::move(g));
  }
  std::vector<CostBreakdown> costs = evaluate(popn, 1);

  auto tournament = [&]() -> const detail::Genome& {
    const int a = uniform(pop), b = uniform(pop);
    return costs[a].E_total <= costs[b].E_total ? popn[a] : popn[b];
  };

  int stale = 0;
  r.stop = "generations";
  for (int gen = 2; gen <= cfg.generations; ++gen) {
    std::vector<detail::Genome> kids;
    while (static_cast<int>(kids.size()) < pop) {
      const detail::Genome& pa = tournament();
      const detail::Genome& pb = tournament();
      detail::Genome child = pa;
      if (u01(rng) < cfg.crossover) {
        child.order = detail::order_crossover(pa.order, pb.order, rng);
        child.flip = uniform(2) ? pa.flip : pb.flip;
        for (int k = 0; k < 3; ++k) child.pose[k] = uniform(2) ? pa.pose[k] : pb.pose[k];
      }
      if (u01(rng) < cfg.mutation) {
        switch (uniform(3)) {
          case 0: {
            const int i = uniform(n), j = uniform(n);
            std::swap(child.order[i], child.order[j]);
            break;
          }
          case 1:
            child.flip = !child.flip;
            break;
          default: {
            const int k = uniform(3);
            child.pose[k] = uniform(sizes[k]);
          }
        }
      }
      kids.push_back(std::move(child));
    }
    const double before = r.best_cost.E_total;
    const std::vector<CostBreakdown> kid_costs = evaluate(kids, gen);

    // Elitism: the best parents survive, the best children fill the rest.
    auto ranked = [](const std::vector<CostBreakdown>& c) {
      std::vector<int> idx(c.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(),
                       [&](int a, int b) { return c[a].E_total < c[b].E_total; });
      return idx;
    };
    const auto pr = ranked(costs), kr = ranked(kid_costs);
    std::vector<detail::Genome> next;
    std::vector<CostBreakdown> next_costs;
    for (int k = 0; k < elites; ++k) {
      next.push_back(popn[pr[k]]);
      next_costs.push_back(costs[pr[k]]);
    }
    for (int k = 0; static_cast<int>(next.size()) < pop; ++k) {
      next.push_back(kids[kr[k]]);
      next_costs.push_back(kid_costs[kr[k]]);
    }
    popn = std::move(next);
    costs = std::move(next_costs);

    stale = r.best_cost.E_total < before ? 0 : stale + 1;
    if (cfg.early_stop > 0 && stale >= cfg.early_stop) {
      r.stop = "early_stop";
      break;
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Brute force: every distinct structure the encoding can express, each
/// feasible one at every grid pose. Orders that segment to the same
/// structure are evaluated once.
struct EnumerationResult {
  Candidate best;
  CostBreakdown best_cost;
  long evaluations = 0;
  int structures = 0;           // distinct segmented morphologies
  int feasible_structures = 0;  // passing the structural rules
  std::vector<EvalRecord> per_structure;  // best pose of each structure
};

inline std::string structure_key(const SegmentedMorphology& s) {
  std::ostringstream os;
  if (!s.feasible) return "infeasible";
  auto list = [&](const std::vector<int>& v) {
    for (int id : v) os << id << ',';
    os << '|';
  };
  list(s.base_segment);
  list(s.main_branch);
  list(s.assist_branch);
  os << s.uses_y_module << s.main_port << s.assist_port;
  return os.str();
}

inline EnumerationResult enumerate_designs(const PreparedScenario& ps, const PoseGrid& grid,
                                           unsigned workers = default_workers()) {
  const Catalog& cat = ps.sc.catalog;
  const int n = ps.layout.m + 3;
  std::map<std::string, Candidate> reps;
  std::vector<std::string> keys;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 1);
  do {
    for (const std::array<int, 2> S : {std::array<int, 2>{1, 2}, std::array<int, 2>{2, 1}}) {
      const std::string key = structure_key(segment(order, S, cat));
      if (reps.count(key)) continue;
      Candidate c;
      c.C_v = order;
      c.S = S;
      reps.emplace(key, c);
      keys.push_back(key);
    }
  } while (std::next_permutation(order.begin(), order.end()));

  EnumerationResult res;
  res.structures = static_cast<int>(keys.size());
  std::vector<Candidate> cands;
  std::vector<int> owner;
  for (std::size_t s = 0; s < keys.size(); ++s) {
    const Candidate& rep = reps.at(keys[s]);
    if (keys[s] == "infeasible") {
      cands.push_back(rep);
      owner.push_back(static_cast<int>(s));
      continue;
    }
    ++res.feasible_structures;
    for (std::size_t i = 0; i < grid.x.size(); ++i)
      for (std::size_t j = 0; j < grid.y.size(); ++j)
        for (std::size_t k = 0; k < grid.yaw.size(); ++k) {
          Candidate c = rep;
          c.pose = grid.pose(int(i), int(j), int(k));
          cands.push_back(c);
          owner.push_back(static_cast<int>(s));
        }
  }
  const auto costs = detail::evaluate_batch(cands, ps, workers);
  res.evaluations = static_cast<long>(cands.size());
  res.per_structure.assign(keys.size(), {});
  std::vector<bool> seen(keys.size(), false);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    auto& slot = res.per_structure[owner[i]];
    if (!seen[owner[i]] || costs[i].E_total < slot.cost.E_total) {
      slot = {cands[i], costs[i]};
      seen[owner[i]] = true;
    }
    if (i == 0 || costs[i].E_total < res.best_cost.E_total) {
      res.best = cands[i];
      res.best_cost = costs[i];
    }
  }
  return res;
}

/// Per-generation CSV: one row per logged generation, generation 0 first.
inline std::string evolution_report(const RunResult& r, const Catalog& cat) {
  std::ostringstream os;
  os.precision(12);
  os << "generation,best,best_so_far,sigma,evaluations,morphology,S,pose\n";
  for (const auto& g : r.log) {
    os << g.generation << ',' << g.best << ',' << g.best_so_far << ',';
    if (std::isnan(g.sigma))
      os << "nan";
    else
      os << g.sigma;
    const auto& c = g.best_candidate;
    os << ',' << g.evaluations << ",\"" << morphology_label(c, cat) << "\"," << c.S[0] << c.S[1]
       << ",\"";
    for (int i = 0; i < 6; ++i) os << (i ? " " : "") << c.pose[i];
    os << "\"\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Design artifacts

inline nlohmann::json candidate_to_json(const Candidate& c) {
  return {{"C_v", c.C_v},
          {"S", {c.S[0], c.S[1]}},
          {"pose", {c.pose[0], c.pose[1], c.pose[2], c.pose[3], c.pose[4], c.pose[5]}}};
}

/// Reads a candidate and checks it against the catalog the scenario uses.
inline Candidate candidate_from_json(const nlohmann::json& j, const Catalog& cat) {
  try {
    Candidate c;
    c.C_v = j.at("C_v").get<std::vector<int>>();
    const auto S = j.at("S").get<std::vector<int>>();
    const auto p = j.at("pose").get<std::vector<double>>();
    const int n = cat.encoding_size();
    if (static_cast<int>(c.C_v.size()) != n)
      throw ConfigError("design lists " + std::to_string(c.C_v.size()) + " ids, catalog '" +
                        cat.name() + "' needs " + std::to_string(n));
    std::vector<bool> seen(n + 1, false);
    for (int id : c.C_v) {
      if (id < 1 || id > n) throw ConfigError("design uses unknown module id " + std::to_string(id));
      if (seen[id]) throw ConfigError("design repeats module id " + std::to_string(id));
      seen[id] = true;
    }
    if (S.size() != 2 || !((S[0] == 1 && S[1] == 2) || (S[0] == 2 && S[1] == 1)))
      throw ConfigError("design S must be [1,2] or [2,1]");
    if (p.size() != 6) throw ConfigError("design pose needs 6 entries");
    c.S = {S[0], S[1]};
    for (int i = 0; i < 6; ++i) c.pose[i] = p[i];
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("design: ") + e.what());
  }
}

/// The scenario's declared initial guess, if any.
inline std::optional<Candidate> scenario_initial_guess(const PreparedScenario& ps) {
  if (ps.sc.initial_guess.is_null()) return std::nullopt;
  return candidate_from_json(ps.sc.initial_guess, ps.sc.catalog);
}

inline nlohmann::json cost_to_json(const CostBreakdown& c) {
  return {{"E_track", c.E_track}, {"E_tra", c.E_tra},   {"E_col", c.E_col},
          {"E_dyn", c.E_dyn},     {"E_red", c.E_red},   {"F_eff", c.F_eff},
          {"M_man", c.M_man},     {"modules", c.modules}, {"delta", c.delta},
          {"E_total", c.E_total}, {"tracking_mse", c.tracking_mse},
          {"stage", c.stage},     {"reason", c.reason}};
}

inline nlohmann::json artifact_json(const RunResult& r, const PreparedScenario& ps) {
  nlohmann::json j;
  j["format"] = "mcd-design/1";
  j["scenario"] = ps.sc.name;
  j["catalog"] = ps.sc.catalog.name();
  j["algo"] = r.algo;
  j["seed"] = r.seed;
  j["design"] = candidate_to_json(r.best);
  j["morphology"] = morphology_label(r.best, ps.sc.catalog);
  j["cost"] = cost_to_json(r.best_cost);
  j["evaluations"] = r.evaluations;
  j["generations"] = r.log.empty() ? 0 : r.log.back().generation;
  return j;
}

}  // namespace mcd
