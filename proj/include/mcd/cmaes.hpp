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

// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu covariance updates and
// cumulative step-size adaptation. Optionally confined to the unit box by
// clamping; the clamped samples drive the update so the mean never leaves
// the box.

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mcd/types.hpp"

namespace mcd {

struct CMAESOptions {
  int population = 0;  // 0 picks 4 + floor(3 ln n)
  double sigma0 = 0.25;
  int generations = 100;
  int max_generations = 200;
  double sigma_stop = 0.005;
  double f_target = -std::numeric_limits<double>::infinity();
  bool unit_box = true;
  std::uint64_t seed = 1;
};


/// One log row. Generation 0 holds the initial guess alone.
struct CMAESGeneration {
  int generation = 0;
  double best = 0.0;          // best cost sampled in this generation
  double best_so_far = 0.0;
  double sigma = 0.0;
  long evaluations = 0;       // cumulative
  VecX best_x;                // argmin of this generation
};

struct CMAESResult {
  VecX x_best;
  double f_best = std::numeric_limits<double>::infinity();
  std::vector<CMAESGeneration> log;
  long evaluations = 0;
  std::string stop;
};

/// Batch objective: costs for a list of points, returned in the same order.
using BatchObjective = std::function<std::vector<double>(const std::vector<VecX>&)>;
using GenerationCallback = std::function<void(const CMAESGeneration&)>;

inline CMAESResult cmaes_minimize(const BatchObjective& f, const VecX& x0,
                                  const CMAESOptions& opt,
                                  const GenerationCallback& on_generation = {}) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw ConfigError("cmaes: empty search space");
  const int lambda = opt.population > 0
                         ? opt.population
                         : 4 + static_cast<int>(std::floor(3.0 * std::log(n)));
  if (lambda < 4) throw ConfigError("cmaes: population must be at least 4");
  if (!(opt.sigma0 > 0)) throw ConfigError("cmaes: sigma0 must be positive");
  if (opt.generations < 1 || opt.max_generations < opt.generations)
    throw ConfigError("cmaes: need 1 <= generations <= max_generations");

  const int mu = lambda / 2;
  VecX w(mu);
  for (int i = 0; i < mu; ++i) w(i) = std::log(mu + 0.5) - std::log(i + 1.0);
  w /= w.sum();
  const double mueff = 1.0 / w.squaredNorm();

  const double cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n);
  const double cs = (mueff + 2.0) / (n + mueff + 5.0);
  const double c1 = 2.0 / ((n + 1.3) * (n + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) /
                                            ((n + 2.0) * (n + 2.0) + mueff));
  const double damps =
      1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs;
  const double chiN = std::sqrt(double(n)) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  auto clamp = [&](VecX x) {
    if (opt.unit_box) x = x.cwiseMax(0.0).cwiseMin(1.0);
    return x;
  };

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  VecX mean = clamp(x0);
  double sigma = opt.sigma0;
  MatX C = MatX::Identity(n, n), B = MatX::Identity(n, n);
  VecX D = VecX::Ones(n);
  VecX pc = VecX::Zero(n), ps = VecX::Zero(n);

  CMAESResult res;
  {
    const double f0 = f({mean}).at(0);
    res.x_best = mean;
    res.f_best = f0;
    res.evaluations = 1;
    res.log.push_back({0, f0, f0, sigma, 1, mean});
    if (on_generation) on_generation(res.log.back());
  }

  int eigen_age = 0;
  for (int g = 1; g <= opt.max_generations; ++g) {
    std::vector<VecX> xs(lambda);
    for (int k = 0; k < lambda; ++k) {
      VecX z(n);
      for (int i = 0; i < n; ++i) z(i) = gauss(rng);
      xs[k] = clamp(mean + sigma * (B * D.asDiagonal() * z));
    }
    const std::vector<double> fs = f(xs);
    res.evaluations += lambda;

    std::vector<int> order(lambda);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fs[a] < fs[b]; });

    const int top = order[0];
    if (fs[top] < res.f_best) {
      res.f_best = fs[top];
      res.x_best = xs[top];
    }

    // Steps in sigma units, recomputed from the clamped points.
    MatX Y(n, mu);
    for (int i = 0; i < mu; ++i) Y.col(i) = (xs[order[i]] - mean) / sigma;
    const VecX yw = Y * w;
    mean = clamp(mean + sigma * yw);

    const MatX invsqrtC = B * D.cwiseInverse().asDiagonal() * B.transpose();
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * (invsqrtC * yw);
    const double psn = ps.norm() / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * g));
    const bool hsig = psn < (1.4 + 2.0 / (n + 1.0)) * chiN;
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * yw;

    const double dh = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + dh * C) +
        cmu * Y * w.asDiagonal() * Y.transpose();
    sigma *= std::exp((cs / damps) * (ps.norm() / chiN - 1.0));

    if (++eigen_age >= std::max(1, int(lambda / (10.0 * n * (c1 + cmu))))) {
      eigen_age = 0;
      C = 0.5 * (C + C.transpose());
      Eigen::SelfAdjointEigenSolver<MatX> es(C);
      B = es.eigenvectors();
      D = es.eigenvalues().cwiseMax(1e-20).cwiseSqrt();
    }

    res.log.push_back({g, fs[top], res.f_best, sigma, res.evaluations, xs[top]});
    if (on_generation) on_generation(res.log.back());

    if (res.f_best <= opt.f_target) {
      res.stop = "f_target";
      break;
    }
    if (g >= opt.generations && sigma < opt.sigma_stop) {
      res.stop = "sigma";
      break;
    }
    if (g == opt.max_generations) res.stop = "generations";
  }
  return res;
}

}  // namespace mcd
