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

// Dense strictly convex QP by the Goldfarb-Idnani dual active-set method:
//
//   min 0.5 x'Hx + g'x   s.t.  Aeq x = beq,  Ain x >= bin.
//
// H must be symmetric positive definite.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mcd/types.hpp"

namespace mcd {

struct QPProblem {
  MatX H;
  VecX g;
  MatX Aeq;
  VecX beq;
  MatX Ain;
  VecX bin;

  int n() const { return static_cast<int>(g.size()); }

  /// Appends l <= A x <= u as two inequality blocks; infinite sides skipped.
  void add_range(const MatX& A, const VecX& l, const VecX& u);
  void add_bounds(const VecX& lo, const VecX& hi) {
    add_range(MatX::Identity(n(), n()), lo, hi);
  }
  void add_equality(const MatX& A, const VecX& b);
};

enum class QPStatus { kOptimal, kInfeasible, kNotConvex, kMaxIterations };

inline const char* to_string(QPStatus s) {
  switch (s) {
    case QPStatus::kOptimal: return "optimal";
    case QPStatus::kInfeasible: return "infeasible";
    case QPStatus::kNotConvex: return "not strictly convex";
    case QPStatus::kMaxIterations: return "iteration limit";
  }
  return "?";
}

struct QPResult {
  QPStatus status = QPStatus::kInfeasible;
  VecX x;
  double objective = std::numeric_limits<double>::infinity();
  VecX lambda_eq;  // multipliers, stationarity: Hx + g = Aeq' l_eq + Ain' l_in
  VecX lambda_in;  // >= 0
  int iterations = 0;
  bool ok() const { return status == QPStatus::kOptimal; }
};

inline void QPProblem::add_range(const MatX& A, const VecX& l, const VecX& u) {
  std::vector<int> lo_rows, hi_rows;
  for (int i = 0; i < A.rows(); ++i) {
    if (std::isfinite(l[i])) lo_rows.push_back(i);
    if (std::isfinite(u[i])) hi_rows.push_back(i);
  }
  const int old = static_cast<int>(Ain.rows());
  const int add = static_cast<int>(lo_rows.size() + hi_rows.size());
  MatX A2(old + add, n());
  VecX b2(old + add);
  if (old > 0) {
    A2.topRows(old) = Ain;
    b2.head(old) = bin;
  }
  int r = old;
  for (int i : lo_rows) {
    A2.row(r) = A.row(i);
    b2[r++] = l[i];
  }
  for (int i : hi_rows) {
    A2.row(r) = -A.row(i);
    b2[r++] = -u[i];
  }
  Ain = std::move(A2);
  bin = std::move(b2);
}

inline void QPProblem::add_equality(const MatX& A, const VecX& b) {
  const int old = static_cast<int>(Aeq.rows());
  MatX A2(old + A.rows(), n());
  VecX b2(old + A.rows());
  if (old > 0) {
    A2.topRows(old) = Aeq;
    b2.head(old) = beq;
  }
  A2.bottomRows(A.rows()) = A;
  b2.tail(A.rows()) = b;
  Aeq = std::move(A2);
  beq = std::move(b2);
}

namespace detail {

class GoldfarbIdnani {
 public:
  explicit GoldfarbIdnani(int n) : n_(n), R_(MatX::Zero(n, n)), J_(n, n) {}

  // Appends a constraint with transformed normal d = J' np to the
  // factorization; false if it is linearly dependent on the active set.
  bool add_constraint(VecX& d, int& iq) {
    for (int j = n_ - 1; j >= iq + 1; --j) {
      double cc = d[j - 1];
      double ss = d[j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d[j] = 0.0;
      ss /= h;
      cc /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d[j - 1] = -h;
      } else {
        d[j - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j - 1);
        const double t2 = J_(k, j);
        J_(k, j - 1) = t1 * cc + t2 * ss;
        J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
      }
    }
    ++iq;
    R_.col(iq - 1).head(iq) = d.head(iq);
    if (std::abs(d[iq - 1]) <= std::numeric_limits<double>::epsilon() * r_norm_) return false;
    r_norm_ = std::max(r_norm_, std::abs(d[iq - 1]));
    return true;
  }

  // Removes active constraint `l` (an index into the constraint list) and
  // restores the triangular factor with Givens rotations.
  void delete_constraint(std::vector<int>& A, VecX& u, int p, int& iq, int l) {
    int qq = -1;
    for (int i = p; i < iq; ++i)
      if (A[i] == l) {
        qq = i;
        break;
      }
    if (qq < 0) return;
    for (int i = qq; i < iq - 1; ++i) {
      A[i] = A[i + 1];
      u[i] = u[i + 1];
      R_.col(i) = R_.col(i + 1);
    }
    A[iq - 1] = A[iq];
    u[iq - 1] = u[iq];
    A[iq] = 0;
    u[iq] = 0.0;
    R_.col(iq - 1).setZero();
    --iq;
    if (iq == 0) return;
    for (int j = qq; j < iq; ++j) {
      double cc = R_(j, j);
      double ss = R_(j + 1, j);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      R_(j + 1, j) = 0.0;
      if (cc < 0.0) {
        R_(j, j) = -h;
        cc = -cc;
        ss = -ss;
      } else {
        R_(j, j) = h;
      }
      const double xny = ss / (1.0 + cc);
      for (int k = j + 1; k < iq; ++k) {
        const double t1 = R_(j, k);
        const double t2 = R_(j + 1, k);
        R_(j, k) = t1 * cc + t2 * ss;
        R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
      }
      for (int k = 0; k < n_; ++k) {
        const double t1 = J_(k, j);
        const double t2 = J_(k, j + 1);
        J_(k, j) = t1 * cc + t2 * ss;
        J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
      }
    }
  }

  void step_direction(const VecX& np, VecX& d, VecX& z, VecX& r, int iq) const {
    d.noalias() = J_.transpose() * np;
    z.noalias() = J_.rightCols(n_ - iq) * d.tail(n_ - iq);
    if (iq > 0)
      r.head(iq) = R_.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d.head(iq));
  }

  int n_;
  MatX R_;
  MatX J_;
  double r_norm_ = 1.0;
};

}  // namespace detail

/// Solves the QP; never throws on infeasibility, reports it in the status.
inline QPResult solve_qp(const QPProblem& qp, int max_iterations = 10000) {
  const int n = qp.n();
  const int p = static_cast<int>(qp.Aeq.rows());
  const int m = static_cast<int>(qp.Ain.rows());
  if (qp.H.rows() != n || qp.H.cols() != n) throw DimensionError("qp: H size");
  if ((p > 0 && qp.Aeq.cols() != n) || qp.beq.size() != p) throw DimensionError("qp: equalities");
  if ((m > 0 && qp.Ain.cols() != n) || qp.bin.size() != m) throw DimensionError("qp: inequalities");

  QPResult res;
  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr double eps = std::numeric_limits<double>::epsilon();
  Eigen::LLT<MatX> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    res.status = QPStatus::kNotConvex;
    return res;
  }
  detail::GoldfarbIdnani gi(n);
  // J = L^{-T}
  const MatX L = llt.matrixL();
  gi.J_ = L.triangularView<Eigen::Lower>().solve(MatX::Identity(n, n)).transpose();
  const double c1 = qp.H.trace();
  const double c2 = gi.J_.trace();

  VecX x = -llt.solve(qp.g);
  VecX d(n), z(n), r = VecX::Zero(n + p + m), u = VecX::Zero(n + p + m);
  std::vector<int> A(n + p + m + 1, 0), A_old(n + p + m + 1, 0);
  VecX u_old = VecX::Zero(n + p + m);
  int iq = 0;

  // Equalities first; they stay active.
  for (int i = 0; i < p; ++i) {
    const VecX np = qp.Aeq.row(i).transpose();
    gi.step_direction(np, d, z, r, iq);
    double t2 = 0.0;
    if (z.dot(z) > eps) t2 = (qp.beq[i] - np.dot(x)) / z.dot(np);
    x += t2 * z;
    u.head(iq) -= t2 * r.head(iq);
    u[iq] = t2;
    A[iq] = -i - 1;
    if (!gi.add_constraint(d, iq)) {
      res.status = QPStatus::kInfeasible;  // dependent equality rows
      res.x = x;
      return res;
    }
  }

  VecX s(m);
  std::vector<int> iai(m);
  std::vector<char> iaexcl(m, 1);
  int iter = 0;
  for (;;) {
    // Step 1: most violated inequality.
    if (++iter > max_iterations) {
      res.status = QPStatus::kMaxIterations;
      break;
    }
    for (int i = 0; i < m; ++i) {
      iai[i] = i;
      iaexcl[i] = 1;
    }
    for (int i = p; i < iq; ++i) iai[A[i]] = -1;
    double psi = 0.0;
    if (m > 0) {
      s.noalias() = qp.Ain * x - qp.bin;
      for (int i = 0; i < m; ++i) psi += std::min(0.0, s[i]);
    }
    if (std::abs(psi) <= m * eps * c1 * c2 * 100.0) {
      res.status = QPStatus::kOptimal;
      break;
    }
    for (int i = 0; i < iq; ++i) {
      u_old[i] = u[i];
      A_old[i] = A[i];
    }
    const VecX x_old = x;

  select:
    // Step 2: choose the violated constraint to add.
    int ip = -1;
    double ss = 0.0;
    for (int i = 0; i < m; ++i)
      if (s[i] < ss && iai[i] != -1 && iaexcl[i]) {
        ss = s[i];
        ip = i;
      }
    if (ip < 0) {
      res.status = QPStatus::kOptimal;
      break;
    }
    const VecX np = qp.Ain.row(ip).transpose();
    u[iq] = 0.0;
    A[iq] = ip;

    bool infeasible = false;
    for (;;) {
      // Step 2a: primal and dual step directions.
      gi.step_direction(np, d, z, r, iq);
      double t1 = inf;
      int l = -1;
      for (int k = p; k < iq; ++k)
        if (r[k] > 0.0 && u[k] / r[k] < t1) {
          t1 = u[k] / r[k];
          l = A[k];
        }
      const double t2 = z.dot(z) > eps ? -s[ip] / z.dot(np) : inf;
      const double t = std::min(t1, t2);
      if (t >= inf) {
        infeasible = true;
        break;
      }
      if (t2 >= inf) {
        // Dual step only.
        u.head(iq) -= t * r.head(iq);
        u[iq] += t;
        iai[l] = l;
        gi.delete_constraint(A, u, p, iq, l);
        continue;
      }
      x += t * z;
      u.head(iq) -= t * r.head(iq);
      u[iq] += t;
      if (t == t2) {
        // Full step: add ip to the active set.
        if (!gi.add_constraint(d, iq)) {
          iaexcl[ip] = 0;
          gi.delete_constraint(A, u, p, iq, ip);
          for (int i = 0; i < m; ++i) iai[i] = i;
          for (int i = p; i < iq; ++i) {
            A[i] = A_old[i];
            u[i] = u_old[i];
            iai[A[i]] = -1;
          }
          x = x_old;
          s.noalias() = qp.Ain * x - qp.bin;
          goto select;
        }
        iai[ip] = -1;
        break;
      }
      // Partial step: drop the blocking constraint and retry.
      iai[l] = l;
      gi.delete_constraint(A, u, p, iq, l);
      s[ip] = np.dot(x) - qp.bin[ip];
    }
    if (infeasible) {
      res.status = QPStatus::kInfeasible;
      break;
    }
  }
  res.iterations = iter;
  res.x = x;
  res.objective = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
  res.lambda_eq = VecX::Zero(p);
  res.lambda_in = VecX::Zero(m);
  for (int i = 0; i < iq; ++i) {
    if (A[i] < 0)
      res.lambda_eq[-A[i] - 1] = u[i];
    else
      res.lambda_in[A[i]] = u[i];
  }
  return res;
}

/// Max violation of the KKT conditions at a solution (stationarity,
/// primal feasibility, dual sign, complementarity).
inline double kkt_residual(const QPProblem& qp, const QPResult& r) {
  const int p = static_cast<int>(qp.Aeq.rows());
  const int m = static_cast<int>(qp.Ain.rows());
  VecX grad = qp.H * r.x + qp.g;
  if (p > 0) grad -= qp.Aeq.transpose() * r.lambda_eq;
  if (m > 0) grad -= qp.Ain.transpose() * r.lambda_in;
  double res = grad.cwiseAbs().maxCoeff();
  if (p > 0) res = std::max(res, (qp.Aeq * r.x - qp.beq).cwiseAbs().maxCoeff());
  if (m > 0) {
    const VecX s = qp.Ain * r.x - qp.bin;
    for (int i = 0; i < m; ++i) {
      res = std::max(res, std::max(0.0, -s[i]));
      res = std::max(res, std::max(0.0, -r.lambda_in[i]));
      res = std::max(res, std::abs(s[i] * r.lambda_in[i]));
    }
  }
  return res;
}

}  // namespace mcd
