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

// Clamped uniform B-spline curves in R^d.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mcd/types.hpp"

namespace mcd {

class BSpline {
 public:
  BSpline() = default;

  /// Control points are the columns of `P`. Needs at least degree + 1 of
  /// them and u0 < u1.
  BSpline(MatX P, int degree, double u0, double u1) : P_(std::move(P)), p_(degree) {
    if (degree < 1) throw ConfigError("bspline: degree must be >= 1");
    if (P_.cols() < degree + 1)
      throw ConfigError("bspline: need at least degree + 1 control points");
    if (!(u1 > u0)) throw ConfigError("bspline: empty parameter domain");
    const int n = static_cast<int>(P_.cols()) - 1;
    const int spans = n - p_ + 1;
    U_.resize(n + p_ + 2);
    for (int i = 0; i <= p_; ++i) {
      U_[i] = u0;
      U_[n + 1 + i] = u1;
    }
    for (int j = 1; j < spans; ++j)
      U_[p_ + j] = u0 + (u1 - u0) * static_cast<double>(j) / spans;
  }

  int degree() const { return p_; }
  int dim() const { return static_cast<int>(P_.rows()); }
  const MatX& control_points() const { return P_; }
  const std::vector<double>& knots() const { return U_; }
  double u0() const { return U_.front(); }
  double u1() const { return U_.back(); }

  /// Knot span index k with U[k] <= u < U[k+1]; the last span owns u1.
  int span(double u) const {
    const int n = static_cast<int>(P_.cols()) - 1;
    if (u >= U_[n + 1]) return n;
    if (u <= U_[p_]) return p_;
    const auto it = std::upper_bound(U_.begin() + p_, U_.begin() + n + 2, u);
    return static_cast<int>(it - U_.begin()) - 1;
  }

  /// Nonzero basis functions and derivatives up to `nd` at u: row k holds
  /// the k-th derivative of N_{span-p..span}.
  MatX basis_derivatives(int k, double u, int nd) const {
    const int p = p_;
    MatX ndu(p + 1, p + 1);
    std::vector<double> left(p + 1), right(p + 1);
    ndu(0, 0) = 1.0;
    for (int j = 1; j <= p; ++j) {
      left[j] = u - U_[k + 1 - j];
      right[j] = U_[k + j] - u;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        ndu(j, r) = right[r + 1] + left[j - r];
        const double tmp = ndu(r, j - 1) / ndu(j, r);
        ndu(r, j) = saved + right[r + 1] * tmp;
        saved = left[j - r] * tmp;
      }
      ndu(j, j) = saved;
    }
    MatX ders = MatX::Zero(nd + 1, p + 1);
    for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
    MatX a(2, p + 1);
    for (int r = 0; r <= p; ++r) {
      int s1 = 0, s2 = 1;
      a(0, 0) = 1.0;
      for (int d = 1; d <= std::min(nd, p); ++d) {
        double v = 0.0;
        const int rk = r - d, pk = p - d;
        if (r >= d) {
          a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
          v = a(s2, 0) * ndu(rk, pk);
        }
        const int j1 = rk >= -1 ? 1 : -rk;
        const int j2 = r - 1 <= pk ? d - 1 : p - r;
        for (int j = j1; j <= j2; ++j) {
          a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
          v += a(s2, j) * ndu(rk + j, pk);
        }
        if (r <= pk) {
          a(s2, d) = -a(s1, d - 1) / ndu(pk + 1, r);
          v += a(s2, d) * ndu(r, pk);
        }
        ders(d, r) = v;
        std::swap(s1, s2);
      }
    }
    double f = p;
    for (int d = 1; d <= std::min(nd, p); ++d) {
      ders.row(d) *= f;
      f *= p - d;
    }
    return ders;
  }

  /// Curve point (d = 0) or d-th derivative with respect to u. Outside the
  /// domain the end value is held and derivatives vanish.
  VecX eval(double u, int d = 0) const {
    if (u < u0() || u > u1()) {
      if (d > 0) return VecX::Zero(dim());
      u = std::clamp(u, u0(), u1());
    }
    const int k = span(u);
    const MatX N = basis_derivatives(k, u, d);
    VecX out = VecX::Zero(dim());
    for (int j = 0; j <= p_; ++j) out += N(d, j) * P_.col(k - p_ + j);
    return out;
  }

 private:
  MatX P_;
  int p_ = 3;
  std::vector<double> U_;
};

}  // namespace mcd
