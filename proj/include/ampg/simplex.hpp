#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Dense>

#include "ampg/errors.hpp"

namespace ampg {

/// Euclidean projection of v onto {p : sum p = 1, p >= lower_bound},
/// by sort-and-threshold in O(n log n).
///
/// Shifting out the floor reduces the problem to the standard simplex of
/// mass 1 - n*lower_bound.
inline Eigen::VectorXd project_simplex(const Eigen::Ref<const Eigen::VectorXd>& v,
                                       double lower_bound = 0.0) {
  const int n = static_cast<int>(v.size());
  if (n == 0) throw InfeasibleError("project_simplex: empty vector");
  const double mass = 1.0 - lower_bound * n;
  if (mass < -1e-15) throw InfeasibleError("project_simplex: lower_bound * len(v) exceeds 1");

  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = v[i] - lower_bound;
  std::vector<double> u(w);
  std::sort(u.begin(), u.end(), std::greater<double>());

  double css = 0.0;
  double tau = 0.0;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    const double cand = (css - mass) / (i + 1);
    if (u[i] - cand > 0.0) {
      tau = cand;
      k = i + 1;
    }
  }
  if (k == 0) tau = (css - mass) / n;  // mass == 0 degenerate case

  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p[i] = std::max(w[i] - tau, 0.0) + lower_bound;
  return p;
}

}  // namespace ampg
