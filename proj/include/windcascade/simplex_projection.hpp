#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace windcascade {

/// Euclidean projection of `v` onto the probability simplex
/// {w : w >= 0, sum(w) = 1}, by the sort-and-threshold rule: with u sorted
/// descending, rho = max{k : u_k - (sum_{i<=k} u_i - 1) / k > 0} and
/// w = max(v - theta, 0), theta = (sum_{i<=rho} u_i - 1) / rho.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> project_to_simplex(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x = v;
  const Eigen::Index n = x.size();
  std::vector<Scalar> u(x.data(), x.data() + n);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar running = 0, theta = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    running += u[static_cast<std::size_t>(k)];
    const Scalar candidate = (running - Scalar(1)) / static_cast<Scalar>(k + 1);
    if (u[static_cast<std::size_t>(k)] - candidate > 0) theta = candidate;
  }
  return (x.array() - theta).cwiseMax(Scalar(0)).matrix();
}

}  // namespace windcascade
