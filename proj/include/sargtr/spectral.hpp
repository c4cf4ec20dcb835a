#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sargtr/asc.hpp"
#include "sargtr/tensor.hpp"

namespace sargtr {

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  Tensor eigenvectors;              // K×K, column k pairs with eigenvalues[k]
};

// L = I − D^{−1/2} A D^{−1/2} over the unweighted adjacency of the given
// edge set. Isolated nodes keep L_ii = 1 with zero off-diagonals.
inline Tensor normalized_laplacian(int node_count,
                                   std::span<const std::pair<int, int>> edges) {
  if (node_count < 2)
    throw std::invalid_argument("normalized_laplacian: need at least 2 nodes");
  std::vector<double> degree(node_count, 0.0);
  for (const auto& [i, j] : edges) {
    if (i < 0 || j < 0 || i >= node_count || j >= node_count || i == j)
      throw std::invalid_argument("normalized_laplacian: bad edge");
    degree[i] += 1.0;
    degree[j] += 1.0;
  }
  std::vector<double> inv_sqrt(node_count, 0.0);
  for (int i = 0; i < node_count; ++i)
    if (degree[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);
  Tensor lap(node_count, node_count);
  for (int i = 0; i < node_count; ++i) lap(i, i) = 1.0;
  for (const auto& [i, j] : edges) {
    lap(i, j) -= inv_sqrt[i] * inv_sqrt[j];
    lap(j, i) = lap(i, j);
  }
  return lap;
}

inline Tensor normalized_laplacian(const ScatterGraph& g) {
  return normalized_laplacian(g.node_count, g.edges);
}

// Cyclic Jacobi rotations on a symmetric matrix. Eigenpairs are sorted by
// ascending eigenvalue and each eigenvector's sign is fixed so that its
// largest-magnitude component (first such, on ties) is positive.
inline SpectralDecomposition eigendecompose_symmetric(const Tensor& m,
                                                      int max_size = 64) {
  const int n = static_cast<int>(m.rows());
  if (m.rows() != m.cols())
    throw std::invalid_argument("eigendecompose_symmetric: matrix not square");
  if (n > max_size)
    throw std::invalid_argument("eigendecompose_symmetric: matrix exceeds size cap");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::fabs(m(i, j) - m(j, i)) > 1e-12)
        throw std::invalid_argument("eigendecompose_symmetric: matrix not symmetric");

  Tensor a = m;
  Tensor q(n, n);
  for (int i = 0; i < n; ++i) q(i, i) = 1.0;

  constexpr double kOffDiagTol = 1e-12;
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int r = p + 1; r < n; ++r) off = std::max(off, std::fabs(a(p, r)));
    if (off <= kOffDiagTol) break;
    if (sweep == kMaxSweeps - 1)
      throw std::runtime_error("eigendecompose_symmetric: Jacobi did not converge");

    for (int p = 0; p < n - 1; ++p)
      for (int r = p + 1; r < n; ++r) {
        const double apr = a(p, r);
        if (std::fabs(apr) <= kOffDiagTol * 1e-3) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
        for (int k = 0; k < n; ++k) {
          const double qkp = q(k, p), qkr = q(k, r);
          q(k, p) = c * qkp - s * qkr;
          q(k, r) = s * qkp + c * qkr;
        }
      }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (int i = 0; i < n; ++i) diag[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return diag[l] < diag[r]; });

  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Tensor(n, n);
  for (int col = 0; col < n; ++col) {
    const int src = order[col];
    out.eigenvalues[col] = diag[src];
    int peak = 0;
    double peak_mag = -1.0;
    for (int k = 0; k < n; ++k)
      if (std::fabs(q(k, src)) > peak_mag) {
        peak_mag = std::fabs(q(k, src));
        peak = k;
      }
    const double flip = q(peak, src) < 0.0 ? -1.0 : 1.0;
    for (int k = 0; k < n; ++k) out.eigenvectors(k, col) = flip * q(k, src);
  }
  return out;
}

}  // namespace sargtr
