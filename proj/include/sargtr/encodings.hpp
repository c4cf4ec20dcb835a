#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "sargtr/asc.hpp"
#include "sargtr/rng.hpp"
#include "sargtr/spectral.hpp"
#include "sargtr/tensor.hpp"

namespace sargtr {

// Global node encoding: row k holds node k's components of the eigenvectors
// belonging to the n smallest eigenvalues of the unweighted normalized
// Laplacian. Columns past K are zero-padded so the width stays constant
// across graphs of different size.
//
// Eigenvectors inside a repeated eigenvalue (gap ≤ 1e−6) are an arbitrary
// basis of their eigenspace and carry node-order noise rather than structure;
// those columns are emitted as zero. This keeps the encoding — and everything
// downstream — invariant under node relabeling, which matters because the
// fully connected topology is maximally degenerate.
inline Tensor gne(const ScatterGraph& g, int n) {
  if (n < 1) throw std::invalid_argument("gne: n must be ≥ 1");
  const SpectralDecomposition dec =
      eigendecompose_symmetric(normalized_laplacian(g));
  const int k = g.node_count;
  constexpr double kGapTol = 1e-6;

  Tensor enc(k, n);
  int col = 0;
  while (col < std::min(n, k)) {
    int cluster_end = col + 1;
    while (cluster_end < k &&
           dec.eigenvalues[cluster_end] - dec.eigenvalues[cluster_end - 1] <= kGapTol)
      ++cluster_end;
    if (cluster_end - col == 1) {
      for (int r = 0; r < k; ++r) enc(r, col) = dec.eigenvectors(r, col);
    }
    // degenerate cluster: leave its columns zero
    col = cluster_end;
  }
  return enc;
}

// π_i = d_i / 2W with weighted degree d_i; sums to 1 by construction.
inline std::vector<double> stationary_distribution(const ScatterGraph& g) {
  std::vector<double> degree(g.node_count, 0.0);
  double total = 0.0;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    degree[g.edges[e].first] += g.weights[e];
    degree[g.edges[e].second] += g.weights[e];
    total += 2.0 * g.weights[e];
  }
  if (!(total > 0.0))
    throw std::invalid_argument("stationary_distribution: zero total weight");
  for (double& d : degree) d /= total;
  return degree;
}

// Closed-form edge position encoding: ω_ij / Σω over unordered edges.
inline std::vector<double> epe_closed_form(const ScatterGraph& g) {
  if (g.node_count < 2) throw std::invalid_argument("epe_closed_form: K < 2");
  double total = 0.0;
  for (double w : g.weights) total += w;
  std::vector<double> enc(g.weights.size());
  for (std::size_t e = 0; e < g.weights.size(); ++e) enc[e] = g.weights[e] / total;
  return enc;
}

// Which side of the factor-2 bookkeeping to use for raw expected counts; the
// normalized encoding is identical either way.
enum class CountConvention {
  kPerStep,  // E[count] = N_w·l_w·ω/W  (every step traverses one edge)
  kHalved,   // E[count] = N_w·l_w·ω/2W
};

inline double expected_visit_count(const ScatterGraph& g, std::size_t edge,
                                   std::uint64_t n_walks, std::uint64_t walk_length,
                                   CountConvention conv = CountConvention::kPerStep) {
  double total = 0.0;
  for (double w : g.weights) total += w;
  const double base = static_cast<double>(n_walks) * static_cast<double>(walk_length) *
                      g.weights[edge] / total;
  return conv == CountConvention::kPerStep ? base : 0.5 * base;
}

// Accumulated statistics of a batch of weighted random walks. Start nodes and
// the weight state are retained so later local updates can replay exactly the
// walks that a weight change invalidated.
struct WalkStats {
  std::vector<std::uint64_t> edge_visits;  // per unordered edge
  std::uint64_t total_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t walk_count = 0;   // N_w
  std::uint64_t walk_length = 0;  // l_w
  std::vector<int> start_nodes;   // per walk
  std::vector<double> sim_weights;  // weights the walks were sampled under

  std::vector<double> normalized() const {
    std::vector<double> freq(edge_visits.size());
    if (total_steps == 0) return freq;
    for (std::size_t e = 0; e < edge_visits.size(); ++e)
      freq[e] = static_cast<double>(edge_visits[e]) / static_cast<double>(total_steps);
    return freq;
  }
};

namespace detail {

struct WalkAdjacency {
  // per node: (neighbor, undirected edge id, weight)
  std::vector<std::vector<int>> nbr;
  std::vector<std::vector<int>> edge_id;
  std::vector<std::vector<double>> w;
};

inline WalkAdjacency walk_adjacency(const ScatterGraph& g,
                                    std::span<const double> weights) {
  WalkAdjacency adj;
  adj.nbr.resize(g.node_count);
  adj.edge_id.resize(g.node_count);
  adj.w.resize(g.node_count);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& [i, j] = g.edges[e];
    adj.nbr[i].push_back(j);
    adj.edge_id[i].push_back(static_cast<int>(e));
    adj.w[i].push_back(weights[e]);
    adj.nbr[j].push_back(i);
    adj.edge_id[j].push_back(static_cast<int>(e));
    adj.w[j].push_back(weights[e]);
  }
  return adj;
}

// One walk with its own substream; adds (sign = +1) or removes (sign = −1)
// its edge traversals. The stream is a pure function of (seed, walk index),
// so replaying with the same weights reproduces the identical path.
inline void run_walk(const WalkAdjacency& adj, int start, std::uint64_t length,
                     std::uint64_t seed, std::uint64_t walk_index,
                     std::vector<std::uint64_t>& visits, int sign) {
  Rng rng = Rng::substream(seed, walk_index);
  int node = start;
  for (std::uint64_t s = 0; s < length; ++s) {
    if (adj.nbr[node].empty()) break;  // dead end possible only in sparse harness graphs
    const std::size_t pick = rng.sample_discrete(adj.w[node]);
    const int eid = adj.edge_id[node][pick];
    if (sign > 0)
      ++visits[eid];
    else
      --visits[eid];
    node = adj.nbr[node][pick];
  }
}

}  // namespace detail

// N_w walks of l_w steps; start nodes drawn from the stationary distribution,
// each step moves to a neighbor with probability ω_ij/Σ_k ω_ik. Traversals
// are counted per unordered edge. Fully deterministic for a fixed seed.
inline WalkStats epe_simulate(const ScatterGraph& g, std::uint64_t n_walks,
                              std::uint64_t walk_length, std::uint64_t seed) {
  if (n_walks < 1 || walk_length < 1)
    throw std::invalid_argument("epe_simulate: need N_w ≥ 1 and l_w ≥ 1");
  const std::vector<double> pi = stationary_distribution(g);
  const detail::WalkAdjacency adj = detail::walk_adjacency(g, g.weights);

  WalkStats stats;
  stats.edge_visits.assign(g.edges.size(), 0);
  stats.seed = seed;
  stats.walk_count = n_walks;
  stats.walk_length = walk_length;
  stats.sim_weights = g.weights;
  stats.start_nodes.resize(n_walks);

  Rng start_rng = Rng::substream(seed, 0xFFFFFFFFFFFFFFFFull);
  for (std::uint64_t wk = 0; wk < n_walks; ++wk)
    stats.start_nodes[wk] = static_cast<int>(start_rng.sample_discrete(pi));

  for (std::uint64_t wk = 0; wk < n_walks; ++wk)
    detail::run_walk(adj, stats.start_nodes[wk], walk_length, seed, wk,
                     stats.edge_visits, +1);
  std::uint64_t total = 0;
  for (std::uint64_t v : stats.edge_visits) total += v;
  stats.total_steps = total;
  return stats;
}

// Refresh statistics after edge-weight changes by replaying only walks whose
// start node is within one hop of a changed edge. If more than half of the
// starts qualify — always the case on fully connected graphs — a full
// resimulation with the original seed is cheaper and exact, so fall back.
inline WalkStats epe_update_local(const WalkStats& stats, const ScatterGraph& g,
                                  std::span<const int> changed_edges) {
  if (stats.sim_weights.size() != g.weights.size() ||
      stats.edge_visits.size() != g.edges.size() ||
      stats.start_nodes.size() != stats.walk_count)
    throw std::invalid_argument("epe_update_local: stats/graph mismatch");
  for (int s : stats.start_nodes)
    if (s < 0 || s >= g.node_count)
      throw std::invalid_argument("epe_update_local: start node out of range");
  for (int e : changed_edges)
    if (e < 0 || e >= static_cast<int>(g.edges.size()))
      throw std::invalid_argument("epe_update_local: changed edge out of range");
  if (changed_edges.empty()) return stats;

  std::vector<bool> endpoint(g.node_count, false);
  for (int e : changed_edges) {
    endpoint[g.edges[e].first] = true;
    endpoint[g.edges[e].second] = true;
  }
  std::vector<bool> near_change = endpoint;
  for (const auto& [i, j] : g.edges) {
    if (endpoint[i]) near_change[j] = true;
    if (endpoint[j]) near_change[i] = true;
  }

  std::uint64_t affected = 0;
  for (int start : stats.start_nodes)
    if (near_change[start]) ++affected;

  if (2 * affected > stats.walk_count)
    return epe_simulate(g, stats.walk_count, stats.walk_length, stats.seed);

  WalkStats out = stats;
  out.sim_weights = g.weights;
  const detail::WalkAdjacency old_adj = detail::walk_adjacency(g, stats.sim_weights);
  const detail::WalkAdjacency new_adj = detail::walk_adjacency(g, g.weights);
  for (std::uint64_t wk = 0; wk < stats.walk_count; ++wk) {
    if (!near_change[stats.start_nodes[wk]]) continue;
    detail::run_walk(old_adj, stats.start_nodes[wk], stats.walk_length, stats.seed,
                     wk, out.edge_visits, -1);
    detail::run_walk(new_adj, stats.start_nodes[wk], stats.walk_length, stats.seed,
                     wk, out.edge_visits, +1);
  }
  std::uint64_t total = 0;
  for (std::uint64_t v : out.edge_visits) total += v;
  out.total_steps = total;
  return out;
}

}  // namespace sargtr
