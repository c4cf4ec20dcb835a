#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sargtr/autodiff.hpp"
#include "sargtr/tensor.hpp"

namespace sargtr {

// One attributed scattering center: amplitude, frequency-dependence code,
// length, orientation, aspect dependence, and 2-D position in meters.
struct ScatteringCenter {
  double amplitude = 0.0;  // linear magnitude, ≥ 0
  double alpha = 0.0;      // discrete mechanism code
  double length = 0.0;     // meters, ≥ 0
  double phi = 0.0;        // orientation, radians
  double gamma = 0.0;      // aspect dependence
  double x = 0.0;          // range position, meters
  double y = 0.0;          // cross-range position, meters
};

// Feature column layout shared by ScatterGraph::features and the dataset format.
enum FeatureColumn : int {
  kColAmplitude = 0,
  kColAlpha = 1,
  kColLength = 2,
  kColPhi = 3,
  kColGamma = 4,
  kColX = 5,
  kColY = 6,
};
inline constexpr int kFeatureCount = 7;

inline void validate(const ScatteringCenter& c) {
  const double fields[] = {c.amplitude, c.alpha, c.length, c.phi, c.gamma, c.x, c.y};
  for (double f : fields)
    if (!std::isfinite(f))
      throw std::invalid_argument("ScatteringCenter: non-finite field");
  if (c.amplitude < 0.0) throw std::invalid_argument("ScatteringCenter: amplitude < 0");
  if (c.length < 0.0) throw std::invalid_argument("ScatteringCenter: length < 0");
}

// Permitted discrete alpha values plus a bucket for anything else.
struct DiscreteCodebook {
  std::vector<double> values;  // strictly increasing
  int unknown_index = 0;
  bool strict = false;

  int index_count() const { return static_cast<int>(values.size()) + 1; }

  void validate() const {
    if (values.empty()) throw std::invalid_argument("DiscreteCodebook: empty");
    for (std::size_t i = 1; i < values.size(); ++i)
      if (!(values[i] > values[i - 1]))
        throw std::invalid_argument("DiscreteCodebook: values not strictly increasing");
  }

  // Canonical half-integer levels; index 5 absorbs out-of-codebook estimates.
  static DiscreteCodebook standard() {
    return DiscreteCodebook{{-1.0, -0.5, 0.0, 0.5, 1.0}, 5, false};
  }
};

// Position of the nearest codebook value within 1e−9, else the unknown
// bucket (or an error in strict mode).
inline int alpha_to_index(double alpha, const DiscreteCodebook& cb) {
  cb.validate();
  for (std::size_t i = 0; i < cb.values.size(); ++i)
    if (std::fabs(alpha - cb.values[i]) <= 1e-9) return static_cast<int>(i);
  if (cb.strict) throw std::invalid_argument("alpha_to_index: alpha not in codebook");
  return cb.unknown_index;
}

// Weighted undirected graph over scattering centers. build_graph produces the
// fully connected form; sparse instances appear only in test harnesses.
struct ScatterGraph {
  int node_count = 0;
  Tensor features;                         // K×7, row per center
  std::vector<std::pair<int, int>> edges;  // unordered, first < second
  std::vector<double> weights;             // per edge, in (0, 1]
  double sigma_d = 0.0;                    // kernel bandwidth, meters

  void validate() const {
    if (node_count < 2) throw std::invalid_argument("ScatterGraph: fewer than 2 nodes");
    const std::size_t expect =
        static_cast<std::size_t>(node_count) * (node_count - 1) / 2;
    if (edges.size() != expect)
      throw std::invalid_argument("ScatterGraph: not fully connected");
    if (weights.size() != edges.size())
      throw std::invalid_argument("ScatterGraph: weight/edge count mismatch");
    for (const auto& [i, j] : edges)
      if (i < 0 || j >= node_count || i >= j)
        throw std::invalid_argument("ScatterGraph: bad edge endpoints");
    for (double w : weights)
      if (!(w > 0.0 && w <= 1.0))
        throw std::invalid_argument("ScatterGraph: weight outside (0,1]");
  }
};

namespace detail {
inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

// Fully connected graph with Gaussian-kernel edge weights
// ω_ij = exp(−‖p_i−p_j‖² / 2σ_d²). With no bandwidth given, σ_d is the median
// pairwise distance (falling back to the mean positive distance, then 1.0,
// when the median degenerates to zero).
inline ScatterGraph build_graph(std::span<const ScatteringCenter> centers,
                                std::optional<double> sigma_d = std::nullopt) {
  const int k = static_cast<int>(centers.size());
  if (k < 2) throw std::invalid_argument("build_graph: need at least 2 centers");
  for (const auto& c : centers) validate(c);
  if (sigma_d && !(*sigma_d > 0.0))
    throw std::invalid_argument("build_graph: sigma_d must be positive");

  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(k) * (k - 1) / 2);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      const double dx = centers[i].x - centers[j].x;
      const double dy = centers[i].y - centers[j].y;
      dist.push_back(std::sqrt(dx * dx + dy * dy));
    }

  double sigma;
  if (sigma_d) {
    sigma = *sigma_d;
  } else {
    sigma = detail::median(dist);
    if (!(sigma > 0.0)) {
      double sum = 0.0;
      std::size_t positive = 0;
      for (double d : dist)
        if (d > 0.0) {
          sum += d;
          ++positive;
        }
      sigma = positive > 0 ? sum / static_cast<double>(positive) : 1.0;
    }
  }

  ScatterGraph g;
  g.node_count = k;
  g.sigma_d = sigma;
  g.features = Tensor(k, kFeatureCount);
  for (int i = 0; i < k; ++i) {
    g.features(i, kColAmplitude) = centers[i].amplitude;
    g.features(i, kColAlpha) = centers[i].alpha;
    g.features(i, kColLength) = centers[i].length;
    g.features(i, kColPhi) = centers[i].phi;
    g.features(i, kColGamma) = centers[i].gamma;
    g.features(i, kColX) = centers[i].x;
    g.features(i, kColY) = centers[i].y;
  }
  std::size_t e = 0;
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      g.edges.emplace_back(i, j);
      const double d = dist[e++];
      // clamp keeps ω strictly positive when exp underflows
      g.weights.push_back(std::max(std::exp(-d * d / (2.0 * sigma * sigma)), 1e-300));
    }
  return g;
}

// Relabel node k as perm[k]; edge weights follow their endpoints.
inline ScatterGraph permute_graph(const ScatterGraph& g, std::span<const int> perm) {
  if (perm.size() != static_cast<std::size_t>(g.node_count))
    throw std::invalid_argument("permute_graph: perm size mismatch");
  std::vector<bool> seen(g.node_count, false);
  for (int p : perm) {
    if (p < 0 || p >= g.node_count || seen[p])
      throw std::invalid_argument("permute_graph: perm is not a bijection");
    seen[p] = true;
  }
  ScatterGraph out;
  out.node_count = g.node_count;
  out.sigma_d = g.sigma_d;
  out.features = Tensor(g.node_count, g.features.cols());
  for (int r = 0; r < g.node_count; ++r)
    for (std::size_t c = 0; c < g.features.cols(); ++c)
      out.features(perm[r], c) = g.features(r, c);

  // re-sort relabeled edges into canonical (first < second) order
  std::vector<std::pair<std::pair<int, int>, double>> relabeled;
  relabeled.reserve(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    int a = perm[g.edges[e].first];
    int b = perm[g.edges[e].second];
    if (a > b) std::swap(a, b);
    relabeled.push_back({{a, b}, g.weights[e]});
  }
  std::sort(relabeled.begin(), relabeled.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  for (const auto& [edge, w] : relabeled) {
    out.edges.push_back(edge);
    out.weights.push_back(w);
  }
  return out;
}

// Both directions of every undirected edge, ordered center-major so each
// node's in-neighborhood is contiguous. dst is the center node.
struct DirectedEdges {
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<int> undirected_id;  // index into ScatterGraph::edges
  ad::SegmentIndex by_center;      // segment id = dst

  std::size_t count() const { return src.size(); }
};

inline DirectedEdges directed_edges(const ScatterGraph& g) {
  std::vector<std::vector<std::pair<int, int>>> incoming(g.node_count);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& [i, j] = g.edges[e];
    incoming[j].push_back({i, static_cast<int>(e)});
    incoming[i].push_back({j, static_cast<int>(e)});
  }
  DirectedEdges de;
  de.by_center.segment_count = g.node_count;
  for (int center = 0; center < g.node_count; ++center) {
    std::sort(incoming[center].begin(), incoming[center].end());
    for (const auto& [nbr, eid] : incoming[center]) {
      de.src.push_back(nbr);
      de.dst.push_back(center);
      de.undirected_id.push_back(eid);
      de.by_center.segment_of.push_back(center);
    }
  }
  return de;
}

}  // namespace sargtr
