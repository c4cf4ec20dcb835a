#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "sargtr/asc.hpp"
#include "sargtr/encodings.hpp"
#include "sargtr/rng.hpp"

using namespace sargtr;

namespace {

// Sparse graphs for spectral/walk harness tests; build_graph never produces
// these, so they are assembled by hand.
ScatterGraph harness_graph(int k, std::vector<std::pair<int, int>> edges,
                           std::vector<double> weights) {
  ScatterGraph g;
  g.node_count = k;
  g.features = Tensor(k, kFeatureCount);
  g.edges = std::move(edges);
  g.weights = std::move(weights);
  g.sigma_d = 1.0;
  return g;
}

ScatterGraph random_complete_graph(int k, Rng& rng) {
  std::vector<ScatteringCenter> cs;
  for (int i = 0; i < k; ++i) {
    ScatteringCenter c;
    c.amplitude = 1.0;
    c.x = rng.uniform(-2, 2);
    c.y = rng.uniform(-2, 2);
    cs.push_back(c);
  }
  return build_graph(cs);
}

}  // namespace

TEST_CASE("gne on the uniform complete triangle") {
  ScatterGraph g = harness_graph(3, {{0, 1}, {0, 2}, {1, 2}}, {1.0, 1.0, 1.0});
  Tensor enc = gne(g, 1);
  for (int r = 0; r < 3; ++r)
    CHECK(enc(r, 0) == Catch::Approx(1.0 / std::sqrt(3.0)).margin(1e-10));
}

TEST_CASE("gne pads columns beyond K with zeros") {
  // P4 has simple spectrum {0, 0.5, 1.5, 2}; ask for K+2 columns
  ScatterGraph g = harness_graph(4, {{0, 1}, {1, 2}, {2, 3}}, {1, 1, 1});
  Tensor enc = gne(g, 6);
  REQUIRE(enc.cols() == 6);
  for (int r = 0; r < 4; ++r) {
    CHECK(enc(r, 4) == 0.0);
    CHECK(enc(r, 5) == 0.0);
  }
  // all four informative columns present for a simple spectrum
  for (int c = 0; c < 4; ++c) {
    double norm = 0.0;
    for (int r = 0; r < 4; ++r) norm += enc(r, c) * enc(r, c);
    CHECK(norm == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("gne zeroes eigenvector columns of degenerate clusters") {
  // complete graphs of K ≥ 3 have a (K-1)-fold eigenvalue, so only the
  // constant eigenvector survives; this keeps the encoding independent of
  // node labeling
  Rng rng(43);
  ScatterGraph g = random_complete_graph(5, rng);
  Tensor enc = gne(g, 5);
  for (int r = 0; r < 5; ++r) {
    CHECK(enc(r, 0) == Catch::Approx(1.0 / std::sqrt(5.0)).margin(1e-10));
    for (int c = 1; c < 5; ++c) CHECK(enc(r, c) == 0.0);
  }
}

TEST_CASE("gne rows permute with nodes on a simple-spectrum graph") {
  // automorphism-free 6-node graph: simple spectrum and no magnitude ties,
  // so the sign gauge resolves identically before and after relabeling
  ScatterGraph g = harness_graph(
      6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {2, 5}},
      {1, 1, 1, 1, 1, 1, 1});
  Tensor enc = gne(g, 6);
  std::vector<int> perm = {4, 2, 5, 0, 3, 1};
  ScatterGraph pg = permute_graph(g, perm);
  Tensor penc = gne(pg, 6);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c)
      CHECK(penc(perm[r], c) == Catch::Approx(enc(r, c)).margin(1e-9));
}

TEST_CASE("Laplacian eigenvalue multiset is permutation invariant") {
  Rng rng(47);
  ScatterGraph g = harness_graph(
      5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 4}},
      {0.9, 0.4, 0.7, 0.2, 0.5, 0.8});
  std::vector<int> perm = {4, 2, 0, 1, 3};
  ScatterGraph pg = permute_graph(g, perm);
  auto ev_a = eigendecompose_symmetric(normalized_laplacian(g)).eigenvalues;
  auto ev_b = eigendecompose_symmetric(normalized_laplacian(pg)).eigenvalues;
  for (std::size_t i = 0; i < ev_a.size(); ++i)
    CHECK(ev_a[i] == Catch::Approx(ev_b[i]).margin(1e-10));
}

TEST_CASE("stationary distribution sums to one") {
  SECTION("dyadic weights sum exactly") {
    ScatterGraph g = harness_graph(3, {{0, 1}, {0, 2}, {1, 2}}, {1.0, 1.0, 2.0});
    auto pi = stationary_distribution(g);
    CHECK(pi[0] == 0.25);
    CHECK(pi[1] == 0.375);
    CHECK(pi[2] == 0.375);
    CHECK(pi[0] + pi[1] + pi[2] == 1.0);
  }
  SECTION("random weights sum within 1e-12") {
    Rng rng(53);
    for (int trial = 0; trial < 10; ++trial) {
      ScatterGraph g = random_complete_graph(3 + static_cast<int>(rng.below(6)), rng);
      auto pi = stationary_distribution(g);
      const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
      CHECK(std::fabs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("closed-form edge encoding") {
  SECTION("uniform weights on K4 give 1/6 per edge") {
    ScatterGraph g = harness_graph(
        4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, std::vector<double>(6, 0.42));
    auto enc = epe_closed_form(g);
    for (double v : enc) CHECK(v == Catch::Approx(1.0 / 6.0).margin(1e-14));
  }
  SECTION("weights {1,1,2} normalize to {0.25,0.25,0.5}") {
    ScatterGraph g = harness_graph(3, {{0, 1}, {0, 2}, {1, 2}}, {1.0, 1.0, 2.0});
    auto enc = epe_closed_form(g);
    CHECK(enc[0] == 0.25);
    CHECK(enc[1] == 0.25);
    CHECK(enc[2] == 0.5);
  }
  SECTION("sums to one and stays strictly positive") {
    Rng rng(59);
    for (int trial = 0; trial < 10; ++trial) {
      ScatterGraph g = random_complete_graph(3 + static_cast<int>(rng.below(6)), rng);
      auto enc = epe_closed_form(g);
      double total = 0.0;
      for (double v : enc) {
        CHECK(v > 0.0);
        total += v;
      }
      CHECK(std::fabs(total - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("expected visit counts expose both count conventions") {
  ScatterGraph g = harness_graph(3, {{0, 1}, {0, 2}, {1, 2}}, {1.0, 1.0, 2.0});
  // W = 4; edge 2: N_w l_w ω/W = 100·10·2/4 = 500 per-step, 250 halved
  CHECK(expected_visit_count(g, 2, 100, 10) == Catch::Approx(500.0));
  CHECK(expected_visit_count(g, 2, 100, 10, CountConvention::kHalved) ==
        Catch::Approx(250.0));
}

TEST_CASE("epe_simulate on a single edge gives frequency exactly 1") {
  ScatterGraph g = harness_graph(2, {{0, 1}}, {0.73});
  WalkStats stats = epe_simulate(g, 50, 4, 99);
  CHECK(stats.total_steps == 200);
  CHECK(stats.normalized()[0] == 1.0);
}

TEST_CASE("epe_simulate is deterministic and conserves step counts") {
  Rng rng(61);
  ScatterGraph g = random_complete_graph(5, rng);
  WalkStats a = epe_simulate(g, 500, 20, 1234);
  WalkStats b = epe_simulate(g, 500, 20, 1234);
  CHECK(a.edge_visits == b.edge_visits);
  CHECK(a.start_nodes == b.start_nodes);
  CHECK(a.total_steps == 500 * 20);
  std::uint64_t sum = 0;
  for (auto v : a.edge_visits) sum += v;
  CHECK(sum == a.total_steps);
  WalkStats c = epe_simulate(g, 500, 20, 1235);
  CHECK(a.edge_visits != c.edge_visits);
}

TEST_CASE("walk start nodes follow the stationary distribution") {
  Rng rng(73);
  ScatterGraph g = random_complete_graph(5, rng);
  const auto pi = stationary_distribution(g);
  WalkStats stats = epe_simulate(g, 100000, 1, 3);
  std::vector<double> freq(g.node_count, 0.0);
  for (int s : stats.start_nodes) freq[s] += 1.0 / 100000.0;
  for (int i = 0; i < g.node_count; ++i)
    CHECK(freq[i] == Catch::Approx(pi[i]).margin(0.01));
}

TEST_CASE("uniform triangle converges to 1/3 per edge at 1e6 steps") {
  ScatterGraph g = harness_graph(3, {{0, 1}, {0, 2}, {1, 2}}, {1.0, 1.0, 1.0});
  WalkStats stats = epe_simulate(g, 10000, 100, 7);
  auto freq = stats.normalized();
  for (double v : freq) CHECK(v == Catch::Approx(1.0 / 3.0).margin(0.01));
}

TEST_CASE("simulation tracks the closed form on a random weighted K6") {
  Rng rng(67);
  ScatterGraph g = random_complete_graph(6, rng);
  WalkStats stats = epe_simulate(g, 100000, 10, 11);
  auto freq = stats.normalized();
  auto exact = epe_closed_form(g);
  double worst = 0.0;
  for (std::size_t e = 0; e < exact.size(); ++e)
    worst = std::max(worst, std::fabs(freq[e] - exact[e]) / exact[e]);
  INFO("max relative deviation " << worst);
  CHECK(worst <= 0.03);
}

TEST_CASE("epe_update_local") {
  Rng rng(71);
  SECTION("empty change set returns the stats unchanged") {
    ScatterGraph g = random_complete_graph(4, rng);
    WalkStats stats = epe_simulate(g, 200, 10, 5);
    WalkStats updated = epe_update_local(stats, g, std::vector<int>{});
    CHECK(updated.edge_visits == stats.edge_visits);
  }
  SECTION("one changed edge on K3 falls back to a full resimulation") {
    ScatterGraph g = harness_graph(3, {{0, 1}, {0, 2}, {1, 2}}, {1.0, 1.0, 1.0});
    WalkStats stats = epe_simulate(g, 40000, 25, 13);
    ScatterGraph changed = g;
    changed.weights[2] = 2.0;  // doubled
    WalkStats updated = epe_update_local(stats, changed, std::vector<int>{2});
    auto freq = updated.normalized();
    auto exact = epe_closed_form(changed);
    for (std::size_t e = 0; e < exact.size(); ++e)
      CHECK(std::fabs(freq[e] - exact[e]) / exact[e] <= 0.03);
  }
  SECTION("all edges changed reproduces a fresh simulation bit for bit") {
    ScatterGraph g = random_complete_graph(5, rng);
    WalkStats stats = epe_simulate(g, 300, 15, 17);
    ScatterGraph changed = g;
    for (double& w : changed.weights) w *= 0.5;
    std::vector<int> all(changed.weights.size());
    std::iota(all.begin(), all.end(), 0);
    WalkStats updated = epe_update_local(stats, changed, all);
    WalkStats fresh = epe_simulate(changed, 300, 15, 17);
    CHECK(updated.edge_visits == fresh.edge_visits);
    CHECK(updated.start_nodes == fresh.start_nodes);
  }
  SECTION("stats/graph mismatch is rejected") {
    ScatterGraph g = random_complete_graph(4, rng);
    WalkStats stats = epe_simulate(g, 100, 5, 3);
    ScatterGraph other = random_complete_graph(5, rng);
    CHECK_THROWS_AS(epe_update_local(stats, other, std::vector<int>{0}),
                    std::invalid_argument);
  }
  SECTION("partial update replays exactly the walks near the change") {
    // sparse path where most stationary mass sits far from the changed edge,
    // so the selective path (no fallback) is exercised
    ScatterGraph g = harness_graph(
        5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, {0.1, 0.1, 1.0, 1.0});
    WalkStats stats = epe_simulate(g, 2000, 8, 23);
    ScatterGraph changed = g;
    changed.weights[0] = 0.4;
    WalkStats updated = epe_update_local(stats, changed, std::vector<int>{0});

    // oracle: walks starting within one hop of {0,1} (nodes 0,1,2) replayed
    // on the new weights, all others keep their old paths
    std::vector<std::uint64_t> expect(g.edges.size(), 0);
    const auto old_adj = detail::walk_adjacency(g, g.weights);
    const auto new_adj = detail::walk_adjacency(changed, changed.weights);
    for (std::uint64_t wk = 0; wk < stats.walk_count; ++wk) {
      const int start = stats.start_nodes[wk];
      const bool affected = start <= 2;
      detail::run_walk(affected ? new_adj : old_adj, start, stats.walk_length,
                       stats.seed, wk, expect, +1);
    }
    CHECK(updated.edge_visits == expect);
  }
}
