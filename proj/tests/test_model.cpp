#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "naive_model.hpp"
#include "sargtr/gradcheck.hpp"
#include "sargtr/model.hpp"
#include "sargtr/rng.hpp"

using namespace sargtr;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.d_n = 8;
  cfg.d_e = 4;
  cfg.d_h = 4;
  cfg.heads = 2;
  cfg.mpm_layers = 1;
  cfg.transformer_layers = 1;
  cfg.gne_n = 4;
  cfg.dvm_dim = 4;
  cfg.class_count = 3;
  cfg.stats.present = true;
  cfg.stats.sdev.fill(1.0);
  return cfg;
}

std::vector<ScatteringCenter> random_centers(int k, Rng& rng) {
  std::vector<ScatteringCenter> cs;
  const double alphas[5] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int i = 0; i < k; ++i) {
    ScatteringCenter c;
    c.amplitude = rng.uniform(0.2, 2.0);
    c.alpha = alphas[rng.below(5)];
    c.length = rng.uniform(0.0, 0.4);
    c.phi = rng.uniform(-1.5, 1.5);
    c.gamma = rng.uniform(-0.1, 0.1);
    c.x = rng.uniform(-3, 3);
    c.y = rng.uniform(-3, 3);
    cs.push_back(c);
  }
  return cs;
}

CompiledGraph random_compiled(int k, const ModelConfig& cfg, Rng& rng, int label = 0) {
  auto cs = random_centers(k, rng);
  return compile_graph(build_graph(cs), cfg, label);
}

// Rebuilds a ParamVars whose non-empty slots take the given flat var list, in
// the same order named_params() reports tensors.
ParamVars vars_from_flat(const ModelConfig& cfg, ModelParams& params,
                         const std::vector<ad::Var>& vars) {
  ParamVars pv;
  pv.mpm.resize(cfg.mpm_layers);
  pv.transformer.resize(cfg.transformer_layers);
  for (auto& l : pv.transformer) l.heads.resize(cfg.heads);
  std::vector<ad::Var*> slots;
  visit_params(pv, [&](const std::string&, ad::Var& slot) { slots.push_back(&slot); });
  std::vector<Tensor*> tensors;
  visit_params(params, [&](const std::string&, Tensor& t) { tensors.push_back(&t); });
  std::size_t next = 0;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!tensors[i]->empty()) *slots[i] = vars[next++];
  return pv;
}

}  // namespace

TEST_CASE("dvm embedding") {
  ModelConfig cfg = small_config();
  ModelParams params = init_params(cfg, 7);

  SECTION("identical alpha indices give identical rows") {
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, cfg);
    ad::Var emb = dvm_embed({2, 2, 0}, pv);
    const Tensor& v = tape.value(emb);
    for (int c = 0; c < cfg.dvm_dim; ++c) CHECK(v(0, c) == v(1, c));
  }
  SECTION("zero table gives zero embeddings") {
    ModelParams zero = params;
    zero.W_alpha_embed.fill(0.0);
    ad::Tape tape;
    ParamVars pv = bind_params(tape, zero, cfg);
    ad::Var emb = dvm_embed({0, 3}, pv);
    for (std::size_t i = 0; i < tape.value(emb).size(); ++i)
      CHECK(tape.value(emb)[i] == 0.0);
  }
  SECTION("gradient touches only the rows whose index appears") {
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, cfg);
    ad::Var emb = dvm_embed({1, 4, 1}, pv);
    tape.backward(ad::sum_all(emb));
    const Tensor& g = tape.grad(pv.W_alpha_embed);
    for (int r = 0; r < cfg.codebook.index_count(); ++r) {
      double rownorm = 0.0;
      for (int c = 0; c < cfg.dvm_dim; ++c) rownorm += std::fabs(g(r, c));
      if (r == 1 || r == 4)
        CHECK(rownorm > 0.0);
      else
        CHECK(rownorm == 0.0);
    }
  }
  SECTION("out-of-range index is rejected") {
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, cfg);
    CHECK_THROWS_AS(dvm_embed({99}, pv), std::out_of_range);
  }
}

TEST_CASE("init_embeddings") {
  ModelConfig cfg = small_config();
  Rng rng(103);
  ModelParams params = init_params(cfg, 11);

  SECTION("missing stats are an error") {
    ModelConfig nostats = cfg;
    nostats.stats.present = false;
    CompiledGraph cg = random_compiled(4, cfg, rng);
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, nostats);
    CHECK_THROWS_AS(init_embeddings(tape, cg, nostats, pv), std::invalid_argument);
  }
  SECTION("zero-padded gne columns cannot influence the embedding") {
    // K=3 < gne_n=4, so the last gne column is padding; the projection rows
    // it feeds are unreachable and mangling them must not change H
    CompiledGraph cg = random_compiled(3, cfg, rng);
    ad::Tape t1;
    ParamVars pv1 = bind_params(t1, params, cfg);
    Tensor h1 = t1.value(init_embeddings(t1, cg, cfg, pv1).nodes);

    ModelParams mangled = params;
    const int pad_row = cfg.node_input_width() - 1;
    for (int c = 0; c < cfg.d_n; ++c) mangled.W_node_in(pad_row, c) = 1e6;
    ad::Tape t2;
    ParamVars pv2 = bind_params(t2, mangled, cfg);
    Tensor h2 = t2.value(init_embeddings(t2, cg, cfg, pv2).nodes);
    CHECK(max_abs_diff(h1, h2) == 0.0);
  }
  SECTION("identical nodes get identical embedding rows") {
    std::vector<ScatteringCenter> cs = random_centers(3, rng);
    cs.push_back(cs[0]);  // duplicate of node 0
    CompiledGraph cg = compile_graph(build_graph(cs, 1.0), cfg, 0);
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, cfg);
    const Tensor h = tape.value(init_embeddings(tape, cg, cfg, pv).nodes);
    // features coincide and complete-graph gne rows are equal
    for (int c = 0; c < cfg.d_n; ++c)
      CHECK(h(0, c) == Catch::Approx(h(3, c)).margin(1e-12));
  }
}

TEST_CASE("mpm layer") {
  ModelConfig cfg = small_config();
  Rng rng(107);
  ModelParams params = init_params(cfg, 13);

  SECTION("zero edge-update matrix freezes the edges exactly") {
    ModelParams frozen = params;
    frozen.mpm[0].W_edge_update.fill(0.0);
    CompiledGraph cg = random_compiled(4, cfg, rng);
    ad::Tape tape;
    ParamVars pv = bind_params(tape, frozen, cfg);
    Embeddings emb = init_embeddings(tape, cg, cfg, pv);
    Embeddings out = mpm_layer(cg, cfg, pv.mpm[0], emb);
    CHECK(max_abs_diff(tape.value(emb.edges), tape.value(out.edges)) == 0.0);
  }
  SECTION("single neighbor reduces to the aggregate map") {
    CompiledGraph cg = random_compiled(2, cfg, rng);
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, cfg);
    Embeddings emb = init_embeddings(tape, cg, cfg, pv);
    ForwardTrace trace;
    Embeddings out = mpm_layer(cg, cfg, pv.mpm[0], emb, "mpm.0", &trace);
    REQUIRE(trace.attention.size() == 1);
    const Tensor& att = tape.value(trace.attention[0].weights);
    CHECK(att[0] == 1.0);
    CHECK(att[1] == 1.0);
    const Tensor& h = tape.value(emb.nodes);
    const Tensor& hp = tape.value(out.nodes);
    for (int c = 0; c < cfg.d_n; ++c) {
      double expect = 0.0;  // h'_0 = W_aggregate h_1 for the lone neighbor
      for (int d = 0; d < cfg.d_n; ++d)
        expect += h(1, d) * params.mpm[0].W_aggregate(d, c);
      CHECK(hp(0, c) == Catch::Approx(expect).margin(1e-13));
    }
  }
}

TEST_CASE("forward pass matches the scalar-loop recomputation") {
  ModelConfig cfg = small_config();
  Rng rng(109);
  for (int k : {2, 4, 5, 9}) {
    ModelParams params = init_params(cfg, 1000 + k);
    CompiledGraph cg = random_compiled(k, cfg, rng);
    Tensor got = forward_logits(cg, cfg, params);
    std::vector<double> expect = naive::logits(cg, cfg, params);
    for (int c = 0; c < cfg.class_count; ++c)
      CHECK(got(0, c) == Catch::Approx(expect[c]).margin(1e-12));
  }
}

TEST_CASE("forward matches the oracle under every single-module ablation") {
  Rng rng(113);
  for (int flag = 0; flag < 4; ++flag) {
    ModelConfig cfg = small_config();
    cfg.ablation.disable_dvm = flag == 0;
    cfg.ablation.disable_edge_enhance = flag == 1;
    cfg.ablation.disable_gne = flag == 2;
    cfg.ablation.disable_epe = flag == 3;
    ModelParams params = init_params(cfg, 31 + flag);
    CompiledGraph cg = random_compiled(5, cfg, rng);
    Tensor got = forward_logits(cg, cfg, params);
    std::vector<double> expect = naive::logits(cg, cfg, params);
    INFO("flag " << flag);
    for (int c = 0; c < cfg.class_count; ++c)
      CHECK(got(0, c) == Catch::Approx(expect[c]).margin(1e-12));
  }
}

TEST_CASE("attention weights sum to one for every layer and head") {
  ModelConfig cfg = small_config();
  cfg.mpm_layers = 2;
  cfg.transformer_layers = 2;
  Rng rng(127);
  ModelParams params = init_params(cfg, 17);
  CompiledGraph cg = random_compiled(6, cfg, rng);
  ad::Tape tape;
  ParamVars pv = bind_params(tape, params, cfg);
  ForwardTrace trace;
  model_forward(tape, cg, cfg, pv, &trace);
  REQUIRE(trace.attention.size() == 2 + 2 * static_cast<std::size_t>(cfg.heads));
  for (const auto& att : trace.attention) {
    const Tensor& w = tape.value(att.weights);
    std::vector<double> sums(cg.graph.node_count, 0.0);
    for (std::size_t e = 0; e < w.size(); ++e)
      sums[cg.dedges.by_center.segment_of[e]] += w[e];
    for (double s : sums) CHECK(std::fabs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("transformer with one head and K=2 has unit attention") {
  ModelConfig cfg = small_config();
  cfg.heads = 1;
  cfg.mpm_layers = 0;
  Rng rng(131);
  ModelParams params = init_params(cfg, 19);
  CompiledGraph cg = random_compiled(2, cfg, rng);
  ad::Tape tape;
  ParamVars pv = bind_params(tape, params, cfg);
  ForwardTrace trace;
  model_forward(tape, cg, cfg, pv, &trace);
  REQUIRE(trace.attention.size() == 1);
  const Tensor& att = tape.value(trace.attention[0].weights);
  CHECK(att[0] == 1.0);
  CHECK(att[1] == 1.0);
}

TEST_CASE("readout is the node mean") {
  ad::Tape tape;
  SECTION("equal rows pool to themselves") {
    Tensor h(3, 2);
    for (int r = 0; r < 3; ++r) {
      h(r, 0) = 1.5;
      h(r, 1) = -0.25;
    }
    const Tensor& out = tape.value(readout(tape.leaf(h)));
    CHECK(out(0, 0) == 1.5);
    CHECK(out(0, 1) == -0.25);
  }
  SECTION("two rows pool to their average") {
    Tensor h(2, 2);
    h(0, 0) = 1.0;
    h(0, 1) = 4.0;
    h(1, 0) = 3.0;
    h(1, 1) = -2.0;
    const Tensor& out = tape.value(readout(tape.leaf(h)));
    CHECK(out(0, 0) == 2.0);
    CHECK(out(0, 1) == 1.0);
  }
  SECTION("row order is irrelevant") {
    Rng rng(163);
    Tensor h(5, 3);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = rng.uniform(-1, 1);
    Tensor swapped = h;
    for (std::size_t c = 0; c < 3; ++c) std::swap(swapped(0, c), swapped(4, c));
    const Tensor& a = tape.value(readout(tape.leaf(h)));
    const Tensor& b = tape.value(readout(tape.leaf(swapped)));
    CHECK(max_abs_diff(a, b) <= 1e-15);
  }
}

TEST_CASE("zero-initialized classifier yields equal logits") {
  ModelConfig cfg = small_config();
  Rng rng(137);
  ModelParams params = init_params(cfg, 23);
  params.W_classifier.fill(0.0);
  params.b_classifier.fill(0.0);
  CompiledGraph cg = random_compiled(5, cfg, rng);
  Tensor logits = forward_logits(cg, cfg, params);
  for (int c = 0; c < cfg.class_count; ++c) CHECK(logits(0, c) == 0.0);
}

TEST_CASE("model logits are invariant under node permutation") {
  ModelConfig cfg = small_config();
  Rng rng(139);
  ModelParams params = init_params(cfg, 29);
  for (int trial = 0; trial < 5; ++trial) {
    const int k = 3 + static_cast<int>(rng.below(8));
    auto cs = random_centers(k, rng);
    ScatterGraph g = build_graph(cs);
    CompiledGraph cg = compile_graph(g, cfg, 0);
    Tensor base = forward_logits(cg, cfg, params);
    for (int p = 0; p < 5; ++p) {
      std::vector<int> perm(k);
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      CompiledGraph pcg = compile_graph(permute_graph(g, perm), cfg, 0);
      Tensor permuted = forward_logits(pcg, cfg, params);
      CHECK(max_abs_diff(base, permuted) <= 1e-6);
    }
  }
}

TEST_CASE("one parameter set serves every K from 2 to 40") {
  ModelConfig cfg = small_config();
  Rng rng(149);
  ModelParams params = init_params(cfg, 31);
  for (int k : {2, 3, 7, 16, 29, 40}) {
    CompiledGraph cg = random_compiled(k, cfg, rng, 1);
    ad::Tape tape;
    ParamVars pv = bind_params(tape, params, cfg);
    ad::Var loss = model_loss(tape, cg, cfg, pv);
    CHECK(std::isfinite(tape.value(loss).item()));
    tape.backward(loss);
    CHECK(tape.grad(pv.W_node_in).all_finite());
  }
}

TEST_CASE("full-model gradients match central differences") {
  ModelConfig cfg = small_config();
  Rng rng(151);
  ModelParams params = init_params(cfg, 37);
  CompiledGraph cg = random_compiled(5, cfg, rng, 2);

  auto objective = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
    ParamVars pv = vars_from_flat(cfg, params, vars);
    return model_loss(tape, cg, cfg, pv);
  };
  auto report = grad_check(objective, named_params(params), 1e-5, 1e-4);
  INFO("max rel err " << report.max_rel_err);
  CHECK(report.pass);
}

TEST_CASE("ablation flags shrink the parameter count") {
  ModelConfig full = small_config();
  ModelConfig ablated = full;
  ablated.ablation.disable_dvm = true;
  ablated.ablation.disable_edge_enhance = true;
  ablated.ablation.disable_gne = true;
  ablated.ablation.disable_epe = true;
  CHECK(param_count(init_params(ablated, 1)) < param_count(init_params(full, 1)));
}

TEST_CASE("residual stability through a stack of zeroed mpm layers") {
  ModelConfig cfg = small_config();
  cfg.mpm_layers = 3;
  Rng rng(157);
  ModelParams params = init_params(cfg, 41);
  for (auto& l : params.mpm) l.W_edge_update.fill(0.0);
  CompiledGraph cg = random_compiled(5, cfg, rng);
  ad::Tape tape;
  ParamVars pv = bind_params(tape, params, cfg);
  Embeddings emb = init_embeddings(tape, cg, cfg, pv);
  Embeddings cur = emb;
  for (int l = 0; l < cfg.mpm_layers; ++l)
    cur = mpm_layer(cg, cfg, pv.mpm[l], cur);
  CHECK(max_abs_diff(tape.value(emb.edges), tape.value(cur.edges)) == 0.0);
}
