#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sargtr/asc.hpp"
#include "sargtr/autodiff.hpp"
#include "sargtr/encodings.hpp"
#include "sargtr/rng.hpp"
#include "sargtr/tensor.hpp"

namespace sargtr {

// Single-module ablation switches (each removes or neutralizes one pathway).
struct AblationFlags {
  bool disable_dvm = false;           // alpha handled as a raw continuous column
  bool disable_edge_enhance = false;  // no edge terms in attention, edges frozen
  bool disable_gne = false;           // spectral node encoding zeroed
  bool disable_epe = false;           // walk-based edge encoding zeroed
};

// Per-column z-score statistics, fit on the training split and stored with
// the model. Column order follows FeatureColumn.
struct FeatureStats {
  bool present = false;
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> sdev{};  // guarded ≥ 1 for constant columns
};

struct ModelConfig {
  int d_n = 64;                // node embedding width
  int d_e = 16;                // edge embedding width
  int d_h = 16;                // per-head width
  int heads = 4;
  int mpm_layers = 1;
  int transformer_layers = 2;
  int gne_n = 8;               // spectral encoding columns
  int dvm_dim = 8;             // alpha embedding width
  double leaky_slope = 0.2;
  int class_count = 2;
  double sigma_d = 0.0;  // kernel bandwidth; ≤ 0 means per-graph median
  DiscreteCodebook codebook = DiscreteCodebook::standard();
  AblationFlags ablation;
  FeatureStats stats;

  bool edge_enhanced() const { return !ablation.disable_edge_enhance; }
  bool use_dvm() const { return !ablation.disable_dvm; }

  int continuous_width() const { return use_dvm() ? kFeatureCount - 1 : kFeatureCount; }
  int node_input_width() const {
    return continuous_width() + (use_dvm() ? dvm_dim : 0) + gne_n;
  }
  int edge_input_width() const { return 2; }  // [ω, EPE]
  int score_mix_width() const { return edge_enhanced() ? 2 * d_h : d_h; }

  void validate() const {
    if (d_n < 1 || d_e < 1 || d_h < 1 || heads < 1 || gne_n < 1 || dvm_dim < 1)
      throw std::invalid_argument("ModelConfig: dims must be ≥ 1");
    if (mpm_layers < 0 || transformer_layers < 0)
      throw std::invalid_argument("ModelConfig: negative layer count");
    if (class_count < 2) throw std::invalid_argument("ModelConfig: class_count < 2");
    if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
      throw std::invalid_argument("ModelConfig: leaky_slope out of range");
    codebook.validate();
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["d_n"] = c.d_n;
  j["d_e"] = c.d_e;
  j["d_h"] = c.d_h;
  j["heads"] = c.heads;
  j["mpm_layers"] = c.mpm_layers;
  j["transformer_layers"] = c.transformer_layers;
  j["gne_n"] = c.gne_n;
  j["dvm_dim"] = c.dvm_dim;
  j["leaky_slope"] = c.leaky_slope;
  j["class_count"] = c.class_count;
  j["sigma_d"] = c.sigma_d;
  j["codebook"] = {{"values", c.codebook.values},
                   {"unknown_index", c.codebook.unknown_index},
                   {"strict", c.codebook.strict}};
  j["ablation"] = {{"disable_dvm", c.ablation.disable_dvm},
                   {"disable_edge_enhance", c.ablation.disable_edge_enhance},
                   {"disable_gne", c.ablation.disable_gne},
                   {"disable_epe", c.ablation.disable_epe}};
  j["stats"] = {{"present", c.stats.present},
                {"mean", std::vector<double>(c.stats.mean.begin(), c.stats.mean.end())},
                {"sdev", std::vector<double>(c.stats.sdev.begin(), c.stats.sdev.end())}};
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_n = j.at("d_n").get<int>();
  c.d_e = j.at("d_e").get<int>();
  c.d_h = j.at("d_h").get<int>();
  c.heads = j.at("heads").get<int>();
  c.mpm_layers = j.at("mpm_layers").get<int>();
  c.transformer_layers = j.at("transformer_layers").get<int>();
  c.gne_n = j.at("gne_n").get<int>();
  c.dvm_dim = j.at("dvm_dim").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.class_count = j.at("class_count").get<int>();
  c.sigma_d = j.at("sigma_d").get<double>();
  c.codebook.values = j.at("codebook").at("values").get<std::vector<double>>();
  c.codebook.unknown_index = j.at("codebook").at("unknown_index").get<int>();
  c.codebook.strict = j.at("codebook").at("strict").get<bool>();
  const auto& ab = j.at("ablation");
  c.ablation.disable_dvm = ab.at("disable_dvm").get<bool>();
  c.ablation.disable_edge_enhance = ab.at("disable_edge_enhance").get<bool>();
  c.ablation.disable_gne = ab.at("disable_gne").get<bool>();
  c.ablation.disable_epe = ab.at("disable_epe").get<bool>();
  const auto& st = j.at("stats");
  c.stats.present = st.at("present").get<bool>();
  auto mean = st.at("mean").get<std::vector<double>>();
  auto sdev = st.at("sdev").get<std::vector<double>>();
  if (mean.size() != kFeatureCount || sdev.size() != kFeatureCount)
    throw std::invalid_argument("ModelConfig: bad stats width");
  std::copy(mean.begin(), mean.end(), c.stats.mean.begin());
  std::copy(sdev.begin(), sdev.end(), c.stats.sdev.begin());
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameters. The same structure is instantiated with Tensor (storage) and
// with ad::Var (one forward pass). Disabled pathways hold empty tensors /
// invalid vars. visit_params defines the canonical order used for init,
// serialization and gradient extraction.
// ---------------------------------------------------------------------------

template <class T>
struct MpmParamsT {
  T W_score;        // scores concat(h_i, h_j [, e_ij])
  T v_score;        // projects scores to a logit
  T W_aggregate;    // neighbor message map
  T W_edge_update;  // residual edge update
};

template <class T>
struct HeadParamsT {
  T W_q_node, W_q_edge, W_k, W_v_node, W_v_edge;
  T W_score_mix;  // mixes concatenated queries before the key dot product
  T W_value_mix;  // mixes concatenated values for the node output
};

template <class T>
struct TfLayerParamsT {
  std::vector<HeadParamsT<T>> heads;
  T W_node_out, W_edge_out;
  T node_norm_gain, node_norm_bias, edge_norm_gain, edge_norm_bias;
};

template <class T>
struct ModelParamsT {
  T W_alpha_embed, W_alpha_adjust;
  T W_node_in, b_node_in, W_edge_in, b_edge_in;
  std::vector<MpmParamsT<T>> mpm;
  std::vector<TfLayerParamsT<T>> transformer;
  T W_classifier, b_classifier;
};

using ModelParams = ModelParamsT<Tensor>;
using ParamVars = ModelParamsT<ad::Var>;

template <class T, class F>
void visit_params(ModelParamsT<T>& p, F&& f) {
  f("alpha_embed.table", p.W_alpha_embed);
  f("alpha_embed.adjust", p.W_alpha_adjust);
  f("input.node_w", p.W_node_in);
  f("input.node_b", p.b_node_in);
  f("input.edge_w", p.W_edge_in);
  f("input.edge_b", p.b_edge_in);
  for (std::size_t l = 0; l < p.mpm.size(); ++l) {
    const std::string base = "mpm." + std::to_string(l) + ".";
    f(base + "score_w", p.mpm[l].W_score);
    f(base + "score_v", p.mpm[l].v_score);
    f(base + "aggregate", p.mpm[l].W_aggregate);
    f(base + "edge_update", p.mpm[l].W_edge_update);
  }
  for (std::size_t l = 0; l < p.transformer.size(); ++l) {
    const std::string base = "tf." + std::to_string(l) + ".";
    for (std::size_t h = 0; h < p.transformer[l].heads.size(); ++h) {
      const std::string hb = base + "head." + std::to_string(h) + ".";
      f(hb + "q_node", p.transformer[l].heads[h].W_q_node);
      f(hb + "q_edge", p.transformer[l].heads[h].W_q_edge);
      f(hb + "k", p.transformer[l].heads[h].W_k);
      f(hb + "v_node", p.transformer[l].heads[h].W_v_node);
      f(hb + "v_edge", p.transformer[l].heads[h].W_v_edge);
      f(hb + "score_mix", p.transformer[l].heads[h].W_score_mix);
      f(hb + "value_mix", p.transformer[l].heads[h].W_value_mix);
    }
    f(base + "node_out", p.transformer[l].W_node_out);
    f(base + "edge_out", p.transformer[l].W_edge_out);
    f(base + "node_norm_gain", p.transformer[l].node_norm_gain);
    f(base + "node_norm_bias", p.transformer[l].node_norm_bias);
    f(base + "edge_norm_gain", p.transformer[l].edge_norm_gain);
    f(base + "edge_norm_bias", p.transformer[l].edge_norm_bias);
  }
  f("classifier.w", p.W_classifier);
  f("classifier.b", p.b_classifier);
}

template <class T, class F>
void visit_params(const ModelParamsT<T>& p, F&& f) {
  visit_params(const_cast<ModelParamsT<T>&>(p),
               [&f](const std::string& name, T& t) { f(name, std::as_const(t)); });
}

// Zero-filled parameters with the shapes the config dictates; disabled
// pathways stay empty.
inline ModelParams make_params_layout(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  const bool edge = cfg.edge_enhanced();
  if (cfg.use_dvm()) {
    p.W_alpha_embed = Tensor(cfg.codebook.index_count(), cfg.dvm_dim);
    p.W_alpha_adjust = Tensor(cfg.dvm_dim, cfg.dvm_dim);
  }
  p.W_node_in = Tensor(cfg.node_input_width(), cfg.d_n);
  p.b_node_in = Tensor(1, cfg.d_n);
  if (edge) {
    p.W_edge_in = Tensor(cfg.edge_input_width(), cfg.d_e);
    p.b_edge_in = Tensor(1, cfg.d_e);
  }
  p.mpm.resize(cfg.mpm_layers);
  for (auto& l : p.mpm) {
    l.W_score = Tensor(2 * cfg.d_n + (edge ? cfg.d_e : 0), cfg.d_n);
    l.v_score = Tensor(cfg.d_n, 1);
    l.W_aggregate = Tensor(cfg.d_n, cfg.d_n);
    if (edge) l.W_edge_update = Tensor(cfg.d_e, cfg.d_e);
  }
  p.transformer.resize(cfg.transformer_layers);
  for (auto& l : p.transformer) {
    l.heads.resize(cfg.heads);
    for (auto& h : l.heads) {
      h.W_q_node = Tensor(cfg.d_n, cfg.d_h);
      h.W_k = Tensor(cfg.d_n, cfg.d_h);
      h.W_v_node = Tensor(cfg.d_n, cfg.d_h);
      if (edge) {
        h.W_q_edge = Tensor(cfg.d_e, cfg.d_h);
        h.W_v_edge = Tensor(cfg.d_e, cfg.d_h);
      }
      h.W_score_mix = Tensor(cfg.score_mix_width(), cfg.d_h);
      h.W_value_mix = Tensor(cfg.score_mix_width(), cfg.d_h);
    }
    l.W_node_out = Tensor(cfg.heads * cfg.d_h, cfg.d_n);
    l.node_norm_gain = Tensor(1, cfg.d_n);
    l.node_norm_bias = Tensor(1, cfg.d_n);
    if (edge) {
      l.W_edge_out = Tensor(cfg.heads * cfg.d_h, cfg.d_e);
      l.edge_norm_gain = Tensor(1, cfg.d_e);
      l.edge_norm_bias = Tensor(1, cfg.d_e);
    }
  }
  p.W_classifier = Tensor(cfg.d_n, cfg.class_count);
  p.b_classifier = Tensor(1, cfg.class_count);
  return p;
}

// Uniform ±√(6/(fan_in+fan_out)) for weight matrices, zeros for biases, and
// identity-like norm parameters. Draw order is the visit_params order, so a
// seed pins every value.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = make_params_layout(cfg);
  Rng rng(seed);
  visit_params(p, [&](const std::string& name, Tensor& t) {
    if (t.empty()) return;
    if (name.find("norm_gain") != std::string::npos) {
      t.fill(1.0);
      return;
    }
    const bool is_bias = name.find("norm_bias") != std::string::npos ||
                         name.ends_with("_b") || name.ends_with(".b");
    if (is_bias) return;  // stays zero
    const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  });
  return p;
}

inline std::vector<std::pair<std::string, Tensor*>> named_params(ModelParams& p) {
  std::vector<std::pair<std::string, Tensor*>> out;
  visit_params(p, [&](const std::string& name, Tensor& t) {
    if (!t.empty()) out.push_back({name, &t});
  });
  return out;
}

inline std::size_t param_count(const ModelParams& p) {
  std::size_t n = 0;
  visit_params(p, [&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

// Leaves for one forward pass, in visit_params order.
inline ParamVars bind_params(ad::Tape& tape, const ModelParams& params,
                             const ModelConfig& cfg) {
  ParamVars vars;
  vars.mpm.resize(cfg.mpm_layers);
  vars.transformer.resize(cfg.transformer_layers);
  for (auto& l : vars.transformer) l.heads.resize(cfg.heads);

  std::vector<ad::Var*> slots;
  visit_params(vars, [&](const std::string&, ad::Var& v) { slots.push_back(&v); });
  std::vector<const Tensor*> tensors;
  visit_params(params,
               [&](const std::string&, const Tensor& t) { tensors.push_back(&t); });
  if (slots.size() != tensors.size())
    throw std::logic_error("bind_params: layout mismatch");
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!tensors[i]->empty()) *slots[i] = tape.leaf(*tensors[i]);
  return vars;
}

// ---------------------------------------------------------------------------
// Graph compilation: everything about a record that does not depend on the
// trainable parameters (topology, encodings, alpha indices) is computed once.
// ---------------------------------------------------------------------------

struct CompiledGraph {
  ScatterGraph graph;
  DirectedEdges dedges;
  std::vector<int> alpha_index;  // per node
  Tensor gne_enc;                // K×gne_n
  std::vector<double> epe_enc;   // per unordered edge
  int label = -1;
};

inline CompiledGraph compile_graph(const ScatterGraph& g, const ModelConfig& cfg,
                                   int label = -1) {
  CompiledGraph cg;
  cg.graph = g;
  cg.dedges = directed_edges(g);
  cg.alpha_index.reserve(g.node_count);
  for (int k = 0; k < g.node_count; ++k)
    cg.alpha_index.push_back(alpha_to_index(g.features(k, kColAlpha), cfg.codebook));
  cg.gne_enc = gne(g, cfg.gne_n);
  cg.epe_enc = epe_closed_form(g);
  cg.label = label;
  return cg;
}

// Per-column mean and standard deviation over every node of the given graphs.
inline FeatureStats compute_feature_stats(std::span<const CompiledGraph> graphs) {
  FeatureStats s;
  std::array<double, kFeatureCount> sum{}, sumsq{};
  std::size_t n = 0;
  for (const auto& cg : graphs)
    for (int r = 0; r < cg.graph.node_count; ++r) {
      for (int c = 0; c < kFeatureCount; ++c) {
        sum[c] += cg.graph.features(r, c);
        sumsq[c] += cg.graph.features(r, c) * cg.graph.features(r, c);
      }
      ++n;
    }
  if (n == 0) throw std::invalid_argument("compute_feature_stats: empty input");
  for (int c = 0; c < kFeatureCount; ++c) {
    s.mean[c] = sum[c] / static_cast<double>(n);
    const double var = std::max(sumsq[c] / static_cast<double>(n) - s.mean[c] * s.mean[c], 0.0);
    const double sd = std::sqrt(var);
    s.sdev[c] = sd > 1e-8 ? sd : 1.0;  // constant columns center to zero
  }
  s.present = true;
  return s;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

// Attention weights recorded during a forward pass for inspection/tests.
struct ForwardTrace {
  struct Attention {
    std::string layer;  // "mpm.0", "tf.1.head.2", ...
    ad::Var weights;    // n×1, one entry per directed edge
  };
  std::vector<Attention> attention;
};

// ReLU(W_emb[s_α]) followed by the linear dimension adjustment.
inline ad::Var dvm_embed(const std::vector<int>& alpha_indices,
                         const ParamVars& pv) {
  ad::Var rows = ad::gather_rows(pv.W_alpha_embed, alpha_indices);
  return ad::matmul(ad::relu(rows), pv.W_alpha_adjust);
}

struct Embeddings {
  ad::Var nodes;  // K×d_n
  ad::Var edges;  // n×d_e over directed edges; invalid when edges are disabled
};

inline Embeddings init_embeddings(ad::Tape& tape, const CompiledGraph& cg,
                                  const ModelConfig& cfg, const ParamVars& pv) {
  if (!cfg.stats.present)
    throw std::invalid_argument("init_embeddings: feature stats missing from config");
  const int k = cg.graph.node_count;

  Tensor cont(k, cfg.continuous_width());
  for (int r = 0; r < k; ++r) {
    int out = 0;
    for (int c = 0; c < kFeatureCount; ++c) {
      if (cfg.use_dvm() && c == kColAlpha) continue;
      cont(r, out++) = (cg.graph.features(r, c) - cfg.stats.mean[c]) / cfg.stats.sdev[c];
    }
  }

  std::vector<ad::Var> blocks;
  blocks.push_back(tape.leaf(std::move(cont)));
  if (cfg.use_dvm()) blocks.push_back(dvm_embed(cg.alpha_index, pv));
  if (cfg.ablation.disable_gne)
    blocks.push_back(tape.leaf(Tensor(k, cfg.gne_n)));
  else
    blocks.push_back(tape.leaf(cg.gne_enc));

  Embeddings emb;
  emb.nodes = ad::add_rowvec(ad::matmul(ad::concat_cols(blocks), pv.W_node_in),
                             pv.b_node_in);

  if (cfg.edge_enhanced()) {
    const std::size_t n = cg.dedges.count();
    Tensor raw(n, 2);
    for (std::size_t e = 0; e < n; ++e) {
      const int u = cg.dedges.undirected_id[e];
      raw(e, 0) = cg.graph.weights[u];
      raw(e, 1) = cfg.ablation.disable_epe ? 0.0 : cg.epe_enc[u];
    }
    emb.edges = ad::add_rowvec(ad::matmul(tape.leaf(std::move(raw)), pv.W_edge_in),
                               pv.b_edge_in);
  }
  return emb;
}

// Edge-enhanced message passing: attention over concat(h_i, h_j, e_ij),
// aggregated neighbor messages replace h_j, edges get a residual update.
inline Embeddings mpm_layer(const CompiledGraph& cg,
                            const ModelConfig& cfg, const MpmParamsT<ad::Var>& lp,
                            Embeddings in, const std::string& trace_name = {},
                            ForwardTrace* trace = nullptr) {
  const DirectedEdges& de = cg.dedges;
  ad::Var h_nbr = ad::gather_rows(in.nodes, de.src);
  ad::Var h_ctr = ad::gather_rows(in.nodes, de.dst);

  std::vector<ad::Var> parts{h_nbr, h_ctr};
  if (cfg.edge_enhanced()) parts.push_back(in.edges);
  ad::Var scores = ad::leaky_relu(ad::matmul(ad::concat_cols(parts), lp.W_score),
                                  cfg.leaky_slope);
  ad::Var att = ad::segment_softmax(ad::matmul(scores, lp.v_score), de.by_center);
  if (trace) trace->attention.push_back({trace_name, att});

  Embeddings out;
  out.nodes = ad::segment_sum(ad::scale_rows(ad::matmul(h_nbr, lp.W_aggregate), att),
                              de.by_center);
  if (cfg.edge_enhanced())
    out.edges = ad::add(in.edges,
                        ad::matmul(ad::scale_rows(in.edges, att), lp.W_edge_update));
  return out;
}

// Edge-enhanced multi-head attention. Per head: query from the center node
// concatenated with an edge query, key/value from the neighbor, an extra edge
// value; softmax per neighborhood. Head outputs are concatenated, projected,
// residual-added and layer-normalized.
inline Embeddings transformer_layer(const CompiledGraph& cg,
                                    const ModelConfig& cfg,
                                    const TfLayerParamsT<ad::Var>& lp,
                                    Embeddings in, const std::string& trace_name = {},
                                    ForwardTrace* trace = nullptr) {
  const DirectedEdges& de = cg.dedges;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));

  std::vector<ad::Var> node_heads, edge_heads;
  for (int h = 0; h < cfg.heads; ++h) {
    const HeadParamsT<ad::Var>& hp = lp.heads[h];
    ad::Var q_ctr = ad::gather_rows(ad::matmul(in.nodes, hp.W_q_node), de.dst);
    ad::Var key = ad::gather_rows(ad::matmul(in.nodes, hp.W_k), de.src);
    ad::Var v_nbr = ad::gather_rows(ad::matmul(in.nodes, hp.W_v_node), de.src);

    ad::Var query, values;
    ad::Var v_edge;
    if (cfg.edge_enhanced()) {
      ad::Var q_edge = ad::matmul(in.edges, hp.W_q_edge);
      v_edge = ad::matmul(in.edges, hp.W_v_edge);
      query = ad::concat_cols({q_ctr, q_edge});
      values = ad::concat_cols({v_nbr, v_edge});
    } else {
      query = q_ctr;
      values = v_nbr;
    }
    ad::Var logits = ad::scalar_mul(
        inv_sqrt_dh, ad::row_sum(ad::mul(ad::matmul(query, hp.W_score_mix), key)));
    ad::Var att = ad::segment_softmax(logits, de.by_center);
    if (trace)
      trace->attention.push_back(
          {trace_name + ".head." + std::to_string(h), att});

    ad::Var mixed = ad::matmul(values, hp.W_value_mix);
    node_heads.push_back(
        ad::segment_sum(ad::scale_rows(mixed, att), de.by_center));
    if (cfg.edge_enhanced()) edge_heads.push_back(ad::scale_rows(v_edge, att));
  }

  Embeddings out;
  ad::Var node_proj = ad::matmul(ad::concat_cols(node_heads), lp.W_node_out);
  out.nodes = ad::layer_norm(ad::add(in.nodes, node_proj), lp.node_norm_gain,
                             lp.node_norm_bias);
  if (cfg.edge_enhanced()) {
    ad::Var edge_proj = ad::matmul(ad::concat_cols(edge_heads), lp.W_edge_out);
    out.edges = ad::layer_norm(ad::add(in.edges, edge_proj), lp.edge_norm_gain,
                               lp.edge_norm_bias);
  }
  return out;
}

// Mean over node rows: permutation-invariant graph pooling.
inline ad::Var readout(ad::Var node_features) { return ad::mean_rows(node_features); }

inline ad::Var model_forward(ad::Tape& tape, const CompiledGraph& cg,
                             const ModelConfig& cfg, const ParamVars& pv,
                             ForwardTrace* trace = nullptr) {
  Embeddings emb = init_embeddings(tape, cg, cfg, pv);
  for (int l = 0; l < cfg.mpm_layers; ++l)
    emb = mpm_layer(cg, cfg, pv.mpm[l], emb, "mpm." + std::to_string(l), trace);
  for (int l = 0; l < cfg.transformer_layers; ++l)
    emb = transformer_layer(cg, cfg, pv.transformer[l], emb,
                            "tf." + std::to_string(l), trace);
  ad::Var pooled = readout(emb.nodes);
  return ad::add(ad::matmul(pooled, pv.W_classifier), pv.b_classifier);
}

inline ad::Var model_loss(ad::Tape& tape, const CompiledGraph& cg,
                          const ModelConfig& cfg, const ParamVars& pv,
                          ForwardTrace* trace = nullptr) {
  if (cg.label < 0 || cg.label >= cfg.class_count)
    throw std::out_of_range("model_loss: label out of range");
  return ad::cross_entropy(model_forward(tape, cg, cfg, pv, trace), cg.label);
}

// Bandwidth option as build_graph expects it.
inline std::optional<double> sigma_option(const ModelConfig& cfg) {
  return cfg.sigma_d > 0.0 ? std::optional<double>(cfg.sigma_d) : std::nullopt;
}

// Convenience wrapper: one forward pass from stored parameters.
inline Tensor forward_logits(const CompiledGraph& cg, const ModelConfig& cfg,
                             const ModelParams& params) {
  ad::Tape tape;
  ParamVars pv = bind_params(tape, params, cfg);
  ad::Var logits = model_forward(tape, cg, cfg, pv);
  return tape.value(logits);
}

}  // namespace sargtr
