#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sargtr/checkpoint.hpp"
#include "sargtr/dataset.hpp"
#include "sargtr/model.hpp"
#include "sargtr/rng.hpp"

namespace sargtr {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  AblationFlags ablation;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: bad lr");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("TrainConfig: moment coefficients outside [0,1)");
    if (epochs < 1 || batch_size < 1)
      throw std::invalid_argument("TrainConfig: epochs and batch size must be ≥ 1");
  }
};

// Applies the ablation switches to a model configuration.
inline ModelConfig ablate(const ModelConfig& base, const AblationFlags& flags) {
  ModelConfig cfg = base;
  cfg.ablation = flags;
  return cfg;
}

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  bool has_val = false;
};

struct EvalResult {
  double pcc = 0.0;  // probability of correct classification
  std::vector<std::vector<int>> confusion;  // [true][predicted]
};

struct TrainResult {
  ModelConfig config;  // includes the fitted feature stats
  ModelParams params;
  std::vector<EpochMetrics> metrics;
};

namespace detail {

inline int argmax_row(const Tensor& logits) {
  int best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c)
    if (logits(0, c) > logits(0, best)) best = static_cast<int>(c);
  return best;
}

// Adam moment buffers aligned with named_params order.
struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;
};

inline void adam_step(std::vector<std::pair<std::string, Tensor*>>& params,
                      const std::vector<Tensor>& grads, AdamState& state,
                      const TrainConfig& tc) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p].second;
    Tensor& m = state.m[p];
    Tensor& v = state.v[p];
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * g[i];
      v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * g[i] * g[i];
      theta[i] -= tc.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + tc.adam_eps);
    }
    if (!theta.all_finite())
      throw std::runtime_error("adam_step: non-finite parameter " + params[p].first);
  }
}

}  // namespace detail

inline std::vector<CompiledGraph> compile_dataset(
    const std::vector<DatasetRecord>& records, const ModelConfig& cfg) {
  std::vector<CompiledGraph> out;
  out.reserve(records.size());
  for (const auto& rec : records)
    out.push_back(compile_graph(build_graph(rec.centers, sigma_option(cfg)), cfg, rec.label));
  return out;
}

// Per-graph forward/backward, gradients averaged over the batch, adaptive
// moment updates. Deterministic for a fixed seed: shuffling, initialization
// and every reduction run in a fixed order.
inline TrainResult train(const std::vector<DatasetRecord>& train_set, ModelConfig cfg,
                         const TrainConfig& tc,
                         const std::vector<DatasetRecord>* val_set = nullptr) {
  tc.validate();
  cfg.ablation = tc.ablation;
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& rec : train_set)
    if (rec.label < 0 || rec.label >= cfg.class_count)
      throw std::out_of_range("train: label out of range");

  std::vector<CompiledGraph> graphs = compile_dataset(train_set, cfg);
  if (!cfg.stats.present) cfg.stats = compute_feature_stats(graphs);
  std::vector<CompiledGraph> val_graphs;
  if (val_set) val_graphs = compile_dataset(*val_set, cfg);

  TrainResult result;
  result.params = init_params(cfg, tc.seed);
  auto named = named_params(result.params);

  detail::AdamState adam;
  for (const auto& [name, t] : named) {
    adam.m.push_back(zeros_like(*t));
    adam.v.push_back(zeros_like(*t));
  }

  Rng shuffle_rng = Rng::substream(tc.seed, 0x53485546ull);
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += tc.batch_size) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + tc.batch_size);
      std::vector<Tensor> grad_sum;
      for (const auto& [name, t] : named) grad_sum.push_back(zeros_like(*t));

      for (std::size_t b = batch_start; b < batch_end; ++b) {
        const CompiledGraph& cg = graphs[order[b]];
        ad::Tape tape;
        ParamVars pv = bind_params(tape, result.params, cfg);
        ad::Var logits = model_forward(tape, cg, cfg, pv);
        ad::Var loss = ad::cross_entropy(logits, cg.label);
        const double loss_value = tape.value(loss).item();
        if (!std::isfinite(loss_value))
          throw std::runtime_error("train: non-finite loss at epoch " +
                                   std::to_string(epoch));
        loss_sum += loss_value;
        if (detail::argmax_row(tape.value(logits)) == cg.label) ++correct;
        tape.backward(loss);

        std::vector<const Tensor*> bound;
        visit_params(pv, [&](const std::string&, const ad::Var& v) {
          if (v.valid()) bound.push_back(&tape.grad(v));
        });
        for (std::size_t p = 0; p < grad_sum.size(); ++p)
          for (std::size_t i = 0; i < grad_sum[p].size(); ++i)
            grad_sum[p][i] += (*bound[p])[i];
      }

      const double inv = 1.0 / static_cast<double>(batch_end - batch_start);
      for (auto& g : grad_sum)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= inv;
      detail::adam_step(named, grad_sum, adam, tc);
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.loss = loss_sum / static_cast<double>(graphs.size());
    em.train_acc = static_cast<double>(correct) / static_cast<double>(graphs.size());
    if (val_set) {
      std::size_t val_correct = 0;
      for (const auto& cg : val_graphs)
        if (detail::argmax_row(forward_logits(cg, cfg, result.params)) == cg.label)
          ++val_correct;
      em.val_acc = static_cast<double>(val_correct) /
                   static_cast<double>(std::max<std::size_t>(1, val_graphs.size()));
      em.has_val = true;
    }
    result.metrics.push_back(em);
  }

  result.config = cfg;
  return result;
}

inline EvalResult evaluate(const std::vector<DatasetRecord>& dataset,
                           const ModelConfig& cfg, const ModelParams& params) {
  if (!cfg.stats.present)
    throw std::invalid_argument("evaluate: config lacks feature stats");
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  EvalResult res;
  res.confusion.assign(cfg.class_count, std::vector<int>(cfg.class_count, 0));
  std::size_t correct = 0;
  for (const auto& rec : dataset) {
    if (rec.label < 0 || rec.label >= cfg.class_count)
      throw std::out_of_range("evaluate: label out of range");
    CompiledGraph cg =
        compile_graph(build_graph(rec.centers, sigma_option(cfg)), cfg, rec.label);
    const int pred = detail::argmax_row(forward_logits(cg, cfg, params));
    res.confusion[rec.label][pred] += 1;
    if (pred == rec.label) ++correct;
  }
  res.pcc = static_cast<double>(correct) / static_cast<double>(dataset.size());
  return res;
}

inline nlohmann::json to_json(const EpochMetrics& em) {
  nlohmann::json j{{"epoch", em.epoch}, {"loss", em.loss}, {"train_acc", em.train_acc}};
  if (em.has_val)
    j["val_acc"] = em.val_acc;
  else
    j["val_acc"] = nullptr;
  return j;
}

inline void write_metrics_jsonl(const std::string& path,
                                const std::vector<EpochMetrics>& metrics) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_metrics_jsonl: cannot open " + path);
  for (const auto& em : metrics) os << to_json(em).dump() << '\n';
}

}  // namespace sargtr
