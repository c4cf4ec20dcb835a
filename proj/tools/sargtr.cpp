// Command-line front end: dataset generation, encoding inspection, training,
// evaluation, the ablation table and the finite-difference gradient check.
//
// Exit codes: 0 success, 1 check failure, 2 runtime/IO error, 64 usage error.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sargtr/checkpoint.hpp"
#include "sargtr/config.hpp"
#include "sargtr/dataset.hpp"
#include "sargtr/encodings.hpp"
#include "sargtr/gradcheck.hpp"
#include "sargtr/model.hpp"
#include "sargtr/rng.hpp"
#include "sargtr/synth.hpp"
#include "sargtr/train.hpp"

namespace {

using namespace sargtr;

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// bad configuration keys/values are usage errors (exit 64), not runtime ones
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void apply_overrides(RunConfig& rc, const std::string& config_file,
                     const std::vector<std::string>& sets) {
  try {
    if (!config_file.empty()) rc.load_file(config_file);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("--set expects key=value, got: " + kv);
      rc.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const std::exception& e) {
    throw UsageError(e.what());
  }
}

void echo_config(const RunConfig& rc) {
  std::cerr << "# resolved configuration\n";
  for (const auto& [k, v] : rc.resolved()) std::cerr << k << " = " << v << "\n";
}

int infer_class_count(const std::vector<DatasetRecord>& records) {
  int top = -1;
  for (const auto& r : records) top = std::max(top, r.label);
  return top + 1;
}

ParamVars rebuild_vars(const ModelConfig& cfg, ModelParams& params,
                       const std::vector<ad::Var>& vars) {
  ParamVars pv;
  pv.mpm.resize(cfg.mpm_layers);
  pv.transformer.resize(cfg.transformer_layers);
  for (auto& l : pv.transformer) l.heads.resize(cfg.heads);
  std::vector<ad::Var*> slots;
  visit_params(pv, [&](const std::string&, ad::Var& v) { slots.push_back(&v); });
  std::vector<Tensor*> tensors;
  visit_params(params, [&](const std::string&, Tensor& t) { tensors.push_back(&t); });
  std::size_t next = 0;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (!tensors[i]->empty()) *slots[i] = vars[next++];
  return pv;
}

std::vector<ScatteringCenter> random_scene(int k, Rng& rng) {
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

int run_gen(const std::string& templates_path, int per_class, std::uint64_t seed,
            const std::string& out) {
  std::vector<ClassTemplate> templates =
      templates_path.empty() ? builtin_templates() : read_templates(templates_path);
  auto records = generate(templates, per_class, seed);
  write_jsonl(out, records);
  std::cout << records.size() << " records -> " << out << "\n";
  return 0;
}

int run_encode(const std::string& data_path, int record_index, int gne_n) {
  auto records = read_jsonl(data_path);
  if (record_index < 0 || record_index >= static_cast<int>(records.size()))
    throw std::runtime_error("record index out of range: " +
                             std::to_string(record_index));
  const DatasetRecord& rec = records[record_index];
  ScatterGraph g = build_graph(rec.centers);
  Tensor enc = gne(g, gne_n);
  auto epe = epe_closed_form(g);

  nlohmann::json j;
  j["record"] = record_index;
  j["label"] = rec.label;
  j["node_count"] = g.node_count;
  j["sigma_d"] = g.sigma_d;
  nlohmann::json gne_rows = nlohmann::json::array();
  for (int r = 0; r < g.node_count; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < gne_n; ++c) row.push_back(enc(r, c));
    gne_rows.push_back(row);
  }
  j["gne"] = gne_rows;
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  j["edges"] = edges;
  j["epe"] = epe;
  std::cout << j.dump() << "\n";
  return 0;
}

int run_train(RunConfig rc, const std::string& data_path, const std::string& val_path,
              const std::string& out, const std::string& metrics_path,
              bool class_count_set) {
  auto data = read_jsonl(data_path);
  if (!class_count_set) rc.model.class_count = std::max(2, infer_class_count(data));
  echo_config(rc);

  std::vector<DatasetRecord> val;
  if (!val_path.empty()) val = read_jsonl(val_path);
  TrainResult res =
      train(data, rc.model, rc.train, val_path.empty() ? nullptr : &val);
  save_checkpoint(out, res.config, res.params);
  if (!metrics_path.empty()) write_metrics_jsonl(metrics_path, res.metrics);

  const EpochMetrics& last = res.metrics.back();
  nlohmann::json j{{"checkpoint", out},
                   {"epochs", static_cast<int>(res.metrics.size())},
                   {"final_loss", last.loss},
                   {"final_train_acc", last.train_acc}};
  j["final_val_acc"] = last.has_val ? nlohmann::json(last.val_acc) : nullptr;
  std::cout << j.dump() << "\n";
  return 0;
}

int run_eval(const std::string& data_path, const std::string& ckpt_path) {
  auto [cfg, params] = load_checkpoint(ckpt_path);
  auto data = read_jsonl(data_path);
  EvalResult res = evaluate(data, cfg, params);
  nlohmann::json j{{"pcc", res.pcc}, {"confusion", res.confusion}};
  std::cout << j.dump() << "\n";
  return 0;
}

int run_ablate(RunConfig rc, const std::string& data_path,
               const std::string& test_path, int seeds, bool class_count_set) {
  auto data = read_jsonl(data_path);
  auto test = read_jsonl(test_path);
  if (!class_count_set) rc.model.class_count = std::max(2, infer_class_count(data));
  echo_config(rc);

  struct Variant {
    const char* removed;
    AblationFlags flags;
  };
  std::vector<Variant> variants(5);
  variants[0].removed = "dvm";
  variants[0].flags.disable_dvm = true;
  variants[1].removed = "edge_enhance";
  variants[1].flags.disable_edge_enhance = true;
  variants[2].removed = "gne";
  variants[2].flags.disable_gne = true;
  variants[3].removed = "epe";
  variants[3].flags.disable_epe = true;
  variants[4].removed = "none";

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& variant : variants) {
    std::vector<double> pcc;
    for (int s = 0; s < seeds; ++s) {
      TrainConfig tc = rc.train;
      tc.seed = rc.train.seed + static_cast<std::uint64_t>(s);
      tc.ablation = variant.flags;
      TrainResult res = train(data, rc.model, tc);
      pcc.push_back(evaluate(test, res.config, res.params).pcc);
      std::cerr << "ablate removed=" << variant.removed << " seed=" << tc.seed
                << " pcc=" << pcc.back() << "\n";
    }
    double mean = 0.0;
    for (double v : pcc) mean += v;
    mean /= static_cast<double>(pcc.size());
    rows.push_back({{"removed", variant.removed}, {"pcc", pcc}, {"mean_pcc", mean}});
  }
  std::cout << nlohmann::json{{"rows", rows}}.dump() << "\n";
  return 0;
}

int run_gradcheck(RunConfig rc, std::uint64_t seed, double step, double tol) {
  echo_config(rc);
  bool all_pass = true;
  for (int k : {3, 5, 8}) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k));
    ModelConfig cfg = ablate(rc.model, rc.train.ablation);
    CompiledGraph cg = compile_graph(build_graph(random_scene(k, rng)), cfg,
                                     k % cfg.class_count);
    std::vector<CompiledGraph> one = {cg};
    cfg.stats = compute_feature_stats(one);
    ModelParams params = init_params(cfg, seed);
    auto objective = [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
      ParamVars pv = rebuild_vars(cfg, params, vars);
      return model_loss(tape, cg, cfg, pv);
    };
    GradCheckReport report = grad_check(objective, named_params(params), step, tol);
    std::cout << "K=" << k << " params=" << param_count(params)
              << " max_rel_err=" << report.max_rel_err
              << (report.pass ? " PASS" : " FAIL") << "\n";
    all_pass = all_pass && report.pass;
  }
  if (!all_pass) throw CheckFailure("gradient check failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph classification over attributed scattering centers"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic labeled dataset");
  std::string gen_templates, gen_out;
  int gen_per_class = 0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--templates", gen_templates, "template JSON file (default: builtin)");
  gen->add_option("--per-class", gen_per_class, "records per class")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "generation seed");
  gen->add_option("--out", gen_out, "output JSONL path")->required();

  // encode
  auto* encode = app.add_subcommand("encode", "print GNE and EPE for one record");
  std::string enc_data;
  int enc_record = 0, enc_gne_n = 8;
  encode->add_option("--data", enc_data, "dataset JSONL")->required();
  encode->add_option("--record", enc_record, "record index");
  encode->add_option("--gne-n", enc_gne_n, "encoding columns")
      ->check(CLI::PositiveNumber);

  // shared config options
  std::string cfg_file;
  std::vector<std::string> cfg_sets;

  // train
  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  std::string tr_data, tr_val, tr_out, tr_metrics;
  tr->add_option("--data", tr_data, "training JSONL")->required();
  tr->add_option("--val", tr_val, "validation JSONL");
  tr->add_option("--out", tr_out, "checkpoint path")->required();
  tr->add_option("--metrics", tr_metrics, "metrics JSONL path");
  tr->add_option("--config", cfg_file, "key = value config file");
  tr->add_option("--set", cfg_sets, "override: key=value (repeatable)");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string ev_data, ev_ckpt;
  ev->add_option("--data", ev_data, "dataset JSONL")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "full model vs single-module ablations");
  std::string ab_data, ab_test;
  int ab_seeds = 1;
  ab->add_option("--data", ab_data, "training JSONL")->required();
  ab->add_option("--test", ab_test, "test JSONL")->required();
  ab->add_option("--seeds", ab_seeds, "seeds per variant")->check(CLI::PositiveNumber);
  ab->add_option("--config", cfg_file, "key = value config file");
  ab->add_option("--set", cfg_sets, "override: key=value (repeatable)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::uint64_t gc_seed = 0;
  double gc_step = 1e-5, gc_tol = 1e-4;
  gc->add_option("--seed", gc_seed, "seed for graphs and parameters");
  gc->add_option("--step", gc_step, "central-difference step");
  gc->add_option("--tol", gc_tol, "relative error tolerance");
  gc->add_option("--config", cfg_file, "key = value config file");
  gc->add_option("--set", cfg_sets, "override: key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (app.got_subcommand(gen)) return run_gen(gen_templates, gen_per_class, gen_seed, gen_out);
    if (app.got_subcommand(encode)) return run_encode(enc_data, enc_record, enc_gne_n);
    if (app.got_subcommand(tr)) {
      RunConfig rc;
      apply_overrides(rc, cfg_file, cfg_sets);
      return run_train(rc, tr_data, tr_val, tr_out, tr_metrics, rc.was_set("class_count"));
    }
    if (app.got_subcommand(ev)) return run_eval(ev_data, ev_ckpt);
    if (app.got_subcommand(ab)) {
      RunConfig rc;
      apply_overrides(rc, cfg_file, cfg_sets);
      return run_ablate(rc, ab_data, ab_test, ab_seeds, rc.was_set("class_count"));
    }
    if (app.got_subcommand(gc)) {
      RunConfig rc;
      // check-sized defaults; a config file or --set can still override
      rc.model.d_n = 8;
      rc.model.d_e = 4;
      rc.model.d_h = 4;
      rc.model.heads = 2;
      rc.model.gne_n = 4;
      rc.model.dvm_dim = 4;
      rc.model.mpm_layers = 1;
      rc.model.transformer_layers = 1;
      rc.model.class_count = 3;
      apply_overrides(rc, cfg_file, cfg_sets);
      return run_gradcheck(rc, gc_seed, gc_step, gc_tol);
    }
  } catch (const CheckFailure& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
