// Command-line driver: dataset generation, anomaly injection, training,
// scoring and evaluation.
//
// Exit codes: 0 success, 1 input error, 2 numeric error.

#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hcm/hcm.hpp"
#include "hcm/io.hpp"

namespace fs = std::filesystem;
using hcm::io::json;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitNumeric = 2;

/// Runs `f`, prefixing any library error with the pipeline stage it came from.
template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const hcm::NumericError& e) {
    throw hcm::NumericError(std::string(stage) + ": " + e.what());
  } catch (const hcm::InputError& e) {
    throw hcm::InputError(std::string(stage) + ": " + e.what());
  } catch (const hcm::ContractError& e) {
    throw hcm::ContractError(std::string(stage) + ": " + e.what());
  }
}

/// Flags that override RunConfig fields; unset flags keep the config-file value.
struct RunFlags {
  std::string config_file;
  std::optional<std::string> dataset, out;
  std::optional<double> drop_ratio, sample_ratio, lr, weight_decay, noise_scale, decay_t0,
      decay_gamma;
  std::optional<std::size_t> classes, gcn_layers, gcn_width, mlp_width, pca_dim, epochs, samples;
  std::optional<std::string> optimizer, score, neighborhood, prediction;
  std::optional<std::uint64_t> seed;
  bool bias = false, auc_trace = false, lr_decay = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON run config; flags override its values")
        ->check(CLI::ExistingFile);
    app->add_option("--dataset", dataset, "graph manifest (JSON)");
    app->add_option("--out", out, "output directory");
    app->add_option("--drop-ratio", drop_ratio, "fraction R of least-similar edges dropped (0.2)");
    app->add_option("--classes", classes, "hop classes C (4)");
    app->add_option("--sample-ratio", sample_ratio, "balanced sampling ratio S (0.3)");
    app->add_option("--gcn-layers", gcn_layers, "graph convolution layers (2)");
    app->add_option("--gcn-width", gcn_width, "units per graph convolution layer (128)");
    app->add_option("--mlp-width", mlp_width, "hidden units of the pair classifier (256)");
    app->add_flag("--bias", bias, "enable bias terms");
    app->add_option("--pca-dim", pca_dim, "reduce attributes to this many components (0 = off)");
    app->add_option("--lr", lr, "step size (0.01)");
    app->add_option("--weight-decay", weight_decay, "weight decay / Gaussian log-prior (5e-8)");
    app->add_option("--optimizer", optimizer, "sgld | sgd")
        ->check(CLI::IsMember({"sgld", "sgd"}));
    app->add_flag("--lr-decay", lr_decay, "polynomial step-size decay eps0 (t0 + t)^-gamma");
    app->add_option("--lr-decay-t0", decay_t0, "decay offset t0 (1)");
    app->add_option("--lr-decay-gamma", decay_gamma, "decay exponent gamma (0.55)");
    app->add_option("--noise-scale", noise_scale, "Langevin noise multiplier (testing; 1)");
    app->add_option("--epochs,--burn-in-epochs", epochs, "burn-in training epochs (200)");
    app->add_option("--prediction", prediction, "argmax | expected")
        ->check(CLI::IsMember({"argmax", "expected"}));
    app->add_option("--neighborhood", neighborhood, "original | dropped")
        ->check(CLI::IsMember({"original", "dropped"}));
    app->add_flag("--auc-trace", auc_trace, "record per-epoch AUC (labelled datasets)");
    app->add_option("--seed", seed, "root random seed (1)");
    app->add_option("--posterior-samples", samples, "posterior samples T (100)");
    app->add_option("--score", score, "ranking score: ahp | hav")
        ->check(CLI::IsMember({"ahp", "hav"}));
  }

  hcm::RunConfig resolve(hcm::RunConfig base = {}) const {
    hcm::RunConfig c = base;
    if (!config_file.empty()) c = hcm::io::config_from_json(hcm::io::read_json(config_file), c);
    if (dataset) c.dataset = *dataset;
    if (out) c.output_dir = *out;
    if (drop_ratio) c.drop_ratio = *drop_ratio;
    if (classes) c.classes = *classes;
    if (sample_ratio) c.sample_ratio = *sample_ratio;
    if (gcn_layers) c.gcn_layers = *gcn_layers;
    if (gcn_width) c.gcn_width = *gcn_width;
    if (mlp_width) c.mlp_width = *mlp_width;
    if (bias) c.use_bias = true;
    if (pca_dim) c.pca_dim = *pca_dim;
    if (lr) c.lr = *lr;
    if (weight_decay) c.weight_decay = *weight_decay;
    if (optimizer) c.optimizer = hcm::io::parse_optimizer(*optimizer);
    if (lr_decay) c.schedule.enabled = true;
    if (decay_t0) c.schedule.t0 = *decay_t0;
    if (decay_gamma) c.schedule.gamma = *decay_gamma;
    if (noise_scale) c.noise_scale = *noise_scale;
    if (epochs) c.burn_in_epochs = *epochs;
    if (samples) c.posterior_samples = *samples;
    if (score) c.score = hcm::io::parse_score(*score);
    if (neighborhood) c.neighborhood = hcm::io::parse_neighborhood(*neighborhood);
    if (prediction) c.prediction = hcm::io::parse_prediction(*prediction);
    if (auc_trace) c.auc_trace = true;
    if (seed) c.seed = *seed;
    c.validate();
    if (c.dataset.empty()) throw hcm::InputError("no dataset given (--dataset or config \"dataset\")");
    if (c.output_dir.empty()) throw hcm::InputError("no output directory given (--out)");
    return c;
  }
};

hcm::AttributedNetwork load_dataset(const std::string& manifest) {
  return staged("load", [&] { return hcm::io::load_network(manifest); });
}

// Writes all run outputs; nothing is written unless every stage succeeded.
void write_run_outputs(const hcm::RunConfig& cfg, const hcm::RunResult& r,
                       const hcm::AttributedNetwork& net) {
  staged("write", [&] {
    const fs::path dir = cfg.output_dir;
    hcm::io::write_text(dir / "config.json", hcm::io::config_to_json(cfg).dump(2) + "\n");
    hcm::io::write_text(dir / "trace.csv", hcm::io::trace_csv(r.training));
    hcm::io::write_text(dir / "scores.csv", hcm::io::scores_csv(r.scoring.scores, net.anomaly_flags));
    hcm::io::write_text(dir / "metrics.json", hcm::io::metrics_json(cfg, r, net).dump(2) + "\n");
  });
}

hcm::RunResult run_once(const hcm::RunConfig& cfg, const hcm::AttributedNetwork& net) {
  const auto start = std::chrono::steady_clock::now();
  const auto graph = staged("preprocess", [&] { return hcm::prepare_graph(net, cfg); });
  hcm::RunResult r;
  r.training = staged("train", [&] { return hcm::train_model(net, graph, cfg); });
  r.scoring = staged("score", [&] { return hcm::score_model(net, graph, cfg, r.training.params); });
  r.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void print_summary(const hcm::RunConfig& cfg, const hcm::RunResult& r) {
  std::printf("seed %llu: final loss %.6f", static_cast<unsigned long long>(cfg.seed),
              r.training.loss_curve.empty() ? NAN : r.training.loss_curve.back());
  if (r.scoring.auc_ahp) std::printf("  auc_ahp %.4f  auc_hav %.4f", *r.scoring.auc_ahp, *r.scoring.auc_hav);
  std::printf("  (%.1fs) -> %s\n", r.wall_time_seconds, cfg.output_dir.c_str());
}

int cmd_run(const RunFlags& flags, std::size_t replicates) {
  const hcm::RunConfig base = flags.resolve();
  const auto net = load_dataset(base.dataset);
  if (replicates <= 1) {
    const auto r = run_once(base, net);
    write_run_outputs(base, r, net);
    print_summary(base, r);
    return 0;
  }
  std::vector<hcm::RunConfig> configs;
  for (std::size_t k = 0; k < replicates; ++k) {
    hcm::RunConfig c = base;
    c.seed = base.seed + k;
    c.output_dir = (fs::path(base.output_dir) / ("seed_" + std::to_string(c.seed))).string();
    configs.push_back(c);
  }
  std::vector<std::future<hcm::RunResult>> jobs;
  for (const auto& c : configs)
    jobs.push_back(std::async(std::launch::async, [&c, &net] { return run_once(c, net); }));
  json summary = {{"replicates", json::array()}};
  std::vector<double> aucs;
  for (std::size_t k = 0; k < jobs.size(); ++k) {
    const auto r = jobs[k].get();
    write_run_outputs(configs[k], r, net);
    print_summary(configs[k], r);
    json entry = {{"seed", configs[k].seed}, {"output_dir", configs[k].output_dir}};
    entry["auc_ahp"] = r.scoring.auc_ahp ? json(*r.scoring.auc_ahp) : json(nullptr);
    entry["auc_hav"] = r.scoring.auc_hav ? json(*r.scoring.auc_hav) : json(nullptr);
    if (r.scoring.auc_ahp) aucs.push_back(*r.scoring.auc_ahp);
    summary["replicates"].push_back(entry);
  }
  if (!aucs.empty()) {
    double mean = 0.0, var = 0.0;
    for (double a : aucs) mean += a;
    mean /= static_cast<double>(aucs.size());
    for (double a : aucs) var += (a - mean) * (a - mean);
    summary["auc_ahp_mean"] = mean;
    summary["auc_ahp_std"] = std::sqrt(var / static_cast<double>(aucs.size()));
    std::printf("auc_ahp mean %.4f over %zu seeds\n", mean, aucs.size());
  }
  hcm::io::write_text(fs::path(base.output_dir) / "summary.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_train(const RunFlags& flags) {
  const hcm::RunConfig cfg = flags.resolve();
  const auto net = load_dataset(cfg.dataset);
  const auto graph = staged("preprocess", [&] { return hcm::prepare_graph(net, cfg); });
  const auto trained = staged("train", [&] { return hcm::train_model(net, graph, cfg); });
  staged("write", [&] {
    const fs::path dir = cfg.output_dir;
    hcm::io::write_text(dir / "config.json", hcm::io::config_to_json(cfg).dump(2) + "\n");
    hcm::io::write_text(dir / "trace.csv", hcm::io::trace_csv(trained));
    hcm::io::save_checkpoint(dir / "checkpoint.json", trained.params, cfg);
  });
  std::printf("trained %zu epochs, final loss %.6f -> %s\n", trained.loss_curve.size(),
              trained.loss_curve.empty() ? NAN : trained.loss_curve.back(),
              (fs::path(cfg.output_dir) / "checkpoint.json").c_str());
  return 0;
}

int cmd_score(const RunFlags& flags, const std::string& checkpoint_path) {
  auto ckpt = staged("load", [&] { return hcm::io::load_checkpoint(checkpoint_path); });
  // Training-time settings come from the checkpoint; flags may still override.
  const hcm::RunConfig cfg = flags.resolve(ckpt.config.value_or(hcm::RunConfig{}));
  const auto net = load_dataset(cfg.dataset);
  const auto start = std::chrono::steady_clock::now();
  const auto graph = staged("preprocess", [&] { return hcm::prepare_graph(net, cfg); });
  hcm::RunResult r;
  r.scoring = staged("score", [&] { return hcm::score_model(net, graph, cfg, ckpt.params); });
  r.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  staged("write", [&] {
    const fs::path dir = cfg.output_dir;
    hcm::io::write_text(dir / "scores.csv", hcm::io::scores_csv(r.scoring.scores, net.anomaly_flags));
    hcm::io::write_text(dir / "metrics.json", hcm::io::metrics_json(cfg, r, net).dump(2) + "\n");
  });
  print_summary(cfg, r);
  return 0;
}

struct GenFlags {
  hcm::SyntheticSpec spec;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen(const GenFlags& g) {
  hcm::Rng rng = hcm::make_stream(g.seed, hcm::streams::generation);
  const auto net = staged("generate", [&] { return hcm::sbm_generate(g.spec, rng); });
  staged("write", [&] {
    hcm::io::save_network(net, g.out);
    json prov = {{"generator", "sbm"},
                 {"blocks", g.spec.block_count},
                 {"nodes_per_block", g.spec.nodes_per_block},
                 {"p_in", g.spec.p_in},
                 {"p_out", g.spec.p_out},
                 {"attribute_dim", g.spec.attribute_dim},
                 {"mean_separation", g.spec.mean_separation},
                 {"seed", g.seed}};
    hcm::io::write_text(fs::path(g.out) / "provenance.json", prov.dump(2) + "\n");
  });
  std::printf("generated %zu nodes, %zu edges -> %s\n", net.node_count, net.edges.size(),
              (fs::path(g.out) / "manifest.json").c_str());
  return 0;
}

struct InjectFlags {
  std::string dataset, out, mode = "both", role = "farthest";
  hcm::InjectionConfig config{15, 10, 50};
  std::uint64_t seed = 1;
};

int cmd_inject(const InjectFlags& f) {
  auto net = load_dataset(f.dataset);
  hcm::InjectionConfig cfg = f.config;
  cfg.role = f.role == "candidate" ? hcm::AttributeRole::mark_candidate
                                   : hcm::AttributeRole::mark_farthest;
  hcm::Rng rng = hcm::make_stream(f.seed, hcm::streams::injection);
  if (!net.anomaly_flags) net.anomaly_flags.emplace(net.node_count, 0);
  std::size_t structural = 0, attribute = 0;
  staged("inject", [&] {
    if (f.mode == "structural" || f.mode == "both") structural = hcm::inject_structural(net, cfg, rng).size();
    if (f.mode == "attribute" || f.mode == "both") attribute = hcm::inject_attribute(net, cfg, rng).anomalies.size();
  });
  std::size_t total = 0;
  for (auto v : *net.anomaly_flags) total += v;
  staged("write", [&] {
    hcm::io::save_network(net, f.out);
    json prov = {{"source", fs::absolute(f.dataset).string()},
                 {"mode", f.mode},
                 {"s", cfg.clique_size},
                 {"t", cfg.clique_count},
                 {"k", cfg.candidate_pool},
                 {"role", f.role},
                 {"seed", f.seed},
                 {"structural_anomalies", structural},
                 {"attribute_anomalies", attribute},
                 {"anomaly_count", total}};
    hcm::io::write_text(fs::path(f.out) / "provenance.json", prov.dump(2) + "\n");
  });
  std::printf("injected %zu structural + %zu attribute anomalies (%zu labelled) -> %s\n", structural,
              attribute, total, (fs::path(f.out) / "manifest.json").c_str());
  return 0;
}

int cmd_eval(const std::string& scores_path, const std::string& labels_path, const std::string& out) {
  const auto table = staged("load", [&] { return hcm::io::read_scores_csv(scores_path); });
  const auto text = staged("load", [&] { return hcm::io::read_text(labels_path); });
  const auto rows = staged("load", [&] { return hcm::io::parse_numeric_csv(text, labels_path); });
  std::vector<std::uint8_t> truth_by_id;
  for (const auto& r : rows) {
    if (r.size() != 1 || (r[0] != 0.0 && r[0] != 1.0)) throw hcm::InputError("load: labels must be 0/1");
    truth_by_id.push_back(r[0] == 1.0);
  }
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> seen(truth_by_id.size(), 0);
  for (hcm::NodeId id : table.node_ids) {
    if (id >= truth_by_id.size()) throw hcm::InputError("eval: node_id " + std::to_string(id) + " has no label");
    if (seen[id]++) throw hcm::InputError("eval: duplicate node_id " + std::to_string(id));
    labels.push_back(truth_by_id[id]);
  }
  json report = json::object();
  for (const auto& [name, values] : table.columns) {
    if (name == "isolated" || name == "ground_truth") continue;
    const double auc = staged("eval", [&] { return hcm::roc_auc(values, labels); });
    report["auc_" + name] = auc;
    std::printf("%s auc %.6f\n", name.c_str(), auc);
  }
  if (!out.empty()) hcm::io::write_text(out, report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hop-count based self-supervised anomaly detection on attributed networks"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a stochastic block model dataset");
  gen_cmd->add_option("--blocks", gen.spec.block_count, "number of blocks")->capture_default_str();
  gen_cmd->add_option("--nodes-per-block", gen.spec.nodes_per_block, "nodes per block")->capture_default_str();
  gen_cmd->add_option("--p-in", gen.spec.p_in, "intra-block edge probability")->capture_default_str();
  gen_cmd->add_option("--p-out", gen.spec.p_out, "inter-block edge probability")->capture_default_str();
  gen_cmd->add_option("--dim", gen.spec.attribute_dim, "attribute dimension")->capture_default_str();
  gen_cmd->add_option("--separation", gen.spec.mean_separation, "block mean separation")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  InjectFlags inj;
  auto* inject_cmd = app.add_subcommand("inject", "inject structural and/or attribute anomalies");
  inject_cmd->add_option("--dataset", inj.dataset, "input manifest")->required()->check(CLI::ExistingFile);
  inject_cmd->add_option("--out", inj.out, "output directory")->required();
  inject_cmd->add_option("--mode", inj.mode, "structural | attribute | both")
      ->check(CLI::IsMember({"structural", "attribute", "both"}))->capture_default_str();
  inject_cmd->add_option("--s,--clique-size", inj.config.clique_size, "clique size s")->capture_default_str();
  inject_cmd->add_option("--t,--clique-count", inj.config.clique_count, "clique count t")->capture_default_str();
  inject_cmd->add_option("--k,--candidates", inj.config.candidate_pool, "attribute candidate pool k")->capture_default_str();
  inject_cmd->add_option("--role", inj.role, "attribute anomaly: farthest | candidate")
      ->check(CLI::IsMember({"farthest", "candidate"}))->capture_default_str();
  inject_cmd->add_option("--seed", inj.seed, "random seed")->capture_default_str();

  RunFlags train_flags, score_flags, run_flags;
  auto* train_cmd = app.add_subcommand("train", "burn-in training; writes checkpoint.json (with the full run config)");
  train_flags.attach(train_cmd);

  std::string checkpoint;
  auto* score_cmd = app.add_subcommand("score", "posterior sampling and anomaly scores from a checkpoint");
  score_flags.attach(score_cmd);
  score_cmd->add_option("--checkpoint", checkpoint, "checkpoint from `train`")->required()->check(CLI::ExistingFile);

  std::size_t replicates = 1;
  auto* run_cmd = app.add_subcommand("run", "train, score and evaluate in one go");
  run_flags.attach(run_cmd);
  run_cmd->add_option("--replicates", replicates, "independent seeds seed..seed+N-1")->capture_default_str();

  std::string eval_scores, eval_labels, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "ROC-AUC of every score column");
  eval_cmd->add_option("--scores", eval_scores, "scores CSV")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--labels", eval_labels, "labels CSV (row i = node i)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval_out, "optional JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*inject_cmd) return cmd_inject(inj);
    if (*train_cmd) return cmd_train(train_flags);
    if (*score_cmd) return cmd_score(score_flags, checkpoint);
    if (*run_cmd) return cmd_run(run_flags, replicates);
    if (*eval_cmd) return cmd_eval(eval_scores, eval_labels, eval_out);
  } catch (const hcm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return 0;
}
