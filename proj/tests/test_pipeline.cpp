#include <gtest/gtest.h>

#include <filesystem>

#include "hcm/io.hpp"
#include "support.hpp"

namespace hcm {
namespace {

namespace fs = std::filesystem;

AttributedNetwork small_benchmark(std::uint64_t seed) {
  BenchmarkSpec spec;
  spec.graph = SyntheticSpec{3, 30, 0.2, 0.02, 6, 3.0};
  spec.injection = InjectionConfig{4, 2, 10};
  return make_benchmark(spec, seed);
}

RunConfig small_config() {
  RunConfig c;
  c.gcn_width = 12;
  c.mlp_width = 16;
  c.burn_in_epochs = 15;
  c.posterior_samples = 6;
  c.seed = 3;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hcm_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(Benchmark, LabelsCountBothInjections) {
  const auto net = small_benchmark(1);
  EXPECT_NO_THROW(net.validate());
  std::size_t flagged = 0;
  for (auto f : *net.anomaly_flags) flagged += f;
  EXPECT_GE(flagged, 8u);
  EXPECT_LE(flagged, 16u);
  EXPECT_EQ(small_benchmark(1), net);
}

TEST(Run, Deterministic) {
  const auto net = small_benchmark(2);
  const auto a = run_detection(net, small_config());
  const auto b = run_detection(net, small_config());
  EXPECT_EQ(a.training.loss_curve, b.training.loss_curve);
  EXPECT_EQ(a.scoring.scores.s_ahp, b.scoring.scores.s_ahp);
  EXPECT_EQ(a.scoring.scores.s_hav, b.scoring.scores.s_hav);
  EXPECT_EQ(a.scoring.auc_ahp, b.scoring.auc_ahp);
  ASSERT_TRUE(a.scoring.auc_ahp.has_value());
}

TEST(Run, DifferentSeedsDiffer) {
  const auto net = small_benchmark(2);
  auto cfg = small_config();
  const auto a = run_detection(net, cfg);
  cfg.seed = 4;
  EXPECT_NE(a.training.loss_curve, run_detection(net, cfg).training.loss_curve);
}

TEST(Run, NoiselessSgldWithDoubleStepMatchesSgd) {
  const auto net = small_benchmark(3);
  auto sgld = small_config();
  sgld.noise_scale = 0.0;
  sgld.lr = 0.2;
  auto sgd = small_config();
  sgd.optimizer = OptimizerKind::sgd;
  sgd.lr = 0.1;
  const auto a = run_detection(net, sgld);
  const auto b = run_detection(net, sgd);
  EXPECT_EQ(a.training.loss_curve, b.training.loss_curve);
  EXPECT_TRUE(a.training.params.same_weights(b.training.params));
  EXPECT_EQ(a.scoring.scores.s_ahp, b.scoring.scores.s_ahp);
}

TEST(Run, PosteriorSampleCountDoesNotPerturbTraining) {
  const auto net = small_benchmark(4);
  auto cfg = small_config();
  const auto a = run_detection(net, cfg);
  cfg.posterior_samples = 11;
  const auto b = run_detection(net, cfg);
  EXPECT_EQ(a.training.loss_curve, b.training.loss_curve);
}

TEST(Run, TrainThenScoreEqualsRun) {
  const auto net = small_benchmark(5);
  const auto cfg = small_config();
  const auto whole = run_detection(net, cfg);
  const auto graph = prepare_graph(net, cfg);
  const auto trained = train_model(net, graph, cfg);
  // Through a checkpoint file, as the CLI does it.
  const auto dir = scratch_dir("ckpt");
  io::save_checkpoint(dir / "c.json", trained.params, cfg);
  const auto ckpt = io::load_checkpoint(dir / "c.json");
  ASSERT_TRUE(ckpt.params.same_weights(trained.params));
  const auto scored = score_model(net, graph, *ckpt.config, ckpt.params);
  EXPECT_EQ(scored.scores.s_ahp, whole.scoring.scores.s_ahp);
  EXPECT_EQ(scored.scores.s_hav, whole.scoring.scores.s_hav);
}

TEST(Run, AucTraceHasOneEntryPerEpoch) {
  const auto net = small_benchmark(6);
  auto cfg = small_config();
  cfg.auc_trace = true;
  const auto r = run_detection(net, cfg);
  EXPECT_EQ(r.training.auc_trace.size(), cfg.burn_in_epochs);
  for (double a : r.training.auc_trace) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  cfg.auc_trace = false;
  EXPECT_EQ(run_detection(net, cfg).training.loss_curve, r.training.loss_curve);
}

TEST(Run, PcaFeaturesAndDroppedNeighborhood) {
  const auto net = small_benchmark(7);
  auto cfg = small_config();
  cfg.pca_dim = 3;
  cfg.neighborhood = Neighborhood::dropped;
  cfg.score = ScoreKind::hav;
  const auto r = run_detection(net, cfg);
  EXPECT_EQ(r.training.params.arch.gcn_dims.front(), 3u);
  const auto& s = r.scoring.scores;
  EXPECT_EQ(s.ranking, rank_descending(s.s_hav));
}

TEST(Run, ExpectedPredictionMode) {
  const auto net = small_benchmark(8);
  auto cfg = small_config();
  cfg.prediction = PredictionMode::expected;
  const auto r = run_detection(net, cfg);
  for (std::size_t i = 0; i < net.node_count; ++i) {
    if (r.scoring.scores.isolated[i]) continue;
    EXPECT_GE(r.scoring.scores.s_ahp[i], 1.0);
    EXPECT_LE(r.scoring.scores.s_ahp[i], 4.0);
  }
}

TEST(Config, RoundTrip) {
  RunConfig c = small_config();
  c.dataset = "d/manifest.json";
  c.output_dir = "out";
  c.drop_ratio = 0.15;
  c.optimizer = OptimizerKind::sgd;
  c.schedule = {true, 3.0, 0.6};
  c.score = ScoreKind::hav;
  c.neighborhood = Neighborhood::dropped;
  c.prediction = PredictionMode::expected;
  c.pca_dim = 20;
  c.use_bias = true;
  c.seed = 123456789012345ULL;
  const auto text = io::config_to_json(c).dump();
  const auto back = io::config_from_json(io::json::parse(text));
  EXPECT_EQ(io::config_to_json(back).dump(), text);
}

TEST(Config, PartialOverlayAndUnknownKeys) {
  RunConfig base = small_config();
  const auto c = io::config_from_json(io::json::parse(R"({"lr": 0.5, "classes": 5})"), base);
  EXPECT_EQ(c.lr, 0.5);
  EXPECT_EQ(c.classes, 5u);
  EXPECT_EQ(c.gcn_width, base.gcn_width);
  EXPECT_THROW(io::config_from_json(io::json::parse(R"({"learning_rate": 0.5})")), InputError);
  EXPECT_THROW(io::config_from_json(io::json::parse(R"({"lr": "fast"})")), InputError);
  EXPECT_THROW(io::config_from_json(io::json::parse(R"({"optimizer": "adam"})")), InputError);
}

TEST(Checkpoint, ExactRoundTripAndValidation) {
  Rng rng(1);
  auto p = init_params(ArchSpec::make(5, 2, 7, 9, 4, true), rng);
  p.mlp[0].bias[3] = 0.1 + 0.2;  // not representable in short decimal
  const auto j = io::checkpoint_to_json(p);
  const auto back = io::checkpoint_from_json(io::json::parse(j.dump()));
  EXPECT_TRUE(back.params.same_weights(p));
  EXPECT_FALSE(back.config.has_value());

  auto bad = j;
  bad["version"] = 99;
  EXPECT_THROW(io::checkpoint_from_json(bad), InputError);
  bad = j;
  bad["gcn"][0]["rows"] = 6;
  EXPECT_THROW(io::checkpoint_from_json(bad), InputError);
  bad = j;
  bad.erase("mlp");
  EXPECT_THROW(io::checkpoint_from_json(bad), InputError);
}

TEST(Network, SaveLoadRoundTrip) {
  const auto net = small_benchmark(9);
  const auto dir = scratch_dir("net");
  const auto manifest = io::save_network(net, dir);
  EXPECT_EQ(io::load_network(manifest), net);
  // Saving the loaded network again gives byte-identical files.
  const auto dir2 = scratch_dir("net2");
  io::save_network(io::load_network(manifest), dir2);
  for (const char* f : {"edges.csv", "attributes.csv", "labels.csv"})
    EXPECT_EQ(io::read_text(dir / f), io::read_text(dir2 / f)) << f;
}

TEST(Network, LoadValidatesInput) {
  const auto dir = scratch_dir("bad_net");
  io::write_text(dir / "edges.csv", "0,1\n1,5\n");
  io::write_text(dir / "attributes.csv", "1,2\n3,4\n5,6\n");
  io::write_text(dir / "manifest.json",
                 R"({"nodes": 3, "edges": "edges.csv", "attributes": "attributes.csv", "attribute_kind": "continuous"})");
  EXPECT_THROW(io::load_network(dir / "manifest.json"), InputError);
  io::write_text(dir / "edges.csv", "0,1\n1,1\n2,1\n");
  const auto net = io::load_network(dir / "manifest.json");
  EXPECT_EQ(net.edges, (std::vector<Edge>{{0, 1}, {1, 2}}));
  io::write_text(dir / "attributes.csv", "1,2\n3\n5,6\n");
  EXPECT_THROW(io::load_network(dir / "manifest.json"), InputError);
  io::write_text(dir / "attributes.csv", "1,2\n3,x\n5,6\n");
  EXPECT_THROW(io::load_network(dir / "manifest.json"), InputError);
  EXPECT_THROW(io::load_network(dir / "missing.json"), InputError);
}

TEST(Scores, CsvRoundTrip) {
  const auto net = small_benchmark(10);
  const auto r = run_detection(net, small_config());
  const auto dir = scratch_dir("scores");
  io::write_text(dir / "s.csv", io::scores_csv(r.scoring.scores, net.anomaly_flags));
  const auto t = io::read_scores_csv(dir / "s.csv");
  ASSERT_EQ(t.node_ids.size(), net.node_count);
  EXPECT_EQ(t.columns.at("s_ahp"), r.scoring.scores.s_ahp);
  EXPECT_EQ(t.columns.at("s_hav"), r.scoring.scores.s_hav);
  const auto m = io::metrics_json(small_config(), r, net);
  EXPECT_EQ(m["schema"], "hcm-metrics");
  EXPECT_EQ(m["auc_ahp"].get<double>(), *r.scoring.auc_ahp);
  EXPECT_EQ(m["loss_curve"].size(), small_config().burn_in_epochs);
}

}  // namespace
}  // namespace hcm
