// test_pipeline.cc

// Copyright 2026  gvec authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "gvec/pipeline.h"
#include "tests/test_util.h"

using namespace gvec;
using gvec::testing::TempDir;

namespace {

// Separable toy problem small enough for fast training.
SynthConfig ToySynth() {
  SynthConfig config;
  config.n_speakers = 8;
  config.per_speaker = 10;
  config.dim = 16;
  config.between_std = 1.0;
  config.within_std = 0.4;
  config.seed = 11;
  return config;
}

RunConfig ToyRun() {
  RunConfig config;
  config.threshold = 0.3;
  config.hidden = 16;
  config.gvec_dim = 8;
  config.heads = 2;
  config.epochs = 40;
  config.lr = 0.01;
  config.lda_dim = 6;
  config.plda_dim = 4;
  return config;
}

TrialList ToyTrials(const SynthData &data) {
  EmbeddingSet models =
      EnrollAverage(data.enroll, ModelMapFromLabels(data.enroll));
  return FullCrossTrials(models, data.test);
}

}  // namespace

TEST_CASE("config keys parse with strict types") {
  RunConfig config;
  config.Apply("threshold", "0.25");
  CHECK(config.threshold == 0.25);
  config.Apply("top_k", "4");
  CHECK(config.top_k == 4);
  config.Apply("gnn", "tagcn");
  config.Apply("dcf_normalize", "false");
  CHECK_FALSE(config.dcf_normalize);
  config.Apply("dev", "path/with spaces.gvec");
  CHECK(config.dev == "path/with spaces.gvec");

  CHECK_THROWS_AS(config.Apply("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(config.Apply("epochs", "12.5"), ConfigError);
  CHECK_THROWS_AS(config.Apply("epochs", ""), ConfigError);
  CHECK_THROWS_AS(config.Apply("lr", "fast"), ConfigError);
  CHECK_THROWS_AS(config.Apply("dcf_normalize", "yes"), ConfigError);
  CHECK_THROWS_AS(config.Apply("seed", "-1"), ConfigError);
}

TEST_CASE("config validation rejects bad enums and ranges") {
  RunConfig config;
  config.Validate();  // defaults are coherent
  config.node_transform = "pca";
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config = RunConfig();
  config.edge_metric = "euclid";
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config = RunConfig();
  config.gnn = "mlp";
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config = RunConfig();
  config.enroll_mode = "median";
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config = RunConfig();
  config.epochs = 0;
  CHECK_THROWS_AS(config.Validate(), ConfigError);
  config = RunConfig();
  config.p_target = 1.5;
  CHECK_THROWS_AS(config.Validate(), ConfigError);
}

TEST_CASE("key-value files skip comments and reject malformed lines") {
  TempDir dir;
  std::string path = dir.File("run.conf");
  {
    std::ofstream os(path);
    os << "# a demo\n\n  threshold =  8 \nout = runs/a\n";
  }
  auto pairs = ParseKeyValueFile(path);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0] == std::pair<std::string, std::string>("threshold", "8"));
  CHECK(pairs[1] == std::pair<std::string, std::string>("out", "runs/a"));

  {
    std::ofstream os(path);
    os << "threshold\n";
  }
  CHECK_THROWS_AS(ParseKeyValueFile(path), ConfigError);
  {
    std::ofstream os(path);
    os << "threshold = 1\nthreshold = 2\n";
  }
  CHECK_THROWS_AS(ParseKeyValueFile(path), ConfigError);
  CHECK_THROWS_AS(ParseKeyValueFile(dir.File("missing.conf")), DataError);
}

TEST_CASE("flag overrides outrank the config file") {
  TempDir dir;
  std::string path = dir.File("run.conf");
  {
    std::ofstream os(path);
    os << "epochs = 100\nout = a\n";
  }
  RunConfig config = LoadRunConfig(path, {{"epochs", "7"}, {"depth", "3"}});
  CHECK(config.epochs == 7);   // flag wins over file
  CHECK(config.depth == 3);    // flag wins over default
  CHECK(config.out == "a");    // file wins over default
  CHECK(config.hidden == 256); // untouched default

  auto merged = MergeKeyValues({{"a", "1"}, {"b", "2"}}, {{"b", "9"}});
  REQUIRE(merged.size() == 2);
  CHECK(merged[1].second == "9");
}

TEST_CASE("empty path keys resolve to fixed artifact names") {
  RunConfig config;
  config.out = "runs/x";
  CHECK(config.DevPath() ==
        (std::string("runs/x/") + artifact::kDev));
  CHECK(config.TrialsPath() ==
        (std::string("runs/x/") + artifact::kTrials));
  config.dev = "elsewhere.gvec";
  CHECK(config.DevPath() == "elsewhere.gvec");
  RunConfig no_out;
  CHECK_THROWS_AS(no_out.DevPath(), ConfigError);
}

TEST_CASE("node assembly lays out transductive labels") {
  SynthData data = GenerateSynth(ToySynth());
  FeatureSpaces f =
      AssembleFeatures(data.dev, data.dev.labels, data.enroll, data.test);
  CHECK(f.n_dev == data.dev.Count());
  CHECK(f.nodes.Count() == data.dev.Count() + data.enroll.Count() +
                               data.test.Count());
  CHECK(f.nodes.labels.empty());
  CHECK(f.class_names.size() == 8);
  CHECK(std::is_sorted(f.class_names.begin(), f.class_names.end()));
  REQUIRE(f.mask.size() == static_cast<std::size_t>(f.n_dev));
  for (int i = 0; i < f.n_dev; ++i) {
    CHECK(f.mask[i] == i);
    CHECK(f.class_names[f.labels[i]] == data.dev.labels.at(data.dev.ids[i]));
  }
  for (int i = f.n_dev; i < f.nodes.Count(); ++i) CHECK(f.labels[i] == -1);

  // An empty label map gives an unlabeled layout for extraction.
  FeatureSpaces bare = AssembleFeatures(data.dev, {}, data.enroll, data.test);
  CHECK(bare.mask.empty());
  CHECK(bare.class_names.empty());

  std::map<std::string, std::string> incomplete = data.dev.labels;
  incomplete.erase(data.dev.ids[0]);
  CHECK_THROWS_AS(
      AssembleFeatures(data.dev, incomplete, data.enroll, data.test),
      DataError);
}

TEST_CASE("feature building matches the manual preprocessing chain") {
  SynthData data = GenerateSynth(ToySynth());
  RunConfig config = ToyRun();
  FeatureSpaces f = BuildFeatures(config, data.dev, data.enroll, data.test);
  Eigen::VectorXd mean = MeanVector(data.dev);
  EmbeddingSet manual = LengthNormalize(Center(data.dev, mean));
  CHECK((f.nodes.vectors.topRows(f.n_dev) - manual.vectors)
            .cwiseAbs()
            .maxCoeff() == 0.0f);
  CHECK(!f.edge_plda.has_value());
  CHECK(f.edges.Count() == f.nodes.Count());

  config.node_transform = "lda";
  config.edge_metric = "lda_plda";
  FeatureSpaces lda = BuildFeatures(config, data.dev, data.enroll, data.test);
  CHECK(lda.nodes.Dim() == config.lda_dim);
  CHECK(lda.edges.Dim() == config.lda_dim);
  CHECK(lda.edge_plda.has_value());

  EmbeddingSet unlabeled = data.dev;
  unlabeled.labels.clear();
  CHECK_THROWS_AS(BuildFeatures(config, unlabeled, data.enroll, data.test),
                  DataError);
}

TEST_CASE("the edge rule needs exactly one of threshold and top_k") {
  SynthData data = GenerateSynth(ToySynth());
  RunConfig config = ToyRun();
  FeatureSpaces f = BuildFeatures(config, data.dev, data.enroll, data.test);

  Graph direct = BuildGraphThreshold(CosineSimilarity(f.edges), 0.3);
  Graph staged = BuildGraphStage(config, f);
  CHECK(staged.num_nodes == direct.num_nodes);
  CHECK(staged.edges == direct.edges);

  config.top_k = 3;
  CHECK_THROWS_AS(BuildGraphStage(config, f), ConfigError);  // both set
  config.threshold = std::numeric_limits<double>::quiet_NaN();
  Graph top = BuildGraphStage(config, f);
  CHECK(top.num_nodes == f.nodes.Count());
  config.top_k = 0;
  CHECK_THROWS_AS(BuildGraphStage(config, f), ConfigError);  // neither set
}

TEST_CASE("training and extraction run deterministically end to end") {
  SynthData data = GenerateSynth(ToySynth());
  RunConfig config = ToyRun();
  FeatureSpaces f = BuildFeatures(config, data.dev, data.enroll, data.test);
  Graph graph = BuildGraphStage(config, f);

  TrainOutput first = TrainStage(config, f, graph);
  REQUIRE(first.history.size() == static_cast<std::size_t>(config.epochs));
  CHECK(first.history.back() < first.history.front());

  GvectorSets gvecs = ExtractStage(&first.model, graph, f);
  CHECK(gvecs.dev.Count() == f.n_dev);
  CHECK(gvecs.enroll.Count() == f.n_enroll);
  CHECK(gvecs.test.Count() == f.n_test);
  CHECK(gvecs.test.Dim() == config.gvec_dim);

  TrainOutput second = TrainStage(config, f, graph);
  GvectorSets again = ExtractStage(&second.model, graph, f);
  CHECK((gvecs.test.vectors == again.test.vectors));

  Graph wrong = graph;
  ++wrong.num_nodes;
  CHECK_THROWS_AS(TrainStage(config, f, wrong), DataError);
}

TEST_CASE("score stage reduces to enrollment averaging plus pair scoring") {
  SynthData data = GenerateSynth(ToySynth());
  TrialList trials = ToyTrials(data);
  RunConfig config = ToyRun();
  ScoreSet staged = ScoreStage(config, data.enroll, data.enroll.labels,
                               data.test, trials, nullptr);
  EmbeddingSet models =
      EnrollAverage(data.enroll, ModelMapFromLabels(data.enroll));
  ScoreSet direct =
      ScoreTrials(trials, models, data.test, CosinePairScorer());
  REQUIRE(staged.entries.size() == direct.entries.size());
  for (std::size_t k = 0; k < staged.entries.size(); ++k)
    CHECK(staged.entries[k].score == direct.entries[k].score);

  std::map<std::string, std::string> incomplete = data.enroll.labels;
  incomplete.erase(data.enroll.ids[0]);
  CHECK_THROWS_AS(ScoreStage(config, data.enroll, incomplete, data.test,
                             trials, nullptr),
                  DataError);
  config.scorer = "plda";
  CHECK_THROWS_AS(ScoreStage(config, data.enroll, data.enroll.labels,
                             data.test, trials, nullptr),
                  DataError);  // no labeled dev vectors given
}

TEST_CASE("eval stage honors the configured conventions") {
  ScoreSet scores;
  scores.entries = {{"m", "a", 0.5, TrialKey::kTarget},
                    {"m", "b", 0.9, TrialKey::kTarget},
                    {"m", "c", 0.1, TrialKey::kNontarget},
                    {"m", "d", 0.5, TrialKey::kNontarget}};
  RunConfig config;
  EvalReport report = EvalStage(config, scores);
  CHECK(report.eer_percent == doctest::Approx(25.0).epsilon(1e-12));
  CHECK(report.det.size() == 4);  // 3 distinct scores + reject-all
  config.eer_convention = "max_rate";
  CHECK(EvalStage(config, scores).eer_percent ==
        doctest::Approx(50.0).epsilon(1e-12));
  config.dcf_normalize = false;
  CHECK(EvalStage(config, scores).min_dcf ==
        doctest::Approx(ComputeMinDcf(scores, config.Dcf())).epsilon(1e-12));
}

TEST_CASE("backends rank a separable toy problem sensibly") {
  SynthConfig synth = ToySynth();
  synth.within_std = 0.25;
  SynthData data = GenerateSynth(synth);
  TrialList trials = ToyTrials(data);
  RunConfig config = ToyRun();

  EvalReport cosine =
      RunCosineBackend(config, data.dev, data.enroll, data.test, trials);
  CHECK(cosine.eer_percent < 5.0);
  EvalReport plda =
      RunLdaPldaBackend(config, data.dev, data.enroll, data.test, trials);
  CHECK(std::isfinite(plda.eer_percent));
  CHECK(plda.min_dcf <= 1.0);
  EvalReport graph =
      RunGnnBackend(config, data.dev, data.enroll, data.test, trials);
  CHECK(graph.eer_percent < 15.0);

  // Same config, same data: bitwise-identical metrics.
  EvalReport rerun =
      RunGnnBackend(config, data.dev, data.enroll, data.test, trials);
  CHECK(rerun.eer_percent == graph.eer_percent);
  CHECK(rerun.min_dcf == graph.min_dcf);
}
