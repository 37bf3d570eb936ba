// gvec/pipeline.h

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

#ifndef GVEC_PIPELINE_H_
#define GVEC_PIPELINE_H_

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gvec/embedding.h"
#include "gvec/gnn.h"
#include "gvec/graph.h"
#include "gvec/preproc.h"
#include "gvec/scoring.h"
#include "gvec/synth.h"

// End-to-end verification pipeline: preprocess embeddings, build the
// similarity graph over dev + enroll + test nodes, train the network
// transductively on the labeled dev nodes, extract g-vectors, score
// trials, and report metrics.  One flat key=value configuration drives
// every stage; the command layer adds fixed artifact names under the
// output directory so stages chain without repeating paths.

namespace gvec {

// Fixed artifact file names inside the output directory.  Empty path
// keys in the configuration resolve to these.
namespace artifact {
inline constexpr const char *kDev = "dev.gvec";
inline constexpr const char *kDevLabels = "dev.labels";
inline constexpr const char *kEnroll = "enroll.gvec";
inline constexpr const char *kEnrollLabels = "enroll.labels";
inline constexpr const char *kTest = "test.gvec";
inline constexpr const char *kTestLabels = "test.labels";
inline constexpr const char *kTrials = "trials.txt";
inline constexpr const char *kNodesDev = "nodes_dev.gvec";
inline constexpr const char *kNodesEnroll = "nodes_enroll.gvec";
inline constexpr const char *kNodesTest = "nodes_test.gvec";
inline constexpr const char *kEdgeSpace = "edges_all.gvec";
inline constexpr const char *kEdgePlda = "edge_plda.gpld";
inline constexpr const char *kGraph = "graph.txt";
inline constexpr const char *kModel = "model.gnnm";
inline constexpr const char *kTrainLoss = "train_loss.csv";
inline constexpr const char *kGvecDev = "gvec_dev.gvec";
inline constexpr const char *kGvecEnroll = "gvec_enroll.gvec";
inline constexpr const char *kGvecTest = "gvec_test.gvec";
inline constexpr const char *kScores = "scores.txt";
inline constexpr const char *kMetricsCsv = "metrics.csv";
inline constexpr const char *kDetCsv = "det.csv";
}  // namespace artifact

// Every pipeline knob, with the stage defaults.  Values come from
// (highest precedence first) command-line overrides, the config file,
// then these defaults.  Unknown keys are rejected.
struct RunConfig {
  // Paths.  Empty input paths resolve to the fixed artifact names
  // under `out`, so a generated dataset chains without restating them.
  std::string out;
  std::string dev, dev_labels;
  std::string enroll, enroll_labels;
  std::string test, test_labels;
  std::string trials;

  // Synthetic data generation.
  int synth_speakers = 20;
  int synth_per_speaker = 20;
  int synth_dim = 50;
  double synth_between_std = 1.0;
  double synth_within_std = 0.3;
  std::uint64_t synth_seed = 1;

  // Node features and edge similarity space.
  std::string node_transform = "raw";  // raw | lda
  int lda_dim = 250;
  std::string edge_metric = "cosine";  // cosine | lda_cosine | lda_plda
  int plda_dim = 50;
  int plda_iters = 20;
  // Edge rule: exactly one of the two must be set where a graph is
  // built (threshold finite, or top_k > 0).
  double threshold = std::numeric_limits<double>::quiet_NaN();
  int top_k = 0;

  // Network.
  std::string gnn = "gat";
  int depth = 2;
  int hidden = 256;
  int gvec_dim = 250;
  int heads = 4;
  int hops = 3;
  int epochs = 600;
  double lr = 1e-4;
  double weight_decay = 5e-4;
  std::uint64_t seed = 17;
  std::string activation = "relu";  // relu | identity

  // Trial scoring and metrics.
  std::string scorer = "cosine";             // cosine | plda
  std::string enroll_mode = "average";       // average | score_mean
  std::string eer_convention = "interpolate";  // interpolate | max_rate
  double c_miss = 1.0;
  double c_fa = 1.0;
  double p_target = 0.01;
  bool dcf_normalize = true;

  // Sets one key from its text form; ConfigError on unknown keys or
  // unparseable values.
  void Apply(const std::string &key, const std::string &value);
  // Enum membership and range checks shared by every command.
  void Validate() const;

  // Resolved input paths (explicit value, or the artifact default).
  std::string DevPath() const;
  std::string DevLabelsPath() const;
  std::string EnrollPath() const;
  std::string EnrollLabelsPath() const;
  std::string TestPath() const;
  std::string TestLabelsPath() const;
  std::string TrialsPath() const;
  std::string OutPath(const std::string &name) const;

  SynthConfig Synth() const;
  // Assembles the network configuration for the given data shape.
  GnnConfig Gnn(int in_dim, int n_classes) const;
  DcfParams Dcf() const;
  EerConvention Eer() const;
};

// Ordered key=value pairs from a flat config file.  Blank lines and
// '#' comments are skipped; duplicate keys are a ConfigError.
std::vector<std::pair<std::string, std::string>> ParseKeyValueFile(
    const std::string &path);

// Defaults overlaid with the file (when non-empty) and then the
// override pairs, in that order.
RunConfig LoadRunConfig(
    const std::string &config_path,
    const std::vector<std::pair<std::string, std::string>> &overrides);

// `base` with each override key replaced or appended, order kept.
std::vector<std::pair<std::string, std::string>> MergeKeyValues(
    const std::vector<std::pair<std::string, std::string>> &base,
    const std::vector<std::pair<std::string, std::string>> &overrides);

// In-memory stages -------------------------------------------------

// Node features, edge-space vectors, and the transductive label
// layout for the concatenated dev | enroll | test node order.
struct FeatureSpaces {
  EmbeddingSet nodes;  // unlabeled; order dev, enroll, test
  EmbeddingSet edges;  // same order, in the edge similarity space
  std::optional<PldaModel> edge_plda;
  int n_dev = 0, n_enroll = 0, n_test = 0;
  std::vector<int> labels;              // class per node, -1 unlabeled
  std::vector<int> mask;                // labeled dev node indices
  std::vector<std::string> class_names;  // class index -> speaker
};

// Concatenates already-transformed node features and lays out the
// transductive labels; pass an empty label map for an unlabeled
// layout (extraction only).
FeatureSpaces AssembleFeatures(
    const EmbeddingSet &nodes_dev,
    const std::map<std::string, std::string> &dev_labels,
    const EmbeddingSet &nodes_enroll, const EmbeddingSet &nodes_test);

// Center on the dev mean, length-normalize, and project per
// `node_transform` / `edge_metric`; fits LDA and the edge scoring
// model on dev only.  Dev must be labeled.
FeatureSpaces BuildFeatures(const RunConfig &config, const EmbeddingSet &dev,
                            const EmbeddingSet &enroll,
                            const EmbeddingSet &test);

// Similarity graph over the edge-space vectors per the edge rule
// (exactly one of threshold / top_k must be set).
Graph BuildGraphStage(const RunConfig &config, const EmbeddingSet &edge_vecs,
                      const PldaModel *edge_plda);
Graph BuildGraphStage(const RunConfig &config, const FeatureSpaces &features);

struct TrainOutput {
  GnnModel<float> model;
  std::vector<double> history;  // pre-update loss per epoch
};

TrainOutput TrainStage(const RunConfig &config, const FeatureSpaces &features,
                       const Graph &graph);

// G-vectors for all nodes, split back into the three input sets.
struct GvectorSets {
  EmbeddingSet dev, enroll, test;  // unlabeled
};

GvectorSets ExtractStage(GnnModel<float> *model, const Graph &graph,
                         const FeatureSpaces &features);

// Groups enrollment vectors into per-speaker models and scores the
// trials.  `enroll_labels` maps enrollment ids to speakers;
// `dev_for_plda` supplies labeled vectors when scorer = plda.
ScoreSet ScoreStage(const RunConfig &config, const EmbeddingSet &enroll_vecs,
                    const std::map<std::string, std::string> &enroll_labels,
                    const EmbeddingSet &test_vecs, const TrialList &trials,
                    const EmbeddingSet *dev_for_plda);

struct EvalReport {
  double eer_percent = 0.0;
  double min_dcf = 0.0;
  std::vector<DetPoint> det;
};

// Metrics from a keyed score set, under the configured conventions.
EvalReport EvalStage(const RunConfig &config, const ScoreSet &scores);

// Whole backends on in-memory data (dev labeled, trials keyed).
// The graph backend runs the full feature/graph/train/extract/score
// chain; the baselines score the preprocessed embeddings directly.
EvalReport RunGnnBackend(const RunConfig &config, const EmbeddingSet &dev,
                         const EmbeddingSet &enroll, const EmbeddingSet &test,
                         const TrialList &trials);
EvalReport RunCosineBackend(const RunConfig &config, const EmbeddingSet &dev,
                            const EmbeddingSet &enroll,
                            const EmbeddingSet &test, const TrialList &trials);
EvalReport RunLdaPldaBackend(const RunConfig &config, const EmbeddingSet &dev,
                             const EmbeddingSet &enroll,
                             const EmbeddingSet &test,
                             const TrialList &trials);

// Disk commands ----------------------------------------------------
// Each validates and loads every input before writing any artifact,
// and is bitwise idempotent for identical inputs and seeds.

void CmdSynth(const RunConfig &config);
void CmdPreprocess(const RunConfig &config);
void CmdBuildGraph(const RunConfig &config);
void CmdTrain(const RunConfig &config);
void CmdExtract(const RunConfig &config);
void CmdScore(const RunConfig &config);
EvalReport CmdEval(const RunConfig &config);
// preprocess .. eval in sequence through the on-disk artifacts.
EvalReport CmdRun(const RunConfig &config);

struct SweepRun {
  std::string value;  // literal list element
  EvalReport report;
};

// Expands the single comma-list key among `pairs` into one full run
// per value under "<out>/<key>_<value>/" and writes a summary CSV
// "<key>,eer_percent,min_dcf" to "<out>/sweep.csv".
std::vector<SweepRun> CmdSweep(
    const std::vector<std::pair<std::string, std::string>> &pairs);

}  // namespace gvec

#endif  // GVEC_PIPELINE_H_
