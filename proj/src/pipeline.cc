// pipeline.cc

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

#include "gvec/pipeline.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

namespace gvec {

namespace {

std::string Trim(const std::string &s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int ParseInt(const std::string &key, const std::string &value) {
  char *end = nullptr;
  errno = 0;
  long v = std::strtol(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size() || errno != 0)
    throw ConfigError("key '" + key + "' needs an integer, got '" + value +
                      "'");
  return static_cast<int>(v);
}

std::uint64_t ParseU64(const std::string &key, const std::string &value) {
  char *end = nullptr;
  errno = 0;
  unsigned long long v = std::strtoull(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size() || errno != 0 ||
      value[0] == '-')
    throw ConfigError("key '" + key + "' needs a non-negative integer, got '" +
                      value + "'");
  return static_cast<std::uint64_t>(v);
}

double ParseDouble(const std::string &key, const std::string &value) {
  char *end = nullptr;
  errno = 0;
  double v = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || errno != 0)
    throw ConfigError("key '" + key + "' needs a number, got '" + value + "'");
  return v;
}

bool ParseBool(const std::string &key, const std::string &value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("key '" + key + "' needs true or false, got '" + value +
                    "'");
}

void CheckChoice(const std::string &key, const std::string &value,
                 const std::vector<std::string> &choices) {
  if (std::find(choices.begin(), choices.end(), value) != choices.end())
    return;
  std::string menu;
  for (const std::string &c : choices) menu += (menu.empty() ? "" : ", ") + c;
  throw ConfigError("key '" + key + "' must be one of {" + menu + "}, got '" +
                    value + "'");
}

std::string FormatG(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

}  // namespace

void RunConfig::Apply(const std::string &key, const std::string &value) {
  if (key == "out") out = value;
  else if (key == "dev") dev = value;
  else if (key == "dev_labels") dev_labels = value;
  else if (key == "enroll") enroll = value;
  else if (key == "enroll_labels") enroll_labels = value;
  else if (key == "test") test = value;
  else if (key == "test_labels") test_labels = value;
  else if (key == "trials") trials = value;
  else if (key == "synth_speakers") synth_speakers = ParseInt(key, value);
  else if (key == "synth_per_speaker")
    synth_per_speaker = ParseInt(key, value);
  else if (key == "synth_dim") synth_dim = ParseInt(key, value);
  else if (key == "synth_between_std")
    synth_between_std = ParseDouble(key, value);
  else if (key == "synth_within_std")
    synth_within_std = ParseDouble(key, value);
  else if (key == "synth_seed") synth_seed = ParseU64(key, value);
  else if (key == "node_transform") node_transform = value;
  else if (key == "lda_dim") lda_dim = ParseInt(key, value);
  else if (key == "edge_metric") edge_metric = value;
  else if (key == "plda_dim") plda_dim = ParseInt(key, value);
  else if (key == "plda_iters") plda_iters = ParseInt(key, value);
  else if (key == "threshold") threshold = ParseDouble(key, value);
  else if (key == "top_k") top_k = ParseInt(key, value);
  else if (key == "gnn") gnn = value;
  else if (key == "depth") depth = ParseInt(key, value);
  else if (key == "hidden") hidden = ParseInt(key, value);
  else if (key == "gvec_dim") gvec_dim = ParseInt(key, value);
  else if (key == "heads") heads = ParseInt(key, value);
  else if (key == "hops") hops = ParseInt(key, value);
  else if (key == "epochs") epochs = ParseInt(key, value);
  else if (key == "lr") lr = ParseDouble(key, value);
  else if (key == "weight_decay") weight_decay = ParseDouble(key, value);
  else if (key == "seed") seed = ParseU64(key, value);
  else if (key == "activation") activation = value;
  else if (key == "scorer") scorer = value;
  else if (key == "enroll_mode") enroll_mode = value;
  else if (key == "eer_convention") eer_convention = value;
  else if (key == "c_miss") c_miss = ParseDouble(key, value);
  else if (key == "c_fa") c_fa = ParseDouble(key, value);
  else if (key == "p_target") p_target = ParseDouble(key, value);
  else if (key == "dcf_normalize") dcf_normalize = ParseBool(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::Validate() const {
  CheckChoice("node_transform", node_transform, {"raw", "lda"});
  CheckChoice("edge_metric", edge_metric,
              {"cosine", "lda_cosine", "lda_plda"});
  CheckChoice("activation", activation, {"relu", "identity"});
  CheckChoice("scorer", scorer, {"cosine", "plda"});
  CheckChoice("enroll_mode", enroll_mode, {"average", "score_mean"});
  CheckChoice("eer_convention", eer_convention, {"interpolate", "max_rate"});
  VariantFromName(gnn);  // ConfigError on unknown variant
  if (lda_dim < 1) throw ConfigError("lda_dim must be positive");
  if (plda_dim < 1) throw ConfigError("plda_dim must be positive");
  if (plda_iters < 1) throw ConfigError("plda_iters must be positive");
  if (top_k < 0) throw ConfigError("top_k must be non-negative");
  if (depth < 1) throw ConfigError("depth must be positive");
  if (hidden < 1) throw ConfigError("hidden must be positive");
  if (gvec_dim < 1) throw ConfigError("gvec_dim must be positive");
  if (heads < 1) throw ConfigError("heads must be positive");
  if (hops < 1) throw ConfigError("hops must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0)
    throw ConfigError("weight_decay must be non-negative");
  Synth().Validate();
  Dcf().Validate();
}

std::string RunConfig::OutPath(const std::string &name) const {
  if (out.empty())
    throw ConfigError("out must be set to resolve '" + name + "'");
  return (std::filesystem::path(out) / name).string();
}

std::string RunConfig::DevPath() const {
  return dev.empty() ? OutPath(artifact::kDev) : dev;
}
std::string RunConfig::DevLabelsPath() const {
  return dev_labels.empty() ? OutPath(artifact::kDevLabels) : dev_labels;
}
std::string RunConfig::EnrollPath() const {
  return enroll.empty() ? OutPath(artifact::kEnroll) : enroll;
}
std::string RunConfig::EnrollLabelsPath() const {
  return enroll_labels.empty() ? OutPath(artifact::kEnrollLabels)
                               : enroll_labels;
}
std::string RunConfig::TestPath() const {
  return test.empty() ? OutPath(artifact::kTest) : test;
}
std::string RunConfig::TestLabelsPath() const {
  return test_labels.empty() ? OutPath(artifact::kTestLabels) : test_labels;
}
std::string RunConfig::TrialsPath() const {
  return trials.empty() ? OutPath(artifact::kTrials) : trials;
}

SynthConfig RunConfig::Synth() const {
  SynthConfig config;
  config.n_speakers = synth_speakers;
  config.per_speaker = synth_per_speaker;
  config.dim = synth_dim;
  config.between_std = synth_between_std;
  config.within_std = synth_within_std;
  config.seed = synth_seed;
  return config;
}

GnnConfig RunConfig::Gnn(int in_dim, int n_classes) const {
  GnnConfig config;
  config.variant = VariantFromName(gnn);
  config.depth = depth;
  config.in_dim = in_dim;
  config.hidden_dim = hidden;
  config.gvec_dim = gvec_dim;
  config.n_classes = n_classes;
  config.heads = heads;
  config.hops = hops;
  config.epochs = epochs;
  config.learning_rate = lr;
  config.weight_decay = weight_decay;
  config.seed = seed;
  config.activation = activation == "identity" ? GnnActivation::kIdentity
                                               : GnnActivation::kRelu;
  config.Validate();
  return config;
}

DcfParams RunConfig::Dcf() const {
  DcfParams params;
  params.c_miss = c_miss;
  params.c_fa = c_fa;
  params.p_target = p_target;
  params.normalize = dcf_normalize;
  return params;
}

EerConvention RunConfig::Eer() const {
  return eer_convention == "max_rate" ? EerConvention::kMaxRate
                                      : EerConvention::kInterpolate;
}

std::vector<std::pair<std::string, std::string>> ParseKeyValueFile(
    const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config file '" + path + "'");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string text = Trim(line);
    if (text.empty() || text[0] == '#') continue;
    std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    std::string key = Trim(text.substr(0, eq));
    std::string value = Trim(text.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": empty config key");
    if (!seen.insert(key).second)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    pairs.emplace_back(key, value);
  }
  return pairs;
}

std::vector<std::pair<std::string, std::string>> MergeKeyValues(
    const std::vector<std::pair<std::string, std::string>> &base,
    const std::vector<std::pair<std::string, std::string>> &overrides) {
  std::vector<std::pair<std::string, std::string>> merged = base;
  for (const auto &[key, value] : overrides) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const auto &p) { return p.first == key; });
    if (it == merged.end())
      merged.emplace_back(key, value);
    else
      it->second = value;
  }
  return merged;
}

RunConfig LoadRunConfig(
    const std::string &config_path,
    const std::vector<std::pair<std::string, std::string>> &overrides) {
  std::vector<std::pair<std::string, std::string>> pairs;
  if (!config_path.empty()) pairs = ParseKeyValueFile(config_path);
  pairs = MergeKeyValues(pairs, overrides);
  RunConfig config;
  for (const auto &[key, value] : pairs) config.Apply(key, value);
  config.Validate();
  return config;
}

// In-memory stages -------------------------------------------------

FeatureSpaces AssembleFeatures(
    const EmbeddingSet &nodes_dev,
    const std::map<std::string, std::string> &dev_labels,
    const EmbeddingSet &nodes_enroll, const EmbeddingSet &nodes_test) {
  nodes_dev.Validate();
  nodes_enroll.Validate();
  nodes_test.Validate();
  FeatureSpaces f;
  f.n_dev = nodes_dev.Count();
  f.n_enroll = nodes_enroll.Count();
  f.n_test = nodes_test.Count();

  EmbeddingSet a = nodes_dev, b = nodes_enroll, c = nodes_test;
  a.labels.clear();
  b.labels.clear();
  c.labels.clear();
  f.nodes = Concat({&a, &b, &c});

  int n = f.nodes.Count();
  f.labels.assign(n, -1);
  if (!dev_labels.empty()) {
    std::set<std::string> names;
    for (const std::string &id : nodes_dev.ids) {
      auto it = dev_labels.find(id);
      if (it == dev_labels.end())
        throw DataError("development id '" + id + "' has no label");
      names.insert(it->second);
    }
    if (names.size() < 2)
      throw DataError("development labels cover fewer than 2 speakers");
    f.class_names.assign(names.begin(), names.end());
    std::map<std::string, int> index;
    for (std::size_t k = 0; k < f.class_names.size(); ++k)
      index[f.class_names[k]] = static_cast<int>(k);
    f.mask.reserve(f.n_dev);
    for (int i = 0; i < f.n_dev; ++i) {
      f.labels[i] = index.at(dev_labels.at(nodes_dev.ids[i]));
      f.mask.push_back(i);
    }
  }
  return f;
}

FeatureSpaces BuildFeatures(const RunConfig &config, const EmbeddingSet &dev,
                            const EmbeddingSet &enroll,
                            const EmbeddingSet &test) {
  config.Validate();
  dev.Validate();
  enroll.Validate();
  test.Validate();
  if (dev.labels.empty())
    throw DataError("the development set must be labeled");
  if (enroll.Dim() != dev.Dim() || test.Dim() != dev.Dim())
    throw DataError("dev, enroll, and test dimensions disagree");

  Eigen::VectorXd mean = MeanVector(dev);
  EmbeddingSet dev_cn = LengthNormalize(Center(dev, mean));
  EmbeddingSet enroll_cn = LengthNormalize(Center(enroll, mean));
  EmbeddingSet test_cn = LengthNormalize(Center(test, mean));

  bool need_lda =
      config.node_transform == "lda" || config.edge_metric != "cosine";
  EmbeddingSet dev_l, enroll_l, test_l;
  if (need_lda) {
    LdaTransform lda = FitLda(dev_cn, config.lda_dim);
    dev_l = LengthNormalize(ApplyLda(lda, dev_cn));
    enroll_l = LengthNormalize(ApplyLda(lda, enroll_cn));
    test_l = LengthNormalize(ApplyLda(lda, test_cn));
  }

  bool lda_nodes = config.node_transform == "lda";
  FeatureSpaces f = AssembleFeatures(lda_nodes ? dev_l : dev_cn, dev.labels,
                                     lda_nodes ? enroll_l : enroll_cn,
                                     lda_nodes ? test_l : test_cn);

  bool lda_edges = config.edge_metric != "cosine";
  EmbeddingSet ea = lda_edges ? dev_l : dev_cn;
  EmbeddingSet eb = lda_edges ? enroll_l : enroll_cn;
  EmbeddingSet ec = lda_edges ? test_l : test_cn;
  ea.labels.clear();
  eb.labels.clear();
  ec.labels.clear();
  f.edges = Concat({&ea, &eb, &ec});
  if (config.edge_metric == "lda_plda")
    f.edge_plda = FitPlda(dev_l, config.plda_dim, config.plda_iters);
  return f;
}

Graph BuildGraphStage(const RunConfig &config, const EmbeddingSet &edge_vecs,
                      const PldaModel *edge_plda) {
  bool has_threshold = std::isfinite(config.threshold);
  bool has_top_k = config.top_k > 0;
  if (has_threshold == has_top_k)
    throw ConfigError("set exactly one of threshold and top_k");
  if (config.edge_metric == "lda_plda" && edge_plda == nullptr)
    throw DataError("edge metric lda_plda needs the fitted edge model");
  SimilarityMatrix sim = edge_plda != nullptr
                             ? PldaSimilarity(*edge_plda, edge_vecs)
                             : CosineSimilarity(edge_vecs);
  return has_threshold ? BuildGraphThreshold(sim, config.threshold)
                       : BuildGraphTopK(sim, config.top_k);
}

Graph BuildGraphStage(const RunConfig &config,
                      const FeatureSpaces &features) {
  return BuildGraphStage(config, features.edges,
                         features.edge_plda ? &*features.edge_plda : nullptr);
}

TrainOutput TrainStage(const RunConfig &config, const FeatureSpaces &features,
                       const Graph &graph) {
  if (graph.num_nodes != features.nodes.Count())
    throw DataError("graph has " + std::to_string(graph.num_nodes) +
                    " nodes but " + std::to_string(features.nodes.Count()) +
                    " feature rows were given");
  if (features.mask.empty())
    throw DataError("training needs labeled development nodes");
  GnnConfig gnn_config = config.Gnn(
      features.nodes.Dim(), static_cast<int>(features.class_names.size()));
  TrainOutput out{GnnModel<float>(gnn_config), {}};
  GraphContext<float> ctx = GraphContext<float>::FromGraph(graph);
  out.history = TrainGnn(&out.model, ctx, features.nodes.vectors,
                         features.labels, features.mask);
  return out;
}

GvectorSets ExtractStage(GnnModel<float> *model, const Graph &graph,
                         const FeatureSpaces &features) {
  GraphContext<float> ctx = GraphContext<float>::FromGraph(graph);
  EmbeddingSet all = ExtractGvectors(model, ctx, features.nodes);
  const std::vector<std::string> &ids = features.nodes.ids;
  auto slice = [&](int begin, int count) {
    return all.Subset(std::vector<std::string>(ids.begin() + begin,
                                               ids.begin() + begin + count));
  };
  GvectorSets out;
  out.dev = slice(0, features.n_dev);
  out.enroll = slice(features.n_dev, features.n_enroll);
  out.test = slice(features.n_dev + features.n_enroll, features.n_test);
  return out;
}

ScoreSet ScoreStage(const RunConfig &config, const EmbeddingSet &enroll_vecs,
                    const std::map<std::string, std::string> &enroll_labels,
                    const EmbeddingSet &test_vecs, const TrialList &trials,
                    const EmbeddingSet *dev_for_plda) {
  enroll_vecs.Validate();
  test_vecs.Validate();
  trials.Validate();
  EmbeddingSet labeled = enroll_vecs;
  labeled.labels.clear();
  for (const std::string &id : labeled.ids) {
    auto it = enroll_labels.find(id);
    if (it == enroll_labels.end())
      throw DataError("enrollment id '" + id + "' has no speaker label");
    labeled.labels[id] = it->second;
  }
  ModelMap models = ModelMapFromLabels(labeled);

  std::unique_ptr<PairScorer> scorer;
  if (config.scorer == "plda") {
    if (dev_for_plda == nullptr || dev_for_plda->labels.empty())
      throw DataError("the plda trial scorer needs labeled development "
                      "vectors in the scoring space");
    scorer = std::make_unique<PldaPairScorer>(
        FitPlda(*dev_for_plda, config.plda_dim, config.plda_iters));
  } else {
    scorer = std::make_unique<CosinePairScorer>();
  }

  if (config.enroll_mode == "score_mean")
    return ScoreTrialsMemberMean(trials, labeled, models, test_vecs, *scorer);
  EmbeddingSet averaged = EnrollAverage(labeled, models);
  return ScoreTrials(trials, averaged, test_vecs, *scorer);
}

EvalReport EvalStage(const RunConfig &config, const ScoreSet &scores) {
  EvalReport report;
  report.eer_percent = ComputeEer(scores, config.Eer());
  report.min_dcf = ComputeMinDcf(scores, config.Dcf());
  report.det = DetCurve(scores);
  return report;
}

EvalReport RunGnnBackend(const RunConfig &config, const EmbeddingSet &dev,
                         const EmbeddingSet &enroll, const EmbeddingSet &test,
                         const TrialList &trials) {
  FeatureSpaces features = BuildFeatures(config, dev, enroll, test);
  Graph graph = BuildGraphStage(config, features);
  TrainOutput trained = TrainStage(config, features, graph);
  GvectorSets gvecs = ExtractStage(&trained.model, graph, features);
  gvecs.dev.labels = dev.labels;
  ScoreSet scores = ScoreStage(config, gvecs.enroll, enroll.labels,
                               gvecs.test, trials, &gvecs.dev);
  return EvalStage(config, scores);
}

EvalReport RunCosineBackend(const RunConfig &config, const EmbeddingSet &dev,
                            const EmbeddingSet &enroll,
                            const EmbeddingSet &test,
                            const TrialList &trials) {
  config.Validate();
  dev.Validate();
  Eigen::VectorXd mean = MeanVector(dev);
  EmbeddingSet enroll_cn = LengthNormalize(Center(enroll, mean));
  EmbeddingSet test_cn = LengthNormalize(Center(test, mean));
  RunConfig cosine = config;
  cosine.scorer = "cosine";
  ScoreSet scores =
      ScoreStage(cosine, enroll_cn, enroll.labels, test_cn, trials, nullptr);
  return EvalStage(config, scores);
}

EvalReport RunLdaPldaBackend(const RunConfig &config, const EmbeddingSet &dev,
                             const EmbeddingSet &enroll,
                             const EmbeddingSet &test,
                             const TrialList &trials) {
  config.Validate();
  dev.Validate();
  if (dev.labels.empty())
    throw DataError("the development set must be labeled");
  Eigen::VectorXd mean = MeanVector(dev);
  EmbeddingSet dev_cn = LengthNormalize(Center(dev, mean));
  EmbeddingSet enroll_cn = LengthNormalize(Center(enroll, mean));
  EmbeddingSet test_cn = LengthNormalize(Center(test, mean));
  LdaTransform lda = FitLda(dev_cn, config.lda_dim);
  EmbeddingSet dev_l = LengthNormalize(ApplyLda(lda, dev_cn));
  EmbeddingSet enroll_l = LengthNormalize(ApplyLda(lda, enroll_cn));
  EmbeddingSet test_l = LengthNormalize(ApplyLda(lda, test_cn));
  RunConfig plda = config;
  plda.scorer = "plda";
  ScoreSet scores =
      ScoreStage(plda, enroll_l, enroll.labels, test_l, trials, &dev_l);
  return EvalStage(config, scores);
}

// Disk commands ----------------------------------------------------

namespace {

void EnsureOutDir(const RunConfig &config) {
  if (config.out.empty()) throw ConfigError("out must be set");
  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec)
    throw DataError("cannot create output directory '" + config.out + "': " +
                    ec.message());
}

EmbeddingSet LoadLabeledSet(const std::string &vec_path,
                            const std::string &labels_path) {
  EmbeddingSet set = ReadEmbeddingsBinary(vec_path);
  set.labels = ReadLabels(labels_path);
  set.Validate();
  return set;
}

void WriteLossCsv(const std::string &path,
                  const std::vector<double> &history) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << "epoch,loss\n";
  for (std::size_t k = 0; k < history.size(); ++k)
    os << k << "," << FormatG(history[k]) << "\n";
  os.flush();
  if (!os) throw DataError("write to '" + path + "' failed");
}

}  // namespace

void CmdSynth(const RunConfig &config) {
  config.Validate();
  SynthData data = GenerateSynth(config.Synth());
  EmbeddingSet models =
      EnrollAverage(data.enroll, ModelMapFromLabels(data.enroll));
  TrialList trials = FullCrossTrials(models, data.test);
  EnsureOutDir(config);
  WriteEmbeddingsBinary(config.DevPath(), data.dev);
  WriteLabels(config.DevLabelsPath(), data.dev.labels);
  WriteEmbeddingsBinary(config.EnrollPath(), data.enroll);
  WriteLabels(config.EnrollLabelsPath(), data.enroll.labels);
  WriteEmbeddingsBinary(config.TestPath(), data.test);
  WriteLabels(config.TestLabelsPath(), data.test.labels);
  WriteTrials(config.TrialsPath(), trials);
}

void CmdPreprocess(const RunConfig &config) {
  config.Validate();
  EmbeddingSet dev =
      LoadLabeledSet(config.DevPath(), config.DevLabelsPath());
  EmbeddingSet enroll = ReadEmbeddingsBinary(config.EnrollPath());
  EmbeddingSet test = ReadEmbeddingsBinary(config.TestPath());
  FeatureSpaces features = BuildFeatures(config, dev, enroll, test);
  EnsureOutDir(config);
  const std::vector<std::string> &ids = features.nodes.ids;
  auto slice = [&](int begin, int count) {
    return features.nodes.Subset(std::vector<std::string>(
        ids.begin() + begin, ids.begin() + begin + count));
  };
  WriteEmbeddingsBinary(config.OutPath(artifact::kNodesDev),
                        slice(0, features.n_dev));
  WriteEmbeddingsBinary(config.OutPath(artifact::kNodesEnroll),
                        slice(features.n_dev, features.n_enroll));
  WriteEmbeddingsBinary(config.OutPath(artifact::kNodesTest),
                        slice(features.n_dev + features.n_enroll,
                              features.n_test));
  WriteEmbeddingsBinary(config.OutPath(artifact::kEdgeSpace), features.edges);
  if (features.edge_plda)
    features.edge_plda->Save(config.OutPath(artifact::kEdgePlda));
}

void CmdBuildGraph(const RunConfig &config) {
  config.Validate();
  EmbeddingSet edges =
      ReadEmbeddingsBinary(config.OutPath(artifact::kEdgeSpace));
  std::optional<PldaModel> edge_plda;
  if (config.edge_metric == "lda_plda")
    edge_plda = PldaModel::Load(config.OutPath(artifact::kEdgePlda));
  Graph graph =
      BuildGraphStage(config, edges, edge_plda ? &*edge_plda : nullptr);
  EnsureOutDir(config);
  WriteGraph(config.OutPath(artifact::kGraph), graph);
}

void CmdTrain(const RunConfig &config) {
  config.Validate();
  EmbeddingSet nodes_dev =
      ReadEmbeddingsBinary(config.OutPath(artifact::kNodesDev));
  EmbeddingSet nodes_enroll =
      ReadEmbeddingsBinary(config.OutPath(artifact::kNodesEnroll));
  EmbeddingSet nodes_test =
      ReadEmbeddingsBinary(config.OutPath(artifact::kNodesTest));
  std::map<std::string, std::string> dev_labels =
      ReadLabels(config.DevLabelsPath());
  Graph graph = ReadGraph(config.OutPath(artifact::kGraph));
  FeatureSpaces features =
      AssembleFeatures(nodes_dev, dev_labels, nodes_enroll, nodes_test);
  TrainOutput trained = TrainStage(config, features, graph);
  EnsureOutDir(config);
  SaveGnnModel(config.OutPath(artifact::kModel), &trained.model);
  WriteLossCsv(config.OutPath(artifact::kTrainLoss), trained.history);
}

void CmdExtract(const RunConfig &config) {
  config.Validate();
  EmbeddingSet nodes_dev =
      ReadEmbeddingsBinary(config.OutPath(artifact::kNodesDev));
  EmbeddingSet nodes_enroll =
      ReadEmbeddingsBinary(config.OutPath(artifact::kNodesEnroll));
  EmbeddingSet nodes_test =
      ReadEmbeddingsBinary(config.OutPath(artifact::kNodesTest));
  Graph graph = ReadGraph(config.OutPath(artifact::kGraph));
  GnnModel<float> model = LoadGnnModel(config.OutPath(artifact::kModel));
  FeatureSpaces features =
      AssembleFeatures(nodes_dev, {}, nodes_enroll, nodes_test);
  GvectorSets gvecs = ExtractStage(&model, graph, features);
  EnsureOutDir(config);
  WriteEmbeddingsBinary(config.OutPath(artifact::kGvecDev), gvecs.dev);
  WriteEmbeddingsBinary(config.OutPath(artifact::kGvecEnroll), gvecs.enroll);
  WriteEmbeddingsBinary(config.OutPath(artifact::kGvecTest), gvecs.test);
}

void CmdScore(const RunConfig &config) {
  config.Validate();
  EmbeddingSet enroll_vecs =
      ReadEmbeddingsBinary(config.OutPath(artifact::kGvecEnroll));
  EmbeddingSet test_vecs =
      ReadEmbeddingsBinary(config.OutPath(artifact::kGvecTest));
  std::map<std::string, std::string> enroll_labels =
      ReadLabels(config.EnrollLabelsPath());
  TrialList trials = ReadTrials(config.TrialsPath());
  std::optional<EmbeddingSet> dev_vecs;
  if (config.scorer == "plda")
    dev_vecs = LoadLabeledSet(config.OutPath(artifact::kGvecDev),
                              config.DevLabelsPath());
  ScoreSet scores =
      ScoreStage(config, enroll_vecs, enroll_labels, test_vecs, trials,
                 dev_vecs ? &*dev_vecs : nullptr);
  EnsureOutDir(config);
  WriteScores(config.OutPath(artifact::kScores), scores);
}

EvalReport CmdEval(const RunConfig &config) {
  config.Validate();
  ScoreSet scores = ReadScores(config.OutPath(artifact::kScores));
  TrialList trials = ReadTrials(config.TrialsPath());
  AttachKeys(&scores, trials);
  EvalReport report = EvalStage(config, scores);
  EnsureOutDir(config);
  WriteMetricsCsv(config.OutPath(artifact::kMetricsCsv),
                  {{"eer_percent", report.eer_percent},
                   {"min_dcf", report.min_dcf}});
  WriteDetCsv(config.OutPath(artifact::kDetCsv), report.det);
  return report;
}

EvalReport CmdRun(const RunConfig &config) {
  CmdPreprocess(config);
  CmdBuildGraph(config);
  CmdTrain(config);
  CmdExtract(config);
  CmdScore(config);
  return CmdEval(config);
}

namespace {

std::vector<std::string> SplitList(const std::string &value) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    std::size_t comma = value.find(',', begin);
    std::string part = Trim(value.substr(begin, comma - begin));
    if (part.empty())
      throw ConfigError("empty element in list value '" + value + "'");
    parts.push_back(part);
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return parts;
}

std::string SanitizeForPath(const std::string &value) {
  std::string clean = value;
  for (char &c : clean)
    if (c == '/' || c == '\\' || std::isspace(static_cast<unsigned char>(c)))
      c = '_';
  return clean;
}

}  // namespace

std::vector<SweepRun> CmdSweep(
    const std::vector<std::pair<std::string, std::string>> &pairs) {
  std::size_t list_index = pairs.size();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].second.find(',') == std::string::npos) continue;
    if (list_index != pairs.size())
      throw ConfigError("sweep needs exactly one list-valued key; both '" +
                        pairs[list_index].first + "' and '" + pairs[k].first +
                        "' hold lists");
    list_index = k;
  }
  if (list_index == pairs.size())
    throw ConfigError("sweep needs one comma-separated list value to expand");
  const std::string &sweep_key = pairs[list_index].first;
  std::vector<std::string> values = SplitList(pairs[list_index].second);

  RunConfig base;
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (k != list_index) base.Apply(pairs[k].first, pairs[k].second);
  // Freeze input paths against the top-level output directory before
  // pointing each run at its own subdirectory.
  base.dev = base.DevPath();
  base.dev_labels = base.DevLabelsPath();
  base.enroll = base.EnrollPath();
  base.enroll_labels = base.EnrollLabelsPath();
  base.test = base.TestPath();
  base.test_labels = base.TestLabelsPath();
  base.trials = base.TrialsPath();
  std::string top_out = base.out;

  std::vector<SweepRun> runs;
  runs.reserve(values.size());
  for (const std::string &value : values) {
    RunConfig config = base;
    config.Apply(sweep_key, value);
    config.out = (std::filesystem::path(top_out) /
                  (sweep_key + "_" + SanitizeForPath(value)))
                     .string();
    config.Validate();
    runs.push_back({value, CmdRun(config)});
  }

  std::ofstream os(std::filesystem::path(top_out) / "sweep.csv");
  if (!os) throw DataError("cannot open sweep summary for writing");
  os << sweep_key << ",eer_percent,min_dcf\n";
  for (const SweepRun &run : runs)
    os << run.value << "," << FormatG(run.report.eer_percent) << ","
       << FormatG(run.report.min_dcf) << "\n";
  os.flush();
  if (!os) throw DataError("write to sweep summary failed");
  return runs;
}

}  // namespace gvec
