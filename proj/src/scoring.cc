// scoring.cc

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

#include "gvec/scoring.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <utility>

namespace gvec {

ModelMap ModelMapFromLabels(const EmbeddingSet &set) {
  set.Validate();
  if (set.labels.empty())
    throw DataError("cannot group models: the embedding set has no labels");
  ModelMap models;
  for (const std::string &id : set.ids)
    models[set.labels.at(id)].push_back(id);
  return models;
}

EmbeddingSet EnrollAverage(const EmbeddingSet &set, const ModelMap &models) {
  set.Validate();
  if (models.empty()) throw DataError("model map is empty");
  auto index = set.IdIndex();
  EmbeddingSet out;
  out.vectors = MatrixRMf(static_cast<int>(models.size()), set.Dim());
  int row = 0;
  for (const auto &[model_id, member_ids] : models) {
    if (member_ids.empty())
      throw DataError("model '" + model_id + "' has no members");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(set.Dim());
    std::string label;
    for (const std::string &member : member_ids) {
      auto it = index.find(member);
      if (it == index.end())
        throw DataError("model '" + model_id + "' references unknown id '" +
                        member + "'");
      mean += set.vectors.row(it->second).cast<double>().transpose();
      if (!set.labels.empty()) {
        const std::string &member_label = set.labels.at(member);
        if (label.empty())
          label = member_label;
        else if (label != member_label)
          throw DataError("model '" + model_id +
                          "' mixes speakers '" + label + "' and '" +
                          member_label + "'");
      }
    }
    mean /= static_cast<double>(member_ids.size());
    double norm = mean.norm();
    if (norm == 0.0)
      throw DataError("model '" + model_id +
                      "' averages to the zero vector and cannot be "
                      "length-normalized");
    out.ids.push_back(model_id);
    out.vectors.row(row) = (mean / norm).cast<float>().transpose();
    if (!set.labels.empty()) out.labels[model_id] = label;
    ++row;
  }
  out.Validate();
  return out;
}

double CosinePairScorer::Score(const Eigen::VectorXd &enroll,
                               const Eigen::VectorXd &test) const {
  double ne = enroll.norm(), nt = test.norm();
  if (ne == 0.0 || nt == 0.0)
    throw DataError("cosine score of a zero vector is undefined");
  return enroll.dot(test) / (ne * nt);
}

double PldaPairScorer::Score(const Eigen::VectorXd &enroll,
                             const Eigen::VectorXd &test) const {
  return scorer_.Llr(enroll, test);
}

namespace {

Eigen::VectorXd RowOf(const EmbeddingSet &set,
                      const std::unordered_map<std::string, int> &index,
                      const std::string &id, const char *side) {
  auto it = index.find(id);
  if (it == index.end())
    throw DataError(std::string("trial references unknown ") + side +
                    " id '" + id + "'");
  return set.vectors.row(it->second).cast<double>().transpose();
}

}  // namespace

ScoreSet ScoreTrials(const TrialList &trials, const EmbeddingSet &enroll,
                     const EmbeddingSet &test, const PairScorer &scorer) {
  trials.Validate();
  enroll.Validate();
  test.Validate();
  auto enroll_index = enroll.IdIndex();
  auto test_index = test.IdIndex();
  ScoreSet out;
  out.entries.reserve(trials.trials.size());
  for (const Trial &trial : trials.trials) {
    Eigen::VectorXd x = RowOf(enroll, enroll_index, trial.model_id, "model");
    Eigen::VectorXd y = RowOf(test, test_index, trial.test_id, "test");
    out.entries.push_back(
        {trial.model_id, trial.test_id, scorer.Score(x, y), trial.key});
  }
  return out;
}

ScoreSet ScoreTrialsMemberMean(const TrialList &trials,
                               const EmbeddingSet &members,
                               const ModelMap &models,
                               const EmbeddingSet &test,
                               const PairScorer &scorer) {
  trials.Validate();
  members.Validate();
  test.Validate();
  auto member_index = members.IdIndex();
  auto test_index = test.IdIndex();
  ScoreSet out;
  out.entries.reserve(trials.trials.size());
  for (const Trial &trial : trials.trials) {
    auto it = models.find(trial.model_id);
    if (it == models.end())
      throw DataError("trial references unknown model id '" + trial.model_id +
                      "'");
    if (it->second.empty())
      throw DataError("model '" + trial.model_id + "' has no members");
    Eigen::VectorXd y = RowOf(test, test_index, trial.test_id, "test");
    double total = 0.0;
    for (const std::string &member : it->second)
      total += scorer.Score(RowOf(members, member_index, member, "member"), y);
    out.entries.push_back({trial.model_id, trial.test_id,
                           total / static_cast<double>(it->second.size()),
                           trial.key});
  }
  return out;
}

namespace {

struct ScoreArrays {
  std::vector<double> targets;     // ascending
  std::vector<double> nontargets;  // ascending
};

ScoreArrays SplitScores(const ScoreSet &scores) {
  ScoreArrays arrays;
  for (const ScoredTrial &entry : scores.entries) {
    switch (entry.key) {
      case TrialKey::kTarget:
        arrays.targets.push_back(entry.score);
        break;
      case TrialKey::kNontarget:
        arrays.nontargets.push_back(entry.score);
        break;
      case TrialKey::kUnknown:
        throw DataError("trial (" + entry.model_id + ", " + entry.test_id +
                        ") has no target/nontarget key");
    }
    if (!std::isfinite(entry.score))
      throw DataError("trial (" + entry.model_id + ", " + entry.test_id +
                      ") has a non-finite score");
  }
  if (arrays.targets.empty()) throw DataError("score set has no target trials");
  if (arrays.nontargets.empty())
    throw DataError("score set has no nontarget trials");
  std::sort(arrays.targets.begin(), arrays.targets.end());
  std::sort(arrays.nontargets.begin(), arrays.nontargets.end());
  return arrays;
}

std::vector<DetPoint> DetFromArrays(const ScoreArrays &arrays) {
  std::vector<double> thresholds;
  thresholds.reserve(arrays.targets.size() + arrays.nontargets.size());
  std::merge(arrays.targets.begin(), arrays.targets.end(),
             arrays.nontargets.begin(), arrays.nontargets.end(),
             std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const double n_t = static_cast<double>(arrays.targets.size());
  const double n_n = static_cast<double>(arrays.nontargets.size());
  std::vector<DetPoint> curve;
  curve.reserve(thresholds.size() + 1);
  for (double t : thresholds) {
    auto missed = std::lower_bound(arrays.targets.begin(),
                                   arrays.targets.end(), t) -
                  arrays.targets.begin();
    auto accepted = arrays.nontargets.end() -
                    std::lower_bound(arrays.nontargets.begin(),
                                     arrays.nontargets.end(), t);
    curve.push_back({static_cast<double>(accepted) / n_n,
                     static_cast<double>(missed) / n_t});
  }
  curve.push_back({0.0, 1.0});  // threshold above every score
  return curve;
}

}  // namespace

std::vector<DetPoint> DetCurve(const ScoreSet &scores) {
  return DetFromArrays(SplitScores(scores));
}

double ComputeEer(const ScoreSet &scores, EerConvention convention) {
  std::vector<DetPoint> curve = DetFromArrays(SplitScores(scores));
  if (convention == EerConvention::kMaxRate) {
    double best = 1.0;
    for (const DetPoint &p : curve)
      best = std::min(best, std::max(p.p_fa, p.p_miss));
    return 100.0 * best;
  }
  // P_fa - P_miss falls monotonically from 1 to -1; interpolate where
  // it crosses zero.
  for (std::size_t k = 0; k + 1 < curve.size(); ++k) {
    double d0 = curve[k].p_fa - curve[k].p_miss;
    double d1 = curve[k + 1].p_fa - curve[k + 1].p_miss;
    if (d0 < 0.0 || d1 > 0.0) continue;
    if (d0 == d1) return 100.0 * curve[k].p_miss;  // both on the diagonal
    double s = d0 / (d0 - d1);
    return 100.0 *
           (curve[k].p_miss + s * (curve[k + 1].p_miss - curve[k].p_miss));
  }
  throw NumericError("equal error rate sweep found no crossing");
}

void DcfParams::Validate() const {
  if (!(c_miss > 0.0)) throw ConfigError("miss cost must be positive");
  if (!(c_fa > 0.0)) throw ConfigError("false-alarm cost must be positive");
  if (!(p_target > 0.0 && p_target < 1.0))
    throw ConfigError("target prior must lie in (0, 1)");
}

double ComputeMinDcf(const ScoreSet &scores, const DcfParams &params) {
  params.Validate();
  std::vector<DetPoint> curve = DetFromArrays(SplitScores(scores));
  double best = std::numeric_limits<double>::infinity();
  for (const DetPoint &p : curve) {
    double cost = params.c_miss * params.p_target * p.p_miss +
                  params.c_fa * (1.0 - params.p_target) * p.p_fa;
    best = std::min(best, cost);
  }
  if (params.normalize)
    best /= std::min(params.c_miss * params.p_target,
                     params.c_fa * (1.0 - params.p_target));
  return best;
}

namespace {

std::string FormatG(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.9g", value);
  return buffer;
}

}  // namespace

void WriteDetCsv(const std::string &path, const std::vector<DetPoint> &curve) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << "p_fa,p_miss\n";
  for (const DetPoint &p : curve)
    os << FormatG(p.p_fa) << "," << FormatG(p.p_miss) << "\n";
  os.flush();
  if (!os) throw DataError("write to '" + path + "' failed");
}

void WriteMetricsCsv(
    const std::string &path,
    const std::vector<std::pair<std::string, double>> &metrics) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << "metric,value\n";
  for (const auto &[name, value] : metrics)
    os << name << "," << FormatG(value) << "\n";
  os.flush();
  if (!os) throw DataError("write to '" + path + "' failed");
}

}  // namespace gvec
