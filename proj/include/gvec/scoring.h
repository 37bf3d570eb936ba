// gvec/scoring.h

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

#ifndef GVEC_SCORING_H_
#define GVEC_SCORING_H_

#include <map>
#include <string>
#include <vector>

#include "gvec/embedding.h"
#include "gvec/preproc.h"

// Trial scoring and verification metrics.  Scores follow the accept
// rule "score >= threshold"; thresholds sweep the distinct score
// values plus +infinity, so every achievable (P_fa, P_miss) operating
// point is visited exactly once.

namespace gvec {

// model id -> member embedding ids.
using ModelMap = std::map<std::string, std::vector<std::string>>;

// Groups a labeled set into one model per speaker.
ModelMap ModelMapFromLabels(const EmbeddingSet &set);

// One embedding per model: the arithmetic mean of the member vectors,
// length-normalized.  Members must exist; a model whose mean is the
// zero vector (antipodal members) is a DataError, as are members with
// conflicting speaker labels.
EmbeddingSet EnrollAverage(const EmbeddingSet &set, const ModelMap &models);

// Pairwise score between one enrollment vector and one test vector.
class PairScorer {
 public:
  virtual ~PairScorer() = default;
  virtual double Score(const Eigen::VectorXd &enroll,
                       const Eigen::VectorXd &test) const = 0;
};

// dot(x, y) / (|x| |y|); zero-norm input is a DataError.
class CosinePairScorer : public PairScorer {
 public:
  double Score(const Eigen::VectorXd &enroll,
               const Eigen::VectorXd &test) const override;
};

// Log-likelihood ratio under a trained two-covariance model.
class PldaPairScorer : public PairScorer {
 public:
  explicit PldaPairScorer(const PldaModel &model) : scorer_(model) {}
  double Score(const Eigen::VectorXd &enroll,
               const Eigen::VectorXd &test) const override;

 private:
  PldaScorer scorer_;
};

// One score per trial; keys are carried over from the trial list.
// Unresolvable model or test ids are DataErrors.
ScoreSet ScoreTrials(const TrialList &trials, const EmbeddingSet &enroll,
                     const EmbeddingSet &test, const PairScorer &scorer);

// Alternative to averaging enrollments: scores every member of the
// trial's model against the test vector and averages the scores.
ScoreSet ScoreTrialsMemberMean(const TrialList &trials,
                               const EmbeddingSet &members,
                               const ModelMap &models,
                               const EmbeddingSet &test,
                               const PairScorer &scorer);

// Detection error tradeoff point at one threshold.
struct DetPoint {
  double p_fa = 0.0;
  double p_miss = 0.0;
};

// Staircase swept from the lowest score (accept everything: (1, 0))
// to +infinity (reject everything: (0, 1)); n distinct scores give
// n + 1 points with P_fa non-increasing and P_miss non-decreasing.
// Requires at least one target and one nontarget key; kUnknown keys
// are a DataError.
std::vector<DetPoint> DetCurve(const ScoreSet &scores);

enum class EerConvention {
  // Linear interpolation between the two sweep points bracketing
  // P_miss = P_fa.
  kInterpolate,
  // min over thresholds of max(P_miss, P_fa): no interpolation,
  // matches toolkits that report the worse of the two rates.
  kMaxRate,
};

// Equal error rate in percent.
double ComputeEer(const ScoreSet &scores,
                  EerConvention convention = EerConvention::kInterpolate);

struct DcfParams {
  double c_miss = 1.0;
  double c_fa = 1.0;
  double p_target = 0.01;
  // Divide by min(c_miss p_target, c_fa (1 - p_target)) so a scorer
  // no better than always-accept/always-reject costs exactly 1.
  bool normalize = true;

  void Validate() const;  // ConfigError on out-of-range fields
};

// min over thresholds of
//   c_miss p_target P_miss(t) + c_fa (1 - p_target) P_fa(t),
// normalized per `params`.
double ComputeMinDcf(const ScoreSet &scores, const DcfParams &params = {});

// "p_fa,p_miss" header plus one row per curve point.
void WriteDetCsv(const std::string &path, const std::vector<DetPoint> &curve);

// "metric,value" header plus one row per entry, in the given order.
void WriteMetricsCsv(
    const std::string &path,
    const std::vector<std::pair<std::string, double>> &metrics);

}  // namespace gvec

#endif  // GVEC_SCORING_H_
