// synth.cc

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

#include "gvec/synth.h"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "gvec/common.h"

namespace gvec {

namespace {

std::string SpeakerId(int s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", s);
  return buf;
}

std::string UttId(int s, int u) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "spk%03d_utt%03d", s, u);
  return buf;
}

void AppendRow(EmbeddingSet *set, int row, const std::string &id,
               const std::string &label, const Eigen::VectorXd &v) {
  set->ids.push_back(id);
  set->labels[id] = label;
  double norm = v.norm();
  if (!(norm > 0.0)) {
    throw DataError("synthetic embedding has zero norm; use a larger "
                    "between_std or within_std");
  }
  set->vectors.row(row) = (v / norm).cast<float>();
}

}  // namespace

void SynthConfig::Validate() const {
  if (n_speakers < 1) throw ConfigError("n_speakers must be positive");
  if (per_speaker < 3) {
    throw ConfigError("per_speaker must be at least 3 so each speaker "
                      "contributes to dev, enroll, and test");
  }
  if (dim < 1) throw ConfigError("dim must be positive");
  if (!(between_std > 0.0)) throw ConfigError("between_std must be positive");
  if (!(within_std > 0.0)) throw ConfigError("within_std must be positive");
}

SynthData GenerateSynth(const SynthConfig &config) {
  config.Validate();
  const int n_dev = static_cast<int>(0.6 * config.per_speaker);
  const int n_enroll = std::min(5, config.per_speaker - n_dev - 1);
  const int n_test = config.per_speaker - n_dev - n_enroll;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  // Speaker means first, then utterance noise in id order, so the
  // stream of draws is a pure function of the seed and the config.
  MatrixRMd means(config.n_speakers, config.dim);
  for (int s = 0; s < config.n_speakers; ++s) {
    for (int d = 0; d < config.dim; ++d) {
      means(s, d) = config.between_std * unit(rng);
    }
  }

  SynthData out;
  out.dev.vectors.resize(config.n_speakers * n_dev, config.dim);
  out.enroll.vectors.resize(config.n_speakers * n_enroll, config.dim);
  out.test.vectors.resize(config.n_speakers * n_test, config.dim);

  Eigen::VectorXd v(config.dim);
  for (int s = 0; s < config.n_speakers; ++s) {
    const std::string label = SpeakerId(s);
    for (int u = 0; u < config.per_speaker; ++u) {
      for (int d = 0; d < config.dim; ++d) {
        v(d) = means(s, d) + config.within_std * unit(rng);
      }
      const std::string id = UttId(s, u);
      if (u < n_dev) {
        AppendRow(&out.dev, s * n_dev + u, id, label, v);
      } else if (u < n_dev + n_enroll) {
        AppendRow(&out.enroll, s * n_enroll + (u - n_dev), id, label, v);
      } else {
        AppendRow(&out.test, s * n_test + (u - n_dev - n_enroll), id, label,
                  v);
      }
    }
  }
  out.dev.Validate();
  out.enroll.Validate();
  out.test.Validate();
  return out;
}

TrialList FullCrossTrials(const EmbeddingSet &models,
                          const EmbeddingSet &test) {
  models.Validate();
  test.Validate();
  if (models.labels.empty() || test.labels.empty()) {
    throw DataError("full-cross trials need labeled model and test sets");
  }
  TrialList out;
  out.trials.reserve(models.Count() * test.Count());
  for (const std::string &model_id : models.ids) {
    const std::string &model_label = models.labels.at(model_id);
    for (const std::string &test_id : test.ids) {
      Trial t;
      t.model_id = model_id;
      t.test_id = test_id;
      t.key = test.labels.at(test_id) == model_label ? TrialKey::kTarget
                                                     : TrialKey::kNontarget;
      out.trials.push_back(std::move(t));
    }
  }
  out.Validate();
  return out;
}

}  // namespace gvec
