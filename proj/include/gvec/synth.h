// gvec/synth.h

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

#ifndef GVEC_SYNTH_H_
#define GVEC_SYNTH_H_

#include <cstdint>

#include "gvec/embedding.h"

// Seeded synthetic speaker embeddings: speaker means drawn from
// N(0, between_std^2 I), utterances from mean + N(0, within_std^2 I),
// length-normalized.  The between/within ratio controls how separable
// the speakers are on the unit sphere.

namespace gvec {

struct SynthConfig {
  int n_speakers = 20;
  int per_speaker = 20;
  int dim = 50;
  double between_std = 1.0;
  double within_std = 0.3;
  std::uint64_t seed = 1;

  void Validate() const;  // ConfigError on non-positive fields
};

// Disjoint per-speaker partitions: 60% (floor) of each speaker's
// utterances go to dev, then up to 5 to enroll, the remainder to test.
// Every partition keeps at least one utterance per speaker, so
// per_speaker must be at least 3.
struct SynthData {
  EmbeddingSet dev;
  EmbeddingSet enroll;
  EmbeddingSet test;
};

// Deterministic per seed: speaker means are drawn first (speaker by
// speaker), then utterance noise in id order.  Ids are
// "spkNNN_uttNNN" and labels are "spkNNN".
SynthData GenerateSynth(const SynthConfig &config);

// One trial per (model, test utterance) pair, keyed target when the
// test label equals the model id.  Both sets must be labeled; model
// ids are their own labels after enrollment averaging.
TrialList FullCrossTrials(const EmbeddingSet &models,
                          const EmbeddingSet &test);

}  // namespace gvec

#endif  // GVEC_SYNTH_H_
