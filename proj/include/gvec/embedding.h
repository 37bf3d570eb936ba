// gvec/embedding.h

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

#ifndef GVEC_EMBEDDING_H_
#define GVEC_EMBEDDING_H_

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "gvec/common.h"

namespace gvec {

// A set of fixed-dimensional utterance embeddings, one row per utterance.
// Speaker labels are optional; when present they cover every id in the set.
struct EmbeddingSet {
  std::vector<std::string> ids;
  MatrixRMf vectors;                         // ids.size() x dim
  std::map<std::string, std::string> labels;  // id -> speaker, may be empty

  int Count() const { return static_cast<int>(ids.size()); }
  int Dim() const { return static_cast<int>(vectors.cols()); }

  // Throws DataError on duplicate ids, non-finite values, a row-count
  // mismatch, or labels that do not cover the ids exactly.
  void Validate() const;

  // Index of id, or -1 if absent.
  int IndexOf(const std::string &id) const;

  // id -> row index for repeated lookups.
  std::unordered_map<std::string, int> IdIndex() const;

  // Rows of this set in the order of `ids`; labels are carried over.
  // Throws DataError if an id is missing.
  EmbeddingSet Subset(const std::vector<std::string> &subset_ids) const;
};

// Concatenates sets with identical dims; ids must stay unique.
EmbeddingSet Concat(const std::vector<const EmbeddingSet *> &sets);

// Binary container, little-endian: magic "GVEC", version u32 = 1,
// count u32, dim u32, then per record a u16 id length, the UTF-8 id
// bytes, and dim float32 values.
void WriteEmbeddingsBinary(const std::string &path, const EmbeddingSet &set);
EmbeddingSet ReadEmbeddingsBinary(const std::string &path);

// Text form: one "id v1 .. vD" line per embedding, 9 significant digits
// so float32 values round-trip exactly.
void WriteEmbeddingsText(const std::string &path, const EmbeddingSet &set);
EmbeddingSet ReadEmbeddingsText(const std::string &path);

// "id speaker" lines.
void WriteLabels(const std::string &path,
                 const std::map<std::string, std::string> &labels);
std::map<std::string, std::string> ReadLabels(const std::string &path);

enum class TrialKey { kTarget, kNontarget, kUnknown };

struct Trial {
  std::string model_id;
  std::string test_id;
  TrialKey key = TrialKey::kUnknown;
};

// "model_id test_id [target|nontarget]" lines; the key column is either
// present on every line or absent on every line.
struct TrialList {
  std::vector<Trial> trials;

  bool Labeled() const;
  // Throws DataError on duplicate (model, test) pairs or mixed labeling.
  void Validate() const;
};

void WriteTrials(const std::string &path, const TrialList &trials);
TrialList ReadTrials(const std::string &path);

struct ScoredTrial {
  std::string model_id;
  std::string test_id;
  double score = 0.0;
  TrialKey key = TrialKey::kUnknown;
};

struct ScoreSet {
  std::vector<ScoredTrial> entries;
};

// "model_id test_id score" lines, scores with 6 decimal places.
void WriteScores(const std::string &path, const ScoreSet &scores);
// Keys come back kUnknown; use AttachKeys to join with a labeled TrialList.
ScoreSet ReadScores(const std::string &path);

// Copies keys from `trials` onto matching (model, test) pairs.  Throws
// DataError if a scored pair has no trial or the trial list is unlabeled.
void AttachKeys(ScoreSet *scores, const TrialList &trials);

}  // namespace gvec

#endif  // GVEC_EMBEDDING_H_
