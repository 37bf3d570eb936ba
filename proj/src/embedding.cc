// gvec/embedding.cc

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

#include "gvec/embedding.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace gvec {

namespace {

constexpr char kEmbeddingMagic[4] = {'G', 'V', 'E', 'C'};
constexpr std::uint32_t kEmbeddingVersion = 1;

std::ifstream OpenIn(const std::string &path, bool binary) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw DataError("cannot open " + path + " for reading");
  return is;
}

std::ofstream OpenOut(const std::string &path, bool binary) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw DataError("cannot open " + path + " for writing");
  return os;
}

void FinishWrite(std::ofstream &os, const std::string &path) {
  os.flush();
  if (!os) throw DataError("write failed for " + path);
}

// Splits on runs of spaces and tabs.
std::vector<std::string> SplitTokens(const std::string &line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::string StripCr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

float ParseFloat(const std::string &token, const std::string &where) {
  const char *begin = token.c_str();
  char *end = nullptr;
  float value = std::strtof(begin, &end);
  if (end != begin + token.size())
    throw DataError("malformed number \"" + token + "\" in " + where);
  return value;
}

double ParseDouble(const std::string &token, const std::string &where) {
  const char *begin = token.c_str();
  char *end = nullptr;
  double value = std::strtod(begin, &end);
  if (end != begin + token.size())
    throw DataError("malformed number \"" + token + "\" in " + where);
  return value;
}

}  // namespace

void EmbeddingSet::Validate() const {
  if (vectors.rows() != static_cast<Eigen::Index>(ids.size()))
    throw DataError("embedding set has " + std::to_string(ids.size()) +
                    " ids but " + std::to_string(vectors.rows()) + " rows");
  if (!ids.empty() && vectors.cols() < 1)
    throw DataError("embedding set has zero dimension");
  std::unordered_set<std::string> seen;
  seen.reserve(ids.size());
  for (const std::string &id : ids) {
    if (id.empty()) throw DataError("embedding set contains an empty id");
    if (!seen.insert(id).second)
      throw DataError("duplicate embedding id \"" + id + "\"");
  }
  if (!vectors.allFinite())
    throw DataError("embedding set contains non-finite values");
  if (!labels.empty()) {
    for (const std::string &id : ids)
      if (labels.find(id) == labels.end())
        throw DataError("missing label for id \"" + id + "\"");
    if (labels.size() != ids.size())
      throw DataError("labels cover ids not present in the embedding set");
  }
}

int EmbeddingSet::IndexOf(const std::string &id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return static_cast<int>(i);
  return -1;
}

std::unordered_map<std::string, int> EmbeddingSet::IdIndex() const {
  std::unordered_map<std::string, int> index;
  index.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    index.emplace(ids[i], static_cast<int>(i));
  return index;
}

EmbeddingSet EmbeddingSet::Subset(
    const std::vector<std::string> &subset_ids) const {
  std::unordered_map<std::string, int> index = IdIndex();
  EmbeddingSet out;
  out.ids = subset_ids;
  out.vectors.resize(static_cast<Eigen::Index>(subset_ids.size()),
                     vectors.cols());
  for (std::size_t i = 0; i < subset_ids.size(); ++i) {
    auto it = index.find(subset_ids[i]);
    if (it == index.end())
      throw DataError("id \"" + subset_ids[i] + "\" not in embedding set");
    out.vectors.row(static_cast<Eigen::Index>(i)) = vectors.row(it->second);
    if (!labels.empty()) out.labels[subset_ids[i]] = labels.at(subset_ids[i]);
  }
  return out;
}

EmbeddingSet Concat(const std::vector<const EmbeddingSet *> &sets) {
  EmbeddingSet out;
  if (sets.empty()) return out;
  Eigen::Index dim = sets[0]->vectors.cols(), total = 0;
  bool all_labeled = true;
  for (const EmbeddingSet *set : sets) {
    if (set->vectors.cols() != dim)
      throw DataError("cannot concatenate embedding sets of dims " +
                      std::to_string(dim) + " and " +
                      std::to_string(set->vectors.cols()));
    total += set->vectors.rows();
    all_labeled = all_labeled && !set->labels.empty();
  }
  out.vectors.resize(total, dim);
  Eigen::Index row = 0;
  for (const EmbeddingSet *set : sets) {
    for (std::size_t i = 0; i < set->ids.size(); ++i)
      out.ids.push_back(set->ids[i]);
    out.vectors.middleRows(row, set->vectors.rows()) = set->vectors;
    row += set->vectors.rows();
    if (all_labeled)
      out.labels.insert(set->labels.begin(), set->labels.end());
  }
  out.Validate();
  return out;
}

void WriteEmbeddingsBinary(const std::string &path, const EmbeddingSet &set) {
  set.Validate();
  std::ofstream os = OpenOut(path, true);
  io::WriteMagic(os, kEmbeddingMagic);
  io::WriteScalar<std::uint32_t>(os, kEmbeddingVersion);
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(set.Count()));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(set.Dim()));
  for (int i = 0; i < set.Count(); ++i) {
    const std::string &id = set.ids[static_cast<std::size_t>(i)];
    if (id.size() > 0xffff)
      throw DataError("id \"" + id.substr(0, 32) + "...\" exceeds 65535 bytes");
    io::WriteScalar<std::uint16_t>(os, static_cast<std::uint16_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
    io::WriteArray<float>(os, set.vectors.row(i).data(),
                          static_cast<std::size_t>(set.Dim()));
  }
  FinishWrite(os, path);
}

EmbeddingSet ReadEmbeddingsBinary(const std::string &path) {
  std::ifstream is = OpenIn(path, true);
  io::ExpectMagic(is, kEmbeddingMagic, path);
  std::uint32_t version = io::ReadScalar<std::uint32_t>(is, path);
  if (version != kEmbeddingVersion)
    throw DataError("unsupported embedding container version " +
                    std::to_string(version) + " in " + path);
  std::uint32_t count = io::ReadScalar<std::uint32_t>(is, path);
  std::uint32_t dim = io::ReadScalar<std::uint32_t>(is, path);
  if (count > 0 && dim == 0)
    throw DataError("zero embedding dimension in " + path);
  EmbeddingSet set;
  set.ids.reserve(count);
  set.vectors.resize(count, dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t id_len = io::ReadScalar<std::uint16_t>(is, path);
    std::string id(id_len, '\0');
    if (id_len > 0 && !is.read(id.data(), id_len))
      throw DataError("truncated input while reading " + path);
    set.ids.push_back(std::move(id));
    io::ReadArray<float>(is, set.vectors.row(static_cast<Eigen::Index>(i)).data(),
                         dim, path);
  }
  if (is.peek() != std::ifstream::traits_type::eof())
    throw DataError("trailing bytes after " + std::to_string(count) +
                    " records in " + path);
  set.Validate();
  return set;
}

void WriteEmbeddingsText(const std::string &path, const EmbeddingSet &set) {
  set.Validate();
  std::ofstream os = OpenOut(path, false);
  char buf[64];
  for (int i = 0; i < set.Count(); ++i) {
    os << set.ids[static_cast<std::size_t>(i)];
    for (int d = 0; d < set.Dim(); ++d) {
      // 9 significant digits round-trip any float32 exactly.
      std::snprintf(buf, sizeof(buf), "%.9g",
                    static_cast<double>(set.vectors(i, d)));
      os << ' ' << buf;
    }
    os << '\n';
  }
  FinishWrite(os, path);
}

EmbeddingSet ReadEmbeddingsText(const std::string &path) {
  std::ifstream is = OpenIn(path, false);
  EmbeddingSet set;
  std::vector<float> values;
  std::string line;
  int line_no = 0, dim = -1;
  while (std::getline(is, line)) {
    ++line_no;
    std::vector<std::string> tokens = SplitTokens(StripCr(line));
    if (tokens.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tokens.size() < 2)
      throw DataError("expected \"id v1 .. vD\" at " + where);
    int this_dim = static_cast<int>(tokens.size()) - 1;
    if (dim < 0)
      dim = this_dim;
    else if (this_dim != dim)
      throw DataError("dimension mismatch at " + where + ": got " +
                      std::to_string(this_dim) + ", expected " +
                      std::to_string(dim));
    set.ids.push_back(tokens[0]);
    for (int d = 0; d < dim; ++d)
      values.push_back(
          ParseFloat(tokens[static_cast<std::size_t>(d) + 1], where));
  }
  set.vectors.resize(static_cast<Eigen::Index>(set.ids.size()),
                     dim < 0 ? 0 : dim);
  for (int i = 0; i < set.Count(); ++i)
    for (int d = 0; d < set.Dim(); ++d)
      set.vectors(i, d) = values[static_cast<std::size_t>(i) *
                                     static_cast<std::size_t>(dim) +
                                 static_cast<std::size_t>(d)];
  set.Validate();
  return set;
}

void WriteLabels(const std::string &path,
                 const std::map<std::string, std::string> &labels) {
  std::ofstream os = OpenOut(path, false);
  for (const auto &[id, speaker] : labels) os << id << ' ' << speaker << '\n';
  FinishWrite(os, path);
}

std::map<std::string, std::string> ReadLabels(const std::string &path) {
  std::ifstream is = OpenIn(path, false);
  std::map<std::string, std::string> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::vector<std::string> tokens = SplitTokens(StripCr(line));
    if (tokens.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tokens.size() != 2)
      throw DataError("expected \"id speaker\" at " + where);
    if (!labels.emplace(tokens[0], tokens[1]).second)
      throw DataError("duplicate label for id \"" + tokens[0] + "\" at " +
                      where);
  }
  return labels;
}

bool TrialList::Labeled() const {
  return !trials.empty() && trials[0].key != TrialKey::kUnknown;
}

void TrialList::Validate() const {
  std::unordered_set<std::string> seen;
  seen.reserve(trials.size());
  bool labeled = Labeled();
  for (const Trial &t : trials) {
    if ((t.key == TrialKey::kUnknown) == labeled)
      throw DataError("trial list mixes labeled and unlabeled trials");
    if (!seen.insert(t.model_id + '\t' + t.test_id).second)
      throw DataError("duplicate trial (" + t.model_id + ", " + t.test_id +
                      ")");
  }
}

void WriteTrials(const std::string &path, const TrialList &trials) {
  trials.Validate();
  std::ofstream os = OpenOut(path, false);
  for (const Trial &t : trials.trials) {
    os << t.model_id << ' ' << t.test_id;
    if (t.key != TrialKey::kUnknown)
      os << ' ' << (t.key == TrialKey::kTarget ? "target" : "nontarget");
    os << '\n';
  }
  FinishWrite(os, path);
}

TrialList ReadTrials(const std::string &path) {
  std::ifstream is = OpenIn(path, false);
  TrialList list;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::vector<std::string> tokens = SplitTokens(StripCr(line));
    if (tokens.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tokens.size() != 2 && tokens.size() != 3)
      throw DataError("expected \"model test [target|nontarget]\" at " +
                      where);
    Trial t;
    t.model_id = tokens[0];
    t.test_id = tokens[1];
    if (tokens.size() == 3) {
      if (tokens[2] == "target")
        t.key = TrialKey::kTarget;
      else if (tokens[2] == "nontarget")
        t.key = TrialKey::kNontarget;
      else
        throw DataError("bad trial key \"" + tokens[2] + "\" at " + where);
    }
    list.trials.push_back(std::move(t));
  }
  list.Validate();
  return list;
}

void WriteScores(const std::string &path, const ScoreSet &scores) {
  std::ofstream os = OpenOut(path, false);
  char buf[64];
  for (const ScoredTrial &s : scores.entries) {
    std::snprintf(buf, sizeof(buf), "%.6f", s.score);
    os << s.model_id << ' ' << s.test_id << ' ' << buf << '\n';
  }
  FinishWrite(os, path);
}

ScoreSet ReadScores(const std::string &path) {
  std::ifstream is = OpenIn(path, false);
  ScoreSet scores;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::vector<std::string> tokens = SplitTokens(StripCr(line));
    if (tokens.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tokens.size() != 3)
      throw DataError("expected \"model test score\" at " + where);
    ScoredTrial s;
    s.model_id = tokens[0];
    s.test_id = tokens[1];
    s.score = ParseDouble(tokens[2], where);
    if (!std::isfinite(s.score))
      throw DataError("non-finite score at " + where);
    scores.entries.push_back(std::move(s));
  }
  return scores;
}

void AttachKeys(ScoreSet *scores, const TrialList &trials) {
  trials.Validate();
  if (!trials.Labeled())
    throw DataError("cannot attach keys from an unlabeled trial list");
  std::unordered_map<std::string, TrialKey> keys;
  keys.reserve(trials.trials.size());
  for (const Trial &t : trials.trials)
    keys.emplace(t.model_id + '\t' + t.test_id, t.key);
  for (ScoredTrial &s : scores->entries) {
    auto it = keys.find(s.model_id + '\t' + s.test_id);
    if (it == keys.end())
      throw DataError("scored pair (" + s.model_id + ", " + s.test_id +
                      ") has no trial");
    s.key = it->second;
  }
}

}  // namespace gvec
