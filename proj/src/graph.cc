// gvec/graph.cc

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

#include "gvec/graph.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gvec {

void Graph::Validate() const {
  if (num_nodes < 0) throw DataError("graph has negative node count");
  std::pair<int, int> prev{-1, -1};
  for (const auto &[i, j] : edges) {
    if (i < 0 || j >= num_nodes)
      throw DataError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") out of range for " + std::to_string(num_nodes) +
                      " nodes");
    if (i >= j)
      throw DataError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") is not in i < j form");
    std::pair<int, int> cur{i, j};
    if (!(prev < cur))
      throw DataError("edges are not sorted and unique at (" +
                      std::to_string(i) + ", " + std::to_string(j) + ")");
    prev = cur;
  }
}

std::vector<std::vector<int>> Graph::AdjacencyLists() const {
  Validate();
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(num_nodes));
  for (const auto &[i, j] : edges) {
    adj[static_cast<std::size_t>(i)].push_back(j);
    adj[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto &list : adj) std::sort(list.begin(), list.end());
  return adj;
}

GraphStats ComputeGraphStats(const Graph &graph) {
  std::vector<std::vector<int>> adj = graph.AdjacencyLists();
  GraphStats stats;
  stats.num_nodes = graph.num_nodes;
  stats.num_edges = graph.edges.size();
  for (const auto &list : adj) {
    int degree = static_cast<int>(list.size());
    stats.max_degree = std::max(stats.max_degree, degree);
    if (degree == 0) ++stats.isolated_nodes;
  }
  stats.mean_degree =
      graph.num_nodes == 0
          ? 0.0
          : 2.0 * static_cast<double>(stats.num_edges) / graph.num_nodes;
  return stats;
}

double EdgeLabelPurity(const Graph &graph,
                       const std::vector<std::string> &node_labels) {
  graph.Validate();
  if (node_labels.size() != static_cast<std::size_t>(graph.num_nodes))
    throw DataError("node label count does not match graph size");
  if (graph.edges.empty()) return 1.0;
  std::size_t same = 0;
  for (const auto &[i, j] : graph.edges)
    if (node_labels[static_cast<std::size_t>(i)] ==
        node_labels[static_cast<std::size_t>(j)])
      ++same;
  return static_cast<double>(same) / static_cast<double>(graph.edges.size());
}

void SimilarityMatrix::Validate() const {
  if (values.rows() != values.cols())
    throw DataError("similarity matrix is not square");
  if (!values.allFinite())
    throw DataError("similarity matrix contains non-finite values");
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = i + 1; j < values.cols(); ++j)
      if (std::abs(values(i, j) - values(j, i)) > 1e-4f)
        throw DataError("similarity matrix is not symmetric at (" +
                        std::to_string(i) + ", " + std::to_string(j) + ")");
}

SimilarityMatrix CosineSimilarity(const EmbeddingSet &set) {
  set.Validate();
  MatrixRMd x = ToDouble(set.vectors);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double norm = x.row(i).norm();
    if (norm == 0.0)
      throw DataError("cannot compute cosine similarity for the all-zero "
                      "embedding \"" +
                      set.ids[static_cast<std::size_t>(i)] + "\"");
    x.row(i) /= norm;
  }
  SimilarityMatrix sim;
  MatrixRMd product = x * x.transpose();
  // Exact symmetry, so downstream consumers can read either triangle.
  for (Eigen::Index i = 0; i < product.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      product(i, j) = product(j, i);
  sim.values = ToFloat(product);
  return sim;
}

SimilarityMatrix PldaSimilarity(const PldaModel &model,
                                const EmbeddingSet &set) {
  set.Validate();
  PldaScorer scorer(model);
  MatrixRMd x = ToDouble(set.vectors);
  MatrixRMd llr = scorer.LlrMatrix(x, x);
  for (Eigen::Index i = 0; i < llr.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) llr(i, j) = llr(j, i);
  SimilarityMatrix sim;
  sim.values = ToFloat(llr);
  return sim;
}

Graph BuildGraphThreshold(const SimilarityMatrix &sim, double tau) {
  sim.Validate();
  if (std::isnan(tau)) throw ConfigError("similarity threshold is NaN");
  Graph graph;
  graph.num_nodes = sim.Size();
  for (int i = 0; i < graph.num_nodes; ++i)
    for (int j = i + 1; j < graph.num_nodes; ++j)
      if (static_cast<double>(sim.values(i, j)) > tau)
        graph.edges.emplace_back(i, j);
  graph.Validate();
  return graph;
}

Graph BuildGraphTopK(const SimilarityMatrix &sim, int k) {
  sim.Validate();
  const int n = sim.Size();
  if (k < 1 || k > n - 1)
    throw ConfigError("top-k neighbor count must be in [1, " +
                      std::to_string(n - 1) + "], got " + std::to_string(k));
  std::set<std::pair<int, int>> picked;
  std::vector<std::pair<float, int>> order(static_cast<std::size_t>(n) - 1);
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      float s = j > i ? sim.values(i, j) : sim.values(j, i);
      order.emplace_back(-s, j);
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    for (int r = 0; r < k; ++r) {
      int j = order[static_cast<std::size_t>(r)].second;
      picked.emplace(std::min(i, j), std::max(i, j));
    }
  }
  Graph graph;
  graph.num_nodes = n;
  graph.edges.assign(picked.begin(), picked.end());
  graph.Validate();
  return graph;
}

void WriteGraph(const std::string &path, const Graph &graph) {
  graph.Validate();
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path + " for writing");
  os << "n " << graph.num_nodes << '\n';
  for (const auto &[i, j] : graph.edges) os << i << ' ' << j << '\n';
  os.flush();
  if (!os) throw DataError("write failed for " + path);
}

Graph ReadGraph(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path + " for reading");
  std::string line;
  if (!std::getline(is, line))
    throw DataError("missing graph header in " + path);
  std::istringstream header(line);
  std::string tag;
  Graph graph;
  if (!(header >> tag >> graph.num_nodes) || tag != "n" ||
      graph.num_nodes < 0 || !(header >> std::ws).eof())
    throw DataError("bad graph header \"" + line + "\" in " + path);
  std::set<std::pair<int, int>> seen;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    int i = 0, j = 0;
    const std::string where = path + ":" + std::to_string(line_no);
    if (!(row >> i >> j) || !(row >> std::ws).eof())
      throw DataError("bad edge line at " + where);
    if (i == j) throw DataError("self-loop at " + where);
    if (i < 0 || j < 0 || i >= graph.num_nodes || j >= graph.num_nodes)
      throw DataError("edge endpoint out of range at " + where);
    if (!seen.emplace(std::min(i, j), std::max(i, j)).second)
      throw DataError("duplicate edge at " + where);
  }
  graph.edges.assign(seen.begin(), seen.end());
  graph.Validate();
  return graph;
}

}  // namespace gvec
