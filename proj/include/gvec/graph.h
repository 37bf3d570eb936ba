// gvec/graph.h

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

#ifndef GVEC_GRAPH_H_
#define GVEC_GRAPH_H_

#include <string>
#include <utility>
#include <vector>

#include "gvec/embedding.h"
#include "gvec/preproc.h"

namespace gvec {

// Undirected graph over embedding nodes.  Only off-diagonal edges are
// stored, each once as (i, j) with i < j in lexicographic order; the
// network layer adds the self-loop for every node unconditionally.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;

  void Validate() const;
  // Sorted open neighbor lists (self excluded), one per node.
  std::vector<std::vector<int>> AdjacencyLists() const;
};

struct GraphStats {
  int num_nodes = 0;
  std::size_t num_edges = 0;
  double mean_degree = 0.0;
  int max_degree = 0;
  int isolated_nodes = 0;
};

GraphStats ComputeGraphStats(const Graph &graph);

// Fraction of edges whose endpoints carry the same label; 1.0 for an
// edgeless graph.  `node_labels` is aligned with node indices.
double EdgeLabelPurity(const Graph &graph,
                       const std::vector<std::string> &node_labels);

// Dense pairwise similarity; only the upper triangle is read when
// building graphs, so symmetry is by construction there.
struct SimilarityMatrix {
  MatrixRMf values;  // n x n

  int Size() const { return static_cast<int>(values.rows()); }
  // Rejects non-square, non-finite, or visibly asymmetric input.
  void Validate() const;
};

// Cosine of each pair of rows; zero rows are an error.
SimilarityMatrix CosineSimilarity(const EmbeddingSet &set);

// PLDA log-likelihood ratio of each pair of rows.
SimilarityMatrix PldaSimilarity(const PldaModel &model,
                                const EmbeddingSet &set);

// Edge (i, j) iff s_ij > tau, strictly; tau = +inf gives an edgeless
// graph, tau below every similarity a complete one.
Graph BuildGraphThreshold(const SimilarityMatrix &sim, double tau);

// Keeps each node's k most similar distinct partners (ties broken
// toward the lower index) and symmetrizes by union.  Requires
// 1 <= k <= n - 1.
Graph BuildGraphTopK(const SimilarityMatrix &sim, int k);

// Text format: header line "n <num_nodes>", then one "i j" line per
// edge with i < j.
void WriteGraph(const std::string &path, const Graph &graph);
Graph ReadGraph(const std::string &path);

}  // namespace gvec

#endif  // GVEC_GRAPH_H_
