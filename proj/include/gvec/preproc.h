// gvec/preproc.h

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

#ifndef GVEC_PREPROC_H_
#define GVEC_PREPROC_H_

#include <string>
#include <vector>

#include "gvec/embedding.h"

namespace gvec {

// Mean over rows, in double precision.
Eigen::VectorXd MeanVector(const EmbeddingSet &set);

// Subtracts `mean` from every row.  Dataset means should come from the
// development set so enroll and test data share its offset.
EmbeddingSet Center(const EmbeddingSet &set, const Eigen::VectorXd &mean);

// Scales every row to unit Euclidean norm.  A zero row is an error.
EmbeddingSet LengthNormalize(const EmbeddingSet &set);

// Linear discriminant projection y = P^T (x - mean).  The columns of P
// solve the generalized eigenproblem S_b v = lambda (S_w + eps I) v and
// are within-class-covariance orthonormal, so applying the transform
// also whitens the within-class scatter.
struct LdaTransform {
  Eigen::VectorXd mean;        // dim_in
  Eigen::MatrixXd projection;  // dim_in x dim_out

  int DimIn() const { return static_cast<int>(projection.rows()); }
  int DimOut() const { return static_cast<int>(projection.cols()); }
  void Validate() const;

  // Binary container "GLDA", little-endian, float64 payload.
  void Save(const std::string &path) const;
  static LdaTransform Load(const std::string &path);
};

// Requires labels on `set`, at least 2 classes, every class with at
// least 2 rows, and 1 <= dim_out <= min(classes - 1, dim_in).
// Eigenvectors are ordered by decreasing eigenvalue; each is scaled so
// v^T (S_w + eps I) v = 1 and its first nonzero component is positive,
// which pins the transform down to a unique matrix.
LdaTransform FitLda(const EmbeddingSet &set, int dim_out);

EmbeddingSet ApplyLda(const LdaTransform &lda, const EmbeddingSet &set);

// Two-covariance PLDA: x = mean + V h + e with h ~ N(0, I_q) and
// e ~ N(0, Sigma), Sigma full.  Trained with EM on a labeled set.
struct PldaModel {
  Eigen::VectorXd mean;              // dim
  Eigen::MatrixXd speaker_subspace;  // dim x q, the V above
  Eigen::MatrixXd noise_covariance;  // dim x dim, symmetric positive definite
  std::vector<double> loglik_history;  // entry k is the loglik of the
                                       // parameters after k EM updates

  int Dim() const { return static_cast<int>(speaker_subspace.rows()); }
  int SubspaceDim() const { return static_cast<int>(speaker_subspace.cols()); }
  void Validate() const;

  // Binary container "GPLD", little-endian, float64 payload.  The
  // loglik history is not stored.
  void Save(const std::string &path) const;
  static PldaModel Load(const std::string &path);
};

// Requires labels, at least 2 classes and 1 <= q <= dim.  Deterministic
// spectral initialization: V = 0.5 U_q with U_q the top-q unit
// eigenvectors of the total covariance, Sigma = 0.5 total covariance.
PldaModel FitPlda(const EmbeddingSet &set, int q, int n_iters);

// Verification scoring.  For trial (x, y) the log-likelihood ratio of
// same-speaker against different-speaker hypotheses has a closed form:
// with C = V V^T + Sigma and B = V V^T, the same-speaker joint
// covariance is [[C, B], [B, C]] and the different-speaker one is
// block-diagonal [[C, 0], [0, C]], so
//
//   llr = 1/2 xt^T G xt + 1/2 yt^T G yt + xt^T K yt + c0,
//   G = C^{-1} - M1,  K = C^{-1} B M1,  M1 = (C - B C^{-1} B)^{-1},
//   c0 = log|C| - 1/2 log|C + B| - 1/2 log|C - B|,
//
// where xt = x - mean, yt = y - mean.  V = 0 gives llr identically 0.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model);

  double Llr(const Eigen::VectorXd &x, const Eigen::VectorXd &y) const;

  // Scores every (row of models) x (row of tests) pair at once.
  MatrixRMd LlrMatrix(const MatrixRMd &models, const MatrixRMd &tests) const;

  int Dim() const { return static_cast<int>(mean_.size()); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd g_;  // C^{-1} - M1
  Eigen::MatrixXd k_;  // C^{-1} B M1
  double c0_ = 0.0;
};

double PldaLlr(const PldaModel &model, const Eigen::VectorXd &x,
               const Eigen::VectorXd &y);

// Float32 storage to and from the double-precision math used here.
MatrixRMd ToDouble(const MatrixRMf &m);
MatrixRMf ToFloat(const MatrixRMd &m);

}  // namespace gvec

#endif  // GVEC_PREPROC_H_
