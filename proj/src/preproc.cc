// gvec/preproc.cc

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

#include "gvec/preproc.h"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <unordered_map>

namespace gvec {

namespace {

constexpr char kLdaMagic[4] = {'G', 'L', 'D', 'A'};
constexpr char kPldaMagic[4] = {'G', 'P', 'L', 'D'};
constexpr std::uint32_t kModelVersion = 1;

std::ifstream OpenIn(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path + " for reading");
  return is;
}

std::ofstream OpenOut(const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open " + path + " for writing");
  return os;
}

void WriteMatrix(std::ostream &os, const Eigen::MatrixXd &m) {
  MatrixRMd row_major = m;
  io::WriteArray<double>(os, row_major.data(),
                         static_cast<std::size_t>(row_major.size()));
}

Eigen::MatrixXd ReadMatrix(std::istream &is, Eigen::Index rows,
                           Eigen::Index cols, const std::string &what) {
  MatrixRMd row_major(rows, cols);
  io::ReadArray<double>(is, row_major.data(),
                        static_cast<std::size_t>(row_major.size()), what);
  return row_major;
}

// Cholesky with one ridge retry, so marginally semidefinite inputs
// (e.g. a sample covariance of nearly collinear data) stay usable.
Eigen::LLT<Eigen::MatrixXd> SpdFactor(const Eigen::MatrixXd &m,
                                      const std::string &what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) return llt;
  double ridge =
      1e-10 * std::max(m.trace() / static_cast<double>(m.rows()), 1.0);
  Eigen::MatrixXd ridged =
      m + ridge * Eigen::MatrixXd::Identity(m.rows(), m.cols());
  llt.compute(ridged);
  if (llt.info() != Eigen::Success)
    throw NumericError(what + " is not positive definite");
  return llt;
}

double LogDet(const Eigen::LLT<Eigen::MatrixXd> &llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

// Flips eigenvector columns so the first non-negligible component is
// positive; pins signs down for deterministic output.
void FixColumnSigns(Eigen::MatrixXd *m) {
  for (Eigen::Index j = 0; j < m->cols(); ++j) {
    double max_abs = m->col(j).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < m->rows(); ++i) {
      if (std::abs((*m)(i, j)) > 1e-12 * max_abs) {
        if ((*m)(i, j) < 0) m->col(j) = -m->col(j);
        break;
      }
    }
  }
}

struct LabeledData {
  MatrixRMd rows;                       // n x d, double precision
  std::vector<std::string> classes;     // sorted speaker names
  std::vector<int> class_of_row;        // n
  std::vector<std::vector<int>> members;  // rows per class
};

LabeledData GroupByLabel(const EmbeddingSet &set, const char *who) {
  set.Validate();
  if (set.labels.empty())
    throw DataError(std::string(who) + " requires speaker labels");
  LabeledData data;
  data.rows = ToDouble(set.vectors);
  std::map<std::string, int> class_index;
  for (const std::string &id : set.ids) {
    const std::string &label = set.labels.at(id);
    class_index.emplace(label, 0);
  }
  for (auto &[label, index] : class_index) {
    index = static_cast<int>(data.classes.size());
    data.classes.push_back(label);
  }
  data.members.resize(data.classes.size());
  data.class_of_row.reserve(set.ids.size());
  for (std::size_t i = 0; i < set.ids.size(); ++i) {
    int c = class_index.at(set.labels.at(set.ids[i]));
    data.class_of_row.push_back(c);
    data.members[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
  }
  if (data.classes.size() < 2)
    throw DataError(std::string(who) + " requires at least 2 classes, got " +
                    std::to_string(data.classes.size()));
  return data;
}

}  // namespace

MatrixRMd ToDouble(const MatrixRMf &m) { return m.cast<double>(); }

MatrixRMf ToFloat(const MatrixRMd &m) { return m.cast<float>(); }

Eigen::VectorXd MeanVector(const EmbeddingSet &set) {
  set.Validate();
  if (set.Count() == 0) throw DataError("cannot take the mean of an empty set");
  return ToDouble(set.vectors).colwise().mean().transpose();
}

EmbeddingSet Center(const EmbeddingSet &set, const Eigen::VectorXd &mean) {
  set.Validate();
  if (mean.size() != set.Dim())
    throw DataError("mean has dim " + std::to_string(mean.size()) +
                    " but embeddings have dim " + std::to_string(set.Dim()));
  EmbeddingSet out = set;
  MatrixRMd x = ToDouble(set.vectors);
  x.rowwise() -= mean.transpose();
  out.vectors = ToFloat(x);
  return out;
}

EmbeddingSet LengthNormalize(const EmbeddingSet &set) {
  set.Validate();
  EmbeddingSet out = set;
  MatrixRMd x = ToDouble(set.vectors);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double norm = x.row(i).norm();
    if (norm == 0.0)
      throw DataError("cannot length-normalize the all-zero embedding \"" +
                      set.ids[static_cast<std::size_t>(i)] + "\"");
    x.row(i) /= norm;
  }
  out.vectors = ToFloat(x);
  return out;
}

void LdaTransform::Validate() const {
  if (projection.rows() < 1 || projection.cols() < 1)
    throw DataError("LDA transform has empty projection");
  if (projection.cols() > projection.rows())
    throw DataError("LDA output dim exceeds input dim");
  if (mean.size() != projection.rows())
    throw DataError("LDA mean and projection dims disagree");
  if (!mean.allFinite() || !projection.allFinite())
    throw DataError("LDA transform contains non-finite values");
}

void LdaTransform::Save(const std::string &path) const {
  Validate();
  std::ofstream os = OpenOut(path);
  io::WriteMagic(os, kLdaMagic);
  io::WriteScalar<std::uint32_t>(os, kModelVersion);
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(DimIn()));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(DimOut()));
  io::WriteArray<double>(os, mean.data(), static_cast<std::size_t>(mean.size()));
  WriteMatrix(os, projection);
  os.flush();
  if (!os) throw DataError("write failed for " + path);
}

LdaTransform LdaTransform::Load(const std::string &path) {
  std::ifstream is = OpenIn(path);
  io::ExpectMagic(is, kLdaMagic, path);
  std::uint32_t version = io::ReadScalar<std::uint32_t>(is, path);
  if (version != kModelVersion)
    throw DataError("unsupported LDA container version " +
                    std::to_string(version) + " in " + path);
  auto dim_in = io::ReadScalar<std::uint32_t>(is, path);
  auto dim_out = io::ReadScalar<std::uint32_t>(is, path);
  LdaTransform lda;
  lda.mean.resize(dim_in);
  io::ReadArray<double>(is, lda.mean.data(), dim_in, path);
  lda.projection = ReadMatrix(is, dim_in, dim_out, path);
  if (is.peek() != std::ifstream::traits_type::eof())
    throw DataError("trailing bytes in " + path);
  lda.Validate();
  return lda;
}

LdaTransform FitLda(const EmbeddingSet &set, int dim_out) {
  LabeledData data = GroupByLabel(set, "LDA");
  const Eigen::Index n = data.rows.rows(), d = data.rows.cols();
  const int n_classes = static_cast<int>(data.classes.size());
  for (std::size_t c = 0; c < data.members.size(); ++c)
    if (data.members[c].size() < 2)
      throw DataError("LDA class \"" + data.classes[c] +
                      "\" has fewer than 2 rows");
  int max_out = std::min(n_classes - 1, static_cast<int>(d));
  if (dim_out < 1 || dim_out > max_out)
    throw ConfigError("LDA output dim must be in [1, " +
                      std::to_string(max_out) + "], got " +
                      std::to_string(dim_out));

  Eigen::VectorXd mean = data.rows.colwise().mean().transpose();
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd sb = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t c = 0; c < data.members.size(); ++c) {
    const std::vector<int> &rows = data.members[c];
    Eigen::VectorXd class_mean = Eigen::VectorXd::Zero(d);
    for (int i : rows) class_mean += data.rows.row(i).transpose();
    class_mean /= static_cast<double>(rows.size());
    for (int i : rows) {
      Eigen::VectorXd y = data.rows.row(i).transpose() - class_mean;
      sw.noalias() += y * y.transpose();
    }
    Eigen::VectorXd b = class_mean - mean;
    sb.noalias() += static_cast<double>(rows.size()) * b * b.transpose();
  }
  sw /= static_cast<double>(n);
  sb /= static_cast<double>(n);

  double reg = 1e-6 * sw.trace() / static_cast<double>(d);
  if (!(reg > 0)) reg = 1e-12;
  sw.diagonal().array() += reg;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(sb, sw);
  if (solver.info() != Eigen::Success)
    throw NumericError("generalized eigensolver failed in LDA");

  // Eigenvalues come out ascending; keep the top dim_out in descending
  // order.  Eigen normalizes eigenvectors to v^T S_w v = 1 already.
  LdaTransform lda;
  lda.mean = mean;
  lda.projection.resize(d, dim_out);
  for (int j = 0; j < dim_out; ++j)
    lda.projection.col(j) = solver.eigenvectors().col(d - 1 - j);
  FixColumnSigns(&lda.projection);
  lda.Validate();
  return lda;
}

EmbeddingSet ApplyLda(const LdaTransform &lda, const EmbeddingSet &set) {
  lda.Validate();
  set.Validate();
  if (set.Dim() != lda.DimIn())
    throw DataError("LDA transform expects dim " + std::to_string(lda.DimIn()) +
                    " but embeddings have dim " + std::to_string(set.Dim()));
  EmbeddingSet out = set;
  MatrixRMd x = ToDouble(set.vectors);
  x.rowwise() -= lda.mean.transpose();
  out.vectors = ToFloat(MatrixRMd(x * lda.projection));
  return out;
}

void PldaModel::Validate() const {
  const Eigen::Index d = speaker_subspace.rows();
  if (d < 1 || speaker_subspace.cols() < 1)
    throw DataError("PLDA model has empty speaker subspace");
  if (speaker_subspace.cols() > d)
    throw DataError("PLDA subspace dim exceeds feature dim");
  if (mean.size() != d || noise_covariance.rows() != d ||
      noise_covariance.cols() != d)
    throw DataError("PLDA model dims disagree");
  if (!mean.allFinite() || !speaker_subspace.allFinite() ||
      !noise_covariance.allFinite())
    throw DataError("PLDA model contains non-finite values");
  double scale = std::max(1.0, noise_covariance.cwiseAbs().maxCoeff());
  if ((noise_covariance - noise_covariance.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * scale)
    throw DataError("PLDA noise covariance is not symmetric");
}

void PldaModel::Save(const std::string &path) const {
  Validate();
  std::ofstream os = OpenOut(path);
  io::WriteMagic(os, kPldaMagic);
  io::WriteScalar<std::uint32_t>(os, kModelVersion);
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(Dim()));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(SubspaceDim()));
  io::WriteArray<double>(os, mean.data(), static_cast<std::size_t>(mean.size()));
  WriteMatrix(os, speaker_subspace);
  WriteMatrix(os, noise_covariance);
  os.flush();
  if (!os) throw DataError("write failed for " + path);
}

PldaModel PldaModel::Load(const std::string &path) {
  std::ifstream is = OpenIn(path);
  io::ExpectMagic(is, kPldaMagic, path);
  std::uint32_t version = io::ReadScalar<std::uint32_t>(is, path);
  if (version != kModelVersion)
    throw DataError("unsupported PLDA container version " +
                    std::to_string(version) + " in " + path);
  auto dim = io::ReadScalar<std::uint32_t>(is, path);
  auto q = io::ReadScalar<std::uint32_t>(is, path);
  PldaModel model;
  model.mean.resize(dim);
  io::ReadArray<double>(is, model.mean.data(), dim, path);
  model.speaker_subspace = ReadMatrix(is, dim, q, path);
  model.noise_covariance = ReadMatrix(is, dim, dim, path);
  if (is.peek() != std::ifstream::traits_type::eof())
    throw DataError("trailing bytes in " + path);
  model.Validate();
  return model;
}

PldaModel FitPlda(const EmbeddingSet &set, int q, int n_iters) {
  LabeledData data = GroupByLabel(set, "PLDA");
  const Eigen::Index n = data.rows.rows(), d = data.rows.cols();
  if (q < 1 || q > d)
    throw ConfigError("PLDA subspace dim must be in [1, " + std::to_string(d) +
                      "], got " + std::to_string(q));
  if (n_iters < 0)
    throw ConfigError("PLDA iteration count must be non-negative");

  PldaModel model;
  model.mean = data.rows.colwise().mean().transpose();
  MatrixRMd y = data.rows;
  y.rowwise() -= model.mean.transpose();

  const std::size_t n_spk = data.members.size();
  Eigen::MatrixXd sums(d, static_cast<Eigen::Index>(n_spk));  // per-speaker sums
  std::vector<int> counts(n_spk);
  for (std::size_t s = 0; s < n_spk; ++s) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(d);
    for (int i : data.members[s]) f += y.row(i).transpose();
    sums.col(static_cast<Eigen::Index>(s)) = f;
    counts[s] = static_cast<int>(data.members[s].size());
  }

  Eigen::MatrixXd scatter = y.transpose() * y;  // sum_i y_i y_i^T
  Eigen::MatrixXd total_cov = scatter / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(total_cov);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed in PLDA initialization");
  Eigen::MatrixXd top(d, q);
  for (int j = 0; j < q; ++j) top.col(j) = eig.eigenvectors().col(d - 1 - j);
  FixColumnSigns(&top);
  model.speaker_subspace = 0.5 * top;
  model.noise_covariance = 0.5 * total_cov;

  model.loglik_history.reserve(static_cast<std::size_t>(n_iters) + 1);
  const double log2pi = std::log(2.0 * std::numbers::pi);

  for (int iter = 0; iter <= n_iters; ++iter) {
    // E-step at the current parameters.  For speaker s with n_s rows,
    // the posterior of h_s is N(hhat_s, M_s^{-1}) with
    // M_s = I + n_s V^T Sigma^{-1} V and hhat_s = M_s^{-1} V^T Sigma^{-1} f_s.
    Eigen::LLT<Eigen::MatrixXd> sigma_llt =
        SpdFactor(model.noise_covariance, "PLDA noise covariance");
    double logdet_sigma = LogDet(sigma_llt);
    Eigen::MatrixXd lambda =
        sigma_llt.solve(Eigen::MatrixXd::Identity(d, d));
    Eigen::MatrixXd phi = model.speaker_subspace.transpose() * lambda;  // q x d
    Eigen::MatrixXd f_mat = phi * model.speaker_subspace;               // q x q
    f_mat = 0.5 * (f_mat + f_mat.transpose()).eval();

    // One factorization per distinct per-speaker count.
    std::unordered_map<int, std::pair<Eigen::MatrixXd, double>> posteriors;
    for (std::size_t s = 0; s < n_spk; ++s) {
      if (posteriors.count(counts[s])) continue;
      Eigen::MatrixXd m = Eigen::MatrixXd::Identity(q, q) +
                          static_cast<double>(counts[s]) * f_mat;
      Eigen::LLT<Eigen::MatrixXd> llt = SpdFactor(m, "PLDA posterior precision");
      posteriors.emplace(
          counts[s],
          std::make_pair(llt.solve(Eigen::MatrixXd::Identity(q, q)),
                         LogDet(llt)));
    }

    double loglik = -0.5 * (static_cast<double>(n) * static_cast<double>(d) *
                                log2pi +
                            static_cast<double>(n) * logdet_sigma +
                            (lambda * scatter).trace());
    Eigen::MatrixXd r_acc = Eigen::MatrixXd::Zero(q, q);
    Eigen::MatrixXd c_acc = Eigen::MatrixXd::Zero(d, q);
    for (std::size_t s = 0; s < n_spk; ++s) {
      const auto &[m_inv, logdet_m] = posteriors.at(counts[s]);
      Eigen::VectorXd f = sums.col(static_cast<Eigen::Index>(s));
      Eigen::VectorXd t = phi * f;
      Eigen::VectorXd hhat = m_inv * t;
      loglik += -0.5 * logdet_m + 0.5 * t.dot(hhat);
      r_acc.noalias() += static_cast<double>(counts[s]) *
                         (m_inv + hhat * hhat.transpose());
      c_acc.noalias() += f * hhat.transpose();
    }
    model.loglik_history.push_back(loglik);
    if (iter == n_iters) break;

    // M-step.
    Eigen::LDLT<Eigen::MatrixXd> r_ldlt(r_acc);
    if (r_ldlt.info() != Eigen::Success)
      throw NumericError("singular accumulator in PLDA M-step");
    Eigen::MatrixXd v_new = r_ldlt.solve(c_acc.transpose()).transpose();
    Eigen::MatrixXd sigma_new =
        (scatter - v_new * c_acc.transpose() - c_acc * v_new.transpose() +
         v_new * r_acc * v_new.transpose()) /
        static_cast<double>(n);
    model.speaker_subspace = v_new;
    model.noise_covariance = 0.5 * (sigma_new + sigma_new.transpose());
  }
  model.Validate();
  return model;
}

PldaScorer::PldaScorer(const PldaModel &model) {
  model.Validate();
  mean_ = model.mean;
  const Eigen::Index d = model.Dim();
  Eigen::MatrixXd b = model.speaker_subspace * model.speaker_subspace.transpose();
  Eigen::MatrixXd c = b + model.noise_covariance;

  Eigen::LLT<Eigen::MatrixXd> c_llt = SpdFactor(c, "PLDA total covariance");
  Eigen::MatrixXd c_inv = c_llt.solve(Eigen::MatrixXd::Identity(d, d));
  Eigen::MatrixXd schur = c - b * c_inv * b;
  Eigen::LLT<Eigen::MatrixXd> schur_llt =
      SpdFactor(schur, "PLDA same-speaker Schur complement");
  Eigen::MatrixXd m1 = schur_llt.solve(Eigen::MatrixXd::Identity(d, d));

  g_ = c_inv - m1;
  g_ = 0.5 * (g_ + g_.transpose()).eval();
  k_ = c_inv * b * m1;
  k_ = 0.5 * (k_ + k_.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> sum_llt =
      SpdFactor(Eigen::MatrixXd(c + b), "PLDA same-speaker covariance");
  Eigen::LLT<Eigen::MatrixXd> sigma_llt =
      SpdFactor(model.noise_covariance, "PLDA noise covariance");
  c0_ = LogDet(c_llt) - 0.5 * LogDet(sum_llt) - 0.5 * LogDet(sigma_llt);
}

double PldaScorer::Llr(const Eigen::VectorXd &x,
                       const Eigen::VectorXd &y) const {
  if (x.size() != Dim() || y.size() != Dim())
    throw DataError("PLDA scorer expects dim " + std::to_string(Dim()));
  Eigen::VectorXd xt = x - mean_, yt = y - mean_;
  return 0.5 * xt.dot(g_ * xt) + 0.5 * yt.dot(g_ * yt) + xt.dot(k_ * yt) + c0_;
}

MatrixRMd PldaScorer::LlrMatrix(const MatrixRMd &models,
                                const MatrixRMd &tests) const {
  if (models.cols() != Dim() || tests.cols() != Dim())
    throw DataError("PLDA scorer expects dim " + std::to_string(Dim()));
  MatrixRMd xt = models;
  xt.rowwise() -= mean_.transpose();
  MatrixRMd yt = tests;
  yt.rowwise() -= mean_.transpose();
  Eigen::VectorXd ax = 0.5 * ((xt * g_).cwiseProduct(xt)).rowwise().sum();
  Eigen::VectorXd ay = 0.5 * ((yt * g_).cwiseProduct(yt)).rowwise().sum();
  MatrixRMd out = xt * k_ * yt.transpose();
  out.colwise() += ax;
  out.rowwise() += ay.transpose();
  out.array() += c0_;
  return out;
}

double PldaLlr(const PldaModel &model, const Eigen::VectorXd &x,
               const Eigen::VectorXd &y) {
  return PldaScorer(model).Llr(x, y);
}

}  // namespace gvec
