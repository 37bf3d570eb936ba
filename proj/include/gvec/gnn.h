// gvec/gnn.h

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

#ifndef GVEC_GNN_H_
#define GVEC_GNN_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gvec/embedding.h"
#include "gvec/graph.h"

// Transductive node classifier over the verification graph.  The
// network is [graph layer -> batch norm] x depth, a linear head whose
// outputs are the g-vectors, and a linear classifier trained with
// cross entropy masked to the labeled development nodes.  Forward and
// backward passes are written out by hand; everything is templated on
// the scalar type so gradients can be checked in double precision
// while production runs in float32.
//
// Every aggregation runs over the closed neighborhood {i} u N(i): the
// graph stores off-diagonal edges only and the engine adds the
// self-loop to each node exactly once.

namespace gvec {

enum class GnnVariant {
  kGcn = 0,
  kGat = 1,
  kGatV2 = 2,
  kSageMean = 3,
  kGraphTransformer = 4,
  kTagcn = 5,
};

std::string VariantName(GnnVariant variant);
GnnVariant VariantFromName(const std::string &name);  // ConfigError on unknown

enum class GnnActivation { kRelu = 0, kIdentity = 1 };

struct GnnConfig {
  GnnVariant variant = GnnVariant::kGat;
  int depth = 2;
  int in_dim = 0;     // taken from the node features
  int hidden_dim = 256;
  int gvec_dim = 250;
  int n_classes = 0;  // taken from the development labels
  int heads = 4;      // attention variants only
  int hops = 3;       // polynomial filter length, kTagcn only
  int epochs = 600;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  std::uint64_t seed = 17;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  double leaky_slope = 0.2;
  // Nonlinearity of the convolutional variants (kGcn, kSageMean,
  // kTagcn); the attention variants aggregate without one.
  GnnActivation activation = GnnActivation::kRelu;

  bool IsAttention() const {
    return variant == GnnVariant::kGat || variant == GnnVariant::kGatV2 ||
           variant == GnnVariant::kGraphTransformer;
  }
  void Validate() const;
};

// Closed-neighborhood CSR plus the propagation weights both
// convolution flavors need.  For entry (i, j):
//   sym_weights  = 1 / sqrt(deg(i) deg(j))   (normalized adjacency)
//   mean_weights = 1 / deg(i)                 (row-stochastic mean)
// with deg the closed-neighborhood size, so a 2-node single-edge graph
// has every normalized entry equal to 0.5.
template <typename Real>
struct GraphContext {
  int n = 0;
  std::vector<int> offsets;  // n + 1
  std::vector<int> cols;     // ascending within each row, includes self
  std::vector<Real> sym_weights;
  std::vector<Real> mean_weights;

  static GraphContext FromGraph(const Graph &graph) {
    graph.Validate();
    GraphContext ctx;
    ctx.n = graph.num_nodes;
    std::vector<std::vector<int>> adj = graph.AdjacencyLists();
    ctx.offsets.resize(static_cast<std::size_t>(ctx.n) + 1, 0);
    for (int i = 0; i < ctx.n; ++i)
      ctx.offsets[static_cast<std::size_t>(i) + 1] =
          ctx.offsets[static_cast<std::size_t>(i)] +
          static_cast<int>(adj[static_cast<std::size_t>(i)].size()) + 1;
    ctx.cols.reserve(static_cast<std::size_t>(ctx.offsets.back()));
    for (int i = 0; i < ctx.n; ++i) {
      bool placed = false;
      for (int j : adj[static_cast<std::size_t>(i)]) {
        if (!placed && i < j) {
          ctx.cols.push_back(i);
          placed = true;
        }
        ctx.cols.push_back(j);
      }
      if (!placed) ctx.cols.push_back(i);
    }
    ctx.sym_weights.resize(ctx.cols.size());
    ctx.mean_weights.resize(ctx.cols.size());
    for (int i = 0; i < ctx.n; ++i) {
      Real deg_i = static_cast<Real>(ctx.offsets[static_cast<std::size_t>(i) + 1] -
                                     ctx.offsets[static_cast<std::size_t>(i)]);
      for (int k = ctx.offsets[static_cast<std::size_t>(i)];
           k < ctx.offsets[static_cast<std::size_t>(i) + 1]; ++k) {
        int j = ctx.cols[static_cast<std::size_t>(k)];
        Real deg_j =
            static_cast<Real>(ctx.offsets[static_cast<std::size_t>(j) + 1] -
                              ctx.offsets[static_cast<std::size_t>(j)]);
        ctx.sym_weights[static_cast<std::size_t>(k)] =
            Real(1) / std::sqrt(deg_i * deg_j);
        ctx.mean_weights[static_cast<std::size_t>(k)] = Real(1) / deg_i;
      }
    }
    return ctx;
  }

  int RowBegin(int i) const { return offsets[static_cast<std::size_t>(i)]; }
  int RowEnd(int i) const { return offsets[static_cast<std::size_t>(i) + 1]; }
  std::size_t Nnz() const { return cols.size(); }
};

// out(i) = sum_k w_k x(col_k) over row i's entries.
template <typename Real>
MatrixRM<Real> Propagate(const GraphContext<Real> &ctx,
                         const std::vector<Real> &weights,
                         const MatrixRM<Real> &x) {
  MatrixRM<Real> out = MatrixRM<Real>::Zero(x.rows(), x.cols());
  for (int i = 0; i < ctx.n; ++i)
    for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k)
      out.row(i).noalias() +=
          weights[static_cast<std::size_t>(k)] *
          x.row(ctx.cols[static_cast<std::size_t>(k)]);
  return out;
}

// out(col_k) += w_k x(i): the adjoint of Propagate.
template <typename Real>
MatrixRM<Real> PropagateTransposed(const GraphContext<Real> &ctx,
                                   const std::vector<Real> &weights,
                                   const MatrixRM<Real> &x) {
  MatrixRM<Real> out = MatrixRM<Real>::Zero(x.rows(), x.cols());
  for (int i = 0; i < ctx.n; ++i)
    for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k)
      out.row(ctx.cols[static_cast<std::size_t>(k)]).noalias() +=
          weights[static_cast<std::size_t>(k)] * x.row(i);
  return out;
}

namespace detail {

// Glorot uniform, drawn elementwise in row-major order so parameter
// bytes are a pure function of the seed.
template <typename Real>
MatrixRM<Real> GlorotInit(Eigen::Index rows, Eigen::Index cols, double fan_in,
                          double fan_out, std::mt19937_64 *rng) {
  double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  MatrixRM<Real> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = static_cast<Real>(uniform(*rng));
  return m;
}

template <typename Real>
Real LeakyRelu(Real v, Real slope) {
  return v > Real(0) ? v : slope * v;
}

template <typename Real>
Real LeakyReluGrad(Real v, Real slope) {
  return v > Real(0) ? Real(1) : slope;
}

}  // namespace detail

// name, value, gradient.
template <typename Real>
using ParamVisitor =
    std::function<void(const std::string &, MatrixRM<Real> *, MatrixRM<Real> *)>;
// name, buffer (non-trainable state).
template <typename Real>
using BufferVisitor = std::function<void(const std::string &, MatrixRM<Real> *)>;

// Feature-wise batch normalization over all nodes.  Training uses the
// biased batch variance; running statistics follow
// r = (1 - momentum) r + momentum b with the unbiased batch variance,
// and evaluation normalizes with the running statistics.
template <typename Real>
class BatchNorm {
 public:
  BatchNorm(int dim, Real momentum, Real eps)
      : gamma_(MatrixRM<Real>::Ones(1, dim)),
        beta_(MatrixRM<Real>::Zero(1, dim)),
        g_gamma_(MatrixRM<Real>::Zero(1, dim)),
        g_beta_(MatrixRM<Real>::Zero(1, dim)),
        running_mean_(MatrixRM<Real>::Zero(1, dim)),
        running_var_(MatrixRM<Real>::Ones(1, dim)),
        momentum_(momentum),
        eps_(eps) {}

  MatrixRM<Real> Forward(const MatrixRM<Real> &x, bool training,
                         bool keep_caches) {
    const Eigen::Index n = x.rows(), d = x.cols();
    MatrixRM<Real> mean(1, d), var(1, d);
    if (training) {
      mean = x.colwise().mean();
      MatrixRM<Real> centered = x.rowwise() - mean.row(0);
      var = centered.array().square().colwise().mean();
      Real unbiased = n > 1 ? static_cast<Real>(n) / static_cast<Real>(n - 1)
                            : Real(1);
      running_mean_ = (Real(1) - momentum_) * running_mean_ + momentum_ * mean;
      running_var_ =
          (Real(1) - momentum_) * running_var_ + momentum_ * (unbiased * var);
    } else {
      mean = running_mean_;
      var = running_var_;
    }
    MatrixRM<Real> invstd =
        (var.array() + eps_).rsqrt().matrix();
    MatrixRM<Real> xhat =
        (x.rowwise() - mean.row(0)).array().rowwise() * invstd.row(0).array();
    if (keep_caches) {
      xhat_ = xhat;
      invstd_ = invstd;
    }
    return (xhat.array().rowwise() * gamma_.row(0).array()).matrix().rowwise() +
           beta_.row(0);
  }

  // Training-mode gradient; uses the caches of the last Forward.
  MatrixRM<Real> Backward(const MatrixRM<Real> &grad_out) {
    g_gamma_.row(0) +=
        (grad_out.array() * xhat_.array()).colwise().sum().matrix();
    g_beta_.row(0) += grad_out.colwise().sum();
    MatrixRM<Real> gxhat =
        grad_out.array().rowwise() * gamma_.row(0).array();
    MatrixRM<Real> mean_g = gxhat.colwise().mean();
    MatrixRM<Real> mean_gx =
        (gxhat.array() * xhat_.array()).colwise().mean();
    MatrixRM<Real> inner = gxhat.rowwise() - mean_g.row(0);
    inner -= (xhat_.array().rowwise() * mean_gx.row(0).array()).matrix();
    return (inner.array().rowwise() * invstd_.row(0).array()).matrix();
  }

  void VisitParams(const std::string &prefix, const ParamVisitor<Real> &visit) {
    visit(prefix + "/gamma", &gamma_, &g_gamma_);
    visit(prefix + "/beta", &beta_, &g_beta_);
  }
  void VisitBuffers(const std::string &prefix, const BufferVisitor<Real> &visit) {
    visit(prefix + "/running_mean", &running_mean_);
    visit(prefix + "/running_var", &running_var_);
  }

 private:
  MatrixRM<Real> gamma_, beta_, g_gamma_, g_beta_;
  MatrixRM<Real> running_mean_, running_var_;
  Real momentum_, eps_;
  MatrixRM<Real> xhat_, invstd_;
};

template <typename Real>
class Linear {
 public:
  Linear(int in_dim, int out_dim, std::mt19937_64 *rng)
      : weight_(detail::GlorotInit<Real>(in_dim, out_dim, in_dim, out_dim, rng)),
        bias_(MatrixRM<Real>::Zero(1, out_dim)),
        g_weight_(MatrixRM<Real>::Zero(in_dim, out_dim)),
        g_bias_(MatrixRM<Real>::Zero(1, out_dim)) {}

  MatrixRM<Real> Forward(const MatrixRM<Real> &x, bool keep_caches) {
    if (keep_caches) x_ = x;
    return (x * weight_).rowwise() + bias_.row(0);
  }

  MatrixRM<Real> Backward(const MatrixRM<Real> &grad_out) {
    g_weight_.noalias() += x_.transpose() * grad_out;
    g_bias_.row(0) += grad_out.colwise().sum();
    return grad_out * weight_.transpose();
  }

  void VisitParams(const std::string &prefix, const ParamVisitor<Real> &visit) {
    visit(prefix + "/weight", &weight_, &g_weight_);
    visit(prefix + "/bias", &bias_, &g_bias_);
  }

 private:
  MatrixRM<Real> weight_, bias_, g_weight_, g_bias_;
  MatrixRM<Real> x_;
};

// One graph layer of any variant.
//
//   kGcn:    X' = act(N X Theta),  N the normalized adjacency
//   kTagcn:  X' = act(sum_{p=1..P} N^p X Theta_p); P = 1 equals kGcn
//   kSage:   x_i' = act(W [x_i || mean_{j in nbhd(i)} x_j]), no bias
//   kGat:    x_i' = sum_j alpha_ij Theta x_j,
//            e_ij = LeakyReLU(a_src . Theta x_i + a_dst . Theta x_j)
//   kGatV2:  e_ij = a . LeakyReLU(Theta x_i + Theta x_j), shared Theta
//   kGraphTransformer:
//            x_i' = W1 x_i + sum_j alpha_ij W2 x_j,
//            alpha = softmax_j((Q x_i . K x_j) / sqrt(d_head))
//
// with alpha a softmax over the closed neighborhood of i.  Attention
// variants run `heads` heads whose outputs are concatenated on hidden
// layers and averaged on the final graph layer.
template <typename Real>
class GnnLayer {
 public:
  GnnLayer(const GnnConfig &cfg, int in_dim, int out_dim, bool final_layer,
           std::mt19937_64 *rng)
      : variant_(cfg.variant),
        act_(cfg.IsAttention() ? GnnActivation::kIdentity : cfg.activation),
        in_(in_dim),
        out_(out_dim),
        heads_(cfg.IsAttention() ? cfg.heads : 1),
        hops_(variant_ == GnnVariant::kTagcn ? cfg.hops : 1),
        final_(final_layer),
        leaky_(static_cast<Real>(cfg.leaky_slope)) {
    head_dim_ = final_ ? out_ : out_ / heads_;
    switch (variant_) {
      case GnnVariant::kGcn:
        conv_w_.push_back(
            detail::GlorotInit<Real>(in_, out_, in_, out_, rng));
        break;
      case GnnVariant::kTagcn:
        for (int p = 0; p < hops_; ++p)
          conv_w_.push_back(
              detail::GlorotInit<Real>(in_, out_, in_, out_, rng));
        break;
      case GnnVariant::kSageMean:
        conv_w_.push_back(
            detail::GlorotInit<Real>(2 * in_, out_, 2 * in_, out_, rng));
        break;
      case GnnVariant::kGat:
        for (int h = 0; h < heads_; ++h) {
          theta_.push_back(
              detail::GlorotInit<Real>(in_, head_dim_, in_, head_dim_, rng));
          att_src_.push_back(detail::GlorotInit<Real>(head_dim_, 1,
                                                      2 * head_dim_, 1, rng));
          att_dst_.push_back(detail::GlorotInit<Real>(head_dim_, 1,
                                                      2 * head_dim_, 1, rng));
        }
        break;
      case GnnVariant::kGatV2:
        for (int h = 0; h < heads_; ++h) {
          theta_.push_back(
              detail::GlorotInit<Real>(in_, head_dim_, in_, head_dim_, rng));
          att_src_.push_back(detail::GlorotInit<Real>(head_dim_, 1,
                                                      2 * head_dim_, 1, rng));
        }
        break;
      case GnnVariant::kGraphTransformer:
        skip_w_ = detail::GlorotInit<Real>(in_, out_, in_, out_, rng);
        for (int h = 0; h < heads_; ++h) {
          tf_q_.push_back(
              detail::GlorotInit<Real>(in_, head_dim_, in_, head_dim_, rng));
          tf_k_.push_back(
              detail::GlorotInit<Real>(in_, head_dim_, in_, head_dim_, rng));
          tf_v_.push_back(
              detail::GlorotInit<Real>(in_, head_dim_, in_, head_dim_, rng));
        }
        break;
    }
    AllocGrads();
  }

  MatrixRM<Real> Forward(const GraphContext<Real> &ctx, const MatrixRM<Real> &x,
                         bool keep_caches) {
    switch (variant_) {
      case GnnVariant::kGcn:
      case GnnVariant::kTagcn:
        return ForwardConv(ctx, x, keep_caches);
      case GnnVariant::kSageMean:
        return ForwardSage(ctx, x, keep_caches);
      case GnnVariant::kGat:
        return ForwardGat(ctx, x, keep_caches);
      case GnnVariant::kGatV2:
        return ForwardGatV2(ctx, x, keep_caches);
      case GnnVariant::kGraphTransformer:
        return ForwardTransformer(ctx, x, keep_caches);
    }
    throw ConfigError("unknown layer variant");
  }

  MatrixRM<Real> Backward(const GraphContext<Real> &ctx,
                          const MatrixRM<Real> &grad_out) {
    switch (variant_) {
      case GnnVariant::kGcn:
      case GnnVariant::kTagcn:
        return BackwardConv(ctx, grad_out);
      case GnnVariant::kSageMean:
        return BackwardSage(ctx, grad_out);
      case GnnVariant::kGat:
        return BackwardGat(ctx, grad_out);
      case GnnVariant::kGatV2:
        return BackwardGatV2(ctx, grad_out);
      case GnnVariant::kGraphTransformer:
        return BackwardTransformer(ctx, grad_out);
    }
    throw ConfigError("unknown layer variant");
  }

  // Attention coefficients per head, aligned with the context CSR.
  std::vector<std::vector<Real>> Attention(const GraphContext<Real> &ctx,
                                           const MatrixRM<Real> &x) const {
    std::vector<std::vector<Real>> alphas;
    switch (variant_) {
      case GnnVariant::kGat:
        for (int h = 0; h < heads_; ++h) {
          MatrixRM<Real> z = x * theta_[static_cast<std::size_t>(h)];
          alphas.push_back(GatAlpha(ctx, z, h).first);
        }
        return alphas;
      case GnnVariant::kGatV2:
        for (int h = 0; h < heads_; ++h) {
          MatrixRM<Real> z = x * theta_[static_cast<std::size_t>(h)];
          alphas.push_back(GatV2Alpha(ctx, z, h).first);
        }
        return alphas;
      case GnnVariant::kGraphTransformer:
        for (int h = 0; h < heads_; ++h) {
          MatrixRM<Real> qx = x * tf_q_[static_cast<std::size_t>(h)];
          MatrixRM<Real> kx = x * tf_k_[static_cast<std::size_t>(h)];
          alphas.push_back(TransformerAlpha(ctx, qx, kx));
        }
        return alphas;
      default:
        throw ConfigError("attention coefficients require an attention "
                          "variant, got " +
                          VariantName(variant_));
    }
  }

  void VisitParams(const std::string &prefix, const ParamVisitor<Real> &visit) {
    switch (variant_) {
      case GnnVariant::kGcn:
        visit(prefix + "/theta", &conv_w_[0], &g_conv_w_[0]);
        break;
      case GnnVariant::kTagcn:
        for (int p = 0; p < hops_; ++p)
          visit(prefix + "/theta" + std::to_string(p + 1),
                &conv_w_[static_cast<std::size_t>(p)],
                &g_conv_w_[static_cast<std::size_t>(p)]);
        break;
      case GnnVariant::kSageMean:
        visit(prefix + "/weight", &conv_w_[0], &g_conv_w_[0]);
        break;
      case GnnVariant::kGat:
        for (int h = 0; h < heads_; ++h) {
          std::string head = prefix + "/head" + std::to_string(h);
          visit(head + "/theta", &theta_[static_cast<std::size_t>(h)],
                &g_theta_[static_cast<std::size_t>(h)]);
          visit(head + "/att_src", &att_src_[static_cast<std::size_t>(h)],
                &g_att_src_[static_cast<std::size_t>(h)]);
          visit(head + "/att_dst", &att_dst_[static_cast<std::size_t>(h)],
                &g_att_dst_[static_cast<std::size_t>(h)]);
        }
        break;
      case GnnVariant::kGatV2:
        for (int h = 0; h < heads_; ++h) {
          std::string head = prefix + "/head" + std::to_string(h);
          visit(head + "/theta", &theta_[static_cast<std::size_t>(h)],
                &g_theta_[static_cast<std::size_t>(h)]);
          visit(head + "/att", &att_src_[static_cast<std::size_t>(h)],
                &g_att_src_[static_cast<std::size_t>(h)]);
        }
        break;
      case GnnVariant::kGraphTransformer:
        visit(prefix + "/skip", &skip_w_, &g_skip_w_);
        for (int h = 0; h < heads_; ++h) {
          std::string head = prefix + "/head" + std::to_string(h);
          visit(head + "/query", &tf_q_[static_cast<std::size_t>(h)],
                &g_tf_q_[static_cast<std::size_t>(h)]);
          visit(head + "/key", &tf_k_[static_cast<std::size_t>(h)],
                &g_tf_k_[static_cast<std::size_t>(h)]);
          visit(head + "/value", &tf_v_[static_cast<std::size_t>(h)],
                &g_tf_v_[static_cast<std::size_t>(h)]);
        }
        break;
    }
  }

  int OutDim() const { return out_; }

 private:
  void AllocGrads() {
    auto zero_like = [](const std::vector<MatrixRM<Real>> &src) {
      std::vector<MatrixRM<Real>> out;
      out.reserve(src.size());
      for (const auto &m : src)
        out.push_back(MatrixRM<Real>::Zero(m.rows(), m.cols()));
      return out;
    };
    g_conv_w_ = zero_like(conv_w_);
    g_theta_ = zero_like(theta_);
    g_att_src_ = zero_like(att_src_);
    g_att_dst_ = zero_like(att_dst_);
    g_tf_q_ = zero_like(tf_q_);
    g_tf_k_ = zero_like(tf_k_);
    g_tf_v_ = zero_like(tf_v_);
    if (skip_w_.size() > 0)
      g_skip_w_ = MatrixRM<Real>::Zero(skip_w_.rows(), skip_w_.cols());
  }

  MatrixRM<Real> Activate(const MatrixRM<Real> &pre) const {
    if (act_ == GnnActivation::kIdentity) return pre;
    return pre.cwiseMax(Real(0));
  }

  MatrixRM<Real> ActivateGrad(const MatrixRM<Real> &grad_out) const {
    if (act_ == GnnActivation::kIdentity) return grad_out;
    return ((pre_.array() > Real(0)).template cast<Real>() *
            grad_out.array())
        .matrix();
  }

  // --- kGcn and kTagcn ---------------------------------------------------

  MatrixRM<Real> ForwardConv(const GraphContext<Real> &ctx,
                             const MatrixRM<Real> &x, bool keep_caches) {
    std::vector<MatrixRM<Real>> powers;  // N^p X for p = 1..hops
    powers.push_back(Propagate(ctx, ctx.sym_weights, x));
    for (int p = 1; p < hops_; ++p)
      powers.push_back(Propagate(ctx, ctx.sym_weights, powers.back()));
    MatrixRM<Real> pre = powers[0] * conv_w_[0];
    for (int p = 1; p < hops_; ++p)
      pre.noalias() += powers[static_cast<std::size_t>(p)] *
                       conv_w_[static_cast<std::size_t>(p)];
    if (keep_caches) {
      powers_ = std::move(powers);
      pre_ = pre;
    }
    return Activate(pre);
  }

  MatrixRM<Real> BackwardConv(const GraphContext<Real> &ctx,
                              const MatrixRM<Real> &grad_out) {
    MatrixRM<Real> gpre = ActivateGrad(grad_out);
    for (int p = 0; p < hops_; ++p)
      g_conv_w_[static_cast<std::size_t>(p)].noalias() +=
          powers_[static_cast<std::size_t>(p)].transpose() * gpre;
    // grad_x = sum_p N^p gpre Theta_p^T, accumulated Horner style; N is
    // symmetric so Propagate is its own adjoint.
    MatrixRM<Real> acc = MatrixRM<Real>::Zero(grad_out.rows(), in_);
    for (int p = hops_ - 1; p >= 0; --p) {
      acc.noalias() += gpre * conv_w_[static_cast<std::size_t>(p)].transpose();
      acc = Propagate(ctx, ctx.sym_weights, acc);
    }
    return acc;
  }

  // --- kSageMean ----------------------------------------------------------

  MatrixRM<Real> ForwardSage(const GraphContext<Real> &ctx,
                             const MatrixRM<Real> &x, bool keep_caches) {
    MatrixRM<Real> mean = Propagate(ctx, ctx.mean_weights, x);
    MatrixRM<Real> concat(x.rows(), 2 * in_);
    concat.leftCols(in_) = x;
    concat.rightCols(in_) = mean;
    MatrixRM<Real> pre = concat * conv_w_[0];
    if (keep_caches) {
      concat_ = std::move(concat);
      pre_ = pre;
    }
    return Activate(pre);
  }

  MatrixRM<Real> BackwardSage(const GraphContext<Real> &ctx,
                              const MatrixRM<Real> &grad_out) {
    MatrixRM<Real> gpre = ActivateGrad(grad_out);
    g_conv_w_[0].noalias() += concat_.transpose() * gpre;
    MatrixRM<Real> gconcat = gpre * conv_w_[0].transpose();
    MatrixRM<Real> gx = gconcat.leftCols(in_);
    gx.noalias() +=
        PropagateTransposed(ctx, ctx.mean_weights,
                            MatrixRM<Real>(gconcat.rightCols(in_)));
    return gx;
  }

  // --- attention helpers ----------------------------------------------------

  // Row-wise softmax over CSR entries, max-subtracted for stability.
  static std::vector<Real> SoftmaxRows(const GraphContext<Real> &ctx,
                                       const std::vector<Real> &scores) {
    std::vector<Real> alpha(scores.size());
    for (int i = 0; i < ctx.n; ++i) {
      int begin = ctx.RowBegin(i), end = ctx.RowEnd(i);
      Real max_score = scores[static_cast<std::size_t>(begin)];
      for (int k = begin + 1; k < end; ++k)
        max_score = std::max(max_score, scores[static_cast<std::size_t>(k)]);
      Real total = Real(0);
      for (int k = begin; k < end; ++k) {
        Real e = std::exp(scores[static_cast<std::size_t>(k)] - max_score);
        alpha[static_cast<std::size_t>(k)] = e;
        total += e;
      }
      for (int k = begin; k < end; ++k)
        alpha[static_cast<std::size_t>(k)] /= total;
    }
    return alpha;
  }

  // d(loss)/d(score) for a row-wise softmax: a (g - sum_k a_k g_k).
  static std::vector<Real> SoftmaxBackward(const GraphContext<Real> &ctx,
                                           const std::vector<Real> &alpha,
                                           const std::vector<Real> &galpha) {
    std::vector<Real> gscore(alpha.size());
    for (int i = 0; i < ctx.n; ++i) {
      int begin = ctx.RowBegin(i), end = ctx.RowEnd(i);
      Real dot = Real(0);
      for (int k = begin; k < end; ++k)
        dot += alpha[static_cast<std::size_t>(k)] *
               galpha[static_cast<std::size_t>(k)];
      for (int k = begin; k < end; ++k)
        gscore[static_cast<std::size_t>(k)] =
            alpha[static_cast<std::size_t>(k)] *
            (galpha[static_cast<std::size_t>(k)] - dot);
    }
    return gscore;
  }

  // alpha and raw scores for one kGat head.
  std::pair<std::vector<Real>, std::vector<Real>> GatAlpha(
      const GraphContext<Real> &ctx, const MatrixRM<Real> &z, int h) const {
    Eigen::Matrix<Real, Eigen::Dynamic, 1> s_src =
        z * att_src_[static_cast<std::size_t>(h)];
    Eigen::Matrix<Real, Eigen::Dynamic, 1> s_dst =
        z * att_dst_[static_cast<std::size_t>(h)];
    std::vector<Real> scores(ctx.Nnz());
    for (int i = 0; i < ctx.n; ++i)
      for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k)
        scores[static_cast<std::size_t>(k)] = detail::LeakyRelu(
            s_src(i) + s_dst(ctx.cols[static_cast<std::size_t>(k)]), leaky_);
    return {SoftmaxRows(ctx, scores), std::move(scores)};
  }

  // alpha for one kGatV2 head; the score is a . LeakyReLU(z_i + z_j).
  std::pair<std::vector<Real>, std::vector<Real>> GatV2Alpha(
      const GraphContext<Real> &ctx, const MatrixRM<Real> &z, int h) const {
    const auto &a = att_src_[static_cast<std::size_t>(h)];
    std::vector<Real> scores(ctx.Nnz());
    for (int i = 0; i < ctx.n; ++i)
      for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k) {
        int j = ctx.cols[static_cast<std::size_t>(k)];
        Real s = Real(0);
        for (int c = 0; c < head_dim_; ++c)
          s += a(c, 0) * detail::LeakyRelu(z(i, c) + z(j, c), leaky_);
        scores[static_cast<std::size_t>(k)] = s;
      }
    return {SoftmaxRows(ctx, scores), std::move(scores)};
  }

  std::vector<Real> TransformerAlpha(const GraphContext<Real> &ctx,
                                     const MatrixRM<Real> &qx,
                                     const MatrixRM<Real> &kx) const {
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(head_dim_));
    std::vector<Real> scores(ctx.Nnz());
    for (int i = 0; i < ctx.n; ++i)
      for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k)
        scores[static_cast<std::size_t>(k)] =
            scale *
            qx.row(i).dot(kx.row(ctx.cols[static_cast<std::size_t>(k)]));
    return SoftmaxRows(ctx, scores);
  }

  // Weighted aggregation out(i) = sum_k alpha_k values(col_k).
  static MatrixRM<Real> Aggregate(const GraphContext<Real> &ctx,
                                  const std::vector<Real> &alpha,
                                  const MatrixRM<Real> &values) {
    return Propagate(ctx, alpha, values);
  }

  // Places one head's output into the layer output: concatenation on
  // hidden layers, running average on the final layer.
  void CombineHead(MatrixRM<Real> *out, const MatrixRM<Real> &head_out,
                   int h) const {
    if (final_)
      *out += head_out / static_cast<Real>(heads_);
    else
      out->middleCols(static_cast<Eigen::Index>(h) * head_dim_, head_dim_) =
          head_out;
  }

  // The adjoint of CombineHead.
  MatrixRM<Real> SliceHeadGrad(const MatrixRM<Real> &grad_out, int h) const {
    if (final_) return grad_out / static_cast<Real>(heads_);
    return grad_out.middleCols(static_cast<Eigen::Index>(h) * head_dim_,
                               head_dim_);
  }

  // --- kGat -----------------------------------------------------------------

  MatrixRM<Real> ForwardGat(const GraphContext<Real> &ctx,
                            const MatrixRM<Real> &x, bool keep_caches) {
    MatrixRM<Real> out = MatrixRM<Real>::Zero(x.rows(), out_);
    if (keep_caches) {
      x_ = x;
      z_.assign(static_cast<std::size_t>(heads_), MatrixRM<Real>());
      alpha_.assign(static_cast<std::size_t>(heads_), {});
      scores_.assign(static_cast<std::size_t>(heads_), {});
    }
    for (int h = 0; h < heads_; ++h) {
      MatrixRM<Real> z = x * theta_[static_cast<std::size_t>(h)];
      auto [alpha, scores] = GatAlpha(ctx, z, h);
      CombineHead(&out, Aggregate(ctx, alpha, z), h);
      if (keep_caches) {
        z_[static_cast<std::size_t>(h)] = std::move(z);
        alpha_[static_cast<std::size_t>(h)] = std::move(alpha);
        scores_[static_cast<std::size_t>(h)] = std::move(scores);
      }
    }
    return out;
  }

  MatrixRM<Real> BackwardGat(const GraphContext<Real> &ctx,
                             const MatrixRM<Real> &grad_out) {
    MatrixRM<Real> gx = MatrixRM<Real>::Zero(x_.rows(), in_);
    for (int h = 0; h < heads_; ++h) {
      const MatrixRM<Real> &z = z_[static_cast<std::size_t>(h)];
      const std::vector<Real> &alpha = alpha_[static_cast<std::size_t>(h)];
      const std::vector<Real> &scores = scores_[static_cast<std::size_t>(h)];
      MatrixRM<Real> gagg = SliceHeadGrad(grad_out, h);

      // Aggregation: out(i) = sum_k alpha_k z(col_k).
      MatrixRM<Real> gz = PropagateTransposed(ctx, alpha, gagg);
      std::vector<Real> galpha(ctx.Nnz());
      for (int i = 0; i < ctx.n; ++i)
        for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k)
          galpha[static_cast<std::size_t>(k)] =
              gagg.row(i).dot(z.row(ctx.cols[static_cast<std::size_t>(k)]));

      std::vector<Real> gscore = SoftmaxBackward(ctx, alpha, galpha);
      // Score chain: s = LeakyReLU(a_src . z_i + a_dst . z_j).
      Eigen::Matrix<Real, Eigen::Dynamic, 1> gsrc =
          Eigen::Matrix<Real, Eigen::Dynamic, 1>::Zero(ctx.n);
      Eigen::Matrix<Real, Eigen::Dynamic, 1> gdst =
          Eigen::Matrix<Real, Eigen::Dynamic, 1>::Zero(ctx.n);
      // scores_ holds the LeakyReLU output; the slope is positive so
      // the output has the sign of the input, which is all the
      // gradient needs.
      for (int i = 0; i < ctx.n; ++i)
        for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k) {
          Real g = gscore[static_cast<std::size_t>(k)] *
                   detail::LeakyReluGrad(scores[static_cast<std::size_t>(k)],
                                         leaky_);
          gsrc(i) += g;
          gdst(ctx.cols[static_cast<std::size_t>(k)]) += g;
        }
      g_att_src_[static_cast<std::size_t>(h)].noalias() +=
          z.transpose() * gsrc;
      g_att_dst_[static_cast<std::size_t>(h)].noalias() +=
          z.transpose() * gdst;
      gz.noalias() += gsrc * att_src_[static_cast<std::size_t>(h)].transpose();
      gz.noalias() += gdst * att_dst_[static_cast<std::size_t>(h)].transpose();

      g_theta_[static_cast<std::size_t>(h)].noalias() +=
          x_.transpose() * gz;
      gx.noalias() += gz * theta_[static_cast<std::size_t>(h)].transpose();
    }
    return gx;
  }

  // --- kGatV2 -----------------------------------------------------------------

  MatrixRM<Real> ForwardGatV2(const GraphContext<Real> &ctx,
                              const MatrixRM<Real> &x, bool keep_caches) {
    MatrixRM<Real> out = MatrixRM<Real>::Zero(x.rows(), out_);
    if (keep_caches) {
      x_ = x;
      z_.assign(static_cast<std::size_t>(heads_), MatrixRM<Real>());
      alpha_.assign(static_cast<std::size_t>(heads_), {});
    }
    for (int h = 0; h < heads_; ++h) {
      MatrixRM<Real> z = x * theta_[static_cast<std::size_t>(h)];
      auto [alpha, scores] = GatV2Alpha(ctx, z, h);
      (void)scores;
      CombineHead(&out, Aggregate(ctx, alpha, z), h);
      if (keep_caches) {
        z_[static_cast<std::size_t>(h)] = std::move(z);
        alpha_[static_cast<std::size_t>(h)] = std::move(alpha);
      }
    }
    return out;
  }

  MatrixRM<Real> BackwardGatV2(const GraphContext<Real> &ctx,
                               const MatrixRM<Real> &grad_out) {
    MatrixRM<Real> gx = MatrixRM<Real>::Zero(x_.rows(), in_);
    for (int h = 0; h < heads_; ++h) {
      const MatrixRM<Real> &z = z_[static_cast<std::size_t>(h)];
      const std::vector<Real> &alpha = alpha_[static_cast<std::size_t>(h)];
      const auto &a = att_src_[static_cast<std::size_t>(h)];
      MatrixRM<Real> gagg = SliceHeadGrad(grad_out, h);

      MatrixRM<Real> gz = PropagateTransposed(ctx, alpha, gagg);
      std::vector<Real> galpha(ctx.Nnz());
      for (int i = 0; i < ctx.n; ++i)
        for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k)
          galpha[static_cast<std::size_t>(k)] =
              gagg.row(i).dot(z.row(ctx.cols[static_cast<std::size_t>(k)]));
      std::vector<Real> gscore = SoftmaxBackward(ctx, alpha, galpha);

      // Score chain: s = a . LeakyReLU(z_i + z_j), elementwise.
      MatrixRM<Real> ga = MatrixRM<Real>::Zero(head_dim_, 1);
      for (int i = 0; i < ctx.n; ++i)
        for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k) {
          int j = ctx.cols[static_cast<std::size_t>(k)];
          Real gs = gscore[static_cast<std::size_t>(k)];
          for (int c = 0; c < head_dim_; ++c) {
            Real u = z(i, c) + z(j, c);
            ga(c, 0) += gs * detail::LeakyRelu(u, leaky_);
            Real gu = gs * a(c, 0) * detail::LeakyReluGrad(u, leaky_);
            gz(i, c) += gu;
            gz(j, c) += gu;
          }
        }
      g_att_src_[static_cast<std::size_t>(h)] += ga;

      g_theta_[static_cast<std::size_t>(h)].noalias() += x_.transpose() * gz;
      gx.noalias() += gz * theta_[static_cast<std::size_t>(h)].transpose();
    }
    return gx;
  }

  // --- kGraphTransformer -------------------------------------------------------

  MatrixRM<Real> ForwardTransformer(const GraphContext<Real> &ctx,
                                    const MatrixRM<Real> &x,
                                    bool keep_caches) {
    MatrixRM<Real> out = x * skip_w_;
    MatrixRM<Real> heads_out = MatrixRM<Real>::Zero(x.rows(), out_);
    if (keep_caches) {
      x_ = x;
      qx_.assign(static_cast<std::size_t>(heads_), MatrixRM<Real>());
      kx_.assign(static_cast<std::size_t>(heads_), MatrixRM<Real>());
      vx_.assign(static_cast<std::size_t>(heads_), MatrixRM<Real>());
      alpha_.assign(static_cast<std::size_t>(heads_), {});
    }
    for (int h = 0; h < heads_; ++h) {
      MatrixRM<Real> qx = x * tf_q_[static_cast<std::size_t>(h)];
      MatrixRM<Real> kx = x * tf_k_[static_cast<std::size_t>(h)];
      MatrixRM<Real> vx = x * tf_v_[static_cast<std::size_t>(h)];
      std::vector<Real> alpha = TransformerAlpha(ctx, qx, kx);
      CombineHead(&heads_out, Aggregate(ctx, alpha, vx), h);
      if (keep_caches) {
        qx_[static_cast<std::size_t>(h)] = std::move(qx);
        kx_[static_cast<std::size_t>(h)] = std::move(kx);
        vx_[static_cast<std::size_t>(h)] = std::move(vx);
        alpha_[static_cast<std::size_t>(h)] = std::move(alpha);
      }
    }
    return out + heads_out;
  }

  MatrixRM<Real> BackwardTransformer(const GraphContext<Real> &ctx,
                                     const MatrixRM<Real> &grad_out) {
    g_skip_w_.noalias() += x_.transpose() * grad_out;
    MatrixRM<Real> gx = grad_out * skip_w_.transpose();
    const Real scale = Real(1) / std::sqrt(static_cast<Real>(head_dim_));
    for (int h = 0; h < heads_; ++h) {
      const MatrixRM<Real> &qx = qx_[static_cast<std::size_t>(h)];
      const MatrixRM<Real> &kx = kx_[static_cast<std::size_t>(h)];
      const MatrixRM<Real> &vx = vx_[static_cast<std::size_t>(h)];
      const std::vector<Real> &alpha = alpha_[static_cast<std::size_t>(h)];
      MatrixRM<Real> gagg = SliceHeadGrad(grad_out, h);

      MatrixRM<Real> gv = PropagateTransposed(ctx, alpha, gagg);
      std::vector<Real> galpha(ctx.Nnz());
      for (int i = 0; i < ctx.n; ++i)
        for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k)
          galpha[static_cast<std::size_t>(k)] =
              gagg.row(i).dot(vx.row(ctx.cols[static_cast<std::size_t>(k)]));
      std::vector<Real> gscore = SoftmaxBackward(ctx, alpha, galpha);

      MatrixRM<Real> gq = MatrixRM<Real>::Zero(ctx.n, head_dim_);
      MatrixRM<Real> gk = MatrixRM<Real>::Zero(ctx.n, head_dim_);
      for (int i = 0; i < ctx.n; ++i)
        for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k) {
          int j = ctx.cols[static_cast<std::size_t>(k)];
          Real gs = gscore[static_cast<std::size_t>(k)] * scale;
          gq.row(i).noalias() += gs * kx.row(j);
          gk.row(j).noalias() += gs * qx.row(i);
        }

      g_tf_q_[static_cast<std::size_t>(h)].noalias() += x_.transpose() * gq;
      g_tf_k_[static_cast<std::size_t>(h)].noalias() += x_.transpose() * gk;
      g_tf_v_[static_cast<std::size_t>(h)].noalias() += x_.transpose() * gv;
      gx.noalias() += gq * tf_q_[static_cast<std::size_t>(h)].transpose();
      gx.noalias() += gk * tf_k_[static_cast<std::size_t>(h)].transpose();
      gx.noalias() += gv * tf_v_[static_cast<std::size_t>(h)].transpose();
    }
    return gx;
  }

  GnnVariant variant_;
  GnnActivation act_;
  int in_, out_, heads_, head_dim_ = 0, hops_;
  bool final_;
  Real leaky_;

  std::vector<MatrixRM<Real>> conv_w_, g_conv_w_;
  std::vector<MatrixRM<Real>> theta_, g_theta_;
  std::vector<MatrixRM<Real>> att_src_, g_att_src_;  // kGatV2: the shared a
  std::vector<MatrixRM<Real>> att_dst_, g_att_dst_;
  MatrixRM<Real> skip_w_, g_skip_w_;
  std::vector<MatrixRM<Real>> tf_q_, tf_k_, tf_v_, g_tf_q_, g_tf_k_, g_tf_v_;

  // Forward caches for the backward pass.
  MatrixRM<Real> x_, pre_, concat_;
  std::vector<MatrixRM<Real>> powers_, z_, qx_, kx_, vx_;
  std::vector<std::vector<Real>> alpha_, scores_;
};

// Mean cross entropy over the masked nodes, log-sum-exp stabilized.
// If `grad_logits` is non-null it receives d(loss)/d(logits), zero on
// unmasked rows.
template <typename Real>
Real MaskedCrossEntropy(const MatrixRM<Real> &logits,
                        const std::vector<int> &labels,
                        const std::vector<int> &mask,
                        MatrixRM<Real> *grad_logits = nullptr) {
  const Eigen::Index n = logits.rows(), c = logits.cols();
  if (labels.size() != static_cast<std::size_t>(n))
    throw DataError("label count does not match logit rows");
  if (mask.empty()) throw DataError("loss mask is empty");
  if (grad_logits) *grad_logits = MatrixRM<Real>::Zero(n, c);
  Real loss = Real(0);
  const Real inv_m = Real(1) / static_cast<Real>(mask.size());
  for (int i : mask) {
    if (i < 0 || i >= n) throw DataError("mask index out of range");
    int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= c)
      throw DataError("label out of range on node " + std::to_string(i));
    Real max_logit = logits.row(i).maxCoeff();
    Real total = Real(0);
    for (Eigen::Index k = 0; k < c; ++k)
      total += std::exp(logits(i, k) - max_logit);
    Real log_total = std::log(total) + max_logit;
    loss += (log_total - logits(i, label)) * inv_m;
    if (grad_logits) {
      for (Eigen::Index k = 0; k < c; ++k)
        (*grad_logits)(i, k) =
            std::exp(logits(i, k) - log_total) * inv_m;
      (*grad_logits)(i, label) -= inv_m;
    }
  }
  return loss;
}

// The full classifier: graph layers with batch norm, the linear
// g-vector head, and the linear classifier.
template <typename Real>
class GnnModel {
 public:
  explicit GnnModel(const GnnConfig &config) : config_(config) {
    config_.Validate();
    std::mt19937_64 rng(config_.seed);
    for (int l = 0; l < config_.depth; ++l) {
      int in = l == 0 ? config_.in_dim : config_.hidden_dim;
      layers_.emplace_back(config_, in, config_.hidden_dim,
                           l == config_.depth - 1, &rng);
      norms_.emplace_back(config_.hidden_dim,
                          static_cast<Real>(config_.bn_momentum),
                          static_cast<Real>(config_.bn_eps));
    }
    head_ = std::make_unique<Linear<Real>>(config_.hidden_dim,
                                           config_.gvec_dim, &rng);
    classifier_ = std::make_unique<Linear<Real>>(config_.gvec_dim,
                                                 config_.n_classes, &rng);
  }

  GnnModel(const GnnModel &) = delete;
  GnnModel &operator=(const GnnModel &) = delete;
  GnnModel(GnnModel &&) = default;
  GnnModel &operator=(GnnModel &&) = default;

  struct ForwardResult {
    MatrixRM<Real> gvectors;  // n x gvec_dim
    MatrixRM<Real> logits;    // n x n_classes
  };

  // `training` selects batch-norm mode; caches for Backward are kept
  // only when requested.
  ForwardResult Run(const GraphContext<Real> &ctx, const MatrixRM<Real> &x,
                    bool training, bool keep_caches = false) {
    CheckInput(ctx, x);
    MatrixRM<Real> h = x;
    for (int l = 0; l < config_.depth; ++l) {
      h = layers_[static_cast<std::size_t>(l)].Forward(ctx, h, keep_caches);
      h = norms_[static_cast<std::size_t>(l)].Forward(h, training,
                                                      keep_caches);
    }
    ForwardResult result;
    result.gvectors = head_->Forward(h, keep_caches);
    result.logits = classifier_->Forward(result.gvectors, keep_caches);
    return result;
  }

  // Training loss and parameter gradients in one sweep.  Gradients
  // accumulate on top of whatever the grad buffers hold.
  Real LossAndGradients(const GraphContext<Real> &ctx, const MatrixRM<Real> &x,
                        const std::vector<int> &labels,
                        const std::vector<int> &mask) {
    ForwardResult fwd = Run(ctx, x, /*training=*/true, /*keep_caches=*/true);
    MatrixRM<Real> grad;
    Real loss = MaskedCrossEntropy(fwd.logits, labels, mask, &grad);
    grad = classifier_->Backward(grad);
    grad = head_->Backward(grad);
    for (int l = config_.depth - 1; l >= 0; --l) {
      grad = norms_[static_cast<std::size_t>(l)].Backward(grad);
      grad = layers_[static_cast<std::size_t>(l)].Backward(ctx, grad);
    }
    return loss;
  }

  void VisitParams(const ParamVisitor<Real> &visit) {
    for (int l = 0; l < config_.depth; ++l) {
      layers_[static_cast<std::size_t>(l)].VisitParams(
          "layer" + std::to_string(l), visit);
      norms_[static_cast<std::size_t>(l)].VisitParams(
          "bn" + std::to_string(l), visit);
    }
    head_->VisitParams("head", visit);
    classifier_->VisitParams("classifier", visit);
  }

  void VisitBuffers(const BufferVisitor<Real> &visit) {
    for (int l = 0; l < config_.depth; ++l)
      norms_[static_cast<std::size_t>(l)].VisitBuffers(
          "bn" + std::to_string(l), visit);
  }

  void ZeroGrads() {
    VisitParams([](const std::string &, MatrixRM<Real> *, MatrixRM<Real> *g) {
      g->setZero();
    });
  }

  // Attention coefficients of one layer at the given input, per head,
  // aligned with the context CSR.  ConfigError on non-attention
  // variants.
  std::vector<std::vector<Real>> AttentionCoefficients(
      const GraphContext<Real> &ctx, const MatrixRM<Real> &x, int layer) {
    CheckInput(ctx, x);
    if (layer < 0 || layer >= config_.depth)
      throw ConfigError("layer index out of range");
    MatrixRM<Real> h = x;
    for (int l = 0; l < layer; ++l) {
      h = layers_[static_cast<std::size_t>(l)].Forward(ctx, h, false);
      h = norms_[static_cast<std::size_t>(l)].Forward(h, false, false);
    }
    return layers_[static_cast<std::size_t>(layer)].Attention(ctx, h);
  }

  const GnnConfig &Config() const { return config_; }

 private:
  void CheckInput(const GraphContext<Real> &ctx,
                  const MatrixRM<Real> &x) const {
    if (static_cast<int>(x.rows()) != ctx.n)
      throw DataError("feature rows (" + std::to_string(x.rows()) +
                      ") do not match graph nodes (" + std::to_string(ctx.n) +
                      ")");
    if (static_cast<int>(x.cols()) != config_.in_dim)
      throw DataError("feature dim " + std::to_string(x.cols()) +
                      " does not match model input dim " +
                      std::to_string(config_.in_dim));
  }

  GnnConfig config_;
  std::vector<GnnLayer<Real>> layers_;
  std::vector<BatchNorm<Real>> norms_;
  std::unique_ptr<Linear<Real>> head_;
  std::unique_ptr<Linear<Real>> classifier_;
};

// Adam with additive L2 weight decay: the update sees
// grad + weight_decay * param.  State slots follow parameter
// visitation order.
template <typename Real>
class AdamOptimizer {
 public:
  AdamOptimizer(Real learning_rate, Real weight_decay)
      : lr_(learning_rate), wd_(weight_decay) {}

  void Step(GnnModel<Real> *model) {
    ++t_;
    const Real bc1 = Real(1) - std::pow(beta1_, static_cast<Real>(t_));
    const Real bc2 = Real(1) - std::pow(beta2_, static_cast<Real>(t_));
    std::size_t index = 0;
    model->VisitParams([&](const std::string &, MatrixRM<Real> *param,
                           MatrixRM<Real> *grad) {
      if (index >= slots_.size())
        slots_.push_back({MatrixRM<Real>::Zero(param->rows(), param->cols()),
                          MatrixRM<Real>::Zero(param->rows(), param->cols())});
      Slot &slot = slots_[index++];
      MatrixRM<Real> g = *grad + wd_ * *param;
      slot.m = beta1_ * slot.m + (Real(1) - beta1_) * g;
      slot.v = beta2_ * slot.v +
               (Real(1) - beta2_) * g.cwiseProduct(g);
      param->array() -= lr_ * (slot.m.array() / bc1) /
                        ((slot.v.array() / bc2).sqrt() + eps_);
    });
  }

 private:
  struct Slot {
    MatrixRM<Real> m, v;
  };
  Real lr_, wd_;
  Real beta1_ = Real(0.9), beta2_ = Real(0.999), eps_ = Real(1e-8);
  std::int64_t t_ = 0;
  std::vector<Slot> slots_;
};

// Full-batch training.  labels[i] is the class of node i or -1 when
// unlabeled; mask lists the labeled development nodes.  Returns the
// pre-update loss of every epoch.  NumericError if the loss stops
// being finite.
template <typename Real>
std::vector<double> TrainGnn(GnnModel<Real> *model,
                             const GraphContext<Real> &ctx,
                             const MatrixRM<Real> &x,
                             const std::vector<int> &labels,
                             const std::vector<int> &mask) {
  const GnnConfig &cfg = model->Config();
  AdamOptimizer<Real> adam(static_cast<Real>(cfg.learning_rate),
                           static_cast<Real>(cfg.weight_decay));
  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    model->ZeroGrads();
    Real loss = model->LossAndGradients(ctx, x, labels, mask);
    if (!std::isfinite(static_cast<double>(loss)))
      throw NumericError("training diverged at epoch " +
                         std::to_string(epoch));
    history.push_back(static_cast<double>(loss));
    adam.Step(model);
  }
  return history;
}

// Checkpoint container "GNNM": the configuration block followed by
// float32 parameter and batch-norm buffer payloads in visitation
// order.
void SaveGnnModel(const std::string &path, GnnModel<float> *model);
GnnModel<float> LoadGnnModel(const std::string &path);

// Runs the model in evaluation mode and returns the g-vector rows
// under the node ids of `nodes`; labels are carried over.
EmbeddingSet ExtractGvectors(GnnModel<float> *model,
                             const GraphContext<float> &ctx,
                             const EmbeddingSet &nodes);

}  // namespace gvec

#endif  // GVEC_GNN_H_
