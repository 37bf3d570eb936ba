// test_gnn.cc

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

#include "gvec/gnn.h"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tests/test_util.h"

namespace {

using gvec::Graph;
using gvec::GraphContext;
using gvec::GnnConfig;
using gvec::GnnLayer;
using gvec::GnnModel;
using gvec::GnnVariant;
using Md = gvec::MatrixRM<double>;
using Mf = gvec::MatrixRM<float>;

Graph RandomGraph(int n, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Graph g;
  g.num_nodes = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < p) g.edges.push_back({i, j});
  g.Validate();
  return g;
}

Md RandomMatrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Md m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

// Dense D^{-1/2} (A + I) D^{-1/2} with closed-neighborhood degrees:
// the reference the CSR propagation must match.
Md DenseNormAdjacency(const Graph &g) {
  Md a = Md::Zero(g.num_nodes, g.num_nodes);
  for (const auto &e : g.edges) {
    a(e.first, e.second) = 1.0;
    a(e.second, e.first) = 1.0;
  }
  for (int i = 0; i < g.num_nodes; ++i) a(i, i) = 1.0;
  Eigen::VectorXd deg = a.rowwise().sum();
  Md out(g.num_nodes, g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < g.num_nodes; ++j)
      out(i, j) = a(i, j) / std::sqrt(deg(i) * deg(j));
  return out;
}

Md DenseMeanAdjacency(const Graph &g) {
  Md a = Md::Zero(g.num_nodes, g.num_nodes);
  for (const auto &e : g.edges) {
    a(e.first, e.second) = 1.0;
    a(e.second, e.first) = 1.0;
  }
  for (int i = 0; i < g.num_nodes; ++i) a(i, i) = 1.0;
  Eigen::VectorXd deg = a.rowwise().sum();
  for (int i = 0; i < g.num_nodes; ++i) a.row(i) /= deg(i);
  return a;
}

std::map<std::string, Md *> CollectParams(GnnLayer<double> *layer) {
  std::map<std::string, Md *> params;
  layer->VisitParams("L", [&](const std::string &name, Md *p, Md *) {
    params[name] = p;
  });
  return params;
}

// Training-mode loss as a pure function of the parameters, for finite
// differences.
double EvalLoss(GnnModel<double> *model, const GraphContext<double> &ctx,
                const Md &x, const std::vector<int> &labels,
                const std::vector<int> &mask) {
  auto fwd = model->Run(ctx, x, /*training=*/true);
  return gvec::MaskedCrossEntropy<double>(fwd.logits, labels, mask);
}

// Central-difference check of every parameter gradient.
void GradCheck(GnnConfig cfg) {
  Graph g = RandomGraph(12, 0.35, 99);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(12, cfg.in_dim, 7);
  std::vector<int> labels(12), mask;
  for (int i = 0; i < 12; ++i) labels[i] = i % cfg.n_classes;
  for (int i = 0; i < 10; ++i) mask.push_back(i);

  GnnModel<double> model(cfg);
  model.ZeroGrads();
  model.LossAndGradients(ctx, x, labels, mask);

  struct Entry {
    std::string name;
    Md *param;
    Md grad;
  };
  std::vector<Entry> entries;
  model.VisitParams([&](const std::string &name, Md *p, Md *grad) {
    entries.push_back({name, p, *grad});
  });
  REQUIRE(!entries.empty());

  const double h = 1e-5;
  int failures = 0;
  for (auto &entry : entries) {
    for (int r = 0; r < entry.param->rows(); ++r)
      for (int c = 0; c < entry.param->cols(); ++c) {
        double orig = (*entry.param)(r, c);
        (*entry.param)(r, c) = orig + h;
        double lp = EvalLoss(&model, ctx, x, labels, mask);
        (*entry.param)(r, c) = orig - h;
        double lm = EvalLoss(&model, ctx, x, labels, mask);
        (*entry.param)(r, c) = orig;
        double fd = (lp - lm) / (2.0 * h);
        double analytic = entry.grad(r, c);
        double err = std::abs(fd - analytic);
        double tol = 1e-6 + 1e-4 * std::max(std::abs(fd), std::abs(analytic));
        if (err > tol) {
          ++failures;
          MESSAGE("gradient mismatch at " << entry.name << "(" << r << ","
                                          << c << "): analytic " << analytic
                                          << " vs finite difference " << fd);
        }
      }
  }
  CHECK(failures == 0);
}

GnnConfig SmallConfig(GnnVariant variant) {
  GnnConfig cfg;
  cfg.variant = variant;
  cfg.depth = 2;
  cfg.in_dim = 5;
  cfg.hidden_dim = 8;
  cfg.gvec_dim = 6;
  cfg.n_classes = 3;
  cfg.heads = 2;
  cfg.hops = 3;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("closed-neighborhood context of a single edge is all one half") {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  auto ctx = GraphContext<double>::FromGraph(g);
  REQUIRE(ctx.offsets == std::vector<int>{0, 2, 4});
  REQUIRE(ctx.cols == std::vector<int>{0, 1, 0, 1});
  for (double w : ctx.sym_weights) CHECK(w == 0.5);
  for (double w : ctx.mean_weights) CHECK(w == 0.5);
}

TEST_CASE("isolated nodes keep a unit self-loop") {
  Graph g;
  g.num_nodes = 3;
  g.edges = {{0, 1}};
  auto ctx = GraphContext<double>::FromGraph(g);
  REQUIRE(ctx.offsets == std::vector<int>{0, 2, 4, 5});
  CHECK(ctx.cols[4] == 2);
  CHECK(ctx.sym_weights[4] == 1.0);
  CHECK(ctx.mean_weights[4] == 1.0);
}

TEST_CASE("propagation matches the dense normalized adjacency") {
  Graph g = RandomGraph(9, 0.4, 3);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(9, 4, 4);
  Md dense = DenseNormAdjacency(g);
  Md got = gvec::Propagate(ctx, ctx.sym_weights, x);
  CHECK((got - dense * x).cwiseAbs().maxCoeff() < 1e-13);
  Md mean_got = gvec::Propagate(ctx, ctx.mean_weights, x);
  CHECK((mean_got - DenseMeanAdjacency(g) * x).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("transposed propagation is the adjoint of propagation") {
  Graph g = RandomGraph(8, 0.4, 5);
  auto ctx = GraphContext<double>::FromGraph(g);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(ctx.Nnz());
  for (auto &v : w) v = normal(rng);
  Md x = RandomMatrix(8, 3, 7);
  Md y = RandomMatrix(8, 3, 8);
  double lhs = (gvec::Propagate(ctx, w, x).array() * y.array()).sum();
  double rhs =
      (x.array() * gvec::PropagateTransposed(ctx, w, y).array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("graph convolution layer matches the dense formula") {
  Graph g = RandomGraph(10, 0.35, 21);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(10, 4, 22);
  GnnConfig cfg = SmallConfig(GnnVariant::kGcn);
  cfg.activation = gvec::GnnActivation::kIdentity;
  std::mt19937_64 rng(23);
  GnnLayer<double> layer(cfg, 4, 6, /*final_layer=*/false, &rng);
  auto params = CollectParams(&layer);
  REQUIRE(params.count("L/theta") == 1);
  Md expected = DenseNormAdjacency(g) * x * *params["L/theta"];
  Md got = layer.Forward(ctx, x, false);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("polynomial filter layer sums powers of the adjacency") {
  Graph g = RandomGraph(10, 0.35, 31);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(10, 4, 32);
  GnnConfig cfg = SmallConfig(GnnVariant::kTagcn);
  cfg.activation = gvec::GnnActivation::kIdentity;
  cfg.hops = 3;
  std::mt19937_64 rng(33);
  GnnLayer<double> layer(cfg, 4, 6, /*final_layer=*/false, &rng);
  auto params = CollectParams(&layer);
  REQUIRE(params.size() == 3);
  Md n1 = DenseNormAdjacency(g);
  Md expected = n1 * x * *params["L/theta1"] +
                n1 * n1 * x * *params["L/theta2"] +
                n1 * n1 * n1 * x * *params["L/theta3"];
  Md got = layer.Forward(ctx, x, false);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("polynomial filter with one hop equals graph convolution") {
  GnnConfig gcn_cfg = SmallConfig(GnnVariant::kGcn);
  GnnConfig tag_cfg = SmallConfig(GnnVariant::kTagcn);
  tag_cfg.hops = 1;
  Graph g = RandomGraph(11, 0.3, 41);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(11, gcn_cfg.in_dim, 42);
  GnnModel<double> gcn(gcn_cfg);
  GnnModel<double> tag(tag_cfg);
  auto out_gcn = gcn.Run(ctx, x, /*training=*/true);
  auto out_tag = tag.Run(ctx, x, /*training=*/true);
  // Same seed and the same parameter draw sequence: bitwise equal.
  CHECK(out_gcn.logits == out_tag.logits);
  CHECK(out_gcn.gvectors == out_tag.gvectors);
}

TEST_CASE("mean-aggregation layer matches the dense formula") {
  Graph g = RandomGraph(10, 0.35, 51);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(10, 4, 52);
  GnnConfig cfg = SmallConfig(GnnVariant::kSageMean);
  cfg.activation = gvec::GnnActivation::kIdentity;
  std::mt19937_64 rng(53);
  GnnLayer<double> layer(cfg, 4, 6, /*final_layer=*/false, &rng);
  auto params = CollectParams(&layer);
  const Md &w = *params["L/weight"];
  REQUIRE(w.rows() == 8);
  Md concat(10, 8);
  concat.leftCols(4) = x;
  concat.rightCols(4) = DenseMeanAdjacency(g) * x;
  Md got = layer.Forward(ctx, x, false);
  CHECK((got - concat * w).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("attention layer on two nodes matches scalar arithmetic") {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  auto ctx = GraphContext<double>::FromGraph(g);
  GnnConfig cfg = SmallConfig(GnnVariant::kGat);
  cfg.heads = 1;
  cfg.leaky_slope = 0.2;
  std::mt19937_64 rng(61);
  GnnLayer<double> layer(cfg, 2, 2, /*final_layer=*/true, &rng);
  auto params = CollectParams(&layer);
  *params["L/head0/theta"] = Md::Identity(2, 2);
  *params["L/head0/att_src"] = (Md(2, 1) << 0.3, -0.2).finished();
  *params["L/head0/att_dst"] = (Md(2, 1) << 0.1, 0.4).finished();
  Md x(2, 2);
  x << 1.0, 2.0, -1.0, 0.5;

  auto lrelu = [](double v) { return v > 0 ? v : 0.2 * v; };
  double s_src0 = 1.0 * 0.3 + 2.0 * -0.2;   // -0.1
  double s_src1 = -1.0 * 0.3 + 0.5 * -0.2;  // -0.4
  double s_dst0 = 1.0 * 0.1 + 2.0 * 0.4;    // 0.9
  double s_dst1 = -1.0 * 0.1 + 0.5 * 0.4;   // 0.1
  double e00 = std::exp(lrelu(s_src0 + s_dst0));
  double e01 = std::exp(lrelu(s_src0 + s_dst1));
  double e10 = std::exp(lrelu(s_src1 + s_dst0));
  double e11 = std::exp(lrelu(s_src1 + s_dst1));
  Md expected(2, 2);
  expected.row(0) =
      (e00 * x.row(0) + e01 * x.row(1)) / (e00 + e01);
  expected.row(1) =
      (e10 * x.row(0) + e11 * x.row(1)) / (e10 + e11);

  Md got = layer.Forward(ctx, x, false);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-14);

  auto alphas = layer.Attention(ctx, x);
  REQUIRE(alphas.size() == 1);
  REQUIRE(alphas[0].size() == 4);
  CHECK(alphas[0][0] == doctest::Approx(e00 / (e00 + e01)).epsilon(1e-14));
  CHECK(alphas[0][3] == doctest::Approx(e11 / (e10 + e11)).epsilon(1e-14));
}

TEST_CASE("zeroed attention parameters reduce every variant to the mean") {
  Graph g = RandomGraph(9, 0.4, 71);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(9, 4, 72);
  Md mean = DenseMeanAdjacency(g);

  SUBCASE("additive attention") {
    GnnConfig cfg = SmallConfig(GnnVariant::kGat);
    std::mt19937_64 rng(73);
    GnnLayer<double> layer(cfg, 4, 8, /*final_layer=*/false, &rng);
    auto params = CollectParams(&layer);
    for (auto &kv : params)
      if (kv.first.find("att") != std::string::npos) kv.second->setZero();
    Md expected(9, 8);
    expected.leftCols(4) = mean * x * *params["L/head0/theta"];
    expected.rightCols(4) = mean * x * *params["L/head1/theta"];
    CHECK((layer.Forward(ctx, x, false) - expected).cwiseAbs().maxCoeff() <
          1e-13);
    auto alphas = layer.Attention(ctx, x);
    for (std::size_t k = 0; k < ctx.Nnz(); ++k)
      CHECK(alphas[0][k] == doctest::Approx(ctx.mean_weights[k]).epsilon(1e-14));
  }

  SUBCASE("two-layer additive attention") {
    GnnConfig cfg = SmallConfig(GnnVariant::kGatV2);
    std::mt19937_64 rng(74);
    GnnLayer<double> layer(cfg, 4, 8, /*final_layer=*/false, &rng);
    auto params = CollectParams(&layer);
    for (auto &kv : params)
      if (kv.first.find("att") != std::string::npos) kv.second->setZero();
    Md expected(9, 8);
    expected.leftCols(4) = mean * x * *params["L/head0/theta"];
    expected.rightCols(4) = mean * x * *params["L/head1/theta"];
    CHECK((layer.Forward(ctx, x, false) - expected).cwiseAbs().maxCoeff() <
          1e-13);
  }

  SUBCASE("dot-product attention") {
    GnnConfig cfg = SmallConfig(GnnVariant::kGraphTransformer);
    std::mt19937_64 rng(75);
    GnnLayer<double> layer(cfg, 4, 8, /*final_layer=*/false, &rng);
    auto params = CollectParams(&layer);
    for (auto &kv : params)
      if (kv.first.find("query") != std::string::npos) kv.second->setZero();
    Md expected = x * *params["L/skip"];
    expected.leftCols(4) += mean * x * *params["L/head0/value"];
    expected.rightCols(4) += mean * x * *params["L/head1/value"];
    CHECK((layer.Forward(ctx, x, false) - expected).cwiseAbs().maxCoeff() <
          1e-13);
  }
}

TEST_CASE("final attention layer averages heads instead of concatenating") {
  Graph g = RandomGraph(9, 0.4, 81);
  auto ctx = GraphContext<double>::FromGraph(g);
  Md x = RandomMatrix(9, 4, 82);
  GnnConfig cfg = SmallConfig(GnnVariant::kGat);
  std::mt19937_64 rng(83);
  GnnLayer<double> layer(cfg, 4, 8, /*final_layer=*/true, &rng);
  auto params = CollectParams(&layer);
  for (auto &kv : params)
    if (kv.first.find("att") != std::string::npos) kv.second->setZero();
  Md mean = DenseMeanAdjacency(g);
  Md expected = 0.5 * (mean * x * *params["L/head0/theta"] +
                       mean * x * *params["L/head1/theta"]);
  CHECK(expected.cols() == 8);  // head dim equals layer output dim
  CHECK((layer.Forward(ctx, x, false) - expected).cwiseAbs().maxCoeff() <
        1e-13);
}

TEST_CASE("batch normalization matches explicit statistics") {
  gvec::BatchNorm<double> bn(3, 0.1, 1e-5);
  Md x = RandomMatrix(6, 3, 91);

  Md mean = x.colwise().mean();
  Md centered = x.rowwise() - mean.row(0);
  Md var_biased = centered.array().square().colwise().mean();
  Md expected =
      (centered.array().rowwise() /
       (var_biased.array() + 1e-5).sqrt().row(0))
          .matrix();
  Md got = bn.Forward(x, /*training=*/true, /*keep_caches=*/false);
  CHECK((got - expected).cwiseAbs().maxCoeff() < 1e-12);

  // Running statistics use the unbiased variance and momentum 0.1.
  Md var_unbiased = var_biased * (6.0 / 5.0);
  Md expect_rm = 0.1 * mean;
  Md expect_rv = 0.9 * Md::Ones(1, 3) + 0.1 * var_unbiased;
  std::map<std::string, Md *> buffers;
  bn.VisitBuffers("bn", [&](const std::string &name, Md *b) {
    buffers[name] = b;
  });
  CHECK((*buffers["bn/running_mean"] - expect_rm).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK((*buffers["bn/running_var"] - expect_rv).cwiseAbs().maxCoeff() <
        1e-12);

  // Evaluation normalizes with the running statistics.
  Md eval_expected =
      ((x.rowwise() - expect_rm.row(0)).array().rowwise() /
       (expect_rv.array() + 1e-5).sqrt().row(0))
          .matrix();
  Md eval_got = bn.Forward(x, /*training=*/false, /*keep_caches=*/false);
  CHECK((eval_got - eval_expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("batch normalization of a single row keeps finite running variance") {
  gvec::BatchNorm<double> bn(2, 0.1, 1e-5);
  Md x(1, 2);
  x << 3.0, -1.0;
  Md got = bn.Forward(x, /*training=*/true, /*keep_caches=*/false);
  CHECK(std::abs(got(0, 0)) < 1e-9);  // zero after centering
  std::map<std::string, Md *> buffers;
  bn.VisitBuffers("bn", [&](const std::string &name, Md *b) {
    buffers[name] = b;
  });
  CHECK((*buffers["bn/running_var"])(0, 0) == doctest::Approx(0.9));
  CHECK((*buffers["bn/running_mean"])(0, 0) == doctest::Approx(0.3));
}

TEST_CASE("masked cross entropy matches scalar arithmetic") {
  Md logits(2, 3);
  logits << 1.0, 2.0, 3.0, 0.0, 0.0, 0.0;
  std::vector<int> labels = {2, 1};

  SUBCASE("single masked node") {
    Md grad;
    double loss = gvec::MaskedCrossEntropy<double>(logits, labels, {0}, &grad);
    double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(loss == doctest::Approx(std::log(z) - 3.0).epsilon(1e-14));
    CHECK(grad(0, 0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
    CHECK(grad(0, 2) ==
          doctest::Approx(std::exp(3.0) / z - 1.0).epsilon(1e-12));
    CHECK(grad.row(1).cwiseAbs().maxCoeff() == 0.0);  // unmasked row
  }

  SUBCASE("uniform logits give log of the class count") {
    double loss = gvec::MaskedCrossEntropy<double>(logits, labels, {1});
    CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  }

  SUBCASE("mean over the mask") {
    Md grad;
    double loss =
        gvec::MaskedCrossEntropy<double>(logits, labels, {0, 1}, &grad);
    double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    double expected = 0.5 * (std::log(z) - 3.0) + 0.5 * std::log(3.0);
    CHECK(loss == doctest::Approx(expected).epsilon(1e-14));
    CHECK(grad(1, 1) == doctest::Approx(0.5 * (1.0 / 3.0 - 1.0)));
  }

  SUBCASE("input validation") {
    CHECK_THROWS_AS(gvec::MaskedCrossEntropy<double>(logits, labels, {}),
                    gvec::DataError);
    CHECK_THROWS_AS(gvec::MaskedCrossEntropy<double>(logits, labels, {5}),
                    gvec::DataError);
    CHECK_THROWS_AS(
        gvec::MaskedCrossEntropy<double>(logits, {2}, {0}),
        gvec::DataError);
    std::vector<int> bad_labels = {3, 1};
    CHECK_THROWS_AS(
        gvec::MaskedCrossEntropy<double>(logits, bad_labels, {0}),
        gvec::DataError);
  }
}

TEST_CASE("analytic gradients match central differences") {
  SUBCASE("graph convolution") { GradCheck(SmallConfig(GnnVariant::kGcn)); }
  SUBCASE("graph convolution, identity activation") {
    GnnConfig cfg = SmallConfig(GnnVariant::kGcn);
    cfg.activation = gvec::GnnActivation::kIdentity;
    GradCheck(cfg);
  }
  SUBCASE("additive attention") { GradCheck(SmallConfig(GnnVariant::kGat)); }
  SUBCASE("two-layer additive attention") {
    GradCheck(SmallConfig(GnnVariant::kGatV2));
  }
  SUBCASE("mean aggregation") {
    GradCheck(SmallConfig(GnnVariant::kSageMean));
  }
  SUBCASE("dot-product attention") {
    GradCheck(SmallConfig(GnnVariant::kGraphTransformer));
  }
  SUBCASE("polynomial filter") { GradCheck(SmallConfig(GnnVariant::kTagcn)); }
}

TEST_CASE("forward pass commutes with node permutations") {
  const int n = 10;
  Graph g = RandomGraph(n, 0.35, 101);
  std::vector<int> perm = {7, 2, 9, 0, 4, 8, 1, 6, 3, 5};
  Graph pg;
  pg.num_nodes = n;
  for (const auto &e : g.edges) {
    int a = perm[static_cast<std::size_t>(e.first)];
    int b = perm[static_cast<std::size_t>(e.second)];
    pg.edges.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(pg.edges.begin(), pg.edges.end());

  for (GnnVariant variant :
       {GnnVariant::kGcn, GnnVariant::kGat, GnnVariant::kGatV2,
        GnnVariant::kSageMean, GnnVariant::kGraphTransformer,
        GnnVariant::kTagcn}) {
    CAPTURE(gvec::VariantName(variant));
    GnnConfig cfg = SmallConfig(variant);
    Md x = RandomMatrix(n, cfg.in_dim, 102);
    Md px(n, cfg.in_dim);
    for (int i = 0; i < n; ++i)
      px.row(perm[static_cast<std::size_t>(i)]) = x.row(i);

    GnnModel<double> model(cfg);
    GnnModel<double> model2(cfg);  // same seed, same parameters
    auto ctx = GraphContext<double>::FromGraph(g);
    auto pctx = GraphContext<double>::FromGraph(pg);
    auto out = model.Run(ctx, x, /*training=*/true);
    auto pout = model2.Run(pctx, px, /*training=*/true);
    for (int i = 0; i < n; ++i) {
      int pi = perm[static_cast<std::size_t>(i)];
      CHECK((out.gvectors.row(i) - pout.gvectors.row(pi))
                .cwiseAbs()
                .maxCoeff() < 1e-10);
      CHECK((out.logits.row(i) - pout.logits.row(pi)).cwiseAbs().maxCoeff() <
            1e-10);
    }
  }
}

TEST_CASE("same seed gives identical parameters, different seed does not") {
  GnnConfig cfg = SmallConfig(GnnVariant::kGat);
  GnnModel<double> a(cfg);
  GnnModel<double> b(cfg);
  cfg.seed = 12;
  GnnModel<double> c(cfg);
  std::vector<Md> pa, pb, pc;
  a.VisitParams([&](const std::string &, Md *p, Md *) { pa.push_back(*p); });
  b.VisitParams([&](const std::string &, Md *p, Md *) { pb.push_back(*p); });
  c.VisitParams([&](const std::string &, Md *p, Md *) { pc.push_back(*p); });
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i] != pb[i]) all_equal = false;
    if (pa[i] != pc[i]) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

namespace {

// Three well-separated clusters of ten nodes each, fully connected
// inside a cluster plus two cross edges.
struct ClusterProblem {
  Graph graph;
  Mf x;
  std::vector<int> labels;
  std::vector<int> mask;
  std::vector<int> held_out;
};

ClusterProblem MakeClusters() {
  ClusterProblem p;
  const int per = 10, k = 3, n = per * k;
  p.graph.num_nodes = n;
  for (int c = 0; c < k; ++c)
    for (int i = c * per; i < (c + 1) * per; ++i)
      for (int j = i + 1; j < (c + 1) * per; ++j)
        p.graph.edges.push_back({i, j});
  p.graph.edges.push_back({0, 10});
  p.graph.edges.push_back({10, 20});
  std::sort(p.graph.edges.begin(), p.graph.edges.end());
  p.graph.Validate();

  std::mt19937_64 rng(111);
  std::normal_distribution<double> noise(0.0, 0.3);
  p.x = Mf::Zero(n, 5);
  p.labels.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int c = i / per;
    p.labels[static_cast<std::size_t>(i)] = c;
    for (int d = 0; d < 5; ++d)
      p.x(i, d) = static_cast<float>((d == c ? 3.0 : 0.0) + noise(rng));
    if (i % per < 7)
      p.mask.push_back(i);
    else
      p.held_out.push_back(i);
  }
  return p;
}

GnnConfig ClusterConfig(GnnVariant variant) {
  GnnConfig cfg = SmallConfig(variant);
  cfg.epochs = 60;
  cfg.learning_rate = 1e-2;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("training reduces the loss and classifies held-out nodes") {
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnConfig cfg = ClusterConfig(GnnVariant::kGcn);
  GnnModel<float> model(cfg);
  std::vector<double> history =
      gvec::TrainGnn(&model, ctx, p.x, p.labels, p.mask);
  REQUIRE(history.size() == static_cast<std::size_t>(cfg.epochs));
  // Fresh parameters and normalized features: the first loss sits
  // near log(n_classes).
  CHECK(history.front() > 0.4);
  CHECK(history.front() < 2.5);
  CHECK(history.back() < 0.5 * history.front());

  auto out = model.Run(ctx, p.x, /*training=*/false);
  int correct = 0;
  for (int i : p.held_out) {
    Eigen::Index argmax;
    out.logits.row(i).maxCoeff(&argmax);
    if (static_cast<int>(argmax) == p.labels[static_cast<std::size_t>(i)])
      ++correct;
  }
  CHECK(correct >= static_cast<int>(p.held_out.size()) - 1);
}

TEST_CASE("attention training also converges") {
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnConfig cfg = ClusterConfig(GnnVariant::kGat);
  cfg.epochs = 40;
  GnnModel<float> model(cfg);
  std::vector<double> history =
      gvec::TrainGnn(&model, ctx, p.x, p.labels, p.mask);
  CHECK(history.back() < history.front());
}

TEST_CASE("training is bitwise deterministic") {
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnConfig cfg = ClusterConfig(GnnVariant::kGcn);
  cfg.epochs = 25;

  GnnModel<float> a(cfg);
  GnnModel<float> b(cfg);
  std::vector<double> ha = gvec::TrainGnn(&a, ctx, p.x, p.labels, p.mask);
  std::vector<double> hb = gvec::TrainGnn(&b, ctx, p.x, p.labels, p.mask);
  CHECK(ha == hb);
  std::vector<Mf> pa, pb;
  a.VisitParams([&](const std::string &, Mf *m, Mf *) { pa.push_back(*m); });
  b.VisitParams([&](const std::string &, Mf *m, Mf *) { pb.push_back(*m); });
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("model checkpoints restore parameters and outputs bitwise") {
  gvec::testing::TempDir dir;
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnConfig cfg = ClusterConfig(GnnVariant::kGat);
  cfg.epochs = 10;
  GnnModel<float> model(cfg);
  gvec::TrainGnn(&model, ctx, p.x, p.labels, p.mask);

  std::string path = dir.File("model.gnnm");
  gvec::SaveGnnModel(path, &model);
  GnnModel<float> loaded = gvec::LoadGnnModel(path);
  CHECK(loaded.Config().variant == cfg.variant);
  CHECK(loaded.Config().gvec_dim == cfg.gvec_dim);
  CHECK(loaded.Config().seed == cfg.seed);

  std::vector<Mf> pa, pb;
  model.VisitParams([&](const std::string &, Mf *m, Mf *) { pa.push_back(*m); });
  loaded.VisitParams([&](const std::string &, Mf *m, Mf *) { pb.push_back(*m); });
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == pb[i]);
  std::vector<Mf> ba, bb;
  model.VisitBuffers([&](const std::string &, Mf *m) { ba.push_back(*m); });
  loaded.VisitBuffers([&](const std::string &, Mf *m) { bb.push_back(*m); });
  REQUIRE(ba.size() == bb.size());
  for (std::size_t i = 0; i < ba.size(); ++i) CHECK(ba[i] == bb[i]);

  auto out = model.Run(ctx, p.x, /*training=*/false);
  auto out2 = loaded.Run(ctx, p.x, /*training=*/false);
  CHECK(out.gvectors == out2.gvectors);
  CHECK(out.logits == out2.logits);
}

TEST_CASE("corrupt model files are rejected") {
  gvec::testing::TempDir dir;
  GnnConfig cfg = SmallConfig(GnnVariant::kGcn);
  GnnModel<float> model(cfg);
  std::string path = dir.File("model.gnnm");
  gvec::SaveGnnModel(path, &model);
  std::string bytes = gvec::testing::ReadWholeFile(path);

  auto write = [&](const std::string &name, const std::string &content) {
    std::string p = dir.File(name);
    std::ofstream os(p, std::ios::binary);
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    return p;
  };

  SUBCASE("bad magic") {
    std::string c = bytes;
    c[0] = 'X';
    CHECK_THROWS_AS(gvec::LoadGnnModel(write("bad_magic", c)),
                    gvec::DataError);
  }
  SUBCASE("unknown variant id") {
    std::string c = bytes;
    c[8] = 77;  // variant field follows magic and version
    CHECK_THROWS_AS(gvec::LoadGnnModel(write("bad_variant", c)),
                    gvec::DataError);
  }
  SUBCASE("truncated") {
    std::string c = bytes.substr(0, bytes.size() - 9);
    CHECK_THROWS_AS(gvec::LoadGnnModel(write("truncated", c)),
                    gvec::DataError);
  }
  SUBCASE("trailing bytes") {
    std::string c = bytes + "zz";
    CHECK_THROWS_AS(gvec::LoadGnnModel(write("trailing", c)),
                    gvec::DataError);
  }
}

TEST_CASE("g-vector extraction keeps ids and labels") {
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnConfig cfg = ClusterConfig(GnnVariant::kGcn);
  cfg.epochs = 5;
  GnnModel<float> model(cfg);
  gvec::TrainGnn(&model, ctx, p.x, p.labels, p.mask);

  gvec::EmbeddingSet nodes;
  nodes.vectors = p.x;
  for (int i = 0; i < p.graph.num_nodes; ++i) {
    nodes.ids.push_back("utt" + std::to_string(i));
    nodes.labels["utt" + std::to_string(i)] =
        "spk" + std::to_string(p.labels[static_cast<std::size_t>(i)]);
  }
  gvec::EmbeddingSet gv = gvec::ExtractGvectors(&model, ctx, nodes);
  CHECK(gv.Count() == 30);
  CHECK(gv.Dim() == cfg.gvec_dim);
  CHECK(gv.ids == nodes.ids);
  CHECK(gv.labels == nodes.labels);
  auto out = model.Run(ctx, p.x, /*training=*/false);
  CHECK(gv.vectors == out.gvectors);
}

TEST_CASE("attention coefficients are row-stochastic") {
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnConfig cfg = ClusterConfig(GnnVariant::kGat);
  GnnModel<float> model(cfg);
  for (int layer = 0; layer < cfg.depth; ++layer) {
    auto alphas = model.AttentionCoefficients(ctx, p.x, layer);
    REQUIRE(alphas.size() == static_cast<std::size_t>(cfg.heads));
    for (const auto &alpha : alphas) {
      REQUIRE(alpha.size() == ctx.Nnz());
      for (int i = 0; i < ctx.n; ++i) {
        float total = 0.0f;
        for (int k = ctx.RowBegin(i); k < ctx.RowEnd(i); ++k) {
          CHECK(alpha[static_cast<std::size_t>(k)] > 0.0f);
          total += alpha[static_cast<std::size_t>(k)];
        }
        CHECK(total == doctest::Approx(1.0f).epsilon(1e-4));
      }
    }
  }
}

TEST_CASE("attention coefficients require an attention variant") {
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnModel<float> model(ClusterConfig(GnnVariant::kGcn));
  CHECK_THROWS_AS(model.AttentionCoefficients(ctx, p.x, 0),
                  gvec::ConfigError);
  GnnModel<float> gat(ClusterConfig(GnnVariant::kGat));
  CHECK_THROWS_AS(gat.AttentionCoefficients(ctx, p.x, 5), gvec::ConfigError);
}

TEST_CASE("non-finite loss raises a numeric error") {
  ClusterProblem p = MakeClusters();
  auto ctx = GraphContext<float>::FromGraph(p.graph);
  GnnConfig cfg = ClusterConfig(GnnVariant::kGcn);
  cfg.epochs = 3;
  GnnModel<float> model(cfg);
  Mf x = p.x;
  x(4, 2) = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(gvec::TrainGnn(&model, ctx, x, p.labels, p.mask),
                  gvec::NumericError);
}

TEST_CASE("configuration validation rejects bad settings") {
  GnnConfig good = SmallConfig(GnnVariant::kGat);
  CHECK_NOTHROW(good.Validate());

  auto expect_reject = [](GnnConfig cfg) {
    CHECK_THROWS_AS(cfg.Validate(), gvec::ConfigError);
  };
  GnnConfig cfg = good;
  cfg.depth = 0;
  expect_reject(cfg);
  cfg = good;
  cfg.in_dim = 0;
  expect_reject(cfg);
  cfg = good;
  cfg.n_classes = 1;
  expect_reject(cfg);
  cfg = good;
  cfg.heads = 0;
  expect_reject(cfg);
  cfg = good;
  cfg.hidden_dim = 7;  // not divisible by two heads on a hidden layer
  expect_reject(cfg);
  cfg = good;
  cfg.hops = 0;
  expect_reject(cfg);
  cfg = good;
  cfg.epochs = 0;
  expect_reject(cfg);
  cfg = good;
  cfg.learning_rate = 0.0;
  expect_reject(cfg);
  cfg = good;
  cfg.bn_momentum = 1.0;
  expect_reject(cfg);
  cfg = good;
  cfg.leaky_slope = 0.0;
  expect_reject(cfg);

  // A single attention layer averages heads, so the hidden dim does
  // not need to divide.
  cfg = good;
  cfg.depth = 1;
  cfg.hidden_dim = 7;
  cfg.heads = 3;
  CHECK_NOTHROW(cfg.Validate());
  CHECK_NOTHROW(GnnModel<double>{cfg});
}

TEST_CASE("feature dimension mismatches are rejected") {
  Graph g = RandomGraph(6, 0.5, 121);
  auto ctx = GraphContext<double>::FromGraph(g);
  GnnConfig cfg = SmallConfig(GnnVariant::kGcn);
  GnnModel<double> model(cfg);
  Md bad = RandomMatrix(6, cfg.in_dim + 1, 122);
  CHECK_THROWS_AS(model.Run(ctx, bad, false), gvec::DataError);
  Md wrong_rows = RandomMatrix(5, cfg.in_dim, 123);
  CHECK_THROWS_AS(model.Run(ctx, wrong_rows, false), gvec::DataError);
}

TEST_CASE("variant names round-trip") {
  for (GnnVariant variant :
       {GnnVariant::kGcn, GnnVariant::kGat, GnnVariant::kGatV2,
        GnnVariant::kSageMean, GnnVariant::kGraphTransformer,
        GnnVariant::kTagcn})
    CHECK(gvec::VariantFromName(gvec::VariantName(variant)) == variant);
  CHECK_THROWS_AS(gvec::VariantFromName("lstm"), gvec::ConfigError);
}
