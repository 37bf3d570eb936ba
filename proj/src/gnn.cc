// gnn.cc

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

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace gvec {

namespace {

constexpr char kModelMagic[] = "GNNM";
constexpr std::uint32_t kModelVersion = 1;

}  // namespace

std::string VariantName(GnnVariant variant) {
  switch (variant) {
    case GnnVariant::kGcn: return "gcn";
    case GnnVariant::kGat: return "gat";
    case GnnVariant::kGatV2: return "gatv2";
    case GnnVariant::kSageMean: return "sage";
    case GnnVariant::kGraphTransformer: return "transformer";
    case GnnVariant::kTagcn: return "tagcn";
  }
  throw ConfigError("unknown layer variant");
}

GnnVariant VariantFromName(const std::string &name) {
  if (name == "gcn") return GnnVariant::kGcn;
  if (name == "gat") return GnnVariant::kGat;
  if (name == "gatv2") return GnnVariant::kGatV2;
  if (name == "sage") return GnnVariant::kSageMean;
  if (name == "transformer") return GnnVariant::kGraphTransformer;
  if (name == "tagcn") return GnnVariant::kTagcn;
  throw ConfigError("unknown layer variant '" + name +
                    "' (expected gcn, gat, gatv2, sage, transformer or "
                    "tagcn)");
}

void GnnConfig::Validate() const {
  if (depth < 1) throw ConfigError("depth must be at least 1");
  if (in_dim < 1) throw ConfigError("input dim must be positive");
  if (hidden_dim < 1) throw ConfigError("hidden dim must be positive");
  if (gvec_dim < 1) throw ConfigError("g-vector dim must be positive");
  if (n_classes < 2) throw ConfigError("need at least 2 classes");
  if (heads < 1) throw ConfigError("heads must be positive");
  if (hops < 1) throw ConfigError("hops must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0) throw ConfigError("weight decay must be non-negative");
  if (!(bn_momentum > 0 && bn_momentum < 1))
    throw ConfigError("batch-norm momentum must lie in (0, 1)");
  if (!(bn_eps > 0)) throw ConfigError("batch-norm epsilon must be positive");
  if (!(leaky_slope > 0 && leaky_slope < 1))
    throw ConfigError("leaky slope must lie in (0, 1)");
  if (IsAttention() && depth > 1 && hidden_dim % heads != 0)
    throw ConfigError("hidden dim " + std::to_string(hidden_dim) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
}

namespace {

void WriteMatrixF32(std::ostream &os, const MatrixRM<float> &m) {
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  io::WriteArray(os, m.data(), static_cast<std::size_t>(m.size()));
}

void ReadMatrixInto(std::istream &is, const std::string &name,
                    MatrixRM<float> *m) {
  auto rows = io::ReadScalar<std::uint32_t>(is, name + " rows");
  auto cols = io::ReadScalar<std::uint32_t>(is, name + " cols");
  if (rows != static_cast<std::uint32_t>(m->rows()) ||
      cols != static_cast<std::uint32_t>(m->cols()))
    throw DataError("model file shape mismatch on " + name + ": expected " +
                    std::to_string(m->rows()) + "x" +
                    std::to_string(m->cols()) + ", found " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  io::ReadArray(is, m->data(), static_cast<std::size_t>(m->size()), name);
}

}  // namespace

void SaveGnnModel(const std::string &path, GnnModel<float> *model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  const GnnConfig &cfg = model->Config();
  io::WriteMagic(os, kModelMagic);
  io::WriteScalar<std::uint32_t>(os, kModelVersion);
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.variant));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.depth));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.in_dim));
  io::WriteScalar<std::uint32_t>(os,
                                 static_cast<std::uint32_t>(cfg.hidden_dim));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.gvec_dim));
  io::WriteScalar<std::uint32_t>(os,
                                 static_cast<std::uint32_t>(cfg.n_classes));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.heads));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.hops));
  io::WriteScalar<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.epochs));
  io::WriteScalar<std::uint32_t>(os,
                                 static_cast<std::uint32_t>(cfg.activation));
  io::WriteScalar<std::uint64_t>(os, cfg.seed);
  io::WriteScalar<double>(os, cfg.learning_rate);
  io::WriteScalar<double>(os, cfg.weight_decay);
  io::WriteScalar<double>(os, cfg.bn_momentum);
  io::WriteScalar<double>(os, cfg.bn_eps);
  io::WriteScalar<double>(os, cfg.leaky_slope);

  std::uint32_t n_params = 0, n_buffers = 0;
  model->VisitParams([&](const std::string &, MatrixRM<float> *,
                         MatrixRM<float> *) { ++n_params; });
  model->VisitBuffers(
      [&](const std::string &, MatrixRM<float> *) { ++n_buffers; });
  io::WriteScalar<std::uint32_t>(os, n_params);
  model->VisitParams([&](const std::string &, MatrixRM<float> *param,
                         MatrixRM<float> *) { WriteMatrixF32(os, *param); });
  io::WriteScalar<std::uint32_t>(os, n_buffers);
  model->VisitBuffers([&](const std::string &, MatrixRM<float> *buffer) {
    WriteMatrixF32(os, *buffer);
  });
  os.flush();
  if (!os) throw DataError("write to '" + path + "' failed");
}

GnnModel<float> LoadGnnModel(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "' for reading");
  io::ExpectMagic(is, kModelMagic, "model file");
  auto version = io::ReadScalar<std::uint32_t>(is, "model version");
  if (version != kModelVersion)
    throw DataError("unsupported model file version " +
                    std::to_string(version));
  GnnConfig cfg;
  auto variant = io::ReadScalar<std::uint32_t>(is, "layer variant");
  if (variant > static_cast<std::uint32_t>(GnnVariant::kTagcn))
    throw DataError("model file names unknown layer variant " +
                    std::to_string(variant));
  cfg.variant = static_cast<GnnVariant>(variant);
  cfg.depth = static_cast<int>(io::ReadScalar<std::uint32_t>(is, "depth"));
  cfg.in_dim = static_cast<int>(io::ReadScalar<std::uint32_t>(is, "in dim"));
  cfg.hidden_dim =
      static_cast<int>(io::ReadScalar<std::uint32_t>(is, "hidden dim"));
  cfg.gvec_dim =
      static_cast<int>(io::ReadScalar<std::uint32_t>(is, "g-vector dim"));
  cfg.n_classes =
      static_cast<int>(io::ReadScalar<std::uint32_t>(is, "class count"));
  cfg.heads = static_cast<int>(io::ReadScalar<std::uint32_t>(is, "heads"));
  cfg.hops = static_cast<int>(io::ReadScalar<std::uint32_t>(is, "hops"));
  cfg.epochs = static_cast<int>(io::ReadScalar<std::uint32_t>(is, "epochs"));
  auto activation = io::ReadScalar<std::uint32_t>(is, "activation");
  if (activation > static_cast<std::uint32_t>(GnnActivation::kIdentity))
    throw DataError("model file names unknown activation " +
                    std::to_string(activation));
  cfg.activation = static_cast<GnnActivation>(activation);
  cfg.seed = io::ReadScalar<std::uint64_t>(is, "seed");
  cfg.learning_rate = io::ReadScalar<double>(is, "learning rate");
  cfg.weight_decay = io::ReadScalar<double>(is, "weight decay");
  cfg.bn_momentum = io::ReadScalar<double>(is, "batch-norm momentum");
  cfg.bn_eps = io::ReadScalar<double>(is, "batch-norm epsilon");
  cfg.leaky_slope = io::ReadScalar<double>(is, "leaky slope");

  GnnModel<float> model(cfg);
  auto n_params = io::ReadScalar<std::uint32_t>(is, "parameter count");
  std::uint32_t expected_params = 0;
  model.VisitParams([&](const std::string &, MatrixRM<float> *,
                        MatrixRM<float> *) { ++expected_params; });
  if (n_params != expected_params)
    throw DataError("model file holds " + std::to_string(n_params) +
                    " parameters, configuration implies " +
                    std::to_string(expected_params));
  model.VisitParams([&](const std::string &name, MatrixRM<float> *param,
                        MatrixRM<float> *) { ReadMatrixInto(is, name, param); });
  auto n_buffers = io::ReadScalar<std::uint32_t>(is, "buffer count");
  std::uint32_t expected_buffers = 0;
  model.VisitBuffers(
      [&](const std::string &, MatrixRM<float> *) { ++expected_buffers; });
  if (n_buffers != expected_buffers)
    throw DataError("model file holds " + std::to_string(n_buffers) +
                    " buffers, configuration implies " +
                    std::to_string(expected_buffers));
  model.VisitBuffers([&](const std::string &name, MatrixRM<float> *buffer) {
    ReadMatrixInto(is, name, buffer);
  });
  is.peek();
  if (!is.eof()) throw DataError("trailing bytes in model file '" + path + "'");
  return model;
}

EmbeddingSet ExtractGvectors(GnnModel<float> *model,
                             const GraphContext<float> &ctx,
                             const EmbeddingSet &nodes) {
  nodes.Validate();
  auto result = model->Run(ctx, nodes.vectors, /*training=*/false);
  EmbeddingSet out;
  out.ids = nodes.ids;
  out.vectors = result.gvectors;
  out.labels = nodes.labels;
  out.Validate();
  return out;
}

}  // namespace gvec
