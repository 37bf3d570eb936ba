// python/gvec_module.cc

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

// Python surface over the core operations: embedding containers and
// their formats, the statistical preprocessors, graph construction,
// network training and g-vector extraction, the trial metrics, and the
// synthetic data generator.  Matrices cross the boundary as numpy
// arrays via Eigen; errors map onto ValueError (config),
// RuntimeError (data), and ArithmeticError (numeric).

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gvec/common.h"
#include "gvec/embedding.h"
#include "gvec/gnn.h"
#include "gvec/graph.h"
#include "gvec/preproc.h"
#include "gvec/scoring.h"
#include "gvec/synth.h"

namespace py = pybind11;

namespace {

gvec::ScoreSet ScoresFromArrays(const std::vector<double> &targets,
                                const std::vector<double> &nontargets) {
  gvec::ScoreSet scores;
  int k = 0;
  for (double s : targets)
    scores.entries.push_back({"m", "t" + std::to_string(k++), s,
                              gvec::TrialKey::kTarget});
  for (double s : nontargets)
    scores.entries.push_back({"m", "t" + std::to_string(k++), s,
                              gvec::TrialKey::kNontarget});
  return scores;
}

gvec::EerConvention ConventionFromName(const std::string &name) {
  if (name == "interpolate") return gvec::EerConvention::kInterpolate;
  if (name == "max_rate") return gvec::EerConvention::kMaxRate;
  throw gvec::ConfigError("unknown eer convention: " + name);
}

gvec::GnnActivation ActivationFromName(const std::string &name) {
  if (name == "relu") return gvec::GnnActivation::kRelu;
  if (name == "identity") return gvec::GnnActivation::kIdentity;
  throw gvec::ConfigError("unknown activation: " + name);
}

}  // namespace

PYBIND11_MODULE(gvec, m) {
  m.doc() = "Graph neural network speaker-verification backend";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const gvec::ConfigError &e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const gvec::NumericError &e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    } catch (const gvec::DataError &e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    }
  });

  py::class_<gvec::EmbeddingSet>(m, "EmbeddingSet",
                                 "Ids, row-aligned float32 vectors, and an "
                                 "optional id -> speaker label map")
      .def(py::init([](const std::vector<std::string> &ids,
                       const gvec::MatrixRMf &vectors,
                       const std::map<std::string, std::string> &labels) {
             gvec::EmbeddingSet set;
             set.ids = ids;
             set.vectors = vectors;
             set.labels = labels;
             set.Validate();
             return set;
           }),
           py::arg("ids"), py::arg("vectors"),
           py::arg("labels") = std::map<std::string, std::string>())
      .def_readonly("ids", &gvec::EmbeddingSet::ids)
      .def_readonly("vectors", &gvec::EmbeddingSet::vectors)
      .def_readonly("labels", &gvec::EmbeddingSet::labels)
      .def_property_readonly("count", &gvec::EmbeddingSet::Count)
      .def_property_readonly("dim", &gvec::EmbeddingSet::Dim)
      .def("__len__", &gvec::EmbeddingSet::Count)
      .def("__repr__", [](const gvec::EmbeddingSet &set) {
        return "EmbeddingSet(count=" + std::to_string(set.Count()) +
               ", dim=" + std::to_string(set.Dim()) + ")";
      });

  m.def(
      "read_embeddings",
      [](const std::string &path, bool text) {
        return text ? gvec::ReadEmbeddingsText(path)
                    : gvec::ReadEmbeddingsBinary(path);
      },
      py::arg("path"), py::arg("text") = false);
  m.def(
      "write_embeddings",
      [](const std::string &path, const gvec::EmbeddingSet &set, bool text) {
        if (text)
          gvec::WriteEmbeddingsText(path, set);
        else
          gvec::WriteEmbeddingsBinary(path, set);
      },
      py::arg("path"), py::arg("set"), py::arg("text") = false);
  m.def("read_labels", &gvec::ReadLabels, py::arg("path"));
  m.def("write_labels", &gvec::WriteLabels, py::arg("path"),
        py::arg("labels"));

  m.def("mean_vector", &gvec::MeanVector, py::arg("set"));
  m.def(
      "center",
      [](const gvec::EmbeddingSet &set,
         const std::optional<Eigen::VectorXd> &mean) {
        return gvec::Center(set, mean ? *mean : gvec::MeanVector(set));
      },
      py::arg("set"), py::arg("mean") = std::nullopt,
      "Subtract `mean` (default: the set's own mean) from every row");
  m.def("length_normalize", &gvec::LengthNormalize, py::arg("set"));

  py::class_<gvec::LdaTransform>(m, "LdaTransform",
                                 "y = P^T (x - mean) with within-class "
                                 "whitening")
      .def_readonly("mean", &gvec::LdaTransform::mean)
      .def_readonly("projection", &gvec::LdaTransform::projection)
      .def_property_readonly("dim_in", &gvec::LdaTransform::DimIn)
      .def_property_readonly("dim_out", &gvec::LdaTransform::DimOut)
      .def("save", &gvec::LdaTransform::Save, py::arg("path"))
      .def_static("load", &gvec::LdaTransform::Load, py::arg("path"));
  m.def("fit_lda", &gvec::FitLda, py::arg("set"), py::arg("dim_out"));
  m.def("apply_lda", &gvec::ApplyLda, py::arg("lda"), py::arg("set"));

  py::class_<gvec::PldaModel>(m, "PldaModel",
                              "Two-covariance model x = mean + V h + e")
      .def_readonly("mean", &gvec::PldaModel::mean)
      .def_readonly("speaker_subspace", &gvec::PldaModel::speaker_subspace)
      .def_readonly("noise_covariance", &gvec::PldaModel::noise_covariance)
      .def_readonly("loglik_history", &gvec::PldaModel::loglik_history)
      .def_property_readonly("dim", &gvec::PldaModel::Dim)
      .def_property_readonly("subspace_dim", &gvec::PldaModel::SubspaceDim)
      .def("save", &gvec::PldaModel::Save, py::arg("path"))
      .def_static("load", &gvec::PldaModel::Load, py::arg("path"));
  m.def("fit_plda", &gvec::FitPlda, py::arg("set"), py::arg("q"),
        py::arg("n_iters") = 20);
  m.def("plda_llr", &gvec::PldaLlr, py::arg("model"), py::arg("x"),
        py::arg("y"),
        "Same-speaker against different-speaker log-likelihood ratio");

  py::class_<gvec::Graph>(m, "Graph",
                          "Undirected graph; off-diagonal edges stored once "
                          "as (i, j) with i < j")
      .def(py::init([](int num_nodes,
                       const std::vector<std::pair<int, int>> &edges) {
             gvec::Graph g;
             g.num_nodes = num_nodes;
             g.edges = edges;
             g.Validate();
             return g;
           }),
           py::arg("num_nodes"), py::arg("edges"))
      .def_readonly("num_nodes", &gvec::Graph::num_nodes)
      .def_readonly("edges", &gvec::Graph::edges)
      .def("__repr__", [](const gvec::Graph &g) {
        return "Graph(num_nodes=" + std::to_string(g.num_nodes) +
               ", edges=" + std::to_string(g.edges.size()) + ")";
      });
  m.def(
      "cosine_similarity",
      [](const gvec::EmbeddingSet &set) {
        return gvec::CosineSimilarity(set).values;
      },
      py::arg("set"));
  m.def(
      "plda_similarity",
      [](const gvec::PldaModel &model, const gvec::EmbeddingSet &set) {
        return gvec::PldaSimilarity(model, set).values;
      },
      py::arg("model"), py::arg("set"));
  m.def(
      "build_graph_threshold",
      [](const gvec::MatrixRMf &values, double tau) {
        gvec::SimilarityMatrix sim{values};
        sim.Validate();
        return gvec::BuildGraphThreshold(sim, tau);
      },
      py::arg("similarity"), py::arg("tau"),
      "Edge (i, j) iff similarity(i, j) > tau, strictly");
  m.def(
      "build_graph_top_k",
      [](const gvec::MatrixRMf &values, int k) {
        gvec::SimilarityMatrix sim{values};
        sim.Validate();
        return gvec::BuildGraphTopK(sim, k);
      },
      py::arg("similarity"), py::arg("k"));
  m.def("write_graph", &gvec::WriteGraph, py::arg("path"), py::arg("graph"));
  m.def("read_graph", &gvec::ReadGraph, py::arg("path"));

  py::class_<gvec::GnnModel<float>>(m, "GnnModel",
                                    "Trained transductive node classifier; "
                                    "g-vectors are its linear-head outputs")
      .def_property_readonly(
          "variant",
          [](const gvec::GnnModel<float> &model) {
            return gvec::VariantName(model.Config().variant);
          })
      .def_property_readonly(
          "gvec_dim",
          [](const gvec::GnnModel<float> &model) {
            return model.Config().gvec_dim;
          })
      .def(
          "extract",
          [](gvec::GnnModel<float> &model, const gvec::Graph &graph,
             const gvec::EmbeddingSet &nodes) {
            auto ctx = gvec::GraphContext<float>::FromGraph(graph);
            return gvec::ExtractGvectors(&model, ctx, nodes);
          },
          py::arg("graph"), py::arg("nodes"),
          "Evaluation-mode forward pass; rows come back under the node ids")
      .def(
          "save",
          [](gvec::GnnModel<float> &model, const std::string &path) {
            gvec::SaveGnnModel(path, &model);
          },
          py::arg("path"));
  m.def(
      "train_gnn",
      [](const gvec::Graph &graph, const gvec::EmbeddingSet &features,
         const std::vector<int> &labels, const std::vector<int> &mask,
         const std::string &variant, int depth, int hidden_dim, int gvec_dim,
         int heads, int hops, int epochs, double learning_rate,
         double weight_decay, std::uint64_t seed,
         const std::string &activation) {
        gvec::GnnConfig cfg;
        cfg.variant = gvec::VariantFromName(variant);
        cfg.depth = depth;
        cfg.in_dim = features.Dim();
        cfg.hidden_dim = hidden_dim;
        cfg.gvec_dim = gvec_dim;
        cfg.n_classes =
            labels.empty() ? 0
                           : *std::max_element(labels.begin(), labels.end()) +
                                 1;
        cfg.heads = heads;
        cfg.hops = hops;
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.weight_decay = weight_decay;
        cfg.seed = seed;
        cfg.activation = ActivationFromName(activation);
        auto ctx = gvec::GraphContext<float>::FromGraph(graph);
        gvec::GnnModel<float> model(cfg);
        std::vector<double> history =
            gvec::TrainGnn(&model, ctx, features.vectors, labels, mask);
        return std::make_pair(std::move(model), std::move(history));
      },
      py::arg("graph"), py::arg("features"), py::arg("labels"),
      py::arg("mask"), py::arg("variant") = "gat", py::arg("depth") = 2,
      py::arg("hidden_dim") = 256, py::arg("gvec_dim") = 250,
      py::arg("heads") = 4, py::arg("hops") = 3, py::arg("epochs") = 600,
      py::arg("learning_rate") = 1e-4, py::arg("weight_decay") = 5e-4,
      py::arg("seed") = 17, py::arg("activation") = "relu",
      "Full-batch training.  labels[i] is the class of node i or -1 when "
      "unlabeled; mask lists the labeled nodes.  Returns (model, "
      "per-epoch loss history)");
  m.def("load_gnn_model", &gvec::LoadGnnModel, py::arg("path"));

  m.def(
      "compute_eer",
      [](const std::vector<double> &targets,
         const std::vector<double> &nontargets,
         const std::string &convention) {
        return gvec::ComputeEer(ScoresFromArrays(targets, nontargets),
                                ConventionFromName(convention));
      },
      py::arg("target_scores"), py::arg("nontarget_scores"),
      py::arg("convention") = "interpolate",
      "Equal error rate in percent; accept iff score >= threshold");
  m.def(
      "compute_min_dcf",
      [](const std::vector<double> &targets,
         const std::vector<double> &nontargets, double c_miss, double c_fa,
         double p_target, bool normalize) {
        gvec::DcfParams params;
        params.c_miss = c_miss;
        params.c_fa = c_fa;
        params.p_target = p_target;
        params.normalize = normalize;
        return gvec::ComputeMinDcf(ScoresFromArrays(targets, nontargets),
                                   params);
      },
      py::arg("target_scores"), py::arg("nontarget_scores"),
      py::arg("c_miss") = 1.0, py::arg("c_fa") = 1.0,
      py::arg("p_target") = 0.01, py::arg("normalize") = true);
  m.def(
      "det_curve",
      [](const std::vector<double> &targets,
         const std::vector<double> &nontargets) {
        std::vector<gvec::DetPoint> points =
            gvec::DetCurve(ScoresFromArrays(targets, nontargets));
        Eigen::VectorXd p_fa(points.size()), p_miss(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
          p_fa[static_cast<Eigen::Index>(i)] = points[i].p_fa;
          p_miss[static_cast<Eigen::Index>(i)] = points[i].p_miss;
        }
        return std::make_pair(p_fa, p_miss);
      },
      py::arg("target_scores"), py::arg("nontarget_scores"),
      "Staircase from (1, 0) to (0, 1) as (p_fa, p_miss) arrays");

  m.def(
      "generate_synth",
      [](int n_speakers, int per_speaker, int dim, double between_std,
         double within_std, std::uint64_t seed) {
        gvec::SynthConfig cfg;
        cfg.n_speakers = n_speakers;
        cfg.per_speaker = per_speaker;
        cfg.dim = dim;
        cfg.between_std = between_std;
        cfg.within_std = within_std;
        cfg.seed = seed;
        gvec::SynthData data = gvec::GenerateSynth(cfg);
        return std::make_tuple(std::move(data.dev), std::move(data.enroll),
                               std::move(data.test));
      },
      py::arg("n_speakers") = 20, py::arg("per_speaker") = 20,
      py::arg("dim") = 50, py::arg("between_std") = 1.0,
      py::arg("within_std") = 0.3, py::arg("seed") = 1,
      "Labeled Gaussian speakers, length-normalized, split "
      "(dev, enroll, test) per speaker");
  m.def(
      "enroll_average",
      [](const gvec::EmbeddingSet &set) {
        return gvec::EnrollAverage(set, gvec::ModelMapFromLabels(set));
      },
      py::arg("set"),
      "One length-normalized mean vector per speaker label");
}
