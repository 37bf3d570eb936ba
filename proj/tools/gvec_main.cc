// tools/gvec_main.cc

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

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "gvec/pipeline.h"

namespace {

using gvec::ConfigError;

std::string Trim(const std::string &s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// One subcommand's shared flags: a config file plus key=value
// overrides, which take precedence over the file.
struct SubArgs {
  CLI::App *cmd = nullptr;
  std::string config;
  std::vector<std::string> sets;
  std::string out;

  std::vector<std::pair<std::string, std::string>> Overrides() const {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const std::string &entry : sets) {
      std::size_t eq = entry.find('=');
      if (eq == std::string::npos)
        throw ConfigError("--set needs key=value, got '" + entry + "'");
      std::string key = Trim(entry.substr(0, eq));
      if (key.empty())
        throw ConfigError("--set needs key=value, got '" + entry + "'");
      pairs.emplace_back(key, Trim(entry.substr(eq + 1)));
    }
    if (!out.empty()) pairs.emplace_back("out", out);
    return pairs;
  }

  gvec::RunConfig Load() const { return gvec::LoadRunConfig(config, Overrides()); }

  std::vector<std::pair<std::string, std::string>> RawPairs() const {
    std::vector<std::pair<std::string, std::string>> pairs;
    if (!config.empty()) pairs = gvec::ParseKeyValueFile(config);
    return gvec::MergeKeyValues(pairs, Overrides());
  }
};

SubArgs *AddSub(CLI::App *app, std::vector<std::unique_ptr<SubArgs>> *subs,
                const std::string &name, const std::string &description) {
  subs->push_back(std::make_unique<SubArgs>());
  SubArgs *args = subs->back().get();
  args->cmd = app->add_subcommand(name, description);
  args->cmd->add_option("--config", args->config,
                        "flat key = value configuration file");
  args->cmd
      ->add_option("--set", args->sets,
                   "override one config key, e.g. --set threshold=8")
      ->allow_extra_args(false);
  args->cmd->add_option("--out", args->out,
                        "output directory (same as --set out=DIR)");
  return args;
}

void PrintReport(const gvec::EvalReport &report) {
  std::printf("eer_percent = %.6f\n", report.eer_percent);
  std::printf("min_dcf = %.6f\n", report.min_dcf);
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Speaker-verification backend: similarity graph over "
               "embeddings, transductive network training, g-vector "
               "scoring, and EER/minDCF reports"};
  app.require_subcommand(1);

  std::vector<std::unique_ptr<SubArgs>> subs;
  SubArgs *synth = AddSub(&app, &subs, "synth",
                          "generate a seeded synthetic dataset with trials");
  SubArgs *preprocess =
      AddSub(&app, &subs, "preprocess",
             "center, length-normalize, and project embeddings");
  SubArgs *build_graph = AddSub(&app, &subs, "build-graph",
                                "build the similarity graph over all nodes");
  SubArgs *train = AddSub(&app, &subs, "train",
                          "train the network on labeled development nodes");
  SubArgs *extract =
      AddSub(&app, &subs, "extract", "extract g-vectors for every node");
  SubArgs *score =
      AddSub(&app, &subs, "score", "score the trial list with g-vectors");
  SubArgs *eval =
      AddSub(&app, &subs, "eval", "report EER and minDCF from scores");
  SubArgs *run = AddSub(&app, &subs, "run",
                        "preprocess, build-graph, train, extract, score, "
                        "and eval in sequence");
  SubArgs *sweep = AddSub(&app, &subs, "sweep",
                          "expand one comma-list config key into per-value "
                          "runs under the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::fprintf(stderr, "error[config]: %s\n", e.what());
    return 2;
  }

  try {
    if (synth->cmd->parsed()) {
      gvec::CmdSynth(synth->Load());
    } else if (preprocess->cmd->parsed()) {
      gvec::CmdPreprocess(preprocess->Load());
    } else if (build_graph->cmd->parsed()) {
      gvec::CmdBuildGraph(build_graph->Load());
    } else if (train->cmd->parsed()) {
      gvec::CmdTrain(train->Load());
    } else if (extract->cmd->parsed()) {
      gvec::CmdExtract(extract->Load());
    } else if (score->cmd->parsed()) {
      gvec::CmdScore(score->Load());
    } else if (eval->cmd->parsed()) {
      PrintReport(gvec::CmdEval(eval->Load()));
    } else if (run->cmd->parsed()) {
      PrintReport(gvec::CmdRun(run->Load()));
    } else if (sweep->cmd->parsed()) {
      std::vector<gvec::SweepRun> runs = gvec::CmdSweep(sweep->RawPairs());
      for (const gvec::SweepRun &r : runs)
        std::printf("%s eer_percent = %.6f min_dcf = %.6f\n", r.value.c_str(),
                    r.report.eer_percent, r.report.min_dcf);
    }
  } catch (const gvec::ConfigError &e) {
    std::fprintf(stderr, "error[config]: %s\n", e.what());
    return 2;
  } catch (const gvec::DataError &e) {
    std::fprintf(stderr, "error[data]: %s\n", e.what());
    return 3;
  } catch (const gvec::NumericError &e) {
    std::fprintf(stderr, "error[numeric]: %s\n", e.what());
    return 4;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 1;
  }
  return 0;
}
