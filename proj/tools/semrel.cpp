// Copyright 2026 The semrel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// semrel command-line driver.
//
// Exit status: 0 ok, 1 usage error, 2 I/O, format or configuration error,
// 3 gradient check failure.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "semrel/semrel.hpp"

namespace {

using namespace semrel;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitGradcheck = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

LossFamily family_from_name(const std::string& s) {
  for (LossFamily f : kAllFamilies)
    if (s == family_name(f)) return f;
  throw UsageError("unknown loss family '" + s + "'");
}

void write_text(const std::string& path, const std::string& text) { detail::write_file(path, text); }

std::string metrics_json(const FinalMetrics& m) {
  Json j{{"top1_retrieval", m.top1_retrieval}, {"src_div", m.src_div}, {"cluster_consistency", m.cluster_consistency}};
  return j.dump();
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  std::vector<std::string> corrupt;
};

int run_gradcheck(const GradcheckArgs& a) {
  GradcheckOptions opts;
  opts.trials = a.trials;
  for (const auto& name : a.corrupt) opts.corrupt.push_back(family_from_name(name));
  GradcheckReport rep = gradcheck_all(a.seed, opts);
  rep.print(std::cout);
  const bool ok = rep.passed(1e-5);
  std::cout << (ok ? "gradcheck ok" : "gradcheck FAILED") << " worst=" << rep.worst() << "\n";
  return ok ? 0 : kExitGradcheck;
}

struct LossArgs {
  std::string input, output, config, head;
  std::size_t k = 256;
  std::size_t step = 0;
};

int run_loss(const LossArgs& a) {
  const TrainConfig cfg = read_train_config(a.config);
  const FeatureMap in = read_fmap(a.input);
  const FeatureMap out = read_fmap(a.output);
  if (in.height() != out.height() || in.width() != out.width() || in.channels() != out.channels())
    throw FormatError(FormatError::Kind::kParse, 0, "input and output feature maps differ in shape");

  TranslationModel model = [&] {
    if (!a.head.empty()) return read_model(a.head);
    Rng init = Rng::child(cfg.seed, RngStreams::kInit);
    return TranslationModel::init(init, in.channels(), cfg.model);
  }();
  if (model.input_head.params.in_dim() != in.channels())
    throw FormatError(FormatError::Kind::kParse, 0, "head expects " + std::to_string(model.input_head.params.in_dim()) +
                                                        " channels, feature maps have " +
                                                        std::to_string(in.channels()));

  Rng sampler = Rng::child(cfg.seed, RngStreams::kSample);
  const std::size_t k = std::min(a.k, in.locations());
  if (k < 2) throw UsageError("--k must be at least 2");
  const PatchIndexSet idx = sample_patch_indices(sampler, in.height(), in.width(), k);
  const Matrix z = model.embed_input(gather_patches(in, idx));
  const Matrix w = model.embed_output(gather_patches(out, idx));

  SemanticLossConfig lc = cfg.loss;
  lc.diagnostics = true;
  const SemanticResult sem = semantic_loss(z, w, lc, a.step);
  ContrastConfig cc = cfg.loss.contrast;
  cc.gamma = sem.diag.gamma;
  Json j{{"k", k},
         {"l_src", sem.diag.l_src},
         {"l_dce", dce(z, w, cfg.loss.contrast).loss},
         {"l_hdce", hdce(z, w, cc).loss},
         {"l_infonce", sem.diag.l_infonce},
         {"gamma", sem.diag.gamma},
         {"npc_mean", sem.diag.npc_mean},
         {"npc_min", sem.diag.npc_min},
         {"l_semantic", sem.loss}};
  std::cout << j.dump(1) << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, out, head_out;
};

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = read_train_config(a.config);
  const TrainResult res = train(cfg);
  std::ostringstream csv;
  write_step_csv(csv, res.metrics);
  write_text(a.out, csv.str());
  if (!a.head_out.empty()) write_model(a.head_out, res.model);
  std::cout << metrics_json(res.metrics.final) << "\n";
  return 0;
}

struct AblateArgs {
  std::string config, out, runs_out;
  std::size_t seeds = 20;
  std::size_t workers = 1;
};

int run_ablate(const AblateArgs& a) {
  const TrainConfig cfg = read_train_config(a.config);
  if (a.seeds < 2) throw UsageError("--seeds must be at least 2");
  const AblationTable table = run_ablation(cfg, a.seeds, a.workers);
  std::ostringstream csv;
  write_ablation_csv(csv, table);
  write_text(a.out, csv.str());
  if (!a.runs_out.empty()) {
    std::ostringstream runs;
    write_ablation_runs_csv(runs, table, cfg);
    write_text(a.runs_out, runs.str());
  }
  std::cout << csv.str();
  return 0;
}

struct SimmapArgs {
  std::string input, output, head, query, out;
};

std::pair<std::size_t, std::size_t> parse_query(const std::string& s) {
  std::size_t h = 0, w = 0;
  char comma = 0, extra = 0;
  std::istringstream is(s);
  if (s.empty() || s[0] == '-' || !(is >> h >> comma >> w) || comma != ',' || (is >> extra))
    throw UsageError("--query expects H,W with non-negative integers, got '" + s + "'");
  return {h, w};
}

int run_simmap(const SimmapArgs& a) {
  const auto [qh, qw] = parse_query(a.query);
  const FeatureMap in = read_fmap(a.input);
  const FeatureMap out = read_fmap(a.output);
  const TranslationModel model = read_model(a.head);
  if (qh >= in.height() || qw >= in.width())
    throw UsageError("--query " + a.query + " outside the " + std::to_string(in.height()) + "x" +
                     std::to_string(in.width()) + " map");
  write_simmap(a.out, export_simmap(model, in, out, qh, qw));
  return 0;
}

struct SynthArgs {
  std::string config, input, output, labels;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  const TrainConfig cfg = a.config.empty() ? default_train_config() : read_train_config(a.config);
  Rng rng = Rng::child(a.seed, RngStreams::kData);
  const SyntheticPair pair = generate_pair(rng, cfg.task);
  write_fmap(a.input, pair.input);
  write_fmap(a.output, pair.output);
  if (!a.labels.empty()) {
    Matrix grid(cfg.task.height, cfg.task.width);
    for (std::size_t i = 0; i < pair.labels.size(); ++i) grid.data()[i] = static_cast<double>(pair.labels[i]);
    std::ostringstream csv;
    write_grid_csv(csv, grid);
    write_text(a.labels, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semrel: patch-wise contrastive losses and a synthetic translation harness"};
  app.require_subcommand(1);

  GradcheckArgs gc;
  auto* gcmd = app.add_subcommand("gradcheck", "finite-difference check of every analytic gradient");
  gcmd->add_option("--seed", gc.seed, "random seed");
  gcmd->add_option("--trials", gc.trials, "instances per loss family")->check(CLI::PositiveNumber);
  gcmd->add_option("--corrupt", gc.corrupt, "flip the sign of this family's gradient (self-test)");

  LossArgs lo;
  auto* lcmd = app.add_subcommand("loss", "evaluate every loss on a feature-map pair");
  lcmd->add_option("--input", lo.input, "input feature map (FMAP1)")->required();
  lcmd->add_option("--output", lo.output, "output feature map (FMAP1)")->required();
  lcmd->add_option("--config", lo.config, "JSON configuration")->required();
  lcmd->add_option("--k", lo.k, "number of sampled patches");
  lcmd->add_option("--head", lo.head, "model JSON; default is a freshly initialized head");
  lcmd->add_option("--step", lo.step, "training step used for the hardness schedule");

  TrainArgs tr;
  auto* tcmd = app.add_subcommand("train", "train on the synthetic task");
  tcmd->add_option("--config", tr.config, "JSON configuration")->required();
  tcmd->add_option("--out", tr.out, "per-step metrics CSV")->required();
  tcmd->add_option("--head-out", tr.head_out, "write the trained model as JSON");

  AblateArgs ab;
  auto* acmd = app.add_subcommand("ablate", "run the seven-configuration ablation");
  acmd->add_option("--config", ab.config, "JSON configuration")->required();
  acmd->add_option("--seeds", ab.seeds, "seeds per configuration");
  acmd->add_option("--out", ab.out, "summary CSV")->required();
  acmd->add_option("--runs-out", ab.runs_out, "per-run CSV");
  acmd->add_option("--workers", ab.workers, "worker threads")->check(CLI::PositiveNumber);

  SimmapArgs sm;
  auto* scmd = app.add_subcommand("simmap", "similarity maps for one query location");
  scmd->add_option("--input", sm.input, "input feature map (FMAP1)")->required();
  scmd->add_option("--output", sm.output, "output feature map (FMAP1)")->required();
  scmd->add_option("--head", sm.head, "model JSON written by train --head-out")->required();
  scmd->add_option("--query", sm.query, "query location H,W")->required();
  scmd->add_option("--out", sm.out, "output file prefix")->required();

  SynthArgs sy;
  auto* ycmd = app.add_subcommand("synth", "write one synthetic feature-map pair");
  ycmd->add_option("--config", sy.config, "JSON configuration (task section is used)");
  ycmd->add_option("--seed", sy.seed, "random seed");
  ycmd->add_option("--input", sy.input, "input feature map path")->required();
  ycmd->add_option("--output", sy.output, "output feature map path")->required();
  ycmd->add_option("--labels", sy.labels, "cluster label grid CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gcmd) return run_gradcheck(gc);
    if (*lcmd) return run_loss(lo);
    if (*tcmd) return run_train(tr);
    if (*acmd) return run_ablate(ab);
    if (*scmd) return run_simmap(sm);
    if (*ycmd) return run_synth(sy);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitData;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
