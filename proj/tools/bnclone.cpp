// Copyright 2026 The bnclone Authors
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

// bnclone: command-line front end for the voice-cloning pipeline.
//
//   bnclone <command> --out DIR [--preset toy|paper] [--config FILE]
//           [--set key=value ...] [--seed N] [command options]
//
// Configuration is layered: the named preset (or, without --preset, the
// config.txt recorded in DIR by gen-corpus, or else the toy preset), then the
// --config file, then each --set, then --seed.
//
// Exit status: 0 success, 2 usage or configuration error, 1 runtime error.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bnclone/error.hpp"
#include "bnclone/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bnclone;

namespace {

struct Common {
  std::string out;
  std::string preset;
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out", c.out, "Work directory holding every artifact")->required();
  cmd->add_option("--preset", c.preset, "Configuration preset")->check(CLI::IsMember({"toy", "paper"}));
  cmd->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "Override one key (key=value); repeatable");
  cmd->add_option("--seed", c.seed, "Master seed");
}

PipelineConfig resolve(const Common& c, const CLI::App* cmd) {
  const WorkDir wd{c.out};
  PipelineConfig cfg;
  if (!c.preset.empty()) {
    cfg = PipelineConfig::from_preset(c.preset);
  } else if (fs::exists(wd.config())) {
    cfg.apply_file(wd.config());
  } else {
    cfg = PipelineConfig::from_preset("toy");
  }
  if (!c.config.empty()) cfg.apply_file(c.config);
  for (const std::string& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (cmd->count("--seed") > 0) cfg.seed = c.seed;
  cfg.validate();
  return cfg;
}

void print(const std::string& command, const Report& r, double seconds) {
  std::cout << r.text();
  std::fprintf(stderr, "%s finished in %.1f s\n", command.c_str(), seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual voice cloning on bottleneck features"};
  app.require_subcommand(1);
  Common common;
  std::string speaker, text, name = "utt", prosody_ckpt, acoustic_ckpt;

  struct Cmd {
    CLI::App* app;
    std::string name;
  };
  std::vector<Cmd> cmds;
  for (const char* n : {"gen-corpus", "train-bn", "train-prosody", "train-acoustic", "adapt", "synth", "eval",
                        "baseline"}) {
    static const std::map<std::string, std::string> help = {
        {"gen-corpus", "Generate the synthetic corpora"},
        {"train-bn", "Train the bottleneck feature extractor"},
        {"train-prosody", "Train the phoneme -> BN prosody model"},
        {"train-acoustic", "Pretrain the BN -> acoustic model"},
        {"adapt", "Adapt the acoustic model to target speakers from audio only"},
        {"synth", "Synthesise text with an adapted or unadapted model"},
        {"eval", "Write the evaluation report"},
        {"baseline", "Train and fine-tune the paired-data baseline"}};
    CLI::App* sub = app.add_subcommand(n, help.at(n));
    add_common(sub, common);
    cmds.push_back({sub, n});
  }
  cmds[4].app->add_option("--speaker", speaker, "Adapt only this target speaker");
  CLI::App* synth = cmds[5].app;
  synth->add_option("--text", text, "Space separated words of the toy lexicon")->required();
  synth->add_option("--speaker", speaker, "Target speaker (default: unadapted model)");
  synth->add_option("--name", name, "Output file stem");
  synth->add_option("--prosody-ckpt", prosody_ckpt, "Prosody checkpoint (default: <out>/ckpt/prosody.bnck)");
  synth->add_option("--acoustic-ckpt", acoustic_ckpt, "Acoustic checkpoint (default: from --speaker)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    for (const Cmd& c : cmds) {
      if (!c.app->parsed()) continue;
      const PipelineConfig cfg = resolve(common, c.app);
      const WorkDir wd{common.out};
      const auto t0 = std::chrono::steady_clock::now();
      Report r;
      if (c.name == "gen-corpus") r = cmd_gen_corpus(cfg, wd);
      else if (c.name == "train-bn") r = cmd_train_bn(cfg, wd);
      else if (c.name == "train-prosody") r = cmd_train_prosody(cfg, wd);
      else if (c.name == "train-acoustic") r = cmd_train_acoustic(cfg, wd);
      else if (c.name == "adapt") r = cmd_adapt(cfg, wd, speaker);
      else if (c.name == "synth") r = cmd_synth(cfg, wd, {text, speaker, name, prosody_ckpt, acoustic_ckpt});
      else if (c.name == "eval") r = cmd_eval(cfg, wd).to_report();
      else if (c.name == "baseline") r = cmd_baseline(cfg, wd);
      print(c.name, r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
