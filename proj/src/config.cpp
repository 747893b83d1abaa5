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

#include "bnclone/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

#include "bnclone/checkpoint.hpp"
#include "bnclone/error.hpp"

namespace bnclone {

namespace {

using Slot = std::variant<int*, double*, std::uint64_t*, std::int64_t*, std::string*, std::vector<int>*>;

std::map<std::string, Slot> bindings(PipelineConfig& c) {
  std::map<std::string, Slot> b;
  b["preset"] = &c.preset;
  b["seed"] = &c.seed;

  b["dsp.sample_rate"] = &c.dsp.sample_rate;
  b["dsp.window_len"] = &c.dsp.window_len;
  b["dsp.hop_len"] = &c.dsp.hop_len;
  b["dsp.n_bands"] = &c.dsp.n_bands;
  b["dsp.n_bfcc"] = &c.dsp.n_bfcc;
  b["dsp.floor_eps"] = &c.dsp.floor_eps;
  b["dsp.min_period"] = &c.dsp.min_period;
  b["dsp.max_period"] = &c.dsp.max_period;
  b["dsp.synth_seed"] = &c.dsp.synth_seed;

  ModelConfig& m = c.model;
  b["model.bn_hidden"] = &m.bn_hidden;
  b["model.bn_dim"] = &m.bn_dim;
  b["model.embed_dim"] = &m.embed_dim;
  b["model.enc_conv_layers"] = &m.enc_conv_layers;
  b["model.enc_conv_width"] = &m.enc_conv_width;
  b["model.d_enc"] = &m.d_enc;
  b["model.d_dec"] = &m.d_dec;
  b["model.prenet_dim"] = &m.prenet_dim;
  b["model.attn_dim"] = &m.attn_dim;
  b["model.loc_filters"] = &m.loc_filters;
  b["model.loc_width"] = &m.loc_width;
  b["model.ac_prenet1"] = &m.ac_prenet1;
  b["model.ac_prenet2"] = &m.ac_prenet2;
  b["model.cbhg_bank_k"] = &m.cbhg.bank_k;
  b["model.cbhg_bank_channels"] = &m.cbhg.bank_channels;
  b["model.cbhg_proj_channels"] = &m.cbhg.proj_channels;
  b["model.cbhg_highway"] = &m.cbhg.n_highway;
  b["model.cbhg_gru"] = &m.cbhg.gru_hidden;
  b["model.cbhg_pool_width"] = &m.cbhg.pool_width;
  b["model.dropout"] = &m.dropout;

  TrainConfig& t = c.train;
  b["train.lr_start"] = &t.adam.lr_start;
  b["train.lr_end"] = &t.adam.lr_end;
  b["train.decay_steps"] = &t.adam.decay_steps;
  b["train.beta1"] = &t.adam.beta1;
  b["train.beta2"] = &t.adam.beta2;
  b["train.eps"] = &t.adam.eps;
  b["train.clip_norm"] = &t.clip_norm;
  b["train.bn_steps"] = &t.bn.steps;
  b["train.bn_batch"] = &t.bn.batch_size;
  b["train.bn_target_accuracy"] = &t.bn_target_accuracy;
  b["train.bn_eval_every"] = &t.bn_eval_every;
  b["train.bn_heldout_fraction"] = &t.bn_heldout_fraction;
  b["train.prosody_steps"] = &t.prosody.steps;
  b["train.prosody_batch"] = &t.prosody.batch_size;
  b["train.stop_weight"] = &t.stop_weight;
  b["train.acoustic_steps"] = &t.acoustic.steps;
  b["train.acoustic_batch"] = &t.acoustic.batch_size;
  b["train.acoustic_loss"] = &t.acoustic_loss;
  b["train.adapt_steps"] = &t.adapt.steps;
  b["train.adapt_batch"] = &t.adapt.batch_size;
  b["train.baseline_steps"] = &t.baseline.steps;
  b["train.baseline_batch"] = &t.baseline.batch_size;
  b["train.baseline_finetune_steps"] = &t.baseline_finetune.steps;
  b["train.baseline_finetune_batch"] = &t.baseline_finetune.batch_size;

  CorpusConfig& k = c.corpus;
  b["corpus.n_speakers"] = &k.n_speakers;
  b["corpus.utts_per_speaker"] = &k.utts_per_speaker;
  b["corpus.prosody_utts"] = &k.prosody_utts;
  b["corpus.n_targets"] = &k.n_targets;
  b["corpus.target_adapt_utts"] = &k.target_adapt_utts;
  b["corpus.target_heldout_utts"] = &k.target_heldout_utts;
  b["corpus.min_words"] = &k.min_words;
  b["corpus.max_words"] = &k.max_words;

  b["synth.max_frames"] = &c.synth.max_frames;
  b["synth.stop_threshold"] = &c.synth.stop_threshold;

  b["eval.adapt_utts"] = &c.eval.adapt_utts;
  b["eval.sweep"] = &c.eval.sweep;
  b["eval.probe_min_accuracy"] = &c.eval.probe_min_accuracy;
  b["eval.probe_texts"] = &c.eval.probe_texts;
  b["eval.monotonicity_sentences"] = &c.eval.monotonicity_sentences;
  b["eval.baseline_speakers"] = &c.eval.baseline_speakers;
  return b;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(a, e - a + 1);
}

template <class T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError("config: '" + key + "' expects a finite number, got '" + v + "'");
  return x;
}

std::string format(const Slot& s) {
  struct V {
    std::string operator()(int* p) const { return std::to_string(*p); }
    std::string operator()(std::uint64_t* p) const { return std::to_string(*p); }
    std::string operator()(std::int64_t* p) const { return std::to_string(*p); }
    std::string operator()(double* p) const {
      return format_real(*p);
    }
    std::string operator()(std::string* p) const { return *p; }
    std::string operator()(std::vector<int>* p) const {
      std::string out;
      for (std::size_t i = 0; i < p->size(); ++i) out += (i ? "," : "") + std::to_string((*p)[i]);
      return out;
    }
  };
  return std::visit(V{}, s);
}

}  // namespace

PipelineConfig PipelineConfig::from_preset(const std::string& name) {
  PipelineConfig c;
  if (name == "toy") return c;
  if (name != "paper") throw ConfigError("unknown preset '" + name + "' (expected toy or paper)");
  c.preset = "paper";
  c.dsp.n_bands = 30;
  c.dsp.n_bfcc = 30;
  c.model.bn_hidden = 1024;
  c.model.bn_dim = 512;
  c.model.embed_dim = 512;
  c.model.enc_conv_layers = 3;
  c.model.enc_conv_width = 5;
  c.model.d_enc = 512;
  c.model.d_dec = 1024;
  c.model.prenet_dim = 256;
  c.model.attn_dim = 128;
  c.model.loc_filters = 8;
  c.model.loc_width = 31;
  c.model.ac_prenet1 = 256;
  c.model.ac_prenet2 = 128;
  c.model.cbhg = {128, 16, 128, 128, 4, 128, 2};
  c.train.bn = {20000, 32};
  c.train.prosody = {200000, 16};
  c.train.acoustic = {200000, 32};
  c.train.adapt = {4000, 32};
  c.train.baseline = {200000, 16};
  c.train.baseline_finetune = {4000, 16};
  c.corpus.n_speakers = 60;
  c.corpus.utts_per_speaker = 250;
  c.corpus.prosody_utts = 5000;
  c.corpus.target_adapt_utts = 200;
  c.corpus.target_heldout_utts = 20;
  c.synth.max_frames = 1000;
  c.eval.adapt_utts = 100;
  c.eval.sweep = {50, 100, 200};
  return c;
}

void PipelineConfig::set(const std::string& key, const std::string& raw) {
  auto b = bindings(*this);
  auto it = b.find(key);
  if (it == b.end()) throw ConfigError("config: unknown key '" + key + "'");
  const std::string v = trim(raw);
  struct V {
    const std::string& key;
    const std::string& v;
    void operator()(int* p) const { *p = parse_integer<int>(key, v); }
    void operator()(std::uint64_t* p) const { *p = parse_integer<std::uint64_t>(key, v); }
    void operator()(std::int64_t* p) const { *p = parse_integer<std::int64_t>(key, v); }
    void operator()(double* p) const { *p = parse_double(key, v); }
    void operator()(std::string* p) const { *p = v; }
    void operator()(std::vector<int>* p) const {
      std::vector<int> out;
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(parse_integer<int>(key, trim(item)));
      *p = out;
    }
  };
  std::visit(V{key, v}, it->second);
}

std::string PipelineConfig::get(const std::string& key) const {
  auto b = bindings(const_cast<PipelineConfig&>(*this));
  auto it = b.find(key);
  if (it == b.end()) throw ConfigError("config: unknown key '" + key + "'");
  return format(it->second);
}

std::vector<std::string> PipelineConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& kv : bindings(const_cast<PipelineConfig&>(*this))) out.push_back(kv.first);
  return out;
}

void PipelineConfig::apply_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void PipelineConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string());
}

std::string PipelineConfig::serialize() const {
  std::string out;
  for (const auto& [k, slot] : bindings(const_cast<PipelineConfig&>(*this))) out += k + " = " + format(slot) + "\n";
  return out;
}

void PipelineConfig::validate() const {
  dsp.validate();
  train.adam.validate();
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ConfigError(std::string("config: ") + what + " must be at least 1");
  };
  positive(model.bn_hidden, "model.bn_hidden");
  positive(model.bn_dim, "model.bn_dim");
  positive(model.embed_dim, "model.embed_dim");
  positive(model.enc_conv_width, "model.enc_conv_width");
  positive(model.d_dec, "model.d_dec");
  positive(model.prenet_dim, "model.prenet_dim");
  positive(model.attn_dim, "model.attn_dim");
  positive(model.loc_filters, "model.loc_filters");
  positive(model.loc_width, "model.loc_width");
  positive(model.ac_prenet1, "model.ac_prenet1");
  positive(model.ac_prenet2, "model.ac_prenet2");
  positive(model.cbhg.bank_k, "model.cbhg_bank_k");
  positive(model.cbhg.bank_channels, "model.cbhg_bank_channels");
  positive(model.cbhg.proj_channels, "model.cbhg_proj_channels");
  positive(model.cbhg.gru_hidden, "model.cbhg_gru");
  positive(model.cbhg.pool_width, "model.cbhg_pool_width");
  if (model.enc_conv_layers < 0 || model.cbhg.n_highway < 0)
    throw ConfigError("config: layer counts must be nonnegative");
  if (model.d_enc < 2 || model.d_enc % 2) throw ConfigError("config: model.d_enc must be even and at least 2");
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("config: model.dropout must lie in [0, 1)");
  for (const StageSchedule* s : {&train.bn, &train.prosody, &train.acoustic, &train.adapt, &train.baseline,
                                 &train.baseline_finetune}) {
    if (s->steps < 0) throw ConfigError("config: step budgets must be nonnegative");
    positive(s->batch_size, "batch size");
  }
  if (train.acoustic_loss != "l1" && train.acoustic_loss != "l2")
    throw ConfigError("config: train.acoustic_loss must be l1 or l2");
  if (!(train.bn_heldout_fraction > 0.0 && train.bn_heldout_fraction < 1.0))
    throw ConfigError("config: train.bn_heldout_fraction must lie in (0, 1)");
  positive(train.bn_eval_every, "train.bn_eval_every");
  if (train.stop_weight < 0.0) throw ConfigError("config: train.stop_weight must be nonnegative");
  positive(corpus.n_speakers, "corpus.n_speakers");
  positive(corpus.utts_per_speaker, "corpus.utts_per_speaker");
  positive(corpus.prosody_utts, "corpus.prosody_utts");
  positive(corpus.n_targets, "corpus.n_targets");
  positive(corpus.target_adapt_utts, "corpus.target_adapt_utts");
  positive(corpus.target_heldout_utts, "corpus.target_heldout_utts");
  if (corpus.min_words < 1 || corpus.max_words < corpus.min_words)
    throw ConfigError("config: require 1 <= corpus.min_words <= corpus.max_words");
  positive(synth.max_frames, "synth.max_frames");
  if (!(synth.stop_threshold > 0.0 && synth.stop_threshold < 1.0))
    throw ConfigError("config: synth.stop_threshold must lie in (0, 1)");
  positive(eval.adapt_utts, "eval.adapt_utts");
  if (eval.adapt_utts > corpus.target_adapt_utts)
    throw ConfigError("config: eval.adapt_utts exceeds corpus.target_adapt_utts");
  for (int n : eval.sweep)
    if (n < 1 || n > corpus.target_adapt_utts)
      throw ConfigError("config: eval.sweep entries must lie in [1, corpus.target_adapt_utts]");
  positive(eval.probe_texts, "eval.probe_texts");
  if (eval.baseline_speakers < 0 || eval.baseline_speakers > corpus.n_targets)
    throw ConfigError("config: eval.baseline_speakers must lie in [0, corpus.n_targets]");
}

std::uint64_t PipelineConfig::fingerprint() const {
  std::string canon;
  for (const auto& [k, slot] : bindings(const_cast<PipelineConfig&>(*this)))
    if (k.rfind("dsp.", 0) == 0 || k.rfind("model.", 0) == 0) canon += k + "=" + format(slot) + "\n";
  return fnv1a64(canon);
}

}  // namespace bnclone
