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

#include "bnclone/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "bnclone/error.hpp"
#include "bnclone/io.hpp"

namespace bnclone {

namespace fs = std::filesystem;

// ---- Report

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

void Report::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos)
    throw InputError("report: invalid entry '" + key + "'");
  auto it = index_.find(key);
  if (it != index_.end()) {
    entries_[it->second].second = value;
    return;
  }
  index_[key] = entries_.size();
  entries_.emplace_back(key, value);
}

void Report::set(const std::string& key, double value) { set(key, format_real(value)); }
void Report::set(const std::string& key, int value) { set(key, std::to_string(value)); }
void Report::set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
void Report::set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

bool Report::has(const std::string& key) const { return index_.count(key) > 0; }

const std::string& Report::get(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw DataError("report: missing key '" + key + "'");
  return entries_[it->second].second;
}

double Report::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw DataError("");
    return d;
  } catch (const std::exception&) {
    throw DataError("report: key '" + key + "' is not a number: " + v);
  }
}

int Report::get_int(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const int i = std::stoi(v, &used);
    if (used != v.size()) throw DataError("");
    return i;
  } catch (const std::exception&) {
    throw DataError("report: key '" + key + "' is not an integer: " + v);
  }
}

std::string Report::text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
  return out;
}

void Report::write(const fs::path& path) const {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text();
  if (!out) throw IoError("write failed: " + path.string());
}

Report Report::read(const fs::path& path) {
  std::istringstream in(read_file(path));
  Report r;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw DataError(path.string() + ":" + std::to_string(n) + ": expected key=value");
    r.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return r;
}

// ---- data helpers

bool is_heldout(std::size_t index_in_speaker, double fraction) {
  if (fraction <= 0.0) return false;
  const auto period = static_cast<std::size_t>(std::max(2L, std::lround(1.0 / fraction)));
  return index_in_speaker % period == period - 1;
}

TargetSplit split_targets(const std::vector<UtteranceRecord>& records, const CorpusConfig& cfg) {
  TargetSplit s;
  std::map<std::string, std::size_t> seen;
  for (const auto& r : records) {
    const std::size_t k = seen[r.speaker_id]++;
    if (k == 0) s.speakers.push_back(r.speaker_id);
    if (k < static_cast<std::size_t>(cfg.target_adapt_utts))
      s.adapt[r.speaker_id].push_back(r);
    else
      s.heldout[r.speaker_id].push_back(r);
  }
  return s;
}

std::vector<AudioBuffer> load_audio(const std::vector<UtteranceRecord>& records, std::size_t limit) {
  std::vector<AudioBuffer> out;
  for (std::size_t i = 0; i < records.size() && i < limit; ++i) out.push_back(read_wav(records[i].audio_path));
  return out;
}

DtwDistance dtw_distance(const Mat& a, const Mat& b, Eigen::Index n_cols) {
  if (a.rows() == 0 || b.rows() == 0) throw InputError("dtw: empty sequence");
  if (a.cols() < n_cols || b.cols() < n_cols) throw InputError("dtw: too few columns");
  const Eigen::Index n = a.rows(), m = b.rows();
  Mat cost(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      cost(i, j) = (a.row(i).head(n_cols) - b.row(j).head(n_cols)).cwiseAbs().sum();
  const double inf = std::numeric_limits<double>::infinity();
  Mat acc = Mat::Constant(n + 1, m + 1, inf);
  acc(0, 0) = 0.0;
  for (Eigen::Index i = 1; i <= n; ++i)
    for (Eigen::Index j = 1; j <= m; ++j)
      acc(i, j) = cost(i - 1, j - 1) + std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});
  // Backtrack, preferring the diagonal on ties.
  DtwDistance d;
  Eigen::Index i = n, j = m;
  while (i > 0 && j > 0) {
    d.l1 += cost(i - 1, j - 1);
    d.l2 += (a.row(i - 1).head(n_cols) - b.row(j - 1).head(n_cols)).norm();
    ++d.path_length;
    if (i == 1 && j == 1) break;
    const double diag = acc(i - 1, j - 1), up = acc(i - 1, j), left = acc(i, j - 1);
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
  }
  d.l1 /= static_cast<double>(d.path_length);
  d.l2 /= static_cast<double>(d.path_length);
  return d;
}

// ---- factories

BnExtractorConfig bn_config(const PipelineConfig& cfg) {
  return {cfg.dsp.frame_dim(), cfg.model.bn_hidden, cfg.model.bn_dim, n_phones()};
}

ProsodyConfig prosody_config(const PipelineConfig& cfg, int out_dim) {
  ProsodyConfig p;
  p.n_symbols = n_phones();
  p.embed_dim = cfg.model.embed_dim;
  p.enc_conv_layers = cfg.model.enc_conv_layers;
  p.enc_conv_width = cfg.model.enc_conv_width;
  p.d_enc = cfg.model.d_enc;
  p.d_dec = cfg.model.d_dec;
  p.prenet_dim = cfg.model.prenet_dim;
  p.attn_dim = cfg.model.attn_dim;
  p.loc_filters = cfg.model.loc_filters;
  p.loc_width = cfg.model.loc_width;
  p.out_dim = out_dim;
  p.dropout = cfg.model.dropout;
  p.stop_weight = cfg.train.stop_weight;
  return p;
}

AcousticModelConfig acoustic_config(const PipelineConfig& cfg) {
  AcousticModelConfig a;
  a.bn_dim = cfg.model.bn_dim;
  a.out_dim = cfg.dsp.frame_dim();
  a.prenet1 = cfg.model.ac_prenet1;
  a.prenet2 = cfg.model.ac_prenet2;
  a.cbhg = cfg.model.cbhg;
  a.dropout = cfg.model.dropout;
  a.l2 = cfg.train.acoustic_loss == "l2";
  return a;
}

TrainOptions train_options(const PipelineConfig& cfg, const StageSchedule& s, const std::string& stream) {
  TrainOptions o;
  o.steps = s.steps;
  o.batch_size = s.batch_size;
  o.adam = cfg.train.adam;
  o.clip_norm = cfg.train.clip_norm;
  o.seed = derive_seed(cfg.seed, "train/" + stream);
  return o;
}

namespace {

void require(const fs::path& path, const std::string& produced_by) {
  if (!fs::exists(path)) throw UsageError("missing " + path.string() + " (run " + produced_by + " first)");
}

AcousticModel make_acoustic(const PipelineConfig& cfg) {
  AcousticModel m(acoustic_config(cfg), derive_seed(cfg.seed, "model/acoustic"));
  m.codec().max_period = cfg.dsp.max_period;
  return m;
}

Mat features_of(const AudioBuffer& a, const DspConfig& dsp) { return analyze(a, dsp).to_matrix(); }

struct TrainSplit {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> heldout;
};

TrainSplit split_train(const PipelineConfig& cfg, const WorkDir& wd) {
  require(wd.corpus("train"), "gen-corpus");
  TrainSplit s;
  std::map<std::string, std::size_t> seen;
  for (auto& r : load_manifest(wd.corpus("train")))
    (is_heldout(seen[r.speaker_id]++, cfg.train.bn_heldout_fraction) ? s.heldout : s.train).push_back(r);
  return s;
}

std::vector<LabeledFeatures> labeled(const std::vector<UtteranceRecord>& recs, const DspConfig& dsp) {
  std::vector<LabeledFeatures> out;
  for (const auto& r : recs) {
    if (r.label_path.empty()) throw DataError("utterance " + r.utt_id + " has no frame labels");
    out.push_back({features_of(read_wav(r.audio_path), dsp), read_labels(r.label_path)});
  }
  return out;
}

std::vector<BnAcousticPair> pairs_of(const std::vector<UtteranceRecord>& recs, const BnExtractor& bn,
                                     const DspConfig& dsp) {
  return bn_pairs(load_audio(recs), bn, dsp);
}

void write_trace(const fs::path& path, const std::vector<std::pair<int, double>>& trace) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [s, v] : trace) out << s << '\t' << format_real(v) << '\n';
}

void write_log(const fs::path& path, const std::vector<double>& losses) {
  ensure_parent(path);
  write_loss_log(path.string(), losses);
}

void save_checkpoint(const Checkpoint& ck, const fs::path& path) {
  ensure_parent(path);
  ck.save(path);
}

double tail_mean(const std::vector<double>& v, std::size_t n) {
  if (v.empty()) return 0.0;
  n = std::min(n, v.size());
  double s = 0.0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return s / static_cast<double>(n);
}

std::vector<std::string> selected_speakers(const TargetSplit& split, const std::string& speaker) {
  if (speaker.empty()) return split.speakers;
  if (!split.adapt.count(speaker)) throw UsageError("unknown target speaker '" + speaker + "'");
  return {speaker};
}

}  // namespace

BnExtractor load_bn(const PipelineConfig& cfg, const WorkDir& wd) {
  require(wd.ckpt("bn"), "train-bn");
  return BnExtractor::from_checkpoint(Checkpoint::load(wd.ckpt("bn")), cfg.fingerprint());
}

ProsodyModel load_prosody(const PipelineConfig& cfg, const WorkDir& wd) {
  require(wd.ckpt("prosody"), "train-prosody");
  return ProsodyModel::from_checkpoint(Checkpoint::load(wd.ckpt("prosody")), "prosody", cfg.fingerprint());
}

AcousticModel load_acoustic(const PipelineConfig& cfg, const fs::path& path) {
  require(path, "train-acoustic or adapt");
  return AcousticModel::from_checkpoint(Checkpoint::load(path), cfg.fingerprint());
}

ProsodyModel load_baseline(const PipelineConfig& cfg, const fs::path& path) {
  require(path, "baseline");
  return ProsodyModel::from_checkpoint(Checkpoint::load(path), "baseline", cfg.fingerprint());
}

std::string adapted_name(const std::string& speaker) { return "adapted_" + speaker; }

std::string baseline_name(const std::string& speaker, int n_utts) {
  return "baseline_" + speaker + "_n" + std::to_string(n_utts);
}

// ---- commands

Report cmd_gen_corpus(const PipelineConfig& cfg, const WorkDir& wd) {
  cfg.validate();
  fs::create_directories(wd.root);
  {
    std::ofstream out(wd.config(), std::ios::binary);
    if (!out) throw IoError("cannot write " + wd.config().string());
    out << cfg.serialize();
  }
  const fs::path dir = wd.root / "corpus";
  const CorpusConfig& c = cfg.corpus;
  auto spec = [&](const std::string& name, const std::string& prefix, int n_spk, int n_utt) {
    CorpusSpec s;
    s.name = name;
    s.speaker_prefix = prefix;
    s.n_speakers = n_spk;
    s.utts_per_speaker = n_utt;
    s.seed = derive_seed(cfg.seed, "corpus/" + name);
    s.min_words = c.min_words;
    s.max_words = c.max_words;
    return s;
  };
  const CorpusResult train = generate_corpus(spec("train", "spk", c.n_speakers, c.utts_per_speaker), cfg.dsp, dir);
  const CorpusResult pros = generate_corpus(spec("prosody", "pro", 1, c.prosody_utts), cfg.dsp, dir);
  const CorpusResult tgt =
      generate_corpus(spec("target", "tgt", c.n_targets, c.target_adapt_utts + c.target_heldout_utts), cfg.dsp, dir);
  Report r;
  r.set("train.utterances", train.records.size());
  r.set("train.speakers", train.speakers.size());
  r.set("prosody.utterances", pros.records.size());
  r.set("target.utterances", tgt.records.size());
  r.set("target.speakers", tgt.speakers.size());
  r.set("fingerprint", hex64(cfg.fingerprint()));
  r.write(wd.report("corpus"));
  return r;
}

Report cmd_train_bn(const PipelineConfig& cfg, const WorkDir& wd) {
  cfg.validate();
  const TrainSplit split = split_train(cfg, wd);
  const auto tr = labeled(split.train, cfg.dsp);
  const auto ho = labeled(split.heldout, cfg.dsp);
  BnExtractor bn(bn_config(cfg), derive_seed(cfg.seed, "model/bn"));
  BnTrainOptions opt;
  opt.train = train_options(cfg, cfg.train.bn, "bn");
  opt.target_accuracy = cfg.train.bn_target_accuracy;
  opt.eval_every = cfg.train.bn_eval_every;
  const BnTrainReport rep = train_bn_extractor(bn, tr, ho.empty() ? tr : ho, opt);
  save_checkpoint(bn.to_checkpoint(cfg.fingerprint()), wd.ckpt("bn"));
  write_log(wd.log("bn_loss"), rep.losses);
  write_trace(wd.log("bn_accuracy"), rep.accuracy_trace);
  const double nc = nearest_centroid_accuracy(tr, ho.empty() ? tr : ho, cfg.dsp.n_bfcc, n_phones());
  Report r;
  r.set("train_utterances", tr.size());
  r.set("heldout_utterances", ho.size());
  r.set("steps", rep.steps);
  r.set("initial_heldout_accuracy", rep.initial_heldout_accuracy);
  r.set("heldout_accuracy", rep.heldout_accuracy);
  r.set("target_accuracy", cfg.train.bn_target_accuracy);
  r.set("reached_target", rep.reached_target);
  r.set("nearest_centroid_accuracy", nc);
  r.write(wd.report("bn"));
  return r;
}

Report cmd_train_prosody(const PipelineConfig& cfg, const WorkDir& wd) {
  cfg.validate();
  require(wd.corpus("prosody"), "gen-corpus");
  const BnExtractor bn = load_bn(cfg, wd);
  std::vector<SequencePair> data;
  for (const auto& rec : load_manifest(wd.corpus("prosody")))
    data.push_back({rec.phonemes, bn.extract(features_of(read_wav(rec.audio_path), cfg.dsp))});
  ProsodyModel m(prosody_config(cfg, cfg.model.bn_dim), derive_seed(cfg.seed, "model/prosody"));
  AdamState state;
  const auto losses =
      train_sequence_model(m, data, train_options(cfg, cfg.train.prosody, "prosody"), true, state);
  save_checkpoint(m.to_checkpoint("prosody", cfg.fingerprint()), wd.ckpt("prosody"));
  write_log(wd.log("prosody_loss"), losses);
  Report r;
  r.set("utterances", data.size());
  r.set("steps", losses.size());
  r.set("initial_loss", losses.empty() ? 0.0 : losses.front());
  r.set("final_loss_mean50", tail_mean(losses, 50));
  r.write(wd.report("prosody"));
  return r;
}

Report cmd_train_acoustic(const PipelineConfig& cfg, const WorkDir& wd) {
  cfg.validate();
  const TrainSplit split = split_train(cfg, wd);
  const BnExtractor bn = load_bn(cfg, wd);
  const auto tr = pairs_of(split.train, bn, cfg.dsp);
  const auto ho = pairs_of(split.heldout, bn, cfg.dsp);
  AcousticModel m = make_acoustic(cfg);
  const auto losses = pretrain_acoustic(m, tr, train_options(cfg, cfg.train.acoustic, "acoustic"));
  save_checkpoint(m.to_checkpoint(cfg.fingerprint()), wd.ckpt("acoustic"));
  write_log(wd.log("acoustic_loss"), losses);
  // Scores come from the reloaded checkpoint so they match what later stages see.
  const AcousticModel saved = load_acoustic(cfg, wd.ckpt("acoustic"));
  const double l1 = saved.l1(ho);
  const double mp = mean_predictor_l1(saved.codec(), tr, ho);
  Report r;
  r.set("train_utterances", tr.size());
  r.set("heldout_utterances", ho.size());
  r.set("steps", losses.size());
  r.set("heldout_l1", l1);
  r.set("mean_predictor_l1", mp);
  r.set("ratio", mp > 0 ? l1 / mp : 0.0);
  r.write(wd.report("acoustic"));
  return r;
}

Report cmd_adapt(const PipelineConfig& cfg, const WorkDir& wd, const std::string& speaker) {
  cfg.validate();
  require(wd.corpus("target"), "gen-corpus");
  const BnExtractor bn = load_bn(cfg, wd);
  const AcousticModel base = load_acoustic(cfg, wd.ckpt("acoustic"));
  const std::string base_hash = hex64(fnv1a64(read_file(wd.ckpt("acoustic"))));
  const TargetSplit split = split_targets(load_manifest(wd.corpus("target")), cfg.corpus);
  const auto n = static_cast<std::size_t>(cfg.eval.adapt_utts);
  Report r;
  r.set("adapt_utts", n);
  for (const std::string& spk : selected_speakers(split, speaker)) {
    const auto& recs = split.adapt.at(spk);
    if (recs.size() < n) throw ConfigError("adapt: speaker " + spk + " has only " + std::to_string(recs.size()) +
                                           " adaptation utterances, eval.adapt_utts is " + std::to_string(n));
    const auto held = split.heldout.count(spk) ? split.heldout.at(spk) : std::vector<UtteranceRecord>{};
    const AdaptationResult res = adapt_speaker(base, load_audio(recs, n), load_audio(held), bn, cfg.dsp,
                                               train_options(cfg, cfg.train.adapt, "adapt/" + spk));
    Checkpoint ck = res.model.to_checkpoint(cfg.fingerprint());
    ck.meta["adapted_speaker"] = spk;
    ck.meta["adapted_from"] = base_hash;
    ck.meta["adapt_utts"] = std::to_string(n);
    save_checkpoint(ck, wd.ckpt(adapted_name(spk)));
    write_log(wd.log("adapt_" + spk + "_loss"), res.report.losses);
    r.set(spk + ".steps", res.report.steps);
    r.set(spk + ".pre_l1", res.report.pre_l1);
    r.set(spk + ".post_l1", res.report.post_l1);
    r.set(spk + ".param_change_norm", res.report.param_change_norm);
  }
  r.write(wd.report(speaker.empty() ? "adapt" : "adapt_" + speaker));
  return r;
}

namespace {

struct AlignmentStats {
  double monotonicity = 1.0;
  double coverage = 0.0;
  double confidence = 0.0;  // mean of the per-step maximum weight
};

AlignmentStats alignment_stats(const Mat& a) {
  AlignmentStats s;
  s.monotonicity = monotonicity(a);
  s.coverage = coverage(a);
  if (a.rows() > 0) s.confidence = a.rowwise().maxCoeff().mean();
  return s;
}

}  // namespace

Report cmd_synth(const PipelineConfig& cfg, const WorkDir& wd, const SynthRequest& req) {
  cfg.validate();
  if (req.text.empty()) throw UsageError("synth: --text is required");
  const ProsodyModel pros = req.prosody_ckpt.empty()
                                ? load_prosody(cfg, wd)
                                : ProsodyModel::from_checkpoint(Checkpoint::load(req.prosody_ckpt), "prosody",
                                                                cfg.fingerprint());
  fs::path ac_path = req.acoustic_ckpt;
  if (ac_path.empty()) ac_path = wd.ckpt(req.speaker.empty() ? "acoustic" : adapted_name(req.speaker));
  const AcousticModel ac = load_acoustic(cfg, ac_path);
  const std::vector<int> ids = g2p(req.text, Lexicon::toy());
  const SynthesisResult res = pros.synthesize(ids, cfg.synth.max_frames, cfg.synth.stop_threshold);
  const Mat acoustic = ac.predict(res.frames);
  const AudioBuffer audio = synthesize(AcousticSeq::from_matrix(acoustic, cfg.dsp.frame_spec()), cfg.dsp);
  const fs::path dir = wd.synth();
  fs::create_directories(dir);
  write_wav(dir / (req.name + ".wav"), audio);
  write_features(dir / (req.name + "_acoustic.bncf"), acoustic);
  write_features(dir / (req.name + "_bn.bncf"), res.frames);
  write_features(dir / (req.name + "_align.bncf"), res.alignment);
  const std::size_t reanalyzed = audio.samples.empty() ? 0 : analyze(audio, cfg.dsp).size();
  const AlignmentStats st = alignment_stats(res.alignment);
  Report r;
  r.set("text", req.text);
  r.set("phones", phone_string(ids));
  r.set("speaker", req.speaker.empty() ? std::string("unadapted") : req.speaker);
  r.set("frames", static_cast<std::size_t>(res.frames.rows()));
  r.set("truncated", res.truncated);
  r.set("monotonicity", st.monotonicity);
  r.set("coverage", st.coverage);
  r.set("alignment_confidence", st.confidence);
  r.set("low_confidence", st.confidence < 0.5 || st.coverage < 0.5);
  r.set("samples", audio.samples.size());
  r.set("reanalyzed_frames", reanalyzed);
  r.set("frames_match", reanalyzed == static_cast<std::size_t>(acoustic.rows()));
  r.write(wd.report("synth_" + req.name));
  return r;
}

namespace {

std::vector<SequencePair> paired(const std::vector<UtteranceRecord>& recs, const DspConfig& dsp) {
  std::vector<SequencePair> out;
  for (const auto& r : recs) out.push_back({r.phonemes, features_of(read_wav(r.audio_path), dsp)});
  return out;
}

double mean_eval_loss(const ProsodyModel& m, const std::vector<SequencePair>& data) {
  double s = 0.0;
  for (const auto& p : data) s += m.eval_loss(p.ids, p.frames);
  return data.empty() ? 0.0 : s / static_cast<double>(data.size());
}

std::vector<std::string> baseline_speakers(const PipelineConfig& cfg, const TargetSplit& split) {
  const auto n = std::min<std::size_t>(split.speakers.size(), static_cast<std::size_t>(cfg.eval.baseline_speakers));
  return {split.speakers.begin(), split.speakers.begin() + static_cast<std::ptrdiff_t>(n)};
}

}  // namespace

Report cmd_baseline(const PipelineConfig& cfg, const WorkDir& wd) {
  cfg.validate();
  require(wd.corpus("target"), "gen-corpus");
  const TrainSplit split = split_train(cfg, wd);
  const auto data = paired(split.train, cfg.dsp);
  ProsodyModel base(prosody_config(cfg, cfg.dsp.frame_dim()), derive_seed(cfg.seed, "model/baseline"));
  AdamState state;
  const auto losses = train_sequence_model(base, data, train_options(cfg, cfg.train.baseline, "baseline"), true, state);
  save_checkpoint(base.to_checkpoint("baseline", cfg.fingerprint()), wd.ckpt("baseline"));
  write_log(wd.log("baseline_loss"), losses);
  const ProsodyModel saved = load_baseline(cfg, wd.ckpt("baseline"));
  Report r;
  r.set("train_utterances", data.size());
  r.set("steps", losses.size());
  r.set("final_loss_mean50", tail_mean(losses, 50));
  const TargetSplit targets = split_targets(load_manifest(wd.corpus("target")), cfg.corpus);
  for (const std::string& spk : baseline_speakers(cfg, targets)) {
    const auto& recs = targets.adapt.at(spk);
    for (int n : cfg.eval.sweep) {
      if (static_cast<std::size_t>(n) > recs.size())
        throw ConfigError("baseline: sweep size " + std::to_string(n) + " exceeds the " + std::to_string(recs.size()) +
                          " adaptation utterances of " + spk);
      const auto ft_data = paired({recs.begin(), recs.begin() + n}, cfg.dsp);
      ProsodyModel ft = saved;
      AdamState ft_state;
      const std::string key = baseline_name(spk, n);
      const double pre = mean_eval_loss(ft, ft_data);
      const auto ft_losses = train_sequence_model(
          ft, ft_data, train_options(cfg, cfg.train.baseline_finetune, "baseline_ft/" + spk + "/" + std::to_string(n)),
          false, ft_state);
      Checkpoint ck = ft.to_checkpoint("baseline", cfg.fingerprint());
      ck.meta["adapted_speaker"] = spk;
      ck.meta["adapt_utts"] = std::to_string(n);
      save_checkpoint(ck, wd.ckpt(key));
      write_log(wd.log(key + "_loss"), ft_losses);
      r.set(key + ".pre_finetune_loss", pre);
      r.set(key + ".post_finetune_loss", mean_eval_loss(load_baseline(cfg, wd.ckpt(key)), ft_data));
    }
  }
  r.write(wd.report("baseline"));
  return r;
}

// ---- eval

Report EvalReport::to_report() const {
  Report r;
  r.set("bn.heldout_accuracy", bn_heldout_accuracy);
  r.set("bn.nearest_centroid_accuracy", bn_nearest_centroid);
  r.set("acoustic.heldout_l1", acoustic_heldout_l1);
  r.set("acoustic.mean_predictor_l1", acoustic_mean_predictor_l1);
  r.set("acoustic.ratio", acoustic_mean_predictor_l1 > 0 ? acoustic_heldout_l1 / acoustic_mean_predictor_l1 : 0.0);
  r.set("prosody.sentences", monotonicity_sentences);
  r.set("prosody.monotonic_fraction", monotonic_fraction);
  r.set("prosody.mean_monotonicity", mean_monotonicity);
  r.set("prosody.mean_coverage", mean_coverage);
  r.set("prosody.stop_fraction", stop_fraction);
  r.set("probe.validity_accuracy", probe_validity);
  r.set("probe.valid", probe_valid);
  int decreased = 0, ranked = 0;
  for (const TrialResult& t : trials) {
    const std::string p = "trial." + t.speaker + ".";
    r.set(p + "pre_l1", t.pre_l1);
    r.set(p + "post_l1", t.post_l1);
    r.set(p + "pre_bfcc_l1", t.pre_bfcc_l1);
    r.set(p + "post_bfcc_l1", t.post_bfcc_l1);
    r.set(p + "unadapted_probe_accuracy", t.unadapted.accuracy);
    r.set(p + "unadapted_probe_prob", t.unadapted.target_prob);
    r.set(p + "adapted_probe_accuracy", t.adapted.accuracy);
    r.set(p + "adapted_probe_prob", t.adapted.target_prob);
    r.set(p + "probe_prefers_adapted", t.probe_prefers_adapted);
    r.set(p + "unadapted_dtw_l1", t.unadapted_dtw_l1);
    r.set(p + "adapted_dtw_l1", t.adapted_dtw_l1);
    decreased += t.post_l1 < t.pre_l1 ? 1 : 0;
    ranked += t.probe_prefers_adapted ? 1 : 0;
  }
  r.set("trials", trials.size());
  r.set("trials.l1_decreased", decreased);
  r.set("trials.probe_prefers_adapted", ranked);
  for (const SweepRow& s : sweep) {
    const std::string p = "sweep." + s.speaker + ".n" + std::to_string(s.n_utts) + ".";
    r.set(p + "proposed_dtw_l1", s.proposed_dtw_l1);
    r.set(p + "baseline_dtw_l1", s.baseline_dtw_l1);
    r.set(p + "proposed_dtw_l2", s.proposed_dtw_l2);
    r.set(p + "baseline_dtw_l2", s.baseline_dtw_l2);
    r.set(p + "proposed_probe_accuracy", s.proposed.accuracy);
    r.set(p + "baseline_probe_accuracy", s.baseline.accuracy);
    r.set(p + "proposed_probe_prob", s.proposed.target_prob);
    r.set(p + "baseline_probe_prob", s.baseline.target_prob);
    r.set(p + "baseline_pre_finetune_loss", s.baseline_pre_finetune_loss);
    r.set(p + "baseline_post_finetune_loss", s.baseline_post_finetune_loss);
  }
  return r;
}

namespace {

// Mean raw BFCC L1 per frame of frame-synchronous reconstruction.
double bfcc_l1(const AcousticModel& m, const std::vector<BnAcousticPair>& data, int n_bfcc) {
  double total = 0.0, frames = 0.0;
  for (const auto& p : data) {
    if (p.bn.rows() == 0) continue;
    total += (m.predict(p.bn).leftCols(n_bfcc) - p.acoustic.leftCols(n_bfcc)).cwiseAbs().sum();
    frames += static_cast<double>(p.bn.rows());
  }
  return frames > 0 ? total / frames : 0.0;
}

struct HeldoutText {
  std::vector<int> ids;
  Mat real;  // acoustic frames of the real recording
};

DtwDistance mean_dtw(const std::vector<Mat>& predicted, const std::vector<HeldoutText>& ref, int n_bfcc) {
  DtwDistance out;
  int n = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (predicted[i].rows() == 0) continue;
    const DtwDistance d = dtw_distance(predicted[i], ref[i].real, n_bfcc);
    out.l1 += d.l1;
    out.l2 += d.l2;
    ++n;
  }
  if (n > 0) {
    out.l1 /= n;
    out.l2 /= n;
  }
  return out;
}

std::vector<Mat> predict_all(const AcousticModel& m, const std::vector<Mat>& bn) {
  std::vector<Mat> out;
  for (const Mat& b : bn) out.push_back(m.predict(b));
  return out;
}

}  // namespace

EvalReport cmd_eval(const PipelineConfig& cfg, const WorkDir& wd) {
  cfg.validate();
  require(wd.corpus("target"), "gen-corpus");
  EvalReport ev;
  const DspConfig& dsp = cfg.dsp;
  const int nb = dsp.n_bfcc;
  const BnExtractor bn = load_bn(cfg, wd);
  const ProsodyModel pros = load_prosody(cfg, wd);
  const AcousticModel base = load_acoustic(cfg, wd.ckpt("acoustic"));
  const auto synth_bn = [&](const std::vector<int>& ids) {
    return pros.synthesize(ids, cfg.synth.max_frames, cfg.synth.stop_threshold);
  };

  // BN extractor and acoustic model on the held-out part of the training corpus.
  {
    const TrainSplit split = split_train(cfg, wd);
    const auto tr = labeled(split.train, dsp);
    const auto ho = labeled(split.heldout, dsp);
    ev.bn_heldout_accuracy = bn.frame_accuracy(ho);
    ev.bn_nearest_centroid = nearest_centroid_accuracy(tr, ho, nb, n_phones());
    std::vector<BnAcousticPair> ptr, pho;
    for (const auto& f : tr) ptr.push_back({bn.extract(f.features), f.features});
    for (const auto& f : ho) pho.push_back({bn.extract(f.features), f.features});
    ev.acoustic_heldout_l1 = base.l1(pho);
    ev.acoustic_mean_predictor_l1 = mean_predictor_l1(base.codec(), ptr, pho);
  }

  // Free-running alignment on the prosody training sentences.
  {
    const auto recs = load_manifest(wd.corpus("prosody"));
    const std::size_t n = std::min<std::size_t>(recs.size(), static_cast<std::size_t>(cfg.eval.monotonicity_sentences));
    double mono_ok = 0, mono = 0, cov = 0, stopped = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto res = synth_bn(recs[i].phonemes);
      const AlignmentStats st = alignment_stats(res.alignment);
      mono_ok += st.monotonicity >= 0.9 ? 1 : 0;
      mono += st.monotonicity;
      cov += st.coverage;
      stopped += res.truncated ? 0 : 1;
    }
    ev.monotonicity_sentences = static_cast<int>(n);
    if (n > 0) {
      const double dn = static_cast<double>(n);
      ev.monotonic_fraction = mono_ok / dn;
      ev.mean_monotonicity = mono / dn;
      ev.mean_coverage = cov / dn;
      ev.stop_fraction = stopped / dn;
    }
  }

  // Speaker probe on real recordings of the target speakers.
  const TargetSplit split = split_targets(load_manifest(wd.corpus("target")), cfg.corpus);
  std::map<std::string, int> label_of;
  for (std::size_t i = 0; i < split.speakers.size(); ++i) label_of[split.speakers[i]] = static_cast<int>(i);
  std::map<std::string, std::vector<HeldoutText>> heldout_text;
  std::map<std::string, std::vector<BnAcousticPair>> heldout_pairs;
  SpeakerProbe probe;
  {
    std::vector<Mat> xs, vx;
    std::vector<int> ys, vy;
    for (const std::string& spk : split.speakers) {
      for (const auto& r : split.adapt.at(spk)) {
        xs.push_back(features_of(read_wav(r.audio_path), dsp));
        ys.push_back(label_of[spk]);
      }
      if (!split.heldout.count(spk)) continue;
      for (const auto& r : split.heldout.at(spk)) {
        Mat f = features_of(read_wav(r.audio_path), dsp);
        vx.push_back(f);
        vy.push_back(label_of[spk]);
        heldout_pairs[spk].push_back({bn.extract(f), f});
        heldout_text[spk].push_back({r.phonemes, f});
      }
    }
    probe = SpeakerProbe::train(xs, ys, static_cast<int>(split.speakers.size()));
    ev.probe_validity = probe.accuracy(vx, vy);
    ev.probe_valid = ev.probe_validity >= cfg.eval.probe_min_accuracy;
  }

  // Text -> BN for the probe texts and the held-out sentences, shared by all trials.
  std::vector<std::vector<int>> probe_ids;
  std::vector<Mat> probe_bn;
  {
    Rng rng(derive_seed(cfg.seed, "eval/probe_texts"));
    const Lexicon lex = Lexicon::toy();
    for (int i = 0; i < cfg.eval.probe_texts; ++i) {
      probe_ids.push_back(g2p(random_text(lex, cfg.corpus.min_words, cfg.corpus.max_words, rng), lex));
      probe_bn.push_back(synth_bn(probe_ids.back()).frames);
    }
  }
  std::map<std::string, std::vector<Mat>> heldout_bn;
  for (const auto& [spk, items] : heldout_text)
    for (const auto& h : items) heldout_bn[spk].push_back(synth_bn(h.ids).frames);

  const std::vector<Mat> base_probe = predict_all(base, probe_bn);
  for (const std::string& spk : split.speakers) {
    const AcousticModel adapted = load_acoustic(cfg, wd.ckpt(adapted_name(spk)));
    const auto& pairs = heldout_pairs[spk];
    TrialResult t;
    t.speaker = spk;
    t.pre_l1 = base.l1(pairs);
    t.post_l1 = adapted.l1(pairs);
    t.pre_bfcc_l1 = bfcc_l1(base, pairs, nb);
    t.post_bfcc_l1 = bfcc_l1(adapted, pairs, nb);
    t.unadapted = probe.score(base_probe, label_of[spk]);
    t.adapted = probe.score(predict_all(adapted, probe_bn), label_of[spk]);
    t.probe_prefers_adapted = ranks_above(t.adapted, t.unadapted);
    t.unadapted_dtw_l1 = mean_dtw(predict_all(base, heldout_bn[spk]), heldout_text[spk], nb).l1;
    t.adapted_dtw_l1 = mean_dtw(predict_all(adapted, heldout_bn[spk]), heldout_text[spk], nb).l1;
    ev.trials.push_back(t);
  }

  // Side-by-side comparison with the paired-data baseline.
  if (fs::exists(wd.ckpt("baseline"))) {
    const ProsodyModel bl_base = load_baseline(cfg, wd.ckpt("baseline"));
    for (const std::string& spk : baseline_speakers(cfg, split)) {
      const auto& recs = split.adapt.at(spk);
      const auto held = load_audio(split.heldout.count(spk) ? split.heldout.at(spk) : std::vector<UtteranceRecord>{});
      for (int n : cfg.eval.sweep) {
        SweepRow row;
        row.speaker = spk;
        row.n_utts = n;
        const AdaptationResult prop =
            adapt_speaker(base, load_audio(recs, static_cast<std::size_t>(n)), held, bn, dsp,
                          train_options(cfg, cfg.train.adapt, "adapt/" + spk));
        const ProsodyModel bl = load_baseline(cfg, wd.ckpt(baseline_name(spk, n)));
        std::vector<Mat> bl_held, bl_probe;
        for (const auto& h : heldout_text[spk])
          bl_held.push_back(bl.synthesize(h.ids, cfg.synth.max_frames, cfg.synth.stop_threshold).frames);
        for (const auto& ids : probe_ids)
          bl_probe.push_back(bl.synthesize(ids, cfg.synth.max_frames, cfg.synth.stop_threshold).frames);
        const DtwDistance dp = mean_dtw(predict_all(prop.model, heldout_bn[spk]), heldout_text[spk], nb);
        const DtwDistance db = mean_dtw(bl_held, heldout_text[spk], nb);
        row.proposed_dtw_l1 = dp.l1;
        row.proposed_dtw_l2 = dp.l2;
        row.baseline_dtw_l1 = db.l1;
        row.baseline_dtw_l2 = db.l2;
        row.proposed = probe.score(predict_all(prop.model, probe_bn), label_of[spk]);
        std::vector<Mat> nonempty;
        for (const Mat& m : bl_probe)
          if (m.rows() > 0) nonempty.push_back(m);
        row.baseline = probe.score(nonempty, label_of[spk]);
        const auto ft_data = paired({recs.begin(), recs.begin() + n}, dsp);
        row.baseline_pre_finetune_loss = mean_eval_loss(bl_base, ft_data);
        row.baseline_post_finetune_loss = mean_eval_loss(bl, ft_data);
        ev.sweep.push_back(row);
      }
    }
  }
  ev.to_report().write(wd.report("eval"));
  return ev;
}

}  // namespace bnclone
