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

#include "bnclone/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "bnclone/checkpoint.hpp"
#include "bnclone/error.hpp"
#include "bnclone/io.hpp"

namespace bnclone {

namespace fs = std::filesystem;

// ---- inventory

const std::vector<PhoneInfo>& phone_inventory() {
  using K = PhoneKind;
  static const std::vector<PhoneInfo> inv = {
      {"a", K::Vowel, {750, 1200, 2600}, {110, 130, 180}, {1.0, 0.7, 0.25}, 1.0, 8, 12},
      {"i", K::Vowel, {300, 2300, 3100}, {70, 150, 200}, {1.0, 0.45, 0.35}, 1.0, 8, 12},
      {"u", K::Vowel, {330, 800, 2300}, {70, 100, 200}, {1.0, 0.55, 0.08}, 1.0, 8, 12},
      {"e", K::Vowel, {500, 1900, 2600}, {90, 140, 180}, {1.0, 0.55, 0.3}, 1.0, 8, 12},
      {"o", K::Vowel, {500, 900, 2500}, {90, 110, 200}, {1.0, 0.75, 0.1}, 1.0, 8, 12},
      {"m", K::Nasal, {260, 1100, 2200}, {60, 250, 300}, {1.0, 0.08, 0.05}, 0.55, 5, 8},
      {"n", K::Nasal, {260, 1700, 2700}, {60, 250, 300}, {1.0, 0.15, 0.12}, 0.55, 5, 8},
      {"s", K::Fricative, {6200}, {1100}, {1.0}, 0.45, 5, 8},
      {"sh", K::Fricative, {3200}, {600}, {1.0}, 0.55, 5, 8},
      {"f", K::Fricative, {1500, 4500, 7000}, {900, 1400, 900}, {0.6, 0.7, 0.8}, 0.25, 5, 8},
      {"z", K::VoicedFricative, {5000}, {1200}, {1.0}, 0.45, 5, 8},
      {"#", K::Boundary, {}, {}, {}, 0.0, 4, 6},
  };
  return inv;
}

int n_phones() { return static_cast<int>(phone_inventory().size()); }

int boundary_id() {
  static const int id = phone_id("#");
  return id;
}

int phone_id(std::string_view symbol) {
  const auto& inv = phone_inventory();
  for (std::size_t i = 0; i < inv.size(); ++i)
    if (inv[i].symbol == symbol) return static_cast<int>(i);
  throw InputError("unknown phoneme symbol '" + std::string(symbol) + "'");
}

std::string phone_string(const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= n_phones())
      throw InputError("phoneme id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                       " is outside the inventory");
    if (i) out += ' ';
    out += phone_inventory()[static_cast<std::size_t>(ids[i])].symbol;
  }
  return out;
}

// ---- lexicon and G2P

void Lexicon::validate() const {
  for (const auto& [word, phones] : entries)
    for (int p : phones)
      if (p < 0 || p >= inventory_size)
        throw DataError("lexicon entry '" + word + "' maps to phoneme id " + std::to_string(p) +
                        " outside an inventory of " + std::to_string(inventory_size));
}

Lexicon Lexicon::toy() {
  Lexicon lex;
  lex.inventory_size = n_phones();
  const std::vector<std::string> consonants = {"m", "n", "s", "sh", "f", "z"};
  const std::vector<std::string> vowels = {"a", "i", "u", "e", "o"};
  for (const auto& c : consonants)
    for (const auto& v : vowels) lex.entries[c + v] = {phone_id(c), phone_id(v)};
  for (const auto& v : vowels) lex.entries[v] = {phone_id(v)};
  // Two-syllable words.
  const std::vector<std::pair<std::string, std::vector<std::string>>> words = {
      {"mana", {"m", "a", "n", "a"}}, {"sofi", {"s", "o", "f", "i"}}, {"zume", {"z", "u", "m", "e"}},
      {"shino", {"sh", "i", "n", "o"}}, {"fasu", {"f", "a", "s", "u"}}, {"nezo", {"n", "e", "z", "o"}},
      {"mishe", {"m", "i", "sh", "e"}}, {"osa", {"o", "s", "a"}}, {"ima", {"i", "m", "a"}},
      {"unfe", {"u", "n", "f", "e"}},
  };
  for (const auto& [w, ps] : words) {
    std::vector<int> ids;
    for (const auto& p : ps) ids.push_back(phone_id(p));
    lex.entries[w] = ids;
  }
  return lex;
}

std::vector<int> g2p(std::string_view text, const Lexicon& lexicon, bool boundaries) {
  std::istringstream in{std::string(text)};
  std::vector<int> out;
  std::vector<std::string> unknown;
  std::string tok;
  bool first = true;
  while (in >> tok) {
    auto it = lexicon.entries.find(tok);
    if (it == lexicon.entries.end()) {
      unknown.push_back(tok);
      continue;
    }
    if (!first && boundaries) out.push_back(boundary_id());
    out.insert(out.end(), it->second.begin(), it->second.end());
    first = false;
  }
  if (!unknown.empty()) {
    std::string msg = "g2p: unknown token(s):";
    for (const auto& u : unknown) msg += " '" + u + "'";
    throw InputError(msg);
  }
  return out;
}

std::string random_text(const Lexicon& lexicon, int min_words, int max_words, Rng& rng) {
  if (lexicon.entries.empty()) throw DataError("random_text: empty lexicon");
  std::vector<const std::string*> keys;
  for (const auto& kv : lexicon.entries) keys.push_back(&kv.first);
  const int n = min_words + static_cast<int>(rng() % static_cast<std::uint64_t>(max_words - min_words + 1));
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += *keys[rng() % keys.size()];
  }
  return out;
}

// ---- speakers

void SpeakerProfile::validate() const {
  if (!(f0_base > 0.0)) throw ConfigError("speaker " + speaker_id + ": f0_base must be positive");
  if (!(formant_shift >= 0.7 && formant_shift <= 1.3))
    throw ConfigError("speaker " + speaker_id + ": formant_shift must lie in [0.7, 1.3]");
  if (!(f0_range >= 0.0)) throw ConfigError("speaker " + speaker_id + ": f0_range must be nonnegative");
}

namespace {

double uniform(Rng& rng, double lo, double hi) {
  // 53-bit mantissa draw, identical on every standard library.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

double gaussian(Rng& rng) {
  // Box-Muller from the portable uniform.
  const double u1 = 1.0 - uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

SpeakerProfile random_speaker(std::string speaker_id, Rng& rng) {
  SpeakerProfile s;
  s.speaker_id = std::move(speaker_id);
  s.f0_base = uniform(rng, 100.0, 135.0);
  s.f0_range = uniform(rng, 4.0, 10.0);
  s.spectral_tilt = uniform(rng, -9.0, -4.0);
  s.formant_shift = uniform(rng, 0.92, 1.08);
  return s;
}

// ---- rendering

namespace {

constexpr int kRamp = 80;          // samples of cross-fade at phone transitions
constexpr double kVowelRms = 0.1;  // level of a vowel
constexpr double kPauseRms = 0.002;

double envelope(const PhoneInfo& ph, const SpeakerProfile& spk, double f) {
  double e = 0.01;
  for (std::size_t i = 0; i < ph.formants.size(); ++i) {
    const double z = (f - ph.formants[i] * spk.formant_shift) / ph.bandwidths[i];
    e += ph.gains[i] * std::exp(-0.5 * z * z);
  }
  return e * std::pow(10.0, spk.spectral_tilt / 20.0 * std::log2(std::max(f, 50.0) / 100.0));
}

// Harmonic amplitudes for one phone at fundamental f0, scaled to the phone's
// voiced RMS.
std::vector<double> harmonic_amps(const PhoneInfo& ph, const SpeakerProfile& spk, double f0, double nyquist) {
  const int n = static_cast<int>((nyquist - 1.0) / f0);
  std::vector<double> a(static_cast<std::size_t>(n), 0.0);
  if (!ph.voiced()) return a;
  double power = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double v = envelope(ph, spk, k * f0);
    a[static_cast<std::size_t>(k - 1)] = v;
    power += 0.5 * v * v;
  }
  const double level = kVowelRms * ph.level * (ph.kind == PhoneKind::VoicedFricative ? 0.8 : 1.0);
  const double g = power > 0 ? level / std::sqrt(power) : 0.0;
  for (double& v : a) v *= g;
  return a;
}

// Noise with the phone's envelope, normalised to `rms`.
std::vector<double> shaped_noise(const PhoneInfo& ph, const SpeakerProfile& spk, std::size_t len, double rms,
                                 int sample_rate, Rng& rng) {
  int n = 1;
  while (static_cast<std::size_t>(n) < len) n *= 2;
  std::vector<std::complex<double>> spec(static_cast<std::size_t>(n / 2 + 1));
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / n;
    const double g = ph.formants.empty() ? 1.0 : envelope(ph, spk, f);
    const double re = gaussian(rng);
    const double im = gaussian(rng);
    spec[k] = {g * re, g * im};
  }
  spec.front() = 0.0;
  std::vector<double> x = inverse_real_fft(spec, n);
  x.resize(len);
  double p = 0.0;
  for (double v : x) p += v * v;
  const double scale = p > 0 ? rms / std::sqrt(p / static_cast<double>(len)) : 0.0;
  for (double& v : x) v *= scale;
  return x;
}

}  // namespace

RenderedUtterance render_utterance(const std::vector<int>& phones, const SpeakerProfile& spk,
                                   const DspConfig& dsp, Rng& rng) {
  dsp.validate();
  spk.validate();
  if (phones.empty()) throw InputError("render: empty phoneme sequence");
  const auto& inv = phone_inventory();
  for (std::size_t i = 0; i < phones.size(); ++i)
    if (phones[i] < 0 || phones[i] >= n_phones())
      throw InputError("render: phoneme id " + std::to_string(phones[i]) + " at position " +
                       std::to_string(i) + " is outside the inventory");

  const int hop = dsp.hop_len, win = dsp.window_len, sr = dsp.sample_rate;
  std::vector<int> dur(phones.size());
  int n_frames = 0;
  for (std::size_t k = 0; k < phones.size(); ++k) {
    const PhoneInfo& ph = inv[static_cast<std::size_t>(phones[k])];
    dur[k] = uniform_int(rng, ph.min_frames, ph.max_frames);
    n_frames += dur[k];
  }
  const std::size_t len = static_cast<std::size_t>(hop) * n_frames + win - hop;
  // Segment k owns samples [hop*F_k + off, hop*F_{k+1} + off) so that every
  // frame centre falls inside the segment of its label.
  const int off = (win - hop) / 2;
  std::vector<std::size_t> seg_start(phones.size() + 1);
  int acc = 0;
  for (std::size_t k = 0; k < phones.size(); ++k) {
    seg_start[k] = k == 0 ? 0 : static_cast<std::size_t>(hop * acc + off);
    acc += dur[k];
  }
  seg_start.back() = len;

  RenderedUtterance out;
  out.audio.sample_rate = sr;
  out.audio.samples.assign(len, 0.0);
  const double phase0 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double wobble = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  auto f0_at = [&](double n) {
    const double tau = n / static_cast<double>(len);
    return spk.f0_base * (1.06 - 0.12 * tau) + spk.f0_range * std::sin(2.0 * std::numbers::pi * 1.3 * tau + wobble);
  };

  // Voiced component: additive harmonics with a continuous phase.
  const double nyquist = 0.5 * sr;
  constexpr std::size_t kBlock = 32;
  double phase = phase0;
  for (std::size_t k = 0; k < phones.size(); ++k) {
    const PhoneInfo& cur = inv[static_cast<std::size_t>(phones[k])];
    const PhoneInfo* prev = k ? &inv[static_cast<std::size_t>(phones[k - 1])] : nullptr;
    for (std::size_t b = seg_start[k]; b < seg_start[k + 1]; b += kBlock) {
      const std::size_t e = std::min(b + kBlock, seg_start[k + 1]);
      const double f0 = f0_at(static_cast<double>(b));
      std::vector<double> a = harmonic_amps(cur, spk, f0, nyquist);
      std::vector<double> ap;
      if (prev && b - seg_start[k] < static_cast<std::size_t>(kRamp)) ap = harmonic_amps(*prev, spk, f0, nyquist);
      const double w = std::numbers::pi * 2.0 * f0 / sr;
      for (std::size_t n = b; n < e; ++n) {
        std::vector<double>* use = &a;
        std::vector<double> mix;
        if (!ap.empty()) {
          const double r = std::min(1.0, static_cast<double>(n - seg_start[k]) / kRamp);
          mix.resize(a.size());
          for (std::size_t h = 0; h < a.size(); ++h) mix[h] = (1.0 - r) * ap[h] + r * a[h];
          use = &mix;
        }
        // sin(h*phase) by the Chebyshev recurrence.
        const double c2 = 2.0 * std::cos(phase);
        double s_prev = 0.0, s = std::sin(phase), y = 0.0;
        for (std::size_t h = 0; h < use->size(); ++h) {
          y += (*use)[h] * s;
          const double s_next = c2 * s - s_prev;
          s_prev = s;
          s = s_next;
        }
        out.audio.samples[n] += y;
        phase += w;
        if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
      }
    }
  }

  // Noise component per segment with linear fades at both ends.
  for (std::size_t k = 0; k < phones.size(); ++k) {
    const PhoneInfo& ph = inv[static_cast<std::size_t>(phones[k])];
    const std::size_t a = seg_start[k], b = seg_start[k + 1];
    double rms = 0.0;
    if (ph.kind == PhoneKind::Boundary) rms = kPauseRms;
    else if (ph.kind == PhoneKind::Fricative) rms = kVowelRms * ph.level;
    else if (ph.kind == PhoneKind::VoicedFricative) rms = kVowelRms * ph.level * 0.3;
    else rms = kPauseRms * 0.5;  // breath floor under voiced sounds
    const std::vector<double> x = shaped_noise(ph, spk, b - a, rms, sr, rng);
    for (std::size_t n = a; n < b; ++n) {
      const double from_start = static_cast<double>(n - a), to_end = static_cast<double>(b - 1 - n);
      const double g = std::min({1.0, (from_start + 1) / kRamp, (to_end + 1) / kRamp});
      out.audio.samples[n] += g * x[n - a];
    }
  }

  out.frame_labels.resize(static_cast<std::size_t>(n_frames));
  out.frame_f0.resize(static_cast<std::size_t>(n_frames));
  std::size_t t = 0;
  for (std::size_t k = 0; k < phones.size(); ++k) {
    const PhoneInfo& ph = inv[static_cast<std::size_t>(phones[k])];
    for (int i = 0; i < dur[k]; ++i, ++t) {
      out.frame_labels[t] = phones[k];
      const double centre = static_cast<double>(t * static_cast<std::size_t>(hop)) + 0.5 * win;
      out.frame_f0[t] = ph.voiced() ? f0_at(centre) : 0.0;
    }
  }
  return out;
}

// ---- manifest

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

fs::path relative_to(const fs::path& p, const fs::path& base) {
  if (p.empty()) return p;
  const fs::path rel = p.lexically_relative(base);
  return rel.empty() ? p : rel;
}

}  // namespace

void write_manifest(const fs::path& path, const std::vector<UtteranceRecord>& records) {
  const fs::path base = fs::absolute(path).parent_path();
  std::ofstream os(path);
  if (!os) throw IoError("cannot create manifest: " + path.string());
  for (const auto& r : records) {
    os << r.utt_id << '\t' << r.speaker_id << '\t';
    for (std::size_t i = 0; i < r.phonemes.size(); ++i) os << (i ? " " : "") << r.phonemes[i];
    os << '\t' << relative_to(fs::absolute(r.audio_path), base).generic_string() << '\t'
       << (r.label_path.empty() ? std::string() : relative_to(fs::absolute(r.label_path), base).generic_string())
       << '\n';
  }
  if (!os) throw IoError("failed writing manifest: " + path.string());
}

std::vector<UtteranceRecord> load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  const fs::path base = fs::absolute(path).parent_path();
  std::vector<UtteranceRecord> out;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, '\t');
    if (f.size() != 5) fail("expected 5 tab-separated fields, found " + std::to_string(f.size()));
    UtteranceRecord r;
    r.utt_id = f[0];
    r.speaker_id = f[1];
    if (r.utt_id.empty() || r.speaker_id.empty()) fail("empty utterance or speaker id");
    std::istringstream ps(f[2]);
    std::string tok;
    while (ps >> tok) {
      try {
        std::size_t used = 0;
        const int id = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        r.phonemes.push_back(id);
      } catch (const std::exception&) {
        fail("bad phoneme id '" + tok + "'");
      }
    }
    if (f[3].empty()) fail("missing audio path");
    r.audio_path = fs::path(f[3]).is_absolute() ? fs::path(f[3]) : base / f[3];
    if (!f[4].empty()) r.label_path = fs::path(f[4]).is_absolute() ? fs::path(f[4]) : base / f[4];
    if (!fs::exists(r.audio_path)) fail("missing audio file " + r.audio_path.string());
    if (!r.label_path.empty() && !fs::exists(r.label_path)) fail("missing label file " + r.label_path.string());
    out.push_back(std::move(r));
  }
  return out;
}

void write_speakers(const fs::path& path, const std::vector<SpeakerProfile>& speakers) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot create speaker table: " + path.string());
  for (const auto& s : speakers)
    os << s.speaker_id << '\t' << format_real(s.f0_base) << '\t' << format_real(s.f0_range) << '\t'
       << format_real(s.spectral_tilt) << '\t' << format_real(s.formant_shift) << '\n';
  if (!os) throw IoError("failed writing speaker table: " + path.string());
}

std::vector<SpeakerProfile> read_speakers(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open speaker table: " + path.string());
  std::vector<SpeakerProfile> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 5) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
    try {
      out.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4])});
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

// ---- generation

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  // splitmix64 finaliser over the seed mixed with the stream name.
  std::uint64_t z = seed ^ fnv1a64(stream);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

CorpusResult generate_corpus(const CorpusSpec& spec, const DspConfig& dsp, const fs::path& out_dir) {
  dsp.validate();
  if (spec.n_speakers < 1 || spec.utts_per_speaker < 1)
    throw ConfigError("corpus: need at least one speaker and one utterance per speaker");
  if (spec.min_words < 1 || spec.max_words < spec.min_words)
    throw ConfigError("corpus: require 1 <= min_words <= max_words");
  if (!spec.speakers.empty() && static_cast<int>(spec.speakers.size()) != spec.n_speakers)
    throw ConfigError("corpus: explicit speaker list does not match n_speakers");

  CorpusResult res;
  Rng spk_rng(derive_seed(spec.seed, spec.name + "/speakers"));
  for (int s = 0; s < spec.n_speakers; ++s) {
    char id[64];
    std::snprintf(id, sizeof id, "%s%03d", spec.speaker_prefix.c_str(), s);
    SpeakerProfile p = spec.speakers.empty() ? random_speaker(id, spk_rng) : spec.speakers[static_cast<std::size_t>(s)];
    p.validate();
    res.speakers.push_back(p);
  }

  const fs::path dir = out_dir / spec.name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create corpus directory " + dir.string() + ": " + ec.message());
  const Lexicon lex = Lexicon::toy();
  for (const SpeakerProfile& spk : res.speakers) {
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      char id[96];
      std::snprintf(id, sizeof id, "%s_%04d", spk.speaker_id.c_str(), u);
      Rng rng(derive_seed(spec.seed, spec.name + "/" + id));
      const std::string text = random_text(lex, spec.min_words, spec.max_words, rng);
      const std::vector<int> phones = g2p(text, lex, true);
      const RenderedUtterance r = render_utterance(phones, spk, dsp, rng);
      UtteranceRecord rec;
      rec.utt_id = id;
      rec.speaker_id = spk.speaker_id;
      rec.phonemes = phones;
      rec.audio_path = dir / (std::string(id) + ".wav");
      rec.label_path = dir / (std::string(id) + ".lab");
      write_wav(rec.audio_path, r.audio);
      write_labels(rec.label_path, r.frame_labels);
      res.records.push_back(std::move(rec));
    }
  }
  res.manifest = out_dir / (spec.name + ".tsv");
  write_manifest(res.manifest, res.records);
  write_speakers(out_dir / (spec.name + "_speakers.tsv"), res.speakers);
  return res;
}

// ---- batching

BatchIterator::BatchIterator(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_(batch_size), seed_(seed) {
  if (n == 0) throw DataError("batch iterator: empty dataset");
  if (batch_size < 1) throw ConfigError("batch iterator: batch size must be at least 1");
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch_batches(std::size_t epoch) const {
  std::vector<std::size_t> order(n_);
  for (std::size_t i = 0; i < n_; ++i) order[i] = i;
  Rng rng(derive_seed(seed_, "epoch/" + std::to_string(epoch)));
  for (std::size_t i = n_; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n_; s += batch_)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(s + batch_, n_)));
  return out;
}

std::vector<std::size_t> BatchIterator::next() {
  if (order_.empty() || pos_ >= n_) {
    if (!order_.empty()) ++epoch_;
    const auto batches = epoch_batches(epoch_);
    order_.clear();
    for (const auto& b : batches) order_.insert(order_.end(), b.begin(), b.end());
    pos_ = 0;
  }
  const std::size_t end = std::min(pos_ + batch_, n_);
  std::vector<std::size_t> b(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                             order_.begin() + static_cast<std::ptrdiff_t>(end));
  pos_ = end;
  return b;
}

}  // namespace bnclone
