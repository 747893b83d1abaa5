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

#pragma once

// Toy phoneme inventory, lexicon-based G2P, the synthetic multi-speaker
// corpus generator, the TSV manifest and a seeded batch iterator.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "bnclone/dsp.hpp"
#include "bnclone/tensor.hpp"

namespace bnclone {

enum class PhoneKind { Vowel, Nasal, Fricative, VoicedFricative, Boundary };

struct PhoneInfo {
  std::string symbol;
  PhoneKind kind;
  // Resonances of the spectral envelope (Hz) with bandwidths and linear gains.
  std::vector<double> formants;
  std::vector<double> bandwidths;
  std::vector<double> gains;
  double level = 1.0;  // target RMS relative to vowels
  int min_frames = 5;
  int max_frames = 8;

  bool voiced() const {
    return kind == PhoneKind::Vowel || kind == PhoneKind::Nasal || kind == PhoneKind::VoicedFricative;
  }
  bool noisy() const { return kind == PhoneKind::Fricative || kind == PhoneKind::VoicedFricative; }
};

// 12 symbols: a i u e o m n s sh f z #. "#" is the word boundary, rendered
// as a short pause.
const std::vector<PhoneInfo>& phone_inventory();
int n_phones();
int boundary_id();
// Throws InputError for an unknown symbol.
int phone_id(std::string_view symbol);
std::string phone_string(const std::vector<int>& ids);

struct Lexicon {
  std::map<std::string, std::vector<int>> entries;
  int inventory_size = 0;

  // Throws DataError when a mapped id is outside the inventory.
  void validate() const;
  // Deterministic toy lexicon of CV words over the inventory.
  static Lexicon toy();
};

// Whitespace-separated tokens looked up in the lexicon. With `boundaries`
// the boundary symbol is inserted between words. Throws InputError listing
// every unknown token.
std::vector<int> g2p(std::string_view text, const Lexicon& lexicon, bool boundaries = true);

struct SpeakerProfile {
  std::string speaker_id;
  double f0_base = 120.0;      // Hz
  double f0_range = 6.0;       // Hz, amplitude of the slow f0 movement
  double spectral_tilt = -6.0; // dB per octave
  double formant_shift = 1.0;  // multiplies every formant

  // Throws ConfigError unless f0_base > 0 and formant_shift in [0.7, 1.3].
  void validate() const;
};

// Draws a profile whose f0 contour stays inside the default pitch search
// range and away from period doubling.
SpeakerProfile random_speaker(std::string speaker_id, Rng& rng);

struct RenderedUtterance {
  AudioBuffer audio;
  std::vector<int> frame_labels;  // one per analysis frame
  std::vector<double> frame_f0;   // generator f0 at each frame centre; 0 when unvoiced
};

// Renders a phoneme string. The audio length is chosen so analyze() yields
// exactly frame_labels.size() frames. Throws InputError on an empty or
// out-of-range phoneme sequence.
RenderedUtterance render_utterance(const std::vector<int>& phones, const SpeakerProfile& speaker,
                                   const DspConfig& dsp, Rng& rng);

// Random text of `min_words`..`max_words` lexicon words.
std::string random_text(const Lexicon& lexicon, int min_words, int max_words, Rng& rng);

struct UtteranceRecord {
  std::string utt_id;
  std::string speaker_id;
  std::vector<int> phonemes;
  std::filesystem::path audio_path;
  std::filesystem::path label_path;  // empty when absent
};

// One line per record: utt_id, speaker_id, phoneme ids, audio path, label
// path, tab separated. Relative paths are resolved against the manifest's
// directory on load.
void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records);
// Throws DataError naming the line for malformed records and the path for
// missing files.
std::vector<UtteranceRecord> load_manifest(const std::filesystem::path& path);

struct CorpusSpec {
  std::string name = "train";
  std::string speaker_prefix = "spk";
  int n_speakers = 20;
  int utts_per_speaker = 30;
  std::uint64_t seed = 1;
  int min_words = 2;
  int max_words = 3;
  // When set, speakers use these profiles instead of random draws.
  std::vector<SpeakerProfile> speakers;
};

struct CorpusResult {
  std::vector<UtteranceRecord> records;
  std::vector<SpeakerProfile> speakers;
  std::filesystem::path manifest;
};

// Writes <out>/<name>/<utt>.wav, <utt>.lab (BNCF int labels), <out>/<name>.tsv
// and <out>/<name>_speakers.tsv. Byte-identical for identical inputs.
CorpusResult generate_corpus(const CorpusSpec& spec, const DspConfig& dsp,
                             const std::filesystem::path& out_dir);

void write_speakers(const std::filesystem::path& path, const std::vector<SpeakerProfile>& speakers);
std::vector<SpeakerProfile> read_speakers(const std::filesystem::path& path);

// Endless seeded batching over n items: each epoch is a fresh shuffle
// determined by (seed, epoch); the final short batch of an epoch is kept.
class BatchIterator {
 public:
  // Throws DataError when n == 0 and ConfigError when batch_size < 1.
  BatchIterator(std::size_t n, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();
  std::size_t epoch() const { return epoch_; }
  // All batches of one epoch, without advancing the iterator.
  std::vector<std::vector<std::size_t>> epoch_batches(std::size_t epoch) const;

 private:
  std::size_t n_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t pos_ = 0;
  std::vector<std::size_t> order_;
};

// Seed for a named sub-stream, so components draw independent sequences.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace bnclone
