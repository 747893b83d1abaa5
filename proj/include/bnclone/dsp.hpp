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

// Framing, bark-frequency cepstral analysis, autocorrelation pitch and a
// deterministic cepstral-envelope synthesizer for listening to features.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bnclone/tensor.hpp"

namespace bnclone {

struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  // Throws InputError for a nonpositive rate or non-finite samples.
  void validate() const;
  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

struct FrameSpec {
  int window_len = 400;
  int hop_len = 160;
  int sample_rate = 16000;

  // Throws ConfigError unless 0 < hop_len <= window_len and sample_rate > 0.
  void validate() const;
  std::size_t frame_count(std::size_t n_samples) const;
};

struct AcousticFrame {
  std::vector<double> bfcc;
  double pitch_period = 0.0;       // samples
  double pitch_correlation = 0.0;  // [0, 1]
};

struct AcousticSeq {
  std::vector<AcousticFrame> frames;
  FrameSpec frame_spec;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
  // Row t = [bfcc..., period, correlation].
  Mat to_matrix() const;
  static AcousticSeq from_matrix(const Mat& m, const FrameSpec& spec);
};

struct DspConfig {
  int sample_rate = 16000;
  int window_len = 400;
  int hop_len = 160;
  int n_bands = 18;
  int n_bfcc = 18;
  double floor_eps = 1e-10;
  int min_period = 32;
  int max_period = 200;
  std::uint64_t synth_seed = 7;

  FrameSpec frame_spec() const { return {window_len, hop_len, sample_rate}; }
  int frame_dim() const { return n_bfcc + 2; }
  void validate() const;
};

// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

// Zwicker bark scale and its numeric inverse.
double hz_to_bark(double hz);
double bark_to_hz(double bark);

// Hann-windowed frames, no tail padding. Empty when audio is shorter than a window.
std::vector<std::vector<double>> frame_signal(const AudioBuffer& audio, const FrameSpec& spec);

// Triangular bands with centres equally spaced on the bark scale from 0 Hz
// to Nyquist. Adjacent triangles overlap so the weights of every DFT bin sum
// to one.
class BarkFilterbank {
 public:
  BarkFilterbank(int n_bands, int n_fft, int sample_rate);
  int n_bands() const { return static_cast<int>(weights_.rows()); }
  int n_bins() const { return static_cast<int>(weights_.cols()); }
  // n_bands x (n_fft/2 + 1).
  const Eigen::MatrixXd& weights() const { return weights_; }

 private:
  Eigen::MatrixXd weights_;
};

// Orthonormal DCT-II and its inverse (DCT-III).
std::vector<double> dct_ii(std::span<const double> x);
std::vector<double> idct_ii(std::span<const double> c, std::size_t n_out);

// Smallest power of two >= n.
int fft_size_for(int n);

// |DFT|^2 of the frame zero-padded to fft_size_for(frame.size()), bins 0..n_fft/2.
std::vector<double> power_spectrum(std::span<const double> frame);

// Inverse of a half spectrum (bins 0..n/2) to n real samples, scaled by 1/n.
std::vector<double> inverse_real_fft(std::span<const std::complex<double>> half_spectrum, int n);

// Band energies -> log with max(E, floor_eps) -> orthonormal DCT-II, first
// n_bfcc coefficients. Throws ConfigError when n_bfcc > n_bands and InputError
// on NaN input.
std::vector<double> bfcc(std::span<const double> frame, int n_bands, int n_bfcc, double floor_eps,
                         int sample_rate = 16000);

struct PitchEstimate {
  double period = 0.0;
  double correlation = 0.0;
};

// Argmax of the normalised autocorrelation over lags [min_period,
// max_period]. Frames with energy below floor_eps give (0, 0).
PitchEstimate pitch_estimate(std::span<const double> frame, int min_period, int max_period,
                             double floor_eps = 1e-10);

AcousticSeq analyze(const AudioBuffer& audio, const DspConfig& cfg);

AudioBuffer synthesize(const AcousticSeq& features, const DspConfig& cfg);

}  // namespace bnclone
