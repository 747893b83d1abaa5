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

#include "bnclone/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>

#include <fftw3.h>

#include "bnclone/error.hpp"

namespace bnclone {

namespace {

// Cached FFTW plans. FFTW_ESTIMATE keeps plan selection deterministic.
class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    fwd_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const { return n_; }
  double* in() { return in_; }
  fftw_complex* out() { return out_; }
  void forward() { fftw_execute(fwd_); }
  // Unnormalised inverse, result in in().
  void inverse() { fftw_execute(inv_); }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

RealFft& fft_for(int n) {
  thread_local std::map<int, std::unique_ptr<RealFft>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<RealFft>(n);
  return *slot;
}

}  // namespace

void AudioBuffer::validate() const {
  if (sample_rate <= 0) throw InputError("audio: sample rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!std::isfinite(samples[i]))
      throw InputError("audio: non-finite sample at index " + std::to_string(i));
}

void FrameSpec::validate() const {
  if (window_len <= 0 || hop_len <= 0 || hop_len > window_len)
    throw ConfigError("frame spec: require 0 < hop_len <= window_len (got hop " +
                      std::to_string(hop_len) + ", window " + std::to_string(window_len) + ")");
  if (sample_rate <= 0) throw ConfigError("frame spec: sample rate must be positive");
}

std::size_t FrameSpec::frame_count(std::size_t n) const {
  const auto w = static_cast<std::size_t>(window_len);
  if (n < w) return 0;
  return 1 + (n - w) / static_cast<std::size_t>(hop_len);
}

Mat AcousticSeq::to_matrix() const {
  if (frames.empty()) return Mat(0, 0);
  const auto d = static_cast<Eigen::Index>(frames[0].bfcc.size());
  Mat m(static_cast<Eigen::Index>(frames.size()), d + 2);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    if (static_cast<Eigen::Index>(frames[t].bfcc.size()) != d)
      throw ShapeError("acoustic sequence: frame " + std::to_string(t) + " has a different width");
    for (Eigen::Index k = 0; k < d; ++k) m(r, k) = frames[t].bfcc[static_cast<std::size_t>(k)];
    m(r, d) = frames[t].pitch_period;
    m(r, d + 1) = frames[t].pitch_correlation;
  }
  return m;
}

AcousticSeq AcousticSeq::from_matrix(const Mat& m, const FrameSpec& spec) {
  AcousticSeq seq;
  seq.frame_spec = spec;
  if (m.rows() == 0) return seq;
  if (m.cols() < 3) throw ShapeError("acoustic sequence: need at least 3 columns");
  const Eigen::Index d = m.cols() - 2;
  seq.frames.resize(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    AcousticFrame& f = seq.frames[static_cast<std::size_t>(r)];
    f.bfcc.assign(m.row(r).data(), m.row(r).data() + d);
    f.pitch_period = std::max(0.0, m(r, d));
    f.pitch_correlation = std::clamp(m(r, d + 1), 0.0, 1.0);
  }
  return seq;
}

void DspConfig::validate() const {
  frame_spec().validate();
  if (n_bands < 2) throw ConfigError("dsp: n_bands must be at least 2");
  if (n_bfcc < 1 || n_bfcc > n_bands)
    throw ConfigError("dsp: n_bfcc (" + std::to_string(n_bfcc) + ") must lie in [1, n_bands=" +
                      std::to_string(n_bands) + "]");
  if (!(floor_eps > 0.0)) throw ConfigError("dsp: floor_eps must be positive");
  if (min_period <= 0 || min_period >= max_period || max_period >= window_len)
    throw ConfigError("dsp: require 0 < min_period < max_period < window_len");
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

double hz_to_bark(double hz) {
  return 13.0 * std::atan(0.00076 * hz) + 3.5 * std::atan((hz / 7500.0) * (hz / 7500.0));
}

double bark_to_hz(double bark) {
  double lo = 0.0, hi = 100000.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (hz_to_bark(mid) < bark) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<std::vector<double>> frame_signal(const AudioBuffer& audio, const FrameSpec& spec) {
  spec.validate();
  const std::size_t n = spec.frame_count(audio.samples.size());
  const std::vector<double> w = hann_window(spec.window_len);
  std::vector<std::vector<double>> frames(n, std::vector<double>(w.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t off = i * static_cast<std::size_t>(spec.hop_len);
    for (std::size_t k = 0; k < w.size(); ++k) frames[i][k] = audio.samples[off + k] * w[k];
  }
  return frames;
}

BarkFilterbank::BarkFilterbank(int n_bands, int n_fft, int sample_rate) {
  if (n_bands < 2) throw ConfigError("filterbank: need at least 2 bands");
  const int n_bins = n_fft / 2 + 1;
  weights_ = Eigen::MatrixXd::Zero(n_bands, n_bins);
  const double top = hz_to_bark(0.5 * sample_rate);
  for (int k = 0; k < n_bins; ++k) {
    const double hz = static_cast<double>(k) * sample_rate / n_fft;
    const double u = hz_to_bark(hz) / top * (n_bands - 1);
    const int b = std::min(static_cast<int>(std::floor(u)), n_bands - 1);
    const double frac = u - b;
    weights_(b, k) += 1.0 - frac;
    if (b + 1 < n_bands) weights_(b + 1, k) += frac;
  }
}

std::vector<double> dct_ii(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> c(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) * (i + 0.5) / n);
    c[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return c;
}

std::vector<double> idct_ii(std::span<const double> c, std::size_t n) {
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < c.size() && k < n; ++k)
      s += c[k] * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n)) *
           std::cos(std::numbers::pi * static_cast<double>(k) * (i + 0.5) / n);
    x[i] = s;
  }
  return x;
}

int fft_size_for(int n) {
  int m = 1;
  while (m < n) m <<= 1;
  return m;
}

std::vector<double> power_spectrum(std::span<const double> frame) {
  const int n_fft = fft_size_for(static_cast<int>(frame.size()));
  RealFft& fft = fft_for(n_fft);
  std::fill(fft.in(), fft.in() + n_fft, 0.0);
  std::copy(frame.begin(), frame.end(), fft.in());
  fft.forward();
  std::vector<double> p(static_cast<std::size_t>(n_fft / 2 + 1));
  for (std::size_t k = 0; k < p.size(); ++k)
    p[k] = fft.out()[k][0] * fft.out()[k][0] + fft.out()[k][1] * fft.out()[k][1];
  return p;
}

std::vector<double> inverse_real_fft(std::span<const std::complex<double>> half, int n) {
  if (n < 1 || half.size() != static_cast<std::size_t>(n / 2 + 1))
    throw ShapeError("inverse_real_fft: need n/2 + 1 bins for n = " + std::to_string(n));
  RealFft& fft = fft_for(n);
  for (std::size_t k = 0; k < half.size(); ++k) {
    fft.out()[k][0] = half[k].real();
    fft.out()[k][1] = half[k].imag();
  }
  fft.inverse();
  std::vector<double> out(fft.in(), fft.in() + n);
  for (double& x : out) x /= n;
  return out;
}

namespace {

const BarkFilterbank& filterbank_for(int n_bands, int n_fft, int sample_rate) {
  thread_local std::map<std::tuple<int, int, int>, std::unique_ptr<BarkFilterbank>> cache;
  auto& slot = cache[{n_bands, n_fft, sample_rate}];
  if (!slot) slot = std::make_unique<BarkFilterbank>(n_bands, n_fft, sample_rate);
  return *slot;
}

}  // namespace

std::vector<double> bfcc(std::span<const double> frame, int n_bands, int n_bfcc, double floor_eps,
                         int sample_rate) {
  if (n_bfcc < 1 || n_bfcc > n_bands)
    throw ConfigError("bfcc: n_bfcc (" + std::to_string(n_bfcc) + ") must lie in [1, n_bands=" +
                      std::to_string(n_bands) + "]");
  if (!(floor_eps > 0.0)) throw ConfigError("bfcc: floor_eps must be positive");
  for (std::size_t i = 0; i < frame.size(); ++i)
    if (std::isnan(frame[i])) throw InputError("bfcc: NaN at sample " + std::to_string(i));
  const std::vector<double> p = power_spectrum(frame);
  const BarkFilterbank& fb =
      filterbank_for(n_bands, fft_size_for(static_cast<int>(frame.size())), sample_rate);
  std::vector<double> logE(static_cast<std::size_t>(n_bands));
  const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Eigen::Index>(p.size()));
  const Eigen::VectorXd e = fb.weights() * pv;
  for (int b = 0; b < n_bands; ++b) logE[static_cast<std::size_t>(b)] = std::log(std::max(e(b), floor_eps));
  std::vector<double> c = dct_ii(logE);
  c.resize(static_cast<std::size_t>(n_bfcc));
  return c;
}

PitchEstimate pitch_estimate(std::span<const double> frame, int min_period, int max_period,
                             double floor_eps) {
  const auto n = static_cast<int>(frame.size());
  if (min_period <= 0 || min_period >= max_period || max_period >= n)
    throw ConfigError("pitch: require 0 < min_period < max_period < frame length (got " +
                      std::to_string(min_period) + ", " + std::to_string(max_period) + ", " +
                      std::to_string(n) + ")");
  double energy = 0.0;
  for (double x : frame) energy += x * x;
  if (!(energy >= floor_eps)) return {};
  PitchEstimate best;
  double best_r = -2.0;
  for (int lag = min_period; lag <= max_period; ++lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (int i = 0; i + lag < n; ++i) {
      const double a = frame[static_cast<std::size_t>(i)];
      const double b = frame[static_cast<std::size_t>(i + lag)];
      num += a * b;
      e0 += a * a;
      e1 += b * b;
    }
    const double den = std::sqrt(e0 * e1);
    const double r = den > 0.0 ? num / den : 0.0;
    // Ties within rounding go to the shorter lag so exact multiples of the
    // period do not win.
    if (r > best_r + 1e-12) {
      best_r = r;
      best.period = lag;
    }
  }
  best.correlation = std::clamp(best_r, 0.0, 1.0);
  if (best.correlation == 0.0) best.period = 0.0;
  return best;
}

AcousticSeq analyze(const AudioBuffer& audio, const DspConfig& cfg) {
  cfg.validate();
  audio.validate();
  if (audio.sample_rate != cfg.sample_rate)
    throw InputError("analyze: audio sample rate " + std::to_string(audio.sample_rate) +
                     " does not match configured " + std::to_string(cfg.sample_rate));
  const FrameSpec spec = cfg.frame_spec();
  const std::size_t n = spec.frame_count(audio.samples.size());
  const std::vector<double> w = hann_window(cfg.window_len);
  AcousticSeq seq;
  seq.frame_spec = spec;
  seq.frames.resize(n);
  std::vector<double> windowed(w.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> raw(audio.samples.data() + i * static_cast<std::size_t>(cfg.hop_len),
                                      w.size());
    for (std::size_t k = 0; k < w.size(); ++k) windowed[k] = raw[k] * w[k];
    AcousticFrame& f = seq.frames[i];
    f.bfcc = bfcc(windowed, cfg.n_bands, cfg.n_bfcc, cfg.floor_eps, cfg.sample_rate);
    const PitchEstimate p = pitch_estimate(raw, cfg.min_period, cfg.max_period, cfg.floor_eps);
    f.pitch_period = p.period;
    f.pitch_correlation = p.correlation;
  }
  return seq;
}

AudioBuffer synthesize(const AcousticSeq& features, const DspConfig& cfg) {
  cfg.validate();
  AudioBuffer out;
  out.sample_rate = cfg.sample_rate;
  const std::size_t n_frames = features.size();
  if (n_frames == 0) return out;

  const int win = cfg.window_len, hop = cfg.hop_len;
  const std::size_t len = static_cast<std::size_t>(hop) * n_frames + win - hop;
  const int n_fft = fft_size_for(win);
  const int n_bins = n_fft / 2 + 1;
  const BarkFilterbank& fb = filterbank_for(cfg.n_bands, n_fft, cfg.sample_rate);
  const Eigen::VectorXd band_bins = fb.weights().rowwise().sum();
  const std::vector<double> w = hann_window(win);
  double w2 = 0.0;
  for (double x : w) w2 += x * x;

  // Global excitation tracks keep pulse phase continuous across frames.
  std::vector<double> pulses(len, 0.0), noise(len);
  Rng rng(cfg.synth_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& x : noise) x = gauss(rng);
  double next_pulse = 0.0;
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double period = features.frames[i].pitch_period;
    const double seg_end = static_cast<double>((i + 1) * static_cast<std::size_t>(hop));
    if (period < 2.0) {
      next_pulse = std::max(next_pulse, seg_end);
      continue;
    }
    while (next_pulse < seg_end) {
      const auto k = static_cast<std::size_t>(next_pulse);
      if (k < len) pulses[k] += std::sqrt(period);
      next_pulse += period;
    }
  }

  std::vector<double> acc(len, 0.0), norm(len, 0.0);
  RealFft& fft = fft_for(n_fft);
  std::vector<double> coeffs(static_cast<std::size_t>(cfg.n_bands));
  std::vector<double> amp(static_cast<std::size_t>(n_bins));
  for (std::size_t i = 0; i < n_frames; ++i) {
    const AcousticFrame& f = features.frames[i];
    std::fill(coeffs.begin(), coeffs.end(), 0.0);
    std::copy_n(f.bfcc.begin(), std::min(f.bfcc.size(), coeffs.size()), coeffs.begin());
    const std::vector<double> logE = idct_ii(coeffs, coeffs.size());
    Eigen::VectorXd per_bin(cfg.n_bands);
    for (int b = 0; b < cfg.n_bands; ++b)
      per_bin(b) = std::exp(logE[static_cast<std::size_t>(b)]) / std::max(band_bins(b), 1e-12);
    const Eigen::VectorXd p = fb.weights().transpose() * per_bin;
    for (int k = 0; k < n_bins; ++k) amp[static_cast<std::size_t>(k)] = std::sqrt(p(k) / w2);

    const double voiced = f.pitch_period >= 2.0 ? std::clamp(f.pitch_correlation, 0.0, 1.0) : 0.0;
    const double a = std::sqrt(voiced), b = std::sqrt(1.0 - voiced);
    const std::size_t off = i * static_cast<std::size_t>(hop);
    std::fill(fft.in(), fft.in() + n_fft, 0.0);
    for (int k = 0; k < win; ++k)
      fft.in()[k] = (a * pulses[off + k] + b * noise[off + k]) * w[static_cast<std::size_t>(k)];
    fft.forward();
    for (int k = 0; k < n_bins; ++k) {
      fft.out()[k][0] *= amp[static_cast<std::size_t>(k)];
      fft.out()[k][1] *= amp[static_cast<std::size_t>(k)];
    }
    fft.inverse();
    for (int k = 0; k < win; ++k) {
      acc[off + k] += fft.in()[k] / n_fft;
      norm[off + k] += w[static_cast<std::size_t>(k)];
    }
  }
  out.samples.resize(len);
  for (std::size_t k = 0; k < len; ++k) out.samples[k] = norm[k] > 1e-3 ? acc[k] / norm[k] : acc[k];
  return out;
}

}  // namespace bnclone
