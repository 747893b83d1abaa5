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

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bnclone/checkpoint.hpp"
#include "bnclone/error.hpp"
#include "bnclone/io.hpp"

namespace bnclone {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("bnclone_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

using WavIo = TempDir;
using FeatureIo = TempDir;
using CheckpointIo = TempDir;

TEST_F(WavIo, RoundTripWithinQuantisation) {
  AudioBuffer a;
  a.sample_rate = 16000;
  for (int n = 0; n < 1000; ++n) a.samples.push_back(0.9 * std::sin(0.01 * n * n));
  write_wav(dir_ / "a.wav", a);
  const AudioBuffer b = read_wav(dir_ / "a.wav");
  ASSERT_EQ(b.samples.size(), a.samples.size());
  EXPECT_EQ(b.sample_rate, 16000);
  for (std::size_t n = 0; n < a.samples.size(); ++n) EXPECT_NEAR(b.samples[n], a.samples[n], 1.0 / 32767);
}

TEST_F(WavIo, ClipsOutOfRange) {
  AudioBuffer a;
  a.samples = {2.0, -3.0, 0.0};
  write_wav(dir_ / "c.wav", a);
  const AudioBuffer b = read_wav(dir_ / "c.wav");
  EXPECT_NEAR(b.samples[0], 1.0, 1e-4);
  EXPECT_NEAR(b.samples[1], -1.0, 1e-4);
  EXPECT_EQ(b.samples[2], 0.0);
}

TEST_F(WavIo, MissingFileIsIoError) { EXPECT_THROW(read_wav(dir_ / "nope.wav"), IoError); }

TEST_F(WavIo, GarbageIsInputError) {
  std::ofstream(dir_ / "g.wav") << "definitely not a riff file, just text";
  EXPECT_THROW(read_wav(dir_ / "g.wav"), InputError);
}

TEST_F(FeatureIo, RoundTripFloat32) {
  Mat m(3, 4);
  m << 1, 2, 3, 4, -0.5, 0.25, 1e-3, 7, 0, 0, 0, 1;
  write_features(dir_ / "f.bncf", m);
  const Mat r = read_features(dir_ / "f.bncf");
  ASSERT_EQ(r.rows(), 3);
  ASSERT_EQ(r.cols(), 4);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    EXPECT_EQ(r.data()[i], static_cast<double>(static_cast<float>(m.data()[i])));
}

TEST_F(FeatureIo, HeaderLayout) {
  Mat m = Mat::Ones(2, 5);
  write_features(dir_ / "h.bncf", m);
  std::ifstream in(dir_ / "h.bncf", std::ios::binary);
  char magic[4];
  std::uint32_t hdr[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(hdr), sizeof hdr);
  EXPECT_EQ(std::string(magic, 4), "BNCF");
  EXPECT_EQ(hdr[0], kBncfVersion);
  EXPECT_EQ(hdr[1], 2u);
  EXPECT_EQ(hdr[2], 5u);
  EXPECT_EQ(fs::file_size(dir_ / "h.bncf"), 16u + 10u * 4u);
}

TEST_F(FeatureIo, EmptyMatrix) {
  write_features(dir_ / "e.bncf", Mat(0, 7));
  const Mat r = read_features(dir_ / "e.bncf");
  EXPECT_EQ(r.rows(), 0);
  EXPECT_EQ(r.cols(), 7);
}

TEST_F(FeatureIo, TruncatedPayloadIsInputError) {
  write_features(dir_ / "t.bncf", Mat::Ones(10, 10));
  fs::resize_file(dir_ / "t.bncf", 100);
  EXPECT_THROW(read_features(dir_ / "t.bncf"), InputError);
}

TEST_F(FeatureIo, LabelsRoundTripAndKindsDoNotMix) {
  const std::vector<int> labels = {0, 3, 3, 11, 2};
  write_labels(dir_ / "l.bncf", labels);
  EXPECT_EQ(read_labels(dir_ / "l.bncf"), labels);
  EXPECT_THROW(read_features(dir_ / "l.bncf"), InputError);
  write_features(dir_ / "f.bncf", Mat::Ones(2, 2));
  EXPECT_THROW(read_labels(dir_ / "f.bncf"), InputError);
}

TEST_F(CheckpointIo, RoundTrip) {
  Checkpoint ck;
  ck.fingerprint = 0x0123456789abcdefULL;
  ck.meta["kind"] = "unit";
  ck.meta["steps"] = "12";
  Mat a(2, 3);
  a << 1, 2, 3, 4, 5, 6;
  ck.entries.push_back({"layer.w", a});
  ck.entries.push_back({"layer.b", Mat::Zero(1, 3)});
  ck.save(dir_ / "m.bnck");
  const Checkpoint r = Checkpoint::load(dir_ / "m.bnck");
  EXPECT_EQ(r.fingerprint, ck.fingerprint);
  EXPECT_EQ(r.meta, ck.meta);
  EXPECT_EQ(r.get("layer.w", 2, 3), a);
  EXPECT_THROW(r.get("layer.w", 3, 2), DataError);
  EXPECT_THROW(r.get("missing", 1, 1), DataError);
  EXPECT_THROW(r.meta_at("absent"), DataError);
}

TEST_F(CheckpointIo, BadMagic) {
  std::ofstream(dir_ / "x.bnck") << "XXXXXXXXXXXXXXXXXXXXXXXX";
  EXPECT_THROW(Checkpoint::load(dir_ / "x.bnck"), DataError);
  EXPECT_THROW(Checkpoint::load(dir_ / "absent.bnck"), IoError);
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

}  // namespace
}  // namespace bnclone
