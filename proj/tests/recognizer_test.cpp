// tests/recognizer_test.cpp
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

#include "sttkit/recognizer.hpp"

#include <gtest/gtest.h>

#include <random>

#include "support/fixtures.hpp"
#include "support/test_util.hpp"

using namespace sttkit;

namespace {

std::vector<double> tone_between_silence(double lead_s, double tone_s, double tail_s,
                                         double amp = 0.5) {
  auto out = testutil::make_silence(lead_s, 16000);
  const auto tone = testutil::make_sine(700.0, 16000, tone_s, amp);
  out.insert(out.end(), tone.begin(), tone.end());
  const auto tail = testutil::make_silence(tail_s, 16000);
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

FeatureMatrix single_frame(std::vector<double> values) {
  FeatureMatrix m;
  m.rows = 1;
  m.cols = values.size();
  m.values = std::move(values);
  return m;
}

}  // namespace

TEST(Endpointing, SilenceYieldsNothing) {
  const auto silence = testutil::make_silence(2.0, 16000);
  EXPECT_TRUE(endpoint_segments(silence).empty());
}

TEST(Endpointing, ToneBetweenSilences) {
  const auto audio = tone_between_silence(1.0, 0.5, 1.0);
  const auto segments = endpoint_segments(audio);
  ASSERT_EQ(segments.size(), 1u);
  // Bounds land within one window of the tone edges at 16000..24000.
  EXPECT_LE(std::abs(segments[0].first - 16000), 400);
  EXPECT_LE(std::abs(segments[0].second - 24000), 400);
}

TEST(Endpointing, ShortGapMerges) {
  auto audio = tone_between_silence(1.0, 0.3, 0.1);
  const auto tone2 = testutil::make_sine(700.0, 16000, 0.3, 0.5);
  audio.insert(audio.end(), tone2.begin(), tone2.end());
  const auto tail = testutil::make_silence(1.0, 16000);
  audio.insert(audio.end(), tail.begin(), tail.end());
  const auto segments = endpoint_segments(audio);
  ASSERT_EQ(segments.size(), 1u);  // 100 ms < 200 ms hangover
}

TEST(Endpointing, WideGapSeparates) {
  auto audio = tone_between_silence(1.0, 0.3, 0.5);
  const auto tone2 = testutil::make_sine(700.0, 16000, 0.3, 0.5);
  audio.insert(audio.end(), tone2.begin(), tone2.end());
  const auto tail = testutil::make_silence(1.0, 16000);
  audio.insert(audio.end(), tail.begin(), tail.end());
  EXPECT_EQ(endpoint_segments(audio).size(), 2u);
}

TEST(Endpointing, TinySegmentDiscarded) {
  const auto audio = tone_between_silence(1.0, 0.05, 1.0);
  EXPECT_TRUE(endpoint_segments(audio).empty());  // 50 ms < 100 ms minimum
}

TEST(Dtw, IdentityIsZero) {
  const auto noise = testutil::white_noise(52, 17, 2.0);
  FeatureMatrix m;
  m.rows = 4;
  m.cols = 13;
  m.values = noise;
  EXPECT_DOUBLE_EQ(dtw_distance(m, m), 0.0);
}

TEST(Dtw, SingleCellHandValue) {
  const auto a = single_frame({0.0, 0.0});
  const auto b = single_frame({3.0, 4.0});
  EXPECT_DOUBLE_EQ(dtw_distance(a, b), 5.0);
}

TEST(Dtw, Symmetric) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureMatrix a, b;
    a.rows = 3 + static_cast<size_t>(rng() % 5);
    b.rows = 3 + static_cast<size_t>(rng() % 5);
    a.cols = b.cols = 6;
    a.values.resize(a.rows * a.cols);
    b.values.resize(b.rows * b.cols);
    for (auto& v : a.values) v = dist(rng);
    for (auto& v : b.values) v = dist(rng);
    ASSERT_DOUBLE_EQ(dtw_distance(a, b), dtw_distance(b, a));
  }
}

TEST(Dtw, ColumnMismatchRejected) {
  EXPECT_THROW(dtw_distance(single_frame({1.0}), single_frame({1.0, 2.0})), SttError);
}

TEST(Classify, SelfTemplateWinsWithSoftmaxConfidence) {
  const auto vocab = testutil::tone_vocabulary();
  const auto& features = vocab.model.entries.at("bravo");
  const auto result = classify_segment(features, vocab.model);
  ASSERT_EQ(result.nbest.size(), 5u);
  EXPECT_EQ(result.nbest[0].tokens[0], "bravo");
  EXPECT_DOUBLE_EQ(result.nbest[0].acoustic_logscore, 0.0);

  // Recompute the softmax from the returned distances as a cross-check.
  double total = 0.0;
  for (const auto& hyp : result.nbest) total += std::exp(hyp.acoustic_logscore);
  EXPECT_NEAR(result.nbest[0].token_confidences[0], std::exp(0.0) / total, 1e-12);
  for (size_t i = 1; i < result.nbest.size(); ++i)
    ASSERT_LE(result.nbest[i].acoustic_logscore, result.nbest[i - 1].acoustic_logscore);
}

TEST(Classify, EquidistantTemplatesSplitConfidence) {
  VocabularyModel model;
  model.model_id = "pair";
  model.units = {"one", "two"};
  model.entries.emplace("one", single_frame({0.0, 0.0}));
  model.entries.emplace("two", single_frame({2.0, 0.0}));
  const auto result = classify_segment(single_frame({1.0, 0.0}), model);
  EXPECT_DOUBLE_EQ(result.nbest[0].token_confidences[0], 0.5);
  EXPECT_DOUBLE_EQ(result.nbest[1].token_confidences[0], 0.5);
}

TEST(Classify, HighTemperatureApproachesUniform) {
  const auto vocab = testutil::tone_vocabulary();
  const auto result =
      classify_segment(vocab.model.entries.at("alpha"), vocab.model, 1e6);
  for (const auto& hyp : result.nbest)
    ASSERT_NEAR(hyp.token_confidences[0], 1.0 / 5.0, 1e-3);
}

TEST(Classify, PosteriorRowsAreDistributions) {
  const auto vocab = testutil::tone_vocabulary();
  const auto result = classify_segment(vocab.model.entries.at("delta"), vocab.model);
  ASSERT_EQ(result.posterior_rows.size(), vocab.model.entries.at("delta").rows);
  for (const auto& row : result.posterior_rows) {
    double sum = 0.0;
    for (double p : row) {
      ASSERT_GE(p, 0.0);
      sum += p;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Classify, SelfRecognitionForAllTemplates) {
  const auto vocab = testutil::tone_vocabulary();
  for (const auto& word : vocab.model.units) {
    const auto result = classify_segment(vocab.model.entries.at(word), vocab.model);
    ASSERT_EQ(result.nbest[0].tokens[0], word);
  }
}

TEST(Posteriorgram, CoversWholeFeatureMatrix) {
  const auto vocab = testutil::tone_vocabulary();
  const auto utterance = testutil::build_utterance(vocab, {"alpha", "echo"});
  const auto features = mfcc(utterance);
  const auto pg = posteriorgram(features, vocab.model);
  EXPECT_EQ(pg.units, vocab.model.units);
  ASSERT_EQ(pg.frames.size(), features.rows);
  EXPECT_DOUBLE_EQ(pg.frame_duration, 0.01);
  for (const auto& row : pg.frames) {
    double sum = 0.0;
    for (double p : row) sum += p;
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Session, RequiresTwoVocabularyEntries) {
  VocabularyModel tiny;
  tiny.units = {"solo"};
  tiny.entries.emplace("solo", single_frame({1.0}));
  try {
    open_session(tiny);
    FAIL() << "expected InvalidModel";
  } catch (const SttError& e) {
    EXPECT_EQ(e.code(), Err::InvalidModel);
  }
}

TEST(Session, SilenceOnlyGivesEmptyTranscript) {
  const auto vocab = testutil::tone_vocabulary();
  auto session = open_session(vocab.model, {.source = "silence-test"});
  const auto silence = testutil::make_silence(1.5, 16000);
  EXPECT_EQ(session.accept_frames(silence), std::nullopt);
  const auto transcript = session.finalize();
  EXPECT_TRUE(transcript.segments.empty());
  EXPECT_EQ(transcript.source, "silence-test");
  EXPECT_EQ(transcript.model_id, "tone-five");
}

TEST(Session, PartialAppearsOncePerCommittedSegment) {
  const auto vocab = testutil::tone_vocabulary();
  auto session = open_session(vocab.model);
  const auto audio = testutil::build_utterance(vocab, {"alpha", "alpha"}, 0.5, 0.3, 0.6);

  std::vector<std::string> partials;
  const size_t chunk = 1600;
  for (size_t off = 0; off < audio.size(); off += chunk) {
    const size_t len = std::min(chunk, audio.size() - off);
    const auto partial = session.accept_frames({audio.data() + off, len});
    if (partial) {
      partials.push_back(partial->text);
      EXPECT_TRUE(partial->stable);
    }
  }
  ASSERT_EQ(partials.size(), 2u);
  EXPECT_EQ(partials[0], "alpha");
  EXPECT_EQ(partials[1], "alpha alpha");

  const auto transcript = session.finalize();
  EXPECT_EQ(transcript.text(), "alpha alpha");
}

TEST(Session, FinalizeClosesPendingSegment) {
  const auto vocab = testutil::tone_vocabulary();
  auto session = open_session(vocab.model);
  // Short tail: the word cannot close before finalize.
  const auto audio = testutil::build_utterance(vocab, {"charlie"}, 0.2, 0.3, 0.05);
  session.accept_frames(audio);
  const auto transcript = session.finalize();
  ASSERT_EQ(transcript.segments.size(), 1u);
  EXPECT_EQ(transcript.text(), "charlie");
}

TEST(Session, LifecycleErrors) {
  const auto vocab = testutil::tone_vocabulary();
  auto session = open_session(vocab.model);
  const auto silence = testutil::make_silence(0.1, 16000);
  session.accept_frames(silence);
  session.finalize();
  try {
    session.finalize();
    FAIL() << "expected SessionClosed";
  } catch (const SttError& e) {
    EXPECT_EQ(e.code(), Err::SessionClosed);
  }
  try {
    session.accept_frames(silence);
    FAIL() << "expected SessionClosed";
  } catch (const SttError& e) {
    EXPECT_EQ(e.code(), Err::SessionClosed);
  }
}

TEST(Session, TranscriptInvariantsHold) {
  const auto vocab = testutil::tone_vocabulary();
  auto session = open_session(vocab.model);
  const auto audio =
      testutil::build_utterance(vocab, {"alpha", "bravo", "charlie", "delta", "echo"}, 0.3);
  session.accept_frames(audio);
  const auto transcript = session.finalize();
  ASSERT_EQ(transcript.segments.size(), 5u);
  double prev_end = -1.0;
  for (const auto& seg : transcript.segments) {
    EXPECT_GE(seg.t_start, prev_end);
    EXPECT_LE(seg.t_start, seg.t_end);
    prev_end = seg.t_end;
    ASSERT_FALSE(seg.nbest.empty());
    ASSERT_EQ(seg.nbest[0].tokens.size(), seg.words.size());
    for (size_t i = 0; i < seg.words.size(); ++i)
      EXPECT_EQ(seg.nbest[0].tokens[i], seg.words[i].text);
    for (size_t i = 1; i < seg.nbest.size(); ++i)
      ASSERT_LE(seg.nbest[i].acoustic_logscore, seg.nbest[i - 1].acoustic_logscore);
    for (const auto& word : seg.words) {
      ASSERT_GE(word.confidence, 0.0);
      ASSERT_LE(word.confidence, 1.0);
    }
  }
}

TEST(Session, StreamingMatchesBatchAcrossChunkSizes) {
  const auto vocab = testutil::tone_vocabulary();
  const auto audio = testutil::build_utterance(vocab, {"echo", "alpha", "delta"});

  auto run = [&](size_t chunk) {
    auto session = open_session(vocab.model, {.source = "equiv"});
    if (chunk == 0) {
      session.accept_frames(audio);
    } else {
      for (size_t off = 0; off < audio.size(); off += chunk) {
        const size_t len = std::min(chunk, audio.size() - off);
        session.accept_frames({audio.data() + off, len});
      }
    }
    return session.finalize();
  };

  const auto whole = run(0);
  EXPECT_EQ(whole.text(), "echo alpha delta");
  for (size_t chunk : {size_t{1}, size_t{160}, size_t{4096}}) {
    ASSERT_EQ(run(chunk), whole) << "chunk size " << chunk;
  }
}

TEST(ModelIo, SaveLoadRoundTrip) {
  testutil::TempDir tmp;
  const auto vocab = testutil::tone_vocabulary();
  save_vocabulary_model(vocab.model, tmp.file("model"));
  const auto loaded = load_vocabulary_model(tmp.file("model"));
  EXPECT_EQ(loaded.model_id, "tone-five");
  ASSERT_EQ(loaded.units, vocab.model.units);
  for (const auto& unit : loaded.units) {
    const auto& a = vocab.model.entries.at(unit);
    const auto& b = loaded.entries.at(unit);
    ASSERT_EQ(a.rows, b.rows);
    ASSERT_EQ(a.cols, b.cols);
    ASSERT_EQ(a.values, b.values);  // CSV uses round-trip formatting
  }
}

TEST(ModelIo, RejectsBrokenDirectories) {
  testutil::TempDir tmp;
  EXPECT_THROW(load_vocabulary_model(tmp.file("absent")), SttError);

  std::filesystem::create_directories(tmp.file("dup"));
  testutil::write_text(tmp.file("dup") / "manifest.txt", "w a.csv\nw a.csv\n");
  testutil::write_text(tmp.file("dup") / "a.csv", "1,2\n");
  EXPECT_THROW(load_vocabulary_model(tmp.file("dup")), SttError);

  std::filesystem::create_directories(tmp.file("missing_tmpl"));
  testutil::write_text(tmp.file("missing_tmpl") / "manifest.txt", "w gone.csv\n");
  EXPECT_THROW(load_vocabulary_model(tmp.file("missing_tmpl")), SttError);

  std::filesystem::create_directories(tmp.file("ragged"));
  testutil::write_text(tmp.file("ragged") / "manifest.txt", "w a.csv\nv b.csv\n");
  testutil::write_text(tmp.file("ragged") / "a.csv", "1,2\n");
  testutil::write_text(tmp.file("ragged") / "b.csv", "1,2,3\n");
  EXPECT_THROW(load_vocabulary_model(tmp.file("ragged")), SttError);
}
