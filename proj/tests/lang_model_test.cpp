// tests/lang_model_test.cpp
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

#include "sttkit/lang_model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace sttkit;

namespace {

// "a b a b" bigram fixture. Hand counts: a=2, b=2, </s>=1, <unk> floor=1
// (unigram total 6); bigrams (<s>,a)=1, (a,b)=2, (b,a)=1, (b,</s>)=1.
NGramModel abab_model() {
  return train({{"a", "b", "a", "b"}}, 2);
}

}  // namespace

TEST(Train, HandCountedBigrams) {
  const auto model = abab_model();
  EXPECT_EQ(model.counts[0].at("a"), 2u);
  EXPECT_EQ(model.counts[0].at("b"), 2u);
  EXPECT_EQ(model.counts[1].at("a b"), 2u);
  EXPECT_EQ(model.counts[1].at("b a"), 1u);
  EXPECT_EQ(model.counts[1].at("<s> a"), 1u);
  EXPECT_EQ(model.counts[1].at("b </s>"), 1u);
  EXPECT_EQ(model.context_totals[0].at(""), 6u);  // 5 events + <unk> floor
  EXPECT_EQ(model.context_totals[1].at("a"), 2u);
}

TEST(Train, VocabularyIncludesSpecials) {
  const auto model = train({{"a"}}, 1);
  EXPECT_EQ(model.vocabulary,
            (std::set<std::string>{"a", kUnkToken, kBosToken, kEosToken}));
}

TEST(Train, MinCountMapsRareTokensToUnk) {
  const auto model = train({{"common", "common", "rare"}}, 1, 2);
  EXPECT_EQ(model.counts[0].at("common"), 2u);
  EXPECT_EQ(model.counts[0].at(kUnkToken), 1u);
  EXPECT_EQ(model.counts[0].count("rare"), 0u);
}

TEST(Train, EmptyCorpusRejected) {
  try {
    train({}, 2);
    FAIL() << "expected InvalidCorpus";
  } catch (const SttError& e) {
    EXPECT_EQ(e.code(), Err::InvalidCorpus);
  }
}

TEST(Train, DeterministicGivenCorpusOrder) {
  const std::vector<std::vector<std::string>> corpus = {{"x", "y"}, {"y", "z"}};
  const auto m1 = train(corpus, 3);
  const auto m2 = train(corpus, 3);
  EXPECT_EQ(m1.counts[0].size(), m2.counts[0].size());
  EXPECT_EQ(logprob(m1, {"x", "y"}), logprob(m2, {"x", "y"}));
}

TEST(LogProb, PureBigramWeightsGiveMleChain) {
  auto model = abab_model();
  model.interpolation_weights = {0.0, 1.0};
  // P(a|<s>) = 1/1, P(b|a) = 2/2, P(</s>|b) = 1/2.
  EXPECT_NEAR(logprob(model, {"a", "b"}), std::log10(0.5), 1e-12);
}

TEST(LogProb, UnigramCollapse) {
  auto model = abab_model();
  model.interpolation_weights = {1.0, 0.0};
  // P(a) = count(a) / total = 2/6 with the <unk> floor in the total.
  EXPECT_NEAR(conditional_prob(model, {"b"}, "a"), 2.0 / 6.0, 1e-12);
  EXPECT_NEAR(logprob(model, {"a"}),
              std::log10(2.0 / 6.0) + std::log10(1.0 / 6.0), 1e-12);
}

TEST(LogProb, UnknownTokenKeepsFiniteScore) {
  auto model = abab_model();
  model.interpolation_weights = {1.0, 0.0};
  const double lp = logprob(model, {"never-seen"});
  EXPECT_TRUE(std::isfinite(lp));
  EXPECT_NEAR(conditional_prob(model, {}, kUnkToken), 1.0 / 6.0, 1e-12);
}

TEST(LogProb, UnseenContextAtPureHigherOrderIsMinusInfinity) {
  auto model = abab_model();
  model.interpolation_weights = {0.0, 1.0};
  // (<s>, b) was never observed, and the unigram order has zero weight.
  EXPECT_EQ(logprob(model, {"b"}), -std::numeric_limits<double>::infinity());
}

TEST(LogProb, EmptySequenceRejected) {
  const auto model = abab_model();
  EXPECT_THROW(logprob(model, {}), SttError);
}

TEST(ConditionalProb, SumsToOneOverVocabularyForObservedContexts) {
  const auto model = abab_model();
  for (const std::string ctx_tok : {"<s>", "a", "b"}) {
    double total = 0.0;
    for (const auto& w : model.vocabulary) total += conditional_prob(model, {ctx_tok}, w);
    ASSERT_NEAR(total, 1.0, 1e-9) << "context " << ctx_tok;
  }
}

TEST(Perplexity, UniformUnigramEqualsEffectiveVocabulary) {
  const auto model = train({{"a", "b", "c", "d"}}, 1);
  // Five scored events (four tokens plus </s>) plus the <unk> floor give
  // six equally likely outcomes.
  EXPECT_NEAR(perplexity(model, {{"a", "b", "c", "d"}}), 6.0, 1e-9);
}

TEST(Perplexity, TrainingOrderBeatsShuffledOrder) {
  const auto model = abab_model();
  const double trained = perplexity(model, {{"a", "b", "a", "b"}});
  const double shuffled = perplexity(model, {{"b", "a", "b", "a"}});
  EXPECT_LE(trained, shuffled);
}

TEST(Perplexity, DeterministicBigramsGivePerplexityOne) {
  auto model = train({{"a", "b", "c"}}, 2);
  model.interpolation_weights = {0.0, 1.0};
  EXPECT_NEAR(perplexity(model, {{"a", "b", "c"}}), 1.0, 1e-12);
}

TEST(Rescore, ZeroWeightIsIdentityPermutation) {
  const auto model = abab_model();
  const std::vector<std::pair<std::vector<std::string>, double>> nbest = {
      {{"a"}, -1.0}, {{"b"}, -1.0}, {{"a", "b"}, -2.0}};
  const auto out = rescore(nbest, model, {0.0, 1.0});
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].tokens, nbest[0].first);
  EXPECT_EQ(out[1].tokens, nbest[1].first);
  EXPECT_EQ(out[2].tokens, nbest[2].first);
  EXPECT_DOUBLE_EQ(out[0].combined, -1.0);
}

TEST(Rescore, DomainCorpusFlipsConfusablePair) {
  // Office corpus: "send the file" x2, "send the report". Unigram totals
  // with the <unk> floor: send=3, the=3, file=2, report=1, </s>=3 -> 13.
  const auto model = train({{"send", "the", "file"},
                            {"send", "the", "file"},
                            {"send", "the", "report"}},
                           2);
  const std::vector<std::pair<std::vector<std::string>, double>> nbest = {
      {{"sand", "the", "file"}, -5.0}, {{"send", "the", "file"}, -5.0}};
  const auto out = rescore(nbest, model, {1.0, 1.0});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].tokens[0], "send");

  // Hand-derived interpolated chain for the winning hypothesis:
  // P(send|<s>) = (3/13 + 1)/2 = 8/13, P(the|send) = 8/13,
  // P(file|the) = (2/13 + 2/3)/2 = 16/39, P(</s>|file) = 8/13.
  const double expected_send = -5.0 + 3.0 * std::log10(8.0 / 13.0) + std::log10(16.0 / 39.0);
  EXPECT_NEAR(out[0].combined, expected_send, 1e-9);

  // And the losing one: P(<unk>|<s>) = 1/26, P(the|<unk>) = 3/26.
  const double expected_sand = -5.0 + std::log10(1.0 / 26.0) + std::log10(3.0 / 26.0) +
                               std::log10(16.0 / 39.0) + std::log10(8.0 / 13.0);
  EXPECT_NEAR(out[1].combined, expected_sand, 1e-9);
}

TEST(Rescore, SingletonUnchanged) {
  const auto model = abab_model();
  const std::vector<std::pair<std::vector<std::string>, double>> nbest = {{{"a"}, -3.0}};
  const auto out = rescore(nbest, model);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].tokens, nbest[0].first);
}

TEST(Rescore, InvariantToConstantAcousticShift) {
  const auto model = train({{"send", "the", "file"}, {"read", "the", "report"}}, 2);
  std::vector<std::pair<std::vector<std::string>, double>> nbest = {
      {{"read", "the", "file"}, -4.0},
      {{"send", "the", "file"}, -4.2},
      {{"send", "the", "report"}, -6.0}};
  const auto base = rescore(nbest, model, {1.0, 1.0});
  for (auto& [tokens, score] : nbest) score += 7.5;
  const auto shifted = rescore(nbest, model, {1.0, 1.0});
  ASSERT_EQ(base.size(), shifted.size());
  for (size_t i = 0; i < base.size(); ++i) {
    ASSERT_EQ(base[i].tokens, shifted[i].tokens);
    ASSERT_NEAR(shifted[i].combined - base[i].combined, 7.5, 1e-9);
  }
}

TEST(Serialization, RoundTripPreservesScores) {
  const auto model = train({{"send", "the", "file"}, {"send", "the", "report"}}, 2, 1, "office-v1");
  std::stringstream buf;
  save_ngram_model(model, buf);
  const auto loaded = load_ngram_model(buf);
  EXPECT_EQ(loaded.order, 2);
  EXPECT_EQ(loaded.model_id, "office-v1");
  for (const auto& tokens : std::vector<std::vector<std::string>>{
           {"send", "the", "file"}, {"read", "the", "file"}, {"send"}}) {
    ASSERT_NEAR(logprob(model, tokens), logprob(loaded, tokens), 1e-12);
  }
}

TEST(Serialization, SaveIsDeterministic) {
  const auto model = train({{"b", "a"}, {"a", "b"}}, 2);
  std::stringstream s1, s2;
  save_ngram_model(model, s1);
  save_ngram_model(model, s2);
  EXPECT_EQ(s1.str(), s2.str());
  EXPECT_EQ(s1.str().rfind("ngram 2 custom\n", 0), 0u);
}

TEST(Serialization, MalformedFilesRejected) {
  std::stringstream empty;
  EXPECT_THROW(load_ngram_model(empty), SttError);
  std::stringstream bad_header("bigram 2 x\n");
  EXPECT_THROW(load_ngram_model(bad_header), SttError);
  std::stringstream bad_arity("ngram 1 x\n3 a b c\n");
  EXPECT_THROW(load_ngram_model(bad_arity), SttError);
}
