// sttkit/lang_model.hpp
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
//
// Interpolated (Jelinek-Mercer) n-gram language model: training from a
// tokenized corpus, log10 scoring, perplexity, and n-best rescoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "sttkit/errors.hpp"

namespace sttkit {

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kBosToken = "<s>";
inline constexpr const char* kEosToken = "</s>";

struct NGramModel {
  int order = 0;
  std::string model_id;
  /// counts[k-1] maps a space-joined k-gram to its count. Only k-grams
  /// ending at a predicted position are counted, so <s> never appears as
  /// a unigram event.
  std::vector<std::unordered_map<std::string, uint64_t>> counts;
  /// context_totals[len] maps a space-joined context of `len` tokens to
  /// the total count of its continuations (len 0 uses the empty string).
  std::vector<std::unordered_map<std::string, uint64_t>> context_totals;
  std::set<std::string> vocabulary;  // includes <unk>, <s>, </s>
  std::vector<double> interpolation_weights;  // size == order, sums to 1
};

namespace detail {

inline std::string join_tokens(const std::vector<std::string>& tokens, size_t first, size_t count) {
  std::string key;
  for (size_t i = 0; i < count; ++i) {
    if (i) key += ' ';
    key += tokens[first + i];
  }
  return key;
}

}  // namespace detail

/// Train an order-n model. Sentences are padded with n-1 <s> and one
/// </s>; tokens seen fewer than min_count times map to <unk>, and <unk>
/// always keeps at least a floor count of one so out-of-vocabulary tokens
/// stay scorable. Interpolation weights start uniform.
inline NGramModel train(const std::vector<std::vector<std::string>>& corpus, int order,
                        int min_count = 1, const std::string& model_id = "custom") {
  if (corpus.empty()) fail(Err::InvalidCorpus, "training corpus is empty");
  if (order < 1) fail(Err::InvalidParameter, "order must be >= 1");

  std::unordered_map<std::string, uint64_t> raw_counts;
  for (const auto& sentence : corpus)
    for (const auto& tok : sentence) ++raw_counts[tok];

  NGramModel model;
  model.order = order;
  model.model_id = model_id;
  model.counts.resize(static_cast<size_t>(order));
  model.context_totals.resize(static_cast<size_t>(order));
  model.interpolation_weights.assign(static_cast<size_t>(order), 1.0 / order);
  model.vocabulary = {kUnkToken, kBosToken, kEosToken};

  for (const auto& sentence : corpus) {
    std::vector<std::string> padded(static_cast<size_t>(order) - 1, kBosToken);
    for (const auto& tok : sentence) {
      const auto it = raw_counts.find(tok);
      const std::string& mapped =
          (it->second < static_cast<uint64_t>(min_count)) ? std::string(kUnkToken) : tok;
      padded.push_back(mapped);
      model.vocabulary.insert(mapped);
    }
    padded.push_back(kEosToken);
    // Predicted positions are the sentence tokens plus </s>; the leading
    // <s> padding supplies context only.
    for (size_t p = static_cast<size_t>(order) - 1; p < padded.size(); ++p) {
      for (size_t k = 1; k <= static_cast<size_t>(order); ++k) {
        if (p + 1 < k) break;
        const size_t first = p + 1 - k;
        ++model.counts[k - 1][detail::join_tokens(padded, first, k)];
        ++model.context_totals[k - 1][detail::join_tokens(padded, first, k - 1)];
      }
    }
  }

  auto& unigrams = model.counts[0];
  if (unigrams.find(kUnkToken) == unigrams.end() || unigrams[kUnkToken] == 0) {
    unigrams[kUnkToken] = 1;
    ++model.context_totals[0][""];
  }
  return model;
}

/// Interpolated probability of `token` given up to order-1 preceding
/// tokens. Orders whose context was never observed contribute zero mass.
/// Tokens are used as given; callers map OOV tokens to <unk> first.
inline double conditional_prob(const NGramModel& model, const std::vector<std::string>& context,
                               const std::string& token) {
  double prob = 0.0;
  const size_t max_ctx = std::min(context.size(), static_cast<size_t>(model.order) - 1);
  for (size_t k = 1; k <= static_cast<size_t>(model.order); ++k) {
    const size_t ctx_len = k - 1;
    if (ctx_len > max_ctx) break;
    const std::string ctx_key =
        detail::join_tokens(context, context.size() - ctx_len, ctx_len);
    const auto totals_it = model.context_totals[ctx_len].find(ctx_key);
    if (totals_it == model.context_totals[ctx_len].end() || totals_it->second == 0) continue;
    const std::string gram_key = ctx_key.empty() ? token : ctx_key + " " + token;
    const auto count_it = model.counts[k - 1].find(gram_key);
    if (count_it == model.counts[k - 1].end()) continue;
    prob += model.interpolation_weights[k - 1] * static_cast<double>(count_it->second) /
            static_cast<double>(totals_it->second);
  }
  return prob;
}

inline std::string map_oov(const NGramModel& model, const std::string& token) {
  return model.vocabulary.count(token) ? token : std::string(kUnkToken);
}

/// log10 probability of a token sequence scored as one sentence: the
/// sequence is padded like training data, and </s> is scored too. Returns
/// -infinity when some position gets zero mass at every active order.
inline double logprob(const NGramModel& model, const std::vector<std::string>& tokens) {
  if (tokens.empty()) fail(Err::InvalidParameter, "cannot score an empty token sequence");
  std::vector<std::string> padded(static_cast<size_t>(model.order) - 1, kBosToken);
  for (const auto& tok : tokens) padded.push_back(map_oov(model, tok));
  padded.push_back(kEosToken);

  double total = 0.0;
  for (size_t p = static_cast<size_t>(model.order) - 1; p < padded.size(); ++p) {
    const std::vector<std::string> context(padded.begin(), padded.begin() + static_cast<long>(p));
    const double prob = conditional_prob(model, context, padded[p]);
    if (prob <= 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log10(prob);
  }
  return total;
}

/// 10^(-mean log10 prob), with </s> included in the token count.
inline double perplexity(const NGramModel& model, const std::vector<std::vector<std::string>>& corpus) {
  if (corpus.empty()) fail(Err::InvalidCorpus, "perplexity corpus is empty");
  double total_lp = 0.0;
  size_t tokens = 0;
  for (const auto& sentence : corpus) {
    total_lp += logprob(model, sentence);
    tokens += sentence.size() + 1;
  }
  return std::pow(10.0, -total_lp / static_cast<double>(tokens));
}

struct RescoreConfig {
  double lm_weight = 1.0;       // lambda
  double acoustic_weight = 1.0; // fixed by contract
};

struct ScoredHypothesis {
  std::vector<std::string> tokens;
  double acoustic_logscore = 0.0;
  double combined = 0.0;
};

/// Reorder an n-best list by acoustic + lambda * log10 P(tokens). The
/// sort is stable, so ties keep the incoming (acoustic) order, and
/// lambda = 0 reproduces the input permutation exactly.
inline std::vector<ScoredHypothesis> rescore(
    const std::vector<std::pair<std::vector<std::string>, double>>& nbest,
    const NGramModel& model, const RescoreConfig& cfg = {}) {
  if (cfg.lm_weight < 0.0) fail(Err::InvalidParameter, "lm weight must be >= 0");
  std::vector<ScoredHypothesis> scored;
  scored.reserve(nbest.size());
  for (const auto& [tokens, acoustic] : nbest) {
    ScoredHypothesis h;
    h.tokens = tokens;
    h.acoustic_logscore = acoustic;
    h.combined = cfg.acoustic_weight * acoustic;
    if (cfg.lm_weight != 0.0 && !tokens.empty())
      h.combined += cfg.lm_weight * logprob(model, tokens);
    scored.push_back(std::move(h));
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const ScoredHypothesis& a, const ScoredHypothesis& b) {
                     return a.combined > b.combined;
                   });
  return scored;
}

/// Line-oriented model file: `ngram <order> <model_id>` then one
/// `<count> <tok1> ... <tokk>` line per stored k-gram, lowest order
/// first, keys sorted. Interpolation weights are not stored and reset to
/// uniform on load.
inline void save_ngram_model(const NGramModel& model, std::ostream& out) {
  out << "ngram " << model.order << " " << model.model_id << "\n";
  for (size_t k = 0; k < model.counts.size(); ++k) {
    std::map<std::string, uint64_t> sorted(model.counts[k].begin(), model.counts[k].end());
    for (const auto& [key, count] : sorted) out << count << " " << key << "\n";
  }
}

inline void save_ngram_model(const NGramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Err::OutputError, "cannot write model file " + path.string());
  save_ngram_model(model, out);
  if (!out) fail(Err::OutputError, "short write to " + path.string());
}

inline NGramModel load_ngram_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(Err::InvalidModel, "empty language model file");
  std::istringstream header(line);
  std::string magic;
  int order = 0;
  header >> magic >> order;
  if (magic != "ngram" || order < 1) fail(Err::InvalidModel, "bad language model header");
  std::string model_id;
  std::getline(header, model_id);
  if (!model_id.empty() && model_id.front() == ' ') model_id.erase(model_id.begin());

  NGramModel model;
  model.order = order;
  model.model_id = model_id;
  model.counts.resize(static_cast<size_t>(order));
  model.context_totals.resize(static_cast<size_t>(order));
  model.interpolation_weights.assign(static_cast<size_t>(order), 1.0 / order);
  model.vocabulary = {kUnkToken, kBosToken, kEosToken};

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    uint64_t count = 0;
    if (!(row >> count))
      fail(Err::InvalidModel, "bad count on line " + std::to_string(line_no));
    std::vector<std::string> tokens;
    std::string tok;
    while (row >> tok) tokens.push_back(tok);
    if (tokens.empty() || tokens.size() > static_cast<size_t>(order))
      fail(Err::InvalidModel, "bad k-gram arity on line " + std::to_string(line_no));
    const size_t k = tokens.size();
    model.counts[k - 1][detail::join_tokens(tokens, 0, k)] += count;
    model.context_totals[k - 1][detail::join_tokens(tokens, 0, k - 1)] += count;
    if (k == 1 && tokens[0] != kBosToken) model.vocabulary.insert(tokens[0]);
  }
  if (model.counts[0].empty()) fail(Err::InvalidModel, "model has no unigram counts");
  return model;
}

inline NGramModel load_ngram_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::FileNotFound, "cannot open model file " + path.string());
  try {
    return load_ngram_model(in);
  } catch (const SttError& e) {
    if (e.code() == Err::InvalidModel)
      fail(Err::InvalidModel, path.string() + ": " + e.what());
    throw;
  }
}

}  // namespace sttkit
