#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "relab/io/corpus.hpp"
#include "relab/model/decoder.hpp"

namespace relab {

/// Anything that scores next tokens.
class LogProbModel {
 public:
  virtual ~LogProbModel() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t max_seq_len() const = 0;
  /// Row-major [len, vocab] natural-log next-token distributions; row t
  /// scores the token at position t + 1.
  virtual std::vector<double> log_probs(const std::vector<std::int32_t>& tokens) const = 0;
};

/// Evaluation-mode decoder wrapped as a LogProbModel.
class DecoderLogProbs : public LogProbModel {
 public:
  explicit DecoderLogProbs(const DecoderModel<float>& model) : model_(model) {}
  std::size_t vocab_size() const override { return model_.config().vocab_size; }
  std::size_t max_seq_len() const override { return model_.config().max_seq_len; }
  std::vector<double> log_probs(const std::vector<std::int32_t>& tokens) const override;

 private:
  const DecoderModel<float>& model_;
};

/// sum_{t >= 1} log p(tokens[t] | tokens[< t]). Needs 2 <= len <= max_seq_len.
double sequence_loglik(const LogProbModel& model, const std::vector<std::int32_t>& tokens);

/// exp of the mean next-token cross-entropy over non-overlapping seq_len
/// windows of the corpus (a trailing partial window of >= 2 tokens counts).
double perplexity(const LogProbModel& model, const TokenCorpus& corpus, std::size_t seq_len);

struct MinimalPair {
  std::vector<std::int32_t> good;
  std::vector<std::int32_t> bad;
  std::string phenomenon;
  std::string category;
};

struct GroupScore {
  std::size_t n = 0;
  std::size_t correct = 0;
  double accuracy() const { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

struct EvalResult {
  std::size_t n_pairs = 0;
  std::size_t n_correct = 0;
  std::map<std::string, GroupScore> per_phenomenon;
  std::map<std::string, GroupScore> per_category;
  double overall_accuracy() const {
    return n_pairs ? static_cast<double>(n_correct) / static_cast<double>(n_pairs) : 0.0;
  }
};

/// A pair is correct iff loglik(good) > loglik(bad); ties are incorrect.
EvalResult blimp_score(const LogProbModel& model, const std::vector<MinimalPair>& pairs);

/// One JSON object per line with integer arrays good_tokens / bad_tokens and
/// string fields phenomenon / category. Blank lines are skipped.
std::vector<MinimalPair> read_minimal_pairs(const std::filesystem::path& path);

/// Columns: phenomenon,n,accuracy. Phenomenon rows, then "category:<name>"
/// rows, then an "overall" row.
void write_blimp_csv(const EvalResult& result, const std::filesystem::path& path);

}  // namespace relab
