#include "relab/eval/lm_eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "relab/errors.hpp"

namespace relab {

std::vector<double> DecoderLogProbs::log_probs(const std::vector<std::int32_t>& tokens) const {
  Tape<float> off(false);
  const auto logits = model_.forward(off, TokenBatch{1, tokens.size(), tokens});
  const std::size_t v = vocab_size();
  std::vector<double> out(tokens.size() * v);
  const auto d = logits.data();
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const float* row = d.data() + t * v;
    const double mx = *std::max_element(row, row + v);
    double z = 0.0;
    for (std::size_t k = 0; k < v; ++k) z += std::exp(static_cast<double>(row[k]) - mx);
    const double lse = mx + std::log(z);
    for (std::size_t k = 0; k < v; ++k) out[t * v + k] = static_cast<double>(row[k]) - lse;
  }
  return out;
}

namespace {

void check_sequence(const LogProbModel& model, const std::vector<std::int32_t>& tokens) {
  if (tokens.size() < 2) throw InputError("sequence needs at least 2 tokens");
  if (tokens.size() > model.max_seq_len())
    throw InputError("sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_seq_len " +
                     std::to_string(model.max_seq_len()));
  for (auto id : tokens)
    if (id < 0 || static_cast<std::size_t>(id) >= model.vocab_size())
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(model.vocab_size()));
}

}  // namespace

double sequence_loglik(const LogProbModel& model, const std::vector<std::int32_t>& tokens) {
  check_sequence(model, tokens);
  const auto lp = model.log_probs(tokens);
  const std::size_t v = model.vocab_size();
  double total = 0.0;
  for (std::size_t t = 1; t < tokens.size(); ++t) total += lp[(t - 1) * v + static_cast<std::size_t>(tokens[t])];
  return total;
}

double perplexity(const LogProbModel& model, const TokenCorpus& corpus, std::size_t seq_len) {
  if (corpus.tokens.size() < 2) throw InputError("perplexity needs a corpus of at least 2 tokens");
  if (corpus.vocab_size != model.vocab_size())
    throw InputError("corpus vocabulary " + std::to_string(corpus.vocab_size) + " does not match model vocabulary " +
                     std::to_string(model.vocab_size()));
  seq_len = std::min(seq_len, model.max_seq_len());
  double nll = 0.0;
  std::size_t predicted = 0;
  for (std::size_t start = 0; start + 2 <= corpus.tokens.size(); start += seq_len) {
    const std::size_t len = std::min(seq_len, corpus.tokens.size() - start);
    std::vector<std::int32_t> window(corpus.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                     corpus.tokens.begin() + static_cast<std::ptrdiff_t>(start + len));
    nll -= sequence_loglik(model, window);
    predicted += len - 1;
  }
  return std::exp(nll / static_cast<double>(predicted));
}

EvalResult blimp_score(const LogProbModel& model, const std::vector<MinimalPair>& pairs) {
  if (pairs.empty()) throw InputError("no minimal pairs to score");
  EvalResult r;
  for (const auto& p : pairs) {
    const bool correct = sequence_loglik(model, p.good) > sequence_loglik(model, p.bad);
    ++r.n_pairs;
    r.n_correct += correct;
    auto& ph = r.per_phenomenon[p.phenomenon];
    ++ph.n;
    ph.correct += correct;
    if (!p.category.empty()) {
      auto& cat = r.per_category[p.category];
      ++cat.n;
      cat.correct += correct;
    }
  }
  return r;
}

std::vector<MinimalPair> read_minimal_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open pair file " + path.string());
  std::vector<MinimalPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  auto ids = [&](const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) throw FormatError("missing integer array '" + std::string(key) + "'");
    std::vector<std::int32_t> out;
    for (const auto& v : j.at(key)) {
      if (!v.is_number_integer()) throw FormatError("'" + std::string(key) + "' holds a non-integer");
      out.push_back(v.get<std::int32_t>());
    }
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MinimalPair p{ids(j, "good_tokens"), ids(j, "bad_tokens"), j.value("phenomenon", std::string("unlabelled")),
                    j.value("category", std::string())};
      pairs.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (pairs.empty()) throw InputError("pair file " + path.string() + " is empty");
  return pairs;
}

void write_blimp_csv(const EvalResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  auto row = [&](const std::string& label, std::size_t n, double acc) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", acc);
    out << label << ',' << n << ',' << buf << '\n';
  };
  out << "phenomenon,n,accuracy\n";
  for (const auto& [name, g] : result.per_phenomenon) row(name, g.n, g.accuracy());
  for (const auto& [name, g] : result.per_category) row("category:" + name, g.n, g.accuracy());
  row("overall", result.n_pairs, result.overall_accuracy());
}

}  // namespace relab
