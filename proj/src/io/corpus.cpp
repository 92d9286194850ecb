#include "relab/io/corpus.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "relab/errors.hpp"

namespace relab {

static_assert(std::endian::native == std::endian::little, "corpus I/O assumes a little-endian host");

std::filesystem::path corpus_sidecar(const std::filesystem::path& path) { return path.string() + ".json"; }

void write_corpus(const TokenCorpus& corpus, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(corpus.tokens.data()),
              static_cast<std::streamsize>(corpus.tokens.size() * sizeof(std::uint32_t)));
  }
  const nlohmann::json meta = {
      {"vocab_size", corpus.vocab_size}, {"dtype", "u32-le"}, {"token_count", corpus.tokens.size()}};
  std::ofstream side(corpus_sidecar(path), std::ios::trunc);
  if (!side) throw InputError("cannot write " + corpus_sidecar(path).string());
  side << meta.dump(2) << '\n';
}

TokenCorpus read_corpus(const std::filesystem::path& path) {
  const auto side_path = corpus_sidecar(path);
  if (!std::filesystem::exists(path)) throw InputError("corpus not found: " + path.string());
  std::ifstream side(side_path);
  if (!side) throw InputError("corpus sidecar not found: " + side_path.string());
  nlohmann::json meta;
  try {
    side >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(side_path.string() + ": " + e.what());
  }
  if (!meta.is_object() || !meta.contains("vocab_size") || !meta.contains("token_count") ||
      meta.value("dtype", std::string()) != "u32-le")
    throw FormatError(side_path.string() + ": expected {vocab_size, dtype: \"u32-le\", token_count}");

  TokenCorpus corpus;
  corpus.vocab_size = meta.at("vocab_size").get<std::size_t>();
  const auto count = meta.at("token_count").get<std::size_t>();
  const auto bytes = std::filesystem::file_size(path);
  if (bytes != count * sizeof(std::uint32_t))
    throw FormatError(path.string() + ": payload has " + std::to_string(bytes) + " bytes, sidecar says " +
                      std::to_string(count) + " tokens");
  corpus.tokens.resize(count);
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(corpus.tokens.data()), static_cast<std::streamsize>(bytes));
  for (std::size_t i = 0; i < count; ++i)
    if (corpus.tokens[i] >= corpus.vocab_size)
      throw FormatError(path.string() + ": token " + std::to_string(i) + " is out of vocabulary");
  return corpus;
}

TokenCorpus make_synthetic_corpus(std::size_t vocab, std::size_t n_tokens, std::uint64_t seed) {
  if (vocab < 4) throw ConfigError("synthetic corpus needs vocab >= 4");
  Rng rng(seed);
  std::vector<std::array<std::uint32_t, 3>> next(vocab);
  for (auto& succ : next) {
    // Three distinct successors per id.
    for (std::size_t k = 0; k < 3; ++k) {
      std::uint32_t c;
      do {
        c = static_cast<std::uint32_t>(uniform_index(rng, vocab));
      } while (std::find(succ.begin(), succ.begin() + static_cast<std::ptrdiff_t>(k), c) !=
               succ.begin() + static_cast<std::ptrdiff_t>(k));
      succ[k] = c;
    }
  }
  TokenCorpus corpus{vocab, std::vector<std::uint32_t>(n_tokens)};
  // Second order: the previous token rotates which successor is preferred.
  std::uint32_t prev = static_cast<std::uint32_t>(uniform_index(rng, vocab));
  std::uint32_t cur = static_cast<std::uint32_t>(uniform_index(rng, vocab));
  for (auto& t : corpus.tokens) {
    t = cur;
    const double u = uniform01(rng);
    const std::size_t rank = u < 0.6 ? 0 : (u < 0.85 ? 1 : 2);
    const std::uint32_t nxt = next[cur][(rank + prev) % 3];
    prev = cur;
    cur = nxt;
  }
  return corpus;
}

WindowSampler::WindowSampler(const TokenCorpus& corpus, std::size_t seq_len, std::size_t batch_size,
                             std::uint64_t seed)
    : corpus_(&corpus), seq_len_(seq_len), batch_size_(batch_size), n_windows_(0), rng_(seed) {
  if (seq_len < 2) throw ConfigError("seq_len must be at least 2");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  n_windows_ = corpus.tokens.size() / seq_len;
  if (n_windows_ < batch_size)
    throw InputError("corpus of " + std::to_string(corpus.tokens.size()) + " tokens holds fewer than batch_size=" +
                     std::to_string(batch_size) + " windows of " + std::to_string(seq_len));
  order_.resize(n_windows_);
  reshuffle();
}

void WindowSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[uniform_index(rng_, i)]);
  cursor_ = 0;
}

TokenBatch WindowSampler::window(std::size_t i) const {
  TokenBatch b{1, seq_len_, std::vector<std::int32_t>(seq_len_)};
  const auto* src = corpus_->tokens.data() + i * seq_len_;
  for (std::size_t t = 0; t < seq_len_; ++t) b.ids[t] = static_cast<std::int32_t>(src[t]);
  return b;
}

TokenBatch WindowSampler::next() {
  TokenBatch b{batch_size_, seq_len_, {}};
  b.ids.reserve(batch_size_ * seq_len_);
  for (std::size_t k = 0; k < batch_size_; ++k) {
    if (cursor_ == order_.size()) reshuffle();
    const auto w = window(order_[cursor_++]);
    b.ids.insert(b.ids.end(), w.ids.begin(), w.ids.end());
  }
  return b;
}

}  // namespace relab
