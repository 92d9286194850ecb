#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "relab/model/decoder.hpp"
#include "relab/tensor/random.hpp"

namespace relab {

/// Pre-tokenised stream: raw u32 little-endian ids at `path` plus a JSON
/// sidecar at `path + ".json"` holding {vocab_size, dtype, token_count}.
struct TokenCorpus {
  std::size_t vocab_size = 0;
  std::vector<std::uint32_t> tokens;
};

std::filesystem::path corpus_sidecar(const std::filesystem::path& path);

void write_corpus(const TokenCorpus& corpus, const std::filesystem::path& path);
/// Throws InputError for a missing file and FormatError when the payload
/// disagrees with the sidecar or holds an id >= vocab_size.
TokenCorpus read_corpus(const std::filesystem::path& path);

/// Seeded second-order Markov source: every id has three successors drawn
/// with probabilities 0.6, 0.25 and 0.15, and the previous id rotates which
/// successor gets which probability. Needs vocab >= 4.
TokenCorpus make_synthetic_corpus(std::size_t vocab, std::size_t n_tokens, std::uint64_t seed);

/// Cuts the corpus into non-overlapping seq_len windows and serves them in
/// a seeded order, reshuffling every pass.
class WindowSampler {
 public:
  WindowSampler(const TokenCorpus& corpus, std::size_t seq_len, std::size_t batch_size, std::uint64_t seed);

  TokenBatch next();
  std::size_t window_count() const { return n_windows_; }

  /// Window i in file order (no shuffling).
  TokenBatch window(std::size_t i) const;

 private:
  void reshuffle();

  const TokenCorpus* corpus_;
  std::size_t seq_len_, batch_size_, n_windows_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace relab
