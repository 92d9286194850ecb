#include "relab/train/evaluate.hpp"

#include <cstdio>
#include <fstream>

#include "relab/errors.hpp"
#include "relab/eval/lm_eval.hpp"
#include "relab/io/model_io.hpp"

namespace relab {

EvalTask parse_eval_task(const std::string& name) {
  if (name == "ppl") return EvalTask::kPerplexity;
  if (name == "blimp") return EvalTask::kBlimp;
  throw ConfigError("unknown eval task '" + name + "' (expected ppl or blimp)");
}

double evaluate_checkpoint(EvalTask task, const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                           const std::filesystem::path& out) {
  if (!std::filesystem::exists(data)) throw InputError("data file not found: " + data.string());
  const auto ckpt = read_checkpoint(checkpoint);
  const auto loaded = load_model(ckpt);
  const DecoderLogProbs lm(loaded.model);

  if (task == EvalTask::kPerplexity) {
    const auto corpus = read_corpus(data);
    std::size_t seq_len = loaded.model.config().max_seq_len;
    const auto& h = ckpt.header;
    if (h.contains("config") && h["config"].contains("data")) seq_len = h["config"]["data"].value("seq_len", seq_len);
    const double ppl = perplexity(lm, corpus, seq_len);
    std::ofstream f(out, std::ios::trunc);
    if (!f) throw InputError("cannot write " + out.string());
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", ppl);
    f << "metric,value,tokens\nperplexity," << buf << ',' << corpus.tokens.size() << '\n';
    return ppl;
  }
  const auto result = blimp_score(lm, read_minimal_pairs(data));
  write_blimp_csv(result, out);
  return result.overall_accuracy();
}

}  // namespace relab
