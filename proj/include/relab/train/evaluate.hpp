#pragma once

#include <filesystem>
#include <string>

namespace relab {

enum class EvalTask { kPerplexity, kBlimp };

EvalTask parse_eval_task(const std::string& name);

/// Loads the checkpoint and scores it. Perplexity reads a token corpus and
/// writes "metric,value,tokens"; blimp reads a pair file and writes the
/// per-phenomenon table. Returns the headline number (ppl or accuracy).
double evaluate_checkpoint(EvalTask task, const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                           const std::filesystem::path& out);

}  // namespace relab
