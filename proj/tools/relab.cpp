// relab: command-line front end for training, analysis and evaluation.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "relab/dynamics/probe.hpp"
#include "relab/errors.hpp"
#include "relab/io/corpus.hpp"
#include "relab/train/evaluate.hpp"
#include "relab/train/plot.hpp"
#include "relab/train/trainer.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Low-rank restart training and learning-dynamics toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train a model from a JSON run config");
  train->add_option("--config", config_path, "Run config (JSON)")->required();

  std::string ckpt_dir, analyze_out;
  auto* analyze = app.add_subcommand("analyze", "Spectral metrics over a directory of checkpoints");
  analyze->add_option("--checkpoints", ckpt_dir, "Directory of .ckpt files")->required();
  analyze->add_option("--out", analyze_out, "Output directory for CSVs")->required();

  std::string task, checkpoint, data, eval_out;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint");
  eval->add_option("--task", task, "ppl or blimp")->required()->check(CLI::IsMember({"ppl", "blimp"}));
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "Token corpus (ppl) or minimal-pair file (blimp)")->required();
  eval->add_option("--out", eval_out, "Result CSV")->required();

  std::vector<std::string> plot_in;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Render CSVs as SVG charts");
  plot->add_option("--in", plot_in, "Input CSVs")->required();
  plot->add_option("--out", plot_out, "Output directory")->required();

  std::size_t vocab = 0, tokens = 0;
  std::uint64_t seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic Markov token corpus");
  synth->add_option("--vocab", vocab, "Vocabulary size")->required();
  synth->add_option("--tokens", tokens, "Token count")->required();
  synth->add_option("--seed", seed, "Seed")->required();
  synth->add_option("--out", synth_out, "Corpus path (sidecar written alongside)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "relab: " << e.what() << '\n';
    return 2;
  }

  if (*train) {
    const auto summary = relab::train(relab::load_run_config(config_path));
    std::printf("trained %lld steps: loss %.4f -> %.4f, %zu restarts, %zu checkpoints\n",
                static_cast<long long>(summary.steps), summary.first_loss, summary.last_loss,
                summary.restart_steps.size(), summary.checkpoints.size());
  } else if (*analyze) {
    const auto rows = relab::analyze_checkpoints(ckpt_dir, analyze_out);
    std::printf("wrote %zu rows to %s\n", rows, analyze_out.c_str());
  } else if (*eval) {
    const double v = relab::evaluate_checkpoint(relab::parse_eval_task(task), checkpoint, data, eval_out);
    std::printf("%s %.6g\n", task == "ppl" ? "perplexity" : "accuracy", v);
  } else if (*plot) {
    std::vector<std::filesystem::path> in(plot_in.begin(), plot_in.end());
    const auto files = relab::plot_csvs(in, plot_out);
    std::printf("wrote %zu charts to %s\n", files.size(), plot_out.c_str());
  } else if (*synth) {
    relab::write_corpus(relab::make_synthetic_corpus(vocab, tokens, seed), synth_out);
    std::printf("wrote %zu tokens to %s\n", tokens, synth_out.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "relab: error: " << msg << '\n';
    return 1;
  }
}
