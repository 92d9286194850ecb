#include "relab/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "relab/errors.hpp"
#include "relab/io/corpus.hpp"
#include "relab/io/model_io.hpp"
#include "relab/optim/adamw.hpp"

namespace relab {

namespace {

// Independent streams for init, data order, dropout and adapter reinit.
constexpr std::uint64_t kDataStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kDropoutStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kAdapterStream = 0x94d049bb133111ebULL;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08lld.ckpt", static_cast<long long>(step));
  return dir / buf;
}

double held_out_loss(const DecoderModel<float>& model, const WindowSampler& eval, std::size_t windows) {
  const std::size_t n = std::min(windows, eval.window_count());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Tape<float> off(false);
    total += model.loss(off, eval.window(i)).item();
  }
  return total / static_cast<double>(n);
}

}  // namespace

TrainSummary train(const RunConfig& config) {
  config.validate();
  const auto corpus = read_corpus(config.data.corpus_path);
  if (corpus.vocab_size > config.model.vocab_size)
    throw InputError("corpus vocabulary " + std::to_string(corpus.vocab_size) + " exceeds model vocabulary " +
                     std::to_string(config.model.vocab_size));
  std::optional<TokenCorpus> eval_corpus;
  std::optional<WindowSampler> eval_windows;
  if (config.run.eval_every > 0) {
    eval_corpus = read_corpus(config.data.eval_path);
    eval_windows.emplace(*eval_corpus, config.data.seq_len, 1, 0);
  }

  const std::filesystem::path out_dir = config.run.out_dir;
  const auto ckpt_dir = out_dir / "checkpoints";
  std::filesystem::create_directories(ckpt_dir);
  {
    std::ofstream cfg_out(out_dir / "config.json", std::ios::trunc);
    cfg_out << config.to_json().dump(2) << '\n';
  }
  std::ofstream metrics(out_dir / "metrics.csv", std::ios::trunc);
  if (!metrics) throw InputError("cannot write metrics in " + out_dir.string());
  metrics << "step,loss,lr,tokens_seen\n" << std::flush;
  std::ofstream eval_log;
  if (eval_windows) {
    eval_log.open(out_dir / "eval.csv", std::ios::trunc);
    eval_log << "step,val_loss,val_ppl\n" << std::flush;
  }

  const auto seed = config.run.seed;
  auto model = DecoderModel<float>::build(config.model, seed);
  WindowSampler sampler(corpus, config.data.seq_len, config.data.batch_size, seed ^ kDataStream);
  Rng dropout_rng(seed ^ kDropoutStream);
  std::unique_ptr<ReloraEngine<float>> engine;
  if (config.relora) engine = std::make_unique<ReloraEngine<float>>(*config.relora, seed ^ kAdapterStream);
  const std::int64_t inject_at = config.relora ? config.relora->full_rank_warmup_steps : -1;
  if (inject_at == 0) engine->inject(model);
  AdamW<float> optimizer(model.trainable_parameters(), config.optimizer);

  const SnapshotInfo base_info{0, config.relora ? "relora" : "baseline", config.to_json()};
  TrainSummary summary;
  auto save = [&](std::int64_t step) {
    auto info = base_info;
    info.step = step;
    const auto path = checkpoint_path(ckpt_dir, step);
    write_checkpoint(snapshot_model(model, engine.get(), info), path);
    summary.checkpoints.push_back(path);
  };

  const std::size_t accum = config.run.grad_accumulation;
  const std::uint64_t tokens_per_step = accum * config.data.batch_size * config.data.seq_len;
  const ForwardMode train_mode{true, &dropout_rng};

  for (std::int64_t step = 0; step < config.run.total_steps; ++step) {
    if (engine && step == inject_at && inject_at > 0) {
      engine->inject(model);
      optimizer.drop_frozen();
      optimizer.add_params(ReloraEngine<float>::adapter_parameters(model.linear_sites()));
    }
    if (step % config.run.checkpoint_every == 0) save(step);
    if (engine && step > inject_at && is_restart_step(step, config.schedule)) {
      const auto sites = model.linear_sites();
      engine->merge_and_reinit(sites, step);
      prune_optimizer_state(optimizer, ReloraEngine<float>::adapter_parameters(sites),
                            config.relora->prune_proportion, engine->rng());
      summary.restart_steps.push_back(step);
    }

    const double lr = scheduled_lr(step, config.schedule);
    model.zero_grad();
    double loss_sum = 0.0;
    for (std::size_t micro = 0; micro < accum; ++micro) {
      Tape<float> tape;
      auto loss = model.loss(tape, sampler.next(), train_mode);
      const double value = loss.item();
      if (!std::isfinite(value)) throw NumericError("non-finite loss at step " + std::to_string(step));
      loss_sum += value;
      if (accum > 1) loss = ops::scale(tape, loss, 1.0f / static_cast<float>(accum));
      tape.backward(loss);
    }
    try {
      optimizer.step(lr);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(step) + ": " + e.what());
    }
    const double loss = loss_sum / static_cast<double>(accum);
    if (step == 0) summary.first_loss = loss;
    summary.last_loss = loss;
    metrics << step << ',' << num(loss) << ',' << num(lr) << ',' << (step + 1) * tokens_per_step << '\n'
            << std::flush;

    if (eval_windows && (step + 1) % config.run.eval_every == 0) {
      const double val = held_out_loss(model, *eval_windows, config.data.eval_windows);
      eval_log << step + 1 << ',' << num(val) << ',' << num(std::exp(val)) << '\n' << std::flush;
    }
  }
  save(config.run.total_steps);
  summary.steps = config.run.total_steps;
  return summary;
}

}  // namespace relab
