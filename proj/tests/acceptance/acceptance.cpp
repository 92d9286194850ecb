// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any criterion fails.

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "model_gradcheck.hpp"
#include "relab/dynamics/probe.hpp"
#include "relab/dynamics/spectrum.hpp"
#include "relab/eval/ztest.hpp"
#include "relab/io/checkpoint.hpp"
#include "relab/io/corpus.hpp"
#include "relab/optim/adamw.hpp"
#include "relab/optim/schedule.hpp"
#include "relab/relora/relora.hpp"
#include "relab/train/run_config.hpp"
#include "relab/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace relab;

namespace {

// Tolerances.
constexpr double kMergeTol = 1e-5;
constexpr double kMetricTol = 1e-10;
constexpr double kEr31 = 1.7548, kEr31Tol = 1e-3;
constexpr double kGradTol = 1e-3;
constexpr double kZTol = 1e-10;
constexpr double kMinLossReduction = 0.30;
constexpr double kSpikeFloor = 0.01;   // nats above the matched baseline
constexpr double kSpikeNoiseMult = 4.0;
constexpr double kMaxRunSeconds = 300.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix gaussian(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.values) v = standard_normal(rng);
  return m;
}

std::size_t eigen_rank(const Matrix& m) {
  Eigen::MatrixXd e(m.rows, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues();
  const double tol = static_cast<double>(std::max(m.rows, m.cols)) * s(0) * 1e-12;
  return static_cast<std::size_t>((s.array() > tol).count());
}

// ---------------------------------------------------------------------------

Outcome parameter_accounting() {
  const auto t0 = std::chrono::steady_clock::now();
  auto tiny = DecoderModel<float>::build(DecoderConfig::tiny(), 1);
  const auto t_dec = tiny.count_params();
  ReloraEngine<float> engine(ReloraConfig{}, 1);
  engine.inject(tiny);
  const auto t_rel = tiny.count_params();
  // The small preset is counted without allocating 64M weights.
  const auto s_dec = expected_param_count(DecoderConfig::small(), std::nullopt);
  const auto s_rel = expected_param_count(DecoderConfig::small(), ReloraConfig{});
  const bool closed_form_agrees = expected_param_count(DecoderConfig::tiny(), std::nullopt) == t_dec &&
                                  expected_param_count(DecoderConfig::tiny(), ReloraConfig{}) == t_rel;
  const double secs = seconds_since(t0);
  const bool ok = t_dec == ParamCount{11282784, 11282784} && s_dec.total == 64595328 &&
                  t_rel == ParamCount{10060128, 11682144} && s_rel == ParamCount{40240512, 66192768} &&
                  closed_form_agrees && secs < 1.0;
  return {ok, fmt("t-dec %zu/%zu s-dec %zu t-rel %zu/%zu s-rel %zu/%zu, %.2fs", t_dec.trainable, t_dec.total,
                  s_dec.total, t_rel.trainable, t_rel.total, s_rel.trainable, s_rel.total, secs)};
}

Outcome merge_invariance() {
  DecoderConfig cfg = testing::micro_config(16, 64);
  cfg.n_heads = 4;
  cfg.n_kv_heads = 2;
  cfg.d_ff = 64;
  cfg.max_seq_len = 32;
  auto model = DecoderModel<float>::build(cfg, 3);
  ReloraConfig rc;
  rc.targets = parse_targets({"attention", "swiglu"});
  rc.rank = 4;
  rc.alpha = 8;
  ReloraEngine<float> engine(rc, 4);
  engine.inject(model);
  AdamW<float> opt(model.trainable_parameters(), {});
  const auto corpus = make_synthetic_corpus(64, 20000, 5);
  WindowSampler sampler(corpus, 32, 8, 6);
  Rng dropout(7);
  for (int step = 0; step < 50; ++step) {
    model.zero_grad();
    Tape<float> tape;
    auto loss = model.loss(tape, sampler.next(), {true, &dropout});
    tape.backward(loss);
    opt.step(3e-3);
  }
  const auto batch = sampler.window(0);
  const auto logits = [&] {
    Tape<float> off(false);
    const auto out = model.forward(off, batch);
    return std::vector<float>(out.data().begin(), out.data().end());
  };
  const auto before = logits();
  double adapter_norm = 0.0;
  for (const auto& site : model.linear_sites())
    if (site.linear->adapter) adapter_norm = std::max(adapter_norm, max_abs(site.linear->adapter->delta()));
  engine.merge_and_reinit(model, 50);
  const auto after = logits();
  double diff = 0.0;
  for (std::size_t i = 0; i < before.size(); ++i)
    diff = std::max(diff, static_cast<double>(std::abs(before[i] - after[i])));
  return {diff < kMergeTol && adapter_norm > 0.0,
          fmt("max |logit diff| %.3g (tol %g), largest adapter delta entry %.3g", diff, kMergeTol, adapter_norm)};
}

Outcome rank_accumulation() {
  Rng rng(21);
  std::vector<FactorSnapshot> fresh;
  for (int i = 0; i < 8; ++i) fresh.push_back({gaussian(64, 4, rng), gaussian(4, 64, rng)});
  const std::vector<FactorSnapshot> repeated(8, fresh.front());
  const auto acc = cumulative_update(fresh, 2.0, 64, 64);
  const auto rep = cumulative_update(repeated, 2.0, 64, 64);
  const auto ours_fresh = numerical_rank(singular_values(acc));
  const auto ours_rep = numerical_rank(singular_values(rep));
  const auto oracle_fresh = eigen_rank(acc), oracle_rep = eigen_rank(rep);
  return {ours_fresh == 32 && oracle_fresh == 32 && ours_rep == 4 && oracle_rep == 4,
          fmt("8 restarts rank %zu (oracle %zu), repeated adapter rank %zu (oracle %zu)", ours_fresh, oracle_fresh,
              ours_rep, oracle_rep)};
}

Outcome metric_oracles() {
  double worst_identity = 0.0;
  for (std::size_t n : {1, 2, 5, 16, 64})
    worst_identity = std::max(worst_identity, std::abs(effective_rank(Matrix::identity(n)) - static_cast<double>(n)));
  const double er31 = effective_rank(Matrix::diagonal({3, 1}));
  const double k10 = condition_number(Matrix::diagonal({10, 1}));
  Rng rng(31);
  std::size_t per_violations = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t m = 1 + uniform_index(rng, 40), n = 1 + uniform_index(rng, 40);
    const std::size_t d_inter = 1 + uniform_index(rng, 64);
    const double per = proportional_effective_rank(gaussian(m, n, rng), d_inter);
    if (!(per <= static_cast<double>(std::min(m, n)) / static_cast<double>(d_inter) + 1e-12)) ++per_violations;
  }
  const bool zero_nan = std::isnan(effective_rank(Matrix(6, 4))) && std::isnan(condition_number(Matrix(6, 4)));
  return {worst_identity < kMetricTol && std::abs(er31 - kEr31) < kEr31Tol && std::abs(k10 - 10.0) < kMetricTol &&
              per_violations == 0 && zero_nan,
          fmt("ER(I) err %.1e, ER(diag(3,1)) %.4f, kappa(diag(10,1)) %.12g, PER bound violations %zu/100, zero->NaN %s",
              worst_identity, er31, k10, per_violations, zero_nan ? "yes" : "no")};
}

// Jagged cosine written out independently of the library.
double reference_lr(std::int64_t step) {
  const double peak = 3e-4, floor = 0.1 * peak, total = 30000, warm = 2000, freq = 2000, rewarm = 100;
  const auto envelope = [&](double s) {
    return floor + (peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * (s - warm) / (total - warm)));
  };
  const double s = static_cast<double>(step);
  if (s < warm) return peak * s / warm;
  const double restart = freq * std::floor(s / freq);
  if (restart >= warm && restart < total && s - restart < rewarm) return envelope(restart + rewarm) * (s - restart) / rewarm;
  return envelope(s);
}

Outcome scheduler_shape() {
  ScheduleConfig c;
  c.kind = ScheduleKind::kReloraJaggedCosine;
  c.peak_lr = 3e-4;
  c.warmup_steps = 2000;
  c.reset_frequency = 2000;
  c.restart_warmup_steps = 100;
  c.min_lr_ratio = 0.1;
  c.total_steps = 30000;
  c.validate();
  double worst = 0.0, highest = 0.0, lowest_outside_ramps = 1.0;
  for (std::int64_t s = 0; s <= c.total_steps; ++s) {
    const double lr = scheduled_lr(s, c);
    worst = std::max(worst, std::abs(lr - reference_lr(s)));
    highest = std::max(highest, lr);
    const bool in_ramp = s < c.warmup_steps || (s % c.reset_frequency < c.restart_warmup_steps && s < c.total_steps);
    if (!in_ramp) lowest_outside_ramps = std::min(lowest_outside_ramps, lr);
  }
  bool restarts_zero = !restart_steps(c).empty();
  for (auto s : restart_steps(c)) restarts_zero = restarts_zero && scheduled_lr(s, c) == 0.0;
  const bool ok = scheduled_lr(0, c) == 0.0 && restarts_zero && highest <= 3e-4 &&
                  lowest_outside_ramps >= 3e-5 - 1e-18 && std::abs(lowest_outside_ramps - 3e-5) < 1e-12 &&
                  worst < 1e-18;
  return {ok, fmt("max |lr - reference| %.1e over 30001 steps, peak %.6g, floor %.6g, %zu restarts at lr 0", worst,
                  highest, lowest_outside_ramps, restart_steps(c).size())};
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  auto model = DecoderModel<double>::build(testing::micro_config(8, 13), 11);
  const auto errors = testing::model_gradient_errors(model, testing::random_batch(2, 6, 13, 12));
  std::string worst_name;
  double worst = 0.0;
  for (const auto& [name, e] : errors)
    if (e >= worst) worst = e, worst_name = name;
  const double secs = seconds_since(t0);
  return {worst < kGradTol && secs < 60.0 && !errors.empty(),
          fmt("%zu parameters, worst rel err %.2e (%s), %.1fs", errors.size(), worst, worst_name.c_str(), secs)};
}

// Shared by the training, dynamics and determinism criteria.
struct MicroRuns {
  fs::path work;
  RunConfig baseline, relora;
  TrainSummary base_summary, relora_summary;
  double base_seconds = 0, relora_seconds = 0;
  std::string error;
};

std::vector<double> read_losses(const fs::path& metrics) {
  std::ifstream in(metrics);
  std::string line;
  std::getline(in, line);
  std::vector<double> out;
  while (std::getline(in, line)) out.push_back(std::stod(line.substr(line.find(',') + 1)));
  return out;
}

double mean(const std::vector<double>& v, std::size_t a, std::size_t b) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(a), v.begin() + static_cast<std::ptrdiff_t>(b), 0.0) /
         static_cast<double>(b - a);
}

MicroRuns& micro_runs() {
  static MicroRuns runs = [] {
    MicroRuns r;
    r.work = fs::temp_directory_path() / "relab_acceptance";
    fs::remove_all(r.work);
    fs::create_directories(r.work);
    const auto corpus = r.work / "synth64.bin";
    write_corpus(make_synthetic_corpus(64, 200000, 7), corpus);
    r.baseline = load_run_config(fs::path(RELAB_SOURCE_DIR) / "configs" / "micro_baseline.json");
    r.relora = load_run_config(fs::path(RELAB_SOURCE_DIR) / "configs" / "micro_relora.json");
    r.baseline.data.corpus_path = r.relora.data.corpus_path = corpus.string();
    r.baseline.run.out_dir = (r.work / "baseline").string();
    r.relora.run.out_dir = (r.work / "relora").string();
    try {
      auto t0 = std::chrono::steady_clock::now();
      r.base_summary = train(r.baseline);
      r.base_seconds = seconds_since(t0);
      t0 = std::chrono::steady_clock::now();
      r.relora_summary = train(r.relora);
      r.relora_seconds = seconds_since(t0);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  }();
  if (!runs.error.empty()) throw std::runtime_error("micro runs failed: " + runs.error);
  return runs;
}

Outcome training_sanity() {
  auto& r = micro_runs();
  const auto L = read_losses(fs::path(r.relora.run.out_dir) / "metrics.csv");
  const auto B = read_losses(fs::path(r.baseline.run.out_dir) / "metrics.csv");
  const auto reduction = [](const std::vector<double>& v) { return 1.0 - mean(v, v.size() - 50, v.size()) / v.front(); };
  const double red_l = reduction(L), red_b = reduction(B);

  // Restart effect = change of the relora-minus-baseline gap from the 20
  // steps before a restart to the 20 steps after it. The same statistic at
  // anchors away from restarts gives the noise level.
  std::vector<double> gap(L.size());
  for (std::size_t i = 0; i < L.size(); ++i) gap[i] = L[i] - B[i];
  const auto effect = [&](std::size_t s) { return mean(gap, s, s + 20) - mean(gap, s - 20, s); };
  std::vector<double> control;
  const auto freq = static_cast<std::size_t>(r.relora.schedule.reset_frequency);
  for (auto s : r.relora_summary.restart_steps)
    for (std::size_t a = static_cast<std::size_t>(s) + 60; a + 20 < std::min<std::size_t>(s + freq - 20, L.size());
         a += 5)
      control.push_back(effect(a));
  double noise = 0.0, control_max = -1e9;
  const double cmean = mean(control, 0, control.size());
  for (double c : control) noise += (c - cmean) * (c - cmean), control_max = std::max(control_max, c);
  noise = std::sqrt(noise / static_cast<double>(control.size() - 1));
  const double threshold = std::max(kSpikeFloor, kSpikeNoiseMult * noise);

  std::size_t spikes = 0, dips = 0;
  std::string per_restart;
  for (auto s64 : r.relora_summary.restart_steps) {
    const auto s = static_cast<std::size_t>(s64);
    if (s + 60 > L.size()) continue;
    const double e = effect(s);
    const double residual = mean(gap, s + 40, s + 60) - mean(gap, s - 20, s);
    const bool recovered = residual < 0.5 * e;
    if (e > threshold && recovered) ++spikes;
    if (e < -2.0 * noise) ++dips;
    per_restart += fmt(" @%zu %+.3f (after 60: %+.3f)", s, e, residual);
  }
  const bool budget = r.base_seconds < kMaxRunSeconds && r.relora_seconds < kMaxRunSeconds;
  const bool ok = red_b >= kMinLossReduction && red_l >= kMinLossReduction && spikes >= 1 && dips == 0 &&
                  control_max < threshold && budget;
  return {ok, fmt("loss reduction baseline %.0f%% relora %.0f%% (%.1fs/%.1fs); restart spikes vs baseline "
                  "threshold %.3f:%s; off-restart max %+.3f",
                  100 * red_b, 100 * red_l, r.base_seconds, r.relora_seconds, threshold, per_restart.c_str(),
                  control_max)};
}

Outcome dynamics_direction() {
  auto& r = micro_runs();
  const double rank = static_cast<double>(r.relora.relora->rank);
  std::size_t relora_rows = 0, relora_over = 0, relora_nan = 0, base_over = 0, base_nan = 0, base_rows = 0;
  double base_max_excess = 0.0;
  for (const auto& p : list_checkpoints(fs::path(r.relora.run.out_dir) / "checkpoints"))
    for (const auto& row : probe_checkpoint(read_checkpoint(p), ProbeKind::kGradUpdates)) {
      if (row.metric != "per") continue;
      const double d_inter = row.probe == "grad_w2" ? r.relora.model.d_ff : r.relora.model.d_model;
      if (std::isnan(row.value)) {
        ++relora_nan;
        continue;
      }
      ++relora_rows;
      if (row.value > rank / d_inter + 1e-9) ++relora_over;
    }
  for (const auto& p : list_checkpoints(fs::path(r.baseline.run.out_dir) / "checkpoints"))
    for (const auto& row : probe_checkpoint(read_checkpoint(p), ProbeKind::kGradUpdates)) {
      if (row.metric != "per") continue;
      const double d_inter = row.probe == "grad_w2" ? r.baseline.model.d_ff : r.baseline.model.d_model;
      if (std::isnan(row.value)) {
        ++base_nan;
        continue;
      }
      ++base_rows;
      if (row.value > rank / d_inter) ++base_over;
      base_max_excess = std::max(base_max_excess, row.value * d_inter / rank);
    }
  const bool ok = relora_rows > 0 && relora_over == 0 && base_over > 0 && relora_nan > 0 && base_nan > 0;
  return {ok, fmt("relora proxy PER over r/d_inter: %zu/%zu rows; baseline grad PER over it: %zu/%zu rows (max %.1fx "
                  "the limit); NaN rows relora %zu baseline %zu",
                  relora_over, relora_rows, base_over, base_rows, base_max_excess, relora_nan, base_nan)};
}

Outcome ztest_oracle() {
  Rng rng(41);
  const boost::math::normal_distribution<double> standard;
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const std::size_t n1 = 30 + uniform_index(rng, 100000), n2 = 30 + uniform_index(rng, 100000);
    const double p1 = 0.05 + 0.9 * uniform01(rng), p2 = 0.05 + 0.9 * uniform01(rng);
    const double pooled = (p1 * static_cast<double>(n1) + p2 * static_cast<double>(n2)) / static_cast<double>(n1 + n2);
    const double z =
        (p1 - p2) / std::sqrt(pooled * (1 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
    const double p = boost::math::cdf(boost::math::complement(standard, z));
    const auto got = proportion_ztest(p1, n1, p2, n2);
    worst = std::max({worst, std::abs(got.z - z), std::abs(got.p_value - p)});
  }
  const auto big = proportion_ztest(0.60, 67000, 0.55, 67000);
  return {worst < kZTol && big.p_value < 1e-10,
          fmt("max deviation from oracle %.1e over 10 tuples; delta 0.05 at n=67000: z %.2f p %.2e", worst, big.z,
              big.p_value)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  auto& r = micro_runs();
  const fs::path out = r.relora.run.out_dir;
  std::vector<std::pair<fs::path, std::string>> first;
  first.emplace_back(out / "metrics.csv", slurp(out / "metrics.csv"));
  for (const auto& p : list_checkpoints(out / "checkpoints")) first.emplace_back(p, slurp(p));
  train(r.relora);
  std::size_t same = 0;
  for (const auto& [p, bytes] : first) same += slurp(p) == bytes;
  const bool ok = same == first.size() && list_checkpoints(out / "checkpoints").size() + 1 == first.size();
  return {ok, fmt("%zu/%zu files byte-identical after rerunning the relora micro run", same, first.size())};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"parameter accounting", parameter_accounting},
      {"merge invariance", merge_invariance},
      {"rank accumulation", rank_accumulation},
      {"metric oracles", metric_oracles},
      {"scheduler shape", scheduler_shape},
      {"gradient correctness", gradient_correctness},
      {"desk-scale training", training_sanity},
      {"dynamics direction", dynamics_direction},
      {"z-test oracle", ztest_oracle},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
