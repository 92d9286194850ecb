#include "relab/dynamics/probe.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "relab/errors.hpp"
#include "relab/io/model_io.hpp"

namespace relab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void emit(std::vector<DynamicsRow>& rows, std::int64_t step, std::size_t layer, const std::string& probe,
          const MatrixMetrics& m) {
  rows.push_back({step, layer, probe, "er", m.er});
  rows.push_back({step, layer, probe, "per", m.per});
  rows.push_back({step, layer, probe, "kappa", m.kappa});
}

double nan_mean(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (!std::isnan(x)) s += x, ++n;
  return n ? s / static_cast<double>(n) : kNaN;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

}  // namespace

MatrixMetrics matrix_metrics(const Matrix& m, std::size_t d_inter) {
  const auto s = singular_values(m);
  return {effective_rank(s), proportional_effective_rank(s, d_inter), condition_number(s)};
}

std::vector<DynamicsRow> probe_checkpoint(const Checkpoint& ckpt, ProbeKind kind) {
  auto loaded = load_model(ckpt);
  auto& model = loaded.model;
  const auto& cfg = model.config();
  const auto step = ckpt.step();
  std::vector<DynamicsRow> rows;

  if (kind == ProbeKind::kWeights) {
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      std::vector<double> er, per, kappa;
      for (const auto& ov : model.ov_matrices(l)) {
        const auto m = matrix_metrics(ov, cfg.d_model);
        er.push_back(m.er);
        per.push_back(m.per);
        kappa.push_back(m.kappa);
      }
      emit(rows, step, l, "ov", {nan_mean(er), nan_mean(per), nan_mean(kappa)});
      emit(rows, step, l, "w2", matrix_metrics(model.layer(l).w2.effective_weight(), cfg.d_ff));
    }
    return rows;
  }

  const std::pair<Projection, const char*> probes[] = {
      {Projection::kO, "grad_o"}, {Projection::kV, "grad_v"}, {Projection::kW2, "grad_w2"}};
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    for (const auto& [proj, probe] : probes) {
      const auto& linear = model.layer(l).projection(proj);
      Matrix update;
      if (linear.adapter) {
        update = linear.adapter->delta();
      } else {
        const auto name = "grad/" + projection_site_name(l, proj) + ".weight";
        if (!ckpt.has(name)) throw FormatError("checkpoint is missing tensor '" + name + "'");
        update = ckpt.tensor(name).matrix();
      }
      emit(rows, step, l, probe, matrix_metrics(update, is_attention(proj) ? cfg.d_model : cfg.d_ff));
    }
  }
  return rows;
}

std::vector<AggregateRow> aggregate_rows(const std::vector<DynamicsRow>& rows) {
  std::vector<std::tuple<std::int64_t, std::string, std::string>> order;
  std::map<std::tuple<std::int64_t, std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) {
    auto key = std::make_tuple(r.step, r.probe, r.metric);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(r.value);
  }
  std::vector<AggregateRow> out;
  for (const auto& key : order)
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), layer_aggregate(groups[key])});
  return out;
}

void write_dynamics_csv(const std::vector<DynamicsRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "step,layer,probe,metric,value,is_nan\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.layer << ',' << r.probe << ',' << r.metric << ',' << fmt(r.value) << ','
        << (std::isnan(r.value) ? 1 : 0) << '\n';
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "step,probe,metric,mean,ci_low,ci_high,n_layers\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.probe << ',' << r.metric << ',' << fmt(r.stats.mean) << ',' << fmt(r.stats.ci_low)
        << ',' << fmt(r.stats.ci_high) << ',' << r.stats.n << '\n';
}

std::size_t analyze_checkpoints(const std::filesystem::path& dir, const std::filesystem::path& out_dir) {
  const auto files = list_checkpoints(dir);
  if (files.empty()) throw InputError("no .ckpt files in " + dir.string());
  std::vector<DynamicsRow> rows;
  for (const auto& f : files) {
    const auto ckpt = read_checkpoint(f);
    try {
      for (auto kind : {ProbeKind::kWeights, ProbeKind::kGradUpdates}) {
        auto part = probe_checkpoint(ckpt, kind);
        rows.insert(rows.end(), part.begin(), part.end());
      }
    } catch (const FormatError& e) {
      throw FormatError(f.string() + ": " + e.what());
    }
  }
  std::filesystem::create_directories(out_dir);
  write_dynamics_csv(rows, out_dir / "dynamics.csv");
  write_aggregate_csv(aggregate_rows(rows), out_dir / "dynamics_aggregate.csv");
  return rows.size();
}

}  // namespace relab
