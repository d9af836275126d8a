/*
 Copyright 2026 The riskmpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

     http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "riskmpc/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "riskmpc/risk_envelope.hpp"

namespace riskmpc {

namespace {

// Portable uniform draw in [0, 1) from one generator step.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void validate_config(const ExperimentConfig& config, int nx) {
  if (config.runs < 1) {
    throw std::invalid_argument("experiment: run count must be at least 1");
  }
  if (config.steps < 1 || config.horizon < 1) {
    throw std::invalid_argument(
        "experiment: steps and horizon must be at least 1");
  }
  if (config.initial_state.size() != nx ||
      !config.initial_state.allFinite()) {
    throw std::invalid_argument(
        "experiment: initial state does not match the model dimension");
  }
  for (int k : config.snapshots) {
    if (k < 0 || k >= config.steps) {
      throw std::invalid_argument(
          "experiment: snapshot index outside the run length");
    }
  }
  for (double q : config.quantile_levels) {
    if (!(q > 0.0) || q > 1.0) {
      throw std::invalid_argument(
          "experiment: quantile levels must lie in (0, 1]");
    }
  }
  if (config.alphas.empty()) {
    throw std::invalid_argument("experiment: empty tail-level sweep");
  }
}

// Nearest-rank quantile: the ceil(q*n)-th order statistic (1-based).
double nearest_rank_quantile(const std::vector<double>& sorted, double q) {
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return sorted[rank - 1];
}

// Runs `count` closed loops with per-run derived seeds across `jobs`
// workers; results land in run order regardless of completion order.
std::vector<TrajectoryRecord> fan_out_runs(
    const SystemModel& model, const CostWeights& weights,
    const ConstraintSet& constraints, const TerminalDesign& design,
    const RiskEnvelope& envelope, const ExperimentConfig& config,
    std::size_t alpha_index) {
  std::vector<TrajectoryRecord> records(
      static_cast<std::size_t>(config.runs));
  std::atomic<int> next{0};

  auto work = [&]() {
    const ScenarioMpc mpc(model, weights, constraints, design, envelope,
                          config.horizon);
    for (int ri = next.fetch_add(1); ri < config.runs;
         ri = next.fetch_add(1)) {
      const std::uint64_t seed = stable_hash(
          config.master_seed, static_cast<std::uint64_t>(alpha_index),
          static_cast<std::uint64_t>(ri));
      auto& record = records[static_cast<std::size_t>(ri)];
      try {
        record = closed_loop(mpc, config.initial_state, config.steps, seed);
      } catch (const std::exception& e) {
        record.completed = false;
        record.abort_reason = e.what();
      }
    }
  };

  const int workers = std::clamp(config.jobs, 1, config.runs);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return records;
}

AlphaResult aggregate_alpha(double alpha, const ExperimentConfig& config,
                            std::vector<TrajectoryRecord> records) {
  AlphaResult result;
  result.alpha = alpha;
  result.synthesized = true;

  std::int64_t optimal_steps = 0;
  const auto total_steps =
      static_cast<std::int64_t>(config.runs) * config.steps;
  for (const TrajectoryRecord& rec : records) {
    for (const TrajectoryStep& step : rec.steps) {
      if (step.mpc_optimal) {
        ++optimal_steps;
      } else {
        ++result.infeasible_step_count;
      }
      if (step.state_margin > config.violation_tolerance ||
          step.control_margin > config.violation_tolerance) {
        ++result.violation_count;
      }
    }
    // Steps a run never reached (aborted) count as infeasible.
    result.infeasible_step_count +=
        config.steps - static_cast<std::int64_t>(rec.steps.size());
  }
  result.feasibility_rate =
      total_steps == 0
          ? 1.0
          : static_cast<double>(optimal_steps) /
                static_cast<double>(total_steps);

  for (int k : config.snapshots) {
    SnapshotTable table;
    table.step_index = k;
    for (const TrajectoryRecord& rec : records) {
      if (static_cast<std::size_t>(k) < rec.steps.size()) {
        table.sorted_costs.push_back(
            rec.steps[static_cast<std::size_t>(k)].cumulative_cost);
      }
    }
    std::sort(table.sorted_costs.begin(), table.sorted_costs.end());
    if (!table.sorted_costs.empty()) {
      double sum = 0.0;
      for (double c : table.sorted_costs) sum += c;
      table.mean = sum / static_cast<double>(table.sorted_costs.size());
      for (double q : config.quantile_levels) {
        table.quantiles.push_back(
            nearest_rank_quantile(table.sorted_costs, q));
      }
    }
    result.snapshots.push_back(std::move(table));
  }
  result.runs = std::move(records);
  return result;
}

// Formats a double the way "%g" does, for file names.
std::string format_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

class OutputFile {
 public:
  OutputFile(const std::filesystem::path& path)
      : path_(path), f_(std::fopen(path.c_str(), "wb")) {
    if (f_ == nullptr) {
      throw std::runtime_error("cannot open for writing: " + path.string());
    }
  }
  ~OutputFile() {
    if (f_ != nullptr) std::fclose(f_);
  }
  OutputFile(const OutputFile&) = delete;
  OutputFile& operator=(const OutputFile&) = delete;

  void write(const char* text) {
    if (std::fputs(text, f_) < 0) {
      throw std::runtime_error("write failed: " + path_.string());
    }
  }
  template <typename... Args>
  void printf(const char* fmt, Args... args) {
    if (std::fprintf(f_, fmt, args...) < 0) {
      throw std::runtime_error("write failed: " + path_.string());
    }
  }
  void close() {
    if (f_ != nullptr && std::fclose(f_) != 0) {
      f_ = nullptr;
      throw std::runtime_error("close failed: " + path_.string());
    }
    f_ = nullptr;
  }

 private:
  std::filesystem::path path_;
  std::FILE* f_ = nullptr;
};

}  // namespace

std::uint64_t stable_hash(std::uint64_t seed, std::uint64_t a,
                          std::uint64_t b) {
  std::uint64_t state = seed;
  std::uint64_t h = splitmix64(state);
  state = h ^ (a + 0x9e3779b97f4a7c15ULL);
  h = splitmix64(state);
  state = h ^ (b + 0x9e3779b97f4a7c15ULL);
  return splitmix64(state);
}

ExperimentReport run_alpha_sweep(const SystemModel& model,
                                 const CostWeights& weights,
                                 const ConstraintSet& constraints,
                                 const ExperimentConfig& config) {
  validate_config(config, model.nx());

  ExperimentReport report;
  for (std::size_t ai = 0; ai < config.alphas.size(); ++ai) {
    const double alpha = config.alphas[ai];
    const RiskEnvelope envelope = cvar_envelope(model.pmf(), alpha);
    AlphaResult result;
    result.alpha = alpha;
    try {
      const TerminalDesign design =
          solve_pe(model, weights, constraints, envelope.vertices());
      result = aggregate_alpha(
          alpha, config,
          fan_out_runs(model, weights, constraints, design, envelope,
                       config, ai));
    } catch (const std::exception& e) {
      // Record the failure and keep sweeping the remaining levels.
      result.synthesized = false;
      result.failure_reason = e.what();
    }
    report.alpha_results.push_back(std::move(result));
  }
  return report;
}

ExperimentReport run_scaling_study(const ScalingConfig& config) {
  if (config.branches < 1 || config.nx < 1 || config.nu < 1) {
    throw std::invalid_argument("scaling study: bad dimensions");
  }
  if (config.runs < 1 || config.steps < 1 || config.horizons.empty()) {
    throw std::invalid_argument("scaling study: bad sweep shape");
  }

  const CostWeights weights(2.0 * Matrix::Identity(config.nx, config.nx),
                            Matrix::Identity(config.nu, config.nu));
  const ConstraintSet constraints(
      2.0 * Matrix::Identity(config.nx, config.nx), 5.0,
      Matrix::Identity(config.nu, config.nu), 1.0);

  ExperimentReport report;
  std::ostringstream note;

  // Generate a plant and synthesize its design; re-draw on the rare
  // unstabilizable sample, deterministically from the master seed.
  constexpr int kMaxAttempts = 32;
  std::vector<Matrix> A;
  std::vector<Matrix> B;
  Vector probabilities;
  TerminalDesign design;
  std::optional<RiskEnvelope> envelope;
  bool synthesized = false;
  for (int attempt = 0; attempt < kMaxAttempts && !synthesized; ++attempt) {
    std::mt19937_64 rng(
        stable_hash(config.master_seed, 0x5ca11u, attempt));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> radius(0.3, 0.95);
    std::exponential_distribution<double> expo(1.0);

    A.assign(config.branches, Matrix(config.nx, config.nx));
    B.assign(config.branches, Matrix(config.nx, config.nu));
    for (int j = 0; j < config.branches; ++j) {
      for (int r = 0; r < config.nx; ++r) {
        for (int c = 0; c < config.nx; ++c) A[j](r, c) = normal(rng);
      }
      const double target = radius(rng);
      const double rho =
          Eigen::EigenSolver<Matrix>(A[j], false)
              .eigenvalues()
              .cwiseAbs()
              .maxCoeff();
      if (rho > 0.0) A[j] *= target / rho;
      for (int r = 0; r < config.nx; ++r) {
        for (int c = 0; c < config.nu; ++c) B[j](r, c) = normal(rng);
      }
      for (int c = 0; c < config.nu; ++c) {
        const double norm = B[j].col(c).norm();
        if (norm > 1e-12) B[j].col(c) /= norm;
      }
    }
    probabilities = Vector(config.branches);
    for (int j = 0; j < config.branches; ++j) {
      probabilities(j) = std::max(expo(rng), 1e-12);
    }
    probabilities /= probabilities.sum();

    const SystemModel model(A, B, Pmf(probabilities));
    envelope.emplace(cvar_envelope(model.pmf(), config.alpha));
    try {
      design = solve_pe(model, weights, constraints, envelope->vertices());
      synthesized = true;
      note << "plant drawn at attempt " << attempt
           << " (master seed " << config.master_seed << "); ";
    } catch (const std::exception&) {
      // Unstabilizable draw; take the next one.
    }
  }
  if (!synthesized) {
    throw SynthesisInfeasibleError(
        "scaling study: no stabilizable plant found within the attempt "
        "budget");
  }
  const SystemModel model(A, B, Pmf(probabilities));
  const Ellipsoid terminal_set(design.shape);

  for (int horizon : config.horizons) {
    std::optional<ScenarioMpc> mpc;
    try {
      mpc.emplace(model, weights, constraints, design, *envelope, horizon,
                  config.node_cap);
    } catch (const std::length_error&) {
      note << "horizon " << horizon << " skipped: node cap exceeded; ";
      continue;
    }
    ScalingRow row;
    row.horizon = horizon;
    row.control_nodes = mpc->tree().interior_count();
    double solve_sum = 0.0;
    double build_sum = 0.0;
    for (int run = 0; run < config.runs; ++run) {
      std::mt19937_64 rng(stable_hash(
          config.master_seed, static_cast<std::uint64_t>(horizon),
          static_cast<std::uint64_t>(run)));
      std::normal_distribution<double> normal(0.0, 1.0);
      Vector direction(config.nx);
      do {
        for (int i = 0; i < config.nx; ++i) direction(i) = normal(rng);
      } while (direction.norm() < 1e-9);
      direction /= direction.norm();
      Vector x = 0.8 * (terminal_set.cholesky_factor() * direction);

      for (int k = 0; k < config.steps; ++k) {
        const MpcStepResult res = mpc->solve_step(x);
        solve_sum += res.solve_seconds;
        build_sum += res.build_seconds;
        row.solve_max_ms =
            std::max(row.solve_max_ms, res.solve_seconds * 1e3);
        ++row.measured_steps;
        const Vector u =
            res.optimal() ? res.control : Vector(design.gain * x);
        const int j = sample_branch(model.pmf(), uniform01(rng));
        x = model.A(j) * x + model.B(j) * u;
      }
    }
    if (row.measured_steps > 0) {
      row.solve_mean_ms = solve_sum * 1e3 / row.measured_steps;
      row.build_mean_ms = build_sum * 1e3 / row.measured_steps;
    }
    report.scaling.push_back(row);
  }
  report.generator_note = note.str();
  return report;
}

void emit_report(const ExperimentReport& report,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  for (const AlphaResult& ar : report.alpha_results) {
    if (!ar.synthesized) continue;
    for (const SnapshotTable& snap : ar.snapshots) {
      OutputFile csv(dir / ("cdf_" + format_short(ar.alpha) + "_" +
                            std::to_string(snap.step_index) + ".csv"));
      csv.write("cum_cost,empirical_cdf\n");
      const auto n = snap.sorted_costs.size();
      for (std::size_t i = 0; i < n; ++i) {
        // Collapse ties onto the last occurrence so costs are strictly
        // increasing and the final value is exactly 1.
        if (i + 1 < n && snap.sorted_costs[i + 1] == snap.sorted_costs[i]) {
          continue;
        }
        csv.printf("%.17g,%.17g\n", snap.sorted_costs[i],
                   static_cast<double>(i + 1) / static_cast<double>(n));
      }
      csv.close();
    }
  }

  nlohmann::ordered_json summary;
  summary["alphas"] = nlohmann::ordered_json::array();
  for (const AlphaResult& ar : report.alpha_results) {
    nlohmann::ordered_json entry;
    entry["alpha"] = ar.alpha;
    entry["synthesized"] = ar.synthesized;
    if (!ar.synthesized) {
      entry["failure_reason"] = ar.failure_reason;
    } else {
      entry["runs"] = ar.runs.size();
      entry["feasibility_rate"] = ar.feasibility_rate;
      entry["violation_count"] = ar.violation_count;
      entry["infeasible_step_count"] = ar.infeasible_step_count;
      entry["snapshots"] = nlohmann::ordered_json::array();
      for (const SnapshotTable& snap : ar.snapshots) {
        nlohmann::ordered_json s;
        s["k"] = snap.step_index;
        s["mean"] = snap.mean;
        s["quantiles"] = nlohmann::ordered_json::array();
        for (std::size_t qi = 0; qi < snap.quantiles.size(); ++qi) {
          s["quantiles"].push_back(snap.quantiles[qi]);
        }
        entry["snapshots"].push_back(std::move(s));
      }
    }
    summary["alphas"].push_back(std::move(entry));
  }
  summary["scaling"] = nlohmann::ordered_json::array();
  for (const ScalingRow& row : report.scaling) {
    nlohmann::ordered_json r;
    r["N"] = row.horizon;
    r["nodes"] = row.control_nodes;
    r["solve_mean_ms"] = row.solve_mean_ms;
    r["solve_max_ms"] = row.solve_max_ms;
    r["build_mean_ms"] = row.build_mean_ms;
    r["measured_steps"] = row.measured_steps;
    summary["scaling"].push_back(std::move(r));
  }
  if (!report.generator_note.empty()) {
    summary["generator_note"] = report.generator_note;
  }
  {
    OutputFile json_out(dir / "summary.json");
    json_out.printf("%s\n", summary.dump(2).c_str());
    json_out.close();
  }

  if (!report.scaling.empty()) {
    OutputFile csv(dir / "scaling.csv");
    csv.write("N,nodes,mean_ms,max_ms\n");
    for (const ScalingRow& row : report.scaling) {
      csv.printf("%d,%lld,%.17g,%.17g\n", row.horizon,
                 static_cast<long long>(row.control_nodes),
                 row.solve_mean_ms, row.solve_max_ms);
    }
    csv.close();
  }
}

}  // namespace riskmpc
