#include "mbflow/harness/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mbflow/convex/operators.hpp"
#include "mbflow/convex/potentials.hpp"
#include "mbflow/flow/batch_system.hpp"
#include "mbflow/flow/monte_carlo.hpp"
#include "mbflow/harness/io.hpp"
#include "mbflow/problems/constrained_qp.hpp"
#include "mbflow/problems/obstacle.hpp"
#include "mbflow/problems/sparse.hpp"
#include "mbflow/rng.hpp"
#include "mbflow/version.hpp"

namespace mbflow::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["version"] = version;
  j["config"] = config;
  j["seeds"] = seeds;
  json st = json::array();
  for (const auto& s : stages) st.push_back({{"name", s.name}, {"seconds", s.seconds}});
  j["stages"] = st;
  json files_j = json::array();
  for (const auto& f : files) files_j.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["files"] = files_j;
  return j;
}

json RunError::record() const {
  json j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = what();
  j["family"] = family;
  j["epsilon"] = optional_json(epsilon);
  j["realization"] = realization ? json(*realization) : json(nullptr);
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["time"] = optional_json(time);
  return j;
}

json error_record(const std::exception& e, const std::string& command) {
  json j;
  if (const auto* re = dynamic_cast<const RunError*>(&e)) {
    j = re->record();
  } else {
    j["status"] = "error";
    j["message"] = e.what();
    if (const auto* ce = dynamic_cast<const ConfigError*>(&e)) {
      j["kind"] = "config";
      j["key"] = ce->path();
    } else if (dynamic_cast<const SolverError*>(&e)) {
      j["kind"] = "solver";
    } else if (dynamic_cast<const InvalidArgument*>(&e)) {
      j["kind"] = "invalid-argument";
    } else {
      j["kind"] = "error";
    }
  }
  j["command"] = command;
  return j;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Everything the commands need from a family.
struct Setup {
  flow::MonteCarloModel model;
  flow::ErrorMetric metric = flow::ErrorMetric::Squared;
  std::shared_ptr<const problems::ObstacleModel> obstacle;
};

flow::BatchSystem custom_system(const CustomBlock& b) {
  flow::BatchSystemData data;
  for (const auto& t : b.sub_potentials) {
    if (t.type == "quadratic") {
      data.sub_potentials.push_back(std::make_shared<convex::QuadraticPotential>(t.h, t.c, t.constant));
    } else {
      data.sub_potentials.push_back(std::make_shared<convex::L1Potential>(t.dimension, t.lambda));
    }
  }
  data.weights = b.weights;
  for (const auto& batch : b.batches) {
    std::vector<Index> idx;
    for (int i : batch) idx.push_back(i - 1);
    data.batches.push_back(idx);
  }
  data.batch_probs = b.batch_probs;
  flow::BatchSystem sys(std::move(data));
  const auto v = flow::validate_batch_system(sys);
  if (!v.ok()) throw ConfigError("custom", v.message);
  return sys;
}

std::shared_ptr<const problems::ObstacleModel> obstacle_model(const ExperimentConfig& c) {
  const auto& o = *c.obstacle;
  problems::Grid2D grid(o.grid);
  auto spec = problems::example_obstacle_spec(grid);
  spec.delta = o.delta;
  spec.smooth_width = o.smooth_width;
  spec.horizon = c.horizon;
  problems::DdBatches batches;
  batches.zero_variance = o.zero_variance;
  return std::make_shared<const problems::ObstacleModel>(grid, spec, o.ramp_halfwidth, batches);
}

Setup build_setup(const ExperimentConfig& c) {
  Setup s;
  // The model's realize hook is only used for randomized schemes.
  const flow::Scheme scheme = c.scheme == flow::Scheme::GradientFlow ? flow::Scheme::MiniBatchFlow : c.scheme;
  switch (c.family) {
    case Family::Custom: {
      const auto sys = custom_system(*c.custom);
      flow::FlowOptions fo;
      fo.inner_step = c.inner_step;
      fo.integrator = c.integrator;
      s.model = flow::make_model(sys, c.custom->u0, c.horizon, scheme, fo, fo);
      break;
    }
    case Family::Sparse: {
      problems::SparseProblem p;
      p.a = c.sparse->a;
      p.b = c.sparse->b;
      p.lambda = c.sparse->lambda;
      p.pi1 = c.sparse->pi[0];
      p.pi2 = c.sparse->pi[1];
      s.model = problems::make_sparse_model(p, c.sparse->u0, c.horizon, c.sparse->h_ref, scheme);
      break;
    }
    case Family::ConstrainedQp: {
      const auto& q = *c.constrained_qp;
      problems::ConstrainedProblem p;
      try {
        p.set = std::make_shared<convex::Polyhedron>(q.a, q.b);
      } catch (const InvalidArgument& e) {
        throw ConfigError("constrained-qp.constraints", e.what());
      }
      p.ud1 = q.ud1;
      p.yd = q.yd;
      std::copy(q.pi.begin(), q.pi.end(), p.pi.begin());
      Vec u0 = q.u0;
      if (!p.set->contains(u0, 1e-10)) {
        if (!q.project_initial)
          throw ConfigError("constrained-qp.u0", "initial point is not in the feasible set (set project_initial)");
        u0 = p.set->project(u0);
      }
      s.model = problems::make_qp_model(p, u0, c.horizon, q.h_ref, c.inner_step, scheme);
      break;
    }
    case Family::Obstacle: {
      s.obstacle = obstacle_model(c);
      const double h_ref = c.obstacle->h_ref > 0.0
                               ? c.obstacle->h_ref
                               : *std::min_element(c.epsilons.begin(), c.epsilons.end()) / 16.0;
      s.model = s.obstacle->monte_carlo_model(h_ref);
      s.metric = flow::ErrorMetric::Norm;
      break;
    }
  }
  return s;
}

std::string trajectory_csv(const std::vector<double>& times, const std::vector<Vec>& states) {
  std::vector<std::string> header{"t"};
  const Index d = states.empty() ? 0 : states.front().size();
  for (Index i = 0; i < d; ++i) header.push_back("u" + std::to_string(i));
  CsvWriter w(header);
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> row{times[k]};
    for (Index i = 0; i < d; ++i) row.push_back(states[k][i]);
    w.row(row);
  }
  return w.str();
}

std::string snapshot_csv(const problems::Grid2D& grid, const Vec& u) {
  CsvWriter w({"x", "y", "u"});
  for (int r = 0; r < grid.n; ++r)
    for (int col = 0; col < grid.n; ++col) w.row({grid.coord(col), grid.coord(r), u[grid.index(r, col)]});
  return w.str();
}

// Collects written files so the manifest can list them.
class RunDir {
 public:
  explicit RunDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw RunError("cannot create output directory " + dir_.string() + ": " + ec.message(), "io", "");
  }

  void write(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    files_.push_back({name, sha256_hex(content), content.size()});
  }

  const std::vector<FileRecord>& files() const { return files_; }
  const fs::path& path() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<FileRecord> files_;
};

// Runs f, turning library errors into RunError with the given context.
template <class F>
auto with_context(const ExperimentConfig& c, std::optional<double> eps, F&& f) -> decltype(f()) {
  const std::string fam = to_string(c.family);
  try {
    return f();
  } catch (const RunError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const flow::RealizationError& e) {
    using Cause = flow::RealizationError::Cause;
    RunError re(fam + ": " + e.what(),
                e.cause() == Cause::Solver ? "solver" : e.cause() == Cause::InvalidArgument ? "invalid-argument" : "error",
                fam);
    re.epsilon = e.epsilon();
    re.realization = e.realization();
    re.seed = e.seed();
    re.time = e.time();
    throw re;
  } catch (const SolverError& e) {
    RunError re(fam + ": " + e.what(), "solver", fam);
    re.epsilon = eps;
    re.time = e.time();
    throw re;
  } catch (const InvalidArgument& e) {
    RunError re(fam + ": " + e.what(), "invalid-argument", fam);
    re.epsilon = eps;
    throw re;
  } catch (const std::exception& e) {
    RunError re(fam + ": " + e.what(), "error", fam);
    re.epsilon = eps;
    throw re;
  }
}

json fit_json(const flow::SlopeFit& f) {
  if (f.degenerate) return {{"degenerate", true}, {"slope", nullptr}, {"std_err", nullptr}, {"intercept", nullptr}};
  return {{"degenerate", false}, {"slope", f.slope}, {"std_err", f.std_err}, {"intercept", f.intercept}};
}

const char* metric_name(flow::ErrorMetric m) { return m == flow::ErrorMetric::Squared ? "squared" : "norm"; }

void write_convergence(RunDir& dir, const ExperimentConfig& c, const Setup& s,
                       const std::vector<flow::ErrorCurve>& curves, std::uint64_t seed) {
  CsvWriter sq({"epsilon", "sup_mse", "std_err", "R"});
  CsvWriter nm({"epsilon", "sup_mean_error", "std_err", "R"});
  std::vector<double> eps, sup_sq, sup_nm, se_sq, se_nm;
  for (const auto& cv : curves) {
    const auto r = static_cast<double>(cv.realizations);
    sq.row({cv.epsilon, cv.sup_mse, cv.sup_mse_std_err, r});
    nm.row({cv.epsilon, cv.sup_norm, cv.sup_norm_std_err, r});
    eps.push_back(cv.epsilon);
    sup_sq.push_back(cv.sup_mse);
    sup_nm.push_back(cv.sup_norm);
    se_sq.push_back(cv.sup_mse_std_err);
    se_nm.push_back(cv.sup_norm_std_err);
  }
  dir.write("convergence.csv", sq.str());
  dir.write("convergence_norm.csv", nm.str());

  json rep;
  rep["family"] = to_string(c.family);
  rep["scheme"] = flow::to_string(c.scheme);
  rep["metric"] = metric_name(s.metric);
  rep["realizations"] = c.realizations;
  rep["base_seed"] = seed;
  rep["epsilons"] = eps;
  rep["sup_mse"] = sup_sq;
  rep["sup_mse_std_err"] = se_sq;
  rep["sup_mean_error"] = sup_nm;
  rep["sup_mean_error_std_err"] = se_nm;
  if (eps.size() >= 3) {
    const auto fs_ = flow::fit_slope(eps, sup_sq);
    const auto fn = flow::fit_slope(eps, sup_nm);
    rep["fit_squared"] = fit_json(fs_);
    rep["fit_norm"] = fit_json(fn);
    rep["fit"] = fit_json(s.metric == flow::ErrorMetric::Squared ? fs_ : fn);
  } else {
    rep["fit"] = nullptr;
  }
  dir.write("report.json", rep.dump(2) + "\n");
}

// Single-realization curve in the ErrorCurve layout (standard errors NaN).
flow::ErrorCurve single_curve(const flow::MonteCarloModel& m, double eps, std::uint64_t seed) {
  flow::ErrorCurve c;
  c.epsilon = eps;
  c.realizations = 1;
  c.base_seed = seed;
  c.mean_sq = flow::realization_error(m, eps, seed, &c.times);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  c.std_err_sq.assign(c.mean_sq.size(), nan);
  c.std_err_norm.assign(c.mean_sq.size(), nan);
  for (double v : c.mean_sq) c.mean_norm.push_back(std::sqrt(v));
  const auto i = static_cast<std::size_t>(std::max_element(c.mean_sq.begin(), c.mean_sq.end()) - c.mean_sq.begin());
  c.sup_mse = c.mean_sq[i];
  c.sup_norm = c.mean_norm[i];
  c.sup_mse_std_err = c.sup_norm_std_err = nan;
  return c;
}

std::string error_curve_csv(const flow::ErrorCurve& c) {
  CsvWriter w({"t", "mean_sq_error", "std_err", "R"});
  for (std::size_t i = 0; i < c.times.size(); ++i)
    w.row({c.times[i], c.mean_sq[i], c.std_err_sq[i], static_cast<double>(c.realizations)});
  return w.str();
}

RunManifest finish(RunDir& dir, const std::string& command, const ExperimentConfig& c,
                   std::vector<StageTiming> stages, std::vector<std::uint64_t> seeds) {
  RunManifest m;
  m.command = command;
  m.version = MBFLOW_VERSION_STRING;
  m.config = to_json(c);
  m.seeds = std::move(seeds);
  m.stages = std::move(stages);
  m.files = dir.files();
  write_file(dir.path() / "manifest.json", m.to_json().dump(2) + "\n");
  return m;
}

ExperimentConfig resolve(const ExperimentConfig& config, const RunOptions& opts) {
  ExperimentConfig c = config;
  if (opts.seed) c.seed = *opts.seed;
  if (!opts.out_dir.empty()) c.output_dir = opts.out_dir.string();
  if (c.output_dir.empty()) throw ConfigError("output_dir", "no output directory given (use --out)");
  return c;
}

std::vector<std::uint64_t> seed_list(const ExperimentConfig& c) {
  std::vector<std::uint64_t> s;
  for (std::size_t r = 0; r < c.realizations; ++r) s.push_back(c.seed + r);
  return s;
}

RunManifest run_impl(const ExperimentConfig& config, const RunOptions& opts, bool with_trajectories,
                     const std::string& command) {
  const ExperimentConfig c = resolve(config, opts);
  RunDir dir(c.output_dir);
  std::vector<StageTiming> stages;

  auto t0 = Clock::now();
  const Setup s = with_context(c, std::nullopt, [&] { return build_setup(c); });
  stages.push_back({"setup", seconds_since(t0)});

  if (c.scheme == flow::Scheme::GradientFlow) {
    if (!with_trajectories) throw ConfigError("scheme", "sweep needs a randomized scheme");
    t0 = Clock::now();
    const auto nodes = flow::make_time_grid(c.horizon, 0.0, s.model.uniform_nodes);
    const auto states = with_context(c, std::nullopt, [&] { return s.model.reference(nodes); });
    dir.write("trajectory_reference.csv", trajectory_csv(nodes, states));
    stages.push_back({"reference", seconds_since(t0)});
    return finish(dir, command, c, stages, {});
  }

  flow::MonteCarloOptions mc;
  mc.realizations = c.realizations;
  mc.base_seed = c.seed;
  mc.threads = opts.threads;
  std::vector<flow::ErrorCurve> curves;
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    const double eps = c.epsilons[i];
    const std::string tag = "eps" + std::to_string(i);
    t0 = Clock::now();
    if (with_trajectories) {
      with_context(c, eps, [&] {
        const auto nodes = flow::make_time_grid(c.horizon, eps, s.model.uniform_nodes);
        dir.write("trajectory_" + tag + "_reference.csv", trajectory_csv(nodes, s.model.reference(nodes)));
        const auto schedule = flow::draw_schedule(s.model.batch_probs, eps, c.horizon, c.seed);
        try {
          dir.write("trajectory_" + tag + "_r0.csv", trajectory_csv(nodes, s.model.realize(schedule, nodes)));
        } catch (const SolverError& e) {
          throw flow::RealizationError(e.what(), flow::RealizationError::Cause::Solver, eps, 0, c.seed, e.time());
        }
        if (s.obstacle) {
          auto times = c.obstacle->snapshot_times;
          std::sort(times.begin(), times.end());
          const auto ref = s.model.reference(times);
          const auto real = s.model.realize(schedule, times);
          for (std::size_t k = 0; k < times.size(); ++k) {
            const std::string sfx = "_t" + std::to_string(k) + ".csv";
            dir.write("snapshot_" + tag + "_reference" + sfx, snapshot_csv(s.obstacle->grid(), ref[k]));
            dir.write("snapshot_" + tag + "_r0" + sfx, snapshot_csv(s.obstacle->grid(), real[k]));
          }
        }
        return 0;
      });
    }
    curves.push_back(with_context(c, eps, [&] {
      return c.realizations >= 2 ? flow::expectation_error(s.model, eps, mc) : single_curve(s.model, eps, c.seed);
    }));
    dir.write("error_" + tag + ".csv", error_curve_csv(curves.back()));
    stages.push_back({"epsilon " + format_double(eps), seconds_since(t0)});
  }
  write_convergence(dir, c, s, curves, c.seed);
  return finish(dir, command, c, stages, seed_list(c));
}

}  // namespace

RunManifest run(const ExperimentConfig& config, const RunOptions& opts) { return run_impl(config, opts, true, "run"); }

RunManifest sweep(const ExperimentConfig& config, const RunOptions& opts) {
  if (config.epsilons.size() < 3) throw ConfigError("epsilons", "sweep needs at least 3 values");
  if (config.realizations < 2) throw ConfigError("realizations", "sweep needs at least 2");
  return run_impl(config, opts, false, "sweep");
}

std::vector<TimingRow> timing_report(const ExperimentConfig& config, const RunOptions& opts, RunManifest* manifest) {
  const ExperimentConfig c = resolve(config, opts);
  const TimingBlock tb = c.timing.value_or(TimingBlock{});
  RunDir dir(c.output_dir);
  std::vector<StageTiming> stages;
  std::vector<TimingRow> rows;
  const double lambda = c.sparse ? c.sparse->lambda : 1.0;
  const double pi1 = c.sparse ? c.sparse->pi[0] : 0.5;
  const double pi2 = 1.0 - pi1;

  for (int d : tb.sizes) {
    const auto t_size = Clock::now();
    const int r = (d + 1) / 2;
    const CounterRng rng(c.seed, 1000 + static_cast<std::uint64_t>(d));
    std::uint64_t k = 0;
    Mat a(r, d);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < d; ++j) a(i, j) = rng.uniform(k++);
    Vec b(r);
    for (Index i = 0; i < r; ++i) b[i] = rng.uniform(k++);
    const Mat ata = a.transpose() * a;
    const Vec atb = a.transpose() * b;
    // Keep both explicit schemes stable: h |A^T A| / pi_1 <= 1.
    const double lmax = Eigen::SelfAdjointEigenSolver<Mat>(ata, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double h = std::min(tb.h, pi1 / std::max(lmax, 1e-300));
    const auto steps = static_cast<long>(std::ceil(tb.horizon / h - 1e-9));
    const auto schedule = flow::draw_schedule(std::vector<double>{pi1, pi2}, tb.epsilon, tb.horizon, c.seed);
    const auto per_segment = static_cast<long>(std::max(1.0, std::round(tb.epsilon / h)));

    auto full_sub = [&](const Vec& u) {
      Vec g = ata * u - atb;
      for (Index i = 0; i < u.size(); ++i) {
        if (u[i] != 0.0) {
          g[i] += lambda * (u[i] > 0 ? 1.0 : -1.0);
        } else {
          g[i] = convex::shrink(g[i], lambda);
        }
      }
      return g;
    };
    double flow_total = 0.0, mb_total = 0.0, sink = 0.0;
    for (int rep = 0; rep < tb.repeats; ++rep) {
      auto t0 = Clock::now();
      Vec u = Vec::Zero(d);
      for (long s = 0; s < steps; ++s) u -= h * full_sub(u);
      flow_total += seconds_since(t0);
      sink += u.sum();

      t0 = Clock::now();
      Vec v = Vec::Zero(d);
      for (std::size_t seg = 1; seg <= schedule.size(); ++seg) {
        const bool quad = schedule.batch(seg) == 0;
        for (long s = 0; s < per_segment; ++s) {
          if (quad) {
            v -= (h / pi1) * (ata * v - atb);
          } else {
            v = convex::soft_threshold(v, h * lambda / pi2);
          }
        }
      }
      mb_total += seconds_since(t0);
      sink += v.sum();
    }
    TimingRow row;
    row.size = d;
    row.flow_seconds = flow_total / tb.repeats;
    row.minibatch_seconds = mb_total / tb.repeats;
    row.speedup = row.minibatch_seconds > 0.0 ? row.flow_seconds / row.minibatch_seconds : 0.0;
    if (!std::isfinite(sink)) throw RunError("timing: iterates diverged for d=" + std::to_string(d), "solver", "sparse");
    rows.push_back(row);
    stages.push_back({"size " + std::to_string(d), seconds_since(t_size)});
  }
  CsvWriter w({"size", "flow_seconds", "minibatch_seconds", "speedup"});
  for (const auto& row : rows) w.row({static_cast<double>(row.size), row.flow_seconds, row.minibatch_seconds, row.speedup});
  dir.write("timing.csv", w.str());
  auto m = finish(dir, "timing", c, stages, {c.seed});
  if (manifest) *manifest = m;
  return rows;
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("no manifest.json in " + dir.string());
  const json m = json::parse(in);
  std::vector<std::string> bad;
  for (const auto& f : m.at("files")) {
    const std::string p = f.at("path").get<std::string>();
    const fs::path full = dir / p;
    if (!fs::exists(full) || sha256_file(full) != f.at("sha256").get<std::string>()) bad.push_back(p);
  }
  return bad;
}

}  // namespace mbflow::harness
