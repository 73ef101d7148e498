#include "mbflow/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mbflow::harness {

using nlohmann::json;

std::string to_string(Family f) {
  switch (f) {
    case Family::Custom: return "custom";
    case Family::Sparse: return "sparse";
    case Family::ConstrainedQp: return "constrained-qp";
    case Family::Obstacle: return "obstacle-dd";
  }
  return "?";
}

Family parse_family(const std::string& s) {
  if (s == "custom") return Family::Custom;
  if (s == "sparse") return Family::Sparse;
  if (s == "constrained-qp") return Family::ConstrainedQp;
  if (s == "obstacle-dd") return Family::Obstacle;
  throw ConfigError("family", "unknown family '" + s + "' (custom, sparse, constrained-qp, obstacle-dd)");
}

namespace {

bool same(const Mat& a, const Mat& b) { return a.rows() == b.rows() && a.cols() == b.cols() && a == b; }

}  // namespace

bool CustomTerm::operator==(const CustomTerm& o) const {
  return type == o.type && same(h, o.h) && same(c, o.c) && constant == o.constant && lambda == o.lambda &&
         dimension == o.dimension;
}

bool CustomBlock::operator==(const CustomBlock& o) const {
  return sub_potentials == o.sub_potentials && weights == o.weights && batches == o.batches &&
         batch_probs == o.batch_probs && same(u0, o.u0);
}

bool SparseBlock::operator==(const SparseBlock& o) const {
  return same(a, o.a) && same(b, o.b) && lambda == o.lambda && pi == o.pi && same(u0, o.u0) && h_ref == o.h_ref;
}

bool QpBlock::operator==(const QpBlock& o) const {
  return same(a, o.a) && same(b, o.b) && ud1 == o.ud1 && yd == o.yd && pi == o.pi && same(u0, o.u0) &&
         project_initial == o.project_initial && h_ref == o.h_ref;
}

namespace {

std::string integrator_name(flow::InnerIntegrator i) {
  return i == flow::InnerIntegrator::ProximalEuler ? "proximal-euler" : "explicit-euler";
}

// Walks one JSON object, remembering which keys were read so that leftovers
// can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where(), "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) throw ConfigError(child(key), "required key is missing");
    return *v;
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(child(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
  return d;
}

long long as_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<long long>();
}

std::uint64_t as_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  throw ConfigError(path, "expected a nonnegative integer");
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

Vec as_vec(const json& v, const std::string& path) { return to_vec(as_numbers(v, path)); }

Mat as_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "expected a nonempty array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < v.size(); ++i) rows.push_back(as_numbers(v[i], path + "[" + std::to_string(i) + "]"));
  const std::size_t cols = rows[0].size();
  if (cols == 0) throw ConfigError(path + "[0]", "rows must be nonempty");
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw ConfigError(path + "[" + std::to_string(i) + "]", "row length differs from row 0");
    for (std::size_t k = 0; k < cols; ++k) m(static_cast<Index>(i), static_cast<Index>(k)) = rows[i][k];
  }
  return m;
}

json vec_json(const Vec& v) { return json(to_std(v)); }

json mat_json(const Mat& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) rows.push_back(to_std(m.row(i).transpose()));
  return rows;
}

void check_probabilities(const std::vector<double>& p, std::size_t expected, const std::string& path) {
  if (expected != 0 && p.size() != expected)
    throw ConfigError(path, "expected " + std::to_string(expected) + " entries");
  double s = 0.0;
  for (double x : p) {
    if (!(x > 0.0)) throw ConfigError(path, "entries must be positive");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ConfigError(path, "entries must sum to 1");
}

CustomBlock parse_custom(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  CustomBlock b;
  const json& terms = r.require("sub_potentials");
  if (!terms.is_array() || terms.empty()) throw ConfigError(r.child("sub_potentials"), "expected a nonempty array");
  Index dim = -1;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string tp = r.child("sub_potentials") + "[" + std::to_string(i) + "]";
    ObjectReader t(terms[i], tp);
    CustomTerm term;
    term.type = as_string(t.require("type"), t.child("type"));
    if (term.type == "quadratic") {
      term.h = as_matrix(t.require("H"), t.child("H"));
      if (term.h.rows() != term.h.cols()) throw ConfigError(t.child("H"), "must be square");
      term.c = t.has("c") ? as_vec(*t.get("c"), t.child("c")) : Vec::Zero(term.h.rows());
      if (term.c.size() != term.h.rows()) throw ConfigError(t.child("c"), "length must match H");
      if (const json* k = t.get("constant")) term.constant = as_number(*k, t.child("constant"));
      term.dimension = term.h.rows();
    } else if (term.type == "l1") {
      term.lambda = as_number(t.require("lambda"), t.child("lambda"));
      if (term.lambda < 0.0) throw ConfigError(t.child("lambda"), "must be nonnegative");
      term.dimension = as_integer(t.require("dimension"), t.child("dimension"));
      if (term.dimension < 1) throw ConfigError(t.child("dimension"), "must be positive");
    } else {
      throw ConfigError(t.child("type"), "unknown sub-potential type '" + term.type + "' (quadratic, l1)");
    }
    t.finish();
    if (dim >= 0 && term.dimension != dim) throw ConfigError(tp, "dimension differs from sub_potentials[0]");
    dim = term.dimension;
    b.sub_potentials.push_back(std::move(term));
  }
  const std::size_t n = b.sub_potentials.size();
  b.weights = as_numbers(r.require("weights"), r.child("weights"));
  if (b.weights.size() != n) throw ConfigError(r.child("weights"), "need one weight per sub-potential");
  const json& batches = r.require("batches");
  if (!batches.is_array() || batches.empty()) throw ConfigError(r.child("batches"), "expected a nonempty array");
  for (std::size_t j2 = 0; j2 < batches.size(); ++j2) {
    const std::string bp = r.child("batches") + "[" + std::to_string(j2) + "]";
    if (!batches[j2].is_array() || batches[j2].empty()) throw ConfigError(bp, "expected a nonempty index array");
    std::vector<int> idx;
    for (std::size_t k = 0; k < batches[j2].size(); ++k) {
      const auto v = as_integer(batches[j2][k], bp + "[" + std::to_string(k) + "]");
      if (v < 1 || v > static_cast<long long>(n))
        throw ConfigError(bp + "[" + std::to_string(k) + "]", "index must be in 1.." + std::to_string(n));
      idx.push_back(static_cast<int>(v));
    }
    b.batches.push_back(std::move(idx));
  }
  b.batch_probs = as_numbers(r.require("batch_probs"), r.child("batch_probs"));
  check_probabilities(b.batch_probs, b.batches.size(), r.child("batch_probs"));
  b.u0 = as_vec(r.require("u0"), r.child("u0"));
  if (b.u0.size() != dim) throw ConfigError(r.child("u0"), "length must match the sub-potential dimension");
  r.finish();
  return b;
}

SparseBlock parse_sparse(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  SparseBlock b;
  b.a = as_matrix(r.require("A"), r.child("A"));
  b.b = as_vec(r.require("b"), r.child("b"));
  if (b.b.size() != b.a.rows()) throw ConfigError(r.child("b"), "length must equal the number of rows of A");
  if (const json* v = r.get("lambda")) b.lambda = as_number(*v, r.child("lambda"));
  if (b.lambda < 0.0) throw ConfigError(r.child("lambda"), "must be nonnegative");
  if (const json* v = r.get("pi")) b.pi = as_numbers(*v, r.child("pi"));
  check_probabilities(b.pi, 2, r.child("pi"));
  b.u0 = Vec::Zero(b.a.cols());
  if (const json* v = r.get("u0")) b.u0 = as_vec(*v, r.child("u0"));
  if (b.u0.size() != b.a.cols()) throw ConfigError(r.child("u0"), "length must equal the number of columns of A");
  if (const json* v = r.get("h_ref")) b.h_ref = as_number(*v, r.child("h_ref"));
  if (!(b.h_ref > 0.0)) throw ConfigError(r.child("h_ref"), "must be positive");
  r.finish();
  return b;
}

QpBlock parse_qp(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  QpBlock b;
  b.a.resize(5, 2);
  b.a << 5, 3, 4, 6, 1, -2, -1, 0, 0, 1;
  b.b.resize(5);
  b.b << 120, 150, 0, -7, 15;
  if (const json* c = r.get("constraints")) {
    ObjectReader cr(*c, r.child("constraints"));
    b.a = as_matrix(cr.require("A"), cr.child("A"));
    if (b.a.cols() != 2) throw ConfigError(cr.child("A"), "rows must have 2 entries");
    b.b = as_vec(cr.require("b"), cr.child("b"));
    if (b.b.size() != b.a.rows()) throw ConfigError(cr.child("b"), "length must equal the number of rows of A");
    cr.finish();
  }
  if (const json* v = r.get("ud1")) b.ud1 = as_number(*v, r.child("ud1"));
  if (const json* v = r.get("yd")) b.yd = as_number(*v, r.child("yd"));
  if (const json* v = r.get("pi")) b.pi = as_numbers(*v, r.child("pi"));
  check_probabilities(b.pi, 3, r.child("pi"));
  b.u0 = (Vec(2) << 13.0, 8.0).finished();
  if (const json* v = r.get("u0")) b.u0 = as_vec(*v, r.child("u0"));
  if (b.u0.size() != 2) throw ConfigError(r.child("u0"), "expected 2 entries");
  if (const json* v = r.get("project_initial")) b.project_initial = as_bool(*v, r.child("project_initial"));
  if (const json* v = r.get("h_ref")) b.h_ref = as_number(*v, r.child("h_ref"));
  if (!(b.h_ref > 0.0)) throw ConfigError(r.child("h_ref"), "must be positive");
  r.finish();
  return b;
}

ObstacleBlock parse_obstacle(const json& j, const std::string& path, double horizon) {
  ObjectReader r(j, path);
  ObstacleBlock b;
  if (const json* v = r.get("grid")) b.grid = static_cast<int>(as_integer(*v, r.child("grid")));
  if (b.grid < 4) throw ConfigError(r.child("grid"), "need at least 4 interior nodes");
  if (const json* v = r.get("delta")) b.delta = as_number(*v, r.child("delta"));
  if (!(b.delta > 0.0)) throw ConfigError(r.child("delta"), "must be positive");
  if (const json* v = r.get("smooth_width")) b.smooth_width = as_number(*v, r.child("smooth_width"));
  if (!(b.smooth_width > 0.0)) throw ConfigError(r.child("smooth_width"), "must be positive");
  if (const json* v = r.get("ramp_halfwidth")) b.ramp_halfwidth = as_number(*v, r.child("ramp_halfwidth"));
  if (!(b.ramp_halfwidth > 0.0 && b.ramp_halfwidth < 1.0))
    throw ConfigError(r.child("ramp_halfwidth"), "must lie in (0, 1)");
  if (const json* v = r.get("h_ref")) b.h_ref = as_number(*v, r.child("h_ref"));
  if (b.h_ref < 0.0) throw ConfigError(r.child("h_ref"), "must be nonnegative");
  if (const json* v = r.get("zero_variance")) b.zero_variance = as_bool(*v, r.child("zero_variance"));
  b.snapshot_times = {horizon};
  if (const json* v = r.get("snapshot_times")) b.snapshot_times = as_numbers(*v, r.child("snapshot_times"));
  for (double t : b.snapshot_times)
    if (t < 0.0 || t > horizon) throw ConfigError(r.child("snapshot_times"), "times must lie in [0, T]");
  r.finish();
  return b;
}

TimingBlock parse_timing(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  TimingBlock b;
  if (const json* v = r.get("sizes")) {
    if (!v->is_array()) throw ConfigError(r.child("sizes"), "expected an array of integers");
    b.sizes.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto d = as_integer((*v)[i], r.child("sizes") + "[" + std::to_string(i) + "]");
      if (d < 1) throw ConfigError(r.child("sizes") + "[" + std::to_string(i) + "]", "must be positive");
      b.sizes.push_back(static_cast<int>(d));
    }
  }
  if (const json* v = r.get("repeats")) b.repeats = static_cast<int>(as_integer(*v, r.child("repeats")));
  if (b.repeats < 1) throw ConfigError(r.child("repeats"), "must be positive");
  if (const json* v = r.get("epsilon")) b.epsilon = as_number(*v, r.child("epsilon"));
  if (const json* v = r.get("h")) b.h = as_number(*v, r.child("h"));
  if (const json* v = r.get("horizon")) b.horizon = as_number(*v, r.child("horizon"));
  if (!(b.epsilon > 0.0) || !(b.h > 0.0) || !(b.horizon > 0.0))
    throw ConfigError(r.where(), "epsilon, h and horizon must be positive");
  if (b.epsilon > b.horizon) throw ConfigError(r.child("epsilon"), "must not exceed the horizon");
  r.finish();
  return b;
}

struct FamilyDefaults {
  double horizon;
  std::vector<double> epsilons;
  std::size_t realizations;
  flow::Scheme scheme;
};

FamilyDefaults defaults_for(Family f) {
  switch (f) {
    case Family::Custom: return {1.0, {0.1}, 16, flow::Scheme::MiniBatchFlow};
    case Family::Sparse: return {5.0, {0.04}, 16, flow::Scheme::MiniBatchFlow};
    case Family::ConstrainedQp: return {10.0, {0.04}, 16, flow::Scheme::MiniBatchFlow};
    case Family::Obstacle: return {0.5, {0.5 / 60.0}, 8, flow::Scheme::MinimizingMovement};
  }
  return {1.0, {0.1}, 16, flow::Scheme::MiniBatchFlow};
}

}  // namespace

ExperimentConfig from_json(const json& j) {
  ObjectReader r(j, "");
  ExperimentConfig c;

  const char* blocks[] = {"custom", "sparse", "constrained-qp", "obstacle-dd"};
  std::vector<std::string> present;
  for (const char* b : blocks)
    if (r.has(b)) present.emplace_back(b);
  if (present.size() != 1)
    throw ConfigError("<root>", "exactly one family block (custom, sparse, constrained-qp, obstacle-dd) is required, found " +
                                    std::to_string(present.size()));
  c.family = parse_family(present[0]);
  if (const json* v = r.get("family")) {
    if (parse_family(as_string(*v, "family")) != c.family)
      throw ConfigError("family", "does not match the family block '" + present[0] + "'");
  }
  const FamilyDefaults d = defaults_for(c.family);

  c.scheme = d.scheme;
  if (const json* v = r.get("scheme")) {
    try {
      c.scheme = flow::parse_scheme(as_string(*v, "scheme"));
    } catch (const InvalidArgument&) {
      throw ConfigError("scheme", "unknown scheme (flow, mini-batch, minimizing-movement)");
    }
  }
  if (c.family == Family::Obstacle && c.scheme == flow::Scheme::MiniBatchFlow)
    throw ConfigError("scheme", "obstacle-dd supports flow and minimizing-movement only");

  c.horizon = d.horizon;
  if (const json* v = r.get("T")) c.horizon = as_number(*v, "T");
  if (!(c.horizon > 0.0)) throw ConfigError("T", "must be positive");

  c.epsilons = d.epsilons;
  if (const json* v = r.get("epsilons")) c.epsilons = as_numbers(*v, "epsilons");
  if (c.epsilons.empty()) throw ConfigError("epsilons", "must not be empty");
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    const std::string p = "epsilons[" + std::to_string(i) + "]";
    if (!(c.epsilons[i] > 0.0)) throw ConfigError(p, "must be positive");
    if (c.epsilons[i] > c.horizon * (1.0 + 1e-12)) throw ConfigError(p, "must not exceed T");
    if (i > 0 && !(c.epsilons[i] < c.epsilons[i - 1])) throw ConfigError(p, "epsilons must be strictly decreasing");
  }

  c.realizations = d.realizations;
  if (const json* v = r.get("realizations")) {
    const auto n = as_integer(*v, "realizations");
    if (n < 1) throw ConfigError("realizations", "must be at least 1");
    c.realizations = static_cast<std::size_t>(n);
  }
  if (const json* v = r.get("seed")) c.seed = as_seed(*v, "seed");
  if (const json* v = r.get("inner_step")) c.inner_step = as_number(*v, "inner_step");
  if (c.inner_step < 0.0) throw ConfigError("inner_step", "must be nonnegative (0 selects the default)");
  if (const json* v = r.get("integrator")) {
    const auto s = as_string(*v, "integrator");
    if (s == "proximal-euler") {
      c.integrator = flow::InnerIntegrator::ProximalEuler;
    } else if (s == "explicit-euler") {
      c.integrator = flow::InnerIntegrator::ExplicitEuler;
    } else {
      throw ConfigError("integrator", "unknown integrator (proximal-euler, explicit-euler)");
    }
  }
  if (const json* v = r.get("output_dir")) c.output_dir = as_string(*v, "output_dir");

  switch (c.family) {
    case Family::Custom: c.custom = parse_custom(r.require("custom"), "custom"); break;
    case Family::Sparse: c.sparse = parse_sparse(r.require("sparse"), "sparse"); break;
    case Family::ConstrainedQp: c.constrained_qp = parse_qp(r.require("constrained-qp"), "constrained-qp"); break;
    case Family::Obstacle: c.obstacle = parse_obstacle(r.require("obstacle-dd"), "obstacle-dd", c.horizon); break;
  }
  if (const json* v = r.get("timing")) c.timing = parse_timing(*v, "timing");
  r.finish();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  return from_json(j);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["family"] = to_string(c.family);
  j["scheme"] = flow::to_string(c.scheme);
  j["T"] = c.horizon;
  j["epsilons"] = c.epsilons;
  j["realizations"] = c.realizations;
  j["seed"] = c.seed;
  j["inner_step"] = c.inner_step;
  j["integrator"] = integrator_name(c.integrator);
  j["output_dir"] = c.output_dir;
  if (c.custom) {
    json b;
    json terms = json::array();
    for (const auto& t : c.custom->sub_potentials) {
      json tj;
      tj["type"] = t.type;
      if (t.type == "quadratic") {
        tj["H"] = mat_json(t.h);
        tj["c"] = vec_json(t.c);
        tj["constant"] = t.constant;
      } else {
        tj["lambda"] = t.lambda;
        tj["dimension"] = t.dimension;
      }
      terms.push_back(tj);
    }
    b["sub_potentials"] = terms;
    b["weights"] = c.custom->weights;
    b["batches"] = c.custom->batches;
    b["batch_probs"] = c.custom->batch_probs;
    b["u0"] = vec_json(c.custom->u0);
    j["custom"] = b;
  }
  if (c.sparse) {
    const auto& s = *c.sparse;
    j["sparse"] = {{"A", mat_json(s.a)}, {"b", vec_json(s.b)}, {"lambda", s.lambda},
                   {"pi", s.pi},         {"u0", vec_json(s.u0)}, {"h_ref", s.h_ref}};
  }
  if (c.constrained_qp) {
    const auto& q = *c.constrained_qp;
    j["constrained-qp"] = {{"constraints", {{"A", mat_json(q.a)}, {"b", vec_json(q.b)}}},
                           {"ud1", q.ud1},
                           {"yd", q.yd},
                           {"pi", q.pi},
                           {"u0", vec_json(q.u0)},
                           {"project_initial", q.project_initial},
                           {"h_ref", q.h_ref}};
  }
  if (c.obstacle) {
    const auto& o = *c.obstacle;
    j["obstacle-dd"] = {{"grid", o.grid},
                        {"delta", o.delta},
                        {"smooth_width", o.smooth_width},
                        {"ramp_halfwidth", o.ramp_halfwidth},
                        {"h_ref", o.h_ref},
                        {"zero_variance", o.zero_variance},
                        {"snapshot_times", o.snapshot_times}};
  }
  if (c.timing) {
    const auto& t = *c.timing;
    j["timing"] = {{"sizes", t.sizes},
                   {"repeats", t.repeats},
                   {"epsilon", t.epsilon},
                   {"h", t.h},
                   {"horizon", t.horizon}};
  }
  return j;
}

}  // namespace mbflow::harness
