#include "splitls/io.hpp"

#include <json.hpp>

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <utility>

namespace splitls {

using json = nlohmann::ordered_json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(join(path, key), "missing field");
  return *it;
}

double as_double(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

long as_long(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<long>();
}

std::uint64_t as_uint64(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !j.is_number_integer())
    throw ParseError(path, "expected an integer");
  return j.get<std::uint64_t>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ParseError(path, "expected a string");
  return j.get<std::string>();
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Index>(i)] =
        as_double(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

json mat_json(const Matrix& M) {
  json j;
  j["rows"] = M.rows();
  j["cols"] = M.cols();
  json data = json::array();
  for (Index r = 0; r < M.rows(); ++r)
    for (Index c = 0; c < M.cols(); ++c) data.push_back(M(r, c));
  j["data"] = std::move(data);
  return j;
}

Matrix mat_from(const json& j, const std::string& path) {
  const Index rows = as_long(require(j, path, "rows"), join(path, "rows"));
  const Index cols = as_long(require(j, path, "cols"), join(path, "cols"));
  if (rows < 0 || cols < 0) throw ParseError(path, "negative dimension");
  const json& data = require(j, path, "data");
  if (!data.is_array()) throw ParseError(join(path, "data"), "expected an array");
  if (static_cast<Index>(data.size()) != rows * cols)
    throw ParseError(join(path, "data"),
                     "expected " + std::to_string(rows * cols) + " entries, got " +
                         std::to_string(data.size()));
  Matrix M(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      M(r, c) = as_double(data[k], join(path, "data") + "[" + std::to_string(k) + "]");
      ++k;
    }
  }
  return M;
}

json set_json(const SetDescriptor& s) {
  json j;
  if (const auto* o = std::get_if<NonnegativeOrthant>(&s)) {
    j["type"] = "nonnegative_orthant";
    j["dim"] = o->dim;
  } else if (const auto* b = std::get_if<Ball>(&s)) {
    j["type"] = "ball";
    j["center"] = vec_json(b->center);
    j["radius"] = b->radius;
  } else if (const auto* a = std::get_if<AffineSet>(&s)) {
    j["type"] = "affine_set";
    j["A"] = mat_json(a->A);
    j["b"] = vec_json(a->b);
  } else if (const auto* c = std::get_if<Consensus>(&s)) {
    j["type"] = "consensus";
    j["blocks"] = c->blocks;
    j["block_dim"] = c->block_dim;
  } else if (const auto* h = std::get_if<Halfspace>(&s)) {
    j["type"] = "halfspace";
    j["normal"] = vec_json(h->normal);
    j["offset"] = h->offset;
  } else {
    const auto& hp = std::get<Hyperplane>(s);
    j["type"] = "hyperplane";
    j["normal"] = vec_json(hp.normal);
    j["offset"] = hp.offset;
  }
  return j;
}

SetDescriptor set_from(const json& j, const std::string& path) {
  const std::string type = as_string(require(j, path, "type"), join(path, "type"));
  if (type == "nonnegative_orthant")
    return NonnegativeOrthant{as_long(require(j, path, "dim"), join(path, "dim"))};
  if (type == "ball")
    return Ball{vec_from(require(j, path, "center"), join(path, "center")),
                as_double(require(j, path, "radius"), join(path, "radius"))};
  if (type == "affine_set")
    return AffineSet{mat_from(require(j, path, "A"), join(path, "A")),
                     vec_from(require(j, path, "b"), join(path, "b"))};
  if (type == "consensus")
    return Consensus{as_long(require(j, path, "blocks"), join(path, "blocks")),
                     as_long(require(j, path, "block_dim"), join(path, "block_dim"))};
  if (type == "halfspace")
    return Halfspace{vec_from(require(j, path, "normal"), join(path, "normal")),
                     as_double(require(j, path, "offset"), join(path, "offset"))};
  if (type == "hyperplane")
    return Hyperplane{vec_from(require(j, path, "normal"), join(path, "normal")),
                      as_double(require(j, path, "offset"), join(path, "offset"))};
  throw ParseError(join(path, "type"), "unknown set type \"" + type + "\"");
}

json schedule_json(const CandidateSchedule& s) {
  json j;
  if (const auto* g = std::get_if<GeometricBacktrack>(&s)) {
    j["type"] = "geometric_backtrack";
    j["factor"] = g->factor;
  } else {
    const auto& l = std::get<LinearForward>(s);
    j["type"] = "linear_forward";
    j["start"] = l.start;
    j["spacing"] = l.spacing;
    j["count"] = l.count;
  }
  return j;
}

CandidateSchedule schedule_from(const json& j, const std::string& path) {
  const std::string type = as_string(require(j, path, "type"), join(path, "type"));
  if (type == "geometric_backtrack")
    return GeometricBacktrack{as_double(require(j, path, "factor"), join(path, "factor"))};
  if (type == "linear_forward")
    return LinearForward{as_double(require(j, path, "start"), join(path, "start")),
                         as_double(require(j, path, "spacing"), join(path, "spacing")),
                         static_cast<int>(as_long(require(j, path, "count"),
                                                  join(path, "count")))};
  throw ParseError(join(path, "type"), "unknown schedule type \"" + type + "\"");
}

const char* selection_name(SelectionRule r) {
  switch (r) {
    case SelectionRule::FirstPassing: return "first_passing";
    case SelectionRule::BestOfSchedule: return "best_of_schedule";
    default: return "farthest_passing";
  }
}

SelectionRule selection_from(const json& j, const std::string& path) {
  const std::string name = as_string(j, path);
  if (name == "first_passing") return SelectionRule::FirstPassing;
  if (name == "best_of_schedule") return SelectionRule::BestOfSchedule;
  if (name == "farthest_passing") return SelectionRule::FarthestPassing;
  throw ParseError(path, "unknown selection rule \"" + name + "\"");
}

json quad_json(const QuadraticObjective& f) {
  json j;
  j["P"] = mat_json(f.P);
  j["q"] = vec_json(f.q);
  return j;
}

QuadraticObjective quad_from(const json& j, const std::string& path) {
  return {mat_from(require(j, path, "P"), join(path, "P")),
          vec_from(require(j, path, "q"), join(path, "q"))};
}

}  // namespace

std::string problem_to_json(const ProblemFile& pf) {
  const std::string kind = kind_name(pf);
  json j;
  j["kind"] = kind;
  j["seed"] = pf.seed;

  json params;
  params[kind == "qp" ? "rho" : "gamma"] = pf.params.gamma;
  params["alpha"] = pf.params.alpha;
  params["epsilon"] = pf.params.epsilon;
  params["alpha_max"] = pf.params.alpha_max;
  params["schedule"] = schedule_json(pf.params.schedule);
  params["selection"] = selection_name(pf.params.selection);
  params["tol"] = pf.params.tol;
  params["max_iter"] = pf.params.max_iter;
  j["params"] = std::move(params);

  json data;
  if (const auto* d = std::get_if<NnlsData>(&pf.data)) {
    data["A"] = mat_json(d->A);
    data["b"] = vec_json(d->b);
  } else if (const auto* d = std::get_if<FeasibilityData>(&pf.data)) {
    data["C"] = set_json(d->C);
    data["D"] = set_json(d->D);
    data["x0"] = vec_json(d->x0);
  } else if (const auto* d = std::get_if<QpData>(&pf.data)) {
    data["f"] = quad_json(d->f);
    json g = quad_json({d->g.P, d->g.q});
    if (d->g.Aeq) {
      g["Aeq"] = mat_json(*d->g.Aeq);
      g["beq"] = vec_json(*d->g.beq);
    }
    data["g"] = std::move(g);
    data["A"] = mat_json(d->A);
    data["B"] = mat_json(d->B);
    data["c"] = vec_json(d->c);
    if (d->v0) data["v0"] = vec_json(*d->v0);
  } else {
    const auto& cd = std::get<ConsensusData>(pf.data);
    json terms = json::array();
    for (const auto& t : cd.terms) terms.push_back(quad_json(t));
    data["terms"] = std::move(terms);
    if (cd.x0) data["x0"] = vec_json(*cd.x0);
  }
  j["data"] = std::move(data);
  return j.dump(2) + "\n";
}

ProblemFile problem_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("(document)", e.what());
  }

  ProblemFile pf;
  const std::string kind = as_string(require(j, "", "kind"), "kind");
  pf.seed = as_uint64(require(j, "", "seed"), "seed");

  const json& params = require(j, "", "params");
  pf.params.gamma = as_double(
      require(params, "params", kind == "qp" ? "rho" : "gamma"),
      join("params", kind == "qp" ? "rho" : "gamma"));
  pf.params.alpha = as_double(require(params, "params", "alpha"), "params.alpha");
  pf.params.epsilon =
      as_double(require(params, "params", "epsilon"), "params.epsilon");
  pf.params.alpha_max =
      as_double(require(params, "params", "alpha_max"), "params.alpha_max");
  pf.params.schedule =
      schedule_from(require(params, "params", "schedule"), "params.schedule");
  pf.params.selection =
      selection_from(require(params, "params", "selection"), "params.selection");
  pf.params.tol = as_double(require(params, "params", "tol"), "params.tol");
  pf.params.max_iter =
      as_long(require(params, "params", "max_iter"), "params.max_iter");

  const json& data = require(j, "", "data");
  if (kind == "nnls") {
    NnlsData d;
    d.A = mat_from(require(data, "data", "A"), "data.A");
    d.b = vec_from(require(data, "data", "b"), "data.b");
    pf.data = std::move(d);
  } else if (kind == "feasibility") {
    FeasibilityData d;
    d.C = set_from(require(data, "data", "C"), "data.C");
    d.D = set_from(require(data, "data", "D"), "data.D");
    d.x0 = vec_from(require(data, "data", "x0"), "data.x0");
    pf.data = std::move(d);
  } else if (kind == "qp") {
    QpData d;
    const QuadraticObjective f = quad_from(require(data, "data", "f"), "data.f");
    d.f = f;
    const json& g = require(data, "data", "g");
    const QuadraticObjective gq = quad_from(g, "data.g");
    d.g.P = gq.P;
    d.g.q = gq.q;
    if (g.contains("Aeq") || g.contains("beq")) {
      d.g.Aeq = mat_from(require(g, "data.g", "Aeq"), "data.g.Aeq");
      d.g.beq = vec_from(require(g, "data.g", "beq"), "data.g.beq");
    }
    d.A = mat_from(require(data, "data", "A"), "data.A");
    d.B = mat_from(require(data, "data", "B"), "data.B");
    d.c = vec_from(require(data, "data", "c"), "data.c");
    if (data.contains("v0")) d.v0 = vec_from(data["v0"], "data.v0");
    pf.data = std::move(d);
  } else if (kind == "consensus") {
    ConsensusData d;
    const json& terms = require(data, "data", "terms");
    if (!terms.is_array()) throw ParseError("data.terms", "expected an array");
    for (std::size_t i = 0; i < terms.size(); ++i)
      d.terms.push_back(
          quad_from(terms[i], "data.terms[" + std::to_string(i) + "]"));
    if (data.contains("x0")) d.x0 = vec_from(data["x0"], "data.x0");
    pf.data = std::move(d);
  } else {
    throw ParseError("kind", "unknown problem kind \"" + kind + "\"");
  }

  validate(pf);
  return pf;
}

void save_problem(const ProblemFile& pf, const std::string& path) {
  write_file_atomic(path, problem_to_json(pf));
}

ProblemFile load_problem(const std::string& path) {
  return problem_from_json(read_file(path));
}

std::string trace_to_csv(const IterationTrace& trace) {
  std::string out = "k,res_norm,nominal_res_norm,alpha_k,candidates,activated\n";
  for (const auto& rec : trace.records) {
    out += std::to_string(rec.k);
    out += ',';
    out += fmt17(rec.residual_norm);
    out += ',';
    out += fmt17(rec.nominal_residual_norm);
    out += ',';
    out += fmt17(rec.accepted_alpha);
    out += ',';
    out += std::to_string(rec.candidates_evaluated);
    out += ',';
    out += rec.search_activated ? '1' : '0';
    out += '\n';
  }
  return out;
}

IterationTrace trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw ParseError("(document)", "empty trace file");
  if (line == "k,res_norm,nominal_res_norm,alpha_k,candidates,activated\r")
    line.pop_back();
  if (line != "k,res_norm,nominal_res_norm,alpha_k,candidates,activated")
    throw ParseError("header", "unexpected trace header \"" + line + "\"");

  IterationTrace trace;
  long row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string path = "row " + std::to_string(row);
    TraceRecord rec;
    int activated = 0;
    char trailing = '\0';
    const int got =
        std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf,%d,%d%c", &rec.k,
                    &rec.residual_norm, &rec.nominal_residual_norm,
                    &rec.accepted_alpha, &rec.candidates_evaluated, &activated,
                    &trailing);
    if (got != 6) throw ParseError(path, "expected 6 comma-separated values");
    if (activated != 0 && activated != 1)
      throw ParseError(path, "activated must be 0 or 1");
    rec.search_activated = activated == 1;
    trace.records.push_back(rec);
    ++row;
  }
  if (!trace.records.empty()) {
    trace.initial_residual_norm = trace.records.front().residual_norm;
    trace.final_residual_norm = trace.records.back().residual_norm;
  }
  return trace;
}

void save_trace(const IterationTrace& trace, const std::string& path) {
  write_file_atomic(path, trace_to_csv(trace));
}

IterationTrace load_trace(const std::string& path) {
  return trace_from_csv(read_file(path));
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  static std::atomic<unsigned> counter{0};
  const fs::path target(path);
  const fs::path dir = target.parent_path().empty() ? fs::path(".")
                                                    : target.parent_path();
  const fs::path tmp =
      dir / (target.filename().string() + ".tmp." +
             std::to_string(::getpid()) + "." +
             std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError(path, "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ParseError(path, "write failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ParseError(path, "rename failed: " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace splitls
