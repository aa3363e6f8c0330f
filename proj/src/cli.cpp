#include "splitls/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <iostream>
#include <sstream>
#include <utility>

#include "splitls/io.hpp"
#include "splitls/splitting.hpp"

namespace splitls {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("SPLITLS_LOG");
    if (!env) return LogLevel::Info;
    const std::string v(env);
    if (v == "quiet") return LogLevel::Quiet;
    if (v == "debug") return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() != LogLevel::Quiet) std::cerr << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() == LogLevel::Debug) std::cerr << msg << "\n";
}

RunSummary summarize(const IterationTrace& trace, double nominal_step,
                     double wall_time_seconds) {
  RunSummary s;
  s.iterations = static_cast<long>(trace.records.size());
  s.wall_time_seconds = wall_time_seconds;
  s.final_res_norm = trace.final_residual_norm;
  s.total_s1_evals = trace.total_s1_evals;
  s.total_s2_evals = trace.total_s2_evals;
  for (const auto& rec : trace.records) {
    if (rec.accepted_alpha > nominal_step) ++s.ls_accept_count;
    if (rec.accepted_alpha > 5.0) ++s.ls_accept_alpha_gt5_count;
  }
  return s;
}

Assembled assemble(const ProblemFile& pf) {
  validate(pf);
  Assembled a;
  a.cfg.epsilon = pf.params.epsilon;
  a.cfg.alpha_max = pf.params.alpha_max;
  a.cfg.schedule = pf.params.schedule;
  a.cfg.selection = pf.params.selection;
  a.cfg.tol = pf.params.tol;
  a.cfg.max_iter = pf.params.max_iter;

  if (const auto* d = std::get_if<NnlsData>(&pf.data)) {
    const ProblemDR prob =
        nnls_dr_problem(d->A, d->b, pf.params.gamma, pf.params.alpha);
    a.op = build_dr(prob);
    a.x0 = Vector::Zero(d->A.cols());
    a.solution = [prob](const Vector& v) { return dr_solution(prob, v); };
  } else if (const auto* d = std::get_if<FeasibilityData>(&pf.data)) {
    a.op = build_feasibility_dr(d->C, d->D, pf.params.alpha);
    a.x0 = d->x0;
    a.solution = [D = d->D](const Vector& v) { return project(D, v); };
  } else if (const auto* d = std::get_if<QpData>(&pf.data)) {
    ProblemADMM prob;
    prob.f = d->f;
    prob.g = d->g;
    prob.A = d->A;
    prob.B = d->B;
    prob.c = d->c;
    prob.rho = pf.params.gamma;
    prob.relaxation = pf.params.alpha;
    a.op = build_admm(prob);
    a.x0 = d->v0 ? *d->v0 : Vector::Zero(d->A.rows());
    a.solution = [prob](const Vector& v) {
      const AdmmSolution sol = admm_solution(prob, v);
      Vector xz(sol.x.size() + sol.z.size());
      xz << sol.x, sol.z;
      return xz;
    };
  } else {
    const auto& cd = std::get<ConsensusData>(pf.data);
    std::vector<ProxOperator> terms;
    terms.reserve(cd.terms.size());
    for (const auto& t : cd.terms)
      terms.push_back(
          prox_quadratic(t.P, t.q, std::nullopt, std::nullopt, pf.params.gamma));
    a.op = build_consensus(terms, pf.params.gamma);
    a.x0 = cd.x0 ? *cd.x0 : Vector::Zero(a.op.dim());
    a.solution = [terms](const Vector& zs) {
      return consensus_solution(terms, zs);
    };
  }
  return a;
}

int exit_code(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return 0;
    case SolveStatus::MaxIterations: return 2;
    case SolveStatus::InfeasibilitySuspected: return 3;
  }
  return 2;
}

CandidateSchedule parse_schedule(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string rest =
      colon == std::string::npos ? std::string() : text.substr(colon + 1);
  char extra = '\0';
  if (head == "geometric") {
    if (rest.empty()) return GeometricBacktrack{};
    double factor = 0.0;
    if (std::sscanf(rest.c_str(), "%lf%c", &factor, &extra) == 1)
      return GeometricBacktrack{factor};
  } else if (head == "linear") {
    double start = 0.0, spacing = 0.0;
    int count = 0;
    if (std::sscanf(rest.c_str(), "%lf,%lf,%d%c", &start, &spacing, &count,
                    &extra) == 3)
      return LinearForward{start, spacing, count};
  }
  throw ConfigError(
      "schedule: expected geometric:FACTOR or linear:START,SPACING,COUNT, got \"" +
      text + "\"");
}

SelectionRule parse_selection(const std::string& text) {
  if (text == "first_passing") return SelectionRule::FirstPassing;
  if (text == "best_of_schedule") return SelectionRule::BestOfSchedule;
  if (text == "farthest_passing") return SelectionRule::FarthestPassing;
  throw ConfigError(
      "selection: expected first_passing, best_of_schedule or farthest_passing, "
      "got \"" + text + "\"");
}

void apply_overrides(const ConfigOverrides& ov, LineSearchConfig& cfg) {
  if (ov.epsilon) cfg.epsilon = *ov.epsilon;
  if (ov.alpha_max) cfg.alpha_max = *ov.alpha_max;
  if (ov.schedule) cfg.schedule = parse_schedule(*ov.schedule);
  if (ov.selection) cfg.selection = parse_selection(*ov.selection);
  if (ov.tol) cfg.tol = *ov.tol;
  if (ov.max_iter) cfg.max_iter = *ov.max_iter;
  if (ov.refresh_period) cfg.refresh_period = *ov.refresh_period;
  if (ov.activation) {
    if (*ov.activation == "always") {
      cfg.activation = AlwaysSearch{};
    } else if (*ov.activation == "cosine") {
      cfg.activation = CosineAligned{ov.eps_hat.value_or(CosineAligned{}.eps_hat)};
    } else if (*ov.activation == "never") {
      cfg.activation = NeverSearch{};
    } else {
      throw ConfigError("activation: expected always, cosine or never, got \"" +
                        *ov.activation + "\"");
    }
  } else if (ov.eps_hat) {
    cfg.activation = CosineAligned{*ov.eps_hat};
  }
  if (ov.no_linesearch) cfg.activation = NeverSearch{};
  if (ov.no_infeasibility_check) cfg.infeasibility.enabled = false;
}

namespace {

struct TimedRun {
  SolveResult result;
  double seconds = 0.0;
};

TimedRun timed_run(const Assembled& a) {
  const auto t0 = std::chrono::steady_clock::now();
  SolveResult result = run(a.op, a.x0, a.cfg);
  const auto t1 = std::chrono::steady_clock::now();
  return {std::move(result), std::chrono::duration<double>(t1 - t0).count()};
}

ProblemFile regenerate(const ProblemFile& pf, std::uint64_t seed) {
  ProblemFile fresh;
  if (const auto* d = std::get_if<NnlsData>(&pf.data)) {
    fresh = gen_nnls(d->A.cols(), d->A.rows(), seed);
  } else if (const auto* d = std::get_if<QpData>(&pf.data)) {
    fresh = gen_qp(d->f.P.rows(), d->g.P.rows(), d->A.rows(), seed);
  } else if (const auto* d = std::get_if<ConsensusData>(&pf.data)) {
    fresh = gen_consensus(static_cast<Index>(d->terms.size()),
                          d->terms.front().P.rows(), seed);
  } else {
    throw ConfigError("--seed applies only to randomized problem kinds");
  }
  fresh.params = pf.params;
  return fresh;
}

std::string run_json_fields(const SolveResult& res, const RunSummary& s) {
  std::ostringstream out;
  out << "    \"status\": \"" << to_string(res.status) << "\",\n"
      << "    \"iterations\": " << s.iterations << ",\n"
      << "    \"wall_time_seconds\": " << fmt17(s.wall_time_seconds) << ",\n"
      << "    \"final_res_norm\": " << fmt17(s.final_res_norm) << ",\n"
      << "    \"stop_threshold\": " << fmt17(res.trace.stop_threshold) << ",\n"
      << "    \"ls_accept_count\": " << s.ls_accept_count << ",\n"
      << "    \"ls_accept_alpha_gt5_count\": " << s.ls_accept_alpha_gt5_count
      << ",\n"
      << "    \"total_s1_evals\": " << s.total_s1_evals << ",\n"
      << "    \"total_s2_evals\": " << s.total_s2_evals;
  if (res.displacement_estimate)
    out << ",\n    \"displacement_norm\": "
        << fmt17(res.displacement_estimate->norm());
  return out.str();
}

std::string summary_json(const ProblemFile& pf, const SolveResult& res,
                         const RunSummary& s) {
  std::string fields = run_json_fields(res, s);
  // Top-level object: strip one indent level from the shared field block.
  std::ostringstream out;
  out << "{\n  \"kind\": \"" << kind_name(pf) << "\",\n";
  std::istringstream lines(fields);
  std::string line;
  bool first = true;
  while (std::getline(lines, line)) {
    if (!first) out << "\n";
    out << line.substr(2);
    first = false;
  }
  out << "\n}\n";
  return out.str();
}

std::string residual_curve(const IterationTrace& trace) {
  std::string out;
  for (const auto& rec : trace.records) {
    out += std::to_string(rec.k);
    out += ' ';
    out += fmt17(rec.residual_norm);
    out += '\n';
  }
  out += std::to_string(static_cast<long>(trace.records.size()));
  out += ' ';
  out += fmt17(trace.final_residual_norm);
  out += '\n';
  return out;
}

std::string alpha_scatter(const IterationTrace& trace, double nominal) {
  std::string out;
  for (const auto& rec : trace.records) {
    out += std::to_string(rec.k);
    out += ' ';
    out += fmt17(rec.accepted_alpha);
    out += ' ';
    out += rec.accepted_alpha > nominal ? '1' : '0';
    out += '\n';
  }
  return out;
}

void debug_dump(const IterationTrace& trace) {
  if (log_level() != LogLevel::Debug) return;
  for (const auto& rec : trace.records) {
    log_debug("k=" + std::to_string(rec.k) + " res=" + fmt17(rec.residual_norm) +
              " nominal=" + fmt17(rec.nominal_residual_norm) + " alpha=" +
              fmt17(rec.accepted_alpha) + " candidates=" +
              std::to_string(rec.candidates_evaluated) + " activated=" +
              (rec.search_activated ? "1" : "0"));
  }
}

}  // namespace

int cmd_gen(const GenOptions& opt, ProblemFile* generated) {
  ProblemFile pf;
  if (opt.kind == "nnls") {
    pf = gen_nnls(opt.n, opt.m, opt.seed);
  } else if (opt.kind == "circle-line") {
    pf = gen_circle_line(opt.angle_deg);
  } else if (opt.kind == "disjoint") {
    pf = gen_disjoint(opt.gap);
  } else if (opt.kind == "qp") {
    pf = gen_qp(opt.n, opt.m, opt.p, opt.seed);
  } else if (opt.kind == "consensus") {
    pf = gen_consensus(opt.count, opt.n, opt.seed);
  } else {
    throw ConfigError("gen: unknown kind \"" + opt.kind +
                      "\" (nnls, circle-line, disjoint, qp, consensus)");
  }
  save_problem(pf, opt.out);
  std::cout << opt.out << "\n";
  log_info("wrote " + opt.out + " (kind=" + kind_name(pf) + ")");
  if (generated) *generated = pf;
  return 0;
}

int cmd_solve(const SolveOptions& opt, SolveReport* report) {
  ProblemFile pf = load_problem(opt.problem_path);
  if (opt.seed) pf = regenerate(pf, *opt.seed);
  Assembled a = assemble(pf);
  apply_overrides(opt.overrides, a.cfg);
  log_info("solve: kind=" + kind_name(pf) + " dim=" + std::to_string(a.op.dim()));

  const TimedRun tr = timed_run(a);
  debug_dump(tr.result.trace);
  const RunSummary s = summarize(tr.result.trace, a.op.nominal_step(), tr.seconds);
  const int code = exit_code(tr.result.status);

  std::filesystem::create_directories(opt.out_dir);
  const std::string trace_path = opt.out_dir + "/trace.csv";
  const std::string summary_path = opt.out_dir + "/summary.json";
  const std::string summary_text = summary_json(pf, tr.result, s);
  save_trace(tr.result.trace, trace_path);
  write_file_atomic(summary_path, summary_text);
  std::cout << summary_text;
  log_info("status=" + std::string(to_string(tr.result.status)) +
           " iterations=" + std::to_string(s.iterations) + " wrote " +
           trace_path + " and " + summary_path);

  if (report) *report = SolveReport{std::move(pf), std::move(tr.result), s};
  return code;
}

int cmd_bench(const SolveOptions& opt, BenchReport* report) {
  ProblemFile pf = load_problem(opt.problem_path);
  if (opt.seed) pf = regenerate(pf, *opt.seed);

  Assembled with = assemble(pf);
  apply_overrides(opt.overrides, with.cfg);
  Assembled without = assemble(pf);
  apply_overrides(opt.overrides, without.cfg);
  without.cfg.activation = NeverSearch{};

  log_info("bench: kind=" + kind_name(pf) + " dim=" +
           std::to_string(with.op.dim()) + " (two runs, shared problem bytes)");
  auto fut = std::async(std::launch::async,
                        [&without] { return timed_run(without); });
  const TimedRun ls = timed_run(with);
  const TimedRun no = fut.get();

  const RunSummary s_ls =
      summarize(ls.result.trace, with.op.nominal_step(), ls.seconds);
  const RunSummary s_no =
      summarize(no.result.trace, without.op.nominal_step(), no.seconds);

  BenchReport rep;
  rep.iteration_ratio =
      s_ls.iterations == 0 && s_no.iterations == 0
          ? 1.0
          : static_cast<double>(s_no.iterations) /
                static_cast<double>(std::max(1L, s_ls.iterations));
  rep.wall_time_ratio =
      s_ls.wall_time_seconds > 0.0 ? s_no.wall_time_seconds / s_ls.wall_time_seconds
                                   : 1.0;

  std::filesystem::create_directories(opt.out_dir);
  save_trace(ls.result.trace, opt.out_dir + "/ls_trace.csv");
  save_trace(no.result.trace, opt.out_dir + "/nols_trace.csv");
  write_file_atomic(opt.out_dir + "/ls_residuals.dat",
                    residual_curve(ls.result.trace));
  write_file_atomic(opt.out_dir + "/nols_residuals.dat",
                    residual_curve(no.result.trace));
  write_file_atomic(opt.out_dir + "/alpha_scatter.dat",
                    alpha_scatter(ls.result.trace, with.op.nominal_step()));

  std::ostringstream json;
  json << "{\n  \"kind\": \"" << kind_name(pf) << "\",\n"
       << "  \"with_search\": {\n" << run_json_fields(ls.result, s_ls)
       << "\n  },\n"
       << "  \"without_search\": {\n" << run_json_fields(no.result, s_no)
       << "\n  },\n"
       << "  \"iteration_ratio\": " << fmt17(rep.iteration_ratio) << ",\n"
       << "  \"wall_time_ratio\": " << fmt17(rep.wall_time_ratio) << "\n}\n";
  write_file_atomic(opt.out_dir + "/bench.json", json.str());
  std::cout << json.str();

  const int code =
      std::max(exit_code(ls.result.status), exit_code(no.result.status));
  rep.with_search = SolveReport{pf, ls.result, s_ls};
  rep.without_search = SolveReport{std::move(pf), no.result, s_no};
  if (report) *report = std::move(rep);
  return code;
}

int cmd_demo_ap(const DemoApOptions& opt, DemoApReport* report) {
  const ProblemFile pf = gen_circle_line(opt.angle_deg);
  const auto& data = std::get<FeasibilityData>(pf.data);
  const SplitOperator op = build_ap(data.C, data.D);
  const Vector target = Vector::Unit(2, 0);

  DemoApReport rep;
  const Vector x0 = data.x0;
  const Vector r0 = op.apply(x0) - x0;

  std::ostringstream out;
  out << "start angle " << fmt17(opt.angle_deg) << " deg: x0 = ("
      << fmt17(x0[0]) << ", " << fmt17(x0[1]) << ")\n";

  if (r0.norm() == 0.0) {
    rep.fixed_point = true;
    rep.ls_distance = (x0 - target).norm();
    rep.plain_distance = rep.ls_distance;
    out << "x0 is already a fixed point; no candidates evaluated\n";
    std::cout << out.str();
    if (report) *report = std::move(rep);
    return 0;
  }

  const double nominal = op.nominal_step();
  const Vector x_nominal = x0 + nominal * r0;
  const double nominal_norm = (op.apply(x_nominal) - x_nominal).norm();
  rep.nominal_residual_norm = nominal_norm;
  const double threshold = (1.0 - opt.epsilon) * nominal_norm;

  rep.points.push_back({nominal, x_nominal, nominal_norm, false});
  const LinearForward schedule{opt.start, opt.spacing, opt.count};
  for (double alpha : candidate_steps(schedule, nominal, opt.alpha_max)) {
    DemoApPoint p;
    p.alpha = alpha;
    p.point = x0 + alpha * r0;
    p.residual_norm = (op.apply(p.point) - p.point).norm();
    p.passes = p.residual_norm <= threshold;
    rep.points.push_back(std::move(p));
  }

  rep.best_alpha = nominal;
  rep.farthest_alpha = nominal;
  double best_norm = nominal_norm;
  for (const auto& p : rep.points) {
    if (!p.passes) continue;
    if (p.residual_norm < best_norm) {
      best_norm = p.residual_norm;
      rep.best_alpha = p.alpha;
    }
    if (p.alpha > rep.farthest_alpha) rep.farthest_alpha = p.alpha;
  }

  Vector x_ls = x_nominal;
  for (const auto& p : rep.points)
    if (p.alpha == rep.farthest_alpha) x_ls = p.point;
  rep.ls_distance = (x_ls - target).norm();

  Vector x_plain = x0;
  for (int k = 0; k < 50; ++k) x_plain = op.apply(x_plain);
  rep.plain_distance = (x_plain - target).norm();

  out << "acceptance threshold (1 - epsilon) * nominal residual = "
      << fmt17(threshold) << "\n\n";
  out << "alpha                    x1                       x2                       "
         "residual                 passes\n";
  for (const auto& p : rep.points) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-24s %-24s %-24s %-24s %s\n",
                  fmt17(p.alpha).c_str(), fmt17(p.point[0]).c_str(),
                  fmt17(p.point[1]).c_str(), fmt17(p.residual_norm).c_str(),
                  p.alpha == nominal ? "nominal" : (p.passes ? "yes" : "no"));
    out << line;
  }
  out << "\nBestOfSchedule  -> alpha = " << fmt17(rep.best_alpha) << "\n";
  out << "FarthestPassing -> alpha = " << fmt17(rep.farthest_alpha) << "\n";
  out << "one FarthestPassing step: distance to (1, 0) = "
      << fmt17(rep.ls_distance) << "\n";
  out << "50 plain steps:           distance to (1, 0) = "
      << fmt17(rep.plain_distance) << "\n";
  std::cout << out.str();

  if (report) *report = std::move(rep);
  return 0;
}

}  // namespace splitls
