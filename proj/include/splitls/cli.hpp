#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "splitls/engine.hpp"
#include "splitls/problems.hpp"

namespace splitls {

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

// Read once from the SPLITLS_LOG environment variable: quiet | info | debug.
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

struct RunSummary {
  long iterations = 0;
  double wall_time_seconds = 0.0;
  double final_res_norm = 0.0;
  long ls_accept_count = 0;            // iterations with alpha_k > nominal
  long ls_accept_alpha_gt5_count = 0;  // iterations with alpha_k > 5
  long total_s2_evals = 0;
  long total_s1_evals = 0;
};

RunSummary summarize(const IterationTrace& trace, double nominal_step,
                     double wall_time_seconds);

// A problem file turned into something the engine can run. solution maps the
// engine's fixed-point variable to the problem's own variable (prox of the
// first block for the splitting methods, the consensus average, the stacked
// (x, z) pair for the two-block form).
struct Assembled {
  SplitOperator op;
  LineSearchConfig cfg;
  Vector x0;
  std::function<Vector(const Vector&)> solution;
};

Assembled assemble(const ProblemFile& pf);

// Exit codes: Converged 0, MaxIterations 2, InfeasibilitySuspected 3.
// Command wrappers add: usage/config errors 64, unreadable or malformed
// input 65, numerical failures 70.
int exit_code(SolveStatus status);

struct ConfigOverrides {
  bool no_linesearch = false;
  std::optional<double> epsilon;
  std::optional<double> alpha_max;
  std::optional<std::string> schedule;   // geometric:F | linear:S,SP,C
  std::optional<std::string> selection;  // first_passing | best_of_schedule |
                                         // farthest_passing
  std::optional<std::string> activation; // always | cosine | never
  std::optional<double> eps_hat;
  std::optional<double> tol;
  std::optional<long> max_iter;
  std::optional<int> refresh_period;
  bool no_infeasibility_check = false;
};

CandidateSchedule parse_schedule(const std::string& text);
SelectionRule parse_selection(const std::string& text);
void apply_overrides(const ConfigOverrides& ov, LineSearchConfig& cfg);

struct GenOptions {
  std::string kind;  // nnls | circle-line | disjoint | qp | consensus
  Index n = 10;
  Index m = 10;
  Index p = 5;
  Index count = 3;
  double angle_deg = 350.0;
  double gap = 1.0;
  std::uint64_t seed = 0;
  std::string out = "problem.json";
};

int cmd_gen(const GenOptions& opt, ProblemFile* generated = nullptr);

struct SolveOptions {
  std::string problem_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;  // regenerate a randomized problem
  ConfigOverrides overrides;
};

struct SolveReport {
  ProblemFile problem;
  SolveResult result;
  RunSummary summary;
};

// Writes trace.csv and summary.json into out_dir; returns the status exit
// code. Throws ConfigError / ParseError / NumericalError for the wrapper to
// map.
int cmd_solve(const SolveOptions& opt, SolveReport* report = nullptr);

struct BenchReport {
  SolveReport with_search;
  SolveReport without_search;
  double iteration_ratio = 0.0;
  double wall_time_ratio = 0.0;
};

// Runs the same problem bytes twice (line search on and off, both from the
// same start), concurrently. Writes ls_residuals.dat, nols_residuals.dat,
// alpha_scatter.dat (k, alpha_k, accepted), ls_trace.csv, nols_trace.csv and
// bench.json into out_dir.
int cmd_bench(const SolveOptions& opt, BenchReport* report = nullptr);

struct DemoApOptions {
  double angle_deg = 350.0;
  double start = 1.0;
  double spacing = 6.25;
  int count = 6;  // candidate points including the nominal step
  double epsilon = 0.03;
  double alpha_max = 50.0;
};

struct DemoApPoint {
  double alpha = 0.0;
  Vector point;
  double residual_norm = 0.0;
  bool passes = false;
};

struct DemoApReport {
  bool fixed_point = false;
  double nominal_residual_norm = 0.0;
  std::vector<DemoApPoint> points;  // nominal first, then the schedule
  double best_alpha = 0.0;          // lowest residual among passing points
  double farthest_alpha = 0.0;      // largest passing step
  double ls_distance = 0.0;         // to (1, 0) after one accepted step
  double plain_distance = 0.0;      // to (1, 0) after 50 unaccelerated steps
};

int cmd_demo_ap(const DemoApOptions& opt, DemoApReport* report = nullptr);

}  // namespace splitls
