#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "splitls/operators.hpp"
#include "splitls/types.hpp"

namespace splitls {

/// Whether the iteration exposes the nonexpansive map S directly with an
/// explicit averaging step (S-form: x+ = x + alpha(Sx - x), nominal
/// alpha-tilde) or a pre-averaged composition T2*T1 whose nominal step is
/// exactly 1 (T-form).
enum class Form { SForm, TForm };

/// A solver instance: s2 (cheap) composed after s1 (affine-backed when the
/// fast candidate path is available). `averaging` is the nominal averaging
/// parameter alpha-tilde in (0,1); for T-form operators it is recorded for
/// bound checking while the nominal step length stays 1.
struct SplitOperator {
  Form form = Form::SForm;
  double averaging = 0.5;
  Operator s1;
  Operator s2;

  Index dim() const { return s1.dim; }
  double nominal_step() const { return form == Form::SForm ? averaging : 1.0; }
  Vector apply(const Vector& x) const { return s2(s1(x)); }
};

/// Validates dimensions and the averaging range.
void validate(const SplitOperator& op);

// Candidate step-length schedules. Generated values always lie strictly
// inside (nominal, alpha_max].
struct GeometricBacktrack {
  double factor = 1.0 / 1.4;  // in (0,1); enumerate alpha_max, alpha_max*factor, ...
};
struct LinearForward {
  double start = 1.0;
  double spacing = 1.0;
  int count = 1;  // enumerate start + i*spacing for i in [0, count)
};
using CandidateSchedule = std::variant<GeometricBacktrack, LinearForward>;

enum class SelectionRule { FirstPassing, BestOfSchedule, FarthestPassing };

struct AlwaysSearch {};
struct CosineAligned {
  double eps_hat = 0.01;
};
struct NeverSearch {};
using ActivationRule = std::variant<AlwaysSearch, CosineAligned, NeverSearch>;

struct InfeasibilityDetection {
  bool enabled = true;
  int window = 20;
  double delta_tol = 1e-7;
};

struct LineSearchConfig {
  double epsilon = 0.03;
  double alpha_max = 50.0;
  CandidateSchedule schedule = GeometricBacktrack{};
  SelectionRule selection = SelectionRule::FirstPassing;
  ActivationRule activation = AlwaysSearch{};
  double tol = 1e-6;           // relative residual stopping tolerance
  long max_iter = 100000;
  int refresh_period = 50;     // exact cache re-anchoring interval
  InfeasibilityDetection infeasibility;
};

void validate(const LineSearchConfig& cfg, const SplitOperator& op);

/// Candidate step lengths in schedule order, filtered to (nominal, alpha_max].
std::vector<double> candidate_steps(const CandidateSchedule& schedule,
                                    double nominal, double alpha_max);

/// One completed iteration. The first six fields form the exported CSV
/// schema; the remaining fields support bound checking and infeasibility
/// detection in memory only.
struct TraceRecord {
  long k = 0;
  double residual_norm = 0.0;          // ||r^k||
  double nominal_residual_norm = 0.0;  // ||rbar^k||
  double accepted_alpha = 0.0;
  int candidates_evaluated = 0;
  bool search_activated = false;

  double nominal_gap_norm = 0.0;   // ||rbar^k - r^k||
  double residual_step_norm = 0.0; // ||r^{k+1} - r^k||
  long s1_evals = 0;               // S1 applications inside this iteration
  long s2_evals = 0;
  bool slow_path = false;          // direct evaluation used (no affine backing)
};

enum class SolveStatus { Converged, MaxIterations, InfeasibilitySuspected };
const char* to_string(SolveStatus status);

struct IterationTrace {
  std::vector<TraceRecord> records;
  double initial_residual_norm = 0.0;
  double final_residual_norm = 0.0;
  double stop_threshold = 0.0;  // tol * max(1, ||r0||)
  long total_s1_evals = 0;
  long total_s2_evals = 0;
  SolveStatus status = SolveStatus::MaxIterations;
};

struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  Vector final_iterate;
  std::optional<Vector> displacement_estimate;
  IterationTrace trace;
};

/// Per-solve mutable state, exposed so single steps can be driven and
/// inspected directly.
struct StepState {
  Vector x;
  Vector r;                             // cached residual S x - x
  std::optional<Vector> cached_s1x;     // F x + h, present on the fast path
  Vector dx_last;                       // x^k - x^{k-1}
  Vector dx_prev;                       // x^{k-1} - x^{k-2}
  long k = 0;
  long s1_evals = 0;
  long s2_evals = 0;
  long since_refresh = 0;
};

/// Computes the initial residual (one S1 and one S2 application).
StepState init_state(const SplitOperator& op, const Vector& x0);

struct Candidate {
  Vector x;
  Vector r;
  bool slow_path = false;
};

/// Candidate x = x + alpha*r and its residual via the cached affine path
/// r = S2(cached_s1x + alpha*cached_s1r) - x, costing one S2 application and
/// no S1 applications. Falls back to direct evaluation (one S1, one S2) when
/// either cache pointer is null or s1 carries no AffineMap.
Candidate evaluate_candidate_residual(const SplitOperator& op,
                                      const Vector* cached_s1x,
                                      const Vector* cached_s1r, const Vector& x,
                                      const Vector& r, double alpha);

/// Advances the cache to x^{k+1} via cached_s1x += accepted_alpha * s1r and
/// re-anchors with an exact S1 application every refresh_period iterations.
/// Returns true if a re-anchoring S1 application happened; when it does and
/// s1_evals is non-null the counter is bumped.
bool refresh_cache(const SplitOperator& op, const Vector& x_next,
                   double accepted_alpha, const Vector& s1r, Vector& cached_s1x,
                   long& since_refresh, int refresh_period,
                   long* s1_evals = nullptr);

/// Cosine alignment test on the last two iterate differences. False when
/// either difference is zero-length.
bool activation_check(const Vector& v_new, const Vector& v_old, double eps_hat);

/// Acceptance primitive: ||S(candidate) - candidate|| <= (1-eps)*nominal_norm.
/// Evaluates S directly (no cache) so arbitrary candidate points can be tested.
bool generalized_accept(const SplitOperator& op, const Vector& candidate,
                        double nominal_residual_norm, double epsilon);

enum class StepOutcome { Continue, FixedPoint };

/// One line-search iteration: nominal point, activation, candidate sweep,
/// selection, cache maintenance. Appends one record to the trace. The
/// accepted candidate's residual is stored in the state for reuse.
StepOutcome step(const SplitOperator& op, StepState& state,
                 const LineSearchConfig& cfg, IterationTrace& trace);

/// True iff over the last `window` records the residual norm stagnated above
/// the stop threshold (relative change < delta_tol) while successive residual
/// vectors converged (step norm < delta_tol * residual norm).
bool detect_infeasibility(const IterationTrace& trace, int window, double delta_tol);

/// Full solve loop.
SolveResult run(const SplitOperator& op, const Vector& x0, const LineSearchConfig& cfg);

/// Residual-bound diagnostics over a completed trace: monotone decrease and
/// the telescoped nominal-gap bound with the recorded averaging parameter.
struct TraceCheck {
  bool monotone = true;
  double worst_monotone_ratio = 0.0;      // max ||r^{k+1}|| / ||r^k||
  bool telescoped = true;
  double telescoped_lhs = 0.0;            // sum ||rbar^k - r^k||^2
  double telescoped_rhs = 0.0;            // averaging/(1-averaging) * ||r0||^2
};
TraceCheck check_trace_bounds(const IterationTrace& trace, double averaging);

}  // namespace splitls
