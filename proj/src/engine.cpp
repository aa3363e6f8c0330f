#include "splitls/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace splitls {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::InfeasibilitySuspected: return "InfeasibilitySuspected";
  }
  return "Unknown";
}

void validate(const SplitOperator& op) {
  if (op.dim() <= 0) throw ConfigError("SplitOperator: dimension must be positive");
  if (op.s1.dim != op.s2.dim)
    throw ConfigError("SplitOperator: s1 dimension " + std::to_string(op.s1.dim) +
                      " does not match s2 dimension " + std::to_string(op.s2.dim));
  if (!(op.averaging > 0.0 && op.averaging < 1.0))
    throw ConfigError("SplitOperator: averaging parameter must lie strictly in (0,1)");
  if (!op.s1.fn && !op.s1.affine) throw ConfigError("SplitOperator: s1 is empty");
  if (!op.s2.fn && !op.s2.affine) throw ConfigError("SplitOperator: s2 is empty");
}

void validate(const LineSearchConfig& cfg, const SplitOperator& op) {
  validate(op);
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    throw ConfigError("LineSearchConfig: epsilon must lie in (0,1)");
  if (!(cfg.alpha_max >= op.nominal_step()))
    throw ConfigError("LineSearchConfig: alpha_max must be at least the nominal step");
  if (!(cfg.tol >= 0.0)) throw ConfigError("LineSearchConfig: tol must be nonnegative");
  if (cfg.max_iter < 1) throw ConfigError("LineSearchConfig: max_iter must be positive");
  if (cfg.refresh_period < 1)
    throw ConfigError("LineSearchConfig: refresh_period must be positive");
  if (cfg.infeasibility.enabled) {
    if (cfg.infeasibility.window < 1)
      throw ConfigError("LineSearchConfig: infeasibility window must be positive");
    if (!(cfg.infeasibility.delta_tol > 0.0))
      throw ConfigError("LineSearchConfig: infeasibility delta_tol must be positive");
  }
  if (const auto* g = std::get_if<GeometricBacktrack>(&cfg.schedule)) {
    if (!(g->factor > 0.0 && g->factor < 1.0))
      throw ConfigError("GeometricBacktrack: factor must lie in (0,1)");
  } else {
    const auto& l = std::get<LinearForward>(cfg.schedule);
    if (l.count < 1) throw ConfigError("LinearForward: count must be positive");
    if (!(l.spacing > 0.0)) throw ConfigError("LinearForward: spacing must be positive");
  }
  if (const auto* c = std::get_if<CosineAligned>(&cfg.activation)) {
    if (!(c->eps_hat > 0.0 && c->eps_hat < 1.0))
      throw ConfigError("CosineAligned: eps_hat must lie in (0,1)");
  }
}

std::vector<double> candidate_steps(const CandidateSchedule& schedule,
                                    double nominal, double alpha_max) {
  std::vector<double> out;
  if (const auto* g = std::get_if<GeometricBacktrack>(&schedule)) {
    for (double a = alpha_max; a > nominal; a *= g->factor) out.push_back(a);
  } else {
    const auto& l = std::get<LinearForward>(schedule);
    for (int i = 0; i < l.count; ++i) {
      const double a = l.start + static_cast<double>(i) * l.spacing;
      if (a > nominal && a <= alpha_max) out.push_back(a);
    }
  }
  return out;
}

StepState init_state(const SplitOperator& op, const Vector& x0) {
  if (x0.size() != op.dim())
    throw ConfigError("init_state: x0 length " + std::to_string(x0.size()) +
                      " does not match operator dimension " + std::to_string(op.dim()));
  StepState st;
  st.x = x0;
  if (op.s1.affine) {
    st.cached_s1x = (*op.s1.affine)(x0);
    ++st.s1_evals;
    st.r = op.s2(*st.cached_s1x) - x0;
    ++st.s2_evals;
  } else {
    st.r = op.s2(op.s1(x0)) - x0;
    ++st.s1_evals;
    ++st.s2_evals;
  }
  if (!all_finite(st.r))
    throw NumericalError("non-finite residual at initialization", -1);
  return st;
}

Candidate evaluate_candidate_residual(const SplitOperator& op,
                                      const Vector* cached_s1x,
                                      const Vector* cached_s1r, const Vector& x,
                                      const Vector& r, double alpha) {
  Candidate c;
  c.x = x + alpha * r;
  if (op.s1.affine && cached_s1x && cached_s1r) {
    c.r = op.s2(*cached_s1x + alpha * *cached_s1r) - c.x;
  } else {
    c.r = op.s2(op.s1(c.x)) - c.x;
    c.slow_path = true;
  }
  return c;
}

bool refresh_cache(const SplitOperator& op, const Vector& x_next,
                   double accepted_alpha, const Vector& s1r, Vector& cached_s1x,
                   long& since_refresh, int refresh_period, long* s1_evals) {
  cached_s1x += accepted_alpha * s1r;
  ++since_refresh;
  if (since_refresh >= refresh_period) {
    cached_s1x = (*op.s1.affine)(x_next);
    if (s1_evals) ++*s1_evals;
    since_refresh = 0;
    return true;
  }
  return false;
}

bool activation_check(const Vector& v_new, const Vector& v_old, double eps_hat) {
  if (v_new.size() == 0 || v_old.size() == 0) return false;
  const double nn = v_new.norm(), no = v_old.norm();
  if (nn == 0.0 || no == 0.0) return false;
  return v_new.dot(v_old) / (nn * no) > 1.0 - eps_hat;
}

bool generalized_accept(const SplitOperator& op, const Vector& candidate,
                        double nominal_residual_norm, double epsilon) {
  if (candidate.size() != op.dim())
    throw ConfigError("generalized_accept: candidate length " +
                      std::to_string(candidate.size()) +
                      " does not match operator dimension " + std::to_string(op.dim()));
  const double res = (op.apply(candidate) - candidate).norm();
  return res <= (1.0 - epsilon) * nominal_residual_norm;
}

namespace {

bool decide_activation(const ActivationRule& rule, const StepState& st) {
  if (std::holds_alternative<AlwaysSearch>(rule)) return true;
  if (std::holds_alternative<NeverSearch>(rule)) return false;
  const auto& c = std::get<CosineAligned>(rule);
  if (st.k < 2) return false;
  return activation_check(st.dx_last, st.dx_prev, c.eps_hat);
}

}  // namespace

StepOutcome step(const SplitOperator& op, StepState& st,
                 const LineSearchConfig& cfg, IterationTrace& trace) {
  const double nominal = op.nominal_step();
  const bool fast = op.s1.affine.has_value() && st.cached_s1x.has_value();
  const long s1_before = st.s1_evals;
  const long s2_before = st.s2_evals;

  TraceRecord rec;
  rec.k = st.k;
  rec.residual_norm = st.r.norm();

  Vector s1r;
  if (fast) {
    s1r = op.s1.affine->linear(st.r);
    ++st.s1_evals;
  }

  const Vector xbar = st.x + nominal * st.r;
  Candidate nominal_cand;
  nominal_cand.x = xbar;
  if (fast) {
    nominal_cand.r = op.s2(*st.cached_s1x + nominal * s1r) - xbar;
    ++st.s2_evals;
  } else {
    nominal_cand.r = op.s2(op.s1(xbar)) - xbar;
    ++st.s1_evals;
    ++st.s2_evals;
    rec.slow_path = true;
  }
  if (!all_finite(nominal_cand.r))
    throw NumericalError("non-finite nominal residual at iteration " +
                             std::to_string(st.k),
                         st.k);
  rec.nominal_residual_norm = nominal_cand.r.norm();
  rec.nominal_gap_norm = (nominal_cand.r - st.r).norm();

  double accepted_alpha = nominal;
  Candidate accepted = nominal_cand;
  const bool at_fixed_point = rec.nominal_residual_norm == 0.0;

  if (!at_fixed_point) {
    rec.search_activated = decide_activation(cfg.activation, st);
    if (rec.search_activated) {
      const std::vector<double> alphas =
          candidate_steps(cfg.schedule, nominal, cfg.alpha_max);
      if (alphas.empty())
        throw ConfigError("candidate schedule produced no step lengths in (" +
                          std::to_string(nominal) + ", " +
                          std::to_string(cfg.alpha_max) + "]");
      const double threshold = (1.0 - cfg.epsilon) * rec.nominal_residual_norm;
      bool found = false;
      double best_norm = std::numeric_limits<double>::infinity();
      double best_alpha = 0.0;
      Candidate best;
      for (double a : alphas) {
        Candidate c = evaluate_candidate_residual(
            op, fast ? &*st.cached_s1x : nullptr, fast ? &s1r : nullptr, st.x,
            st.r, a);
        ++rec.candidates_evaluated;
        ++st.s2_evals;
        if (c.slow_path) {
          ++st.s1_evals;
          rec.slow_path = true;
        }
        if (!all_finite(c.r))
          throw NumericalError("non-finite candidate residual at iteration " +
                                   std::to_string(st.k),
                               st.k);
        const double nrm = c.r.norm();
        if (nrm > threshold) continue;
        switch (cfg.selection) {
          case SelectionRule::FirstPassing:
            found = true;
            best = std::move(c);
            best_alpha = a;
            break;
          case SelectionRule::BestOfSchedule:
            if (!found || nrm < best_norm ||
                (nrm == best_norm && a < best_alpha)) {
              found = true;
              best = std::move(c);
              best_norm = nrm;
              best_alpha = a;
            }
            break;
          case SelectionRule::FarthestPassing:
            if (!found || a > best_alpha) {
              found = true;
              best = std::move(c);
              best_alpha = a;
            }
            break;
        }
        if (found && cfg.selection == SelectionRule::FirstPassing) break;
      }
      if (found) {
        accepted = std::move(best);
        accepted_alpha = best_alpha;
      }
    }
  }

  rec.accepted_alpha = accepted_alpha;
  rec.residual_step_norm = (accepted.r - st.r).norm();

  if (fast)
    refresh_cache(op, accepted.x, accepted_alpha, s1r, *st.cached_s1x,
                  st.since_refresh, cfg.refresh_period, &st.s1_evals);

  st.dx_prev = std::move(st.dx_last);
  st.dx_last = accepted.x - st.x;
  st.x = std::move(accepted.x);
  st.r = std::move(accepted.r);
  ++st.k;

  rec.s1_evals = st.s1_evals - s1_before;
  rec.s2_evals = st.s2_evals - s2_before;
  trace.records.push_back(std::move(rec));
  trace.final_residual_norm = st.r.norm();
  trace.total_s1_evals = st.s1_evals;
  trace.total_s2_evals = st.s2_evals;
  return at_fixed_point ? StepOutcome::FixedPoint : StepOutcome::Continue;
}

bool detect_infeasibility(const IterationTrace& trace, int window, double delta_tol) {
  const auto& recs = trace.records;
  if (static_cast<long>(recs.size()) < window) return false;
  const std::size_t first = recs.size() - static_cast<std::size_t>(window);
  for (std::size_t i = first; i < recs.size(); ++i) {
    const TraceRecord& rec = recs[i];
    if (rec.residual_norm <= trace.stop_threshold) return false;
    if (rec.residual_step_norm >= delta_tol * rec.residual_norm) return false;
    const double next_norm = (i + 1 < recs.size()) ? recs[i + 1].residual_norm
                                                   : trace.final_residual_norm;
    if (std::abs(next_norm - rec.residual_norm) >= delta_tol * rec.residual_norm)
      return false;
  }
  return true;
}

SolveResult run(const SplitOperator& op, const Vector& x0,
                const LineSearchConfig& cfg) {
  validate(cfg, op);
  SolveResult result;
  StepState st = init_state(op, x0);
  IterationTrace& trace = result.trace;
  trace.initial_residual_norm = st.r.norm();
  trace.final_residual_norm = trace.initial_residual_norm;
  trace.stop_threshold = cfg.tol * std::max(1.0, trace.initial_residual_norm);
  trace.total_s1_evals = st.s1_evals;
  trace.total_s2_evals = st.s2_evals;

  SolveStatus status = SolveStatus::MaxIterations;
  for (long k = 0; k < cfg.max_iter; ++k) {
    if (st.r.norm() <= trace.stop_threshold) {
      status = SolveStatus::Converged;
      break;
    }
    const StepOutcome outcome = step(op, st, cfg, trace);
    if (outcome == StepOutcome::FixedPoint) {
      status = SolveStatus::Converged;
      break;
    }
    if (cfg.infeasibility.enabled &&
        detect_infeasibility(trace, cfg.infeasibility.window,
                             cfg.infeasibility.delta_tol)) {
      status = SolveStatus::InfeasibilitySuspected;
      result.displacement_estimate = st.r;
      break;
    }
  }
  if (status == SolveStatus::MaxIterations && st.r.norm() <= trace.stop_threshold)
    status = SolveStatus::Converged;

  result.status = status;
  trace.status = status;
  result.final_iterate = std::move(st.x);
  trace.final_residual_norm = st.r.norm();
  trace.total_s1_evals = st.s1_evals;
  trace.total_s2_evals = st.s2_evals;
  return result;
}

TraceCheck check_trace_bounds(const IterationTrace& trace, double averaging) {
  TraceCheck out;
  const auto& recs = trace.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double cur = recs[i].residual_norm;
    const double next = (i + 1 < recs.size()) ? recs[i + 1].residual_norm
                                              : trace.final_residual_norm;
    if (cur > 0.0) out.worst_monotone_ratio = std::max(out.worst_monotone_ratio, next / cur);
    if (next > cur * (1.0 + 1e-10)) out.monotone = false;
    out.telescoped_lhs += recs[i].nominal_gap_norm * recs[i].nominal_gap_norm;
  }
  out.telescoped_rhs = averaging / (1.0 - averaging) * trace.initial_residual_norm *
                       trace.initial_residual_norm;
  out.telescoped = out.telescoped_lhs <= out.telescoped_rhs * (1.0 + 1e-8);
  return out;
}

}  // namespace splitls
