#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "splitls/engine.hpp"
#include "splitls/operators.hpp"
#include "splitls/problems.hpp"
#include "splitls/splitting.hpp"

using namespace splitls;

namespace {

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Vector rand_vec(Index n, Rng& rng) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Matrix rand_mat(Index rows, Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// S(x) = factor * x as an S-form split with affine s1 so the fast path runs.
SplitOperator scaling_op(Index n, double factor) {
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(AffineMap::identity(n));
  op.s2 = Operator::from_fn(
      n, [factor](const Vector& x) { return Vector(factor * x); });
  return op;
}

SplitOperator nnls_op(const ProblemFile& pf) {
  const auto& d = std::get<NnlsData>(pf.data);
  return build_dr(nnls_dr_problem(d.A, d.b, pf.params.gamma, pf.params.alpha));
}

}  // namespace

TEST_CASE("identity operator converges with zero iterations") {
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(AffineMap::identity(3));
  op.s2 = Operator::from_fn(3, [](const Vector& x) { return x; });

  Rng rng(1);
  const Vector x0 = rand_vec(3, rng);
  const SolveResult res = run(op, x0, LineSearchConfig{});
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.trace.records.empty());
  CHECK(res.trace.initial_residual_norm == 0.0);
  CHECK((res.final_iterate - x0).norm() == 0.0);
}

TEST_CASE("negation reaches its fixed point in one averaged step") {
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(AffineMap::identity(2));
  op.s2 = Operator::from_fn(2, [](const Vector& x) { return Vector(-x); });
  CHECK((op.apply(vec2(1.0, 0.0)) - vec2(-1.0, 0.0)).norm() == 0.0);

  StepState st = init_state(op, vec2(1.0, 0.0));
  CHECK((st.r - vec2(-2.0, 0.0)).norm() == 0.0);

  IterationTrace trace;
  CHECK(step(op, st, LineSearchConfig{}, trace) == StepOutcome::FixedPoint);
  CHECK(st.x.norm() == 0.0);

  const SolveResult res = run(op, vec2(1.0, 0.0), LineSearchConfig{});
  CHECK(res.status == SolveStatus::Converged);
  REQUIRE(res.trace.records.size() == 1);
  CHECK(res.trace.records[0].accepted_alpha == 0.5);
  CHECK(res.trace.records[0].candidates_evaluated == 0);
  CHECK_FALSE(res.trace.records[0].search_activated);
  CHECK(res.final_iterate.norm() == 0.0);
  CHECK(res.trace.final_residual_norm == 0.0);
}

TEST_CASE("nominal step depends on the splitting form") {
  CHECK(scaling_op(2, 0.5).nominal_step() == 0.5);
  SplitOperator op = scaling_op(2, 0.5);
  op.form = Form::TForm;
  op.averaging = 2.0 / 3.0;
  CHECK(op.nominal_step() == 1.0);
}

TEST_CASE("geometric backtracking enumerates alpha_max downward") {
  const auto steps =
      candidate_steps(GeometricBacktrack{1.0 / 1.4}, 0.5, 50.0);
  REQUIRE(steps.size() == 14);
  CHECK(steps.front() == 50.0);
  for (std::size_t i = 0; i + 1 < steps.size(); ++i)
    CHECK(steps[i + 1] < steps[i]);
  for (double a : steps) CHECK(a > 0.5);
  CHECK(steps.back() * (1.0 / 1.4) <= 0.5);
}

TEST_CASE("linear forward schedule keeps steps in (nominal, alpha_max]") {
  const LinearForward six{1.0, 6.25, 6};
  const auto above_nominal_one = candidate_steps(six, 1.0, 50.0);
  REQUIRE(above_nominal_one.size() == 5);
  CHECK(above_nominal_one.front() == doctest::Approx(7.25));
  CHECK(above_nominal_one.back() == doctest::Approx(32.25));
  for (std::size_t i = 0; i + 1 < above_nominal_one.size(); ++i)
    CHECK(above_nominal_one[i] < above_nominal_one[i + 1]);

  const auto capped = candidate_steps(six, 0.5, 20.0);
  REQUIRE(capped.size() == 4);
  CHECK(capped.front() == 1.0);
  CHECK(capped.back() == doctest::Approx(19.75));
}

TEST_CASE("cached candidate residuals match direct evaluation") {
  Rng rng(42);
  const Index n = 5;
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(
      AffineMap::dense(rand_mat(n, n, rng), rand_vec(n, rng)));
  op.s2 = Operator::from_fn(
      n, [](const Vector& v) { return Vector(v.cwiseMax(0.0)); });

  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = rand_vec(n, rng);
    const Vector s1x = (*op.s1.affine)(x);
    const Vector r = op.s2(s1x) - x;
    const Vector s1r = op.s1.affine->linear(r);
    const double alpha = rng.uniform(0.1, 3.0);

    const Candidate fast =
        evaluate_candidate_residual(op, &s1x, &s1r, x, r, alpha);
    const Vector xc = x + alpha * r;
    const Vector direct = op.s2(op.s1(xc)) - xc;
    CHECK_FALSE(fast.slow_path);
    CHECK((fast.x - xc).norm() == 0.0);
    CHECK((fast.r - direct).norm() <= 1e-12 * std::max(1.0, direct.norm()));

    const Candidate slow =
        evaluate_candidate_residual(op, nullptr, nullptr, x, r, alpha);
    CHECK(slow.slow_path);
    CHECK((slow.r - direct).norm() == 0.0);
  }

  SUBCASE("alpha = 0 reproduces the current point and residual exactly") {
    const Vector x = rand_vec(n, rng);
    const Vector s1x = (*op.s1.affine)(x);
    const Vector r = op.s2(s1x) - x;
    const Vector s1r = op.s1.affine->linear(r);
    const Candidate c = evaluate_candidate_residual(op, &s1x, &s1r, x, r, 0.0);
    CHECK((c.x.array() == x.array()).all());
    CHECK((c.r.array() == r.array()).all());
  }
}

TEST_CASE("refresh_cache applies the vector update and periodic re-anchor") {
  Rng rng(7);
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(
      AffineMap::dense(rand_mat(4, 4, rng), rand_vec(4, rng)));
  op.s2 = Operator::from_fn(4, [](const Vector& v) { return v; });

  const Vector x_next = rand_vec(4, rng);
  const Vector s1r = rand_vec(4, rng);
  Vector cache = rand_vec(4, rng);
  const Vector before = cache;
  long since = 0;
  long evals = 0;

  SUBCASE("zero step length leaves the cache values unchanged") {
    CHECK_FALSE(refresh_cache(op, x_next, 0.0, s1r, cache, since, 10, &evals));
    CHECK((cache - before).norm() == 0.0);
    CHECK(since == 1);
    CHECK(evals == 0);
  }

  SUBCASE("vector update accumulates alpha * s1r without an s1 application") {
    CHECK_FALSE(refresh_cache(op, x_next, 2.5, s1r, cache, since, 10, &evals));
    CHECK((cache - (before + 2.5 * s1r)).norm() == 0.0);
    CHECK(evals == 0);
  }

  SUBCASE("re-anchor replaces the cache with an exact application") {
    since = 9;
    CHECK(refresh_cache(op, x_next, 1.0, s1r, cache, since, 10, &evals));
    CHECK((cache - (*op.s1.affine)(x_next)).norm() == 0.0);
    CHECK(since == 0);
    CHECK(evals == 1);
  }

  SUBCASE("missing eval counter is tolerated") {
    since = 9;
    CHECK(refresh_cache(op, x_next, 1.0, s1r, cache, since, 10, nullptr));
    CHECK(since == 0);
  }
}

TEST_CASE("cache drift between re-anchors stays below 1e-8 relative") {
  const SplitOperator op = nnls_op(gen_nnls(30, 30, 2));
  Rng rng(11);
  const Vector x0 = rand_vec(op.dim(), rng);

  LineSearchConfig cfg;
  cfg.refresh_period = 25;
  StepState st = init_state(op, x0);
  IterationTrace trace;
  for (long k = 0; k < 100; ++k) {
    REQUIRE(st.cached_s1x.has_value());
    const Vector exact = (*op.s1.affine)(st.x);
    CHECK((*st.cached_s1x - exact).norm() <=
          1e-8 * std::max(1.0, exact.norm()));
    if (step(op, st, cfg, trace) == StepOutcome::FixedPoint) break;
    const auto& rec = trace.records.back();
    CHECK(rec.s1_evals == (rec.k % 25 == 24 ? 2 : 1));
    CHECK_FALSE(rec.slow_path);
  }
  CHECK(trace.records.size() == 100);

  SUBCASE("refresh period one keeps the cache exact every iteration") {
    LineSearchConfig every;
    every.refresh_period = 1;
    StepState fresh = init_state(op, x0);
    IterationTrace t2;
    for (long k = 0; k < 30; ++k) {
      if (step(op, fresh, every, t2) == StepOutcome::FixedPoint) break;
      CHECK((*fresh.cached_s1x - (*op.s1.affine)(fresh.x)).norm() == 0.0);
      CHECK(t2.records.back().s1_evals == 2);
    }
  }
}

TEST_CASE("cosine activation gate") {
  CHECK(activation_check(vec2(1.0, 0.0), vec2(1.0, 0.0), 0.5));
  CHECK(activation_check(vec2(1.0, 0.0), vec2(1.0, 0.0), 0.01));
  CHECK_FALSE(activation_check(vec2(1.0, 0.0), vec2(0.0, 1.0), 0.1));
  // cos = 1/sqrt(1.01) = 0.99504 sits between the 0.99 and 0.999 gates
  CHECK(activation_check(vec2(1.0, 0.1), vec2(1.0, 0.0), 0.01));
  CHECK_FALSE(activation_check(vec2(1.0, 0.1), vec2(1.0, 0.0), 0.001));
  CHECK_FALSE(activation_check(vec2(0.0, 0.0), vec2(1.0, 0.0), 0.5));
  CHECK_FALSE(activation_check(Vector(), vec2(1.0, 0.0), 0.5));

  SUBCASE("the first two iterations never activate") {
    LineSearchConfig cfg;
    cfg.activation = CosineAligned{0.5};
    cfg.tol = 1e-10;
    const SolveResult res = run(scaling_op(3, 0.5), Vector(Vector::Ones(3)), cfg);
    REQUIRE(res.trace.records.size() >= 3);
    CHECK_FALSE(res.trace.records[0].search_activated);
    CHECK_FALSE(res.trace.records[1].search_activated);
    // plain averaged steps move along a fixed ray, so iteration 2 aligns
    CHECK(res.trace.records[2].search_activated);
  }
}

TEST_CASE("generalized acceptance matches a direct residual comparison") {
  const ProblemFile pf = gen_nnls(10, 15, 3);
  const SplitOperator op = nnls_op(pf);
  Rng rng(5);
  const Vector x = rand_vec(op.dim(), rng);
  const Vector r = op.apply(x) - x;
  const Vector xbar = x + op.nominal_step() * r;
  const double nominal_norm = (op.apply(xbar) - xbar).norm();
  REQUIRE(nominal_norm > 0.0);

  CHECK_FALSE(generalized_accept(op, xbar, nominal_norm, 0.03));

  for (int trial = 0; trial < 20; ++trial) {
    const Vector y = xbar + 0.3 * rand_vec(op.dim(), rng);
    const bool expected = (op.apply(y) - y).norm() <= 0.97 * nominal_norm;
    CHECK(generalized_accept(op, y, nominal_norm, 0.03) == expected);
  }

  SplitOperator neg;
  neg.form = Form::SForm;
  neg.averaging = 0.5;
  neg.s1 = Operator::from_affine(AffineMap::identity(2));
  neg.s2 = Operator::from_fn(2, [](const Vector& v) { return Vector(-v); });
  CHECK(generalized_accept(neg, Vector(Vector::Zero(2)), 1.0, 0.5));
  CHECK(generalized_accept(neg, Vector(Vector::Zero(2)), 0.0, 0.5));

  CHECK_THROWS_AS(generalized_accept(op, Vector(Vector::Zero(3)), 1.0, 0.03),
                  ConfigError);
}

TEST_CASE("selection rules pick the documented candidate") {
  // S(x) = x/2, so the step-alpha residual norm is |1 - alpha/2| / 2 * ||x||
  // in closed form and the passing set is an interval around alpha = 2.
  const SplitOperator op = scaling_op(2, 0.5);
  const Vector x0 = vec2(1.0, 0.0);
  const auto alphas = candidate_steps(GeometricBacktrack{1.0 / 1.4}, 0.5, 50.0);
  const double nominal_norm = 0.5 * std::abs(1.0 - 0.25);
  const double threshold = (1.0 - 0.03) * nominal_norm;

  double best_alpha = 0.0;
  double best_norm = std::numeric_limits<double>::infinity();
  double farthest_alpha = 0.0;
  double first_alpha = 0.0;
  for (double a : alphas) {
    const double nrm = 0.5 * std::abs(1.0 - 0.5 * a);
    if (nrm > threshold) continue;
    if (first_alpha == 0.0) first_alpha = a;
    if (nrm < best_norm) {
      best_norm = nrm;
      best_alpha = a;
    }
    farthest_alpha = std::max(farthest_alpha, a);
  }
  REQUIRE(best_alpha > 0.0);
  REQUIRE(farthest_alpha > best_alpha);

  auto accepted_with = [&](SelectionRule rule) {
    LineSearchConfig cfg;
    cfg.selection = rule;
    StepState st = init_state(op, x0);
    IterationTrace trace;
    REQUIRE(step(op, st, cfg, trace) == StepOutcome::Continue);
    REQUIRE(trace.records.size() == 1);
    CHECK(trace.records[0].search_activated);
    return trace.records[0].accepted_alpha;
  };
  CHECK(accepted_with(SelectionRule::FirstPassing) == first_alpha);
  CHECK(accepted_with(SelectionRule::BestOfSchedule) == best_alpha);
  CHECK(accepted_with(SelectionRule::FarthestPassing) == farthest_alpha);

  SUBCASE("the accepted residual is stored for reuse") {
    LineSearchConfig cfg;
    cfg.selection = SelectionRule::BestOfSchedule;
    StepState st = init_state(op, x0);
    IterationTrace trace;
    step(op, st, cfg, trace);
    const Vector expected = -0.5 * (1.0 - 0.5 * best_alpha) * x0;
    CHECK((st.r - expected).norm() <= 1e-14);
  }
}

TEST_CASE("translation drift triggers infeasibility detection") {
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(AffineMap::identity(2));
  op.s2 = Operator::from_fn(2, [](const Vector& x) {
    Vector out = x;
    out(0) += 1.0;
    return out;
  });

  const SolveResult res = run(op, vec2(3.0, -2.0), LineSearchConfig{});
  CHECK(res.status == SolveStatus::InfeasibilitySuspected);
  // fires as soon as the window is full
  CHECK(res.trace.records.size() == 20);
  REQUIRE(res.displacement_estimate.has_value());
  CHECK((*res.displacement_estimate - vec2(1.0, 0.0)).norm() == 0.0);
  for (const auto& rec : res.trace.records) {
    CHECK(rec.nominal_residual_norm == doctest::Approx(1.0));
    // no candidate can shrink a pure translation, so the sweep falls back
    CHECK(rec.search_activated);
    CHECK(rec.candidates_evaluated == 14);
    CHECK(rec.accepted_alpha == 0.5);
  }

  SUBCASE("a feasible run never fires") {
    const ProblemFile pf = gen_nnls(40, 60, 0);
    const SolveResult feasible =
        run(nnls_op(pf), Vector(Vector::Zero(40)), LineSearchConfig{});
    CHECK(feasible.status == SolveStatus::Converged);
    CHECK_FALSE(feasible.displacement_estimate.has_value());
  }
}

TEST_CASE("halving map meets the averaged contraction factor") {
  LineSearchConfig cfg;
  cfg.activation = NeverSearch{};
  cfg.tol = 1e-12;
  const SolveResult res = run(scaling_op(3, 0.5), Vector(Vector::Ones(3)), cfg);
  CHECK(res.status == SolveStatus::Converged);
  REQUIRE(res.trace.records.size() > 10);

  // factor bound 1 - averaging + averaging * delta with delta = 1/2
  const double bound = 0.75 * (1.0 + 1e-10);
  const auto& recs = res.trace.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double cur = recs[i].residual_norm;
    const double next = (i + 1 < recs.size()) ? recs[i + 1].residual_norm
                                              : res.trace.final_residual_norm;
    CHECK(next <= bound * cur);
  }

  const TraceCheck tc = check_trace_bounds(res.trace, 0.5);
  CHECK(tc.monotone);
  CHECK(tc.telescoped);
  CHECK(tc.worst_monotone_ratio == doctest::Approx(0.75));
  CHECK(tc.telescoped_lhs <= tc.telescoped_rhs);
}

TEST_CASE("line search cuts NNLS iterations at one s1 application each") {
  for (std::uint64_t seed : {0ULL, 1ULL}) {
    const ProblemFile pf = gen_nnls(120, 120, seed);
    const SplitOperator op = nnls_op(pf);
    const Vector x0 = Vector::Zero(120);

    LineSearchConfig ls;
    ls.tol = 1e-5;
    ls.refresh_period = 200000;  // never re-anchor, isolating the cost model
    const SolveResult with_ls = run(op, x0, ls);
    REQUIRE(with_ls.status == SolveStatus::Converged);

    LineSearchConfig plain = ls;
    plain.activation = NeverSearch{};
    const SolveResult without = run(op, x0, plain);
    REQUIRE(without.status == SolveStatus::Converged);

    const double ratio = static_cast<double>(without.trace.records.size()) /
                         static_cast<double>(with_ls.trace.records.size());
    CHECK(ratio >= 2.0);

    long s1_from_records = 0;
    long s2_from_records = 0;
    int max_candidates = 0;
    for (const auto& rec : with_ls.trace.records) {
      CHECK(rec.s1_evals == 1);
      CHECK(rec.s2_evals == 1 + rec.candidates_evaluated);
      CHECK(rec.candidates_evaluated <= 14);
      CHECK_FALSE(rec.slow_path);
      s1_from_records += rec.s1_evals;
      s2_from_records += rec.s2_evals;
      max_candidates = std::max(max_candidates, rec.candidates_evaluated);
    }
    CHECK(max_candidates == 14);
    CHECK(with_ls.trace.total_s1_evals == 1 + s1_from_records);
    CHECK(with_ls.trace.total_s2_evals == 1 + s2_from_records);

    for (const auto& rec : without.trace.records) {
      CHECK_FALSE(rec.search_activated);
      CHECK(rec.candidates_evaluated == 0);
      CHECK(rec.accepted_alpha == 0.5);
    }

    const TraceCheck tc = check_trace_bounds(with_ls.trace, 0.5);
    CHECK(tc.monotone);
    CHECK(tc.telescoped);
  }
}

TEST_CASE("validation rejects malformed operators and configs") {
  const SplitOperator op = scaling_op(2, 0.5);

  SplitOperator bad = op;
  bad.averaging = 0.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad.averaging = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  bad = op;
  bad.s2 = Operator::from_fn(3, [](const Vector& v) { return v; });
  CHECK_THROWS_AS(validate(bad), ConfigError);

  bad = op;
  bad.s1 = Operator{};
  bad.s1.dim = 2;
  CHECK_THROWS_AS(validate(bad), ConfigError);

  auto rejects = [&op](auto mutate) {
    LineSearchConfig cfg;
    mutate(cfg);
    CHECK_THROWS_AS(validate(cfg, op), ConfigError);
  };
  rejects([](LineSearchConfig& c) { c.epsilon = 0.0; });
  rejects([](LineSearchConfig& c) { c.epsilon = 1.0; });
  rejects([](LineSearchConfig& c) { c.alpha_max = 0.4; });
  rejects([](LineSearchConfig& c) { c.tol = -1.0; });
  rejects([](LineSearchConfig& c) { c.max_iter = 0; });
  rejects([](LineSearchConfig& c) { c.refresh_period = 0; });
  rejects([](LineSearchConfig& c) { c.schedule = GeometricBacktrack{1.4}; });
  rejects([](LineSearchConfig& c) { c.schedule = GeometricBacktrack{0.0}; });
  rejects([](LineSearchConfig& c) { c.schedule = LinearForward{1.0, 1.0, 0}; });
  rejects([](LineSearchConfig& c) { c.schedule = LinearForward{1.0, 0.0, 5}; });
  rejects([](LineSearchConfig& c) { c.activation = CosineAligned{0.0}; });
  rejects([](LineSearchConfig& c) { c.activation = CosineAligned{1.0}; });
  rejects([](LineSearchConfig& c) { c.infeasibility.window = 0; });
  rejects([](LineSearchConfig& c) { c.infeasibility.delta_tol = 0.0; });

  SUBCASE("an activated sweep with no admissible steps is a config error") {
    LineSearchConfig cfg;
    cfg.schedule = LinearForward{0.05, 0.05, 3};  // all at or below nominal
    CHECK_NOTHROW(validate(cfg, op));
    CHECK_THROWS_AS(run(op, vec2(1.0, 0.0), cfg), ConfigError);
  }
}

TEST_CASE("non-finite residuals raise NumericalError with the iteration") {
  SplitOperator op;
  op.form = Form::SForm;
  op.averaging = 0.5;
  op.s1 = Operator::from_affine(AffineMap::identity(2));
  op.s2 = Operator::from_fn(2, [](const Vector& v) {
    if (v.norm() < 0.6)
      return Vector(
          Vector::Constant(2, std::numeric_limits<double>::quiet_NaN()));
    return Vector(0.5 * v);
  });

  LineSearchConfig cfg;
  cfg.activation = NeverSearch{};
  try {
    run(op, vec2(1.0, 0.0), cfg);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.iteration == 1);
    CHECK(std::string(e.what()).find("iteration 1") != std::string::npos);
  }

  SUBCASE("failure during initialization reports iteration -1") {
    SplitOperator poison = op;
    poison.s2 = Operator::from_fn(2, [](const Vector&) {
      return Vector(
          Vector::Constant(2, std::numeric_limits<double>::quiet_NaN()));
    });
    try {
      run(poison, vec2(1.0, 0.0), cfg);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(e.iteration == -1);
    }
  }
}
