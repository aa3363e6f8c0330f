#include <CLI11.hpp>

#include <iostream>

#include "splitls/cli.hpp"
#include "splitls/types.hpp"

namespace {

void add_override_flags(CLI::App* cmd, splitls::ConfigOverrides* ov) {
  cmd->add_flag("--no-linesearch", ov->no_linesearch,
                "run the plain averaged iteration");
  cmd->add_option("--epsilon", ov->epsilon,
                  "line search acceptance margin in (0, 1)");
  cmd->add_option("--alpha-max", ov->alpha_max, "largest candidate step");
  cmd->add_option("--schedule", ov->schedule,
                  "candidate schedule: geometric:FACTOR or linear:START,SPACING,COUNT");
  cmd->add_option("--selection", ov->selection,
                  "first_passing, best_of_schedule or farthest_passing");
  cmd->add_option("--activation", ov->activation,
                  "when to search: always, cosine or never");
  cmd->add_option("--eps-hat", ov->eps_hat,
                  "cosine activation margin (implies --activation cosine)");
  cmd->add_option("--tol", ov->tol, "relative residual stopping tolerance");
  cmd->add_option("--max-iter", ov->max_iter, "iteration cap");
  cmd->add_option("--refresh-period", ov->refresh_period,
                  "exact cache re-anchoring interval");
  cmd->add_flag("--no-infeasibility-check", ov->no_infeasibility_check,
                "disable the residual-stagnation detector");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"averaged-operator splitting solvers with a fixed-point-residual "
               "line search"};
  app.require_subcommand(1);

  splitls::GenOptions gen_opt;
  CLI::App* gen = app.add_subcommand("gen", "generate a problem file");
  gen->add_option("kind", gen_opt.kind,
                  "nnls, circle-line, disjoint, qp or consensus")
      ->required();
  gen->add_option("--n", gen_opt.n, "variable dimension / matrix columns");
  gen->add_option("--m", gen_opt.m, "rows (nnls) or second block dimension (qp)");
  gen->add_option("--p", gen_opt.p, "coupling rows (qp)");
  gen->add_option("--count", gen_opt.count, "number of consensus terms");
  gen->add_option("--angle", gen_opt.angle_deg, "start angle in degrees");
  gen->add_option("--gap", gen_opt.gap, "set distance for the disjoint pair");
  gen->add_option("--seed", gen_opt.seed, "RNG seed");
  gen->add_option("--out", gen_opt.out, "output path");

  splitls::SolveOptions solve_opt;
  CLI::App* solve = app.add_subcommand("solve", "run a solver on a problem file");
  solve->add_option("problem", solve_opt.problem_path, "problem JSON path")
      ->required();
  solve->add_option("--out-dir", solve_opt.out_dir,
                    "directory for trace.csv and summary.json");
  solve->add_option("--seed", solve_opt.seed,
                    "regenerate the problem's random data under this seed");
  add_override_flags(solve, &solve_opt.overrides);

  splitls::SolveOptions bench_opt;
  CLI::App* bench = app.add_subcommand(
      "bench", "solve twice (line search on and off) and compare");
  bench->add_option("problem", bench_opt.problem_path, "problem JSON path")
      ->required();
  bench->add_option("--out-dir", bench_opt.out_dir,
                    "directory for curves, scatter and bench.json");
  bench->add_option("--seed", bench_opt.seed,
                    "regenerate the problem's random data under this seed");
  add_override_flags(bench, &bench_opt.overrides);

  splitls::DemoApOptions demo_opt;
  CLI::App* demo = app.add_subcommand(
      "demo-ap", "one annotated line-search iteration of alternating projections");
  demo->add_option("--angle", demo_opt.angle_deg, "start angle in degrees");
  demo->add_option("--start", demo_opt.start, "first candidate step");
  demo->add_option("--spacing", demo_opt.spacing, "candidate spacing");
  demo->add_option("--count", demo_opt.count,
                   "candidate points including the nominal step");
  demo->add_option("--epsilon", demo_opt.epsilon, "acceptance margin");
  demo->add_option("--alpha-max", demo_opt.alpha_max, "largest candidate step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    if (gen->parsed()) return splitls::cmd_gen(gen_opt);
    if (solve->parsed()) return splitls::cmd_solve(solve_opt);
    if (bench->parsed()) return splitls::cmd_bench(bench_opt);
    return splitls::cmd_demo_ap(demo_opt);
  } catch (const splitls::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  } catch (const splitls::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 65;
  } catch (const splitls::SingularMatrixError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  } catch (const splitls::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 70;
  }
}
