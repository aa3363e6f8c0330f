#pragma once

#include <string>

#include "splitls/engine.hpp"
#include "splitls/problems.hpp"

namespace splitls {

// Formats with 17 significant digits; round-trips every finite double.
std::string fmt17(double v);

// Problem files are JSON with dense row-major arrays. Serialization is
// deterministic: same ProblemFile, same bytes. The solver step-size parameter
// is stored under "rho" for the qp kind and "gamma" otherwise.
std::string problem_to_json(const ProblemFile& pf);
ProblemFile problem_from_json(const std::string& text);

void save_problem(const ProblemFile& pf, const std::string& path);
ProblemFile load_problem(const std::string& path);

// Trace CSV persists the records only (header plus one row per iteration):
// k,res_norm,nominal_res_norm,alpha_k,candidates,activated
// Diagnostic record fields and trace aggregates stay in memory.
std::string trace_to_csv(const IterationTrace& trace);
IterationTrace trace_from_csv(const std::string& text);

void save_trace(const IterationTrace& trace, const std::string& path);
IterationTrace load_trace(const std::string& path);

// Writes via a temp file in the target directory plus an atomic rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace splitls
