#pragma once

#include <cstddef>
#include <span>

namespace sgpf {

/// Selects between the OpenMP kernel and the serial reference path.
/// Both paths produce bitwise-identical results.
enum class Execution { Serial, Parallel };

struct ParallelOptions {
    Execution execution = Execution::Parallel;
    /// 0 means "use the OpenMP default".
    int workers = 0;
};

/// Number of threads an OpenMP region would use under `opts`.
int effective_workers(const ParallelOptions& opts);

/// Deterministic pairwise (cascade) summation. The reduction tree depends
/// only on the length of `values`, never on thread scheduling.
double pairwise_sum(std::span<const double> values);

}  // namespace sgpf
