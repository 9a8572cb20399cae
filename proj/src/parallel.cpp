#include "sgpf/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sgpf {

int effective_workers(const ParallelOptions& opts) {
    if (opts.execution == Execution::Serial) return 1;
#ifdef _OPENMP
    return opts.workers > 0 ? opts.workers : omp_get_max_threads();
#else
    return 1;
#endif
}

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kLeaf = 8;
    if (values.size() <= kLeaf) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace sgpf
