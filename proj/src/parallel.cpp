#include "factorspace/parallel.hpp"

#include <omp.h>

namespace factorspace {

namespace {
int g_limit = 0;
}

void set_thread_limit(int n) {
    g_limit = n > 0 ? n : 0;
    if (g_limit > 0) omp_set_num_threads(g_limit);
}

int thread_limit() { return g_limit > 0 ? g_limit : omp_get_max_threads(); }

}  // namespace factorspace
