#pragma once

namespace factorspace {

// Selects between the OpenMP kernels and the serial reference kernels.
// The parallel kernels assign every output element to exactly one thread
// and reduce partial sums in a fixed order, so their results do not depend
// on the thread count. The serial kernels are the straightforward loops and
// agree with the parallel ones up to floating-point reassociation.
enum class Exec { serial, parallel };

// Caps OpenMP worker threads; n <= 0 leaves the runtime default.
void set_thread_limit(int n);
int thread_limit();

}  // namespace factorspace
