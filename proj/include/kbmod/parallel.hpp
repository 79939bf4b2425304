#pragma once

namespace kbmod {

// Selects the OpenMP kernel or its serial reference. Both produce identical
// results; the serial path exists for testing and benchmarking.
enum class Execution { serial, parallel };

// 0 keeps the OpenMP default.
void set_thread_count(int threads);
int thread_count();

}  // namespace kbmod
