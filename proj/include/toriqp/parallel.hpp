#pragma once

#include <functional>

namespace toriqp {

// Worker count for nodewise loops (flows, frames). 0 = hardware default.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Iterations must be independent; each writes its
// own output slot so results do not depend on scheduling. Exceptions from
// workers are captured and the first one is rethrown on the calling thread.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace toriqp
