#pragma once

#include <functional>

namespace slicedict {

/// Worker count used by the engine; 0 restores the hardware default.
void set_num_threads(int threads);
int num_threads();

/// Calls body(i) for i in [begin, end), split into contiguous chunks across workers.
/// Bodies must only write state owned by index i.
void parallel_for(int begin, int end, const std::function<void(int)>& body);

} // namespace slicedict
