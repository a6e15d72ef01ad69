#pragma once

namespace dho {

// Caps internal parallelism. 0 keeps the runtime default.
void set_max_threads(int n);
int max_threads();

}  // namespace dho
