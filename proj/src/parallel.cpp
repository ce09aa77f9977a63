#include "adnet/parallel.hpp"

#include <cstdlib>

namespace adnet {

ExecPolicy ExecPolicy::parallel(int max_threads) {
    int n = max_threads > 0 ? max_threads
                            : static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* cap = std::getenv("ADNET_THREADS")) {
        const int c = std::atoi(cap);
        if (c > 0 && c < n) n = c;
    }
    return ExecPolicy{n};
}

} // namespace adnet
