#include "ooc/backend.hpp"

#include <mutex>

namespace falkon::ooc::backend {

void init_single_threaded() {
  static std::once_flag once;
  std::call_once(once, [] { openblas_set_num_threads(1); });
}

}  // namespace falkon::ooc::backend
