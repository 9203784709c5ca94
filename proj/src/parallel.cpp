#include "modsensor/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

#include "modsensor/errors.hpp"

namespace modsensor {

int configured_threads() {
  const char* raw = std::getenv("MODSENSOR_THREADS");
  if (raw == nullptr || *raw == '\0') return omp_get_max_threads();
  char* end = nullptr;
  const long n = std::strtol(raw, &end, 10);
  if (*end != '\0' || n < 1 || n > 4096) {
    throw ValidationError(std::string("MODSENSOR_THREADS must be a positive integer, got '") + raw + "'");
  }
  return static_cast<int>(n);
}

}  // namespace modsensor
