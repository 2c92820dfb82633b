#include <atomic>
#include <cstdlib>

#include "nnviz/errors.hpp"
#include "nnviz/kernels.hpp"

namespace nnviz::kernels {

namespace detail {
#if !NNVIZ_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif
#if !NNVIZ_HAVE_NEON
const KernelTable* neon_table() { return nullptr; }
#endif
}  // namespace detail

namespace {

bool cpu_supports(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if NNVIZ_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::neon:
      // NEON (with float64 lanes) is mandatory on AArch64.
      return NNVIZ_HAVE_NEON != 0;
  }
  return false;
}

const KernelTable* lookup(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return &scalar_table();
    case Backend::avx2:
      return detail::avx2_table();
    case Backend::neon:
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("NNVIZ_KERNELS")) {
    const auto requested = parse_backend(env);
    if (requested && available(*requested)) return lookup(*requested);
  }
  return lookup(best_available());
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

bool available(Backend backend) { return lookup(backend) != nullptr && cpu_supports(backend); }

const KernelTable& table(Backend backend) {
  if (!available(backend)) {
    throw ParameterError("kernel backend '" + std::string(name(backend)) + "' is not available on this machine");
  }
  return *lookup(backend);
}

Backend best_available() {
  if (available(Backend::avx2)) return Backend::avx2;
  if (available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void select(Backend backend) { active_slot().store(&table(backend), std::memory_order_release); }

std::string_view name(Backend backend) {
  switch (backend) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

std::optional<Backend> parse_backend(std::string_view text) {
  if (text == "scalar") return Backend::scalar;
  if (text == "avx2") return Backend::avx2;
  if (text == "neon") return Backend::neon;
  if (text == "auto") return best_available();
  return std::nullopt;
}

}  // namespace nnviz::kernels
