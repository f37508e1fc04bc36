#include <atomic>
#include <cstdlib>
#include <string>

#include "tgnseal/errors.hpp"
#include "tgnseal/kernels.hpp"

namespace tgnseal::kernels {
namespace {

const KernelTable* pick_default() {
  if (const char* env = std::getenv("TGNSEAL_ISA")) {
    if (std::string_view(env) == "scalar") return &scalar_table();
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

Isa active_isa() { return &active() == &scalar_table() ? Isa::scalar : Isa::avx2; }

void set_isa(Isa isa) {
  if (isa == Isa::scalar) {
    current().store(&scalar_table());
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw ConfigError("AVX2 kernels are not available on this build/CPU");
  current().store(t);
}

std::string_view isa_name(Isa isa) { return isa == Isa::scalar ? "scalar" : "avx2"; }

}  // namespace tgnseal::kernels
