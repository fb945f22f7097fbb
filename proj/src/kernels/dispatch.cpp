#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"

namespace poiact::kernels {

namespace {

constexpr KernelTable kScalar{Isa::kScalar, detail::min_distances_scalar, detail::weighted_accumulate_scalar,
                              detail::sqrt_diff_sq_sum_scalar, detail::sum_scalar};

#if defined(POIACT_HAVE_AVX2)
constexpr KernelTable kAvx2{Isa::kAvx2, detail::min_distances_avx2, detail::weighted_accumulate_avx2,
                            detail::sqrt_diff_sq_sum_avx2, detail::sum_avx2};
#endif

const KernelTable& select() {
  const char* env = std::getenv("POIACT_ISA");
  if (env && std::string(env) == "scalar") return kScalar;
  return isa_available(Isa::kAvx2) ? table_for(Isa::kAvx2) : kScalar;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

const KernelTable& scalar_table() { return kScalar; }

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(POIACT_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
#if defined(POIACT_HAVE_AVX2)
  if (isa == Isa::kAvx2 && isa_available(Isa::kAvx2)) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

}  // namespace poiact::kernels
