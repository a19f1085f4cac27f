#pragma once
// Data-parallel kernels behind the snapshot/solve hot loops.
//
// Every kernel has a scalar reference implementation plus, where the target
// supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The active
// variant is chosen once at startup from CPU features and can be overridden
// with LANEKOOP_ISA=scalar|avx2|neon or set_isa() (tests use this to compare
// variants against each other).

#include <cstddef>
#include <span>
#include <string_view>

namespace lanekoop::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

/// Whether this binary carries the variant and the running CPU can execute it.
bool isa_supported(Isa isa);

/// Widest supported variant.
Isa best_isa();

Isa active_isa();

/// Throws std::invalid_argument if the variant is not supported.
void set_isa(Isa isa);

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_squares)(const double* a, std::size_t n);
    void (*hadamard)(const double* a, const double* b, double* out, std::size_t n);
};

const KernelTable& kernels_for(Isa isa);

// Convenience wrappers that go through the active table.
double dot(std::span<const double> a, std::span<const double> b);
double sum_squares(std::span<const double> a);
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out);

namespace detail {
extern const KernelTable scalar_table;
#if defined(LANEKOOP_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
#if defined(LANEKOOP_HAVE_NEON)
extern const KernelTable neon_table;
#endif
}  // namespace detail

}  // namespace lanekoop::simd
