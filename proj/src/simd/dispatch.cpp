#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "lanekoop/simd.hpp"

namespace lanekoop::simd {
namespace {

Isa initial_isa() {
    if (const char* forced = std::getenv("LANEKOOP_ISA")) {
        const std::string name(forced);
        for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Neon}) {
            if (name == isa_name(isa) && isa_supported(isa)) {
                return isa;
            }
        }
    }
    return best_isa();
}

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
#if defined(LANEKOOP_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::Neon:
#if defined(LANEKOOP_HAVE_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Isa best_isa() {
    if (isa_supported(Isa::Avx2)) return Isa::Avx2;
    if (isa_supported(Isa::Neon)) return Isa::Neon;
    return Isa::Scalar;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw std::invalid_argument("ISA not supported on this machine: " + std::string(isa_name(isa)));
    }
    active().store(isa, std::memory_order_relaxed);
}

const KernelTable& kernels_for(Isa isa) {
    switch (isa) {
#if defined(LANEKOOP_HAVE_AVX2)
        case Isa::Avx2: return detail::avx2_table;
#endif
#if defined(LANEKOOP_HAVE_NEON)
        case Isa::Neon: return detail::neon_table;
#endif
        default: return detail::scalar_table;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("simd::dot: length mismatch");
    return kernels_for(active_isa()).dot(a.data(), b.data(), a.size());
}

double sum_squares(std::span<const double> a) {
    return kernels_for(active_isa()).sum_squares(a.data(), a.size());
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    if (a.size() != b.size() || a.size() != out.size()) {
        throw std::invalid_argument("simd::hadamard: length mismatch");
    }
    kernels_for(active_isa()).hadamard(a.data(), b.data(), out.data(), a.size());
}

}  // namespace lanekoop::simd
