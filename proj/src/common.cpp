#include "lanekoop/common.hpp"

#include <array>
#include <charconv>

namespace lanekoop {

Rng derive_stream(std::uint64_t master_seed, StreamDomain domain, std::uint64_t index) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(master_seed & 0xffffffffu),
        static_cast<std::uint32_t>(master_seed >> 32),
        static_cast<std::uint32_t>(domain),
        static_cast<std::uint32_t>(index & 0xffffffffu),
        static_cast<std::uint32_t>(index >> 32),
    };
    return Rng(seq);
}

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
    return std::normal_distribution<double>{0.0, 1.0}(rng);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) {
        throw std::runtime_error("format_double: conversion failed");
    }
    return std::string(buf.data(), end);
}

}  // namespace lanekoop
