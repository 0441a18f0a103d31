#pragma once

#include <cstdint>
#include <cstring>
#include <random>
#include <string_view>

namespace rlihf {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return mix64(seed ^ mix64(value));
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::string_view text) {
    // FNV-1a over the bytes, then mixed in.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return hash_combine(seed, h);
}

inline std::uint64_t hash_combine(std::uint64_t seed, double value) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &value, sizeof bits);
    return hash_combine(seed, bits);
}

// Named sub-stream of a parent seed ("env", "agent", "feedback", ...).
inline std::uint64_t make_stream_seed(std::uint64_t seed, std::string_view name) {
    return hash_combine(seed, name);
}

inline Rng make_stream(std::uint64_t seed, std::string_view name) {
    return Rng(make_stream_seed(seed, name));
}

}  // namespace rlihf
