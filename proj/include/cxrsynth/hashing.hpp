#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cxrsynth {

using Blob = std::string;
using Rng = std::mt19937_64;

// FNV-1a, 64 bit. Stable across platforms and releases; used for entity ids.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

// Derive an independent sub-stream seed from a base seed and a path of
// integer tags, e.g. derive_seed(seed, {slot, draw, kStageFindings}).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// Map a 64-bit hash to [0, 1).
double unit_interval(std::uint64_t h);

std::string sha256_hex(std::string_view bytes);

std::string base64_encode(std::string_view bytes);
// Throws Error(PreconditionViolation) on malformed input.
std::string base64_decode(std::string_view text);

std::string to_hex64(std::uint64_t v);
// Throws Error(MalformedRecord) if `text` is not a 16-digit hex number.
std::uint64_t from_hex64(std::string_view text);

} // namespace cxrsynth
