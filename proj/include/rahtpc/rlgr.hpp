#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rahtpc::rlgr {

// Adaptation constants. Encoder and decoder must agree on every value; see
// docs/rlgr.md for the state machine.
inline constexpr int kFractionBits = 3;      // states carry k << 3
inline constexpr int kMaxState = 80;         // kr <= 10
inline constexpr int kMaxRunState = 192;     // k <= 24
inline constexpr int kRunUp = 4;             // full run of zeros
inline constexpr int kRunDown = 6;           // run ended by a nonzero
inline constexpr int kZeroUp = 3;            // no-run mode, symbol == 0
inline constexpr int kNonzeroDown = 3;       // no-run mode, symbol != 0
inline constexpr int kInitialState = 1 << kFractionBits;  // k = kr = 1
inline constexpr int kEscapePrefix = 24;     // unary prefixes longer than this escape

std::uint64_t zigzag(std::int64_t v);
std::int64_t unzigzag(std::uint64_t u);

std::vector<std::uint8_t> encode(std::span<const std::int64_t> symbols);

// Throws a Decode error (with byte offset) on a truncated or inconsistent stream.
std::vector<std::int64_t> decode(std::span<const std::uint8_t> bytes, std::size_t count);

}  // namespace rahtpc::rlgr
