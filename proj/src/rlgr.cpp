#include "rahtpc/rlgr.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "rahtpc/error.hpp"

namespace rahtpc::rlgr {

std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

std::int64_t unzigzag(std::uint64_t u) {
  return static_cast<std::int64_t>(u >> 1) ^ -static_cast<std::int64_t>(u & 1U);
}

namespace {

class BitWriter {
public:
  void put(bool bit) {
    cur_ = static_cast<std::uint8_t>((cur_ << 1) | (bit ? 1U : 0U));
    if (++fill_ == 8) flush_byte();
  }
  void put_bits(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) put(((v >> i) & 1U) != 0);
  }
  void put_ones(int n) {
    for (int i = 0; i < n; ++i) put(true);
  }
  std::vector<std::uint8_t> finish() {
    if (fill_ > 0) {
      cur_ = static_cast<std::uint8_t>(cur_ << (8 - fill_));
      flush_byte();
    }
    return std::move(out_);
  }

private:
  void flush_byte() {
    out_.push_back(cur_);
    cur_ = 0;
    fill_ = 0;
  }
  std::vector<std::uint8_t> out_;
  std::uint8_t cur_ = 0;
  int fill_ = 0;
};

class BitReader {
public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  bool get() {
    const std::size_t byte = pos_ >> 3;
    if (byte >= bytes_.size())
      fail(ErrorKind::Decode, "RLGR stream truncated at byte offset " + std::to_string(byte));
    const bool bit = ((bytes_[byte] >> (7 - (pos_ & 7))) & 1U) != 0;
    ++pos_;
    return bit;
  }
  std::uint64_t get_bits(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 1) | (get() ? 1U : 0U);
    return v;
  }
  std::size_t byte_offset() const { return pos_ >> 3; }

private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Adaptive Golomb-Rice parameter kr (state krp = kr << kFractionBits).
struct GolombRice {
  int state = kInitialState;
  int k() const { return state >> kFractionBits; }

  void adapt(std::uint64_t prefix) {
    if (prefix == 0) state = std::max(0, state - 2);
    else if (prefix > 1) state = static_cast<int>(std::min<std::uint64_t>(kMaxState, state + prefix));
  }

  void encode(BitWriter& out, std::uint64_t u) {
    const int kr = k();
    const std::uint64_t prefix = u >> kr;
    if (prefix < static_cast<std::uint64_t>(kEscapePrefix)) {
      out.put_ones(static_cast<int>(prefix));
      out.put(false);
      out.put_bits(u, kr);
    } else {
      out.put_ones(kEscapePrefix);
      const int width = std::bit_width(u);
      out.put_bits(static_cast<std::uint64_t>(width), 7);
      out.put_bits(u, width);
    }
    adapt(std::min<std::uint64_t>(prefix, kEscapePrefix));
  }

  std::uint64_t decode(BitReader& in) {
    const int kr = k();
    std::uint64_t prefix = 0;
    while (prefix < static_cast<std::uint64_t>(kEscapePrefix) && in.get()) ++prefix;
    std::uint64_t u;
    if (prefix < static_cast<std::uint64_t>(kEscapePrefix)) {
      u = (prefix << kr) | in.get_bits(kr);
    } else {
      const auto width = static_cast<int>(in.get_bits(7));
      if (width > 64) fail(ErrorKind::Decode, "RLGR escape width " + std::to_string(width) + " at byte offset " + std::to_string(in.byte_offset()));
      u = in.get_bits(width);
      if ((u >> kr) < static_cast<std::uint64_t>(kEscapePrefix))
        fail(ErrorKind::Decode, "RLGR non-canonical escape at byte offset " + std::to_string(in.byte_offset()));
    }
    adapt(std::min<std::uint64_t>(u >> kr, kEscapePrefix));
    return u;
  }
};

int clamp_state(int s) { return std::clamp(s, 0, kMaxRunState); }

}  // namespace

std::vector<std::uint8_t> encode(std::span<const std::int64_t> symbols) {
  BitWriter out;
  GolombRice gr;
  int kp = kInitialState;
  const std::size_t n = symbols.size();
  std::size_t i = 0;
  while (i < n) {
    const int k = kp >> kFractionBits;
    if (k == 0) {
      const std::int64_t v = symbols[i++];
      gr.encode(out, zigzag(v));
      kp = clamp_state(v == 0 ? kp + kZeroUp : kp - kNonzeroDown);
      continue;
    }
    const std::size_t run_max = std::size_t{1} << k;
    std::size_t zeros = 0;
    while (zeros < run_max && i + zeros < n && symbols[i + zeros] == 0) ++zeros;
    if (zeros == run_max) {
      out.put(false);
      i += run_max;
      kp = clamp_state(kp + kRunUp);
      continue;
    }
    out.put(true);
    out.put_bits(zeros, k);
    i += zeros;
    if (i == n) break;  // trailing partial run; the decoder knows the count
    const std::int64_t v = symbols[i++];
    out.put(v < 0);
    const std::uint64_t mag = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1 : static_cast<std::uint64_t>(v);
    gr.encode(out, mag - 1);
    kp = clamp_state(kp - kRunDown);
  }
  return out.finish();
}

std::vector<std::int64_t> decode(std::span<const std::uint8_t> bytes, std::size_t count) {
  BitReader in(bytes);
  GolombRice gr;
  int kp = kInitialState;
  std::vector<std::int64_t> out;
  out.reserve(count);
  while (out.size() < count) {
    const int k = kp >> kFractionBits;
    if (k == 0) {
      const std::int64_t v = unzigzag(gr.decode(in));
      out.push_back(v);
      kp = clamp_state(v == 0 ? kp + kZeroUp : kp - kNonzeroDown);
      continue;
    }
    const std::size_t run_max = std::size_t{1} << k;
    if (!in.get()) {
      if (out.size() + run_max > count)
        fail(ErrorKind::Decode, "RLGR run overflows the symbol count at byte offset " +
                                    std::to_string(in.byte_offset()));
      out.insert(out.end(), run_max, 0);
      kp = clamp_state(kp + kRunUp);
      continue;
    }
    const auto zeros = static_cast<std::size_t>(in.get_bits(k));
    if (out.size() + zeros > count)
      fail(ErrorKind::Decode, "RLGR run overflows the symbol count at byte offset " +
                                  std::to_string(in.byte_offset()));
    out.insert(out.end(), zeros, 0);
    if (out.size() == count) break;
    const bool negative = in.get();
    const std::uint64_t mag = gr.decode(in) + 1;
    if (mag == 0 || (negative && mag > (std::uint64_t{1} << 63)) || (!negative && mag > static_cast<std::uint64_t>(INT64_MAX)))
      fail(ErrorKind::Decode, "RLGR magnitude out of range at byte offset " + std::to_string(in.byte_offset()));
    out.push_back(negative ? static_cast<std::int64_t>(~(mag - 1)) : static_cast<std::int64_t>(mag));
    kp = clamp_state(kp - kRunDown);
  }
  return out;
}

}  // namespace rahtpc::rlgr
