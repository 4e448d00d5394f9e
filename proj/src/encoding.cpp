#include "bfl/encoding.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace bfl {

static_assert(std::endian::native == std::endian::little,
              "canonical encoding assumes a little-endian host");

Encoder& Encoder::u8(std::uint8_t v) {
  out_.push_back(v);
  return *this;
}

Encoder& Encoder::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Encoder& Encoder::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Encoder& Encoder::f64(double v) {
  if (!std::isfinite(v)) throw EncodingError("non-finite real in canonical encoding");
  return u64(std::bit_cast<std::uint64_t>(v));
}

Encoder& Encoder::f64s(std::span<const double> values) {
  u64(values.size());
  const std::size_t base = out_.size();
  out_.resize(base + 8 * values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) throw EncodingError("non-finite real in canonical encoding");
    std::memcpy(out_.data() + base + 8 * i, &values[i], 8);
  }
  return *this;
}

Encoder& Encoder::bytes(std::span<const std::uint8_t> b) {
  u64(b.size());
  return raw(b);
}

Encoder& Encoder::raw(std::span<const std::uint8_t> b) {
  out_.insert(out_.end(), b.begin(), b.end());
  return *this;
}

Encoder& Encoder::str(std::string_view s) {
  u64(s.size());
  out_.insert(out_.end(), s.begin(), s.end());
  return *this;
}

Encoder& Encoder::process(const ProcessId& id) {
  return u8(static_cast<std::uint8_t>(id.kind)).u32(id.index);
}

Encoder& Encoder::hash(const HashKey& h) { return raw(h.digest); }

Encoder& Encoder::signature(const Signature& s) {
  process(s.signer);
  return raw(s.bytes);
}

std::span<const std::uint8_t> Decoder::take(std::size_t n) {
  if (n > in_.size() - pos_) throw DecodeError("truncated encoding");
  auto out = in_.subspan(pos_, n);
  pos_ += n;
  return out;
}

void Decoder::expect_kind(ValueKind kind) {
  const auto tag = u8();
  if (tag != static_cast<std::uint8_t>(kind)) throw DecodeError("unexpected kind tag");
}

std::uint8_t Decoder::u8() { return take(1)[0]; }

std::uint32_t Decoder::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t Decoder::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double Decoder::f64() {
  const double v = std::bit_cast<double>(u64());
  if (!std::isfinite(v)) throw DecodeError("non-finite real in encoding");
  return v;
}

std::vector<double> Decoder::f64s() {
  const auto n = u64();
  if (n > (in_.size() - pos_) / 8) throw DecodeError("truncated real sequence");
  auto b = take(8 * n);
  std::vector<double> out(n);
  std::memcpy(out.data(), b.data(), 8 * n);
  for (double v : out) {
    if (!std::isfinite(v)) throw DecodeError("non-finite real in encoding");
  }
  return out;
}

Bytes Decoder::bytes() {
  const auto n = u64();
  auto b = take(n);
  return Bytes(b.begin(), b.end());
}

std::string Decoder::str() {
  const auto n = u64();
  auto b = take(n);
  return std::string(b.begin(), b.end());
}

ProcessId Decoder::process() {
  const auto kind = u8();
  if (kind > static_cast<std::uint8_t>(ProcessKind::Ledger)) throw DecodeError("bad process kind");
  const auto index = u32();
  return {static_cast<ProcessKind>(kind), index};
}

HashKey Decoder::hash() {
  HashKey h;
  auto b = take(32);
  std::copy(b.begin(), b.end(), h.digest.begin());
  return h;
}

Signature Decoder::signature() {
  Signature s;
  s.signer = process();
  auto b = take(64);
  std::copy(b.begin(), b.end(), s.bytes.begin());
  return s;
}

void Decoder::expect_done() const {
  if (!done()) throw DecodeError("trailing bytes after encoding");
}

}  // namespace bfl
