#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "bfl/core.hpp"

namespace bfl {

// One-byte kind tag that prefixes every canonical encoding.
enum class ValueKind : std::uint8_t {
  ParamVector = 0x01,
  Update = 0x02,
  ClientSet = 0x03,
  RewardInfo = 0x04,
  Transaction = 0x05,
  VoteStatement = 0x06,
  StoreMsg = 0x07,
  PoAI = 0x08,
  BlockHeader = 0x09,
  Digest = 0x0a,
};

/// Little-endian, length-prefixed byte writer. Reals are IEEE-754 binary64
/// and must be finite.
class Encoder {
 public:
  explicit Encoder(ValueKind kind) { u8(static_cast<std::uint8_t>(kind)); }
  Encoder() = default;

  Encoder& u8(std::uint8_t v);
  Encoder& u32(std::uint32_t v);
  Encoder& u64(std::uint64_t v);
  Encoder& i64(std::int64_t v) { return u64(static_cast<std::uint64_t>(v)); }
  Encoder& f64(double v);
  Encoder& f64s(std::span<const double> values);
  Encoder& bytes(std::span<const std::uint8_t> b);
  Encoder& raw(std::span<const std::uint8_t> b);
  Encoder& str(std::string_view s);
  Encoder& process(const ProcessId& id);
  Encoder& hash(const HashKey& h);
  Encoder& signature(const Signature& s);

  const Bytes& data() const& { return out_; }
  Bytes take() && { return std::move(out_); }

 private:
  Bytes out_;
};

class Decoder {
 public:
  explicit Decoder(std::span<const std::uint8_t> in) : in_(in) {}

  /// Consumes the kind tag and throws DecodeError if it differs.
  void expect_kind(ValueKind kind);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::vector<double> f64s();
  Bytes bytes();
  std::string str();
  ProcessId process();
  HashKey hash();
  Signature signature();

  bool done() const { return pos_ == in_.size(); }
  void expect_done() const;

 private:
  std::span<const std::uint8_t> take(std::size_t n);

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

/// Digest of an arbitrary canonical encoding.
inline HashKey digest_of(const Bytes& encoding) { return sha256(encoding); }

}  // namespace bfl
