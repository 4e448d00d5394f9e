#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "bfl/aggregation.hpp"
#include "bfl/core.hpp"
#include "bfl/encoding.hpp"
#include "bfl/rng.hpp"
#include "bfl/values.hpp"

using namespace bfl;

namespace {

HashKey digest_of_text(std::string_view s) {
  return sha256(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

KeyRegistry small_registry() { return KeyRegistry::derive(42, Population{2, 3, 2}); }

}  // namespace

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(digest_of_text("").hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(digest_of_text("abc").hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(HashKey, HexRoundTrip) {
  const HashKey h = digest_of_text("round trip");
  EXPECT_EQ(HashKey::from_hex(h.hex()), h);
  EXPECT_THROW(HashKey::from_hex("zz"), std::invalid_argument);
}

TEST(ProcessId, TextRoundTrip) {
  for (const auto& id : {ProcessId::client(7), ProcessId::server(0), ProcessId::replica(3), ProcessId::owner()}) {
    EXPECT_EQ(parse_process_id(to_string(id)), id);
  }
  EXPECT_EQ(to_string(ProcessId::server(3)), "server:3");
  EXPECT_THROW(parse_process_id("server"), std::invalid_argument);
  EXPECT_THROW(parse_process_id("wizard:1"), std::invalid_argument);
  EXPECT_THROW(parse_process_id("client:-1"), std::invalid_argument);
}

TEST(Encoding, Deterministic) {
  const ParamVector v{1.0, -2.5, 3e-300};
  EXPECT_EQ(canonical_encode(v), canonical_encode(v));
}

TEST(Encoding, Injective) {
  EXPECT_NE(canonical_encode(ParamVector{1.0}), canonical_encode(ParamVector{2.0}));
  EXPECT_NE(canonical_encode(ParamVector{1.0}), canonical_encode(ParamVector{1.0, 0.0}));
  EXPECT_NE(canonical_encode(ParamVector{0.0}), canonical_encode(ParamVector{-0.0}));
}

TEST(Encoding, RejectsNonFinite) {
  EXPECT_THROW(canonical_encode(ParamVector{std::nan("")}), EncodingError);
  EXPECT_THROW(canonical_encode(ParamVector{std::numeric_limits<double>::infinity()}), EncodingError);
}

TEST(Encoding, LittleEndianLayout) {
  Encoder enc(ValueKind::Digest);
  enc.u32(0x01020304).u64(5);
  const Bytes expected{0x0a, 0x04, 0x03, 0x02, 0x01, 5, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(enc.data(), expected);
}

TEST(Encoding, ParamVectorRoundTrip) {
  const ParamVector v{0.1, -7.0, 1e308};
  EXPECT_EQ(decode_param_vector(canonical_encode(v)), v);
}

TEST(Encoding, DecodeRejectsTruncatedAndTrailing) {
  Bytes b = canonical_encode(ParamVector{1.0, 2.0});
  Bytes truncated(b.begin(), b.end() - 1);
  EXPECT_THROW(decode_param_vector(truncated), DecodeError);
  b.push_back(0);
  EXPECT_THROW(decode_param_vector(b), DecodeError);
  Bytes wrong_kind = canonical_encode(ParamVector{1.0});
  wrong_kind[0] = static_cast<std::uint8_t>(ValueKind::Update);
  EXPECT_THROW(decode_param_vector(wrong_kind), DecodeError);
}

TEST(HashValue, DistinctValuesDistinctKeys) {
  std::set<HashKey> keys;
  for (int i = 0; i < 1000; ++i) keys.insert(hash_value(ParamVector{static_cast<double>(i)}));
  EXPECT_EQ(keys.size(), 1000u);
  EXPECT_EQ(hash_value(ParamVector{1.0}), hash_value(ParamVector{1.0}));
}

TEST(HashValue, MatchesStoreKeyAfterRoundTrip) {
  const ParamVector v{3.0, 4.0};
  const Bytes wire = canonical_encode(v);
  EXPECT_EQ(sha256(canonical_encode(decode_param_vector(wire))), hash_value(v));
}

TEST(Signature, VerifiesOnlyOwnDigest) {
  const auto reg = small_registry();
  const auto s1 = ProcessId::server(1);
  const HashKey d = digest_of_text("d");
  const HashKey d2 = digest_of_text("d'");
  const Signature sig = sign(reg, s1, d);
  EXPECT_TRUE(verify(reg, sig, d));
  EXPECT_FALSE(verify(reg, sig, d2));
}

TEST(Signature, RewrittenSignerFails) {
  const auto reg = small_registry();
  const HashKey d = digest_of_text("d");
  Signature sig = sign(reg, ProcessId::server(1), d);
  sig.signer = ProcessId::server(2);
  EXPECT_FALSE(verify(reg, sig, d));
  sig.signer = ProcessId::server(9);
  EXPECT_FALSE(verify(reg, sig, d));
}

TEST(Signature, DeterministicAcrossDerivations) {
  const HashKey d = digest_of_text("same");
  const auto a = KeyRegistry::derive(5, Population{1, 1, 1});
  const auto b = KeyRegistry::derive(5, Population{1, 1, 1});
  const auto c = KeyRegistry::derive(6, Population{1, 1, 1});
  EXPECT_EQ(sign(a, ProcessId::server(0), d), sign(b, ProcessId::server(0), d));
  EXPECT_NE(a.public_key(ProcessId::server(0)), c.public_key(ProcessId::server(0)));
  EXPECT_TRUE(a.contains(ProcessId::owner()));
  EXPECT_FALSE(a.contains(ProcessId::ledger()));
}

TEST(Rng, StreamsAreIndependentAndRepeatable) {
  Rng a = Rng::stream(1, "x", 2, 3);
  Rng b = Rng::stream(1, "x", 2, 3);
  Rng c = Rng::stream(1, "x", 2, 4);
  const auto va = a.next_u64();
  EXPECT_EQ(va, b.next_u64());
  EXPECT_NE(va, c.next_u64());
}

TEST(Rng, BelowStaysInRange) {
  Rng r(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[r.below(7)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}
