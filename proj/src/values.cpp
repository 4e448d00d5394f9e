#include "bfl/values.hpp"

#include <algorithm>

#include "bfl/encoding.hpp"

namespace bfl {

namespace {

void encode_update_body(Encoder& enc, const Update& v) {
  enc.process(v.client).u64(v.task.value).u32(v.round).u64(v.declared_n).f64s(v.vector.values());
}

}  // namespace

bool ClientSet::contains(const ProcessId& id) const {
  return std::find(members.begin(), members.end(), id) != members.end();
}

std::uint64_t RewardInfo::total() const {
  std::uint64_t sum = 0;
  for (const auto& [client, count] : counts) sum += count;
  return sum;
}

Bytes canonical_encode(const ClientSet& v) {
  Encoder enc(ValueKind::ClientSet);
  enc.u64(v.task.value).u32(v.round).u64(v.members.size());
  for (const auto& m : v.members) enc.process(m);
  return std::move(enc).take();
}

Bytes canonical_encode(const Update& v) {
  Encoder enc(ValueKind::Update);
  encode_update_body(enc, v);
  enc.signature(v.signature);
  return std::move(enc).take();
}

Bytes canonical_encode(const RewardInfo& v) {
  Encoder enc(ValueKind::RewardInfo);
  enc.u64(v.task.value).u64(v.counts.size());
  for (const auto& [client, count] : v.counts) enc.process(client).u32(count);
  return std::move(enc).take();
}

ClientSet decode_client_set(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::ClientSet);
  ClientSet v;
  v.task.value = dec.u64();
  v.round = dec.u32();
  const auto n = dec.u64();
  if (n > bytes.size()) throw DecodeError("client set length exceeds input");
  for (std::uint64_t i = 0; i < n; ++i) v.members.push_back(dec.process());
  dec.expect_done();
  return v;
}

Update decode_update(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::Update);
  Update v;
  v.client = dec.process();
  v.task.value = dec.u64();
  v.round = dec.u32();
  v.declared_n = dec.u64();
  v.vector = ParamVector(dec.f64s());
  v.signature = dec.signature();
  dec.expect_done();
  return v;
}

RewardInfo decode_reward_info(std::span<const std::uint8_t> bytes) {
  Decoder dec(bytes);
  dec.expect_kind(ValueKind::RewardInfo);
  RewardInfo v;
  v.task.value = dec.u64();
  const auto n = dec.u64();
  if (n > bytes.size()) throw DecodeError("reward info length exceeds input");
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto client = dec.process();
    v.counts[client] = dec.u32();
  }
  if (v.counts.size() != n) throw DecodeError("duplicate client in reward info");
  dec.expect_done();
  return v;
}

HashKey hash_value(const ClientSet& v) { return sha256(canonical_encode(v)); }
HashKey hash_value(const Update& v) { return sha256(canonical_encode(v)); }
HashKey hash_value(const RewardInfo& v) { return sha256(canonical_encode(v)); }

HashKey update_signing_digest(const Update& v) {
  Encoder enc(ValueKind::Update);
  encode_update_body(enc, v);
  return sha256(enc.data());
}

Update make_signed_update(const SigningKey& key, TaskId task, std::uint32_t round,
                          ParamVector vector, std::uint64_t declared_n) {
  Update u;
  u.client = key.owner();
  u.task = task;
  u.round = round;
  u.vector = std::move(vector);
  u.declared_n = declared_n;
  u.signature = key.sign(update_signing_digest(u));
  return u;
}

bool verify_update(const KeyRegistry& registry, const Update& v) {
  if (v.signature.signer != v.client) return false;
  return verify(registry, v.signature, update_signing_digest(v));
}

std::map<ProcessId, double> raw_count_payout(const RewardInfo& info) {
  std::map<ProcessId, double> out;
  for (const auto& [client, count] : info.counts) out[client] = static_cast<double>(count);
  return out;
}

}  // namespace bfl
