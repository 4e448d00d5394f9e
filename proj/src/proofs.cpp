#include "bfl/proofs.hpp"

#include <algorithm>

#include "bfl/encoding.hpp"

namespace bfl {

std::string_view tag_name(Tag tag) {
  switch (tag) {
    case Tag::Upd: return "UPD";
    case Tag::Mod: return "MOD";
    case Tag::Clients: return "CLIENTS";
    case Tag::Reward: return "REWARD";
  }
  return "?";
}

namespace {

void encode_slot(Encoder& enc, const VoteSlot& slot) {
  enc.u8(static_cast<std::uint8_t>(slot.tag)).hash(slot.hash_key).u64(slot.task.value).u32(slot.round);
}

VoteSlot decode_slot(Decoder& dec) {
  VoteSlot slot;
  const auto tag = dec.u8();
  if (tag > static_cast<std::uint8_t>(Tag::Reward)) throw DecodeError("bad tag");
  slot.tag = static_cast<Tag>(tag);
  slot.hash_key = dec.hash();
  slot.task.value = dec.u64();
  slot.round = dec.u32();
  return slot;
}

}  // namespace

HashKey vote_digest(const VoteSlot& slot) {
  Encoder enc(ValueKind::VoteStatement);
  encode_slot(enc, slot);
  return sha256(enc.data());
}

void encode_poai(Encoder& enc, const PoAI& p) {
  encode_slot(enc, p.slot);
  enc.u64(p.votes.size());
  for (const auto& v : p.votes) {
    encode_slot(enc, v.slot);
    enc.signature(v.signature);
  }
}

PoAI decode_poai(Decoder& dec) {
  PoAI p;
  p.slot = decode_slot(dec);
  const auto n = dec.u64();
  if (n > 4096) throw DecodeError("implausible vote count");
  for (std::uint64_t i = 0; i < n; ++i) {
    LocalProof v;
    v.slot = decode_slot(dec);
    v.signature = dec.signature();
    p.votes.push_back(v);
  }
  return p;
}

Bytes canonical_encode(const PoAI& p) {
  Encoder enc(ValueKind::PoAI);
  encode_poai(enc, p);
  return std::move(enc).take();
}

std::string render(const PoAI& p) {
  std::string out{tag_name(p.slot.tag)};
  out += ' ';
  out += p.slot.hash_key.hex();
  out += " [";
  for (std::size_t i = 0; i < p.votes.size(); ++i) {
    if (i) out += ',';
    out += to_string(p.votes[i].signature.signer);
  }
  out += ']';
  return out;
}

LocalProof make_local_proof(const SigningKey& server_key, Tag tag, const HashKey& hash_key,
                            TaskId task, std::uint32_t round) {
  LocalProof vote;
  vote.slot = VoteSlot{tag, hash_key, task, round};
  vote.signature = server_key.sign(vote_digest(vote.slot));
  return vote;
}

bool verify_local_proof(const KeyRegistry& registry, const LocalProof& vote) {
  if (vote.signature.signer.kind != ProcessKind::Server) return false;
  return verify(registry, vote.signature, vote_digest(vote.slot));
}

bool verify_poai(const PoAI& p, const KeyRegistry& registry, std::uint32_t f_s) {
  if (p.votes.size() != static_cast<std::size_t>(f_s) + 1) return false;
  std::set<ProcessId> signers;
  for (const auto& v : p.votes) {
    if (v.slot != p.slot) return false;
    if (!signers.insert(v.signature.signer).second) return false;
    if (!verify_local_proof(registry, v)) return false;
  }
  return true;
}

std::optional<PoAI> VoteAccumulator::accumulate(const LocalProof& vote) {
  if (!verify_local_proof(*registry_, vote)) {
    ++dropped_invalid_;
    return std::nullopt;
  }
  auto& entry = slots_[vote.slot];
  if (!entry.by_signer.emplace(vote.signature.signer.index, vote).second) {
    ++dropped_duplicate_;
    return std::nullopt;
  }
  if (entry.emitted) {
    ++absorbed_late_;
    return std::nullopt;
  }
  if (entry.by_signer.size() < static_cast<std::size_t>(f_s_) + 1) return std::nullopt;
  entry.emitted = true;
  PoAI p;
  p.slot = vote.slot;
  // std::map iterates signers in index order.
  for (const auto& [index, v] : entry.by_signer) {
    if (p.votes.size() == static_cast<std::size_t>(f_s_) + 1) break;
    p.votes.push_back(v);
  }
  return p;
}

bool VoteAccumulator::emitted(const VoteSlot& slot) const {
  auto it = slots_.find(slot);
  return it != slots_.end() && it->second.emitted;
}

std::size_t VoteAccumulator::distinct_signers(const VoteSlot& slot) const {
  auto it = slots_.find(slot);
  return it == slots_.end() ? 0 : it->second.by_signer.size();
}

}  // namespace bfl
