#include "bfl/ledger_actor.hpp"

#include "bfl/storage.hpp"

namespace bfl {

LedgerActor::LedgerActor(Simulator* sim, const KeyRegistry* registry, std::uint32_t f_s,
                         DelayDist interval, std::uint64_t seed)
    : sim_(sim), state_(registry, f_s), interval_(interval), rng_(Rng::stream(seed, "ledger")) {}

void LedgerActor::on_message(const ProcessId& from, const Message& msg) {
  if (const auto* s = std::get_if<SubmitTxMsg>(&msg)) {
    if (!s->tx) return;
    // An identical transaction already waiting adds nothing.
    if (!pooled_digests_.insert(tx_digest(*s->tx)).second) return;
    pool_.emplace(PoolKey{s->submitted_at, from, next_seq_++}, s->tx);
    if (!cut_scheduled_) {
      cut_scheduled_ = true;
      sim_->set_timer(ProcessId::ledger(), interval_.sample(rng_), TimerMsg{kTimerBlockCut, 0});
    }
  } else if (const auto* t = std::get_if<TimerMsg>(&msg); t && t->kind == kTimerBlockCut) {
    cut_scheduled_ = false;
    cut_block();
  }
}

void LedgerActor::cut_block() {
  if (pool_.empty()) return;
  auto block = std::make_shared<Block>();
  block->height = state_.height();
  block->prev_hash = state_.tip_hash();
  block->time_ns = sim_->now();
  for (const auto& [key, tx] : pool_) {
    auto verdict = state_.append_tx(*tx);
    if (!verdict) {
      rejected_.push_back(RejectedTx{block->height, tx->kind(), tx->sender, verdict.reason});
      sim_->metrics().count("ledger_rejections");
      continue;
    }
    block->txs.push_back(*tx);
    block->tx_digests.push_back(tx_digest(*tx));
  }
  pool_.clear();
  pooled_digests_.clear();
  // A block in which nothing survived is not produced.
  if (block->txs.empty()) return;
  block->hash = compute_block_hash(block->height, block->prev_hash, block->tx_digests);
  state_.seal_block(block->hash);
  BlockPtr sealed = block;
  blocks_.push_back(sealed);
  sim_->metrics().count("blocks");
  for (const auto& sub : subscribers_) sim_->send(ProcessId::ledger(), sub, BlockMsg{sealed});
}

}  // namespace bfl
