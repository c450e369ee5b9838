#include "hrlsched/traffic_queue.hpp"

#include <stdexcept>

namespace hrlsched {

Rng seeded_rng(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), 0x9e3779b9u};
  return Rng(seq);
}

Bits UserQueue::backlog_bits() const {
  Bits total = 0;
  for (const auto& p : packets) total += p.remaining_bits;
  return total;
}

SizeSampler poisson_kbit(double mean_kbit) {
  if (!(mean_kbit > 0.0)) throw std::invalid_argument("poisson_kbit: mean must be positive");
  return [dist = std::poisson_distribution<std::int64_t>(mean_kbit)](Rng& rng) mutable {
    std::int64_t k = 0;
    while (k == 0) k = dist(rng);
    return k;
  };
}

bool arrive(UserQueue& queue, Slot slot, Rng& rng, double arrival_prob, const SizeSampler& size_kbit) {
  if (arrival_prob <= 0.0) return false;
  std::bernoulli_distribution coin(std::min(arrival_prob, 1.0));
  if (!coin(rng)) return false;
  const Bits bits = size_kbit(rng) * 1000;
  if (bits <= 0) throw std::logic_error("arrive: packet size must be positive");
  if (!queue.packets.empty() && queue.packets.back().arrival_slot >= slot)
    throw std::logic_error("arrive: at most one arrival per user per slot");
  queue.packets.push_back({slot, bits, bits});
  return true;
}

ServeResult serve_fcfs(UserQueue& queue, Bits budget_bits) {
  if (budget_bits < 0) throw std::invalid_argument("serve_fcfs: negative budget");
  ServeResult result;
  Bits consumed = 0;  // B(Pa) for the current head, measured against the slot budget
  while (!queue.packets.empty()) {
    Packet& head = queue.packets.front();
    if (consumed + head.remaining_bits <= budget_bits) {
      const Bits cumulative = consumed + head.remaining_bits;
      consumed = cumulative;
      result.delivered.push_back({queue.user, head, cumulative, budget_bits});
      result.delivered.back().packet.remaining_bits = 0;
      queue.packets.pop_front();
    } else {
      head.remaining_bits -= budget_bits - consumed;
      consumed = budget_bits;
      break;
    }
  }
  result.bits_transmitted = consumed;
  return result;
}

std::vector<Drop> expire(UserQueue& queue, Slot slot) {
  std::vector<Drop> dropped;
  while (!queue.packets.empty() && queue.packets.front().arrival_slot <= slot - queue.deadline) {
    dropped.push_back({queue.user, queue.packets.front()});
    queue.packets.pop_front();
  }
  return dropped;
}

double hlc_et_reward(const SlotOutcome& outcome, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("hlc_et_reward: tau must be positive");
  Bits total = 0;
  for (const auto& d : outcome.delivered) total += d.packet.original_bits;
  return static_cast<double>(total) / tau;
}

QueueVectors queue_state_vectors(std::span<const UserQueue> queues, Slot slot) {
  std::size_t len = 0;
  for (const auto& q : queues) len += static_cast<std::size_t>(q.deadline);
  QueueVectors out{std::vector<Bits>(len, 0), std::vector<Bits>(len, 0)};
  std::size_t offset = 0;
  for (const auto& q : queues) {
    const Slot oldest = slot - q.deadline + 1;
    for (const auto& p : q.packets) {
      const Slot pos = p.arrival_slot - oldest;
      if (pos < 0 || pos >= q.deadline)
        throw std::logic_error("queue_state_vectors: packet outside the deadline window");
      out.remaining[offset + static_cast<std::size_t>(pos)] = p.remaining_bits;
      out.original[offset + static_cast<std::size_t>(pos)] = p.original_bits;
    }
    offset += static_cast<std::size_t>(q.deadline);
  }
  return out;
}

std::vector<UserQueue> decode_queue_vectors(const QueueVectors& vectors, std::span<const int> deadlines,
                                            Slot slot) {
  std::vector<UserQueue> queues;
  std::size_t offset = 0;
  for (std::size_t u = 0; u < deadlines.size(); ++u) {
    UserQueue q{u, deadlines[u], {}};
    const Slot oldest = slot - deadlines[u] + 1;
    for (int j = 0; j < deadlines[u]; ++j) {
      const std::size_t idx = offset + static_cast<std::size_t>(j);
      if (idx >= vectors.original.size()) throw std::invalid_argument("decode_queue_vectors: short vector");
      if (vectors.original[idx] > 0)
        q.packets.push_back({oldest + j, vectors.original[idx], vectors.remaining[idx]});
    }
    offset += static_cast<std::size_t>(deadlines[u]);
    queues.push_back(std::move(q));
  }
  return queues;
}

}  // namespace hrlsched
