#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace hrlsched {

using Rng = std::mt19937_64;

/// Independent stream `id` of a run seed.
Rng seeded_rng(std::uint64_t seed, std::uint64_t id);
using Bits = std::int64_t;
using Slot = std::int64_t;

struct Packet {
  Slot arrival_slot = 0;
  Bits original_bits = 0;   // Q-bar
  Bits remaining_bits = 0;  // Q

  friend bool operator==(const Packet&, const Packet&) = default;
};

/// FCFS queue of one user with a hard deadline of `deadline` slots.
struct UserQueue {
  std::size_t user = 0;
  int deadline = 1;
  std::deque<Packet> packets;  // oldest first

  Bits backlog_bits() const;
};

/// A delivered packet together with the audit quantity B(Pa) + Q that was
/// compared against the slot budget.
struct Delivery {
  std::size_t user = 0;
  Packet packet;
  Bits backlog_plus_remaining = 0;
  Bits budget = 0;
};

struct Drop {
  std::size_t user = 0;
  Packet packet;
};

struct SlotOutcome {
  std::vector<Delivery> delivered;
  std::vector<Drop> dropped;
  std::vector<Bits> bits_served;  // per user, bits actually taken from packets
};

/// Draws a packet size in Kbit.
using SizeSampler = std::function<std::int64_t(Rng&)>;

/// Poisson(mean_kbit) sizes with zero draws rejected.
SizeSampler poisson_kbit(double mean_kbit);

/// With probability `arrival_prob` appends one packet stamped with `slot`.
/// Returns true if a packet arrived.
bool arrive(UserQueue& queue, Slot slot, Rng& rng, double arrival_prob, const SizeSampler& size_kbit);

struct ServeResult {
  std::vector<Delivery> delivered;
  Bits bits_transmitted = 0;
};

/// Head-first service with `budget_bits`: a packet is delivered iff the
/// backlog ahead of it plus its remaining bits fit in the budget; the first
/// packet that does not fit absorbs the leftover budget.
ServeResult serve_fcfs(UserQueue& queue, Bits budget_bits);

/// Removes packets that arrived at or before `slot - deadline`; they are
/// returned as dropped with whatever remaining bits they had.
std::vector<Drop> expire(UserQueue& queue, Slot slot);

/// (1/tau) * sum of original sizes of delivered packets.
double hlc_et_reward(const SlotOutcome& outcome, double tau);

/// Fixed-length sum(D_i) layout: user-major, then by age with the oldest
/// admissible arrival slot (slot - D_i + 1) first. Empty positions are zero.
struct QueueVectors {
  std::vector<Bits> remaining;  // Q(l)
  std::vector<Bits> original;   // Q-bar(l)
};

QueueVectors queue_state_vectors(std::span<const UserQueue> queues, Slot slot);

/// Inverse of queue_state_vectors for a given deadline profile.
std::vector<UserQueue> decode_queue_vectors(const QueueVectors& vectors, std::span<const int> deadlines,
                                            Slot slot);

}  // namespace hrlsched
