#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "qs/runtime/runtime.hpp"

namespace qs::bench {

// Coordination workloads. Each worker is a handler with its own Client; the
// calling thread only starts them and waits.

std::uint64_t mutex(Runtime& rt, unsigned n, unsigned m);

struct ProdConsResult {
  std::vector<std::uint64_t> histogram;  // histogram[v] = times value v was consumed, v in 1..m
  std::uint64_t count = 0;
  std::uint64_t sum = 0;
  std::uint64_t empty_polls = 0;
};
ProdConsResult prodcons(Runtime& rt, unsigned n, unsigned m);

std::uint64_t condition(Runtime& rt, unsigned n, unsigned m);

/// Worker id (1-based) holding the token after nt passes; the token starts at 1.
unsigned threadring(Runtime& rt, unsigned ring, std::uint64_t nt);
unsigned threadring_oracle(unsigned ring, std::uint64_t nt);

enum class Colour : std::uint8_t { kBlue = 0, kRed = 1, kYellow = 2 };
Colour complement(Colour a, Colour b) noexcept;
std::string_view to_string(Colour c) noexcept;

struct ChameneosResult {
  std::vector<std::uint64_t> meetings;  // per creature
  std::vector<Colour> colours;          // final colours
  std::uint64_t self_meetings = 0;
  std::uint64_t tally() const noexcept;
};
ChameneosResult chameneos(Runtime& rt, std::uint64_t nc, const std::vector<Colour>& initial);

struct QueryLoopResult {
  std::uint64_t queries = 0;
  std::int64_t sum = 0;  // sum of every queried value
};
/// One async call followed by nq queries in a single block on one handler.
QueryLoopResult queryloop(Runtime& rt, std::uint64_t nq);

}  // namespace qs::bench
