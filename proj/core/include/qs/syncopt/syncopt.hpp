#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qs::opt {

/// A function-local handler variable.
using Var = std::string;
using SyncSet = std::set<Var>;

struct Instr {
  enum class Kind { kSync, kAsync, kCall, kPure };
  Kind kind = Kind::kPure;
  Var var;                // sync / async
  bool readonly = false;  // call
  bool readnone = false;  // call

  static Instr sync(Var v) { return {Kind::kSync, std::move(v)}; }
  static Instr async(Var v) { return {Kind::kAsync, std::move(v)}; }
  static Instr call(bool readonly = false, bool readnone = false) {
    return {Kind::kCall, {}, readonly, readnone};
  }
  static Instr pure() { return {}; }

  bool operator==(const Instr&) const = default;
};

struct BasicBlock {
  std::string id;
  std::vector<Instr> instrs;
  std::vector<std::string> succs;

  bool operator==(const BasicBlock&) const = default;
};

struct IrFunction {
  std::string name;
  std::vector<BasicBlock> blocks;  // blocks[0] is the entry
  std::set<std::pair<Var, Var>> distinct;  // ordered pairs (a < b)

  /// Block index for `id`; throws MalformedCfg when absent.
  std::size_t index(std::string_view id) const;
  std::vector<std::vector<std::size_t>> predecessors() const;
  std::vector<std::vector<std::size_t>> successors() const;
  /// Every handler variable mentioned by an instruction or declaration.
  SyncSet variables() const;

  bool operator==(const IrFunction&) const = default;
};

class MalformedCfg : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// May-alias relation. Two variables alias unless declared distinct.
class AliasInfo {
 public:
  AliasInfo() = default;
  explicit AliasInfo(std::set<std::pair<Var, Var>> distinct);
  static AliasInfo of(const IrFunction& f) { return AliasInfo(f.distinct); }

  void declare_distinct(const Var& a, const Var& b);
  bool may_alias(const Var& a, const Var& b) const;
  const std::set<std::pair<Var, Var>>& distinct() const noexcept { return distinct_; }

 private:
  std::set<std::pair<Var, Var>> distinct_;
};

/// Parses the textual IR. Throws qs::ParseError with line and column.
IrFunction parse_ir(std::string_view text);
std::string print_ir(const IrFunction& f);

/// Transfer function of one block.
SyncSet update_sync(const BasicBlock& b, SyncSet incoming, const AliasInfo& alias);

/// Out-sets indexed like IrFunction::blocks.
using SyncSets = std::vector<SyncSet>;

/// Worklist fixpoint. Every set starts at the universe of the function's
/// variables; the entry's input is empty. `pick_seed` randomizes which
/// changed block is processed next (the result must not depend on it).
SyncSets compute_sync_sets(const IrFunction& f, const AliasInfo& alias,
                           std::optional<std::uint64_t> pick_seed = std::nullopt);

/// Intersection of the predecessors' out-sets; empty for the entry.
SyncSet in_set(const IrFunction& f, const SyncSets& sets, std::size_t block);

struct Removal {
  IrFunction rewritten;
  std::size_t removed = 0;
};

Removal remove_redundant_syncs(const IrFunction& f, const SyncSets& sets,
                               const AliasInfo& alias);

/// Concrete run of a function along a seeded path. Variables are bound to
/// concrete handlers; each executed sync is one round trip.
struct Execution {
  std::uint64_t roundtrips = 0;
  /// Synced concrete handlers before every opaque call and at exit.
  std::vector<std::set<int>> observations;
  bool truncated = false;  // step budget ran out inside a loop
};

Execution interpret(const IrFunction& f, const std::map<Var, int>& binding,
                    std::uint64_t path_seed, std::size_t max_blocks = 256);

/// A binding of variables to handlers that respects the distinct pairs.
std::map<Var, int> random_binding(const IrFunction& f, std::uint64_t seed);

/// A small well-formed function: up to 6 blocks, variables a..d, random
/// successors (never back to the entry) and distinct declarations.
IrFunction random_function(std::uint64_t seed);

}  // namespace qs::opt
