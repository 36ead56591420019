#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qs/semantics/program.hpp"

namespace qs::sem {

enum class Rule : std::uint8_t {
  kSeparate,
  kCall,
  kQuery,
  kSync,
  kRun,
  kEnd,
  kSeq,
  kSeqSkip,
  kParStep,
  kOneStep,
  kManyStep,
  kExec,  // internal: a logged action runs and emits its event
};

inline constexpr Rule kAllRules[] = {Rule::kSeparate, Rule::kCall,    Rule::kQuery,
                                     Rule::kSync,     Rule::kRun,     Rule::kEnd,
                                     Rule::kSeq,      Rule::kSeqSkip, Rule::kParStep,
                                     Rule::kOneStep,  Rule::kManyStep, Rule::kExec};

std::string_view to_string(Rule r) noexcept;

enum class QueryMode {
  kOriginal,    // f and `release h` are logged; f runs on the handler
  kClientSide,  // only `release h` is logged; f runs on the client after sync
};

struct Transition {
  Rule rule;
  HandlerId actor;     // triple whose program holds the redex
  bool nested = false;  // redex sits inside a sequence (rule seq)
  bool parallel = false;  // other triples are untouched (rule parStep)
  std::optional<Event> event;
  Configuration next;
};

class MalformedConfiguration : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class LimitExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every configuration reachable in one step.
std::vector<Transition> step(const Configuration& c, const Program& p,
                             QueryMode mode = QueryMode::kOriginal);

/// Identical for configurations that differ only in triple order.
std::string canonical_key(const Configuration& c);

/// No triple has work left: all programs are skip and all queues empty.
bool all_skip(const Configuration& c);

enum class Terminal : std::uint8_t { kAllSkip, kStuck };

struct Trace {
  std::vector<Event> events;
  Terminal end = Terminal::kAllSkip;

  auto operator<=>(const Trace&) const = default;
};

struct Limits {
  std::size_t max_states = 2'000'000;
  std::size_t max_depth = 100'000;
};

struct ExploreResult {
  std::set<Trace> traces;
  std::vector<Configuration> stuck;
  std::size_t states_visited = 0;
  std::map<Rule, std::size_t> rule_counts;
};

/// Exhaustive closure of the step relation from `init`, memoized on
/// canonical keys. Throws LimitExceeded.
ExploreResult explore(const Configuration& init, const Program& p, Limits limits = {},
                      QueryMode mode = QueryMode::kOriginal);

/// Action names executed on `h`, one sequence per distinct trace projection.
std::set<std::vector<std::string>> handler_orders(const std::set<Trace>& traces,
                                                  const Program& p, HandlerId h);

/// Joint projection: for each trace, the per-handler event subsequences
/// (events only, values kept) in Program::handlers() order.
using Projection = std::vector<std::vector<Event>>;
std::set<Projection> handler_projections(const std::set<Trace>& traces, const Program& p);

struct Violation {
  enum class Kind { kOrder, kContiguity, kAgreement };
  Kind kind;
  Trace trace;
  std::string message;
};

struct GuaranteeReport {
  std::size_t traces_checked = 0;
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
};

/// Per-session order, session contiguity on every handler, and agreement of
/// `invariant agree` registers read within one multi-handler session.
GuaranteeReport check_guarantees(const std::set<Trace>& traces, const Program& p,
                                 std::size_t max_violations = 16);

}  // namespace qs::sem
