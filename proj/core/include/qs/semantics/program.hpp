#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qs::sem {

/// Index of a handler (or client) in Program::names.
using HandlerId = int;

/// Action id used for the `end` request appended by a separate block.
inline constexpr int kEndAction = -1;

enum class StmtKind : std::uint8_t {
  kSkip,
  kSeparate,
  kCall,
  kQuery,
  kWait,
  kRelease,
  kEnd,
  kSeq,
  kExec,  // a logged action being executed; produces the observable event
};

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

/// Immutable statement node; configurations share subtrees freely.
struct Stmt {
  StmtKind kind = StmtKind::kSkip;
  std::vector<HandlerId> targets;  // kSeparate
  HandlerId handler = -1;          // target of call/query/wait/exec, client of release
  int action = kEndAction;         // call/query/exec
  HandlerId client = -1;           // exec: client that logged it
  std::uint32_t session = 0;       // exec: client-local block number
  StmtPtr first;                   // separate body, seq head
  StmtPtr second;                  // seq tail
};

StmtPtr make_skip();
StmtPtr make_separate(std::vector<HandlerId> targets, StmtPtr body);
StmtPtr make_call(HandlerId target, int action);
StmtPtr make_query(HandlerId target, int action);
StmtPtr make_wait(HandlerId target);
StmtPtr make_release(HandlerId client);
StmtPtr make_end();
StmtPtr make_seq(StmtPtr a, StmtPtr b);
StmtPtr make_exec(HandlerId target, int action, HandlerId client, std::uint32_t session);
/// Right-nested sequence; skip when empty.
StmtPtr make_block(const std::vector<StmtPtr>& stmts);

struct Effect {
  enum class Kind : std::uint8_t { kNone, kSet, kGet };
  Kind kind = Kind::kNone;
  int reg = -1;  // index into the target handler's registers
  long value = 0;
};

/// One call or query site in the program text.
struct Action {
  std::string name;
  HandlerId target = -1;
  bool query = false;
  Effect effect;
};

/// A private queue inside a handler's request queue.
struct QueueEntry {
  HandlerId client = -1;
  std::uint32_t session = 0;
  std::vector<StmtPtr> items;
};

/// The triple (h, q_h, s) plus the handler's register file.
struct Triple {
  HandlerId id = -1;
  std::vector<QueueEntry> queue;
  StmtPtr prog;
  std::vector<long> registers;
  std::uint32_t next_session = 1;
};

/// Parallel composition of triples. Order carries no meaning; see
/// canonical_key().
struct Configuration {
  std::vector<Triple> triples;

  Triple* find(HandlerId id);
  const Triple* find(HandlerId id) const;
};

/// Observable event: an action executed against a handler's state.
struct Event {
  HandlerId handler = -1;
  int action = kEndAction;
  HandlerId client = -1;
  std::uint32_t session = 0;
  std::optional<long> value;  // register read by a `get` effect

  auto operator<=>(const Event&) const = default;
};

struct Program {
  std::vector<std::string> names;
  std::vector<bool> is_client;
  std::vector<std::vector<std::string>> registers;  // per handler
  std::vector<Action> actions;
  std::vector<std::string> agree;  // `invariant agree <reg>` declarations
  Configuration initial;

  /// -1 when unknown.
  HandlerId find(std::string_view name) const;
  std::vector<HandlerId> clients() const;
  std::vector<HandlerId> handlers() const;
  std::string describe(const Event& e) const;
};

/// Parses the program DSL. Throws qs::ParseError with line and column.
Program parse_program(std::string_view text);

std::string to_string(const StmtPtr& s, const Program& p);
std::string to_string(const Configuration& c, const Program& p);

}  // namespace qs::sem
