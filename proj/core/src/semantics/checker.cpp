#include "qs/semantics/checker.hpp"

#include <algorithm>
#include <cstring>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace qs::sem {

std::string_view to_string(Rule r) noexcept {
  switch (r) {
    case Rule::kSeparate: return "separate";
    case Rule::kCall: return "call";
    case Rule::kQuery: return "query";
    case Rule::kSync: return "sync";
    case Rule::kRun: return "run";
    case Rule::kEnd: return "end";
    case Rule::kSeq: return "seq";
    case Rule::kSeqSkip: return "seqSkip";
    case Rule::kParStep: return "parStep";
    case Rule::kOneStep: return "oneStep";
    case Rule::kManyStep: return "manyStep";
    case Rule::kExec: return "exec";
  }
  return "?";
}

namespace {

// The redex is the leftmost statement not itself a sequence, except that
// `skip; s` is a redex of its own (seqSkip).
const StmtPtr& redex(const StmtPtr& s, int& depth) {
  const StmtPtr* cur = &s;
  depth = 0;
  while ((*cur)->kind == StmtKind::kSeq && (*cur)->first->kind != StmtKind::kSkip) {
    cur = &(*cur)->first;
    ++depth;
  }
  return *cur;
}

StmtPtr plug(const StmtPtr& prog, StmtPtr replacement) {
  if (prog->kind == StmtKind::kSeq && prog->first->kind != StmtKind::kSkip) {
    return make_seq(plug(prog->first, std::move(replacement)), prog->second);
  }
  return replacement;
}

StmtPtr end_many(const std::vector<HandlerId>& targets) {
  std::vector<StmtPtr> calls;
  calls.reserve(targets.size() + 1);
  for (HandlerId x : targets) calls.push_back(make_call(x, kEndAction));
  calls.push_back(make_skip());
  return make_block(calls);
}

std::size_t index_of(const Configuration& c, HandlerId id) {
  for (std::size_t i = 0; i < c.triples.size(); ++i) {
    if (c.triples[i].id == id) return i;
  }
  throw MalformedConfiguration("no triple for handler " + std::to_string(id));
}

// q[h]: lookup addresses the last entry logged by client h.
QueueEntry& last_entry(Triple& x, HandlerId client) {
  for (auto it = x.queue.rbegin(); it != x.queue.rend(); ++it) {
    if (it->client == client) return *it;
  }
  throw MalformedConfiguration("handler " + std::to_string(x.id) +
                               " has no private queue for client " + std::to_string(client));
}

}  // namespace

bool all_skip(const Configuration& c) {
  return std::all_of(c.triples.begin(), c.triples.end(), [](const Triple& t) {
    return t.prog->kind == StmtKind::kSkip && t.queue.empty();
  });
}

std::vector<Transition> step(const Configuration& c, const Program& p, QueryMode mode) {
  std::vector<Transition> out;
  const std::size_t n = c.triples.size();

  for (std::size_t i = 0; i < n; ++i) {
    const Triple& t = c.triples[i];
    int depth = 0;
    const StmtPtr& r = redex(t.prog, depth);

    Transition tr;
    tr.actor = t.id;
    tr.nested = depth > 0;
    std::size_t participants = 1;

    switch (r->kind) {
      case StmtKind::kSeq: {
        tr.rule = Rule::kSeqSkip;
        tr.next = c;
        tr.next.triples[i].prog = plug(t.prog, r->second);
        break;
      }
      case StmtKind::kSeparate: {
        tr.rule = Rule::kSeparate;
        tr.next = c;
        Triple& h = tr.next.triples[i];
        for (HandlerId x : r->targets) {
          tr.next.triples[index_of(c, x)].queue.push_back(
              QueueEntry{t.id, h.next_session, {}});
        }
        ++h.next_session;
        h.prog = plug(t.prog, make_seq(r->first, end_many(r->targets)));
        participants += r->targets.size();
        break;
      }
      case StmtKind::kCall:
      case StmtKind::kQuery: {
        tr.next = c;
        Triple& x = tr.next.triples[index_of(c, r->handler)];
        QueueEntry& entry = last_entry(x, t.id);
        if (r->kind == StmtKind::kCall) {
          tr.rule = Rule::kCall;
          entry.items.push_back(r->action == kEndAction
                                    ? make_end()
                                    : make_exec(x.id, r->action, t.id, entry.session));
          tr.next.triples[i].prog = plug(t.prog, make_skip());
        } else {
          tr.rule = Rule::kQuery;
          auto exec = make_exec(x.id, r->action, t.id, entry.session);
          if (mode == QueryMode::kOriginal) {
            entry.items.push_back(exec);
            entry.items.push_back(make_release(t.id));
            tr.next.triples[i].prog = plug(t.prog, make_wait(x.id));
          } else {
            entry.items.push_back(make_release(t.id));
            tr.next.triples[i].prog = plug(t.prog, make_seq(make_wait(x.id), exec));
          }
        }
        participants = x.id == t.id ? 1 : 2;
        break;
      }
      case StmtKind::kWait: {
        const std::size_t xi = index_of(c, r->handler);
        const Triple& x = c.triples[xi];
        int xdepth = 0;
        const StmtPtr& xr = redex(x.prog, xdepth);
        if (xr->kind != StmtKind::kRelease || xr->handler != t.id) continue;
        tr.rule = Rule::kSync;
        tr.nested = tr.nested || xdepth > 0;
        tr.next = c;
        tr.next.triples[i].prog = plug(t.prog, make_skip());
        tr.next.triples[xi].prog = plug(x.prog, make_skip());
        participants = 2;
        break;
      }
      case StmtKind::kRelease:
        continue;  // only SYNC, driven by the waiting client, rewrites it
      case StmtKind::kEnd: {
        if (t.queue.empty() || !t.queue.front().items.empty()) continue;
        tr.rule = Rule::kEnd;
        tr.next = c;
        Triple& h = tr.next.triples[i];
        h.queue.erase(h.queue.begin());
        h.prog = plug(t.prog, make_skip());
        break;
      }
      case StmtKind::kSkip: {
        if (t.queue.empty() || t.queue.front().items.empty()) continue;
        tr.rule = Rule::kRun;
        tr.next = c;
        Triple& h = tr.next.triples[i];
        auto& items = h.queue.front().items;
        h.prog = items.front();
        items.erase(items.begin());
        break;
      }
      case StmtKind::kExec: {
        tr.rule = Rule::kExec;
        tr.next = c;
        const std::size_t xi = index_of(c, r->handler);
        Triple& x = tr.next.triples[xi];
        Event e{r->handler, r->action, r->client, r->session, std::nullopt};
        const Effect& eff = p.actions.at(static_cast<std::size_t>(r->action)).effect;
        if (eff.kind == Effect::Kind::kSet) {
          x.registers.at(static_cast<std::size_t>(eff.reg)) = eff.value;
        } else if (eff.kind == Effect::Kind::kGet) {
          e.value = x.registers.at(static_cast<std::size_t>(eff.reg));
        }
        tr.event = e;
        tr.next.triples[i].prog = plug(t.prog, make_skip());
        participants = xi == i ? 1 : 2;
        break;
      }
    }
    tr.parallel = n > participants;
    out.push_back(std::move(tr));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical keys

namespace {

class KeyWriter {
 public:
  void put(std::int64_t v) {
    char buf[sizeof v];
    std::memcpy(buf, &v, sizeof v);
    out_.append(buf, sizeof v);
  }
  void put(const StmtPtr& s) {
    out_.push_back(static_cast<char>(s->kind));
    switch (s->kind) {
      case StmtKind::kSkip:
      case StmtKind::kEnd:
        break;
      case StmtKind::kSeparate:
        put(static_cast<std::int64_t>(s->targets.size()));
        for (HandlerId h : s->targets) put(h);
        put(s->first);
        break;
      case StmtKind::kCall:
      case StmtKind::kQuery:
        put(s->handler);
        put(s->action);
        break;
      case StmtKind::kWait:
      case StmtKind::kRelease:
        put(s->handler);
        break;
      case StmtKind::kSeq:
        put(s->first);
        put(s->second);
        break;
      case StmtKind::kExec:
        put(s->handler);
        put(s->action);
        put(s->client);
        put(s->session);
        break;
    }
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

}  // namespace

std::string canonical_key(const Configuration& c) {
  std::vector<const Triple*> order;
  order.reserve(c.triples.size());
  for (const auto& t : c.triples) order.push_back(&t);
  std::sort(order.begin(), order.end(),
            [](const Triple* a, const Triple* b) { return a->id < b->id; });
  KeyWriter w;
  for (const Triple* t : order) {
    w.put(t->id);
    w.put(t->next_session);
    w.put(static_cast<std::int64_t>(t->registers.size()));
    for (long r : t->registers) w.put(r);
    w.put(static_cast<std::int64_t>(t->queue.size()));
    for (const auto& e : t->queue) {
      w.put(e.client);
      w.put(e.session);
      w.put(static_cast<std::int64_t>(e.items.size()));
      for (const auto& s : e.items) w.put(s);
    }
    w.put(t->prog);
  }
  return w.take();
}

// ---------------------------------------------------------------------------
// Exploration

namespace {

using TraceSet = std::set<Trace>;

class Explorer {
 public:
  Explorer(const Program& p, Limits limits, QueryMode mode)
      : p_(p), limits_(limits), mode_(mode) {}

  ExploreResult run(const Configuration& init) {
    auto traces = visit(init, 0);
    result_.traces = *traces;
    result_.states_visited = memo_.size();
    return std::move(result_);
  }

 private:
  std::shared_ptr<const TraceSet> visit(const Configuration& c, std::size_t depth) {
    if (depth > limits_.max_depth) {
      throw LimitExceeded("exploration exceeded depth " + std::to_string(limits_.max_depth));
    }
    std::string key = canonical_key(c);
    if (auto it = memo_.find(key); it != memo_.end()) {
      if (!it->second) throw MalformedConfiguration("step relation has a cycle");
      return it->second;
    }
    if (memo_.size() >= limits_.max_states) {
      throw LimitExceeded("exploration exceeded " + std::to_string(limits_.max_states) +
                          " states");
    }
    memo_.emplace(key, nullptr);

    auto out = std::make_shared<TraceSet>();
    auto transitions = step(c, p_, mode_);
    if (transitions.empty()) {
      const bool done = all_skip(c);
      if (!done) result_.stuck.push_back(c);
      out->insert(Trace{{}, done ? Terminal::kAllSkip : Terminal::kStuck});
    }
    for (auto& tr : transitions) {
      count(tr, depth);
      auto suffixes = visit(tr.next, depth + 1);
      if (!tr.event) {
        out->insert(suffixes->begin(), suffixes->end());
        continue;
      }
      for (const Trace& s : *suffixes) {
        Trace t;
        t.end = s.end;
        t.events.reserve(s.events.size() + 1);
        t.events.push_back(*tr.event);
        t.events.insert(t.events.end(), s.events.begin(), s.events.end());
        out->insert(std::move(t));
      }
    }
    std::shared_ptr<const TraceSet> frozen = std::move(out);
    memo_[key] = frozen;
    return frozen;
  }

  void count(const Transition& tr, std::size_t depth) {
    auto& rc = result_.rule_counts;
    ++rc[tr.rule];
    if (tr.nested) ++rc[Rule::kSeq];
    if (tr.parallel) ++rc[Rule::kParStep];
    ++rc[Rule::kOneStep];
    if (depth > 0) ++rc[Rule::kManyStep];
  }

  const Program& p_;
  Limits limits_;
  QueryMode mode_;
  std::unordered_map<std::string, std::shared_ptr<const TraceSet>> memo_;
  ExploreResult result_;
};

}  // namespace

ExploreResult explore(const Configuration& init, const Program& p, Limits limits,
                      QueryMode mode) {
  if (limits.max_states == 0 || limits.max_depth == 0) {
    throw std::invalid_argument("explore: limits must be positive");
  }
  std::set<HandlerId> ids;
  for (const auto& t : init.triples) {
    if (!ids.insert(t.id).second) {
      throw MalformedConfiguration("duplicate handler id " + std::to_string(t.id));
    }
  }
  return Explorer(p, limits, mode).run(init);
}

std::set<std::vector<std::string>> handler_orders(const std::set<Trace>& traces,
                                                  const Program& p, HandlerId h) {
  std::set<std::vector<std::string>> out;
  for (const auto& t : traces) {
    std::vector<std::string> order;
    for (const auto& e : t.events) {
      if (e.handler == h) order.push_back(p.actions[e.action].name);
    }
    out.insert(std::move(order));
  }
  return out;
}

std::set<Projection> handler_projections(const std::set<Trace>& traces, const Program& p) {
  const auto hs = p.handlers();
  std::set<Projection> out;
  for (const auto& t : traces) {
    Projection proj(hs.size());
    for (const auto& e : t.events) {
      auto it = std::find(hs.begin(), hs.end(), e.handler);
      if (it != hs.end()) proj[it - hs.begin()].push_back(e);
    }
    out.insert(std::move(proj));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Guarantees

namespace {

struct SessionKey {
  HandlerId client;
  std::uint32_t session;
  auto operator<=>(const SessionKey&) const = default;
};

struct Expectations {
  // (client, session, handler) -> actions in logging order
  std::map<std::tuple<HandlerId, std::uint32_t, HandlerId>, std::vector<int>> order;
  std::set<SessionKey> multi;  // sessions reserving two or more handlers
};

struct Frame {
  std::uint32_t session;
  const std::vector<HandlerId>* targets;
};

void collect(const StmtPtr& s, HandlerId client, std::uint32_t& counter,
             std::vector<Frame>& frames, Expectations& ex) {
  switch (s->kind) {
    case StmtKind::kSeq:
      collect(s->first, client, counter, frames, ex);
      collect(s->second, client, counter, frames, ex);
      break;
    case StmtKind::kSeparate: {
      const std::uint32_t session = counter++;
      if (s->targets.size() >= 2) ex.multi.insert({client, session});
      frames.push_back({session, &s->targets});
      collect(s->first, client, counter, frames, ex);
      frames.pop_back();
      break;
    }
    case StmtKind::kCall:
    case StmtKind::kQuery:
      for (auto f = frames.rbegin(); f != frames.rend(); ++f) {
        const auto& ts = *f->targets;
        if (std::find(ts.begin(), ts.end(), s->handler) != ts.end()) {
          ex.order[{client, f->session, s->handler}].push_back(s->action);
          break;
        }
      }
      break;
    default:
      break;
  }
}

Expectations expectations(const Program& p) {
  Expectations ex;
  for (const auto& t : p.initial.triples) {
    if (!p.is_client[t.id]) continue;
    std::uint32_t counter = t.next_session;
    std::vector<Frame> frames;
    collect(t.prog, t.id, counter, frames, ex);
  }
  return ex;
}

std::string session_name(const Program& p, SessionKey k) {
  return p.names[k.client] + "#" + std::to_string(k.session);
}

}  // namespace

GuaranteeReport check_guarantees(const std::set<Trace>& traces, const Program& p,
                                 std::size_t max_violations) {
  const Expectations ex = expectations(p);
  GuaranteeReport report;

  auto expected = [&](SessionKey k, HandlerId h) -> const std::vector<int>& {
    static const std::vector<int> kNone;
    auto it = ex.order.find({k.client, k.session, h});
    return it == ex.order.end() ? kNone : it->second;
  };

  for (const auto& trace : traces) {
    if (report.violations.size() >= max_violations) break;
    ++report.traces_checked;
    auto fail = [&](Violation::Kind kind, std::string msg) {
      report.violations.push_back(Violation{kind, trace, std::move(msg)});
    };

    for (HandlerId h : p.handlers()) {
      std::map<SessionKey, std::size_t> progress;
      std::set<SessionKey> closed;
      std::optional<SessionKey> current;
      for (const auto& e : trace.events) {
        if (e.handler != h) continue;
        const SessionKey k{e.client, e.session};
        if (current && *current != k) {
          if (progress[*current] != expected(*current, h).size()) {
            fail(Violation::Kind::kContiguity,
                 p.names[h] + ": " + session_name(p, k) + " ran inside unfinished session " +
                     session_name(p, *current));
          }
          closed.insert(*current);
        }
        if (closed.contains(k)) {
          fail(Violation::Kind::kContiguity,
               p.names[h] + ": " + session_name(p, k) + " resumed after " +
                   session_name(p, *current));
        }
        current = k;
        const auto& want = expected(k, h);
        std::size_t& pos = progress[k];
        if (pos >= want.size() || want[pos] != e.action) {
          fail(Violation::Kind::kOrder, p.names[h] + ": " + session_name(p, k) +
                                            " executed " + p.actions[e.action].name +
                                            " out of logging order");
        }
        ++pos;
      }
      if (trace.end == Terminal::kAllSkip) {
        for (const auto& [key, want] : ex.order) {
          const auto& [client, session, handler] = key;
          if (handler != h) continue;
          const SessionKey k{client, session};
          if (progress[k] != want.size()) {
            fail(Violation::Kind::kOrder, p.names[h] + ": " + session_name(p, k) + " ran " +
                                              std::to_string(progress[k]) + " of " +
                                              std::to_string(want.size()) + " logged actions");
          }
        }
      }
    }

    for (const auto& reg : p.agree) {
      std::map<SessionKey, std::vector<std::pair<HandlerId, long>>> reads;
      for (const auto& e : trace.events) {
        if (!e.value) continue;
        const Effect& eff = p.actions[e.action].effect;
        if (eff.kind != Effect::Kind::kGet || p.registers[e.handler][eff.reg] != reg) continue;
        const SessionKey k{e.client, e.session};
        if (ex.multi.contains(k)) reads[k].emplace_back(e.handler, *e.value);
      }
      for (const auto& [k, rs] : reads) {
        for (std::size_t i = 1; i < rs.size(); ++i) {
          if (rs[i].second == rs[0].second) continue;
          fail(Violation::Kind::kAgreement,
               session_name(p, k) + " read " + p.names[rs[0].first] + "." + reg + " = " +
                   std::to_string(rs[0].second) + " but " + p.names[rs[i].first] + "." + reg +
                   " = " + std::to_string(rs[i].second));
          break;
        }
      }
    }
  }
  return report;
}

}  // namespace qs::sem
