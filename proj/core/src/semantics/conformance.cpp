#include "qs/semantics/conformance.hpp"

#include <map>
#include <span>

namespace qs::sem {

namespace {

struct Node {
  std::vector<long> registers;
  std::vector<Event> log;
};

struct ClientNode {
  explicit ClientNode(Client c) : client(std::move(c)) {}
  Client client;
};

// Applies an action to the handler's registers and logs its event. Runs on
// the handler for calls and on the synced client for queries.
void perform(const Program& p, Node& n, Event e) {
  const Effect& eff = p.actions[e.action].effect;
  if (eff.kind == Effect::Kind::kSet) {
    n.registers[eff.reg] = eff.value;
  } else if (eff.kind == Effect::Kind::kGet) {
    e.value = n.registers[eff.reg];
  }
  n.log.push_back(e);
}

class Interpreter {
 public:
  Interpreter(const Program& p, const std::map<HandlerId, Handler<Node>>& handlers,
              Client& client, HandlerId self)
      : p_(p), handlers_(handlers), client_(client), self_(self) {}

  void exec(const StmtPtr& s) {
    switch (s->kind) {
      case StmtKind::kSeq:
        exec(s->first);
        exec(s->second);
        break;
      case StmtKind::kSeparate: {
        const std::uint32_t session = next_session_++;
        std::vector<Handler<Node>> targets;
        for (HandlerId h : s->targets) targets.push_back(handlers_.at(h));
        auto sessions = client_.reserve_all(std::span<const Handler<Node>>(targets));
        for (std::size_t i = 0; i < sessions.size(); ++i) {
          open_.push_back(Open{s->targets[i], session, &sessions[i]});
        }
        exec(s->first);
        open_.resize(open_.size() - sessions.size());
        for (auto& ses : sessions) ses.end();
        break;
      }
      case StmtKind::kCall: {
        const Open& o = innermost(s->handler);
        Event e{s->handler, s->action, self_, o.session, std::nullopt};
        o.session_ref->call([&p = p_, e](Node& n) { perform(p, n, e); });
        break;
      }
      case StmtKind::kQuery: {
        const Open& o = innermost(s->handler);
        Event e{s->handler, s->action, self_, o.session, std::nullopt};
        o.session_ref->query([&p = p_, e](Node& n) { perform(p, n, e); });
        break;
      }
      default:
        break;
    }
  }

 private:
  struct Open {
    HandlerId handler;
    std::uint32_t session;
    Session<Node>* session_ref;
  };

  const Open& innermost(HandlerId h) const {
    for (auto it = open_.rbegin(); it != open_.rend(); ++it) {
      if (it->handler == h) return *it;
    }
    throw std::logic_error("statement targets a handler outside its reservations");
  }

  const Program& p_;
  const std::map<HandlerId, Handler<Node>>& handlers_;
  Client& client_;
  HandlerId self_;
  std::uint32_t next_session_ = 1;
  std::vector<Open> open_;
};

}  // namespace

Projection run_on_runtime(const Program& p, const RuntimeConfig& config) {
  Runtime rt(config);
  std::map<HandlerId, Handler<Node>> handlers;
  for (HandlerId h : p.handlers()) {
    handlers.emplace(h, rt.spawn<Node>(Node{std::vector<long>(p.registers[h].size(), 0), {}}));
  }
  std::vector<std::pair<HandlerId, Handler<ClientNode>>> clients;
  for (HandlerId c : p.clients()) clients.emplace_back(c, rt.spawn<ClientNode>(Client(rt)));

  Client main(rt);
  for (auto& [id, h] : clients) {
    auto s = main.reserve(h);
    const StmtPtr body = p.initial.find(id)->prog;
    s.call([&p, &handlers, id = id, body](ClientNode& me) {
      Interpreter(p, handlers, me.client, id).exec(body);
    });
    s.end();
  }
  // Waiting on each client handler in turn also orders every client's
  // sessions before the final reads below.
  for (auto& [id, h] : clients) {
    auto s = main.reserve(h);
    s.query([](ClientNode&) { return 0; });
    s.end();
  }

  Projection out;
  for (auto& [id, h] : handlers) {
    auto s = main.reserve(h);
    out.push_back(s.query([](Node& n) { return n.log; }));
    s.end();
  }
  rt.shutdown();
  return out;
}

}  // namespace qs::sem
