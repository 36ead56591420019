#include "qs/semantics/program.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "common/lexer.hpp"

namespace qs::sem {

namespace {

StmtPtr node(Stmt s) { return std::make_shared<const Stmt>(std::move(s)); }

const StmtPtr& shared_skip() {
  static const StmtPtr skip = node(Stmt{});
  return skip;
}

}  // namespace

StmtPtr make_skip() { return shared_skip(); }

StmtPtr make_separate(std::vector<HandlerId> targets, StmtPtr body) {
  Stmt s;
  s.kind = StmtKind::kSeparate;
  s.targets = std::move(targets);
  s.first = std::move(body);
  return node(std::move(s));
}

StmtPtr make_call(HandlerId target, int action) {
  Stmt s;
  s.kind = StmtKind::kCall;
  s.handler = target;
  s.action = action;
  return node(std::move(s));
}

StmtPtr make_query(HandlerId target, int action) {
  Stmt s;
  s.kind = StmtKind::kQuery;
  s.handler = target;
  s.action = action;
  return node(std::move(s));
}

StmtPtr make_wait(HandlerId target) {
  Stmt s;
  s.kind = StmtKind::kWait;
  s.handler = target;
  return node(std::move(s));
}

StmtPtr make_release(HandlerId client) {
  Stmt s;
  s.kind = StmtKind::kRelease;
  s.handler = client;
  return node(std::move(s));
}

StmtPtr make_end() {
  static const StmtPtr end = [] {
    Stmt s;
    s.kind = StmtKind::kEnd;
    return node(std::move(s));
  }();
  return end;
}

StmtPtr make_seq(StmtPtr a, StmtPtr b) {
  Stmt s;
  s.kind = StmtKind::kSeq;
  s.first = std::move(a);
  s.second = std::move(b);
  return node(std::move(s));
}

StmtPtr make_exec(HandlerId target, int action, HandlerId client, std::uint32_t session) {
  Stmt s;
  s.kind = StmtKind::kExec;
  s.handler = target;
  s.action = action;
  s.client = client;
  s.session = session;
  return node(std::move(s));
}

StmtPtr make_block(const std::vector<StmtPtr>& stmts) {
  if (stmts.empty()) return make_skip();
  StmtPtr out = stmts.back();
  for (auto it = stmts.rbegin() + 1; it != stmts.rend(); ++it) out = make_seq(*it, out);
  return out;
}

Triple* Configuration::find(HandlerId id) {
  for (auto& t : triples) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

const Triple* Configuration::find(HandlerId id) const {
  return const_cast<Configuration*>(this)->find(id);
}

HandlerId Program::find(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<HandlerId>(i);
  }
  return -1;
}

std::vector<HandlerId> Program::clients() const {
  std::vector<HandlerId> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (is_client[i]) out.push_back(static_cast<HandlerId>(i));
  }
  return out;
}

std::vector<HandlerId> Program::handlers() const {
  std::vector<HandlerId> out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!is_client[i]) out.push_back(static_cast<HandlerId>(i));
  }
  return out;
}

std::string Program::describe(const Event& e) const {
  std::string out = names[e.handler] + "." +
                    (e.action == kEndAction ? std::string("end") : actions[e.action].name);
  out += " by " + names[e.client] + "#" + std::to_string(e.session);
  if (e.value) out += " -> " + std::to_string(*e.value);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

using detail::Token;
using detail::TokenStream;

const std::set<std::string, std::less<>> kKeywords = {
    "handler", "client", "invariant", "registers", "separate", "call", "query"};

class Parser {
 public:
  explicit Parser(std::string_view text) : ts_(detail::tokenize(text, "{}().=;")) {}

  Program parse() {
    if (ts_.at_end()) ts_.fail(ts_.peek(), "empty program");
    while (!ts_.at_end()) {
      if (ts_.is_word("handler")) {
        parse_handler();
      } else if (ts_.is_word("client")) {
        parse_client();
      } else if (ts_.is_word("invariant")) {
        parse_invariant();
      } else if (ts_.is_punct(';')) {
        ts_.next();
      } else {
        ts_.fail(ts_.peek(), "expected 'handler', 'client' or 'invariant'");
      }
    }
    if (prog_.clients().empty()) ts_.fail(ts_.peek(), "program declares no client");

    for (std::size_t i = 0; i < prog_.names.size(); ++i) {
      Triple t;
      t.id = static_cast<HandlerId>(i);
      t.prog = bodies_[i] ? bodies_[i] : make_skip();
      t.registers.assign(prog_.registers[i].size(), 0);
      prog_.initial.triples.push_back(std::move(t));
    }
    return std::move(prog_);
  }

 private:
  HandlerId declare(const Token& name, bool client) {
    if (kKeywords.contains(name.text)) ts_.fail(name, "'" + name.text + "' is a keyword");
    if (prog_.find(name.text) >= 0) ts_.fail(name, "duplicate name '" + name.text + "'");
    prog_.names.push_back(name.text);
    prog_.is_client.push_back(client);
    prog_.registers.emplace_back();
    bodies_.emplace_back();
    return static_cast<HandlerId>(prog_.names.size() - 1);
  }

  void parse_handler() {
    ts_.expect_word("handler");
    const HandlerId id = declare(ts_.expect_ident("handler name"), false);
    if (!ts_.is_word("registers")) return;
    ts_.next();
    auto& regs = prog_.registers[id];
    while (ts_.peek().kind == Token::Kind::kIdent && !kKeywords.contains(ts_.peek().text)) {
      const Token& r = ts_.next();
      if (std::find(regs.begin(), regs.end(), r.text) != regs.end()) {
        ts_.fail(r, "duplicate register '" + r.text + "'");
      }
      regs.push_back(r.text);
    }
    if (regs.empty()) ts_.fail(ts_.peek(), "expected at least one register name");
  }

  void parse_client() {
    ts_.expect_word("client");
    const HandlerId id = declare(ts_.expect_ident("client name"), true);
    ts_.expect_punct('{');
    bodies_[id] = parse_block();
    ts_.expect_punct('}');
  }

  void parse_invariant() {
    ts_.expect_word("invariant");
    ts_.expect_word("agree");
    const Token& reg = ts_.expect_ident("register name");
    bool known = false;
    for (const auto& regs : prog_.registers) {
      known |= std::find(regs.begin(), regs.end(), reg.text) != regs.end();
    }
    if (!known) ts_.fail(reg, "unknown register '" + reg.text + "'");
    prog_.agree.push_back(reg.text);
  }

  StmtPtr parse_block() {
    std::vector<StmtPtr> stmts;
    while (!ts_.is_punct('}') && !ts_.at_end()) {
      if (ts_.is_punct(';')) {
        ts_.next();
        continue;
      }
      stmts.push_back(parse_stmt());
    }
    return make_block(stmts);
  }

  StmtPtr parse_stmt() {
    if (ts_.is_word("separate")) return parse_separate();
    if (ts_.is_word("call")) return parse_request(false);
    if (ts_.is_word("query")) return parse_request(true);
    ts_.fail(ts_.peek(), "expected 'separate', 'call', 'query' or '}'");
  }

  HandlerId lookup_handler(const Token& t) {
    const HandlerId id = prog_.find(t.text);
    if (id < 0) ts_.fail(t, "unknown handler '" + t.text + "'");
    if (prog_.is_client[id]) ts_.fail(t, "'" + t.text + "' is a client, not a handler");
    return id;
  }

  StmtPtr parse_separate() {
    const Token& kw = ts_.expect_word("separate");
    std::vector<HandlerId> targets;
    while (ts_.peek().kind == Token::Kind::kIdent) {
      const Token& t = ts_.next();
      const HandlerId id = lookup_handler(t);
      if (std::find(targets.begin(), targets.end(), id) != targets.end()) {
        ts_.fail(t, "handler '" + t.text + "' listed twice");
      }
      if (reserved_.contains(id)) {
        ts_.fail(t, "handler '" + t.text + "' is already reserved by an enclosing block");
      }
      targets.push_back(id);
    }
    if (targets.empty()) ts_.fail(kw, "separate needs at least one handler");
    ts_.expect_punct('{');
    for (HandlerId h : targets) reserved_.insert(h);
    StmtPtr body = parse_block();
    for (HandlerId h : targets) reserved_.erase(h);
    ts_.expect_punct('}');
    return make_separate(std::move(targets), std::move(body));
  }

  StmtPtr parse_request(bool query) {
    ts_.next();
    const Token& target_tok = ts_.expect_ident("handler name");
    const HandlerId target = lookup_handler(target_tok);
    if (!reserved_.contains(target)) {
      ts_.fail(target_tok, "'" + target_tok.text + "' is not reserved by an enclosing separate block");
    }
    ts_.expect_punct('.');
    Action action;
    action.name = ts_.expect_ident("action name").text;
    action.target = target;
    action.query = query;
    if (ts_.is_punct('(')) {
      ts_.next();
      const Token& kind = ts_.expect_ident("'set' or 'get'");
      if (kind.text == "set" && !query) {
        action.effect.kind = Effect::Kind::kSet;
      } else if (kind.text == "get") {
        action.effect.kind = Effect::Kind::kGet;
      } else {
        ts_.fail(kind, query ? "queries only support 'get'" : "expected 'set' or 'get'");
      }
      const Token& reg = ts_.expect_ident("register name");
      const auto& regs = prog_.registers[target];
      auto it = std::find(regs.begin(), regs.end(), reg.text);
      if (it == regs.end()) {
        ts_.fail(reg, "handler '" + prog_.names[target] + "' has no register '" + reg.text + "'");
      }
      action.effect.reg = static_cast<int>(it - regs.begin());
      if (action.effect.kind == Effect::Kind::kSet) {
        ts_.expect_punct('=');
        action.effect.value = ts_.expect_int("integer value");
      }
      ts_.expect_punct(')');
    }
    prog_.actions.push_back(std::move(action));
    const int id = static_cast<int>(prog_.actions.size() - 1);
    return query ? make_query(target, id) : make_call(target, id);
  }

  TokenStream ts_;
  Program prog_;
  std::vector<StmtPtr> bodies_;
  std::set<HandlerId> reserved_;
};

}  // namespace

Program parse_program(std::string_view text) { return Parser(text).parse(); }

// ---------------------------------------------------------------------------
// Rendering

namespace {

void render(std::ostream& os, const StmtPtr& s, const Program& p) {
  auto name = [&](HandlerId h) -> const std::string& { return p.names[h]; };
  auto action = [&](int a) { return a == kEndAction ? std::string("end") : p.actions[a].name; };
  switch (s->kind) {
    case StmtKind::kSkip:
      os << "skip";
      break;
    case StmtKind::kSeparate:
      os << "separate";
      for (HandlerId h : s->targets) os << ' ' << name(h);
      os << " { ";
      render(os, s->first, p);
      os << " }";
      break;
    case StmtKind::kCall:
      os << "call(" << name(s->handler) << ", " << action(s->action) << ")";
      break;
    case StmtKind::kQuery:
      os << "query(" << name(s->handler) << ", " << action(s->action) << ")";
      break;
    case StmtKind::kWait:
      os << "wait " << name(s->handler);
      break;
    case StmtKind::kRelease:
      os << "release " << name(s->handler);
      break;
    case StmtKind::kEnd:
      os << "end";
      break;
    case StmtKind::kSeq:
      render(os, s->first, p);
      os << "; ";
      render(os, s->second, p);
      break;
    case StmtKind::kExec:
      os << action(s->action) << "@" << name(s->handler);
      break;
  }
}

}  // namespace

std::string to_string(const StmtPtr& s, const Program& p) {
  std::ostringstream os;
  render(os, s, p);
  return os.str();
}

std::string to_string(const Configuration& c, const Program& p) {
  std::ostringstream os;
  bool first_triple = true;
  for (const auto& t : c.triples) {
    if (!first_triple) os << " || ";
    first_triple = false;
    os << "(" << p.names[t.id] << ", [";
    for (std::size_t i = 0; i < t.queue.size(); ++i) {
      if (i) os << ", ";
      os << p.names[t.queue[i].client] << " -> [";
      for (std::size_t k = 0; k < t.queue[i].items.size(); ++k) {
        if (k) os << ", ";
        render(os, t.queue[i].items[k], p);
      }
      os << "]";
    }
    os << "], ";
    render(os, t.prog, p);
    os << ")";
  }
  return os.str();
}

}  // namespace qs::sem
