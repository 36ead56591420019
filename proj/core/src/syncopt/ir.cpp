#include <algorithm>
#include <sstream>

#include "common/lexer.hpp"
#include "qs/syncopt/syncopt.hpp"

namespace qs::opt {

std::size_t IrFunction::index(std::string_view id) const {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].id == id) return i;
  }
  throw MalformedCfg("unknown block '" + std::string(id) + "'");
}

std::vector<std::vector<std::size_t>> IrFunction::successors() const {
  std::vector<std::vector<std::size_t>> out(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (const auto& s : blocks[i].succs) out[i].push_back(index(s));
  }
  return out;
}

std::vector<std::vector<std::size_t>> IrFunction::predecessors() const {
  std::vector<std::vector<std::size_t>> out(blocks.size());
  const auto succ = successors();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    for (std::size_t s : succ[i]) {
      if (std::find(out[s].begin(), out[s].end(), i) == out[s].end()) out[s].push_back(i);
    }
  }
  return out;
}

SyncSet IrFunction::variables() const {
  SyncSet vars;
  for (const auto& b : blocks) {
    for (const auto& in : b.instrs) {
      if (in.kind == Instr::Kind::kSync || in.kind == Instr::Kind::kAsync) vars.insert(in.var);
    }
  }
  for (const auto& [a, b] : distinct) {
    vars.insert(a);
    vars.insert(b);
  }
  return vars;
}

AliasInfo::AliasInfo(std::set<std::pair<Var, Var>> distinct) {
  for (const auto& [a, b] : distinct) declare_distinct(a, b);
}

void AliasInfo::declare_distinct(const Var& a, const Var& b) {
  if (a == b) throw std::invalid_argument("a variable always aliases itself: " + a);
  distinct_.insert(std::minmax(a, b));
}

bool AliasInfo::may_alias(const Var& a, const Var& b) const {
  return a == b || !distinct_.contains(std::minmax(a, b));
}

// ---------------------------------------------------------------------------

namespace {

using detail::Token;
using detail::TokenStream;

class IrParser {
 public:
  explicit IrParser(std::string_view text) : ts_(detail::tokenize(text, "{}:,->")) {}

  IrFunction parse() {
    IrFunction f;
    parse_distincts(f);
    ts_.expect_word("func");
    f.name = ts_.expect_ident("function name").text;
    ts_.expect_punct('{');
    parse_distincts(f);
    if (!ts_.is_word("block")) ts_.fail(ts_.peek(), "function body needs at least one block");
    std::vector<std::pair<Token, std::size_t>> succ_refs;
    while (ts_.is_word("block")) {
      ts_.next();
      BasicBlock b;
      const Token& id = ts_.expect_ident("block id");
      for (const auto& other : f.blocks) {
        if (other.id == id.text) ts_.fail(id, "duplicate block '" + id.text + "'");
      }
      b.id = id.text;
      if (ts_.is_punct('-')) {
        ts_.next();
        ts_.expect_punct('>');
        for (;;) {
          const Token& s = ts_.expect_ident("successor block id");
          succ_refs.emplace_back(s, f.blocks.size());
          b.succs.push_back(s.text);
          if (!ts_.is_punct(',')) break;
          ts_.next();
        }
      }
      ts_.expect_punct(':');
      parse_instrs(b);
      f.blocks.push_back(std::move(b));
    }
    parse_distincts(f);
    ts_.expect_punct('}');
    parse_distincts(f);
    if (!ts_.at_end()) ts_.fail(ts_.peek(), "expected end of input after function");

    for (const auto& [tok, from] : succ_refs) {
      const bool known = std::any_of(f.blocks.begin(), f.blocks.end(),
                                     [&](const BasicBlock& b) { return b.id == tok.text; });
      if (!known) ts_.fail(tok, "unknown block '" + tok.text + "'");
      if (tok.text == f.blocks.front().id) {
        ts_.fail(tok, "the entry block '" + tok.text + "' cannot have predecessors");
      }
    }
    return f;
  }

 private:
  void parse_distincts(IrFunction& f) {
    while (ts_.is_word("distinct")) {
      ts_.next();
      const Token& a = ts_.expect_ident("variable");
      const Token& b = ts_.expect_ident("variable");
      if (a.text == b.text) ts_.fail(b, "a variable cannot be distinct from itself");
      f.distinct.insert(std::minmax(a.text, b.text));
    }
  }

  void parse_instrs(BasicBlock& b) {
    for (;;) {
      if (ts_.is_word("sync") || ts_.is_word("async")) {
        const bool sync = ts_.next().text == "sync";
        Var v = ts_.expect_ident("handler variable").text;
        b.instrs.push_back(sync ? Instr::sync(std::move(v)) : Instr::async(std::move(v)));
      } else if (ts_.is_word("call")) {
        ts_.next();
        Instr in = Instr::call();
        if (ts_.is_word("readonly")) {
          ts_.next();
          in.readonly = true;
        } else if (ts_.is_word("readnone")) {
          ts_.next();
          in.readnone = true;
        }
        b.instrs.push_back(in);
      } else if (ts_.is_word("pure")) {
        ts_.next();
        b.instrs.push_back(Instr::pure());
      } else {
        return;
      }
    }
  }

  TokenStream ts_;
};

}  // namespace

IrFunction parse_ir(std::string_view text) { return IrParser(text).parse(); }

std::string print_ir(const IrFunction& f) {
  std::ostringstream os;
  os << "func " << f.name << " {\n";
  for (const auto& [a, b] : f.distinct) os << "  distinct " << a << ' ' << b << '\n';
  for (const auto& b : f.blocks) {
    os << "  block " << b.id;
    for (std::size_t i = 0; i < b.succs.size(); ++i) os << (i ? ", " : " -> ") << b.succs[i];
    os << ":\n";
    for (const auto& in : b.instrs) {
      os << "    ";
      switch (in.kind) {
        case Instr::Kind::kSync: os << "sync " << in.var; break;
        case Instr::Kind::kAsync: os << "async " << in.var; break;
        case Instr::Kind::kCall:
          os << "call";
          if (in.readonly) os << " readonly";
          if (in.readnone) os << " readnone";
          break;
        case Instr::Kind::kPure: os << "pure"; break;
      }
      os << '\n';
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace qs::opt
