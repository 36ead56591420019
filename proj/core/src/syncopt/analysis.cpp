#include <algorithm>
#include <deque>
#include <random>

#include "qs/syncopt/syncopt.hpp"

namespace qs::opt {

namespace {

void apply(const Instr& in, SyncSet& synced, const AliasInfo& alias) {
  switch (in.kind) {
    case Instr::Kind::kSync:
      synced.insert(in.var);
      break;
    case Instr::Kind::kAsync:
      std::erase_if(synced, [&](const Var& v) { return alias.may_alias(v, in.var); });
      break;
    case Instr::Kind::kCall:
      if (!in.readonly && !in.readnone) synced.clear();
      break;
    case Instr::Kind::kPure:
      break;
  }
}

SyncSet intersect(const SyncSet& a, const SyncSet& b) {
  SyncSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

void validate(const IrFunction& f) {
  if (f.blocks.empty()) throw MalformedCfg("function " + f.name + " has no blocks");
  for (std::size_t i = 0; i < f.blocks.size(); ++i) {
    for (std::size_t j = i + 1; j < f.blocks.size(); ++j) {
      if (f.blocks[i].id == f.blocks[j].id) {
        throw MalformedCfg("duplicate block '" + f.blocks[i].id + "'");
      }
    }
  }
  const auto preds = f.predecessors();  // throws on dangling successors
  if (!preds[0].empty()) {
    throw MalformedCfg("entry block '" + f.blocks[0].id + "' has predecessors");
  }
}

}  // namespace

SyncSet update_sync(const BasicBlock& b, SyncSet incoming, const AliasInfo& alias) {
  for (const auto& in : b.instrs) apply(in, incoming, alias);
  return incoming;
}

SyncSet in_set(const IrFunction& f, const SyncSets& sets, std::size_t block) {
  const auto preds = f.predecessors();
  if (preds[block].empty()) return {};
  SyncSet common = sets[preds[block][0]];
  for (std::size_t k = 1; k < preds[block].size(); ++k) {
    common = intersect(common, sets[preds[block][k]]);
  }
  return common;
}

SyncSets compute_sync_sets(const IrFunction& f, const AliasInfo& alias,
                           std::optional<std::uint64_t> pick_seed) {
  validate(f);
  const auto preds = f.predecessors();
  const auto succs = f.successors();
  const std::size_t n = f.blocks.size();

  SyncSets sets(n, f.variables());
  std::deque<std::size_t> changed;
  std::vector<bool> queued(n, true);
  for (std::size_t i = 0; i < n; ++i) changed.push_back(i);
  std::mt19937_64 rng(pick_seed.value_or(0));

  while (!changed.empty()) {
    std::size_t pos = 0;
    if (pick_seed) pos = rng() % changed.size();
    const std::size_t b = changed[pos];
    changed.erase(changed.begin() + static_cast<std::ptrdiff_t>(pos));
    queued[b] = false;

    SyncSet common;
    if (!preds[b].empty()) {
      common = sets[preds[b][0]];
      for (std::size_t k = 1; k < preds[b].size(); ++k) {
        common = intersect(common, sets[preds[b][k]]);
      }
    }
    SyncSet out = update_sync(f.blocks[b], std::move(common), alias);
    if (out != sets[b]) {
      sets[b] = std::move(out);
      for (std::size_t s : succs[b]) {
        if (!queued[s]) {
          queued[s] = true;
          changed.push_back(s);
        }
      }
    }
  }
  return sets;
}

Removal remove_redundant_syncs(const IrFunction& f, const SyncSets& sets,
                               const AliasInfo& alias) {
  Removal r;
  r.rewritten = f;
  for (std::size_t b = 0; b < f.blocks.size(); ++b) {
    SyncSet running = in_set(f, sets, b);
    std::vector<Instr> kept;
    for (const auto& in : f.blocks[b].instrs) {
      if (in.kind == Instr::Kind::kSync && running.contains(in.var)) {
        ++r.removed;
        continue;
      }
      apply(in, running, alias);
      kept.push_back(in);
    }
    r.rewritten.blocks[b].instrs = std::move(kept);
  }
  return r;
}

Execution interpret(const IrFunction& f, const std::map<Var, int>& binding,
                    std::uint64_t path_seed, std::size_t max_blocks) {
  const auto succs = f.successors();
  std::mt19937_64 rng(path_seed);
  Execution ex;
  std::set<int> synced;
  std::size_t b = 0;
  for (std::size_t steps = 0;; ++steps) {
    if (steps == max_blocks) {
      ex.truncated = true;
      break;
    }
    for (const auto& in : f.blocks[b].instrs) {
      switch (in.kind) {
        case Instr::Kind::kSync:
          ++ex.roundtrips;
          synced.insert(binding.at(in.var));
          break;
        case Instr::Kind::kAsync:
          synced.erase(binding.at(in.var));
          break;
        case Instr::Kind::kCall:
          ex.observations.push_back(synced);
          // An arbitrary callee may log calls anywhere; the flagged ones
          // cannot write.
          if (!in.readonly && !in.readnone) synced.clear();
          break;
        case Instr::Kind::kPure:
          break;
      }
    }
    if (succs[b].empty()) break;
    b = succs[b][rng() % succs[b].size()];
  }
  ex.observations.push_back(synced);
  return ex;
}

std::map<Var, int> random_binding(const IrFunction& f, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const AliasInfo alias = AliasInfo::of(f);
  std::map<Var, int> out;
  int next = 0;
  for (const Var& v : f.variables()) {
    std::vector<int> options{next};
    for (int h = 0; h < next; ++h) {
      const bool ok = std::all_of(out.begin(), out.end(), [&](const auto& kv) {
        return kv.second != h || alias.may_alias(kv.first, v);
      });
      if (ok) options.push_back(h);
    }
    const int h = options[rng() % options.size()];
    if (h == next) ++next;
    out[v] = h;
  }
  return out;
}

IrFunction random_function(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const std::vector<Var> vars = {"a", "b", "c", "d"};
  IrFunction f;
  f.name = "r" + std::to_string(seed);
  const std::size_t n = 1 + pick(6);
  for (std::size_t i = 0; i < n; ++i) f.blocks.push_back(BasicBlock{"B" + std::to_string(i), {}, {}});
  for (std::size_t i = 0; i < n; ++i) {
    auto& b = f.blocks[i];
    for (std::size_t k = 0, len = pick(6); k < len; ++k) {
      const Var& v = vars[pick(vars.size())];
      switch (pick(8)) {
        case 0: case 1: case 2: b.instrs.push_back(Instr::sync(v)); break;
        case 3: case 4: b.instrs.push_back(Instr::async(v)); break;
        case 5: b.instrs.push_back(Instr::call(pick(2) == 0, false)); break;
        case 6: b.instrs.push_back(Instr::call(false, pick(2) == 0)); break;
        default: b.instrs.push_back(Instr::pure()); break;
      }
    }
    if (n > 1) {
      for (std::size_t k = 0, outs = pick(3); k < outs; ++k) {
        const std::string s = f.blocks[1 + pick(n - 1)].id;
        if (std::find(b.succs.begin(), b.succs.end(), s) == b.succs.end()) b.succs.push_back(s);
      }
    }
  }
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = i + 1; j < vars.size(); ++j) {
      if (pick(3) == 0) f.distinct.insert({vars[i], vars[j]});
    }
  }
  return f;
}

}  // namespace qs::opt
