#include "qs/bench/coordination.hpp"

#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <stdexcept>

#include "qs/channels/parker.hpp"

namespace qs::bench {

namespace {

struct Actor {
  explicit Actor(Client c) : client(std::move(c)) {}
  Client client;
};

// Starts body(i, client) on n fresh actor handlers and returns once all of
// them have finished.
void run_actors(Runtime& rt, unsigned n, const std::function<void(unsigned, Client&)>& body) {
  std::vector<Handler<Actor>> actors;
  actors.reserve(n);
  for (unsigned i = 0; i < n; ++i) actors.push_back(rt.spawn<Actor>(Client(rt)));
  Client main(rt);
  for (unsigned i = 0; i < n; ++i) {
    auto s = main.reserve(actors[i]);
    s.call([&body, i](Actor& a) { body(i, a.client); });
    s.end();
  }
  for (auto& a : actors) {
    auto s = main.reserve(a);
    s.query([](Actor&) { return 0; });
    s.end();
  }
}

template <class T, class F>
auto read(Runtime& rt, const Handler<T>& h, F f) {
  Client c(rt);
  auto s = c.reserve(h);
  auto out = s.query(f);
  s.end();
  return out;
}

}  // namespace

std::uint64_t mutex(Runtime& rt, unsigned n, unsigned m) {
  struct Counter {
    std::uint64_t value = 0;
  };
  const auto res = rt.spawn<Counter>();
  run_actors(rt, n, [&](unsigned, Client& c) {
    for (unsigned k = 0; k < m; ++k) {
      auto s = c.reserve(res);
      s.call([](Counter& x) { ++x.value; });
      s.end();
    }
  });
  return read(rt, res, [](Counter& x) { return x.value; });
}

ProdConsResult prodcons(Runtime& rt, unsigned n, unsigned m) {
  struct Buffer {
    std::deque<unsigned> items;
  };
  const auto buf = rt.spawn<Buffer>();
  std::vector<ProdConsResult> per(n);
  run_actors(rt, 2 * n, [&](unsigned i, Client& c) {
    if (i < n) {
      for (unsigned v = 1; v <= m; ++v) {
        auto s = c.reserve(buf);
        s.call([v](Buffer& b) { b.items.push_back(v); });
        s.end();
      }
      return;
    }
    ProdConsResult& mine = per[i - n];
    mine.histogram.assign(m + 1, 0);
    while (mine.count < m) {
      auto s = c.reserve(buf);
      const auto got = s.query([](Buffer& b) -> std::optional<unsigned> {
        if (b.items.empty()) return std::nullopt;
        const unsigned v = b.items.front();
        b.items.pop_front();
        return v;
      });
      s.end();
      if (!got) {
        ++mine.empty_polls;
        yield_now();
        continue;
      }
      ++mine.histogram.at(*got);
      ++mine.count;
      mine.sum += *got;
    }
  });
  ProdConsResult total;
  total.histogram.assign(m + 1, 0);
  for (const auto& p : per) {
    for (unsigned v = 0; v <= m; ++v) total.histogram[v] += p.histogram[v];
    total.count += p.count;
    total.sum += p.sum;
    total.empty_polls += p.empty_polls;
  }
  return total;
}

std::uint64_t condition(Runtime& rt, unsigned n, unsigned m) {
  // A worker whose parity does not match parks on its own event; every
  // increment wakes one parked worker of the parity it just produced.
  struct Value {
    std::uint64_t v = 0;
    std::deque<Event*> parked[2];
  };
  const auto val = rt.spawn<Value>();
  std::vector<std::unique_ptr<Event>> events;
  for (unsigned i = 0; i < 2 * n; ++i) events.push_back(std::make_unique<Event>());
  // Actors [0, n) wait for even values, [n, 2n) for odd ones.
  run_actors(rt, 2 * n, [&](unsigned i, Client& c) {
    const std::size_t parity = i < n ? 0 : 1;
    Event* ev = events[i].get();
    for (unsigned done = 0; done < m;) {
      auto s = c.reserve(val);
      const bool mine = s.query([parity, ev](Value& x) {
        if (x.v % 2 == parity) return true;
        x.parked[parity].push_back(ev);
        return false;
      });
      const bool more = mine && done + 1 < m;
      if (mine) {
        s.call([parity, ev, more](Value& x) {
          auto& q = x.parked[++x.v % 2];
          if (!q.empty()) {
            q.front()->signal();
            q.pop_front();
          }
          // The value now has the other parity, so a retry would only fail.
          if (more) x.parked[parity].push_back(ev);
        });
      }
      s.end();
      if (mine) ++done;
      if (!mine || more) ev->wait();
    }
  });
  return read(rt, val, [](Value& x) { return x.v; });
}

namespace {

struct RingNode {
  explicit RingNode(Client c) : client(std::move(c)) {}
  Client client;
  unsigned id = 0;
  Handler<RingNode> next;
  std::promise<unsigned>* done = nullptr;
};

void take(RingNode& me, std::uint64_t left) {
  if (left == 0) {
    me.done->set_value(me.id);
    return;
  }
  auto s = me.client.reserve(me.next);
  s.call([left](RingNode& n) { take(n, left - 1); });
  s.end();
}

}  // namespace

unsigned threadring(Runtime& rt, unsigned ring, std::uint64_t nt) {
  if (ring < 2) throw std::invalid_argument("threadring: ring needs at least 2 workers");
  std::promise<unsigned> done;
  std::vector<Handler<RingNode>> nodes;
  nodes.reserve(ring);
  for (unsigned i = 0; i < ring; ++i) nodes.push_back(rt.spawn<RingNode>(Client(rt)));
  Client main(rt);
  for (unsigned i = 0; i < ring; ++i) {
    auto s = main.reserve(nodes[i]);
    s.call([i, ring, &nodes, &done](RingNode& n) {
      n.id = i + 1;
      n.next = nodes[(i + 1) % ring];
      n.done = &done;
    });
    s.end();
  }
  auto result = done.get_future();
  {
    auto s = main.reserve(nodes[0]);
    s.call([nt](RingNode& n) { take(n, nt); });
    s.end();
  }
  const unsigned holder = result.get();
  // Break the reference cycle through `next`.
  for (auto& node : nodes) {
    auto s = main.reserve(node);
    s.call([](RingNode& n) { n.next = {}; });
    s.end();
  }
  return holder;
}

unsigned threadring_oracle(unsigned ring, std::uint64_t nt) {
  unsigned holder = 1;
  for (std::uint64_t k = 0; k < nt; ++k) holder = holder % ring + 1;
  return holder;
}

Colour complement(Colour a, Colour b) noexcept {
  if (a == b) return a;
  return static_cast<Colour>(3 - static_cast<int>(a) - static_cast<int>(b));
}

std::string_view to_string(Colour c) noexcept {
  switch (c) {
    case Colour::kBlue: return "blue";
    case Colour::kRed: return "red";
    case Colour::kYellow: return "yellow";
  }
  return "?";
}

std::uint64_t ChameneosResult::tally() const noexcept {
  std::uint64_t t = 0;
  for (auto m : meetings) t += m;
  return t;
}

ChameneosResult chameneos(Runtime& rt, std::uint64_t nc, const std::vector<Colour>& initial) {
  if (initial.size() < 2) throw std::invalid_argument("chameneos: need at least 2 creatures");
  struct Met {
    Colour colour;
    unsigned partner;
  };
  struct Place {
    std::uint64_t left = 0;
    std::optional<unsigned> waiting;
    Colour waiting_colour = Colour::kBlue;
    std::vector<std::optional<Met>> mailbox;
  };
  const unsigned n = static_cast<unsigned>(initial.size());
  Place init;
  init.left = nc;
  init.mailbox.resize(n);
  const auto place = rt.spawn<Place>(std::move(init));

  ChameneosResult out;
  out.meetings.assign(n, 0);
  out.colours = initial;
  std::vector<std::uint64_t> self(n, 0);

  enum class Outcome { kStop, kWait, kMet };
  run_actors(rt, n, [&](unsigned i, Client& c) {
    Colour& colour = out.colours[i];
    for (;;) {
      Met met{};
      auto s = c.reserve(place);
      const Outcome o = s.query([&](Place& p) {
        if (p.left == 0) return Outcome::kStop;
        if (!p.waiting) {
          p.waiting = i;
          p.waiting_colour = colour;
          return Outcome::kWait;
        }
        const unsigned j = *p.waiting;
        p.waiting.reset();
        --p.left;
        const Colour next = complement(colour, p.waiting_colour);
        p.mailbox[j] = Met{next, i};
        met = Met{next, j};
        return Outcome::kMet;
      });
      s.end();
      if (o == Outcome::kStop) return;
      if (o == Outcome::kWait) {
        for (bool stop = false; !stop;) {
          auto w = c.reserve(place);
          const auto r = w.query([&](Place& p) -> std::optional<Outcome> {
            if (p.mailbox[i]) {
              met = *p.mailbox[i];
              p.mailbox[i].reset();
              return Outcome::kMet;
            }
            if (p.left == 0) {
              p.waiting.reset();
              return Outcome::kStop;
            }
            return std::nullopt;
          });
          w.end();
          if (!r) {
            yield_now();
            continue;
          }
          if (*r == Outcome::kStop) return;
          stop = true;
        }
      }
      colour = met.colour;
      ++out.meetings[i];
      if (met.partner == i) ++self[i];
    }
  });
  for (auto s : self) out.self_meetings += s;
  return out;
}

QueryLoopResult queryloop(Runtime& rt, std::uint64_t nq) {
  struct Cell {
    std::int64_t v = 0;
  };
  const auto cell = rt.spawn<Cell>();
  QueryLoopResult r;
  Client c(rt);
  auto s = c.reserve(cell);
  s.call([](Cell& x) { x.v = 1; });
  for (std::uint64_t k = 0; k < nq; ++k) {
    r.sum += s.query([](Cell& x) { return x.v; });
    ++r.queries;
  }
  s.end();
  return r;
}

}  // namespace qs::bench
