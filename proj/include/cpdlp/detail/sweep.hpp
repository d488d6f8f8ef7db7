#pragma once

// Event-driven sweeps over an EventLog. Streams are attached to the sweep
// when a vertex joins the current set, so the work is proportional to the
// events touching the infected set rather than to the window.

#include <algorithm>
#include <optional>
#include <queue>
#include <unordered_map>
#include <vector>

#include "cpdlp/engine.hpp"
#include "cpdlp/error.hpp"

namespace cpdlp::detail {

class MemberSet {
 public:
  explicit MemberSet(const Window& w) : w_(w), pos_(static_cast<std::size_t>(w.size()), -1) {}

  bool has(Vertex x) const { return w_.contains(x) && pos_[idx(x)] >= 0; }
  void insert(Vertex x) {
    auto& p = pos_[idx(x)];
    if (p >= 0) return;
    p = static_cast<std::int64_t>(members_.size());
    members_.push_back(x);
  }
  void erase(Vertex x) {
    auto& p = pos_[idx(x)];
    if (p < 0) return;
    Vertex last = members_.back();
    members_[static_cast<std::size_t>(p)] = last;
    pos_[idx(last)] = p;
    members_.pop_back();
    p = -1;
  }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  VertexSet sorted() const {
    VertexSet s = members_;
    std::sort(s.begin(), s.end());
    return s;
  }

 private:
  std::size_t idx(Vertex x) const { return static_cast<std::size_t>(x - w_.lo); }
  Window w_;
  std::vector<std::int64_t> pos_;
  VertexSet members_;
};

struct Slot {
  bool is_edge = false;
  Edge edge;
  Vertex vertex = 0;
  const std::vector<double>* times = nullptr;
  bool active = false;
};

struct Entry {
  double t;
  std::uint32_t slot;
  std::uint32_t idx;
};

struct EarlierFirst {
  bool operator()(const Entry& a, const Entry& b) const {
    return a.t != b.t ? a.t > b.t : a.slot > b.slot;
  }
};

struct LaterFirst {
  bool operator()(const Entry& a, const Entry& b) const {
    return a.t != b.t ? a.t < b.t : a.slot > b.slot;
  }
};

struct SweepResult {
  std::vector<VertexSet> samples;
  std::optional<double> extinction;
  std::uint64_t suppressed = 0;
  double occupation = 0.0;
  std::size_t max_size = 0;
  VertexSet final_set;
};

class SlotTable {
 public:
  explicit SlotTable(const Window& w) : w_(w), rec_(static_cast<std::size_t>(w.size()), -1) {}

  std::uint32_t vertex_slot(Vertex x, const EventLog& log) {
    auto& r = rec_[static_cast<std::size_t>(x - w_.lo)];
    if (r < 0) {
      r = static_cast<std::int64_t>(slots_.size());
      Slot s;
      s.vertex = x;
      s.times = &log.recovery_times(x);
      slots_.push_back(s);
    }
    return static_cast<std::uint32_t>(r);
  }
  std::uint32_t edge_slot(const Edge& e, const EventLog& log) {
    auto it = edges_.find(e);
    if (it != edges_.end()) return it->second;
    auto id = static_cast<std::uint32_t>(slots_.size());
    Slot s;
    s.is_edge = true;
    s.edge = e;
    s.times = &log.infection_times(e);
    slots_.push_back(s);
    edges_.emplace(e, id);
    return id;
  }
  Slot& operator[](std::uint32_t i) { return slots_[i]; }

 private:
  Window w_;
  std::vector<std::int64_t> rec_;
  std::vector<Slot> slots_;
  std::unordered_map<Edge, std::uint32_t, EdgeHash> edges_;
};

// Forward evolution on [t0, t1] from `initial`. Infection targets must lie in
// `w` (a sub-window of the log window); gate(e, t) says whether an infection
// event on e at time t may be used. Samples must be sorted and lie in [t0, t1].
template <class Gate>
SweepResult forward_sweep(const VertexSet& initial, const EventLog& log, const Window& w, double t0, double t1,
                          const std::vector<double>& samples, Gate&& gate, bool tally = true) {
  SweepResult res;
  MemberSet cur(w);
  SlotTable slots(w);
  std::priority_queue<Entry, std::vector<Entry>, EarlierFirst> heap;
  const Window& lw = log.window();

  auto push_from = [&](std::uint32_t id, double t) {
    Slot& s = slots[id];
    auto it = std::upper_bound(s.times->begin(), s.times->end(), t);
    if (it == s.times->end()) return;
    auto idx = static_cast<std::uint32_t>(it - s.times->begin());
    heap.push({*it, id, idx});
    s.active = true;
  };
  auto activate = [&](Vertex x, double t) {
    cur.insert(x);
    res.max_size = std::max(res.max_size, cur.size());
    push_from(slots.vertex_slot(x, log), t);
    for (std::int64_t k = 1; k <= w.cutoff; ++k) {
      for (Vertex y : {x - k, x + k}) {
        Edge e(x, y);
        if (!lw.covers(e)) continue;
        std::uint32_t id = slots.edge_slot(e, log);
        if (!slots[id].active) push_from(id, t);
      }
    }
  };

  for (Vertex x : initial) {
    if (!w.contains(x)) throw WindowError("initial vertex outside the window");
    activate(x, t0);
  }

  std::size_t si = 0;
  double last = t0;
  auto flush_samples = [&](double upto) {
    while (si < samples.size() && samples[si] < upto) {
      res.samples.push_back(cur.sorted());
      ++si;
    }
  };

  bool extinct = cur.empty();
  if (extinct) res.extinction = t0;
  while (!extinct && !heap.empty()) {
    Entry en = heap.top();
    if (en.t > t1) break;
    heap.pop();
    flush_samples(en.t);
    res.occupation += static_cast<double>(cur.size()) * (en.t - last);
    last = en.t;
    Slot& s = slots[en.slot];
    if (!s.is_edge) {
      cur.erase(s.vertex);
      s.active = false;
      if (cur.empty()) {
        extinct = true;
        res.extinction = en.t;
      }
      continue;
    }
    const Edge e = s.edge;
    bool ia = cur.has(e.a), ib = cur.has(e.b);
    if (!ia && !ib) {
      s.active = false;
      continue;
    }
    if (ia != ib) {
      Vertex target = ia ? e.b : e.a;
      if (w.contains(target)) {
        if (gate(e, en.t)) activate(target, en.t);
      } else if (tally && gate(e, en.t)) {
        ++res.suppressed;
      }
    }
    Slot& s2 = slots[en.slot];
    if (en.idx + 1 < s2.times->size())
      heap.push({(*s2.times)[en.idx + 1], en.slot, en.idx + 1});
    else
      s2.active = false;
  }
  if (!extinct) res.occupation += static_cast<double>(cur.size()) * (t1 - last);
  flush_samples(t1 + 1.0);
  while (res.samples.size() < samples.size()) res.samples.push_back({});
  res.final_set = cur.sorted();
  return res;
}

// Reverse scan from A x {t} down to time 0; returns the set of y with a gated
// path (y, 0) -> A x {t}.
template <class Gate>
SweepResult backward_sweep(const VertexSet& A, const EventLog& log, const Window& w, double t, Gate&& gate,
                           bool tally = true) {
  SweepResult res;
  MemberSet cur(w);
  SlotTable slots(w);
  std::priority_queue<Entry, std::vector<Entry>, LaterFirst> heap;
  const Window& lw = log.window();

  // Latest event strictly before s (inclusive at the starting time).
  auto push_before = [&](std::uint32_t id, double s, bool inclusive) {
    Slot& sl = slots[id];
    auto it = inclusive ? std::upper_bound(sl.times->begin(), sl.times->end(), s)
                        : std::lower_bound(sl.times->begin(), sl.times->end(), s);
    if (it == sl.times->begin()) return;
    --it;
    heap.push({*it, id, static_cast<std::uint32_t>(it - sl.times->begin())});
    sl.active = true;
  };
  auto activate = [&](Vertex x, double s, bool inclusive) {
    cur.insert(x);
    res.max_size = std::max(res.max_size, cur.size());
    push_before(slots.vertex_slot(x, log), s, inclusive);
    for (std::int64_t k = 1; k <= w.cutoff; ++k) {
      for (Vertex y : {x - k, x + k}) {
        Edge e(x, y);
        if (!lw.covers(e)) continue;
        std::uint32_t id = slots.edge_slot(e, log);
        if (!slots[id].active) push_before(id, s, inclusive);
      }
    }
  };

  for (Vertex x : A) {
    if (!w.contains(x)) throw WindowError("target vertex outside the window");
    activate(x, t, true);
  }
  while (!cur.empty() && !heap.empty()) {
    Entry en = heap.top();
    heap.pop();
    Slot& s = slots[en.slot];
    if (!s.is_edge) {
      cur.erase(s.vertex);
      s.active = false;
      continue;
    }
    const Edge e = s.edge;
    bool ia = cur.has(e.a), ib = cur.has(e.b);
    if (!ia && !ib) {
      s.active = false;
      continue;
    }
    if (ia != ib) {
      Vertex other = ia ? e.b : e.a;
      if (w.contains(other)) {
        if (gate(e, en.t)) activate(other, en.t, false);
      } else if (tally && gate(e, en.t)) {
        ++res.suppressed;
      }
    }
    Slot& s2 = slots[en.slot];
    if (en.idx > 0)
      heap.push({(*s2.times)[en.idx - 1], en.slot, en.idx - 1});
    else
      s2.active = false;
  }
  res.final_set = cur.sorted();
  return res;
}

}  // namespace cpdlp::detail
