#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <queue>
#include <vector>

#include "pangenome/birth_death.hpp"
#include "pangenome/errors.hpp"
#include "pangenome/params.hpp"
#include "pangenome/rng.hpp"
#include "pangenome/stats.hpp"

namespace pangenome {

// ---------------------------------------------------------------------------
// Event log of one gene's ancestral graph.  Time runs backwards from the
// sample (time 0); lines are dense integers in birth order, the first n being
// the sampled individuals.  A line keeps its identifier through a split (the
// host continues; only the incoming branch is a new line), so every line has
// exactly one birth and at most one death.
// ---------------------------------------------------------------------------

enum class EventKind : std::uint8_t { kCoalescence, kLoss, kSplit };

struct AgtgEvent {
  double time = 0.0;
  EventKind kind = EventKind::kLoss;
  std::int32_t a = -1;  // coalescence: one line / loss: the line / split: host
  std::int32_t b = -1;  // coalescence: other line / split: incoming line
  std::int32_t m = -1;  // coalescence: merged line
};

struct LineSpan {
  double birth = 0.0;
  double death = 0.0;
};

struct AgtgGraph {
  int n_initial = 0;
  std::vector<AgtgEvent> events;  // strictly increasing in time
  std::vector<LineSpan> lines;    // per line id
  double total_length = 0.0;      // accumulated during construction

  void clear() {
    n_initial = 0;
    events.clear();
    lines.clear();
    total_length = 0.0;
  }
};

// Recompute the length (sum of line lifespans) with compensated summation.
inline double graph_length(const AgtgGraph& g) {
  double sum = 0.0, comp = 0.0;
  for (const LineSpan& s : g.lines) {
    const double x = s.death - s.birth;
    const double t = sum + x;
    comp += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

struct GraphPoint {
  std::int32_t line = -1;
  double time = 0.0;
};

// Uniform draw from the length measure of the graph.
inline GraphPoint sample_uniform_point(const AgtgGraph& g, Rng& rng) {
  const double u = rng.uniform() * graph_length(g);
  double acc = 0.0;
  for (std::size_t i = 0; i < g.lines.size(); ++i) {
    const double span = g.lines[i].death - g.lines[i].birth;
    if (u < acc + span || i + 1 == g.lines.size()) {
      const double offset = std::clamp(u - acc, 0.0, span);
      return {static_cast<std::int32_t>(i), g.lines[i].birth + offset};
    }
    acc += span;
  }
  return {0, 0.0};  // unreachable for non-empty graphs
}

struct GenePresence {
  std::vector<std::uint8_t> flags;  // one per sampled individual
  GraphPoint gain_point;
};

// Which sampled individuals carry a gene gained at `e`: individual i carries
// it iff a time-increasing path runs from initial line i to e.  Walking the
// event log backwards, a line inherits reachability from the lines it feeds
// into: at a coalescence both children see the merged line, at a split the
// host sees the incoming branch.  A loss feeds nowhere.
inline GenePresence presence_from_gain_point(const AgtgGraph& g, GraphPoint e) {
  std::vector<std::uint8_t> mark(g.lines.size(), 0);
  mark[static_cast<std::size_t>(e.line)] = 1;
  for (auto it = g.events.rbegin(); it != g.events.rend(); ++it) {
    switch (it->kind) {
      case EventKind::kCoalescence: {
        const std::uint8_t mm = mark[static_cast<std::size_t>(it->m)];
        mark[static_cast<std::size_t>(it->a)] |= mm;
        mark[static_cast<std::size_t>(it->b)] |= mm;
        break;
      }
      case EventKind::kSplit:
        mark[static_cast<std::size_t>(it->a)] |=
            mark[static_cast<std::size_t>(it->b)];
        break;
      case EventKind::kLoss:
        break;
    }
  }
  GenePresence p;
  p.gain_point = e;
  p.flags.assign(mark.begin(), mark.begin() + g.n_initial);
  return p;
}

// Plain text event log, one event per line: `time kind args`.
//   t coalescence a b m   (lines a and b merge into line m)
//   t loss l
//   t split l x           (line l continues; x is the incoming line)
inline void write_event_log(const AgtgGraph& g, std::ostream& out) {
  for (const AgtgEvent& e : g.events) {
    switch (e.kind) {
      case EventKind::kCoalescence:
        out << e.time << " coalescence " << e.a << ' ' << e.b << ' ' << e.m
            << '\n';
        break;
      case EventKind::kLoss:
        out << e.time << " loss " << e.a << '\n';
        break;
      case EventKind::kSplit:
        out << e.time << " split " << e.a << ' ' << e.b << '\n';
        break;
    }
  }
}

inline constexpr long kDefaultLineCap = 1'000'000;

namespace detail {
inline double positive_exponential(Rng& rng, double rate, double tau) {
  // Regenerate draws that would not advance the clock, so event times are
  // strictly increasing.
  for (;;) {
    const double dt = rng.exponential(rate);
    if (dt > 0.0 && tau + dt > tau) return dt;
  }
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Single-gene graph: starting from n lines, each unordered pair coalesces at
// rate 1, each line is lost at rate rho/2 and splits at rate gamma/2, until
// no line remains.  The gain point is then uniform on the length measure and
// presence follows by reachability.
// ---------------------------------------------------------------------------

struct SingleGeneSample {
  AgtgGraph graph;
  GenePresence presence;
};

inline AgtgGraph sample_single_gene_graph(const ValidatedParams& p, int n,
                                          Rng& rng,
                                          long line_cap = kDefaultLineCap) {
  if (n < 1) throw RangeError("n", "needs n >= 1");
  AgtgGraph g;
  g.n_initial = n;
  std::vector<std::int32_t> alive;
  alive.reserve(static_cast<std::size_t>(n) + 8);
  for (int i = 0; i < n; ++i) {
    g.lines.push_back({0.0, 0.0});
    alive.push_back(i);
  }
  double tau = 0.0;
  double len = 0.0, len_comp = 0.0;
  const double rho = p.rho(), gamma = p.gamma();
  while (!alive.empty()) {
    const double m = static_cast<double>(alive.size());
    const double rate_coal = 0.5 * m * (m - 1.0);
    const double rate_loss = 0.5 * rho * m;
    const double rate_split = 0.5 * gamma * m;
    const double total = rate_coal + rate_loss + rate_split;
    const double dt = detail::positive_exponential(rng, total, tau);
    tau += dt;
    {
      const double x = m * dt;
      const double t = len + x;
      len_comp += std::fabs(len) >= x ? (len - t) + x : (x - t) + len;
      len = t;
    }
    const double pick = rng.uniform() * total;
    if (pick < rate_coal) {
      const std::size_t ia = rng.below(alive.size());
      std::size_t ib = rng.below(alive.size() - 1);
      if (ib >= ia) ++ib;
      const std::int32_t la = alive[ia], lb = alive[ib];
      const auto lm = static_cast<std::int32_t>(g.lines.size());
      g.lines[static_cast<std::size_t>(la)].death = tau;
      g.lines[static_cast<std::size_t>(lb)].death = tau;
      g.lines.push_back({tau, tau});
      g.events.push_back({tau, EventKind::kCoalescence, la, lb, lm});
      const std::size_t hi = std::max(ia, ib), lo = std::min(ia, ib);
      alive[hi] = alive.back();
      alive.pop_back();
      alive[lo] = alive.back();
      alive.pop_back();
      alive.push_back(lm);
    } else if (pick < rate_coal + rate_loss) {
      const std::size_t i = rng.below(alive.size());
      const std::int32_t l = alive[i];
      g.lines[static_cast<std::size_t>(l)].death = tau;
      g.events.push_back({tau, EventKind::kLoss, l, -1, -1});
      alive[i] = alive.back();
      alive.pop_back();
    } else {
      const std::size_t i = rng.below(alive.size());
      const std::int32_t host = alive[i];
      const auto lx = static_cast<std::int32_t>(g.lines.size());
      g.lines.push_back({tau, tau});
      g.events.push_back({tau, EventKind::kSplit, host, lx, -1});
      alive.push_back(lx);
    }
    if (static_cast<long>(alive.size()) > line_cap)
      throw ResourceLimit("single-gene graph: alive-line cap exceeded");
  }
  g.total_length = len + len_comp;
  return g;
}

inline SingleGeneSample sample_single_gene_agtg(
    const ValidatedParams& p, int n, Rng& rng,
    long line_cap = kDefaultLineCap) {
  SingleGeneSample s;
  s.graph = sample_single_gene_graph(p, n, rng, line_cap);
  s.presence =
      presence_from_gain_point(s.graph, sample_uniform_point(s.graph, rng));
  return s;
}

// ---------------------------------------------------------------------------
// Two-gene graph.  Lines carry gene 1 only, both genes, or gene 2 only; any
// unordered pair coalesces at rate 1 (an only-1 with an only-2 merges into a
// both-line), a line loses each gene it carries at rate rho/2 (a both-line
// degrades, a single-gene line dies), and each carried gene splits off a new
// single-gene line at rate gamma/2.  Returns the total lengths of the gene-1-
// and gene-2-carrying line sets at absorption.
// ---------------------------------------------------------------------------

struct TwoGeneState {
  long x = 0;  // lines carrying only gene 1
  long y = 0;  // lines carrying both genes
  long z = 0;  // lines carrying only gene 2
};

struct TwoGeneLengths {
  double l1 = 0.0;
  double l2 = 0.0;
};

inline TwoGeneLengths sample_two_gene_agtg(const ValidatedParams& p,
                                           TwoGeneState init, Rng& rng,
                                           long line_cap = kDefaultLineCap) {
  if (init.x < 0 || init.y < 0 || init.z < 0 || init.x + init.y + init.z < 1)
    throw RangeError("init", "needs x,y,z >= 0 with x+y+z >= 1");
  long x = init.x, y = init.y, z = init.z;
  const double rho = p.rho(), gamma = p.gamma();
  double tau = 0.0;
  double l1 = 0.0, c1 = 0.0, l2 = 0.0, c2 = 0.0;
  auto add = [](double& sum, double& comp, double v) {
    const double t = sum + v;
    comp += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  };
  while (x + y + z > 0) {
    const long m = x + y + z;
    const double md = static_cast<double>(m);
    const double rate_coal = 0.5 * md * (md - 1.0);
    const double rate_loss =
        0.5 * rho * static_cast<double>(x + z) + rho * static_cast<double>(y);
    const double rate_split = 0.5 * gamma * static_cast<double>(x + z) +
                              gamma * static_cast<double>(y);
    const double total = rate_coal + rate_loss + rate_split;
    const double dt = detail::positive_exponential(rng, total, tau);
    tau += dt;
    add(l1, c1, static_cast<double>(x + y) * dt);
    add(l2, c2, static_cast<double>(y + z) * dt);
    const double pick = rng.uniform() * total;
    if (pick < rate_coal) {
      // classify the two merging lines by position in (only1 | both | only2)
      const long i =
          static_cast<long>(rng.below(static_cast<std::uint64_t>(m)));
      long j = static_cast<long>(rng.below(static_cast<std::uint64_t>(m - 1)));
      if (j >= i) ++j;
      const int ti = i < x ? 0 : (i < x + y ? 1 : 2);
      const int tj = j < x ? 0 : (j < x + y ? 1 : 2);
      if (ti == 0 && tj == 0) {
        --x;
      } else if (ti == 2 && tj == 2) {
        --z;
      } else if ((ti == 0 && tj == 2) || (ti == 2 && tj == 0)) {
        --x;
        --z;
        ++y;
      } else if (ti == 1 && tj == 1) {
        --y;
      } else if (ti == 0 || tj == 0) {  // only1 with both
        --x;
      } else {  // only2 with both
        --z;
      }
    } else if (pick < rate_coal + rate_loss) {
      const double lp = (pick - rate_coal) / (0.5 * rho);
      // weights: x (only1 dies), z (only2 dies), y (both loses gene 1),
      // y (both loses gene 2); final branches guard against a boundary
      // rounding of the division
      if (lp < static_cast<double>(x)) {
        --x;
      } else if (lp < static_cast<double>(x + z)) {
        --z;
      } else if (lp < static_cast<double>(x + z + y)) {
        --y;
        ++z;
      } else if (y > 0) {
        --y;
        ++x;
      } else if (z > 0) {
        --z;
      } else {
        --x;
      }
    } else {
      const double sp = (pick - rate_coal - rate_loss) / (0.5 * gamma);
      if (sp < static_cast<double>(x)) {
        ++x;
      } else if (sp < static_cast<double>(x + z)) {
        ++z;
      } else if (sp < static_cast<double>(x + z + y)) {
        ++x;
      } else {
        ++z;
      }
    }
    if (x + y + z > line_cap)
      throw ResourceLimit("two-gene graph: alive-line cap exceeded");
  }
  return {l1 + c1, l2 + c2};
}

// ---------------------------------------------------------------------------
// Coupled graphs for the whole pangenome.  The clonal genealogy is built
// first; each gene's graph then rides the union of everything built so far
// (inheriting its coalescence times) and adds its own loss and split events,
// with fresh rate-1 coalescences only for pairs involving at least one line
// outside the union.  Gene k exists iff the k-th gain time T_k (a Poisson
// process at rate theta/2) is at most the length of graph k, in which case
// the gain point is uniform on that graph and carriers follow by
// reachability.
//
// The union is stored once as a pool of segments; a segment dies either by a
// shared coalescence (with a successor segment) or by some gene's loss event,
// past which the lineage it stands for is re-materialized lazily (the `cont`
// pointer) when a later gene walks through.  A new line merging into the
// interior of an existing segment cuts it, so segments are only ever entered
// at their birth, which keeps reachability a pure event-log computation.
// ---------------------------------------------------------------------------

struct StoppingPolicy {
  double epsilon = 1e-6;  // bound on the expected number of missed genes
  long line_cap = kDefaultLineCap;
  long graph_cap = 10'000'000;
};

struct GainEvent {
  double time = 0.0;
  bool accepted = false;
};

struct CoupledAgtgSample {
  std::vector<Genome> genomes;
  long graphs_generated = 0;
  std::vector<GainEvent> gain_events;
  double epsilon = 0.0;                // the policy's epsilon
  double expected_missed_bound = 0.0;  // bound achieved at stopping
  double stop_time = 0.0;              // gain-time threshold used
  std::vector<AgtgGraph> graphs;       // per-gene logs, when collected
};

class PangenomeSampler {
 public:
  PangenomeSampler(const ValidatedParams& p, int n, StoppingPolicy policy = {})
      : p_(p), n_(n), policy_(policy) {
    if (n < 1) throw RangeError("n", "needs n >= 1");
    if (p.theta() > 0.0) prepare_stopping_bound();
  }

  // Expected number of genes whose gain time exceeds t yet would land on
  // their graph: E[e^{sL}] e^{-st} r/(1-r) with r = theta/(theta+2s).
  double missed_bound_at(double t) const {
    return mgf_ * std::exp(-s_ * t) * r_ / (1.0 - r_);
  }
  double stop_time() const { return stop_time_; }

  CoupledAgtgSample sample(Rng& rng, bool collect_graphs = false) {
    CoupledAgtgSample out;
    out.genomes.assign(static_cast<std::size_t>(n_), Genome{});
    out.epsilon = policy_.epsilon;
    out.stop_time = stop_time_;
    if (p_.theta() <= 0.0) return out;

    segs_.clear();
    build_clonal_genealogy(rng);

    const double gain_rate = 0.5 * p_.theta();
    double gain_time = 0.0;
    GeneId next_gene = 1;
    while (true) {
      gain_time += rng.exponential(gain_rate);
      if (out.graphs_generated >= policy_.graph_cap)
        throw ResourceLimit("pangenome sampler: graph cap exceeded");
      walk_gene_graph(rng);
      ++out.graphs_generated;
      const double len = graph_length(scratch_);
      const bool accepted = gain_time <= len;
      out.gain_events.push_back({gain_time, accepted});
      if (collect_graphs) out.graphs.push_back(scratch_);
      if (accepted) {
        const GenePresence presence = presence_from_gain_point(
            scratch_, sample_uniform_point(scratch_, rng));
        for (int i = 0; i < n_; ++i)
          if (presence.flags[static_cast<std::size_t>(i)])
            out.genomes[static_cast<std::size_t>(i)].genes.push_back(
                next_gene);
        ++next_gene;
      } else if (gain_time > stop_time_) {
        out.expected_missed_bound = missed_bound_at(gain_time);
        break;
      }
    }
    return out;
  }

 private:
  enum DeathKind : std::int8_t { kOpen = 0, kShared = 1, kGeneLoss = 2 };

  struct Seg {
    double birth = 0.0;
    double death = std::numeric_limits<double>::infinity();
    std::int32_t succ = -1;     // shared coalescence successor
    std::int32_t partner = -1;  // the other segment dying in the same event
    std::int32_t cont = -1;     // lazy continuation past a gene-loss death
    DeathKind kind = kOpen;
  };

  struct Instance {
    std::int32_t line = -1;  // line id in the per-gene graph
    std::int32_t seg = -1;   // segment currently ridden
    bool is_new = false;     // true while the line is outside the union
  };

  struct Boundary {
    double time;
    std::int32_t seg;
    bool is_birth;
    bool operator>(const Boundary& o) const { return time > o.time; }
  };

  void prepare_stopping_bound() {
    const BirthDeathSpec spec{p_.gamma(), p_.rho()};
    const double mean_len = 2.0 * expected_hitting_time(spec, n_);
    double s = 0.25 * p_.rho();
    double f = std::nan("");
    while (s > 1e-12) {
      f = hitting_time_mgf(spec, n_, 2.0 * s);
      if (std::isfinite(f)) break;
      s *= 0.5;
    }
    if (!std::isfinite(f))
      throw NonConvergence("pangenome sampler: no usable exponential moment");
    s_ = s;
    mgf_ = f;
    r_ = p_.theta() / (p_.theta() + 2.0 * s);
    const double t_star =
        std::log(mgf_ * r_ / ((1.0 - r_) * policy_.epsilon)) / s_;
    stop_time_ = std::max(t_star, 10.0 * mean_len);
  }

  void build_clonal_genealogy(Rng& rng) {
    std::vector<std::int32_t> alive;
    initial_segs_.clear();
    for (int i = 0; i < n_; ++i) {
      segs_.push_back(Seg{});
      alive.push_back(i);
      initial_segs_.push_back(i);
    }
    double tau = 0.0;
    while (alive.size() > 1) {
      const double m = static_cast<double>(alive.size());
      tau += detail::positive_exponential(rng, 0.5 * m * (m - 1.0), tau);
      const std::size_t ia = rng.below(alive.size());
      std::size_t ib = rng.below(alive.size() - 1);
      if (ib >= ia) ++ib;
      const std::int32_t sa = alive[ia], sb = alive[ib];
      const auto sm = static_cast<std::int32_t>(segs_.size());
      Seg trunk;
      trunk.birth = tau;
      segs_.push_back(trunk);
      close_shared(sa, sb, sm, tau);
      const std::size_t hi = std::max(ia, ib), lo = std::min(ia, ib);
      alive[hi] = alive.back();
      alive.pop_back();
      alive[lo] = alive.back();
      alive.pop_back();
      alive.push_back(sm);
    }
  }

  void close_shared(std::int32_t a, std::int32_t b, std::int32_t succ,
                    double tau) {
    Seg& sa = segs_[static_cast<std::size_t>(a)];
    Seg& sb = segs_[static_cast<std::size_t>(b)];
    sa.death = tau;
    sa.kind = kShared;
    sa.succ = succ;
    sa.partner = b;
    sb.death = tau;
    sb.kind = kShared;
    sb.succ = succ;
    sb.partner = a;
  }

  std::int32_t make_seg(double birth) {
    const auto id = static_cast<std::int32_t>(segs_.size());
    Seg s;
    s.birth = birth;
    segs_.push_back(s);
    if (tracking_) alive_pos_.push_back(-1);
    return id;
  }

  // --- one gene's walk over the union -------------------------------------

  void walk_gene_graph(Rng& rng) {
    scratch_.clear();
    scratch_.n_initial = n_;
    instances_.clear();
    walk_start_ = static_cast<std::int32_t>(segs_.size());
    tracking_ = false;
    new_count_ = 0;

    for (int i = 0; i < n_; ++i) {
      scratch_.lines.push_back({0.0, 0.0});
      instances_.push_back(
          {i, initial_segs_[static_cast<std::size_t>(i)], false});
    }
    double tau = 0.0;
    const double rho = p_.rho(), gamma = p_.gamma();

    while (!instances_.empty()) {
      const double m = static_cast<double>(instances_.size());
      const double w = static_cast<double>(new_count_);
      const double rate_loss = 0.5 * rho * m;
      const double rate_split = 0.5 * gamma * m;
      const double rate_nn = 0.5 * w * (w - 1.0);
      const double rate_no =
          tracking_ ? w * static_cast<double>(alive_old_.size()) : 0.0;
      const double total = rate_loss + rate_split + rate_nn + rate_no;

      const double t_own = tau + detail::positive_exponential(rng, total, tau);
      const double t_break = next_breakpoint();
      if (t_break <= t_own) {
        tau = t_break;
        process_breakpoint(tau);
        continue;
      }
      tau = t_own;
      const double pick = rng.uniform() * total;
      if (pick < rate_loss) {
        own_loss(tau, rng);
      } else if (pick < rate_loss + rate_split) {
        own_split(tau, rng);
      } else if (pick < rate_loss + rate_split + rate_nn) {
        own_coal_new_new(tau, rng);
      } else {
        own_coal_new_old(tau, rng);
      }
      if (static_cast<long>(instances_.size()) > policy_.line_cap)
        throw ResourceLimit("pangenome sampler: alive-line cap exceeded");
    }
    scratch_.total_length = graph_length(scratch_);
  }

  double next_breakpoint() {
    double t = std::numeric_limits<double>::infinity();
    for (const Instance& ins : instances_)
      if (!ins.is_new)
        t = std::min(t, segs_[static_cast<std::size_t>(ins.seg)].death);
    if (tracking_) {
      prune_boundaries();
      if (!boundaries_.empty()) t = std::min(t, boundaries_.top().time);
    }
    return t;
  }

  void prune_boundaries() {
    while (!boundaries_.empty()) {
      const Boundary& b = boundaries_.top();
      const Seg& s = segs_[static_cast<std::size_t>(b.seg)];
      const bool stale = b.is_birth ? (s.birth != b.time) : (s.death != b.time);
      if (!stale) return;
      boundaries_.pop();
    }
  }

  void process_breakpoint(double tau) {
    // Union boundaries first: they only change the alive-partner set.
    if (tracking_) {
      prune_boundaries();
      while (!boundaries_.empty() && boundaries_.top().time <= tau) {
        const Boundary b = boundaries_.top();
        boundaries_.pop();
        if (b.is_birth) {
          alive_add(b.seg);
          const double death = segs_[static_cast<std::size_t>(b.seg)].death;
          if (std::isfinite(death)) boundaries_.push({death, b.seg, false});
        } else {
          alive_remove(b.seg);
        }
        prune_boundaries();
      }
    }
    // Ridden segment deaths at exactly this time.
    bool progressed = true;
    while (progressed) {
      progressed = false;
      for (std::size_t i = 0; i < instances_.size(); ++i) {
        if (instances_[i].is_new) continue;
        const std::int32_t sg = instances_[i].seg;
        if (segs_[static_cast<std::size_t>(sg)].death != tau) continue;
        progressed = true;
        if (segs_[static_cast<std::size_t>(sg)].kind == kShared) {
          const std::int32_t partner =
              segs_[static_cast<std::size_t>(sg)].partner;
          const std::int32_t succ = segs_[static_cast<std::size_t>(sg)].succ;
          std::size_t j = instances_.size();
          for (std::size_t k = 0; k < instances_.size(); ++k)
            if (k != i && instances_[k].seg == partner &&
                !instances_[k].is_new)
              j = k;
          if (j < instances_.size()) {
            merge_instances(i, j, succ, false, tau);
          } else {
            instances_[i].seg = succ;
          }
        } else {  // kGeneLoss: lineage continues past another gene's loss
          const std::int32_t cont = segs_[static_cast<std::size_t>(sg)].cont;
          if (cont >= 0) {
            instances_[i].seg = cont;
          } else {
            const std::int32_t c = make_seg(tau);
            segs_[static_cast<std::size_t>(sg)].cont = c;
            instances_[i].seg = c;
            instances_[i].is_new = true;
            ++new_count_;
            ensure_tracking(tau);
          }
        }
        break;  // containers changed; rescan
      }
    }
  }

  void own_loss(double tau, Rng& rng) {
    const std::size_t i = rng.below(instances_.size());
    const Instance ins = instances_[i];
    if (ins.is_new) {
      Seg& s = segs_[static_cast<std::size_t>(ins.seg)];
      s.death = tau;
      s.kind = kGeneLoss;
      --new_count_;
    }
    scratch_.lines[static_cast<std::size_t>(ins.line)].death = tau;
    scratch_.events.push_back({tau, EventKind::kLoss, ins.line, -1, -1});
    instances_[i] = instances_.back();
    instances_.pop_back();
  }

  void own_split(double tau, Rng& rng) {
    const std::size_t i = rng.below(instances_.size());
    const std::int32_t host_line = instances_[i].line;
    const std::int32_t ns = make_seg(tau);
    const auto lx = static_cast<std::int32_t>(scratch_.lines.size());
    scratch_.lines.push_back({tau, tau});
    scratch_.events.push_back({tau, EventKind::kSplit, host_line, lx, -1});
    instances_.push_back({lx, ns, true});
    ++new_count_;
    ensure_tracking(tau);
  }

  void own_coal_new_new(double tau, Rng& rng) {
    std::size_t picks[2];
    pick_two_new(rng, picks);
    const std::int32_t ms = make_seg(tau);
    close_shared(instances_[picks[0]].seg, instances_[picks[1]].seg, ms, tau);
    merge_instances(picks[0], picks[1], ms, true, tau);
  }

  void own_coal_new_old(double tau, Rng& rng) {
    std::size_t wi = pick_one_new(rng);
    const std::int32_t u = alive_old_[rng.below(alive_old_.size())];

    // Cut u at tau: the past piece inherits u's death event.
    const Seg ucopy = segs_[static_cast<std::size_t>(u)];
    const std::int32_t upast = make_seg(tau);
    {
      Seg& up = segs_[static_cast<std::size_t>(upast)];
      up.death = ucopy.death;
      up.succ = ucopy.succ;
      up.partner = ucopy.partner;
      up.cont = ucopy.cont;
      up.kind = ucopy.kind;
    }
    if (ucopy.kind == kShared && ucopy.partner >= 0)
      segs_[static_cast<std::size_t>(ucopy.partner)].partner = upast;
    close_shared(u, instances_[wi].seg, upast, tau);
    alive_remove(u);
    alive_add(upast);
    if (std::isfinite(ucopy.death)) boundaries_.push({ucopy.death, upast, false});

    std::size_t oi = instances_.size();
    for (std::size_t k = 0; k < instances_.size(); ++k)
      if (k != wi && instances_[k].seg == u && !instances_[k].is_new) oi = k;
    if (oi < instances_.size()) {
      merge_instances(wi, oi, upast, false, tau);
    } else {
      // the line continues on the merged lineage, now inside the union
      instances_[wi].seg = upast;
      instances_[wi].is_new = false;
      --new_count_;
    }
  }

  std::size_t pick_one_new(Rng& rng) {
    std::size_t countdown = rng.below(static_cast<std::uint64_t>(new_count_));
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      if (!instances_[i].is_new) continue;
      if (countdown == 0) return i;
      --countdown;
    }
    throw ResourceLimit("pangenome sampler: internal new-line bookkeeping");
  }

  void pick_two_new(Rng& rng, std::size_t out[2]) {
    std::size_t a = rng.below(static_cast<std::uint64_t>(new_count_));
    std::size_t b = rng.below(static_cast<std::uint64_t>(new_count_ - 1));
    if (b >= a) ++b;
    out[0] = out[1] = 0;
    std::size_t idx = 0;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      if (!instances_[i].is_new) continue;
      if (idx == a) out[0] = i;
      if (idx == b) out[1] = i;
      ++idx;
    }
  }

  void merge_instances(std::size_t i, std::size_t j, std::int32_t ride_seg,
                       bool merged_is_new, double tau) {
    const auto lm = static_cast<std::int32_t>(scratch_.lines.size());
    scratch_.lines[static_cast<std::size_t>(instances_[i].line)].death = tau;
    scratch_.lines[static_cast<std::size_t>(instances_[j].line)].death = tau;
    scratch_.lines.push_back({tau, tau});
    scratch_.events.push_back({tau, EventKind::kCoalescence,
                               instances_[i].line, instances_[j].line, lm});
    if (instances_[i].is_new) --new_count_;
    if (instances_[j].is_new) --new_count_;
    const std::size_t hi = std::max(i, j), lo = std::min(i, j);
    instances_[hi] = instances_.back();
    instances_.pop_back();
    instances_[lo] = instances_.back();
    instances_.pop_back();
    instances_.push_back({lm, ride_seg, merged_is_new});
    if (merged_is_new) ++new_count_;
  }

  void ensure_tracking(double tau) {
    if (tracking_) return;
    tracking_ = true;
    alive_old_.clear();
    alive_pos_.assign(segs_.size(), -1);
    while (!boundaries_.empty()) boundaries_.pop();
    for (std::int32_t s = 0; s < walk_start_; ++s) {
      const Seg& seg = segs_[static_cast<std::size_t>(s)];
      if (seg.birth <= tau && tau < seg.death) {
        alive_add(s);
        if (std::isfinite(seg.death)) boundaries_.push({seg.death, s, false});
      } else if (seg.birth > tau) {
        boundaries_.push({seg.birth, s, true});
      }
    }
  }

  void alive_add(std::int32_t s) {
    if (alive_pos_[static_cast<std::size_t>(s)] >= 0) return;
    alive_pos_[static_cast<std::size_t>(s)] =
        static_cast<std::int32_t>(alive_old_.size());
    alive_old_.push_back(s);
  }

  void alive_remove(std::int32_t s) {
    const std::int32_t pos = alive_pos_[static_cast<std::size_t>(s)];
    if (pos < 0) return;
    const std::int32_t last = alive_old_.back();
    alive_old_[static_cast<std::size_t>(pos)] = last;
    alive_pos_[static_cast<std::size_t>(last)] = pos;
    alive_old_.pop_back();
    alive_pos_[static_cast<std::size_t>(s)] = -1;
  }

  ValidatedParams p_;
  int n_;
  StoppingPolicy policy_;
  double stop_time_ = 0.0;
  double s_ = 0.0, mgf_ = 1.0, r_ = 0.0;

  std::vector<Seg> segs_;
  std::vector<std::int32_t> initial_segs_;
  std::vector<Instance> instances_;
  AgtgGraph scratch_;
  std::int32_t walk_start_ = 0;
  long new_count_ = 0;
  bool tracking_ = false;
  std::vector<std::int32_t> alive_old_;
  std::vector<std::int32_t> alive_pos_;
  std::priority_queue<Boundary, std::vector<Boundary>, std::greater<Boundary>>
      boundaries_;
};

inline CoupledAgtgSample sample_pangenome_agtg(const ValidatedParams& p, int n,
                                               Rng& rng,
                                               StoppingPolicy policy = {},
                                               bool collect_graphs = false) {
  PangenomeSampler sampler(p, n, policy);
  return sampler.sample(rng, collect_graphs);
}

}  // namespace pangenome
