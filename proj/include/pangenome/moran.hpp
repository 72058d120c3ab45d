#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pangenome/errors.hpp"
#include "pangenome/params.hpp"
#include "pangenome/rng.hpp"
#include "pangenome/stats.hpp"

namespace pangenome {

// How a resampling event between an ordered pair (i, j) picks the parent.
// kPairCoinFlip is the model's reading: the pair fires at rate 1, the parent
// is uniform on {i, j} and the offspring replaces j, so an effective copy
// i -> j happens at rate 1/2 per ordered pair and each unordered pair of
// lineages coalesces at rate 1.  kOrderedCopyAlways (i always the parent)
// doubles the coalescence timescale; it exists so the mismatch can be
// measured, not for production use.
enum class ResamplingConvention { kPairCoinFlip, kOrderedCopyAlways };

enum class MoranEventType { kResampling, kLoss, kGain, kHgt };

// Fixed-size population of genomes under resampling, gene loss, gene gain and
// horizontal transfer.  Genomes are copy-on-write: a resampling event only
// redirects a reference, and a genome is cloned when a mutation hits a shared
// one.  Gene identifiers are a monotone counter; fresh ids are what makes
// gained genes almost surely new, so nothing else about them matters.
class Population {
 public:
  explicit Population(long n_individuals) {
    if (n_individuals < 2) throw RangeError("N", "needs N >= 2");
    slots_.reserve(static_cast<std::size_t>(n_individuals) + 16);
    slots_.push_back(Slot{{}, static_cast<std::int32_t>(n_individuals)});
    of_.assign(static_cast<std::size_t>(n_individuals), 0);
    sizes_.assign(static_cast<std::size_t>(n_individuals), 0);
  }

  long size() const { return static_cast<long>(of_.size()); }
  long total_genes() const { return total_genes_; }
  double time() const { return time_; }
  void advance_time(double dt) { time_ += dt; }

  long genome_size(long i) const {
    return sizes_[static_cast<std::size_t>(i)];
  }
  const std::vector<GeneId>& genome_of(long i) const {
    return slots_[static_cast<std::size_t>(of_[static_cast<std::size_t>(i)])]
        .genes;
  }

  // j's genome becomes a reference to i's.
  void copy_genome(long parent, long child) {
    if (parent == child) return;
    const std::int32_t ps = of_[static_cast<std::size_t>(parent)];
    const std::int32_t cs = of_[static_cast<std::size_t>(child)];
    if (ps == cs) return;
    release(cs);
    ++slots_[static_cast<std::size_t>(ps)].refs;
    of_[static_cast<std::size_t>(child)] = ps;
    total_genes_ += static_cast<long>(sizes_[static_cast<std::size_t>(parent)]) -
                    static_cast<long>(sizes_[static_cast<std::size_t>(child)]);
    sizes_[static_cast<std::size_t>(child)] =
        sizes_[static_cast<std::size_t>(parent)];
  }

  void gain_gene(long i) {
    Slot& s = unique_slot(i);
    s.genes.push_back(next_gene_++);  // ids are increasing: stays sorted
    ++sizes_[static_cast<std::size_t>(i)];
    ++total_genes_;
  }

  // Remove the r-th gene copy in the population (r uniform on [0, total)).
  void lose_gene_copy(long r) {
    const long i = individual_of_copy(r);
    Slot& s = unique_slot(i);
    const auto idx = static_cast<std::size_t>(r);
    s.genes.erase(s.genes.begin() +
                  static_cast<std::ptrdiff_t>(idx - copy_scan_prefix_));
    --sizes_[static_cast<std::size_t>(i)];
    --total_genes_;
  }

  // Transfer the r-th gene copy from its carrier to acceptor; no effect if
  // the acceptor already carries that gene.
  void transfer_gene_copy(long r, long acceptor_rank, bool& accepted) {
    const long donor = individual_of_copy(r);
    long acceptor = acceptor_rank;
    if (acceptor >= donor) ++acceptor;  // uniform among the N-1 others
    const GeneId g =
        genome_of(donor)[static_cast<std::size_t>(r - copy_scan_prefix_)];
    const auto& target = genome_of(acceptor);
    const auto it = std::lower_bound(target.begin(), target.end(), g);
    if (it != target.end() && *it == g) {
      accepted = false;
      return;
    }
    const auto offset = it - target.begin();
    Slot& s = unique_slot(acceptor);
    s.genes.insert(s.genes.begin() + offset, g);
    ++sizes_[static_cast<std::size_t>(acceptor)];
    ++total_genes_;
    accepted = true;
  }

  Genome genome_copy(long i) const { return Genome{genome_of(i)}; }

 private:
  struct Slot {
    std::vector<GeneId> genes;
    std::int32_t refs = 0;
  };

  void release(std::int32_t slot) {
    Slot& s = slots_[static_cast<std::size_t>(slot)];
    if (--s.refs == 0) {
      s.genes.clear();
      free_.push_back(slot);
    }
  }

  Slot& unique_slot(long i) {
    const std::int32_t cur = of_[static_cast<std::size_t>(i)];
    Slot& s = slots_[static_cast<std::size_t>(cur)];
    if (s.refs == 1) return s;
    std::int32_t fresh;
    if (!free_.empty()) {
      fresh = free_.back();
      free_.pop_back();
    } else {
      fresh = static_cast<std::int32_t>(slots_.size());
      slots_.push_back(Slot{});
    }
    slots_[static_cast<std::size_t>(fresh)].genes =
        slots_[static_cast<std::size_t>(cur)].genes;
    slots_[static_cast<std::size_t>(fresh)].refs = 1;
    --slots_[static_cast<std::size_t>(cur)].refs;
    of_[static_cast<std::size_t>(i)] = fresh;
    return slots_[static_cast<std::size_t>(fresh)];
  }

  long individual_of_copy(long r) {
    long acc = 0;
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
      const long next = acc + sizes_[i];
      if (r < next) {
        copy_scan_prefix_ = acc;
        return static_cast<long>(i);
      }
      acc = next;
    }
    throw RangeError("r", "gene copy index out of range");
  }

  std::vector<Slot> slots_;
  std::vector<std::int32_t> free_;
  std::vector<std::int32_t> of_;
  std::vector<std::uint32_t> sizes_;
  long total_genes_ = 0;
  long copy_scan_prefix_ = 0;
  double time_ = 0.0;
  GeneId next_gene_ = 1;
};

// One literal event: resampling at rate 1 per ordered pair (N(N-1) in total),
// loss at rho/2 per gene copy, gain at theta/2 per individual, transfer at
// gamma/2N per ordered pair per donor gene.  Returns which category fired.
inline MoranEventType step(
    Population& pop, const ValidatedParams& p, Rng& rng,
    ResamplingConvention conv = ResamplingConvention::kPairCoinFlip) {
  const double nd = static_cast<double>(pop.size());
  const double genes = static_cast<double>(pop.total_genes());
  const double r_res = nd * (nd - 1.0);
  const double r_loss = 0.5 * p.rho() * genes;
  const double r_gain = 0.5 * p.theta() * nd;
  const double r_hgt = 0.5 * p.gamma() / nd * (nd - 1.0) * genes;
  const double total = r_res + r_loss + r_gain + r_hgt;
  pop.advance_time(rng.exponential(total));
  const double pick = rng.uniform() * total;
  if (pick < r_res) {
    const long i = static_cast<long>(rng.below(
        static_cast<std::uint64_t>(pop.size())));
    long j = static_cast<long>(
        rng.below(static_cast<std::uint64_t>(pop.size() - 1)));
    if (j >= i) ++j;
    const bool parent_is_i = conv == ResamplingConvention::kOrderedCopyAlways
                                 ? true
                                 : (rng.next_u64() & 1) != 0;
    if (parent_is_i) pop.copy_genome(i, j);  // else j replaces itself: no-op
    return MoranEventType::kResampling;
  }
  if (pick < r_res + r_loss) {
    pop.lose_gene_copy(static_cast<long>(
        rng.below(static_cast<std::uint64_t>(pop.total_genes()))));
    return MoranEventType::kLoss;
  }
  if (pick < r_res + r_loss + r_gain) {
    pop.gain_gene(
        static_cast<long>(rng.below(static_cast<std::uint64_t>(pop.size()))));
    return MoranEventType::kGain;
  }
  bool accepted = false;
  pop.transfer_gene_copy(
      static_cast<long>(
          rng.below(static_cast<std::uint64_t>(pop.total_genes()))),
      static_cast<long>(
          rng.below(static_cast<std::uint64_t>(pop.size() - 1))),
      accepted);
  return MoranEventType::kHgt;
}

struct ConvergenceDiagnostic {
  bool converged = true;
  bool valid = false;         // enough batches to compare the windows
  double window1_mean = 0.0;  // mean genes per individual, third quarter
  double window2_mean = 0.0;  // mean genes per individual, final quarter
  double pooled_se = 0.0;
};

struct EquilibriumRun {
  Population pop;
  ConvergenceDiagnostic diagnostic;
};

// Run from empty genomes until `burn_in` time units have passed.
//
// The loop is an exact homogenization of the jump process: no-op resampling
// outcomes are dropped (copies happen at rate 1/2 per ordered pair under the
// coin-flip convention), all remaining rates are bounded by a fixed R_max,
// the event count over the window is Poisson(R_max * burn_in), and each event
// is a ghost with probability 1 - R(state)/R_max.  Ghosts and the category
// split share one uniform draw.  The diagnostic compares the mean gene count
// over the third and final quarters of the run (batch-mean standard errors).
inline EquilibriumRun run_to_equilibrium(
    const ValidatedParams& p, double burn_in, Rng& rng,
    ResamplingConvention conv = ResamplingConvention::kPairCoinFlip) {
  if (!p.N()) throw RangeError("N", "forward simulation needs N");
  if (!(burn_in > 0.0)) throw RangeError("burn_in", "needs burn_in > 0");
  const long n = *p.N();
  const double nd = static_cast<double>(n);
  EquilibriumRun run{Population(n), {}};
  Population& pop = run.pop;

  const double copy_rate =
      conv == ResamplingConvention::kPairCoinFlip ? 0.5 * nd * (nd - 1.0)
                                                  : nd * (nd - 1.0);
  const double gain_rate = 0.5 * p.theta() * nd;
  const double loss_per_copy = 0.5 * p.rho();
  const double hgt_per_copy = 0.5 * p.gamma() * (nd - 1.0) / nd;
  const long gene_cap = std::max<long>(
      1024, static_cast<long>(std::ceil(12.0 * nd * (p.theta() / p.rho()) *
                                        std::exp(p.gamma()))));
  const double r_max =
      copy_rate + gain_rate +
      (loss_per_copy + hgt_per_copy) * static_cast<double>(gene_cap);

  const long events = rng.poisson(r_max * burn_in);
  const long half = events / 2;
  const long quarter = events / 4;
  const long w1_begin = half, w1_end = half + quarter;
  // Batch means only give an honest standard error when each batch spans at
  // least the gene-content mixing time, about 2/rho time units; short
  // burn-ins therefore get few batches and a weak (conservative) diagnostic.
  const long mixing_events = static_cast<long>(
      std::ceil(r_max * std::max(1.0, 2.0 / p.rho())));
  const long batch_len =
      std::max<long>(1, std::min(quarter / 2, mixing_events));
  std::vector<double> batch_means;
  std::size_t w1_batches = 0;
  double batch_sum = 0.0;
  long batch_count = 0;

  for (long e = 0; e < events; ++e) {
    const double x = rng.uniform() * r_max;
    if (x < copy_rate) {
      const long i =
          static_cast<long>(rng.below(static_cast<std::uint64_t>(n)));
      long j =
          static_cast<long>(rng.below(static_cast<std::uint64_t>(n - 1)));
      if (j >= i) ++j;
      pop.copy_genome(i, j);
    } else if (x < copy_rate + gain_rate) {
      if (pop.total_genes() >= gene_cap)
        throw ResourceLimit("run_to_equilibrium: gene-count bound exceeded");
      pop.gain_gene(
          static_cast<long>(rng.below(static_cast<std::uint64_t>(n))));
    } else {
      const double y = x - copy_rate - gain_rate;
      const double genes = static_cast<double>(pop.total_genes());
      if (y < loss_per_copy * genes) {
        const long idx = std::min<long>(
            static_cast<long>(y / loss_per_copy), pop.total_genes() - 1);
        pop.lose_gene_copy(idx);
      } else if (y < (loss_per_copy + hgt_per_copy) * genes) {
        if (pop.total_genes() >= gene_cap)
          throw ResourceLimit("run_to_equilibrium: gene-count bound exceeded");
        bool accepted = false;
        const long idx = std::min<long>(
            static_cast<long>((y - loss_per_copy * genes) / hgt_per_copy),
            pop.total_genes() - 1);
        pop.transfer_gene_copy(
            idx,
            static_cast<long>(rng.below(static_cast<std::uint64_t>(n - 1))),
            accepted);
      }
      // else: ghost (thinning slack), state untouched
    }
    if (e >= w1_begin) {
      batch_sum += static_cast<double>(pop.total_genes());
      ++batch_count;
      const bool window_edge = e + 1 == w1_end || e + 1 == events;
      if (batch_count >= batch_len || window_edge) {
        batch_means.push_back(batch_sum / static_cast<double>(batch_count) /
                              nd);
        batch_sum = 0.0;
        batch_count = 0;
        if (e + 1 == w1_end) w1_batches = batch_means.size();
      }
    }
  }
  pop.advance_time(burn_in);

  RunningStat w1, w2;
  for (std::size_t i = 0; i < batch_means.size(); ++i)
    (i < w1_batches ? w1 : w2).add(batch_means[i]);
  ConvergenceDiagnostic& d = run.diagnostic;
  if (w1.count() >= 2 && w2.count() >= 2) {
    d.valid = true;
    d.window1_mean = w1.mean();
    d.window2_mean = w2.mean();
    const auto e1 = w1.estimate(), e2 = w2.estimate();
    d.pooled_se = std::sqrt(e1.std_error * e1.std_error +
                            e2.std_error * e2.std_error);
    d.converged =
        std::fabs(d.window1_mean - d.window2_mean) <= 3.0 * d.pooled_se ||
        d.pooled_se == 0.0;
  }
  return run;
}

// n distinct individuals, uniformly without replacement.
inline std::vector<Genome> sample_individuals(const Population& pop, int n,
                                              Rng& rng) {
  if (n < 1 || n > pop.size()) throw RangeError("n", "needs 1 <= n <= N");
  std::vector<long> idx(static_cast<std::size_t>(pop.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<long>(i);
  std::vector<Genome> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const std::size_t pick =
        static_cast<std::size_t>(k) +
        rng.below(idx.size() - static_cast<std::size_t>(k));
    std::swap(idx[static_cast<std::size_t>(k)], idx[pick]);
    out.push_back(pop.genome_copy(idx[static_cast<std::size_t>(k)]));
  }
  return out;
}

// One line per individual: its sorted gene ids, tab-separated.
inline void dump_population(const Population& pop, std::ostream& out) {
  for (long i = 0; i < pop.size(); ++i) {
    const auto& genes = pop.genome_of(i);
    for (std::size_t k = 0; k < genes.size(); ++k) {
      if (k) out << '\t';
      out << genes[k];
    }
    out << '\n';
  }
}

// Inverse of dump_population; feeds sampled genomes into the statistics.
inline std::vector<Genome> read_genome_dump(std::istream& in) {
  std::vector<Genome> genomes;
  std::string line;
  while (std::getline(in, line)) {
    Genome g;
    std::istringstream ls(line);
    GeneId id;
    while (ls >> id) g.genes.push_back(id);
    if (!std::is_sorted(g.genes.begin(), g.genes.end()) ||
        std::adjacent_find(g.genes.begin(), g.genes.end()) != g.genes.end())
      throw RangeError("dump", "line " + std::to_string(genomes.size() + 1) +
                                   ": gene ids must be sorted and unique");
    genomes.push_back(std::move(g));
  }
  return genomes;
}

struct DriftCheckResult {
  double empirical_drift = 0.0;     // mean frequency increment over dt
  double empirical_variance = 0.0;  // variance of the increment
  double drift_se = 0.0;
  double variance_se = 0.0;
};

// Frequency increment of one tagged gene over windows of length dt, starting
// every window at frequency x0 (gains disabled for the tag).  The tagged
// carrier count is autonomous: up-moves at X(N-X)(1/2 + gamma/2N), down-moves
// at X(N-X)/2 + rho X/2.  Accepts rho = 0 so the pure-resampling martingale
// case can be checked.
inline DriftCheckResult tagged_gene_drift_check(const ModelParams& p,
                                                double x0, double dt,
                                                long reps, Rng& rng) {
  if (!p.N || *p.N < 2) throw RangeError("N", "needs N >= 2");
  if (!(x0 > 0.0 && x0 < 1.0)) throw RangeError("x0", "needs 0 < x0 < 1");
  if (!(p.rho >= 0.0)) throw RangeError("rho", "needs rho >= 0");
  if (!(p.gamma >= 0.0)) throw RangeError("gamma", "needs gamma >= 0");
  if (!(dt > 0.0)) throw RangeError("dt", "needs dt > 0");
  if (reps < 2) throw RangeError("reps", "needs reps >= 2");
  const long n = *p.N;
  const double nd = static_cast<double>(n);
  const double x_start = x0 * nd;
  const long x_init = std::lround(x_start);
  if (std::fabs(x_start - static_cast<double>(x_init)) > 1e-9)
    throw RangeError("x0", "N*x0 must be an integer");

  RunningMoments inc;
  for (long r = 0; r < reps; ++r) {
    long x = x_init;
    double t = 0.0;
    while (x > 0) {
      const double xd = static_cast<double>(x);
      const double pairs = xd * (nd - xd);
      const double up = pairs * (0.5 + 0.5 * p.gamma / nd);
      const double down = 0.5 * pairs + 0.5 * p.rho * xd;
      const double total = up + down;
      if (total <= 0.0) break;
      t += rng.exponential(total);
      if (t > dt) break;
      x += (rng.uniform() * total < up) ? 1 : -1;
    }
    inc.add(static_cast<double>(x - x_init) / nd);
  }
  DriftCheckResult res;
  res.empirical_drift = inc.mean();
  res.empirical_variance = inc.variance();
  res.drift_se = inc.mean_std_error();
  res.variance_se = inc.variance_std_error();
  return res;
}

}  // namespace pangenome
