#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "pangenome/errors.hpp"

namespace pangenome {

using GeneId = std::uint64_t;

// One individual's accessory genome: a duplicate-free, sorted set of gene
// identifiers.  Identifiers are opaque; only equality matters.
struct Genome {
  std::vector<GeneId> genes;

  bool contains(GeneId g) const {
    return std::binary_search(genes.begin(), genes.end(), g);
  }
  std::size_t size() const { return genes.size(); }
};

struct SampleStatistics {
  double avg_genes = 0.0;           // A: mean genome size over the sample
  double avg_pairwise_diff = 0.0;   // D: mean |G_i \ G_j| over ordered pairs
  long pangenome_size = 0;          // G: distinct genes in the sample union
  std::vector<long> spectrum;       // G_k, index k-1: genes in exactly k genomes
};

// A, D, G and the gene frequency spectrum of one sample.  Everything except
// the final divisions is integer arithmetic: spectrum and G come from a
// single pass over a gene -> carrier-count map, and D from the identity
// |G_i \ G_j| summed over ordered pairs = sum_u c_u (n - c_u) with c_u the
// carrier count of gene u.
inline SampleStatistics compute_statistics(std::span<const Genome> sample) {
  const std::size_t n = sample.size();
  if (n < 1) throw RangeError("sample", "needs at least one genome");
  SampleStatistics out;
  out.spectrum.assign(n, 0);

  std::unordered_map<GeneId, long> carriers;
  long total_genes = 0;
  for (const Genome& g : sample) {
    total_genes += static_cast<long>(g.genes.size());
    for (GeneId u : g.genes) ++carriers[u];
  }
  long ordered_diff_sum = 0;
  for (const auto& [gene, c] : carriers) {
    ++out.spectrum[static_cast<std::size_t>(c) - 1];
    ordered_diff_sum += c * (static_cast<long>(n) - c);
  }
  out.pangenome_size = static_cast<long>(carriers.size());
  out.avg_genes = static_cast<double>(total_genes) / static_cast<double>(n);
  out.avg_pairwise_diff =
      n > 1 ? static_cast<double>(ordered_diff_sum) /
                  (static_cast<double>(n) * static_cast<double>(n - 1))
            : 0.0;
  return out;
}

struct MCEstimate {
  double mean = 0.0;
  double variance = 0.0;   // sample variance (n-1 denominator)
  double std_error = 0.0;  // sqrt(variance / reps)
  long reps = 0;
};

// One-pass Welford accumulator with Neumaier-compensated mean updates.
class RunningStat {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean();
    const double incr = delta / static_cast<double>(n_);
    const double t = mean_ + incr;
    comp_ += std::fabs(mean_) >= std::fabs(incr) ? (mean_ - t) + incr
                                                 : (incr - t) + mean_;
    mean_ = t;
    m2_ += delta * (x - mean());
  }

  long count() const { return n_; }
  double mean() const { return mean_ + comp_; }
  double variance() const {
    if (n_ < 2) throw InsufficientData("variance needs >= 2 values");
    return m2_ / static_cast<double>(n_ - 1);
  }

  MCEstimate estimate() const {
    const double v = variance();
    return {mean(), v, std::sqrt(v / static_cast<double>(n_)), n_};
  }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double comp_ = 0.0;
  double m2_ = 0.0;
};

inline MCEstimate aggregate(std::span<const double> values) {
  if (values.size() < 2) throw InsufficientData("aggregate needs >= 2 values");
  RunningStat acc;
  for (double v : values) acc.add(v);
  return acc.estimate();
}

// One-pass central moments up to order four; used to attach a standard error
// to variance estimates, SE[s^2] ~ sqrt((m4 - s^4)/n).
class RunningMoments {
 public:
  void add(double x) {
    const double n1 = static_cast<double>(n_);
    ++n_;
    const double n = static_cast<double>(n_);
    const double delta = x - mean_;
    const double dn = delta / n;
    const double term1 = delta * dn * n1;
    mean_ += dn;
    m4_ += term1 * dn * dn * (n * n - 3.0 * n + 3.0) + 6.0 * dn * dn * m2_ -
           4.0 * dn * m3_;
    m3_ += term1 * dn * (n - 2.0) - 3.0 * dn * m2_;
    m2_ += term1;
  }

  long count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const {
    if (n_ < 2) throw InsufficientData("variance needs >= 2 values");
    return m2_ / static_cast<double>(n_ - 1);
  }
  double central_moment4() const { return m4_ / static_cast<double>(n_); }
  double variance_std_error() const {
    const double v = variance();
    const double m4 = central_moment4();
    return std::sqrt(std::max(0.0, m4 - v * v) / static_cast<double>(n_));
  }
  double mean_std_error() const {
    return std::sqrt(variance() / static_cast<double>(n_));
  }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double m3_ = 0.0;
  double m4_ = 0.0;
};

}  // namespace pangenome
