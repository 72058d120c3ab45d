#pragma once

#include <algorithm>
#include <vector>

#include "pangenome/agtg.hpp"
#include "pangenome/moran.hpp"
#include "pangenome/parallel.hpp"
#include "pangenome/stats.hpp"

namespace pangenome {

// Monte Carlo summary of a sample statistic run: A and D carry fourth-moment
// accumulators so variance estimates come with their own standard errors.
struct EngineResults {
  RunningMoments A;
  RunningMoments D;
  RunningStat G;
  std::vector<RunningStat> spectrum;  // per frequency class 1..n
  long reps = 0;
  // engine diagnostics
  long not_converged = 0;              // forward engine, per-replicate flags
  RunningStat window_drift;            // forward engine: late-window mean drift
  double graphs_generated_mean = 0.0;  // genealogy engine
  long graphs_generated_max = 0;
  double expected_missed_bound_max = 0.0;
};

namespace detail {

struct ReplicateSlot {
  double a = 0.0, d = 0.0;
  long g = 0;
  std::vector<long> spectrum;
  long graphs = 0;
  double missed = 0.0;
  bool not_converged = false;
  bool diag_valid = false;
  double window_drift = 0.0;
};

template <typename MakeContext, typename Work>
inline EngineResults run_replicates(int n, long reps, int threads,
                                    RngSpec base, MakeContext&& make_context,
                                    Work&& work) {
  EngineResults res;
  res.spectrum.assign(static_cast<std::size_t>(n), RunningStat{});
  res.reps = reps;
  constexpr long kChunk = 8192;
  std::vector<ReplicateSlot> buffer(
      static_cast<std::size_t>(std::min(reps, kChunk)));
  for (auto& slot : buffer) slot.spectrum.assign(static_cast<std::size_t>(n), 0);
  for (long chunk_begin = 0; chunk_begin < reps; chunk_begin += kChunk) {
    const long len = std::min(kChunk, reps - chunk_begin);
    parallel_replicates_with_context(
        len, threads,
        RngSpec{base.seed, base.stream_id + static_cast<std::uint64_t>(
                                                chunk_begin)},
        make_context,
        [&](long r, Rng& rng, auto& ctx) {
          work(buffer[static_cast<std::size_t>(r)], rng, ctx);
        });
    for (long r = 0; r < len; ++r) {
      const ReplicateSlot& s = buffer[static_cast<std::size_t>(r)];
      res.A.add(s.a);
      res.D.add(s.d);
      res.G.add(static_cast<double>(s.g));
      for (int k = 0; k < n; ++k)
        res.spectrum[static_cast<std::size_t>(k)].add(
            static_cast<double>(s.spectrum[static_cast<std::size_t>(k)]));
      res.graphs_generated_mean += static_cast<double>(s.graphs);
      res.graphs_generated_max = std::max(res.graphs_generated_max, s.graphs);
      res.expected_missed_bound_max =
          std::max(res.expected_missed_bound_max, s.missed);
      if (s.not_converged) ++res.not_converged;
      if (s.diag_valid) res.window_drift.add(s.window_drift);
    }
  }
  res.graphs_generated_mean /= static_cast<double>(reps);
  return res;
}

inline void fill_slot_from_sample(ReplicateSlot& slot,
                                  const std::vector<Genome>& sample) {
  const SampleStatistics st = compute_statistics(sample);
  slot.a = st.avg_genes;
  slot.d = st.avg_pairwise_diff;
  slot.g = st.pangenome_size;
  for (std::size_t k = 0; k < st.spectrum.size(); ++k)
    slot.spectrum[k] = st.spectrum[k];
}

}  // namespace detail

// Backward (genealogy) engine: one coupled-graph draw per replicate.  Each
// worker keeps one sampler so the stopping bound is computed once per thread.
inline EngineResults run_agtg_mc(const ValidatedParams& p, int n, long reps,
                                 int threads, RngSpec base,
                                 StoppingPolicy policy = {}) {
  return detail::run_replicates(
      n, reps, threads, base,
      [&]() { return PangenomeSampler(p, n, policy); },
      [](detail::ReplicateSlot& slot, Rng& rng, PangenomeSampler& sampler) {
        const CoupledAgtgSample s = sampler.sample(rng);
        detail::fill_slot_from_sample(slot, s.genomes);
        slot.graphs = s.graphs_generated;
        slot.missed = s.expected_missed_bound;
        slot.not_converged = false;
      });
}

// Forward engine: burn in a fresh population from empty genomes, then sample.
inline EngineResults run_moran_mc(const ValidatedParams& p, int n, long reps,
                                  int threads, RngSpec base, double burn_in) {
  return detail::run_replicates(
      n, reps, threads, base, []() { return 0; },
      [&](detail::ReplicateSlot& slot, Rng& rng, int&) {
        EquilibriumRun run = run_to_equilibrium(p, burn_in, rng);
        const std::vector<Genome> sample = sample_individuals(run.pop, n, rng);
        detail::fill_slot_from_sample(slot, sample);
        slot.graphs = 0;
        slot.missed = 0.0;
        slot.not_converged = !run.diagnostic.converged;
        slot.diag_valid = run.diagnostic.valid;
        slot.window_drift =
            run.diagnostic.window2_mean - run.diagnostic.window1_mean;
      });
}

}  // namespace pangenome
