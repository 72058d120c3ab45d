#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "pangenome/rng.hpp"
#include "pangenome/stats.hpp"

using namespace pangenome;

namespace {

Genome make_genome(std::initializer_list<GeneId> ids) {
  Genome g{std::vector<GeneId>(ids)};
  std::sort(g.genes.begin(), g.genes.end());
  return g;
}

// Independent route for D: explicit ordered set differences.
double pairwise_diff_direct(const std::vector<Genome>& sample) {
  const std::size_t n = sample.size();
  long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (GeneId g : sample[i].genes)
        if (!sample[j].contains(g)) ++total;
    }
  }
  return static_cast<double>(total) /
         (static_cast<double>(n) * static_cast<double>(n - 1));
}

}  // namespace

TEST_CASE("statistics of hand-enumerated samples") {
  SECTION("two identical genomes") {
    std::vector<Genome> s{make_genome({1, 2, 3}), make_genome({1, 2, 3})};
    const auto st = compute_statistics(s);
    CHECK(st.avg_genes == 3.0);
    CHECK(st.avg_pairwise_diff == 0.0);
    CHECK(st.pangenome_size == 3);
    CHECK(st.spectrum == std::vector<long>{0, 3});
  }
  SECTION("overlapping genomes") {
    std::vector<Genome> s{make_genome({1, 2}), make_genome({2, 3})};
    const auto st = compute_statistics(s);
    CHECK(st.avg_genes == 2.0);
    CHECK(st.avg_pairwise_diff == 1.0);
    CHECK(st.pangenome_size == 3);
    CHECK(st.spectrum == std::vector<long>{2, 1});
    CHECK(st.avg_pairwise_diff == pairwise_diff_direct(s));
    // half the singleton class equals D for pairs
    CHECK(st.avg_pairwise_diff == 0.5 * static_cast<double>(st.spectrum[0]));
  }
  SECTION("all empty") {
    std::vector<Genome> s(3);
    const auto st = compute_statistics(s);
    CHECK(st.avg_genes == 0.0);
    CHECK(st.avg_pairwise_diff == 0.0);
    CHECK(st.pangenome_size == 0);
    CHECK(st.spectrum == std::vector<long>{0, 0, 0});
  }
}

TEST_CASE("statistics identities and permutation invariance") {
  Rng rng(RngSpec{31, 0});
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(rng.below(5));
    std::vector<Genome> sample(static_cast<std::size_t>(n));
    for (auto& g : sample) {
      const int sz = static_cast<int>(rng.below(8));
      for (int k = 0; k < sz; ++k) {
        const GeneId id = rng.below(12) + 1;
        if (!g.contains(id)) {
          g.genes.push_back(id);
          std::sort(g.genes.begin(), g.genes.end());
        }
      }
    }
    const auto st = compute_statistics(sample);
    long sum = 0, weighted = 0;
    for (std::size_t k = 0; k < st.spectrum.size(); ++k) {
      sum += st.spectrum[k];
      weighted += static_cast<long>(k + 1) * st.spectrum[k];
    }
    CHECK(st.pangenome_size == sum);
    CHECK(st.avg_genes == static_cast<double>(weighted) / n);
    CHECK(st.avg_pairwise_diff == pairwise_diff_direct(sample));

    std::vector<Genome> shuffled = sample;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    const auto st2 = compute_statistics(shuffled);
    CHECK(st2.spectrum == st.spectrum);
    CHECK(st2.avg_genes == st.avg_genes);
    CHECK(st2.avg_pairwise_diff == st.avg_pairwise_diff);
  }
}

TEST_CASE("aggregate") {
  const double ones[] = {1.0, 1.0, 1.0};
  const auto a = aggregate(ones);
  CHECK(a.mean == 1.0);
  CHECK(a.variance == 0.0);

  const double two[] = {0.0, 2.0};
  const auto b = aggregate(two);
  CHECK(b.mean == 1.0);
  CHECK(b.variance == 2.0);
  CHECK(b.std_error == Catch::Approx(1.0));

  const double one[] = {1.0};
  CHECK_THROWS_AS(aggregate(one), InsufficientData);
}

TEST_CASE("aggregate of a million normal draws") {
  Rng rng(RngSpec{8, 1});
  RunningStat acc;
  for (int i = 0; i < 1000000; ++i) acc.add(rng.normal());
  const auto e = acc.estimate();
  CHECK(std::fabs(e.mean) <= 3e-3);
  CHECK(e.variance == Catch::Approx(1.0).margin(0.01));
}

TEST_CASE("running moments match two-pass results") {
  Rng rng(RngSpec{77, 0});
  std::vector<double> xs;
  RunningMoments rm;
  for (int i = 0; i < 5000; ++i) {
    const double x = rng.normal() * 2.0 + 1.0;
    xs.push_back(x);
    rm.add(x);
  }
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    m2 += (x - mean) * (x - mean);
    m4 += std::pow(x - mean, 4);
  }
  CHECK(rm.mean() == Catch::Approx(mean).epsilon(1e-12));
  CHECK(rm.variance() ==
        Catch::Approx(m2 / (static_cast<double>(xs.size()) - 1.0))
            .epsilon(1e-10));
  CHECK(rm.central_moment4() ==
        Catch::Approx(m4 / static_cast<double>(xs.size())).epsilon(1e-8));
}
