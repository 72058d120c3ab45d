#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "pangenome/birth_death.hpp"
#include "pangenome/errors.hpp"
#include "pangenome/params.hpp"
#include "pangenome/special_functions.hpp"

namespace pangenome {

// Expected gene frequency spectrum in the large population limit:
// values[k-1] = E[number of genes carried by exactly k of n samples].
struct SpectrumExpectation {
  int n = 0;
  std::vector<double> values;  // index k-1 for k = 1..n

  double at_k(int k) const { return values.at(static_cast<std::size_t>(k) - 1); }
};

inline double expected_spectrum_class(const ValidatedParams& p, int n, int k,
                                      double tol = 1e-12) {
  const double prefactor = (p.theta() / k) * falling_factorial(n, k) /
                           falling_factorial(n - 1.0 + p.rho(), k);
  return prefactor * hyp1f1_series(k, n + p.rho(), p.gamma(), tol).value;
}

inline SpectrumExpectation expected_spectrum(const ValidatedParams& p, int n,
                                             double tol = 1e-12) {
  if (n < 1) throw RangeError("n", "needs n >= 1");
  SpectrumExpectation s;
  s.n = n;
  s.values.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k)
    s.values.push_back(expected_spectrum_class(p, n, k, tol));
  return s;
}

// Drift, variance and sojourn machinery of the single-gene frequency
// diffusion dX = (-rho/2 X + gamma/2 X(1-X)) dt + sqrt(X(1-X)) dW.
// psi = exp(-2 int mu/sigma^2) = (1-y)^{-rho} e^{-gamma y}; the number of
// genes near frequency x is then Poisson with intensity
// theta / (sigma^2(x) psi(x)) = theta e^{gamma x} (1-x)^{rho-1} / x.
struct DiffusionCoefficients {
  double rho = 1.0;
  double gamma = 0.0;

  double mu(double x) const {
    return -0.5 * rho * x + 0.5 * gamma * x * (1.0 - x);
  }
  double sigma2(double x) const { return x * (1.0 - x); }
  double psi(double y) const {
    return std::pow(1.0 - y, -rho) * std::exp(-gamma * y);
  }
  double phi(double x, double tol = 1e-10) const {
    // int_0^x psi(y) dy, mapped to the unit interval
    return x * integrate_adaptive([&](double t) { return psi(x * t); }, tol);
  }
  double green(double delta, double x) const {
    return 2.0 * phi(delta) / (sigma2(x) * psi(x));
  }
  double gene_frequency_intensity(double theta, double x) const {
    return theta / (sigma2(x) * psi(x));
  }
};

// Independent check of the spectrum series: binom(n,k) * theta *
// int_0^1 e^{gamma x} x^{k-1} (1-x)^{n-k-1+rho} dx.  The endpoint factor
// (1-x)^{beta-1} with beta = n-k+rho can be singular (k = n, rho < 1); the
// right half is regularized with the substitution 1-x = u^p for a p chosen
// from the known exponent.
inline double spectrum_quadrature_oracle(const ValidatedParams& p, int n,
                                         int k, double tol = 1e-10) {
  if (k < 1 || k > n) throw RangeError("k", "needs 1 <= k <= n");
  const double rho = p.rho();
  const double gamma = p.gamma();
  const double beta = static_cast<double>(n - k) + rho;
  double binom = 1.0;
  for (int i = 1; i <= k; ++i) binom *= static_cast<double>(n - k + i) / i;

  DiffusionCoefficients diff{rho, gamma};
  auto integrand = [&](double x) {
    return diff.gene_frequency_intensity(p.theta(), x) * std::pow(x, k) *
           std::pow(1.0 - x, n - k);
  };

  // Left half, x in (0, 1/2): x^{k-1} with integer k >= 1 is smooth.
  const double left =
      0.5 * integrate_adaptive([&](double t) { return integrand(0.5 * t); },
                               0.5 * tol / binom);

  // Right half via 1-x = u^p so the endpoint factor becomes u^{p beta - 1}.
  const int pexp = std::max(1, static_cast<int>(std::ceil(2.0 / beta)));
  const double cut = std::pow(0.5, 1.0 / pexp);
  auto right_integrand = [&](double u) {
    const double up = std::pow(u, pexp);
    return pexp * std::pow(u, pexp * beta - 1.0) *
           std::pow(1.0 - up, k - 1) * std::exp(gamma * (1.0 - up));
  };
  const double right =
      cut * integrate_adaptive(
                [&](double t) { return right_integrand(cut * t); },
                0.5 * tol / binom);

  return binom * p.theta() * (left + right);
}

// E[A], the mean number of accessory genes per individual:
// (theta/rho) (1 + sum_m gamma^m / (1+rho)_m) = (theta/rho) 1F1(1;1+rho;gamma).
inline double expected_avg_genes(const ValidatedParams& p, double tol = 1e-12) {
  return (p.theta() / p.rho()) *
         hyp1f1_series(1.0, 1.0 + p.rho(), p.gamma(), tol).value;
}

// E[D], the mean number of pairwise gene differences:
// (theta/(1+rho)) (1 + sum_m gamma^m / (2+rho)_m).
inline double expected_pairwise_diff(const ValidatedParams& p,
                                     double tol = 1e-12) {
  return (p.theta() / (1.0 + p.rho())) *
         hyp1f1_series(1.0, 2.0 + p.rho(), p.gamma(), tol).value;
}

// E[G^(n)], the mean number of distinct genes in a sample of n:
// theta sum_{k<n} 1/(k+rho)
//   + theta sum_m (gamma^m/m) (1/(rho)_m - 1/(n+rho)_m).
inline double expected_pangenome_size(const ValidatedParams& p, int n,
                                      double tol = 1e-12) {
  if (n < 1) throw RangeError("n", "needs n >= 1");
  const double rho = p.rho();
  const double gamma = p.gamma();
  double harmonic = 0.0;
  for (int k = 0; k < n; ++k) harmonic += 1.0 / (k + rho);
  double series = 0.0;
  if (gamma > 0.0) {
    double gpow = 1.0, rise_rho = 1.0, rise_nrho = 1.0;
    long m = 0;
    while (true) {
      ++m;
      gpow *= gamma;
      rise_rho *= rho + (m - 1);
      rise_nrho *= n + rho + (m - 1);
      const double term = gpow / m * (1.0 / rise_rho - 1.0 / rise_nrho);
      series += term;
      const double r = gamma / (rho + m);
      if (r < 1.0 && term <= tol * (harmonic + series) &&
          term * r / (1.0 - r) <= tol * (harmonic + series))
        break;
      if (m > kSeriesTermCap)
        throw NonConvergence("expected_pangenome_size: series cap reached");
    }
  }
  return p.theta() * (harmonic + series);
}

// Expected total length of the single-gene ancestral graph on n lines,
// evaluated through the birth-death hitting-time double series (the graph
// length is twice the absorption time), deliberately not through
// expected_pangenome_size: theta/2 * this value vs. that function is one of
// the cross-checks.
inline double expected_agtg_length(const ValidatedParams& p, int n,
                                   double tol = 1e-15) {
  BirthDeathSpec spec{p.gamma(), p.rho()};
  return 2.0 * expected_hitting_time(spec, n, tol);
}

// Small-gamma expansion of V[A^(1)], truncated after the gamma^2 term.
// Not meaningful for large gamma; callers enforce their own cutoff.
inline double var_avg_genes_small_gamma(const ValidatedParams& p) {
  const double rho = p.rho();
  const double g = p.gamma();
  const double c2 = 1.0 / ((1.0 + rho) * (2.0 + rho)) +
                    p.theta() / ((1.0 + rho) * (1.0 + rho) * (3.0 + 2.0 * rho) *
                                 (2.0 + 7.0 * rho + 6.0 * rho * rho));
  return (p.theta() / rho) * (1.0 + g / (1.0 + rho) + c2 * g * g);
}

// Small-gamma expansion of V[D^(2)], truncated after the gamma term.
inline double var_pairwise_diff_small_gamma(const ValidatedParams& p) {
  const double rho = p.rho();
  const double g = p.gamma();
  const double theta = p.theta();
  const double c1 =
      1.0 / (2.0 * (2.0 + rho)) +
      theta * 2.0 *
          (12.0 + 110.0 * rho + 248.0 * rho * rho + 209.0 * rho * rho * rho +
           60.0 * rho * rho * rho * rho) /
          ((1.0 + rho) * (2.0 + rho) * (1.0 + 2.0 * rho) * (1.0 + 2.0 * rho) *
           (3.0 + 2.0 * rho) * (2.0 + 3.0 * rho) * (6.0 + 5.0 * rho));
  return (theta / (1.0 + rho)) *
         (0.5 + theta / ((1.0 + rho) * (1.0 + 2.0 * rho)) + c1 * g);
}

// gamma^2 coefficient of COV[L(A^1), L(A^2)], the length covariance of the
// ancestral graphs of two distinct genes.
inline double cov_agtg_lengths_small_gamma(double rho) {
  if (!(rho > 0.0)) throw RangeError("rho", "needs rho > 0");
  return 4.0 / (rho * (1.0 + rho) * (1.0 + rho) * (3.0 + 2.0 * rho) *
                (2.0 + 7.0 * rho + 6.0 * rho * rho));
}

namespace detail {

// Dense Gaussian elimination with partial pivoting; sized for the 7x7 system
// and the <=4x4 normal equations below.
template <std::size_t N>
inline std::array<double, N> solve_dense(std::array<std::array<double, N>, N> a,
                                         std::array<double, N> b) {
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-14)
      throw SingularSystem("solve_dense: pivot underflow");
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = col + 1; r < N; ++r) {
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < N; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::array<double, N> x{};
  for (std::size_t ri = N; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < N; ++c) s -= a[ri][c] * x[c];
    x[ri] = s / a[ri][ri];
  }
  return x;
}

}  // namespace detail

struct TwoGeneLengthFit {
  std::vector<double> gammas;
  std::vector<double> cov;  // COV[L1, L2] from state (0,1,0), per gamma
  double c0 = 0.0;          // fitted constant coefficient (should vanish)
  double c1 = 0.0;          // fitted gamma coefficient (should vanish)
  double c2 = 0.0;          // fitted gamma^2 coefficient
  double c3 = 0.0;          // fitted gamma^3 coefficient (0 for 3-point grids)
};

// Equilibrium first-step equations for E_{xyz}[L1 L2] of the two-gene
// ancestral graph, in the unknowns indexed
//   0:(0,1,0) 1:(1,1,0) 2:(2,1,0) 3:(1,1,1) 4:(1,0,1) 5:(2,0,1) 6:(0,2,0),
// with the order-gamma remainders of the three-line states set to zero.
// First moments enter through E_{xyz}[L_i] = E[L(A^{lines carrying gene i})].
// COV(gamma) = E_{010}[L1 L2] - E[L(A^1)]^2 is fitted as a polynomial in
// gamma over the grid; the gamma^2 coefficient is the quantity of interest
// and the fitted lower orders should vanish.
inline TwoGeneLengthFit fit_two_gene_length_system(
    double rho, const std::vector<double>& gamma_grid) {
  if (!(rho > 0.0)) throw RangeError("rho", "needs rho > 0");
  if (gamma_grid.size() < 3)
    throw RangeError("gamma_grid", "needs at least 3 grid points");
  for (double g : gamma_grid)
    if (!(g > 0.0) || g > 0.01)
      throw RangeError("gamma_grid", "grid points must lie in (0, 0.01]");

  TwoGeneLengthFit fit;
  fit.gammas = gamma_grid;
  for (double g : gamma_grid) {
    ValidatedParams p = validate({1.0, rho, g, 1, std::nullopt});
    const double l1 = expected_agtg_length(p, 1);
    const double l2 = expected_agtg_length(p, 2);
    const double l3 = expected_agtg_length(p, 3);

    std::array<std::array<double, 7>, 7> a{};
    std::array<double, 7> b{};
    // (gamma+rho) E010 = E010[L1+L2] + gamma E110
    a[0] = {g + rho, -g, 0, 0, 0, 0, 0};
    b[0] = 2.0 * l1;
    // (1+3rho/2+3gamma/2) E110 = E110[L1+2L2] + gamma E210
    //   + gamma/2 E111 + rho/2 E101 + (1+rho/2) E010
    a[1] = {-(1.0 + 0.5 * rho), 1.0 + 1.5 * rho + 1.5 * g, -g, -0.5 * g,
            -0.5 * rho, 0, 0};
    b[1] = l2 + 2.0 * l1;
    // (3+2rho) E210 = E210[L1+3L2] + (3+rho) E110 + rho/2 E201
    a[2] = {0, -(3.0 + rho), 3.0 + 2.0 * rho, 0, 0, -0.5 * rho, 0};
    b[2] = l3 + 3.0 * l1;
    // (3+2rho) E111 = E111[2L1+2L2] + E020 + (2+rho) E110 + rho E201
    a[3] = {0, -(2.0 + rho), 0, 3.0 + 2.0 * rho, 0, -rho, -1.0};
    b[3] = 4.0 * l2;
    // (1+gamma+rho) E101 = E101[L1+L2] + E010 + gamma E201
    a[4] = {-1.0, 0, 0, 0, 1.0 + g + rho, -g, 0};
    b[4] = 2.0 * l1;
    // (3+3rho/2) E201 = E201[L1+2L2] + (1+rho) E101 + 2 E110
    a[5] = {0, -2.0, 0, 0, -(1.0 + rho), 3.0 + 1.5 * rho, 0};
    b[5] = l2 + 2.0 * l1;
    // (1+2rho) E020 = E020[2L1+2L2] + E010 + 2rho E110
    a[6] = {-1.0, -2.0 * rho, 0, 0, 0, 0, 1.0 + 2.0 * rho};
    b[6] = 4.0 * l2;

    const auto v = detail::solve_dense<7>(a, b);
    fit.cov.push_back(v[0] - l1 * l1);
  }

  // Least-squares polynomial in u = gamma/gamma_max to keep the normal
  // equations well conditioned; cubic when the grid allows it.
  const std::size_t deg = gamma_grid.size() >= 4 ? 3 : 2;
  const double gmax = *std::max_element(gamma_grid.begin(), gamma_grid.end());
  std::array<std::array<double, 4>, 4> m{};
  std::array<double, 4> rhs{};
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    const double u = gamma_grid[i] / gmax;
    double upow[7];
    upow[0] = 1.0;
    for (int d = 1; d < 7; ++d) upow[d] = upow[d - 1] * u;
    for (std::size_t r = 0; r <= deg; ++r) {
      for (std::size_t c = 0; c <= deg; ++c) m[r][c] += upow[r + c];
      rhs[r] += fit.cov[i] * upow[r];
    }
  }
  if (deg < 3) m[3][3] = 1.0;  // pin unused coefficient to zero
  const auto coef = detail::solve_dense<4>(m, rhs);
  fit.c0 = coef[0];
  fit.c1 = coef[1] / gmax;
  fit.c2 = coef[2] / (gmax * gmax);
  fit.c3 = deg >= 3 ? coef[3] / (gmax * gmax * gmax) : 0.0;
  return fit;
}

// The gamma^2 coefficient extracted from the linear system; should reproduce
// cov_agtg_lengths_small_gamma.
inline double solve_two_gene_length_system(
    double rho, const std::vector<double>& gamma_grid) {
  return fit_two_gene_length_system(rho, gamma_grid).c2;
}

}  // namespace pangenome
