#pragma once

#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

#include "pangenome/errors.hpp"

namespace pangenome {

// (a)_b rising: a(a+1)...(a+b-1); empty product for b = 0.
inline double rising_factorial(double a, int b) {
  if (b < 0) throw RangeError("b", "rising_factorial needs b >= 0");
  double p = 1.0;
  for (int i = 0; i < b; ++i) p *= a + i;
  if (!std::isfinite(p)) throw OverflowError("rising_factorial overflow");
  return p;
}

// (a)_b falling: a(a-1)...(a-b+1); empty product for b = 0.
inline double falling_factorial(double a, int b) {
  if (b < 0) throw RangeError("b", "falling_factorial needs b >= 0");
  double p = 1.0;
  for (int i = 0; i < b; ++i) p *= a - i;
  if (!std::isfinite(p)) throw OverflowError("falling_factorial overflow");
  return p;
}

struct SeriesResult {
  double value = 0.0;
  long terms_used = 0;
  double truncation_bound = 0.0;  // bound on the discarded tail
};

inline constexpr long kSeriesTermCap = 1'000'000;

// Kummer's function 1F1(a;b;z) = sum_m (a)_m z^m / ((b)_m m!) by direct
// summation with the term recurrence t_{m+1} = t_m (a+m) z / ((b+m)(m+1)).
// Stops once the current term is below tol*|sum| and the geometric tail bound
// t_m r/(1-r), r the next term ratio, is too.  Intended for a > 0, b > 0,
// z >= 0 where all terms are positive and the ratio eventually decays like
// z/m.
inline SeriesResult hyp1f1_series(double a, double b, double z,
                                  double tol = 1e-12) {
  if (!(b > 0.0)) throw RangeError("b", "hyp1f1_series needs b > 0");
  if (!(z >= 0.0)) throw RangeError("z", "hyp1f1_series needs z >= 0");
  if (!(tol > 0.0)) throw RangeError("tol", "hyp1f1_series needs tol > 0");
  double sum = 1.0;
  double term = 1.0;
  long m = 0;
  while (true) {
    const double r = (a + m) * z / ((b + m) * (m + 1));
    if (std::fabs(term) <= tol * std::fabs(sum) && r >= 0.0 && r < 1.0) {
      const double tail = std::fabs(term) * r / (1.0 - r);
      if (tail <= tol * std::fabs(sum))
        return {sum, m + 1, tail};
    }
    term *= r;
    sum += term;
    ++m;
    if (m > kSeriesTermCap)
      throw NonConvergence("hyp1f1_series: term cap reached");
    if (!std::isfinite(sum)) throw OverflowError("hyp1f1_series overflow");
  }
}

namespace detail {

// 15-point Kronrod extension of 7-point Gauss (QUADPACK qk15 constants).
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
inline void gauss_kronrod_15(const F& f, double a, double b, double& integral,
                             double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double result_gauss = kWg[3] * fc;
  double result_kronrod = kWgk[7] * fc;
  for (int j = 0; j < 7; ++j) {
    const double x = h * kXgk[j];
    const double fsum = f(c - x) + f(c + x);
    result_kronrod += kWgk[j] * fsum;
    if (j % 2 == 1) result_gauss += kWg[j / 2] * fsum;
  }
  integral = result_kronrod * h;
  err = std::fabs((result_kronrod - result_gauss) * h);
}

}  // namespace detail

inline constexpr std::size_t kQuadratureSegmentCap = 20'000;

// Globally adaptive Gauss-Kronrod quadrature on (0,1): repeatedly bisect the
// segment with the largest error estimate until the summed estimate is below
// tol (absolute).  Nodes are interior, so integrable endpoint singularities
// such as x^{-1/2} are handled; they just cost a deep chain of bisections
// toward the endpoint.
template <typename F>
inline double integrate_adaptive(const F& f, double tol = 1e-10) {
  if (!(tol > 0.0)) throw RangeError("tol", "integrate_adaptive needs tol > 0");
  struct Segment {
    double a, b, integral, err;
    bool operator<(const Segment& o) const { return err < o.err; }
  };
  std::priority_queue<Segment> queue;
  double total = 0.0, total_err = 0.0;
  auto push = [&](double a, double b) {
    Segment s{a, b, 0.0, 0.0};
    detail::gauss_kronrod_15(f, a, b, s.integral, s.err);
    total += s.integral;
    total_err += s.err;
    queue.push(s);
  };
  push(0.0, 1.0);
  std::size_t splits = 0;
  while (total_err > tol) {
    if (++splits > kQuadratureSegmentCap)
      throw NonConvergence("integrate_adaptive: segment cap reached");
    const Segment worst = queue.top();
    queue.pop();
    total -= worst.integral;
    total_err -= worst.err;
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(worst.a < mid && mid < worst.b))
      throw NonConvergence("integrate_adaptive: interval underflow");
    push(worst.a, mid);
    push(mid, worst.b);
  }
  // Re-sum in queue order for a tighter rounding error than the running total.
  double sum = 0.0, comp = 0.0;
  while (!queue.empty()) {
    const double x = queue.top().integral;
    queue.pop();
    const double t = sum + x;
    comp += std::fabs(sum) >= std::fabs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

}  // namespace pangenome
