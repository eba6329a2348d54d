#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

namespace drawdown_tax {

struct QuadTolerance {
  double abs = 1e-11;
  double rel = 1e-9;
  std::size_t max_intervals = 4000;
};

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  double abs_sum = std::abs(kronrod);
  double fv1[7];
  double fv2[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    fv1[j] = f(center - dx);
    fv2[j] = f(center + dx);
    const double pair = fv1[j] + fv2[j];
    kronrod += kKronrodWeights[j] * pair;
    abs_sum += kKronrodWeights[j] * (std::abs(fv1[j]) + std::abs(fv2[j]));
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  const double mean = 0.5 * kronrod;
  double asc = kKronrodWeights[7] * std::abs(fc - mean);
  for (int j = 0; j < 7; ++j)
    asc += kKronrodWeights[j] * (std::abs(fv1[j] - mean) + std::abs(fv2[j] - mean));

  const double value = kronrod * half;
  asc *= std::abs(half);
  double err = std::abs((kronrod - gauss) * half);
  if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
  const double round = 50.0 * std::numeric_limits<double>::epsilon() * abs_sum * std::abs(half);
  if (round > std::numeric_limits<double>::min()) err = std::max(err, round);
  return {a, b, value, err};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
/// The panel with the largest error estimate is bisected until the summed
/// estimate is below max(abs, rel*|I|).
template <class F>
double integrate(F&& f, double a, double b, const QuadTolerance& tol = {}) {
  if (a == b) return 0.0;
  if (b < a) return -integrate(f, b, a, tol);
  std::priority_queue<detail::Panel> heap;
  heap.push(detail::gk15(f, a, b));
  double total = heap.top().value;
  double err = heap.top().error;
  while (err > std::max(tol.abs, tol.rel * std::abs(total)) &&
         heap.size() < tol.max_intervals) {
    const detail::Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) break;
    heap.pop();
    const detail::Panel left = detail::gk15(f, worst.a, mid);
    const detail::Panel right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum so the result does not depend on the running update order.
  double sum = 0.0;
  double comp = 0.0;
  std::vector<detail::Panel> panels;
  panels.reserve(heap.size());
  while (!heap.empty()) {
    panels.push_back(heap.top());
    heap.pop();
  }
  std::sort(panels.begin(), panels.end(),
            [](const detail::Panel& l, const detail::Panel& r) { return l.a < r.a; });
  for (const auto& p : panels) {
    const double t = sum + p.value;
    comp += std::abs(sum) >= std::abs(p.value) ? (sum - t) + p.value : (p.value - t) + sum;
    sum = t;
  }
  return sum + comp;
}

/// Integral over consecutive sub-intervals [edges[i], edges[i+1]], each
/// integrated independently so kinks at the edges do not slow convergence.
template <class F>
double integrate_panels(F&& f, const std::vector<double>& edges, const QuadTolerance& tol = {}) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) sum += integrate(f, edges[i], edges[i + 1], tol);
  return sum;
}

}  // namespace drawdown_tax
