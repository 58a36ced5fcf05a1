// numerics.hpp — adaptive Gauss-Kronrod quadrature, Richardson differentiation,
// compensated summation, and a natural cubic spline shared by the physics modules.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace cfr {

inline constexpr double pi = 3.14159265358979323846;

// ---------- compensated summation ----------

// Neumaier variant of Kahan summation; deterministic sequential reduction used
// for every sum whose cancellation could threaten the 1e-12 route identities.
struct NeumaierSum {
  double sum{0.0};
  double comp{0.0};

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

// ---------- adaptive Gauss-Kronrod quadrature ----------

template <class T>
struct IntegralResult {
  T value{};
  double error{0.0};   // accumulated Kronrod-Gauss deviation
  long evaluations{0};
  bool converged{false};
};

namespace detail {

// 15-point Kronrod rule with embedded 7-point Gauss rule (standard constants).
inline constexpr double kGk15Node[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline constexpr double kGk15WK[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr double kG7W[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

inline double scalar_norm(double x) { return std::abs(x); }
inline double scalar_norm(const std::complex<double>& x) { return std::abs(x); }

template <class T, class F>
void gk15(F& f, double a, double b, T& kronrod, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  T sample[15];
  for (int j = 0; j < 7; ++j) {
    sample[j] = f(c - h * kGk15Node[j]);
    sample[14 - j] = f(c + h * kGk15Node[j]);
  }
  sample[7] = f(c);

  T fk{};             // Kronrod accumulation
  T fg{};             // embedded Gauss accumulation
  double resabs = 0;  // integral of |f|, for the roundoff floor
  for (int j = 0; j < 7; ++j) {
    const T pair_sum = sample[j] + sample[14 - j];
    fk += kGk15WK[j] * pair_sum;
    resabs +=
        kGk15WK[j] * (scalar_norm(sample[j]) + scalar_norm(sample[14 - j]));
    if (j % 2 == 1) fg += kG7W[(j - 1) / 2] * pair_sum;
  }
  fk += kGk15WK[7] * sample[7];
  fg += kG7W[3] * sample[7];
  resabs += kGk15WK[7] * scalar_norm(sample[7]);

  // integral of |f - mean|, to sharpen the raw Kronrod-Gauss deviation
  const T mean = 0.5 * fk;
  double resasc = 0.0;
  for (int j = 0; j < 7; ++j)
    resasc += kGk15WK[j] * (scalar_norm(sample[j] - mean) +
                            scalar_norm(sample[14 - j] - mean));
  resasc += kGk15WK[7] * scalar_norm(sample[7] - mean);
  resabs *= std::abs(h);
  resasc *= std::abs(h);

  kronrod = h * fk;
  err = scalar_norm(h * (fk - fg));
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps))
    err = std::max(err, 50.0 * eps * resabs);
}

}  // namespace detail

// Globally adaptive bisection: always refines the segment with the largest
// Kronrod-Gauss deviation. Deterministic for a given integrand and bounds.
template <class F>
auto integrate_adaptive(F&& f, double a, double b, double abs_tol,
                        double rel_tol, int max_segments = 5000,
                        int initial_segments = 1)
    -> IntegralResult<std::decay_t<decltype(f(0.0))>> {
  using T = std::decay_t<decltype(f(0.0))>;
  if (!(a < b)) throw std::invalid_argument("integrate_adaptive: needs a < b");
  if (initial_segments < 1) initial_segments = 1;

  struct Segment {
    double a, b, err;
    T val;
  };
  std::vector<Segment> segs;
  segs.reserve(static_cast<std::size_t>(max_segments) + 2);

  T total{};
  double total_err = 0.0;
  long evals = 0;

  auto push = [&](double lo, double hi) {
    Segment s;
    s.a = lo;
    s.b = hi;
    detail::gk15(f, lo, hi, s.val, s.err);
    evals += 15;
    total += s.val;
    total_err += s.err;
    segs.push_back(s);
  };

  const double w = (b - a) / initial_segments;
  for (int i = 0; i < initial_segments; ++i)
    push(a + i * w, i + 1 == initial_segments ? b : a + (i + 1) * w);

  const double min_width = 16.0 * std::numeric_limits<double>::epsilon() *
                           (std::abs(a) + std::abs(b) + (b - a));
  auto done = [&] {
    return total_err <=
           std::max(abs_tol, rel_tol * detail::scalar_norm(total));
  };

  while (!done() && static_cast<int>(segs.size()) < max_segments) {
    // deterministic worst-segment selection (ties broken by left endpoint)
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i) {
      if (segs[i].err > segs[worst].err ||
          (segs[i].err == segs[worst].err && segs[i].a < segs[worst].a))
        worst = i;
    }
    Segment s = segs[worst];
    if (s.b - s.a <= min_width) break;  // cannot refine further
    total -= s.val;
    total_err -= s.err;
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(worst));
    const double mid = 0.5 * (s.a + s.b);
    push(s.a, mid);
    push(mid, s.b);
  }

  IntegralResult<T> out;
  out.value = total;
  out.error = total_err;
  out.evaluations = evals;
  out.converged = done();
  return out;
}

// ---------- Richardson-extrapolated central differences ----------

// d/dx f at x from central differences with step halving; works for real and
// complex-valued f. Levels beyond ~5 gain nothing against roundoff.
template <class F>
auto derivative_richardson(F&& f, double x, double h0, int levels = 4)
    -> std::decay_t<decltype(f(0.0))> {
  using T = std::decay_t<decltype(f(0.0))>;
  if (!(h0 > 0.0)) throw std::invalid_argument("derivative_richardson: h0 > 0");
  if (levels < 1 || levels > 8)
    throw std::invalid_argument("derivative_richardson: levels in [1,8]");
  std::vector<std::vector<T>> tab(static_cast<std::size_t>(levels));
  double h = h0;
  for (int i = 0; i < levels; ++i, h *= 0.5) {
    tab[i].resize(static_cast<std::size_t>(i) + 1);
    tab[i][0] = (f(x + h) - f(x - h)) / (2.0 * h);
    double p4 = 4.0;
    for (int j = 1; j <= i; ++j, p4 *= 4.0)
      tab[i][j] = (p4 * tab[i][j - 1] - tab[i - 1][j - 1]) / (p4 - 1.0);
  }
  return tab[levels - 1][levels - 1];
}

// ---------- natural cubic spline ----------

// Interpolates sampled data on a strictly increasing grid; evaluates to zero
// outside the sampled support (drives vanish off their window).
class CubicSpline {
 public:
  CubicSpline() = default;

  CubicSpline(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 3) throw std::invalid_argument("CubicSpline: need >= 3 samples");
    if (y_.size() != n)
      throw std::invalid_argument("CubicSpline: grid/value size mismatch");
    for (std::size_t i = 1; i < n; ++i)
      if (!(x_[i] > x_[i - 1]))
        throw std::invalid_argument("CubicSpline: grid must increase strictly");

    // natural spline: second derivatives m_ with m_[0] = m_[n-1] = 0,
    // interior rows h_{i-1} m_{i-1} + 2(h_{i-1}+h_i) m_i + h_i m_{i+1} = rhs_i
    // solved by the Thomas algorithm.
    m_.assign(n, 0.0);
    const std::size_t k = n - 2;  // interior unknowns
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t i = j + 1;
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      diag[j] = 2.0 * (h0 + h1);
      upper[j] = h1;
      rhs[j] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (std::size_t j = 1; j < k; ++j) {
      const double lower = x_[j + 1] - x_[j];  // h_j couples row j to row j-1
      const double w = lower / diag[j - 1];
      diag[j] -= w * upper[j - 1];
      rhs[j] -= w * rhs[j - 1];
    }
    if (k > 0) {
      m_[k] = rhs[k - 1] / diag[k - 1];
      for (std::size_t j = k - 1; j >= 1; --j) {
        m_[j] = (rhs[j - 1] - upper[j - 1] * m_[j + 1]) / diag[j - 1];
      }
    }
  }

  double t_min() const { return x_.front(); }
  double t_max() const { return x_.back(); }

  double operator()(double t) const {
    if (x_.empty() || t < x_.front() || t > x_.back()) return 0.0;
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h;
    const double B = (t - x_[i]) / h;
    return A * y_[i] + B * y_[i + 1] +
           ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[i + 1]) * h * h /
               6.0;
  }

  double derivative(double t) const {
    if (x_.empty() || t < x_.front() || t > x_.back()) return 0.0;
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double A = (x_[i + 1] - t) / h;
    const double B = (t - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3.0 * B * B - 1.0) * m_[i + 1] - (3.0 * A * A - 1.0) * m_[i]) *
               h / 6.0;
  }

 private:
  std::size_t interval(double t) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - x_.begin());
    if (i == 0) return 0;
    if (i >= x_.size()) return x_.size() - 2;
    return i - 1;
  }

  std::vector<double> x_, y_, m_;
};

}  // namespace cfr
