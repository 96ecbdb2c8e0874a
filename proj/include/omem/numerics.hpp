#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace omem {

/// One classical 4th-order Runge-Kutta step for y' = f(t, y).
///
/// State only needs `+` and scalar `*` (double, std::complex, Eigen vectors).
template <class State, class Rhs>
State rk4_step(const State& y, double t, double h, Rhs&& f)
{
  const State k1 = f(t, y);
  const State k2 = f(t + 0.5 * h, State(y + (0.5 * h) * k1));
  const State k3 = f(t + 0.5 * h, State(y + (0.5 * h) * k2));
  const State k4 = f(t + h, State(y + h * k3));
  return State(y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// Composite Simpson rule over uniformly spaced samples.
///
/// An odd number of intervals closes with Simpson's 3/8 rule on the last three.
inline double simpson(std::span<const double> y, double h)
{
  const std::size_t n = y.size();
  if (n < 2)
    return 0.0;
  if (n == 2)
    return 0.5 * h * (y[0] + y[1]);
  const std::size_t intervals = n - 1;
  std::size_t even_end = intervals % 2 == 0 ? intervals : intervals - 3;
  double sum = 0.0;
  if (even_end > 0) {
    double acc = y[0] + y[even_end];
    for (std::size_t i = 1; i < even_end; ++i)
      acc += (i % 2 ? 4.0 : 2.0) * y[i];
    sum = acc * h / 3.0;
  }
  if (even_end != intervals) {
    const std::size_t i = even_end;
    sum += 3.0 * h / 8.0 * (y[i] + 3.0 * y[i + 1] + 3.0 * y[i + 2] + y[i + 3]);
  }
  return sum;
}

inline std::vector<double> linspace(double start, double stop, std::size_t count)
{
  if (count < 2)
    throw std::invalid_argument("linspace: count must be >= 2");
  std::vector<double> out(count);
  const double step = (stop - start) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = start + step * static_cast<double>(i);
  out.back() = stop;
  return out;
}

inline std::vector<double> logspace(double start, double stop, std::size_t count)
{
  if (!(start > 0.0 && stop > 0.0))
    throw std::invalid_argument("logspace: bounds must be > 0");
  std::vector<double> out = linspace(std::log(start), std::log(stop), count);
  for (double& v : out)
    v = std::exp(v);
  out.front() = start;
  out.back() = stop;
  return out;
}

} // namespace omem
