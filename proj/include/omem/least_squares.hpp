#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with box bounds.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "omem/dataset.hpp"

namespace omem {

/// Unit class of a fitted quantity; decides the key suffix on output.
enum class Unit { angular, seconds, watts, dimensionless };

struct FitParameter {
  std::string name;
  Unit unit = Unit::dimensionless;
  double value = 0.0;
  std::optional<double> std_error;
};

struct FitResult {
  std::vector<FitParameter> parameters;
  std::vector<FitParameter> derived; // quantities computed from the fitted ones
  double rss = 0.0;
  int iterations = 0;
  bool converged = false;
  bool singular_jacobian = false;
  std::vector<double> cost_history; // cost after each accepted step, starting at init
  std::vector<std::string> flags;

  const FitParameter& param(std::string_view name) const
  {
    for (const auto& p : parameters)
      if (p.name == name)
        return p;
    for (const auto& p : derived)
      if (p.name == name)
        return p;
    throw std::out_of_range("FitResult: no parameter named " + std::string(name));
  }
  double value(std::string_view name) const { return param(name).value; }
  bool has_flag(std::string_view flag) const
  {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
  }
};

struct ParameterSpec {
  std::string name;
  Unit unit = Unit::dimensionless;
  double init = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double scale = 0.0; // typical magnitude for finite differences; |init| when 0
};

struct LeastSquaresOptions {
  double initial_damping = 1e-3;
  double damping_factor = 10.0;
  int max_iterations = 200;
  double cost_tolerance = 1e-10;     // relative decrease of an accepted step
  double gradient_tolerance = 1e-8;  // max cosine between residual and Jacobian columns
  double step_tolerance = 1e-14;     // relative parameter step
  double zero_cost_tolerance = 1e-26; // cost relative to sum w y², round-off floor
  double max_damping = 1e20;
};

namespace detail {

inline double fd_step(double value, double scale) { return 1e-6 * std::max(std::abs(value), scale); }

} // namespace detail

/// Minimizes Σ w_i (y_i - model(p)_i)² over p.
///
/// `model` maps a parameter vector to predictions at the data abscissae.
/// Deterministic for given data, specs and options. The Jacobian is taken by
/// central differences, keeping both points inside the bounds.
template <class Model>
FitResult least_squares(Model&& model, std::span<const double> y, std::span<const double> weights,
                        const std::vector<ParameterSpec>& specs, const LeastSquaresOptions& opt = {})
{
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const std::size_t n = y.size();
  const std::size_t m = specs.size();
  if (n == 0 || m == 0)
    throw std::invalid_argument("least_squares: empty data or parameter set");
  if (!weights.empty() && weights.size() != n)
    throw std::invalid_argument("least_squares: weight count differs from data count");

  std::vector<double> p(m), scale(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& s = specs[j];
    if (!(s.init >= s.lower && s.init <= s.upper))
      throw std::invalid_argument("least_squares: initial value of " + s.name + " outside its bounds");
    p[j] = s.init;
    scale[j] = s.scale > 0.0 ? s.scale : (s.init != 0.0 ? std::abs(s.init) : 1.0);
  }
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };

  auto evaluate = [&](const std::vector<double>& q, std::vector<double>& residual) -> double {
    const std::vector<double> f = model(q);
    if (f.size() != n)
      throw std::invalid_argument("least_squares: model returned wrong number of predictions");
    residual.resize(n);
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      residual[i] = y[i] - f[i];
      cost += w(i) * residual[i] * residual[i];
    }
    return cost;
  };

  auto jacobian = [&](const std::vector<double>& q) {
    MatrixXd jac(n, m);
    std::vector<double> probe = q;
    for (std::size_t j = 0; j < m; ++j) {
      const double h = detail::fd_step(q[j], scale[j]);
      const double hi = std::min(q[j] + h, specs[j].upper);
      const double lo = std::max(q[j] - h, specs[j].lower);
      probe[j] = hi;
      const std::vector<double> fp = model(probe);
      probe[j] = lo;
      const std::vector<double> fm = model(probe);
      probe[j] = q[j];
      for (std::size_t i = 0; i < n; ++i)
        jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / (hi - lo);
    }
    return jac;
  };

  double data_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    data_norm += w(i) * y[i] * y[i];
  const double zero_cost = opt.zero_cost_tolerance * data_norm;

  std::vector<double> r;
  double cost = evaluate(p, r);
  if (!std::isfinite(cost))
    throw std::invalid_argument("least_squares: model not finite at the initial point");

  FitResult result;
  result.cost_history.push_back(cost);
  double lambda = opt.initial_damping;
  bool done = cost <= zero_cost;
  result.converged = done;

  VectorXd wv(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    wv(static_cast<Eigen::Index>(i)) = w(i);

  while (!done && result.iterations < opt.max_iterations) {
    const MatrixXd jac = jacobian(p);
    const VectorXd rv = Eigen::Map<const VectorXd>(r.data(), static_cast<Eigen::Index>(n));
    const VectorXd g = jac.transpose() * wv.asDiagonal() * rv;
    const MatrixXd a = jac.transpose() * wv.asDiagonal() * jac;

    double cosine = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double col = std::sqrt(a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
      if (col > 0.0)
        cosine = std::max(cosine, std::abs(g(static_cast<Eigen::Index>(j))) / (col * std::sqrt(cost)));
    }
    if (cosine < opt.gradient_tolerance) {
      result.converged = true;
      break;
    }

    ++result.iterations;
    const double diag_floor = std::max(a.diagonal().maxCoeff(), 1.0) * 1e-30;
    while (true) {
      MatrixXd damped = a;
      for (std::size_t j = 0; j < m; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        damped(jj, jj) += lambda * std::max(a(jj, jj), diag_floor);
      }
      const VectorXd step = damped.ldlt().solve(g);
      std::vector<double> trial(m);
      double step_norm = 0.0, p_norm = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        trial[j] = std::clamp(p[j] + step(static_cast<Eigen::Index>(j)), specs[j].lower, specs[j].upper);
        step_norm += (trial[j] - p[j]) * (trial[j] - p[j]) / (scale[j] * scale[j]);
        p_norm += p[j] * p[j] / (scale[j] * scale[j]);
      }
      std::vector<double> trial_r;
      const double trial_cost = step.allFinite() ? evaluate(trial, trial_r) : std::numeric_limits<double>::infinity();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double decrease = cost > 0.0 ? (cost - trial_cost) / cost : 0.0;
        p = std::move(trial);
        r = std::move(trial_r);
        cost = trial_cost;
        result.cost_history.push_back(cost);
        lambda = std::max(lambda / opt.damping_factor, 1e-15);
        if (decrease < opt.cost_tolerance || cost <= zero_cost ||
            std::sqrt(step_norm) <= opt.step_tolerance * std::sqrt(std::max(p_norm, 1.0))) {
          result.converged = true;
          done = true;
        }
        break;
      }
      lambda *= opt.damping_factor;
      if (lambda > opt.max_damping) {
        result.flags.emplace_back("damping_overflow");
        done = true;
        break;
      }
    }
  }
  if (!result.converged && result.iterations >= opt.max_iterations)
    result.flags.emplace_back("max_iterations");

  result.rss = cost;
  const MatrixXd jac = jacobian(p);
  MatrixXd scaled = wv.cwiseSqrt().asDiagonal() * jac;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double norm = scaled.col(j).norm();
    if (norm > 0.0)
      scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<MatrixXd> qr(scaled);
  qr.setThreshold(1e-12);
  result.singular_jacobian = qr.rank() < static_cast<Eigen::Index>(m);
  std::optional<MatrixXd> covariance;
  if (!result.singular_jacobian && n > m) {
    const MatrixXd a = jac.transpose() * wv.asDiagonal() * jac;
    covariance = a.inverse() * (cost / static_cast<double>(n - m));
  }
  if (result.singular_jacobian)
    result.flags.emplace_back("singular_jacobian");

  for (std::size_t j = 0; j < m; ++j) {
    FitParameter fp{specs[j].name, specs[j].unit, p[j], std::nullopt};
    if (covariance) {
      const double var = (*covariance)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
      fp.std_error = std::sqrt(std::max(var, 0.0));
    }
    result.parameters.push_back(std::move(fp));
  }
  return result;
}

/// Dataset overload: fits data.y with the dataset's weights.
template <class Model>
FitResult least_squares(Model&& model, const Dataset& data, const std::vector<ParameterSpec>& specs,
                        const LeastSquaresOptions& opt = {})
{
  data.validate();
  return least_squares(std::forward<Model>(model), std::span<const double>(data.y),
                       std::span<const double>(data.weight), specs, opt);
}

} // namespace omem
