#include "tcilab/transport.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

namespace tcilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_entry(double c, std::size_t i, std::size_t j) {
  if (std::isnan(c))
    throw EvaluationError("cost oracle returned NaN at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  if (c < 0.0 || !std::isfinite(c))
    throw ContractError("cost oracle must be finite and nonnegative at (" + std::to_string(i) + ", " +
                        std::to_string(j) + ")");
}

void check_matrix(const CostMatrix& c) {
  if (c.data.size() != c.rows * c.cols) throw ShapeError("CostMatrix: data size does not match shape");
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) check_entry(c(i, j), i, j);
}

void check_problem(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostMatrix& c) {
  mu.validate();
  nu.validate();
  if (c.rows != mu.size() || c.cols != nu.size()) throw ShapeError("transport: cost matrix shape does not match measures");
  check_matrix(c);
}

double plan_cost(const TransportPlan& p, const CostMatrix& c) {
  double acc = 0.0;
  for (std::size_t k = 0; k < p.coupling.size(); ++k) acc += p.coupling[k] * c.data[k];
  return acc;
}

double marginal_l1(const TransportPlan& p, std::span<const double> a, std::span<const double> b) {
  double err = 0.0;
  std::vector<double> col(p.cols, 0.0);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < p.cols; ++j) {
      row += p.mass(i, j);
      col[j] += p.mass(i, j);
    }
    err += std::abs(row - a[i]);
  }
  for (std::size_t j = 0; j < p.cols; ++j) err += std::abs(col[j] - b[j]);
  return err;
}

double log_sum_exp(const double* v, std::size_t n, std::size_t stride) {
  double mx = -kInf;
  for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, v[k * stride]);
  if (mx == -kInf) return -kInf;
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) acc += std::exp(v[k * stride] - mx);
  return mx + std::log(acc);
}

}  // namespace

double CostMatrix::median() const {
  if (data.empty()) return 0.0;
  std::vector<double> tmp(data);
  auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
  std::nth_element(tmp.begin(), mid, tmp.end());
  return *mid;
}

double CostMatrix::max() const { return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end()); }

CostMatrix build_cost_matrix(std::size_t rows, std::size_t cols, const CostFn& cost) {
  CostMatrix c{rows, cols, std::vector<double>(rows * cols)};
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c.data[i * cols + j] = cost(i, j);
  check_matrix(c);
  return c;
}

CostMatrix build_cost_matrix_serial(std::size_t rows, std::size_t cols, const CostFn& cost) {
  CostMatrix c{rows, cols, std::vector<double>(rows * cols)};
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) c.data[i * cols + j] = cost(i, j);
  check_matrix(c);
  return c;
}

EmpiricalMeasure EmpiricalMeasure::uniform(std::size_t n) {
  if (n == 0) throw ContractError("EmpiricalMeasure: empty measure");
  EmpiricalMeasure m;
  m.samples.resize(n);
  std::iota(m.samples.begin(), m.samples.end(), std::size_t{0});
  m.weights.assign(n, 1.0 / static_cast<double>(n));
  return m;
}

EmpiricalMeasure EmpiricalMeasure::weighted(std::vector<double> weights) {
  EmpiricalMeasure m;
  m.samples.resize(weights.size());
  std::iota(m.samples.begin(), m.samples.end(), std::size_t{0});
  m.weights = std::move(weights);
  m.validate();
  return m;
}

void EmpiricalMeasure::validate() const {
  if (weights.empty()) throw ContractError("EmpiricalMeasure: empty measure");
  if (samples.size() != weights.size()) throw ContractError("EmpiricalMeasure: samples and weights differ in size");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("EmpiricalMeasure: weights must be finite and >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("EmpiricalMeasure: weights do not sum to 1");
}

std::string to_string(TransportMethod m) {
  switch (m) {
    case TransportMethod::ExactLP: return "exact_lp";
    case TransportMethod::Hungarian: return "hungarian";
    case TransportMethod::Sinkhorn: return "sinkhorn";
  }
  return "?";
}

TransportPlan wc_hungarian(const CostMatrix& cost) {
  const std::size_t n = cost.rows;
  if (n == 0 || cost.cols != n) throw ShapeError("wc_hungarian: square nonempty cost matrix required");
  check_matrix(cost);
  // Shortest augmenting path with row/column potentials, 1-based.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  TransportPlan plan;
  plan.rows = plan.cols = n;
  plan.method = TransportMethod::Hungarian;
  plan.coupling.assign(n * n, 0.0);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t j = 1; j <= n; ++j) plan.coupling[(p[j] - 1) * n + (j - 1)] = w;
  plan.cost = plan_cost(plan, cost);
  double dual = 0.0;
  for (std::size_t k = 1; k <= n; ++k) dual += u[k] + v[k];
  plan.dual_value = dual * w;
  plan.dual_row.assign(u.begin() + 1, u.end());
  plan.dual_col.assign(v.begin() + 1, v.end());
  const std::vector<double> unif(n, w);
  plan.marginal_error = marginal_l1(plan, unif, unif);
  plan.iterations = n;
  return plan;
}

TransportPlan wc_network(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostMatrix& cost) {
  check_problem(mu, nu, cost);
  const std::size_t n = mu.size(), m = nu.size(), nodes = n + m;
  if (n * m > kMaxExactEntries) throw ShapeError("wc_exact: problem exceeds the dense size cap");
  const double tiny = 1e-15;
  std::vector<double> supply(mu.weights), demand(nu.weights), flow(n * m, 0.0), pot(nodes, 0.0), dist(nodes);
  std::vector<std::ptrdiff_t> prev(nodes);
  std::vector<char> done(nodes);
  auto remaining = [&] { return std::accumulate(supply.begin(), supply.end(), 0.0); };

  std::size_t iterations = 0;
  while (remaining() > 1e-13) {
    ++iterations;
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(prev.begin(), prev.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      if (supply[i] > tiny) dist[i] = 0.0;
    for (;;) {
      std::size_t best = nodes;
      double bd = kInf;
      for (std::size_t k = 0; k < nodes; ++k)
        if (!done[k] && dist[k] < bd) {
          bd = dist[k];
          best = k;
        }
      if (best == nodes) break;
      done[best] = 1;
      if (best < n) {
        const std::size_t i = best;
        for (std::size_t j = 0; j < m; ++j) {
          const double nd = bd + std::max(0.0, cost(i, j) + pot[i] - pot[n + j]);
          if (nd < dist[n + j]) {
            dist[n + j] = nd;
            prev[n + j] = static_cast<std::ptrdiff_t>(i);
          }
        }
      } else {
        const std::size_t j = best - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (flow[i * m + j] <= tiny) continue;
          const double nd = bd + std::max(0.0, -cost(i, j) + pot[n + j] - pot[i]);
          if (nd < dist[i]) {
            dist[i] = nd;
            prev[i] = static_cast<std::ptrdiff_t>(best);
          }
        }
      }
    }
    std::size_t target = nodes;
    for (std::size_t j = 0; j < m; ++j)
      if (demand[j] > tiny && (target == nodes || dist[n + j] < dist[target])) target = n + j;
    if (target == nodes || dist[target] == kInf) throw ContractError("wc_exact: infeasible transport problem");
    const double cap = dist[target];
    for (std::size_t k = 0; k < nodes; ++k) pot[k] += std::min(dist[k], cap);

    double push = demand[target - n];
    std::size_t v = target;
    while (prev[v] >= 0) {
      const auto u = static_cast<std::size_t>(prev[v]);
      if (u >= n) push = std::min(push, flow[v * m + (u - n)]);  // reverse edge col u -> row v
      v = u;
    }
    push = std::min(push, supply[v]);
    const std::size_t source = v;
    v = target;
    while (prev[v] >= 0) {
      const auto u = static_cast<std::size_t>(prev[v]);
      if (u < n)
        flow[u * m + (v - n)] += push;
      else
        flow[v * m + (u - n)] -= push;
      v = u;
    }
    supply[source] -= push;
    demand[target - n] -= push;
  }

  TransportPlan plan;
  plan.rows = n;
  plan.cols = m;
  plan.method = TransportMethod::ExactLP;
  plan.coupling = std::move(flow);
  for (double& x : plan.coupling)
    if (x < tiny) x = 0.0;
  plan.cost = plan_cost(plan, cost);
  plan.dual_row.resize(n);
  plan.dual_col.resize(m);
  double dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    plan.dual_row[i] = -pot[i];
    dual += mu.weights[i] * plan.dual_row[i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    plan.dual_col[j] = pot[n + j];
    dual += nu.weights[j] * plan.dual_col[j];
  }
  plan.dual_value = dual;
  plan.marginal_error = marginal_l1(plan, mu.weights, nu.weights);
  plan.iterations = iterations;
  return plan;
}

TransportPlan wc_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostMatrix& cost) {
  check_problem(mu, nu, cost);
  const bool uniform_square =
      mu.size() == nu.size() &&
      std::all_of(mu.weights.begin(), mu.weights.end(), [&](double w) { return w == mu.weights[0]; }) &&
      std::all_of(nu.weights.begin(), nu.weights.end(), [&](double w) { return w == mu.weights[0]; });
  if (uniform_square) return wc_hungarian(cost);
  return wc_network(mu, nu, cost);
}

TransportPlan wc_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostFn& cost) {
  if (mu.size() * nu.size() > kMaxExactEntries) throw ShapeError("wc_exact: problem exceeds the dense size cap");
  return wc_exact(mu, nu, build_cost_matrix(mu.size(), nu.size(), [&](std::size_t i, std::size_t j) {
                    return cost(mu.samples[i], nu.samples[j]);
                  }));
}

namespace {

// One damped Newton ascent step on the entropic dual
//   D(f, g) = <a, f> + <b, g> - eps * sum_ij exp((f_i + g_j - c_ij) / eps),
// with g_{m-1} pinned to remove the constant shift direction.
double newton_polish(std::vector<double>& f, std::vector<double>& g, const std::vector<double>& a,
                   const std::vector<double>& b, const CostMatrix& cost, double eps) {
  const std::size_t n = f.size(), m = g.size(), k = n + m - 1;
  Eigen::MatrixXd plan(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) plan(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / eps);
  const Eigen::VectorXd rows = plan.rowwise().sum(), cols = plan.colwise().sum().transpose();

  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd grad(k);
  for (std::size_t i = 0; i < n; ++i) {
    hess(i, i) = rows(i);
    grad(i) = a[i] - rows(i);
  }
  for (std::size_t j = 0; j + 1 < m; ++j) {
    hess(n + j, n + j) = cols(j);
    grad(n + j) = b[j] - cols(j);
    for (std::size_t i = 0; i < n; ++i) hess(i, n + j) = hess(n + j, i) = plan(i, j);
  }
  hess.diagonal().array() += 1e-12 * hess.diagonal().maxCoeff();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
  if (ldlt.info() != Eigen::Success) return 0.0;
  const Eigen::VectorXd step = eps * ldlt.solve(grad);
  if (!step.allFinite()) return 0.0;

  auto dual = [&](const std::vector<double>& ff, const std::vector<double>& gg) {
    double lin = 0.0, mass = 0.0;
    for (std::size_t i = 0; i < n; ++i) lin += a[i] * ff[i];
    for (std::size_t j = 0; j < m; ++j) lin += b[j] * gg[j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) mass += std::exp((ff[i] + gg[j] - cost(i, j)) / eps);
    return lin - eps * mass;
  };
  const double base = dual(f, g);
  std::vector<double> ft(n), gt(m);
  for (double t = 1.0; t > 1e-6; t *= 0.5) {
    for (std::size_t i = 0; i < n; ++i) ft[i] = f[i] + t * step(i);
    for (std::size_t j = 0; j < m; ++j) gt[j] = g[j] + (j + 1 < m ? t * step(n + j) : 0.0);
    if (dual(ft, gt) > base) {
      f.swap(ft);
      g.swap(gt);
      return t;
    }
  }
  return 0.0;
}

}  // namespace

TransportPlan wc_sinkhorn(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostMatrix& cost,
                          double epsilon, const SinkhornOptions& opts) {
  if (!(epsilon > 0.0)) throw DomainError("wc_sinkhorn: epsilon must be positive");
  check_problem(mu, nu, cost);
  const std::size_t n = mu.size(), m = nu.size();
  if (n > kMaxSinkhornSide || m > kMaxSinkhornSide) throw ShapeError("wc_sinkhorn: problem exceeds the size cap");
  for (double w : mu.weights)
    if (w <= 0.0) throw ContractError("wc_sinkhorn: weights must be strictly positive");
  for (double w : nu.weights)
    if (w <= 0.0) throw ContractError("wc_sinkhorn: weights must be strictly positive");

  std::vector<double> loga(n), logb(m), f(n, 0.0), g(m, 0.0), buf(std::max(n, m));
  for (std::size_t i = 0; i < n; ++i) loga[i] = std::log(mu.weights[i]);
  for (std::size_t j = 0; j < m; ++j) logb[j] = std::log(nu.weights[j]);

  auto update = [&](double eps) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - cost(i, j)) / eps;
      f[i] = eps * (loga[i] - log_sum_exp(buf.data(), m, 1));
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - cost(i, j)) / eps;
      g[j] = eps * (logb[j] - log_sum_exp(buf.data(), n, 1));
    }
  };
  auto row_error = [&](double eps) {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < m; ++j) r += std::exp((f[i] + g[j] - cost(i, j)) / eps);
      err += std::abs(r - mu.weights[i]);
    }
    return err;
  };

  std::size_t iters = 0;
  double err = kInf;
  double eps = std::max(epsilon, cost.max());
  while (eps > epsilon) {
    for (int k = 0; k < 50; ++k) {
      update(eps);
      if (++iters >= opts.max_iterations) throw ConvergenceError("wc_sinkhorn: iteration budget exhausted", err);
      if (k % 5 == 4 && row_error(eps) < 1e-3) break;
    }
    eps = std::max(epsilon, eps * opts.scaling_factor);
  }
  const bool can_polish = n + m <= kMaxNewtonUnknowns;
  double last_check = kInf;
  for (std::size_t k = 1;; ++k) {
    update(epsilon);
    ++iters;
    err = row_error(epsilon);
    if (err < opts.tolerance) break;
    if (iters >= opts.max_iterations) throw ConvergenceError("wc_sinkhorn: no convergence within budget", err);
    if (can_polish && k % opts.stall_window == 0) {
      if (err > opts.stall_ratio * last_check) {
        for (int s = 0; s < 100 && iters < opts.max_iterations; ++s) {
          const double t = newton_polish(f, g, mu.weights, nu.weights, cost, epsilon);
          update(epsilon);
          ++iters;
          err = row_error(epsilon);
          if (err < opts.tolerance || t == 0.0) break;
        }
        if (err < opts.tolerance) break;
      }
      last_check = err;
    }
  }

  TransportPlan plan;
  plan.rows = n;
  plan.cols = m;
  plan.method = TransportMethod::Sinkhorn;
  plan.epsilon = epsilon;
  plan.iterations = iters;
  plan.marginal_error = err;
  plan.coupling.resize(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) plan.coupling[i * m + j] = std::exp((f[i] + g[j] - cost(i, j)) / epsilon);

  // Round onto the exact marginals.
  std::vector<double> r(n, 0.0), c(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) r[i] += plan.coupling[i * m + j];
  for (std::size_t i = 0; i < n; ++i) {
    const double x = r[i] > 0.0 ? std::min(1.0, mu.weights[i] / r[i]) : 1.0;
    for (std::size_t j = 0; j < m; ++j) plan.coupling[i * m + j] *= x;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c[j] += plan.coupling[i * m + j];
  for (std::size_t j = 0; j < m; ++j) {
    const double y = c[j] > 0.0 ? std::min(1.0, nu.weights[j] / c[j]) : 1.0;
    for (std::size_t i = 0; i < n; ++i) plan.coupling[i * m + j] *= y;
  }
  std::fill(r.begin(), r.end(), 0.0);
  std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      r[i] += plan.coupling[i * m + j];
      c[j] += plan.coupling[i * m + j];
    }
  double deficit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = mu.weights[i] - r[i];
    deficit += r[i];
  }
  for (std::size_t j = 0; j < m; ++j) c[j] = nu.weights[j] - c[j];
  if (deficit > 0.0)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) plan.coupling[i * m + j] += r[i] * c[j] / deficit;

  plan.cost = plan_cost(plan, cost);
  double dual = 0.0;
  for (std::size_t i = 0; i < n; ++i) dual += mu.weights[i] * f[i];
  for (std::size_t j = 0; j < m; ++j) dual += nu.weights[j] * g[j];
  plan.dual_value = dual;
  return plan;
}

double synchronous_cost(std::size_t n_left, std::size_t n_right, const std::function<double(std::size_t)>& paired) {
  if (n_left != n_right || n_left == 0) throw ContractError("synchronous_cost: clouds are not paired");
  double acc = 0.0;
  for (std::size_t i = 0; i < n_left; ++i) {
    const double c = paired(i);
    check_entry(c, i, i);
    acc += c;
  }
  return acc / static_cast<double>(n_left);
}

double synchronous_cost(const CostMatrix& cost) {
  return synchronous_cost(cost.rows, cost.cols, [&](std::size_t i) { return cost(i, i); });
}

double entropy_shift(const CameronMartinShift& h) { return 0.5 * h.norm_sq; }

std::vector<double> inf_convolution(std::span<const double> g_on_x, const CostMatrix& cost) {
  if (g_on_x.size() != cost.rows) throw ShapeError("inf_convolution: g does not match the cost rows");
  std::vector<double> out(cost.cols, -kInf);
  for (std::size_t i = 0; i < cost.rows; ++i)
    for (std::size_t j = 0; j < cost.cols; ++j) out[j] = std::max(out[j], g_on_x[i] - cost(i, j));
  return out;
}

void write_plan_csv(std::ostream& out, const TransportPlan& plan, double threshold) {
  out << "i,j,mass\n";
  out.precision(17);
  for (std::size_t i = 0; i < plan.rows; ++i)
    for (std::size_t j = 0; j < plan.cols; ++j)
      if (plan.mass(i, j) > threshold) out << i << ',' << j << ',' << plan.mass(i, j) << '\n';
}

}  // namespace tcilab
