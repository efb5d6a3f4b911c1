#include "tcilab/wlsi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "tcilab/gauss_sim.hpp"
#include "tcilab/rde_solver.hpp"
#include "tcilab/rng.hpp"
#include "tcilab/rough_path.hpp"
#include "tcilab/tci_verify.hpp"
#include "parallel.hpp"

namespace tcilab {

namespace {

using detail::for_each_index;

constexpr double kLogFloor = 1e-300;

Eigen::Matrix3d so3_generator(std::size_t k, double scale) {
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
  const std::size_t i = (k + 1) % 3, j = (k + 2) % 3;
  a(j, i) = scale;
  a(i, j) = -scale;
  return a;
}

std::vector<double> row_major(const Eigen::Matrix3d& a) {
  std::vector<double> out(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[i * 3 + j] = a(i, j);
  return out;
}

// Prefix sums of the piecewise-linear path, (N+1) x d.
std::vector<double> prefix_path(std::span<const double> inc, std::size_t n, std::size_t d) {
  std::vector<double> x((n + 1) * d, 0.0);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t k = 0; k < d; ++k) x[(l + 1) * d + k] = x[l * d + k] + inc[l * d + k];
  return x;
}

double euclid(const double* v, std::size_t d) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += v[k] * v[k];
  return std::sqrt(s);
}

// Level-2 iterated integral XX_{a,b} of the piecewise-linear path.
std::vector<double> level2(const std::vector<double>& x, std::span<const double> inc, std::size_t d, std::size_t a,
                           std::size_t b) {
  std::vector<double> out(d * d, 0.0);
  for (std::size_t r = a; r < b; ++r)
    for (std::size_t j = 0; j < d; ++j) {
      const double left = x[r * d + j] - x[a * d + j] + 0.5 * inc[r * d + j];
      for (std::size_t k = 0; k < d; ++k) out[j * d + k] += left * inc[r * d + k];
    }
  return out;
}

// Adds scale * d|X_{a,b}| / d dW into row `out` of g.
void add_level1_norm_gradient(const std::vector<double>& x, std::size_t d, std::size_t a, std::size_t b, double scale,
                              Eigen::MatrixXd& g, Eigen::Index out) {
  std::vector<double> diff(d);
  for (std::size_t k = 0; k < d; ++k) diff[k] = x[b * d + k] - x[a * d + k];
  const double norm = euclid(diff.data(), d);
  if (norm == 0.0) return;
  for (std::size_t r = a; r < b; ++r)
    for (std::size_t k = 0; k < d; ++k) g(out, r * d + k) += scale * diff[k] / norm;
}

// Adds sum_{jk} weight_{jk} dXX^{jk}_{a,b} / d dW into row `out` of g.
void add_level2_gradient(const std::vector<double>& x, std::span<const double> inc, std::size_t d, std::size_t a,
                         std::size_t b, const std::vector<double>& weight, Eigen::MatrixXd& g, Eigen::Index out) {
  for (std::size_t r = a; r < b; ++r)
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) {
        const double w = weight[j * d + k];
        if (w == 0.0) continue;
        // d/d dW_r^k of the left factor times dW^k, and d/d dW_r^j of the
        // remaining increments of component k.
        g(out, r * d + k) += w * (x[r * d + j] - x[a * d + j] + 0.5 * inc[r * d + j]);
        g(out, r * d + j) += w * (x[b * d + k] - x[(r + 1) * d + k] + 0.5 * inc[r * d + k]);
      }
}

struct HolderArgmax {
  double value = 0.0;
  std::size_t a = 0, b = 1;
};

HolderArgmax holder_on_grid(const std::vector<double>& x, const TimeGrid& grid, std::size_t d, double alpha) {
  HolderArgmax best;
  const std::size_t np = grid.size();
  std::vector<double> diff(d);
  for (std::size_t a = 0; a + 1 < np; ++a)
    for (std::size_t b = a + 1; b < np; ++b) {
      for (std::size_t k = 0; k < d; ++k) diff[k] = x[b * d + k] - x[a * d + k];
      const double v = euclid(diff.data(), d) / std::pow(grid[b] - grid[a], alpha);
      if (v > best.value) best = {v, a, b};
    }
  return best;
}

Path path_from_increments(const GridPtr& grid, std::size_t d, std::span<const double> inc) {
  return Path(grid, d, prefix_path(inc, grid->steps(), d));
}

std::vector<double> increments_of(const Path& path) {
  const std::size_t n = path.grid->steps(), d = path.dim;
  std::vector<double> inc(n * d);
  for (std::size_t l = 0; l < n; ++l)
    for (std::size_t k = 0; k < d; ++k) inc[l * d + k] = path.increment(l, k);
  return inc;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of_mean(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

std::string to_string(WlsiKind kind) {
  switch (kind) {
    case WlsiKind::PolynomialWienerIntegrals: return "polynomial";
    case WlsiKind::RoughPathTriple: return "rough-path-triple";
    case WlsiKind::RdeEndpoint: return "rde-endpoint";
  }
  return "unknown";
}

WlsiKind wlsi_kind_from_string(const std::string& name) {
  for (auto k : {WlsiKind::PolynomialWienerIntegrals, WlsiKind::RoughPathTriple, WlsiKind::RdeEndpoint})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown WLSI functional '" + name + "'");
}

FunctionalSpec FunctionalSpec::polynomial(GridPtr grid, std::vector<std::vector<double>> integrands,
                                          std::vector<int> powers) {
  FunctionalSpec s;
  s.kind = WlsiKind::PolynomialWienerIntegrals;
  s.grid = std::move(grid);
  s.driver_dim = 1;
  s.integrands = std::move(integrands);
  s.powers = std::move(powers);
  s.validate();
  return s;
}

FunctionalSpec FunctionalSpec::rough_path_triple(GridPtr grid, std::size_t dim, double alpha, std::size_t s_index,
                                                 std::size_t t_index) {
  FunctionalSpec s;
  s.kind = WlsiKind::RoughPathTriple;
  s.grid = std::move(grid);
  s.driver_dim = dim;
  s.alpha = alpha;
  s.s_index = s_index;
  s.t_index = t_index;
  s.validate();
  return s;
}

FunctionalSpec FunctionalSpec::rde_endpoint(GridPtr grid, double p, double field_scale, std::vector<double> y0) {
  FunctionalSpec s;
  s.kind = WlsiKind::RdeEndpoint;
  s.grid = std::move(grid);
  s.driver_dim = 3;
  s.p = p;
  s.field_scale = field_scale;
  s.y0 = std::move(y0);
  s.validate();
  return s;
}

void FunctionalSpec::validate() const {
  if (!grid || grid->steps() < 1) throw ConfigError("wlsi: functional needs a grid");
  const std::size_t n = grid->steps();
  switch (kind) {
    case WlsiKind::PolynomialWienerIntegrals:
      if (driver_dim != 1) throw ConfigError("wlsi polynomial: driver must be one-dimensional");
      if (integrands.empty() || integrands.size() != powers.size())
        throw ConfigError("wlsi polynomial: need one power per integrand");
      for (const auto& h : integrands)
        if (h.size() != n) throw ConfigError("wlsi polynomial: integrands must have one value per cell");
      for (int p : powers)
        if (p < 1) throw ConfigError("wlsi polynomial: powers must be >= 1");
      break;
    case WlsiKind::RoughPathTriple:
      if (driver_dim < 1) throw ConfigError("wlsi triple: dimension must be positive");
      if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("wlsi triple: alpha must lie in (0, 1/2)");
      if (!(s_index < t_index && t_index <= n)) throw ConfigError("wlsi triple: need s < t on the grid");
      break;
    case WlsiKind::RdeEndpoint:
      if (driver_dim != 3 || y0.size() != 3) throw ConfigError("wlsi rde: so(3) fields need d = m = 3");
      if (!(p >= 2.0 && p < 3.0)) throw ConfigError("wlsi rde: p must lie in [2, 3)");
      if (!(field_scale > 0.0)) throw ConfigError("wlsi rde: field_scale must be positive");
      break;
  }
}

std::string FunctionalSpec::id() const { return to_string(kind); }

std::size_t FunctionalSpec::output_dim() const {
  switch (kind) {
    case WlsiKind::PolynomialWienerIntegrals: return integrands.size();
    case WlsiKind::RoughPathTriple: return 1 + driver_dim + driver_dim * driver_dim;
    case WlsiKind::RdeEndpoint: return 1 + y0.size();
  }
  return 0;
}

std::vector<double> FunctionalSpec::evaluate(std::span<const double> inc) const {
  if (inc.size() != input_size()) throw ShapeError("wlsi: increments do not match the grid");
  const std::size_t n = grid->steps(), d = driver_dim;
  std::vector<double> out;
  switch (kind) {
    case WlsiKind::PolynomialWienerIntegrals:
      for (std::size_t k = 0; k < integrands.size(); ++k) {
        double xh = 0.0;
        for (std::size_t l = 0; l < n; ++l) xh += integrands[k][l] * inc[l];
        out.push_back(std::pow(xh, powers[k]));
      }
      break;
    case WlsiKind::RoughPathTriple: {
      const auto x = prefix_path(inc, n, d);
      out.push_back(holder_on_grid(x, *grid, d, alpha).value);
      for (std::size_t k = 0; k < d; ++k) out.push_back(x[t_index * d + k] - x[s_index * d + k]);
      const auto xx = level2(x, inc, d, s_index, t_index);
      out.insert(out.end(), xx.begin(), xx.end());
      break;
    }
    case WlsiKind::RdeEndpoint: {
      const RoughPath rp = lift_piecewise_linear(path_from_increments(grid, d, inc));
      out.push_back(p_var_norm(rp, p).value);
      std::vector<std::vector<double>> mats;
      for (std::size_t k = 0; k < 3; ++k) mats.push_back(row_major(so3_generator(k, field_scale)));
      const LinearVectorField field(3, mats);
      const auto sol = solve_rde(rp, field, y0);
      const auto end = sol.state(n);
      out.insert(out.end(), end.begin(), end.end());
      break;
    }
  }
  return out;
}

Eigen::MatrixXd FunctionalSpec::gradient(std::span<const double> inc) const {
  if (inc.size() != input_size()) throw ShapeError("wlsi: increments do not match the grid");
  const std::size_t n = grid->steps(), d = driver_dim;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(output_dim()),
                                            static_cast<Eigen::Index>(input_size()));
  switch (kind) {
    case WlsiKind::PolynomialWienerIntegrals:
      for (std::size_t k = 0; k < integrands.size(); ++k) {
        double xh = 0.0;
        for (std::size_t l = 0; l < n; ++l) xh += integrands[k][l] * inc[l];
        const double factor = powers[k] * std::pow(xh, powers[k] - 1);
        for (std::size_t l = 0; l < n; ++l) g(k, l) = factor * integrands[k][l];
      }
      break;
    case WlsiKind::RoughPathTriple: {
      const auto x = prefix_path(inc, n, d);
      const auto h = holder_on_grid(x, *grid, d, alpha);
      add_level1_norm_gradient(x, d, h.a, h.b, 1.0 / std::pow((*grid)[h.b] - (*grid)[h.a], alpha), g, 0);
      for (std::size_t k = 0; k < d; ++k)
        for (std::size_t r = s_index; r < t_index; ++r) g(1 + k, r * d + k) = 1.0;
      for (std::size_t e = 0; e < d * d; ++e) {
        std::vector<double> w(d * d, 0.0);
        w[e] = 1.0;
        add_level2_gradient(x, inc, d, s_index, t_index, w, g, static_cast<Eigen::Index>(1 + d + e));
      }
      break;
    }
    case WlsiKind::RdeEndpoint: {
      // p-variation: Psi_1^{1-p} sum_i w_i^{p-1} grad w_i over the optimal
      // dissection, w = |X| + |XX|_F.
      const auto x = prefix_path(inc, n, d);
      const RoughPath rp = lift_piecewise_linear(Path(grid, d, x));
      const PVarResult pv = p_var_norm(rp, p);
      for (std::size_t i = 0; i + 1 < pv.partition.size(); ++i) {
        const std::size_t a = pv.partition[i], b = pv.partition[i + 1];
        std::vector<double> xx = level2(x, inc, d, a, b);
        double x1 = 0.0, x2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) x1 += std::pow(x[b * d + k] - x[a * d + k], 2);
        for (double v : xx) x2 += v * v;
        const double w = std::sqrt(x1) + std::sqrt(x2);
        if (w == 0.0) continue;
        const double scale = std::pow(w / pv.value, p - 1.0);
        add_level1_norm_gradient(x, d, a, b, scale, g, 0);
        if (x2 > 0.0) {
          for (double& v : xx) v *= scale / std::sqrt(x2);
          add_level2_gradient(x, inc, d, a, b, xx, g, 0);
        }
      }
      // Endpoint: dY_N / d dW_l^c = Q_{l+1} (A_c + (A_c B_l + B_l A_c) / 2) Y_l with
      // M_l = I + B_l + B_l^2 / 2 the Davie step and Q_{l+1} = M_{N-1} ... M_{l+1}.
      std::array<Eigen::Matrix3d, 3> A;
      for (std::size_t k = 0; k < 3; ++k) A[k] = so3_generator(k, field_scale);
      std::vector<Eigen::Matrix3d> B(n), M(n);
      std::vector<Eigen::Vector3d> Y(n + 1);
      Y[0] = Eigen::Vector3d(y0[0], y0[1], y0[2]);
      for (std::size_t l = 0; l < n; ++l) {
        B[l] = inc[l * 3] * A[0] + inc[l * 3 + 1] * A[1] + inc[l * 3 + 2] * A[2];
        M[l] = Eigen::Matrix3d::Identity() + B[l] + 0.5 * B[l] * B[l];
        Y[l + 1] = M[l] * Y[l];
      }
      Eigen::Matrix3d Q = Eigen::Matrix3d::Identity();
      for (std::size_t l = n; l-- > 0;) {
        for (std::size_t c = 0; c < 3; ++c) {
          const Eigen::Vector3d col = Q * ((A[c] + 0.5 * (A[c] * B[l] + B[l] * A[c])) * Y[l]);
          for (int i = 0; i < 3; ++i) g(1 + i, l * 3 + c) = col(i);
        }
        Q = Q * M[l];
      }
      break;
    }
  }
  return g;
}

double FunctionalSpec::gradient_norm(const Eigen::MatrixXd& grad) const {
  const std::size_t n = grid->steps(), d = driver_dim;
  double s = 0.0;
  for (Eigen::Index i = 0; i < grad.rows(); ++i)
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t k = 0; k < d; ++k) s += grad(i, l * d + k) * grad(i, l * d + k) * grid->dt(l);
  return std::sqrt(s);
}

Eigen::VectorXd FunctionalSpec::directional(const Eigen::MatrixXd& grad, std::span<const double> h) const {
  if (h.size() != input_size()) throw ShapeError("wlsi: direction does not match the grid");
  const Eigen::Map<const Eigen::VectorXd> hv(h.data(), static_cast<Eigen::Index>(h.size()));
  return grad * hv;
}

double FunctionalSpec::stated_constant() const {
  const double T = grid->horizon();
  switch (kind) {
    case WlsiKind::PolynomialWienerIntegrals: {
      // ||D Psi|| <= max_k p_k ||h_k|| sum_k |X(h_k)|^{p_k-1} <= m max_k p_k ||h_k|| (1 + |Psi|_1).
      double worst = 0.0;
      for (std::size_t k = 0; k < integrands.size(); ++k) {
        double h2 = 0.0;
        for (std::size_t l = 0; l < grid->steps(); ++l) h2 += integrands[k][l] * integrands[k][l] * grid->dt(l);
        worst = std::max(worst, powers[k] * std::sqrt(h2));
      }
      const double C = static_cast<double>(integrands.size()) * worst;
      return C * C;
    }
    case WlsiKind::RoughPathTriple: {
      // ||D Psi_1|| <= T^{1/2-alpha}, ||D Psi_2|| = sqrt(d (t-s)),
      // ||D Psi_3|| <= sqrt(2 d (d+1)) (t-s)^{1/2+alpha} Psi_1.
      const double d = static_cast<double>(driver_dim);
      const double span = (*grid)[t_index] - (*grid)[s_index];
      const double c0 = std::pow(T, 0.5 - alpha) + std::sqrt(d * span);
      const double c1 = std::sqrt(2.0 * d * (d + 1.0)) * std::pow(span, 0.5 + alpha);
      const double C = std::max(c0, c1);
      return C * C;
    }
    case WlsiKind::RdeEndpoint: {
      // ||D Psi_1||^2 <= T (1 + kappa Psi_1)^2 <= 2 T (1 + kappa^2) exp(Psi_1^p), kappa^2 = 2 d (d+1);
      // the rotation flow has unit Jacobian, so ||D Y_T||^2 <= T |y0|^2 sum_k ||A_k||^2,
      // doubled for the discrete step.
      const double d = static_cast<double>(driver_dim);
      const double kappa2 = 2.0 * d * (d + 1.0);
      double y2 = 0.0;
      for (double v : y0) y2 += v * v;
      return 2.0 * T * (1.0 + kappa2) + 2.0 * T * y2 * 3.0 * field_scale * field_scale;
    }
  }
  return 0.0;
}

WeightSpec WeightSpec::constant(double level, double c) {
  return {"constant", [level](std::span<const double>) { return level; }, c};
}

WeightSpec WeightSpec::l1_squared(double c) {
  return {"(1+|x|_1)^2",
          [](std::span<const double> x) {
            double s = 1.0;
            for (double v : x) s += std::abs(v);
            return s * s;
          },
          c};
}

WeightSpec WeightSpec::first_squared(double c) {
  return {"(1+x_1)^2", [](std::span<const double> x) { return (1.0 + x[0]) * (1.0 + x[0]); }, c};
}

WeightSpec WeightSpec::exp_power(double p, double c) {
  return {"x_1+exp(x_1^p)", [p](std::span<const double> x) { return x[0] + std::exp(std::pow(x[0], p)); }, c};
}

WeightSpec stated_weight(const FunctionalSpec& spec) {
  switch (spec.kind) {
    case WlsiKind::PolynomialWienerIntegrals: return WeightSpec::l1_squared(spec.stated_constant());
    case WlsiKind::RoughPathTriple: return WeightSpec::first_squared(spec.stated_constant());
    case WlsiKind::RdeEndpoint: return WeightSpec::exp_power(spec.p, spec.stated_constant());
  }
  throw ConfigError("stated_weight: unknown functional");
}

FunctionalSamples draw_samples(const FunctionalSpec& spec, std::size_t n, std::uint64_t seed, bool parallel) {
  spec.validate();
  const GaussianSampler sampler(DriverSpec::brownian(spec.driver_dim), spec.grid);
  FunctionalSamples out;
  out.m = spec.output_dim();
  out.values.resize(n * out.m);
  out.gradient_norms.resize(n);
  for_each_index(n, parallel, [&](std::size_t i) {
    const auto inc = increments_of(sampler.sample(seed, i));
    const auto psi = spec.evaluate(inc);
    std::copy(psi.begin(), psi.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * out.m));
    out.gradient_norms[i] = spec.gradient_norm(spec.gradient(inc));
  });
  return out;
}

GradientValidation validate_gradient(const FunctionalSpec& spec, std::uint64_t seed, std::size_t samples,
                                     std::size_t directions, double eps) {
  spec.validate();
  const GaussianSampler sampler(DriverSpec::brownian(spec.driver_dim), spec.grid);
  const std::size_t n = spec.grid->steps(), d = spec.driver_dim;
  GradientValidation v;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto inc = increments_of(sampler.sample(seed, s));
    const auto base = spec.evaluate(inc);
    const auto grad = spec.gradient(inc);
    const double gnorm = spec.gradient_norm(grad);
    RandomStream rng(derive_stream(seed, 0x9d), s);
    for (std::size_t k = 0; k < directions; ++k) {
      std::vector<double> z(n * d);
      rng.fill_normal(z.data(), z.size());
      double norm2 = 0.0;
      for (double zi : z) norm2 += zi * zi;
      std::vector<double> h(n * d), moved(n * d);
      for (std::size_t l = 0; l < n; ++l)
        for (std::size_t c = 0; c < d; ++c) {
          h[l * d + c] = std::sqrt(spec.grid->dt(l)) * z[l * d + c] / std::sqrt(norm2);
          moved[l * d + c] = inc[l * d + c] + eps * h[l * d + c];
        }
      const auto shifted = spec.evaluate(moved);
      const Eigen::VectorXd an = spec.directional(grad, h);
      double err = 0.0;
      for (std::size_t i = 0; i < base.size(); ++i) err += std::pow((shifted[i] - base[i]) / eps - an(i), 2);
      v.worst = std::max(v.worst, std::sqrt(err) / (1.0 + gnorm));
      ++v.checks;
    }
  }
  v.pass = v.worst <= kGradientTolerance;
  return v;
}

GradientBoundReport check_gradient_bound(const FunctionalSpec& spec, const WeightSpec& weight, std::size_t n,
                                         std::uint64_t seed, bool parallel) {
  if (n == 0) throw DomainError("check_gradient_bound: need samples");
  GradientBoundReport r;
  r.functional_id = spec.id();
  r.weight_name = weight.name;
  r.n = n;
  r.stated_constant = weight.c;
  r.validation = validate_gradient(spec, derive_stream(seed, 0x61));
  if (!r.validation.pass)
    throw ContractError("check_gradient_bound: gradient of '" + spec.id() +
                        "' fails finite-difference validation (worst " + std::to_string(r.validation.worst) + ")");
  const auto s = draw_samples(spec, n, seed, parallel);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g2 = s.gradient_norms[i] * s.gradient_norms[i];
    const double G = weight.G(s.row(i));
    if (G < 0.0 || std::isnan(G)) throw DomainError("check_gradient_bound: weight must be nonnegative");
    r.fitted_constant = std::max(r.fitted_constant, G > 0.0 ? g2 / G : (g2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0));
    ok += g2 <= weight.c * G * (1.0 + 1e-12) ? 1 : 0;
  }
  r.fraction = static_cast<double>(ok) / static_cast<double>(n);
  r.pass = ok == n;
  if (spec.kind == WlsiKind::RdeEndpoint) {
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = std::pow(s.values[i * s.m], spec.p);
      ys[i] = std::log(std::max(s.gradient_norms[i], kLogFloor));
    }
    const auto fit = fit_line(xs, ys);
    r.envelope_intercept = fit.intercept;
    r.envelope_slope = fit.slope;
    r.envelope_r_squared = fit.r_squared;
  }
  return r;
}

std::vector<TestFunction> default_test_family(std::size_t m) {
  std::vector<TestFunction> fam;
  for (std::size_t i = 0; i < m; ++i) {
    fam.push_back({"x" + std::to_string(i + 1), [i](std::span<const double> x) { return x[i]; },
                   [i](std::span<const double>, std::span<double> g) {
                     std::fill(g.begin(), g.end(), 0.0);
                     g[i] = 1.0;
                   },
                   1.0});
  }
  const std::array<std::pair<double, double>, 3> ab{{{1.0, 0.0}, {2.0, 0.5}, {0.5, -1.0}}};
  for (std::size_t i = 0; i < m; ++i)
    for (auto [a, b] : ab) {
      char name[64];
      std::snprintf(name, sizeof name, "tanh(%g*x%zu%+g)", a, i + 1, b);
      fam.push_back({name,
                     [i, a, b](std::span<const double> x) { return std::tanh(a * x[i] + b); },
                     [i, a, b](std::span<const double> x, std::span<double> g) {
                       std::fill(g.begin(), g.end(), 0.0);
                       const double t = std::tanh(a * x[i] + b);
                       g[i] = a * (1.0 - t * t);
                     },
                     a});
    }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      fam.push_back({"x" + std::to_string(i + 1) + "*x" + std::to_string(j + 1),
                     [i, j](std::span<const double> x) { return x[i] * x[j]; },
                     [i, j](std::span<const double> x, std::span<double> g) {
                       std::fill(g.begin(), g.end(), 0.0);
                       g[i] = x[j];
                       g[j] = x[i];
                     },
                     -1.0});
  return fam;
}

TestFunction constant_test_function(double value) {
  return {"constant", [value](std::span<const double>) { return value; },
          [](std::span<const double>, std::span<double> g) { std::fill(g.begin(), g.end(), 0.0); }, 0.0};
}

EntropyEstimate entropy_of_square(std::span<const double> f_values) {
  const std::size_t n = f_values.size();
  if (n < 2) throw DomainError("entropy_of_square: need at least two samples");
  double sum_g = 0.0, sum_glog = 0.0;
  std::vector<double> g(n), glog(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = f_values[i] * f_values[i];
    glog[i] = g[i] * std::log(std::max(g[i], kLogFloor));
    sum_g += g[i];
    sum_glog += glog[i];
  }
  const double nn = static_cast<double>(n);
  const auto ent = [](double mean_g, double mean_glog) {
    return mean_glog - mean_g * std::log(std::max(mean_g, kLogFloor));
  };
  EntropyEstimate e;
  e.plug_in = ent(sum_g / nn, sum_glog / nn);
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) loo[i] = ent((sum_g - g[i]) / (nn - 1), (sum_glog - glog[i]) / (nn - 1));
  const double loo_mean = mean_of(loo);
  e.value = nn * e.plug_in - (nn - 1) * loo_mean;
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  e.sigma = std::sqrt((nn - 1) / nn * ss);
  return e;
}

WlsiReport check_wlsi(const FunctionalSamples& samples, std::span<const double> weight_values, double constant,
                      const std::vector<TestFunction>& family) {
  const std::size_t n = samples.size(), m = samples.m;
  if (n < 2) throw DomainError("check_wlsi: need at least two samples");
  if (weight_values.size() != n) throw ShapeError("check_wlsi: one weight value per sample");
  WlsiReport rep;
  rep.constant = constant;
  std::vector<double> f(n), energy(n), grad(m);
  for (const auto& tf : family) {
    WlsiRow row;
    row.name = tf.name;
    double second = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = samples.row(i);
      f[i] = tf.f(x);
      tf.grad(x, grad);
      double g2 = 0.0;
      for (double v : grad) g2 += v * v;
      energy[i] = g2 == 0.0 ? 0.0 : g2 * weight_values[i];
      second += f[i] * f[i];
    }
    if (second / static_cast<double>(n) < kMinSecondMoment) {
      row.dropped = true;
      row.pass = true;
      rep.rows.push_back(row);
      continue;
    }
    const auto ent = entropy_of_square(f);
    row.entropy = ent.value;
    row.entropy_sigma = ent.sigma;
    const double e_mean = mean_of(energy);
    row.rhs = 2.0 * constant * e_mean;
    row.rhs_sigma = std::isfinite(e_mean) ? 2.0 * constant * sd_of_mean(energy, e_mean) : 0.0;
    row.feasible_constant = e_mean > 0.0 ? std::max(0.0, ent.value) / (2.0 * e_mean) : (ent.value > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    const double mean_sq = second / static_cast<double>(n);
    const double roundoff = 1e-12 * mean_sq * (1.0 + std::abs(std::log(mean_sq)));
    row.pass = row.entropy <= row.rhs + std::max(3.0 * std::hypot(row.entropy_sigma, row.rhs_sigma), roundoff);
    rep.smallest_feasible_constant = std::max(rep.smallest_feasible_constant, row.feasible_constant);
    rep.rows.push_back(row);
  }
  rep.pass = std::all_of(rep.rows.begin(), rep.rows.end(), [](const WlsiRow& r) { return r.pass; });
  return rep;
}

WlsiReport check_wlsi(const FunctionalSamples& samples, const WeightSpec& weight,
                      const std::vector<TestFunction>& family) {
  std::vector<double> w(samples.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = weight.G(samples.row(i));
  return check_wlsi(samples, w, weight.c, family);
}

WlsiReport check_wlsi(const FunctionalSpec& spec, const WeightSpec& weight, const std::vector<TestFunction>& family,
                      std::size_t n, std::uint64_t seed, bool parallel) {
  return check_wlsi(draw_samples(spec, n, seed, parallel), weight, family);
}

FunctionalSamples marginal_samples(const FunctionalSamples& samples, std::size_t drop) {
  if (samples.m < 2 || drop >= samples.m) throw ShapeError("marginal_samples: need m >= 2 and drop < m");
  FunctionalSamples out;
  out.m = samples.m - 1;
  const std::size_t n = samples.size();
  out.values.reserve(n * out.m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < samples.m; ++k)
      if (k != drop) out.values.push_back(samples.values[i * samples.m + k]);
  return out;
}

std::vector<double> conditional_weight(const FunctionalSamples& samples, std::span<const double> weight_values,
                                       std::size_t drop, std::size_t k, bool parallel) {
  const auto rest = marginal_samples(samples, drop);
  const std::size_t n = rest.size(), m = rest.m;
  if (weight_values.size() != n) throw ShapeError("conditional_weight: one weight value per sample");
  if (k == 0) k = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  k = std::min(k, n);
  std::vector<double> out(n);
  for_each_index(n, parallel, [&](std::size_t i) {
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < m; ++c) {
        const double diff = rest.values[i * m + c] - rest.values[j * m + c];
        s += diff * diff;
      }
      dist[j] = {s, j};
    }
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    double acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) acc += weight_values[dist[j].second];
    out[i] = acc / static_cast<double>(k);
  });
  return out;
}

MomentReport check_moment_consequence(const FunctionalSamples& samples, const WeightSpec& weight,
                                      std::span<const double> p_grid, const std::vector<TestFunction>& family) {
  const std::size_t n = samples.size();
  if (n < 2) throw DomainError("check_moment_consequence: need at least two samples");
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = weight.c * weight.G(samples.row(i));
  MomentReport rep;
  std::vector<double> f(n), powered(n);
  for (double p : p_grid) {
    if (!(p >= 2.0)) throw DomainError("check_moment_consequence: p must be >= 2");
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      powered[i] = std::pow(w[i], p);
      s1 += powered[i];
      s2 += powered[i] * powered[i];
    }
    const double ess = s2 > 0.0 ? s1 * s1 / s2 : static_cast<double>(n);
    if (!std::isfinite(s2) || ess < kMinEffectiveWeightSamples) {
      rep.dropped_p.push_back(p);
      continue;
    }
    const double wm = s1 / static_cast<double>(n);
    const double rhs_norm = std::pow(wm, 1.0 / p);
    const double rhs_sigma = wm > 0.0 ? rhs_norm / (p * wm) * sd_of_mean(powered, wm) : 0.0;
    double sqrt_mean = 0.0;
    for (double v : w) sqrt_mean += std::pow(std::sqrt(v), p);
    const double rhs_sqrt = std::pow(sqrt_mean / static_cast<double>(n), 1.0 / p);
    for (const auto& tf : family) {
      if (tf.lipschitz < 0.0) continue;
      const double scale = tf.lipschitz > 0.0 ? 1.0 / tf.lipschitz : 1.0;
      for (std::size_t i = 0; i < n; ++i) f[i] = tf.f(samples.row(i)) * scale;
      const double centre = mean_of(f);
      for (std::size_t i = 0; i < n; ++i) powered[i] = std::pow(std::abs(f[i] - centre), p);
      const double fm = mean_of(powered);
      MomentRow row;
      row.name = tf.name;
      row.p = p;
      row.ess = ess;
      row.lhs = std::pow(fm, 1.0 / p);
      row.lhs_sigma = fm > 0.0 ? row.lhs / (p * fm) * sd_of_mean(powered, fm) : 0.0;
      row.rhs = std::sqrt(p - 1.0) * rhs_norm;
      row.rhs_sigma = std::sqrt(p - 1.0) * rhs_sigma;
      row.rhs_sqrt = std::sqrt(p - 1.0) * rhs_sqrt;
      row.pass = row.lhs <= row.rhs + 3.0 * std::hypot(row.lhs_sigma, row.rhs_sigma);
      rep.rows.push_back(row);
    }
  }
  rep.pass = !rep.rows.empty() &&
             std::all_of(rep.rows.begin(), rep.rows.end(), [](const MomentRow& r) { return r.pass; });
  return rep;
}

}  // namespace tcilab
