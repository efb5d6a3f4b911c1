#include "tcilab/tci_verify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "tcilab/rde_solver.hpp"
#include "tcilab/rng.hpp"
#include "tcilab/rough_path.hpp"
#include "tcilab/transport.hpp"
#include "parallel.hpp"

namespace tcilab {

namespace {

using detail::for_each_index;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct BootstrapSummary {
  double sigma = 0.0, lo = 0.0, hi = 0.0;
};

BootstrapSummary bootstrap_mean(std::span<const double> v, std::size_t resamples, RandomStream rng) {
  const std::size_t n = v.size();
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += v[std::min<std::size_t>(n - 1, static_cast<std::size_t>(rng.uniform() * n))];
    m = acc / static_cast<double>(n);
  }
  const double mu = mean_of(means);
  double var = 0.0;
  for (double m : means) var += (m - mu) * (m - mu);
  BootstrapSummary out;
  out.sigma = resamples > 1 ? std::sqrt(var / static_cast<double>(resamples - 1)) : 0.0;
  std::sort(means.begin(), means.end());
  const auto at = [&](double q) {
    return means[std::min(resamples - 1, static_cast<std::size_t>(q * static_cast<double>(resamples)))];
  };
  out.lo = at(0.025);
  out.hi = at(0.975);
  return out;
}

int polynomial_degree(const std::vector<double>& coeffs) {
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k)
    if (coeffs[k] != 0.0) return k;
  return 0;
}

double derived_q(const FunctionalConfig& c) {
  if (c.q > 0.0) return c.q;
  switch (c.driver.kind) {
    case DriverKind::FractionalBM:
    case DriverKind::RiemannLiouvilleFBM:
      return c.driver.hurst < 0.5 ? 1.0 / (c.driver.hurst + 0.5) : 1.0;
    default:
      return 1.0;
  }
}

template <class T>
const T& as(const std::any& a) {
  return *std::any_cast<const std::shared_ptr<const T>&>(a);
}

template <class T>
std::any wrap(T value) {
  return std::shared_ptr<const T>(std::make_shared<T>(std::move(value)));
}

class FunctionalBase : public TciFunctional {
 public:
  explicit FunctionalBase(const FunctionalConfig& c)
      : cfg_(c), driver_(c.driver), grid_(make_uniform_grid(c.horizon, c.steps)) {}
  const DriverSpec& driver() const override { return driver_; }
  const GridPtr& grid() const override { return grid_; }

 protected:
  FunctionalConfig cfg_;
  DriverSpec driver_;
  GridPtr grid_;
};

class IdentityFunctional final : public FunctionalBase {
 public:
  using FunctionalBase::FunctionalBase;
  std::string id() const override { return "identity"; }
  std::string cost_id() const override { return "cameron-martin"; }
  double regime_exponent() const override { return 1.0; }
  std::any evaluate(const Path& omega, const CameronMartinShift* h) const override {
    return wrap(h ? shift_path(omega, *h) : omega);
  }
  // ||a - b||_H for white-noise paths: sqrt(sum |increment difference|^2 / dt).
  double distance(const std::any& a, const std::any& b) const override {
    const Path& x = as<Path>(a);
    const Path& y = as<Path>(b);
    double acc = 0.0;
    for (std::size_t j = 0; j < grid_->steps(); ++j)
      for (std::size_t k = 0; k < x.dim; ++k) {
        const double diff = x.increment(j, k) - y.increment(j, k);
        acc += diff * diff / grid_->dt(j);
      }
    return std::sqrt(acc);
  }
  double size(const std::any& a) const override {
    const Path& x = as<Path>(a);
    double sup = 0.0;
    for (std::size_t i = 0; i < x.points(); ++i) {
      double r = 0.0;
      for (double v : x.row(i)) r += v * v;
      sup = std::max(sup, std::sqrt(r));
    }
    return sup;
  }
};

class LiftFunctional final : public FunctionalBase {
 public:
  using FunctionalBase::FunctionalBase;
  std::string id() const override { return "rough-path-lift"; }
  std::string cost_id() const override { return "pvar^(1/2)"; }
  double regime_exponent() const override { return 2.0; }
  std::any evaluate(const Path& omega, const CameronMartinShift* h) const override {
    RoughPath rp = lift_piecewise_linear(omega);
    return wrap(h ? translate(rp, *h) : std::move(rp));
  }
  double distance(const std::any& a, const std::any& b) const override {
    return pvar_distance(as<RoughPath>(a), as<RoughPath>(b), cfg_.p);
  }
  double size(const std::any& a) const override { return p_var_norm(as<RoughPath>(a), cfg_.p).value; }
};

std::vector<std::vector<double>> so3_generators(double scale) {
  return {{0, 0, 0, 0, 0, -scale, 0, scale, 0},
          {0, 0, scale, 0, 0, 0, -scale, 0, 0},
          {0, -scale, 0, scale, 0, 0, 0, 0, 0}};
}

class RdeFunctional final : public FunctionalBase {
 public:
  explicit RdeFunctional(const FunctionalConfig& c)
      : FunctionalBase(c), field_(3, so3_generators(c.field_scale)), q_(derived_q(c)) {}
  std::string id() const override { return "rde-solution"; }
  std::string cost_id() const override { return "pvar^(1/q)"; }
  double regime_exponent() const override { return q_; }
  std::any evaluate(const Path& omega, const CameronMartinShift* h) const override {
    const RoughPath rp = lift_piecewise_linear(omega);
    const RdeSolution y = h ? solve_shifted_rde(rp, *h, field_, y0_) : solve_rde(rp, field_, y0_);
    return wrap(y.as_path());
  }
  double distance(const std::any& a, const std::any& b) const override {
    return path_pvar_distance(as<Path>(a), as<Path>(b), cfg_.p);
  }
  double size(const std::any& a) const override { return path_p_var(as<Path>(a), cfg_.p).value; }

 private:
  LinearVectorField field_;
  double q_;
  std::vector<double> y0_{1.0, 0.0, 0.0};
};

class ItoModelFunctional final : public FunctionalBase {
 public:
  explicit ItoModelFunctional(const FunctionalConfig& c)
      : FunctionalBase(c),
        zero_(grid_, std::vector<double>(c.steps, 0.0), c.hurst, c.kappa, c.anchors),
        family_(TestFunctionFamily::anchors_of(zero_, c.scale_min, c.scale_max)) {}
  std::string id() const override { return "ito-model"; }
  std::string cost_id() const override { return "model^(1/(M+1))"; }
  double regime_exponent() const override { return zero_.M() + 1.0; }
  std::any evaluate(const Path& omega, const CameronMartinShift* h) const override {
    ItoModel m = build_ito_model(omega, cfg_.hurst, cfg_.kappa, cfg_.anchors);
    return wrap(h ? translate_model(m, *h) : std::move(m));
  }
  double distance(const std::any& a, const std::any& b) const override {
    return model_distance(as<ItoModel>(a), as<ItoModel>(b), family_);
  }
  double size(const std::any& a) const override { return model_distance(as<ItoModel>(a), zero_, family_); }

 private:
  ItoModel zero_;
  TestFunctionFamily family_;
};

class LogPriceFunctional final : public FunctionalBase {
 public:
  explicit LogPriceFunctional(const FunctionalConfig& c)
      : FunctionalBase(c), f_(VolatilityFunction::polynomial(c.volatility)), degree_(polynomial_degree(c.volatility)) {}
  std::string id() const override { return "log-price"; }
  std::string cost_id() const override { return "holder^(1/(r+1))"; }
  double regime_exponent() const override { return degree_ + 1.0; }
  std::any evaluate(const Path& omega, const CameronMartinShift* h) const override {
    return wrap(log_price(h ? shift_path(omega, *h) : omega, cfg_.hurst, f_));
  }
  double distance(const std::any& a, const std::any& b) const override {
    return holder_distance(as<Path>(a).values, as<Path>(b).values, *grid_, cfg_.holder);
  }
  double size(const std::any& a) const override { return holder_norm(as<Path>(a).values, *grid_, cfg_.holder); }

 private:
  VolatilityFunction f_;
  int degree_;
};

class ModelledFunctional final : public FunctionalBase {
 public:
  explicit ModelledFunctional(const FunctionalConfig& c)
      : FunctionalBase(c),
        f_(VolatilityFunction::polynomial(c.volatility)),
        degree_(polynomial_degree(c.volatility)),
        zero_model_(std::make_shared<const ItoModel>(grid_, std::vector<double>(c.steps, 0.0), c.hurst, c.kappa,
                                                     c.anchors)),
        family_(TestFunctionFamily::anchors_of(*zero_model_, c.scale_min, c.scale_max)),
        gamma_(c.gamma > 0.0 ? c.gamma : 0.5 * max_modelled_gamma(zero_model_->symbols())),
        zero_(lift_modelled_distribution(zero_model_, f_, gamma_)) {}
  std::string id() const override { return "modelled-distribution"; }
  std::string cost_id() const override { return "flat^(1/(N+M+1))"; }
  double regime_exponent() const override { return degree_ + zero_model_->M() + 1.0; }
  std::any evaluate(const Path& omega, const CameronMartinShift* h) const override {
    ItoModel m = build_ito_model(omega, cfg_.hurst, cfg_.kappa, cfg_.anchors);
    auto model = std::make_shared<const ItoModel>(h ? translate_model(m, *h) : std::move(m));
    return wrap(lift_modelled_distribution(std::move(model), f_, gamma_));
  }
  double distance(const std::any& a, const std::any& b) const override {
    return flat_distance(as<ModelledDistribution>(a), as<ModelledDistribution>(b), family_);
  }
  double size(const std::any& a) const override {
    return flat_distance(as<ModelledDistribution>(a), zero_, family_);
  }

 private:
  VolatilityFunction f_;
  int degree_;
  std::shared_ptr<const ItoModel> zero_model_;
  TestFunctionFamily family_;
  double gamma_;
  ModelledDistribution zero_;
};

struct LevelSet {
  std::vector<double> levels, survival;
  std::vector<std::size_t> counts;
  std::vector<bool> trusted;
};

LevelSet survival_levels(std::vector<double> sorted, const TailFitOptions& opts, std::span<const double> levels) {
  const std::size_t n = sorted.size();
  LevelSet out;
  if (!levels.empty()) {
    out.levels.assign(levels.begin(), levels.end());
    std::sort(out.levels.begin(), out.levels.end());
  } else {
    const double s_lo = static_cast<double>(opts.min_exceedances) / static_cast<double>(n);
    const double s_hi = opts.max_survival;
    if (s_lo < s_hi) {
      const std::size_t k = std::max<std::size_t>(opts.levels, 2);
      for (std::size_t i = 0; i < k; ++i) {
        const double s = s_hi * std::pow(s_lo / s_hi, static_cast<double>(i) / static_cast<double>(k - 1));
        const auto above = static_cast<std::size_t>(std::ceil(s * static_cast<double>(n)));
        const double r = sorted[n - std::clamp<std::size_t>(above, 1, n)];
        if (out.levels.empty() || r > out.levels.back()) out.levels.push_back(r);
      }
    }
  }
  for (double r : out.levels) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), r);
    const auto count = static_cast<std::size_t>(sorted.end() - it);
    const double s = static_cast<double>(count) / static_cast<double>(n);
    out.counts.push_back(count);
    out.survival.push_back(s);
    out.trusted.push_back(count >= opts.min_exceedances && r > 0.0 && s < 1.0);
  }
  return out;
}

std::vector<double> checked_sorted(std::span<const double> samples, const char* where) {
  std::vector<double> s(samples.begin(), samples.end());
  for (double v : s)
    if (!std::isfinite(v)) throw DomainError(std::string(where) + ": samples must be finite");
  std::sort(s.begin(), s.end());
  return s;
}

}  // namespace

DeviationFunction DeviationFunction::power_min(double constant, double a, double b, double breakpoint) {
  if (!(a > 0.0) || !(b > 0.0) || !(breakpoint > 0.0) || constant < 0.0)
    throw DomainError("DeviationFunction: exponents and breakpoint must be positive");
  return {Form::PowerMin, constant, std::min(a, b), std::max(a, b), breakpoint};
}

DeviationFunction DeviationFunction::talagrand(double constant, double p) {
  if (!(p > 0.0) || constant < 0.0) throw DomainError("DeviationFunction: p must be positive");
  return {Form::Talagrand, constant, 2.0 / p, 2.0 / p, 1.0};
}

DeviationFunction DeviationFunction::two_regime(double constant, double r, double breakpoint) {
  return power_min(constant, 2.0, 2.0 * r, breakpoint);
}

double DeviationFunction::shape(double t) const {
  if (t <= 0.0) return 0.0;
  if (form == Form::Talagrand) return std::pow(t, a);
  const double u = t / breakpoint;
  // u^a ∧ u^b with a <= b: the larger exponent wins below 1.
  return u <= 1.0 ? std::pow(u, b) : std::pow(u, a);
}

double fit_deviation_constant(const DeviationFunction& shape, std::span<const double> costs,
                              std::span<const double> entropies) {
  if (costs.size() != entropies.size()) throw ShapeError("fit_deviation_constant: length mismatch");
  double best = kInf;
  for (std::size_t k = 0; k < costs.size(); ++k) {
    const double s = shape.shape(costs[k]);
    if (s > 0.0) best = std::min(best, entropies[k] / s);
  }
  return best;
}

std::string to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::Identity: return "identity";
    case FunctionalKind::RoughPathLift: return "rough-path-lift";
    case FunctionalKind::RdeSolution: return "rde-solution";
    case FunctionalKind::ItoModel: return "ito-model";
    case FunctionalKind::LogPrice: return "log-price";
    case FunctionalKind::ModelledDistribution: return "modelled-distribution";
  }
  return "unknown";
}

FunctionalKind functional_kind_from_string(const std::string& name) {
  for (auto k : {FunctionalKind::Identity, FunctionalKind::RoughPathLift, FunctionalKind::RdeSolution,
                 FunctionalKind::ItoModel, FunctionalKind::LogPrice, FunctionalKind::ModelledDistribution})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown functional '" + name + "'");
}

void FunctionalConfig::validate() const {
  try {
    driver.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("functional driver: ") + e.what());
  }
  if (!(horizon > 0.0) || steps < 2) throw ConfigError("functional: horizon must be positive and steps >= 2");
  const bool white = driver.kind == DriverKind::BrownianMotion;
  switch (kind) {
    case FunctionalKind::Identity:
      if (!white) throw ConfigError("identity functional needs a Brownian (white-noise) driver");
      break;
    case FunctionalKind::RoughPathLift:
    case FunctionalKind::RdeSolution: {
      if (!driver.admits_level2_lift()) throw ConfigError("driver does not admit a level-2 lift");
      if (!(p > 2.0 && p < 3.0)) throw ConfigError("p-variation exponent must lie in (2, 3)");
      if (kind == FunctionalKind::RdeSolution) {
        if (driver.dim != 3) throw ConfigError("rde-solution uses so(3) fields and needs a 3-dimensional driver");
        const double qq = derived_q(*this);
        if (!(qq >= 1.0) || 1.0 / p + 1.0 / qq <= 1.0)
          throw ConfigError("q must satisfy q >= 1 and 1/p + 1/q > 1");
      }
      break;
    }
    case FunctionalKind::ItoModel:
    case FunctionalKind::LogPrice:
    case FunctionalKind::ModelledDistribution:
      if (!white || driver.dim != 1) throw ConfigError(to_string(kind) + " needs a one-dimensional Brownian driver");
      if (!(hurst > 0.0 && hurst < 0.5) || !(kappa > 0.0 && kappa < hurst))
        throw ConfigError("rough-volatility kernel needs 0 < kappa < H < 1/2");
      if (kind != FunctionalKind::ItoModel && volatility.empty())
        throw ConfigError("volatility polynomial must have at least one coefficient");
      if (kind == FunctionalKind::LogPrice && !(holder > 0.0 && holder < 0.5))
        throw ConfigError("log-price Holder exponent must lie in (0, 1/2)");
      break;
  }
}

std::unique_ptr<TciFunctional> make_functional(const FunctionalConfig& config) {
  config.validate();
  switch (config.kind) {
    case FunctionalKind::Identity: return std::make_unique<IdentityFunctional>(config);
    case FunctionalKind::RoughPathLift: return std::make_unique<LiftFunctional>(config);
    case FunctionalKind::RdeSolution: return std::make_unique<RdeFunctional>(config);
    case FunctionalKind::ItoModel: return std::make_unique<ItoModelFunctional>(config);
    case FunctionalKind::LogPrice: return std::make_unique<LogPriceFunctional>(config);
    case FunctionalKind::ModelledDistribution: return std::make_unique<ModelledFunctional>(config);
  }
  throw ConfigError("unknown functional");
}

std::string to_string(ShiftShape shape) {
  switch (shape) {
    case ShiftShape::Constant: return "constant";
    case ShiftShape::Sine: return "sine";
    case ShiftShape::Ramp: return "ramp";
  }
  return "unknown";
}

ShiftShape shift_shape_from_string(const std::string& name) {
  for (auto s : {ShiftShape::Constant, ShiftShape::Sine, ShiftShape::Ramp})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown shift shape '" + name + "'");
}

std::vector<double> ShiftRay::dyadic(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {std::exp2(lo)};
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k)
    t[k] = std::exp2(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
  return t;
}

CameronMartinShift ShiftRay::direction(const DriverSpec& driver, const GridPtr& grid) const {
  std::vector<double> v(grid->size() * driver.dim);
  const double horizon = grid->horizon();
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double t = (*grid)[i];
    double value = level;
    if (shape == ShiftShape::Sine) value = level * (1.0 + std::sin(2.0 * t));
    if (shape == ShiftShape::Ramp) value = level * t / horizon;
    for (std::size_t k = 0; k < driver.dim; ++k) v[i * driver.dim + k] = value;
  }
  return make_shift(driver, grid, std::move(v));
}

TciReport run_tci_experiment(const TciConfig& config) {
  auto functional = make_functional(config.functional);
  const double r = functional->regime_exponent();
  if (config.cost_exponent && std::abs(*config.cost_exponent - 1.0 / r) > 1e-12)
    throw ConfigError("cost exponent " + std::to_string(*config.cost_exponent) + " does not match " +
                      functional->cost_id() + " = " + std::to_string(1.0 / r) + " registered for " +
                      functional->id());
  if (config.ray.t_values.empty()) throw ConfigError("shift ray needs at least one t value");
  for (double t : config.ray.t_values)
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("shift ray t values must be finite and nonnegative");
  if (config.samples < 2) throw ConfigError("tci: samples must be at least 2");
  if (config.ot_samples < 1 || config.ot_samples > std::min<std::size_t>(config.samples, 1024))
    throw ConfigError("tci: ot_samples must lie in [1, min(samples, 1024)]");
  if (config.bootstrap < 1) throw ConfigError("tci: bootstrap needs at least one resample");
  if (!(config.breakpoint > 0.0)) throw ConfigError("tci: breakpoint must be positive");
  if (config.alpha_constant && !(*config.alpha_constant > 0.0)) throw ConfigError("tci: alpha constant must be positive");

  const auto& grid = functional->grid();
  const GaussianSampler sampler(functional->driver(), grid);
  const CameronMartinShift h0 = config.ray.direction(functional->driver(), grid);
  const std::size_t n = config.samples, m = config.ot_samples, K = config.ray.t_values.size();
  std::vector<CameronMartinShift> shifts;
  for (double t : config.ray.t_values) shifts.push_back(h0.scaled(t));

  std::vector<double> cost(n * K);
  std::vector<std::any> base(m);
  for_each_index(n, config.parallel, [&](std::size_t i) {
    const Path omega = sampler.sample(config.seed, i);
    std::any b = functional->evaluate(omega, nullptr);
    for (std::size_t k = 0; k < K; ++k)
      cost[i * K + k] = std::pow(functional->distance(b, functional->evaluate(omega, &shifts[k])), 1.0 / r);
    if (i < m) base[i] = std::move(b);
  });

  TciReport rep;
  rep.functional_id = functional->id();
  rep.cost_id = functional->cost_id();
  rep.regime_exponent = r;
  rep.cost_exponent = 1.0 / r;
  rep.samples = n;
  rep.ot_samples = m;
  const auto uniform = EmpiricalMeasure::uniform(m);
  std::vector<std::any> moved(m);
  for (std::size_t k = 0; k < K; ++k) {
    ShiftRow row;
    row.t = config.ray.t_values[k];
    row.shift_norm = cm_norm(shifts[k]);
    row.entropy = entropy_shift(shifts[k]);
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = cost[i * K + k];
    row.sync_cost = mean_of(c);
    const auto bs = bootstrap_mean(c, config.bootstrap, RandomStream(config.seed, derive_stream(0xB007, 2 * k)));
    row.sync_sigma = bs.sigma;
    row.sync_lo = bs.lo;
    row.sync_hi = bs.hi;
    row.ot_sync_subsample = mean_of(std::span<const double>(c).first(m));

    for_each_index(m, config.parallel, [&](std::size_t j) {
      moved[j] = functional->evaluate(sampler.sample(config.seed, j), &shifts[k]);
    });
    const auto matrix = (config.parallel ? build_cost_matrix : build_cost_matrix_serial)(
        m, m, [&](std::size_t i, std::size_t j) { return std::pow(functional->distance(base[i], moved[j]), 1.0 / r); });
    const auto plan = wc_exact(uniform, uniform, matrix);
    row.ot_cost = plan.cost;
    std::vector<double> matched(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) matched[i] += static_cast<double>(m) * plan.mass(i, j) * matrix(i, j);
    row.ot_sigma = bootstrap_mean(matched, config.bootstrap, RandomStream(config.seed, derive_stream(0xB007, 2 * k + 1))).sigma;
    row.ot_below_sync = row.ot_cost <= row.sync_cost + 3.0 * std::hypot(row.sync_sigma, row.ot_sigma);
    rep.rows.push_back(row);
  }

  std::vector<double> w(K), ent(K);
  for (std::size_t k = 0; k < K; ++k) {
    w[k] = rep.rows[k].sync_cost;
    ent[k] = rep.rows[k].entropy;
  }
  const auto shape_at = [&](double bp) { return DeviationFunction::two_regime(1.0, r, bp); };
  rep.fitted_constant = fit_deviation_constant(shape_at(config.breakpoint), w, ent);
  rep.fitted_constant_half = fit_deviation_constant(shape_at(0.5 * config.breakpoint), w, ent);
  rep.fitted_constant_double = fit_deviation_constant(shape_at(2.0 * config.breakpoint), w, ent);
  rep.alpha = shape_at(config.breakpoint);
  rep.alpha.constant = config.alpha_constant ? *config.alpha_constant
                                             : (std::isfinite(rep.fitted_constant) ? rep.fitted_constant : 0.0);

  std::size_t passed = 0;
  for (auto& row : rep.rows) {
    row.constant_bound = rep.alpha.shape(row.sync_cost) > 0.0 ? row.entropy / rep.alpha.shape(row.sync_cost) : kInf;
    const double lower = std::max(0.0, row.sync_cost - 3.0 * row.sync_sigma);
    row.passes = rep.alpha(lower) <= row.entropy * (1.0 + 1e-12);
    passed += row.passes ? 1 : 0;
  }
  rep.pass_fraction = static_cast<double>(passed) / static_cast<double>(K);
  rep.pass = passed == K && rep.fitted_constant > 0.0;
  return rep;
}

ShiftRegression shift_exponent_regression(const TciFunctional& functional, const CameronMartinShift& h0,
                                          std::span<const double> t_values, std::size_t samples,
                                          std::uint64_t seed, bool parallel) {
  const std::size_t K = t_values.size();
  if (K < 4) throw DomainError("shift_exponent_regression: need at least four t values");
  for (std::size_t k = 0; k < K; ++k)
    if (!(t_values[k] > 0.0) || (k > 0 && !(t_values[k] > t_values[k - 1])))
      throw DomainError("shift_exponent_regression: t values must be positive and increasing");
  if (t_values.back() / t_values.front() < 100.0)
    throw DomainError("shift_exponent_regression: t grid must span at least two decades");
  if (samples == 0) throw DomainError("shift_exponent_regression: no samples");

  const GaussianSampler sampler(functional.driver(), functional.grid());
  std::vector<CameronMartinShift> shifts;
  for (double t : t_values) shifts.push_back(h0.scaled(t));
  std::vector<double> d(samples * K);
  for_each_index(samples, parallel, [&](std::size_t i) {
    const Path omega = sampler.sample(seed, i);
    const std::any b = functional.evaluate(omega, nullptr);
    for (std::size_t k = 0; k < K; ++k) d[i * K + k] = functional.distance(b, functional.evaluate(omega, &shifts[k]));
  });

  ShiftRegression out;
  out.t_values.assign(t_values.begin(), t_values.end());
  out.claimed_exponent = functional.regime_exponent();
  std::vector<std::vector<double>> cols(K);
  for (std::size_t i = 0; i < samples; ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < K; ++k) ok = ok && std::isfinite(d[i * K + k]);
    if (!ok) {
      ++out.dropped;
      continue;
    }
    for (std::size_t k = 0; k < K; ++k) cols[k].push_back(d[i * K + k]);
  }
  if (cols[0].empty()) throw EvaluationError("shift_exponent_regression: every sample produced a NaN distance");
  for (auto& c : cols) {
    std::sort(c.begin(), c.end());
    const std::size_t s = c.size();
    out.median.push_back(s % 2 ? c[s / 2] : 0.5 * (c[s / 2 - 1] + c[s / 2]));
  }
  std::vector<double> lt(K), lm(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (!(out.median[k] > 0.0)) throw EvaluationError("shift_exponent_regression: median distance vanishes");
    lt[k] = std::log(t_values[k]);
    lm[k] = std::log(out.median[k]);
  }
  out.small_slope = fit_line(std::span<const double>(lt).first(3), std::span<const double>(lm).first(3)).slope;
  out.large_slope = fit_line(std::span<const double>(lt).last(3), std::span<const double>(lm).last(3)).slope;
  out.pass = out.small_slope >= 0.8 && out.small_slope <= 1.3 && out.large_slope <= out.claimed_exponent + 0.3;
  return out;
}

std::vector<double> sample_sizes(const TciFunctional& functional, std::size_t n, std::uint64_t seed, bool parallel) {
  const GaussianSampler sampler(functional.driver(), functional.grid());
  std::vector<double> out(n);
  for_each_index(n, parallel, [&](std::size_t i) {
    out[i] = functional.size(functional.evaluate(sampler.sample(seed, i), nullptr));
  });
  return out;
}

ExpMomentReport check_exp_moments(std::span<const double> stats, double p, std::span<const double> s_grid) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("check_exp_moments: p must lie in (0, 1]");
  if (stats.empty()) throw DomainError("check_exp_moments: no samples");
  for (double v : stats)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("check_exp_moments: statistic must be finite and nonnegative");
  const double n = static_cast<double>(stats.size());
  ExpMomentReport rep;
  rep.p = p;
  std::vector<double> powered(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) powered[i] = std::pow(stats[i], p);
  for (double s : s_grid) {
    double top = -kInf;
    for (double x : powered) top = std::max(top, s * x);
    double s1 = 0.0, s2 = 0.0;
    for (double x : powered) {
      const double w = std::exp(s * x - top);
      s1 += w;
      s2 += w * w;
    }
    ExpMomentPoint pt;
    pt.s = s;
    pt.log_mean = top + std::log(s1 / n);
    pt.ess = s1 * s1 / s2;
    const double mu = s1 / n;
    pt.rel_se = std::sqrt(std::max(0.0, s2 / n - mu * mu) / n) / mu;
    pt.trusted = pt.ess >= kMinEffectiveSamples;
    rep.points.push_back(pt);
  }
  rep.all_trusted = std::all_of(rep.points.begin(), rep.points.end(), [](const auto& q) { return q.trusted; });
  rep.finite_trend = true;
  double last = -kInf, last_s = -kInf;
  for (const auto& q : rep.points) {
    if (!q.trusted) continue;
    if (!std::isfinite(q.log_mean)) rep.finite_trend = false;
    if (q.s >= last_s && q.log_mean < last - 1e-12) rep.finite_trend = false;
    last = q.log_mean;
    last_s = q.s;
  }
  return rep;
}

GaussianIntegrability gaussian_integrability(std::span<const double> stats, std::span<const double> lambdas) {
  auto sorted = checked_sorted(stats, "gaussian_integrability");
  if (sorted.front() < 0.0) throw DomainError("gaussian_integrability: statistic must be nonnegative");
  TailFitOptions opts;
  const auto lv = survival_levels(sorted, opts, {});
  std::vector<double> x, y;
  double last = 0.0;
  for (std::size_t k = 0; k < lv.levels.size(); ++k)
    if (lv.trusted[k]) {
      x.push_back(lv.levels[k] * lv.levels[k]);
      y.push_back(-std::log(lv.survival[k]));
      last = lv.levels[k];
    }
  if (x.size() < 3) throw DomainError("gaussian_integrability: fewer than 3 trusted levels");
  const auto fit = fit_line(x, y);
  GaussianIntegrability out;
  out.intercept = fit.intercept;
  out.rate = fit.slope;
  out.r_squared = fit.r_squared;
  const double n = static_cast<double>(sorted.size());
  for (double lam : lambdas) {
    out.lambdas.push_back(lam);
    if (!(lam < out.rate)) {
      out.finite.push_back(false);
      out.log_values.push_back(kInf);
      continue;
    }
    double body = 0.0;
    for (double v : sorted) {
      if (v >= last) break;
      body += std::exp(lam * v * v);
    }
    const double tail = std::exp(-out.intercept - (out.rate - lam) * last * last) * out.rate / (out.rate - lam);
    out.finite.push_back(true);
    out.log_values.push_back(std::log(body / n + tail));
  }
  return out;
}

DeviationReport check_deviation(const std::function<double(std::uint64_t)>& statistic,
                                std::span<const std::size_t> n_values, std::span<const double> s_grid, double p,
                                std::size_t replications, bool parallel) {
  if (n_values.empty()) throw DomainError("check_deviation: no block sizes");
  for (std::size_t nv : n_values)
    if (nv != 1 && nv != 2 && nv != 4 && nv != 8 && nv != 16)
      throw DomainError("check_deviation: block sizes must be drawn from {1, 2, 4, 8, 16}");
  if (!(p > 0.0)) throw DomainError("check_deviation: p must be positive");
  if (replications == 0) throw DomainError("check_deviation: no replications");
  for (double s : s_grid)
    if (!(s > 0.0)) throw DomainError("check_deviation: levels must be positive");

  const std::size_t max_n = *std::max_element(n_values.begin(), n_values.end());
  std::vector<double> pool(replications * max_n);
  for_each_index(pool.size(), parallel, [&](std::size_t k) { pool[k] = statistic(k); });
  for (double v : pool)
    if (!std::isfinite(v)) throw EvaluationError("check_deviation: statistic returned a non-finite value");

  DeviationReport rep;
  rep.p = p;
  rep.replications = replications;
  const double reps = static_cast<double>(replications);
  for (std::size_t nv : n_values) {
    std::vector<double> means(replications);
    for (std::size_t r = 0; r < replications; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < nv; ++k) acc += pool[r * nv + k];
      means[r] = acc / static_cast<double>(nv);
    }
    std::sort(means.begin(), means.end());
    for (double s : s_grid) {
      const auto count = static_cast<std::size_t>(means.end() - std::lower_bound(means.begin(), means.end(), s));
      if (count == 0) continue;
      DeviationPoint pt;
      pt.n = nv;
      pt.s = s;
      pt.count = count;
      pt.probability = static_cast<double>(count) / reps;
      pt.upper = std::min(1.0, pt.probability + 3.0 * std::sqrt(pt.probability * (1.0 - pt.probability) / reps));
      pt.log_rate = std::log(pt.probability) / static_cast<double>(nv);
      rep.points.push_back(pt);
    }
  }

  rep.fitted_constant = kInf;
  for (const auto& pt : rep.points) {
    const double c = -std::log(pt.upper) / static_cast<double>(pt.n) / std::pow(pt.s, 2.0 * p);
    rep.fitted_constant = std::min(rep.fitted_constant, c);
  }
  rep.pass = rep.fitted_constant > 0.0;

  // theta by profile least squares on -(1/n) log P = a_n + C s^theta.
  std::vector<const DeviationPoint*> usable;
  for (const auto& pt : rep.points)
    if (pt.count >= kMinExceedances && pt.probability < 1.0) usable.push_back(&pt);
  std::vector<std::size_t> blocks;
  for (const auto* pt : usable)
    if (std::find(blocks.begin(), blocks.end(), pt->n) == blocks.end()) blocks.push_back(pt->n);
  rep.fitted_exponent = kNaN;
  if (usable.size() >= blocks.size() + 2) {
    const auto rows = static_cast<Eigen::Index>(usable.size());
    const auto cols = static_cast<Eigen::Index>(blocks.size() + 1);
    Eigen::VectorXd y(rows);
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      y(i) = -usable[i]->log_rate;
      X(i, 1 + std::distance(blocks.begin(), std::find(blocks.begin(), blocks.end(), usable[i]->n))) = 1.0;
    }
    double best = kInf;
    for (double theta = 0.2; theta <= 4.0 + 1e-12; theta += 0.001) {
      for (Eigen::Index i = 0; i < rows; ++i) X(i, 0) = std::pow(usable[i]->s, theta);
      const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
      const double res = (X * coef - y).squaredNorm();
      if (res < best) {
        best = res;
        rep.fitted_exponent = theta;
        rep.exponent_constant = coef(0);
      }
    }
  }
  return rep;
}

TailFit fit_tail(std::span<const double> samples, const TailFitOptions& opts, std::span<const double> levels) {
  if (samples.size() < opts.min_samples)
    throw DomainError("fit_tail: at least " + std::to_string(opts.min_samples) + " samples required");
  auto sorted = checked_sorted(samples, "fit_tail");
  const auto lv = survival_levels(std::move(sorted), opts, levels);
  TailFit out;
  out.levels = lv.levels;
  out.survival = lv.survival;
  out.exceedances = lv.counts;
  out.trusted = lv.trusted;
  std::vector<double> x, y, z;
  for (std::size_t k = 0; k < lv.levels.size(); ++k)
    if (lv.trusted[k]) {
      x.push_back(std::log(lv.levels[k]));
      y.push_back(std::log(-std::log(lv.survival[k])));
      z.push_back(std::sqrt(-2.0 * std::log(lv.survival[k])));
    }
  if (x.size() < 3) throw DomainError("fit_tail: fewer than 3 trusted levels, fit refused");
  const auto fit = fit_line(x, y);
  out.shape = fit.slope;
  out.log_constant = fit.intercept;
  out.r_squared = fit.r_squared;
  const auto ln = fit_line(x, z);
  out.lognormal_a = ln.intercept;
  out.lognormal_b = ln.slope;
  out.lognormal_r_squared = ln.r_squared;
  return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("fit_line: need two or more paired points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_line: abscissae are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

}  // namespace tcilab
