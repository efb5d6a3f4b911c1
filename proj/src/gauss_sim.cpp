#include "tcilab/gauss_sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "tcilab/rng.hpp"

namespace tcilab {

std::string to_string(DriverKind kind) {
  switch (kind) {
    case DriverKind::BrownianMotion: return "bm";
    case DriverKind::FractionalBM: return "fbm";
    case DriverKind::RiemannLiouvilleFBM: return "rlfbm";
    case DriverKind::OrnsteinUhlenbeck: return "ou";
    case DriverKind::BrownianBridge: return "bridge";
  }
  return "unknown";
}

DriverKind driver_kind_from_string(const std::string& name) {
  if (name == "bm") return DriverKind::BrownianMotion;
  if (name == "fbm") return DriverKind::FractionalBM;
  if (name == "rlfbm") return DriverKind::RiemannLiouvilleFBM;
  if (name == "ou") return DriverKind::OrnsteinUhlenbeck;
  if (name == "bridge") return DriverKind::BrownianBridge;
  throw ConfigError("unknown driver kind '" + name + "'");
}

void DriverSpec::validate() const {
  if (dim == 0) throw DomainError("DriverSpec: dim must be >= 1");
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("DriverSpec: H must lie in (0,1)");
  if (kind == DriverKind::OrnsteinUhlenbeck && !(ou_theta > 0.0 && ou_sigma > 0.0))
    throw DomainError("DriverSpec: OU needs theta > 0 and sigma > 0");
  if (!(embedding_constant > 0.0)) throw DomainError("DriverSpec: embedding constant must be positive");
}

bool DriverSpec::admits_level2_lift() const {
  if (kind == DriverKind::FractionalBM || kind == DriverKind::RiemannLiouvilleFBM)
    return hurst > 1.0 / 3.0;
  return true;
}

DriverSpec DriverSpec::brownian(std::size_t dim) {
  DriverSpec s;
  s.dim = dim;
  return s;
}

DriverSpec DriverSpec::fbm(double hurst, std::size_t dim) {
  DriverSpec s;
  s.kind = DriverKind::FractionalBM;
  s.hurst = hurst;
  s.dim = dim;
  s.validate();
  return s;
}

DriverSpec DriverSpec::rl_fbm(double hurst, std::size_t dim) {
  DriverSpec s = fbm(hurst, dim);
  s.kind = DriverKind::RiemannLiouvilleFBM;
  return s;
}

DriverSpec DriverSpec::ornstein_uhlenbeck(double theta, double sigma, std::size_t dim) {
  DriverSpec s;
  s.kind = DriverKind::OrnsteinUhlenbeck;
  s.ou_theta = theta;
  s.ou_sigma = sigma;
  s.dim = dim;
  s.validate();
  return s;
}

DriverSpec DriverSpec::bridge(std::size_t dim) {
  DriverSpec s;
  s.kind = DriverKind::BrownianBridge;
  s.dim = dim;
  return s;
}

double volterra_kernel(double hurst, double t) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("volterra_kernel: H must lie in (0,1)");
  if (!(t > 0.0)) throw DomainError("volterra_kernel: t must be positive");
  return std::sqrt(2.0 * hurst) * std::pow(t, hurst - 0.5);
}

double volterra_kernel_integral(double hurst, double a, double b) {
  if (!(a >= 0.0 && b > a)) throw DomainError("volterra_kernel_integral: need 0 <= a < b");
  const double e = hurst + 0.5;
  return std::sqrt(2.0 * hurst) / e * (std::pow(b, e) - std::pow(a, e));
}

std::vector<double> volterra_convolve(const TimeGrid& grid, double hurst,
                                      std::span<const double> increments) {
  const std::size_t n = grid.steps();
  if (increments.size() != n) throw ShapeError("volterra_convolve: one increment per cell expected");
  const double e = hurst + 0.5;
  const double scale = std::sqrt(2.0 * hurst) / e;
  std::vector<double> rate(n);
  for (std::size_t j = 0; j < n; ++j) rate[j] = increments[j] / grid.dt(j);
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    const double ti = grid[i];
    double acc = 0.0;
    double upper = std::pow(ti - grid[0], e);
    for (std::size_t j = 0; j < i; ++j) {
      const double lower = (j + 1 == i) ? 0.0 : std::pow(ti - grid[j + 1], e);
      acc += rate[j] * (upper - lower);
      upper = lower;
    }
    out[i] = scale * acc;
  }
  return out;
}

double rl_fbm_covariance(double hurst, double s, double t) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("rl_fbm_covariance: H must lie in (0,1)");
  if (s < 0.0 || t < 0.0) throw DomainError("rl_fbm_covariance: negative time");
  if (s > t) std::swap(s, t);
  if (s == 0.0) return 0.0;
  if (s == t) return std::pow(t, 2.0 * hurst);
  // 2H int_0^s (t-s+u)^{H-1/2} u^{H-1/2} du with u = v^{1/(H+1/2)}, which
  // removes the endpoint singularity of u^{H-1/2}.
  const double e = hurst + 0.5;
  const double gap = t - s;
  auto integrand = [&](double v) {
    const double u = v > 0.0 ? std::pow(v, 1.0 / e) : 0.0;
    return std::pow(gap + u, hurst - 0.5);
  };
  const double upper = std::pow(s, e);
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, upper, 20, 1e-10);
  return 2.0 * hurst / e * integral;
}

double driver_covariance(const DriverSpec& spec, double s, double t) {
  switch (spec.kind) {
    case DriverKind::BrownianMotion: return std::min(s, t);
    case DriverKind::FractionalBM: {
      const double h2 = 2.0 * spec.hurst;
      return 0.5 * (std::pow(s, h2) + std::pow(t, h2) - std::pow(std::abs(t - s), h2));
    }
    case DriverKind::RiemannLiouvilleFBM: return rl_fbm_covariance(spec.hurst, s, t);
    case DriverKind::OrnsteinUhlenbeck: {
      const double th = spec.ou_theta;
      return spec.ou_sigma * spec.ou_sigma / (2.0 * th) *
             (std::exp(-th * std::abs(t - s)) - std::exp(-th * (t + s)));
    }
    case DriverKind::BrownianBridge:
      throw DomainError("driver_covariance: bridge covariance needs the horizon");
  }
  return 0.0;
}

Eigen::MatrixXd covariance_matrix(const DriverSpec& spec, const TimeGrid& grid) {
  spec.validate();
  const std::size_t n = grid.steps();
  Eigen::MatrixXd cov(n, n);
  const double horizon = grid.horizon();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = grid[j + 1], t = grid[i + 1];
      double c;
      if (spec.kind == DriverKind::BrownianBridge) c = std::min(s, t) - s * t / horizon;
      else c = driver_covariance(spec, s, t);
      cov(i, j) = c;
      cov(j, i) = c;
    }
  }
  return cov;
}

namespace {

CholeskyFactor factorise(const DriverSpec& spec, const TimeGrid& grid) {
  const Eigen::MatrixXd cov = covariance_matrix(spec, grid);
  const double mean_diag = cov.trace() / static_cast<double>(cov.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};
  for (double lambda = 1e-14; lambda <= 1e-10 * 1.0000001; lambda *= 10.0) {
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += lambda * mean_diag;
    llt.compute(jittered);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), lambda};
  }
  throw CovarianceError("Cholesky failed after maximal jitter 1e-10*trace/N");
}

}  // namespace

std::shared_ptr<const CholeskyFactor> cholesky_factor(const DriverSpec& spec, const TimeGrid& grid) {
  using Key = std::tuple<int, double, double, double, std::vector<double>>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const CholeskyFactor>> cache;
  spec.validate();
  Key key{static_cast<int>(spec.kind), spec.hurst, spec.ou_theta, spec.ou_sigma, grid.points()};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto factor = std::make_shared<const CholeskyFactor>(factorise(spec, grid));
  std::lock_guard<std::mutex> lock(mutex);
  return cache.emplace(std::move(key), std::move(factor)).first->second;
}

GaussianSampler::GaussianSampler(DriverSpec spec, GridPtr grid)
    : spec_(std::move(spec)), grid_(std::move(grid)) {
  spec_.validate();
  if (!grid_) throw ShapeError("GaussianSampler: null grid");
  if (spec_.kind == DriverKind::FractionalBM || spec_.kind == DriverKind::RiemannLiouvilleFBM)
    factor_ = cholesky_factor(spec_, *grid_);
}

Path GaussianSampler::from_normals(std::span<const double> z) const {
  const std::size_t n = grid_->steps();
  const std::size_t d = spec_.dim;
  if (z.size() != n * d) throw ShapeError("GaussianSampler: need N*dim normals");
  Path path(grid_, d);
  for (std::size_t k = 0; k < d; ++k) {
    const double* zk = z.data() + k * n;
    switch (spec_.kind) {
      case DriverKind::BrownianMotion:
      case DriverKind::BrownianBridge: {
        double x = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          x += std::sqrt(grid_->dt(j)) * zk[j];
          path.at(j + 1, k) = x;
        }
        if (spec_.kind == DriverKind::BrownianBridge) {
          const double end = path.at(n, k);
          const double horizon = grid_->horizon();
          for (std::size_t i = 0; i <= n; ++i) path.at(i, k) -= (*grid_)[i] / horizon * end;
          path.at(n, k) = 0.0;
        }
        break;
      }
      case DriverKind::OrnsteinUhlenbeck: {
        const double th = spec_.ou_theta, sg = spec_.ou_sigma;
        double x = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double decay = std::exp(-th * grid_->dt(j));
          const double sd = sg * std::sqrt((1.0 - decay * decay) / (2.0 * th));
          x = decay * x + sd * zk[j];
          path.at(j + 1, k) = x;
        }
        break;
      }
      case DriverKind::FractionalBM:
      case DriverKind::RiemannLiouvilleFBM: {
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = factor_->lower.data();
          double acc = 0.0;
          for (std::size_t j = 0; j <= i; ++j) acc += row[j * n + i] * zk[j];
          path.at(i + 1, k) = acc;
        }
        break;
      }
    }
  }
  return path;
}

Path GaussianSampler::sample(std::uint64_t seed, std::uint64_t index) const {
  RandomStream rng(seed, index);
  std::vector<double> z(grid_->steps() * spec_.dim);
  rng.fill_normal(z.data(), z.size());
  return from_normals(z);
}

std::vector<Path> GaussianSampler::sample_batch(std::uint64_t seed, std::uint64_t first,
                                                std::size_t n) const {
  std::vector<Path> out(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) out[i] = sample(seed, first + i);
  return out;
}

std::vector<Path> GaussianSampler::sample_batch_serial(std::uint64_t seed, std::uint64_t first,
                                                       std::size_t n) const {
  std::vector<Path> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = sample(seed, first + i);
  return out;
}

std::vector<Path> sample_paths(const DriverSpec& spec, GridPtr grid, std::size_t n,
                               std::uint64_t seed) {
  return GaussianSampler(spec, std::move(grid)).sample_batch(seed, 0, n);
}

CameronMartinShift CameronMartinShift::scaled(double factor) const {
  CameronMartinShift out = *this;
  for (double& v : out.values) v *= factor;
  out.norm_sq = norm_sq * factor * factor;
  return out;
}

CameronMartinShift make_shift(const DriverSpec& driver, GridPtr grid, std::vector<double> values) {
  driver.validate();
  if (!grid) throw ShapeError("make_shift: null grid");
  if (values.size() != grid->size() * driver.dim)
    throw ShapeError("make_shift: control must have (N+1) x dim values");
  CameronMartinShift h{driver, std::move(grid), std::move(values), 0.0};
  double acc = 0.0;
  for (std::size_t j = 0; j < h.grid->steps(); ++j) {
    double cell = 0.0;
    for (std::size_t k = 0; k < driver.dim; ++k) {
      const double a = h.control(j, k), b = h.control(j + 1, k);
      cell += a * a + b * b;
    }
    acc += 0.5 * cell * h.grid->dt(j);
  }
  h.norm_sq = driver.embedding_constant * driver.embedding_constant * acc;
  return h;
}

CameronMartinShift constant_shift(const DriverSpec& driver, GridPtr grid, double level) {
  const std::size_t count = grid->size() * driver.dim;
  return make_shift(driver, std::move(grid), std::vector<double>(count, level));
}

CameronMartinShift zero_shift(const DriverSpec& driver, GridPtr grid) {
  return constant_shift(driver, std::move(grid), 0.0);
}

CameronMartinShift add_shifts(const CameronMartinShift& a, const CameronMartinShift& b) {
  if (!same_grid(a.grid, b.grid) || a.values.size() != b.values.size())
    throw ShapeError("add_shifts: shape mismatch");
  std::vector<double> v(a.values.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values[i] + b.values[i];
  return make_shift(a.driver, a.grid, std::move(v));
}

double cm_norm(const CameronMartinShift& h) { return std::sqrt(h.norm_sq); }

Path injection(const CameronMartinShift& h) {
  const GridPtr& grid = h.grid;
  const std::size_t n = grid->steps();
  const std::size_t d = h.dim();
  Path out(grid, d);
  for (std::size_t k = 0; k < d; ++k) {
    switch (h.driver.kind) {
      case DriverKind::BrownianMotion:
      case DriverKind::BrownianBridge: {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          acc += h.cell_mean(j, k) * grid->dt(j);
          out.at(j + 1, k) = acc;
        }
        if (h.driver.kind == DriverKind::BrownianBridge) {
          const double total = out.at(n, k);
          for (std::size_t i = 0; i <= n; ++i) out.at(i, k) -= (*grid)[i] / grid->horizon() * total;
          out.at(n, k) = 0.0;
        }
        break;
      }
      case DriverKind::OrnsteinUhlenbeck: {
        const double th = h.driver.ou_theta, sg = h.driver.ou_sigma;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double decay = std::exp(-th * grid->dt(j));
          acc = decay * acc + sg * h.cell_mean(j, k) * (1.0 - decay) / th;
          out.at(j + 1, k) = acc;
        }
        break;
      }
      case DriverKind::RiemannLiouvilleFBM: {
        std::vector<double> inc(n);
        for (std::size_t j = 0; j < n; ++j) inc[j] = h.cell_mean(j, k) * grid->dt(j);
        const auto conv = volterra_convolve(*grid, h.driver.hurst, inc);
        for (std::size_t i = 0; i <= n; ++i) out.at(i, k) = conv[i];
        break;
      }
      case DriverKind::FractionalBM: {
        // Discrete Cameron-Martin image L z of the Cholesky coordinates
        // z_j = hbar_j sqrt(dt_j); reduces to the BM formula when L is the BM factor.
        const auto& factor = cholesky_factor(h.driver, *grid)->lower;
        std::vector<double> z(n);
        for (std::size_t j = 0; j < n; ++j) z[j] = h.cell_mean(j, k) * std::sqrt(grid->dt(j));
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j <= i; ++j) acc += factor(i, j) * z[j];
          out.at(i + 1, k) = acc;
        }
        break;
      }
    }
  }
  return out;
}

Path shift_path(const Path& path, const CameronMartinShift& h) {
  if (!same_grid(path.grid, h.grid)) throw ShapeError("shift_path: grid mismatch");
  if (path.dim != h.dim()) throw ShapeError("shift_path: dimension mismatch");
  Path out = injection(h);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += path.values[i];
  return out;
}

std::vector<double> shift_increments(std::span<const double> increments,
                                     const CameronMartinShift& h, std::size_t component) {
  const std::size_t n = h.grid->steps();
  if (increments.size() != n) throw ShapeError("shift_increments: one increment per cell expected");
  if (component >= h.dim()) throw ShapeError("shift_increments: component out of range");
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j)
    out[j] = increments[j] + h.cell_mean(j, component) * h.grid->dt(j);
  return out;
}

}  // namespace tcilab
