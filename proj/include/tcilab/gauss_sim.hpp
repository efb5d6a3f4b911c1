#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tcilab/core.hpp"

namespace tcilab {

enum class DriverKind { BrownianMotion, FractionalBM, RiemannLiouvilleFBM, OrnsteinUhlenbeck, BrownianBridge };

std::string to_string(DriverKind kind);
DriverKind driver_kind_from_string(const std::string& name);

struct DriverSpec {
  DriverKind kind = DriverKind::BrownianMotion;
  std::size_t dim = 1;
  double hurst = 0.5;
  double ou_theta = 1.0;
  double ou_sigma = 1.0;
  // Multiplies the L^2 quadrature of the control when reporting ||h||_H for
  // drivers whose Cameron-Martin norm is not the white-noise one.
  double embedding_constant = 1.0;

  void validate() const;
  // Whether the piecewise-linear lift converges to a geometric p-rough path
  // with p < 3 (fBm-type drivers need H > 1/3).
  bool admits_level2_lift() const;

  static DriverSpec brownian(std::size_t dim = 1);
  static DriverSpec fbm(double hurst, std::size_t dim = 1);
  static DriverSpec rl_fbm(double hurst, std::size_t dim = 1);
  static DriverSpec ornstein_uhlenbeck(double theta, double sigma, std::size_t dim = 1);
  static DriverSpec bridge(std::size_t dim = 1);
};

double volterra_kernel(double hurst, double t);
// Closed form of int_a^b K^H(u) du for 0 <= a < b.
double volterra_kernel_integral(double hurst, double a, double b);

// Discrete Volterra convolution out(t_i) = sum_{j<i} (dW_j / dt_j) int_{t_j}^{t_{j+1}} K^H(t_i - r) dr
// with exact per-cell kernel integrals. increments has one entry per cell.
std::vector<double> volterra_convolve(const TimeGrid& grid, double hurst,
                                      std::span<const double> increments);

double rl_fbm_covariance(double hurst, double s, double t);
double driver_covariance(const DriverSpec& spec, double s, double t);
// Covariance of one component at t_1..t_N (t_0 = 0 is deterministic).
Eigen::MatrixXd covariance_matrix(const DriverSpec& spec, const TimeGrid& grid);

struct CholeskyFactor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

// Lower Cholesky factor of covariance_matrix with the escalating jitter
// policy; memoised per (kind, H, grid points) for the process lifetime.
std::shared_ptr<const CholeskyFactor> cholesky_factor(const DriverSpec& spec, const TimeGrid& grid);

// Exact Gaussian sampler on a fixed grid. Immutable after construction;
// path i of seed s depends only on (s, i).
class GaussianSampler {
 public:
  GaussianSampler(DriverSpec spec, GridPtr grid);

  const DriverSpec& spec() const { return spec_; }
  const GridPtr& grid() const { return grid_; }
  // Jitter lambda actually used for the Cholesky factor (0 when not needed).
  double jitter() const { return factor_ ? factor_->jitter : 0.0; }
  bool uses_factor() const { return static_cast<bool>(factor_); }
  const Eigen::MatrixXd& factor() const { return factor_->lower; }

  Path sample(std::uint64_t seed, std::uint64_t index) const;
  // Same as sample but from caller-supplied standard normals (N x dim,
  // component-major) so white-noise functionals can reuse them.
  Path from_normals(std::span<const double> normals) const;
  std::vector<Path> sample_batch(std::uint64_t seed, std::uint64_t first, std::size_t n) const;
  std::vector<Path> sample_batch_serial(std::uint64_t seed, std::uint64_t first, std::size_t n) const;

 private:
  DriverSpec spec_;
  GridPtr grid_;
  std::shared_ptr<const CholeskyFactor> factor_;
};

std::vector<Path> sample_paths(const DriverSpec& spec, GridPtr grid, std::size_t n,
                               std::uint64_t seed);

// Element h of the Cameron-Martin space, represented by its white-noise
// control on the grid nodes ((N+1) x dim, row-major); the path-space shift is
// the driver's injection of that control.
struct CameronMartinShift {
  DriverSpec driver;
  GridPtr grid;
  std::vector<double> values;
  double norm_sq = 0.0;

  std::size_t dim() const { return driver.dim; }
  double control(std::size_t i, std::size_t k) const { return values[i * driver.dim + k]; }
  // Cell average of the control on cell j, component k.
  double cell_mean(std::size_t j, std::size_t k) const {
    return 0.5 * (control(j, k) + control(j + 1, k));
  }
  CameronMartinShift scaled(double factor) const;
};

CameronMartinShift make_shift(const DriverSpec& driver, GridPtr grid, std::vector<double> values);
CameronMartinShift constant_shift(const DriverSpec& driver, GridPtr grid, double level);
CameronMartinShift zero_shift(const DriverSpec& driver, GridPtr grid);
CameronMartinShift add_shifts(const CameronMartinShift& a, const CameronMartinShift& b);

double cm_norm(const CameronMartinShift& h);
// Path-space image I(h) of the control, starting at 0.
Path injection(const CameronMartinShift& h);
Path shift_path(const Path& path, const CameronMartinShift& h);
// White-noise level shift dW_j -> dW_j + hbar_j dt_j for one component.
std::vector<double> shift_increments(std::span<const double> increments,
                                     const CameronMartinShift& h, std::size_t component = 0);

}  // namespace tcilab
