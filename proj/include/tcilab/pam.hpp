#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tcilab/core.hpp"
#include "tcilab/tci_verify.hpp"

namespace tcilab {

// Torus of side 2 pi sampled on a K x K grid, x_i = 2 pi i / K.
constexpr double kTorusSide = 6.283185307179586;

struct TorusField {
  std::size_t K = 0;
  std::vector<double> values;  // row-major, index i * K + j <-> (x_i, y_j)

  static TorusField constant(std::size_t K, double value);
  static TorusField from_function(std::size_t K, const std::function<double(double, double)>& f);
  double at(std::size_t i, std::size_t j) const { return values[i * K + j]; }
  double spacing() const { return kTorusSide / static_cast<double>(K); }
  double mean() const;
  double max_abs() const;
};

// -(1/pi) log(eps) + c0.
double renormalisation_constant(double epsilon, double c0 = 0.0);
// sum over 0 < |k| <= 1/eps of 1 / (4 pi^2 |k|^2): the divergent Wick constant
// of the sharp-cutoff noise for the generator Delta.
double lattice_renormalisation(double epsilon);
// Least-squares c0 matching renormalisation_constant to lattice_renormalisation
// over the given levels.
double calibrate_c0(std::span<const double> epsilons);

struct MollifiedNoise {
  std::size_t K = 0;
  double epsilon = 1.0;
  double c0 = 0.0;
  double C_eps = 0.0;
  std::vector<double> xi;      // white noise, cell variance K^2 / (2 pi)^2
  std::vector<double> xi_eps;  // Fourier cutoff |k| <= 1/eps

  static MollifiedNoise sample(std::size_t K, double epsilon, std::uint64_t seed, std::uint64_t stream,
                               double c0 = 0.0);
  static MollifiedNoise from_white(std::size_t K, std::vector<double> xi, double epsilon, double c0 = 0.0);
  // xi = 0 and xi_eps - C_eps = level everywhere.
  static MollifiedNoise constant_potential(std::size_t K, double level, double epsilon = 1.0);
  // Same white noise mollified at another scale.
  MollifiedNoise with_epsilon(double epsilon) const;

  // factor * xi_eps - factor^2 * C_eps (renormalised) or factor * xi_eps.
  std::vector<double> potential(double factor = 1.0, bool renormalise = true) const;
};

struct PamOptions {
  bool renormalise = true;
  double noise_factor = 1.0;  // 2 for the doubled-noise comparison equation
};

struct PamSolution {
  std::vector<double> times;
  std::vector<TorusField> snapshots;
};

// Strang splitting: exact heat half-step, exact multiplication by
// exp(V dt), heat half-step. Snapshot times are rounded to the step grid.
PamSolution solve_pam_potential(const TorusField& u0, const std::vector<double>& potential, double horizon,
                                double dt, std::vector<double> snapshot_times = {});
PamSolution solve_renormalised_pam(const TorusField& u0, const MollifiedNoise& noise, double horizon, double dt,
                                   std::vector<double> snapshot_times = {}, const PamOptions& opts = {});

struct PamCauchyConfig {
  std::size_t K = 128;
  std::vector<double> epsilons{0.125, 0.0625, 0.03125, 0.015625};  // each half the previous
  double t = 0.1;
  double dt = 1e-4;
  std::uint64_t seed = 1;
  double c0 = 0.0;
  bool parallel = true;
};

// One white-noise realisation solved at every level from u0 = 1, with and
// without the subtraction of C_eps.
struct PamCauchyStudy {
  std::vector<double> epsilons;
  std::vector<double> renormalised_sup, raw_sup;    // ||u_eps(t)||_inf per level
  std::vector<double> renormalised_diff, raw_diff;  // ||u_eps - u_{eps/2}||_inf per consecutive pair
  bool renormalised_decreasing = false;
  bool raw_increasing = false;
};

PamCauchyStudy pam_cauchy_study(const PamCauchyConfig& config);

// Band-limited potential evaluated off-grid by its trigonometric interpolant.
class SpectralPotential {
 public:
  SpectralPotential(std::size_t K, const std::vector<double>& values, double cutoff);
  double operator()(double x, double y) const;
  std::size_t modes() const { return kx_.size(); }

 private:
  std::vector<int> kx_, ky_;
  std::vector<double> re_, im_;
  int kmax_ = 0;
};

struct FeynmanKacEstimate {
  double value = 0.0;
  double sigma = 0.0;  // standard error
  std::size_t paths = 0;
};

struct FeynmanKacOptions {
  double time_step = 1e-4;
  bool renormalise = true;
  bool parallel = true;
};

// E[u0(x + sqrt2 B_t) exp(int_0^t V(x + sqrt2 B_s) ds)] with trapezoidal
// time sampling of the exponent.
FeynmanKacEstimate feynman_kac_estimate(const std::function<double(double, double)>& u0, const MollifiedNoise& noise,
                                        double t, std::array<double, 2> x, std::size_t n_paths, std::uint64_t seed,
                                        const FeynmanKacOptions& opts = {});

struct PamTailConfig {
  std::size_t K = 64;
  std::vector<double> epsilons{0.0625, 0.03125};  // coarse to fine
  double t = 0.05;
  double dt = 5e-4;
  std::size_t realisations = 10'000;
  std::uint64_t seed = 1;
  double c0 = 0.0;
  bool zero_noise = false;
  bool parallel = true;
  TailFitOptions fit{10'000, kMinExceedances, 0.1, 20};
};

struct PamTailLevel {
  double epsilon = 0.0;
  std::vector<double> log_positive;  // (log |u(t, 0)|)^+
  std::optional<TailFit> fit;        // empty when the fit is refused
  double v_half_moment = 0.0;        // E |v(t, 0)|^{1/2}
  double v_half_sigma = 0.0;
};

struct PamTailStudy {
  std::vector<PamTailLevel> levels;
  double shape_spread = 0.0;  // |theta_fine - theta_next| over the two finest fitted levels
};

PamTailStudy pam_tail_study(const PamTailConfig& config);

}  // namespace tcilab
