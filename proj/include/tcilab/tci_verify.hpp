#pragma once

#include <any>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcilab/core.hpp"
#include "tcilab/gauss_sim.hpp"
#include "tcilab/rough_vol_model.hpp"

namespace tcilab {

// alpha(t) = C (u^a ∧ u^b) with u = t / breakpoint, or C t^{2/p}.
struct DeviationFunction {
  enum class Form { PowerMin, Talagrand };
  Form form = Form::PowerMin;
  double constant = 1.0;
  double a = 2.0, b = 2.0;
  double breakpoint = 1.0;

  static DeviationFunction power_min(double constant, double a, double b, double breakpoint = 1.0);
  static DeviationFunction talagrand(double constant, double p);
  // The two-regime shape C (t^2 ∧ t^{2r}) attached to a cost d^{1/r}.
  static DeviationFunction two_regime(double constant, double r, double breakpoint = 1.0);

  double shape(double t) const;  // value at constant = 1
  double operator()(double t) const { return constant * shape(t); }
};

// Largest C with C shape(w_k) <= entropy_k for every k (shifts with w_k = 0 are
// skipped); +inf when no shift constrains C.
double fit_deviation_constant(const DeviationFunction& shape, std::span<const double> costs,
                              std::span<const double> entropies);

enum class FunctionalKind { Identity, RoughPathLift, RdeSolution, ItoModel, LogPrice, ModelledDistribution };
std::string to_string(FunctionalKind kind);
FunctionalKind functional_kind_from_string(const std::string& name);

struct FunctionalConfig {
  FunctionalKind kind = FunctionalKind::Identity;
  DriverSpec driver = DriverSpec::brownian();
  double horizon = 1.0;
  std::size_t steps = 64;
  double p = 2.6;          // p-variation exponent (lift, RDE)
  double q = 0.0;          // Cameron-Martin regularity; 0 derives 1/(H + 1/2)
  double field_scale = 1.0;  // so(3) generators for the RDE
  double hurst = 0.25;     // rough-volatility kernel
  double kappa = 0.02;
  std::size_t anchors = kDefaultAnchors;
  int scale_min = 2, scale_max = 5;  // test-function scales 2^-j
  std::vector<double> volatility{0.0, 1.0};  // polynomial coefficients
  double holder = 0.4;     // log-price Holder exponent
  double gamma = 0.0;      // modelled-distribution gamma; 0 picks the midpoint of the admissible range

  void validate() const;
};

// Psi on driver samples together with the metric it is measured in. Outputs
// are opaque handles produced by evaluate and consumed by distance.
class TciFunctional {
 public:
  virtual ~TciFunctional() = default;
  virtual std::string id() const = 0;
  virtual std::string cost_id() const = 0;
  // r in alpha = C (t^2 ∧ t^{2r}) with cost d^{1/r}.
  virtual double regime_exponent() const = 0;
  virtual const DriverSpec& driver() const = 0;
  virtual const GridPtr& grid() const = 0;
  // Psi(T_h omega); h == nullptr gives Psi(omega).
  virtual std::any evaluate(const Path& omega, const CameronMartinShift* h) const = 0;
  virtual double distance(const std::any& a, const std::any& b) const = 0;
  // d(x0, Psi) statistic used by the tail and deviation harnesses.
  virtual double size(const std::any& a) const = 0;
};

std::unique_ptr<TciFunctional> make_functional(const FunctionalConfig& config);

enum class ShiftShape { Constant, Sine, Ramp };
std::string to_string(ShiftShape shape);
ShiftShape shift_shape_from_string(const std::string& name);

struct ShiftRay {
  ShiftShape shape = ShiftShape::Constant;
  double level = 1.0;
  std::vector<double> t_values;

  // t = 2^e for `count` exponents evenly spaced in [lo, hi].
  static std::vector<double> dyadic(double lo, double hi, std::size_t count);
  CameronMartinShift direction(const DriverSpec& driver, const GridPtr& grid) const;
};

struct TciConfig {
  FunctionalConfig functional;
  ShiftRay ray;
  std::size_t samples = 256;
  std::size_t ot_samples = 64;
  std::size_t bootstrap = 200;
  std::uint64_t seed = 1;
  // Root 1/r of the cost; must agree with the functional's registered cost.
  std::optional<double> cost_exponent;
  // Verdict constant; the fitted constant is used when absent.
  std::optional<double> alpha_constant;
  double breakpoint = 1.0;
  bool parallel = true;
};

struct ShiftRow {
  double t = 0.0;
  double shift_norm = 0.0;
  double entropy = 0.0;
  double sync_cost = 0.0, sync_sigma = 0.0, sync_lo = 0.0, sync_hi = 0.0;
  double ot_cost = 0.0, ot_sigma = 0.0;
  double ot_sync_subsample = 0.0;  // synchronous cost on the OT subsample
  double constant_bound = 0.0;     // entropy / shape(sync_cost)
  bool ot_below_sync = true;       // ot <= sync + 3 sigma
  bool passes = true;              // alpha(max(sync - 3 sigma, 0)) <= entropy
};

struct TciReport {
  std::string functional_id, cost_id;
  double regime_exponent = 1.0;
  double cost_exponent = 1.0;
  std::size_t samples = 0, ot_samples = 0;
  std::vector<ShiftRow> rows;
  double fitted_constant = 0.0;
  double fitted_constant_half = 0.0;    // breakpoint / 2
  double fitted_constant_double = 0.0;  // breakpoint * 2
  DeviationFunction alpha;              // used for the verdict
  double pass_fraction = 0.0;
  bool pass = false;
};

TciReport run_tci_experiment(const TciConfig& config);

struct ShiftRegression {
  std::vector<double> t_values;
  std::vector<double> median;
  double small_slope = 0.0, large_slope = 0.0;
  double claimed_exponent = 1.0;
  std::size_t dropped = 0;
  bool pass = false;  // small slope in [0.8, 1.3], large slope <= claimed + 0.3
};

// Per-sample d(Psi(omega), Psi(T_{t h0} omega)); the slopes are log-log
// regressions of the median curve over the first and last three t values.
ShiftRegression shift_exponent_regression(const TciFunctional& functional, const CameronMartinShift& h0,
                                          std::span<const double> t_values, std::size_t samples,
                                          std::uint64_t seed, bool parallel = true);

// size(Psi(omega_i)) for i = 0..n-1.
std::vector<double> sample_sizes(const TciFunctional& functional, std::size_t n, std::uint64_t seed,
                                 bool parallel = true);

constexpr std::size_t kMinExceedances = 50;
constexpr double kMinEffectiveSamples = 100.0;

struct ExpMomentPoint {
  double s = 0.0;
  double log_mean = 0.0;  // log E[exp(s d^p)]
  double rel_se = 0.0;    // standard error of the mean over the mean
  double ess = 0.0;
  bool trusted = false;
};

struct ExpMomentReport {
  double p = 1.0;
  std::vector<ExpMomentPoint> points;
  bool all_trusted = false;
  bool finite_trend = false;  // trusted log means finite and nondecreasing in s
};

ExpMomentReport check_exp_moments(std::span<const double> stats, double p, std::span<const double> s_grid);

// Gaussian integrability E[exp(lambda X^2)] from -log P[X >= R] ~ a + c R^2
// on the trusted levels: finite for lambda < c; the value combines the
// empirical part below the last trusted level with the fitted tail beyond.
struct GaussianIntegrability {
  double intercept = 0.0, rate = 0.0, r_squared = 0.0;
  std::vector<double> lambdas, log_values;
  std::vector<bool> finite;
};
GaussianIntegrability gaussian_integrability(std::span<const double> stats, std::span<const double> lambdas);

struct DeviationPoint {
  std::size_t n = 1;
  double s = 0.0;
  std::size_t count = 0;
  double probability = 0.0;
  double upper = 0.0;     // probability + 3 binomial sigma, capped at 1
  double log_rate = 0.0;  // (1/n) log probability
};

struct DeviationReport {
  double p = 0.5;
  std::size_t replications = 0;
  std::vector<DeviationPoint> points;  // levels with zero exceedances dropped
  double fitted_constant = 0.0;        // largest C with (1/n) log upper <= -C s^{2p}
  double fitted_exponent = 0.0;        // theta in -(1/n) log P ~ a_n + C s^theta
  double exponent_constant = 0.0;
  bool pass = false;                   // fitted_constant > 0
};

// statistic(k) is the k-th i.i.d. draw; replication r of block size n uses
// draws r*n .. r*n + n - 1.
DeviationReport check_deviation(const std::function<double(std::uint64_t)>& statistic,
                                 std::span<const std::size_t> n_values, std::span<const double> s_grid, double p,
                                 std::size_t replications = 100'000, bool parallel = true);

struct TailFitOptions {
  std::size_t min_samples = 100'000;
  std::size_t min_exceedances = kMinExceedances;
  double max_survival = 0.1;
  std::size_t levels = 20;
};

struct TailFit {
  std::vector<double> levels, survival;
  std::vector<std::size_t> exceedances;
  std::vector<bool> trusted;
  double shape = 0.0;        // theta
  double log_constant = 0.0; // log C
  double r_squared = 0.0;
  // sqrt(-2 log S) = a + b log R on the same levels.
  double lognormal_a = 0.0, lognormal_b = 0.0, lognormal_r_squared = 0.0;
};

// Regression of log(-log S(R)) on log R over trusted levels. Without explicit
// levels they sit at empirical quantiles with survival spaced geometrically
// from max_survival down to min_exceedances / n.
TailFit fit_tail(std::span<const double> samples, const TailFitOptions& opts = {},
                 std::span<const double> levels = {});

// Ordinary least squares y = a + b x; returns (a, b, R^2).
struct LineFit {
  double intercept = 0.0, slope = 0.0, r_squared = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace tcilab
