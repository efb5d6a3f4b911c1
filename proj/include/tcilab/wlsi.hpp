#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tcilab/core.hpp"

namespace tcilab {

// Functionals of a d-dimensional Brownian driver on a grid, written in terms
// of the increments dW (N x d, cell-major). The H-gradient of Psi_i is the
// matrix of partial derivatives g_i(l, k) = dPsi_i / d dW_l^k, with
// <D Psi_i, h> = sum g_i(l,k) dh_l^k and ||D Psi_i||_H^2 = sum g_i(l,k)^2 dt_l.
enum class WlsiKind { PolynomialWienerIntegrals, RoughPathTriple, RdeEndpoint };
std::string to_string(WlsiKind kind);
WlsiKind wlsi_kind_from_string(const std::string& name);

struct FunctionalSpec {
  WlsiKind kind = WlsiKind::PolynomialWienerIntegrals;
  GridPtr grid;
  std::size_t driver_dim = 1;
  // Polynomial: Psi_k = X(h_k)^{p_k}, X(h) = sum_l h_l dW_l, integrands are cell values.
  std::vector<std::vector<double>> integrands;
  std::vector<int> powers;
  // Rough-path triple (||X||_{C^alpha}, X_{s,t}, XX_{s,t}) with s, t grid indices.
  double alpha = 0.4;
  std::size_t s_index = 0, t_index = 0;
  // RDE endpoint (||X||_{p-var}, Y_T) for so(3) generators scaled by field_scale.
  double p = 2.5;
  double field_scale = 1.0;
  std::vector<double> y0{1.0, 0.0, 0.0};

  static FunctionalSpec polynomial(GridPtr grid, std::vector<std::vector<double>> integrands, std::vector<int> powers);
  static FunctionalSpec rough_path_triple(GridPtr grid, std::size_t dim, double alpha, std::size_t s_index,
                                          std::size_t t_index);
  static FunctionalSpec rde_endpoint(GridPtr grid, double p, double field_scale, std::vector<double> y0 = {1, 0, 0});

  void validate() const;
  std::string id() const;
  std::size_t output_dim() const;
  std::size_t input_size() const { return grid->steps() * driver_dim; }

  std::vector<double> evaluate(std::span<const double> increments) const;
  Eigen::MatrixXd gradient(std::span<const double> increments) const;  // output_dim x input_size
  // Hilbert-Schmidt H-norm of the gradient.
  double gradient_norm(const Eigen::MatrixXd& grad) const;
  // <D Psi, h> for a direction given by its increments.
  Eigen::VectorXd directional(const Eigen::MatrixXd& grad, std::span<const double> h_increments) const;

  // c with ||D Psi||^2 <= c G(Psi) for the weight of stated_weight().
  double stated_constant() const;
};

struct WeightSpec {
  std::string name;
  std::function<double(std::span<const double>)> G;
  double c = 1.0;

  static WeightSpec constant(double level, double c = 1.0);
  static WeightSpec l1_squared(double c);           // (1 + |x|_1)^2
  static WeightSpec first_squared(double c);        // (1 + x_1)^2
  static WeightSpec exp_power(double p, double c);  // x_1 + exp(x_1^p)
};

// Weight attached to each example together with its stated constant.
WeightSpec stated_weight(const FunctionalSpec& spec);

struct FunctionalSamples {
  std::size_t m = 0;
  std::vector<double> values;          // n x m
  std::vector<double> gradient_norms;  // ||D Psi||_H per sample
  std::size_t size() const { return m == 0 ? 0 : values.size() / m; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * m, m}; }
};

FunctionalSamples draw_samples(const FunctionalSpec& spec, std::size_t n, std::uint64_t seed, bool parallel = true);

struct GradientValidation {
  std::size_t checks = 0;
  double worst = 0.0;  // max |fd - <D Psi, h>| / (1 + ||D Psi||)
  bool pass = false;
};

constexpr double kGradientTolerance = 1e-3;

// Forward differences (Psi(w + eps h) - Psi(w)) / eps against <D Psi, h> for
// `directions` random unit-norm h on each of `samples` driver samples.
GradientValidation validate_gradient(const FunctionalSpec& spec, std::uint64_t seed, std::size_t samples = 8,
                                     std::size_t directions = 10, double eps = 1e-4);

struct GradientBoundReport {
  std::string functional_id, weight_name;
  std::size_t n = 0;
  double stated_constant = 0.0;
  double fitted_constant = 0.0;  // max ||D Psi||^2 / G(Psi)
  double fraction = 0.0;
  GradientValidation validation;
  // log ||D Psi|| = a + b Psi_1^p (RDE endpoint only).
  double envelope_intercept = 0.0, envelope_slope = 0.0, envelope_r_squared = 0.0;
  bool pass = false;
};

// Throws ContractError when the gradient fails finite-difference validation.
GradientBoundReport check_gradient_bound(const FunctionalSpec& spec, const WeightSpec& weight, std::size_t n,
                                         std::uint64_t seed, bool parallel = true);

struct TestFunction {
  std::string name;
  std::function<double(std::span<const double>)> f;
  std::function<void(std::span<const double>, std::span<double>)> grad;
  double lipschitz = -1.0;  // negative when not globally Lipschitz
};

// Coordinates, tanh(a x_i + b) for (a, b) in {(1, 0), (2, 0.5), (0.5, -1)},
// and products x_i x_j for i < j.
std::vector<TestFunction> default_test_family(std::size_t m);
TestFunction constant_test_function(double value);

struct EntropyEstimate {
  double plug_in = 0.0;
  double value = 0.0;  // jackknife bias-corrected
  double sigma = 0.0;  // jackknife standard error
};

// Ent(g) = E[g log g] - E[g] log E[g] for g = f^2 >= 0.
EntropyEstimate entropy_of_square(std::span<const double> f_values);

constexpr double kMinSecondMoment = 1e-12;

struct WlsiRow {
  std::string name;
  bool dropped = false;
  double entropy = 0.0, entropy_sigma = 0.0;
  double rhs = 0.0, rhs_sigma = 0.0;  // 2 C E[|grad f|^2 G]
  double feasible_constant = 0.0;     // Ent / (2 E[|grad f|^2 G])
  bool pass = false;                  // entropy <= rhs + max(3 sigma, float roundoff)
};

struct WlsiReport {
  double constant = 0.0;
  std::vector<WlsiRow> rows;
  double smallest_feasible_constant = 0.0;
  bool pass = false;
};

WlsiReport check_wlsi(const FunctionalSamples& samples, std::span<const double> weight_values, double constant,
                      const std::vector<TestFunction>& family);
WlsiReport check_wlsi(const FunctionalSamples& samples, const WeightSpec& weight,
                      const std::vector<TestFunction>& family);
WlsiReport check_wlsi(const FunctionalSpec& spec, const WeightSpec& weight, const std::vector<TestFunction>& family,
                      std::size_t n, std::uint64_t seed, bool parallel = true);

// Samples with coordinate `drop` removed.
FunctionalSamples marginal_samples(const FunctionalSamples& samples, std::size_t drop);
// E[G | remaining coordinates] by averaging G over the k nearest neighbours
// (Euclidean, remaining coordinates); k = ceil(sqrt n) when k == 0.
std::vector<double> conditional_weight(const FunctionalSamples& samples, std::span<const double> weight_values,
                                       std::size_t drop, std::size_t k = 0, bool parallel = true);

struct MomentRow {
  std::string name;
  double p = 2.0;
  double lhs = 0.0, lhs_sigma = 0.0;  // ||f||_p of the centred, rescaled map
  double rhs = 0.0, rhs_sigma = 0.0;  // sqrt(p - 1) ||c G||_p
  double rhs_sqrt = 0.0;              // sqrt(p - 1) ||sqrt(c G)||_p
  double ess = 0.0;
  bool pass = false;
};

struct MomentReport {
  std::vector<MomentRow> rows;
  std::vector<double> dropped_p;  // weight moments with ESS < kMinEffectiveWeightSamples
  bool pass = false;
};

constexpr double kMinEffectiveWeightSamples = 100.0;

// Lipschitz members of the family, re-centred and divided by their Lipschitz
// constant. Fails when every p is dropped.
MomentReport check_moment_consequence(const FunctionalSamples& samples, const WeightSpec& weight,
                                      std::span<const double> p_grid, const std::vector<TestFunction>& family);

}  // namespace tcilab
