#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tcilab/core.hpp"
#include "tcilab/gauss_sim.hpp"

namespace tcilab {

// c(i, j) between sample i of the first cloud and sample j of the second.
using CostFn = std::function<double(std::size_t, std::size_t)>;

struct CostMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double median() const;
  double max() const;
};

constexpr std::size_t kMaxExactEntries = 10'000'000;
constexpr std::size_t kMaxSinkhornSide = 1u << 15;
constexpr std::size_t kMaxNewtonUnknowns = 2048;

CostMatrix build_cost_matrix(std::size_t rows, std::size_t cols, const CostFn& cost);
CostMatrix build_cost_matrix_serial(std::size_t rows, std::size_t cols, const CostFn& cost);

struct EmpiricalMeasure {
  std::vector<std::size_t> samples;  // indices into the caller's batch
  std::vector<double> weights;

  static EmpiricalMeasure uniform(std::size_t n);
  static EmpiricalMeasure weighted(std::vector<double> weights);
  std::size_t size() const { return weights.size(); }
  // Nonnegative, finite, summing to 1 within 1e-12; else ContractError.
  void validate() const;
};

enum class TransportMethod { ExactLP, Hungarian, Sinkhorn };
std::string to_string(TransportMethod m);

struct TransportPlan {
  std::size_t rows = 0, cols = 0;
  std::vector<double> coupling;  // row-major
  double cost = 0.0;
  TransportMethod method = TransportMethod::ExactLP;
  double epsilon = 0.0;          // Sinkhorn only
  double dual_value = 0.0;       // sum a f + sum b g
  std::vector<double> dual_row, dual_col;  // f, g with f_i + g_j <= c_ij (exact methods)
  double marginal_error = 0.0;   // L1 error before rounding (Sinkhorn) / after solve
  std::size_t iterations = 0;

  double mass(std::size_t i, std::size_t j) const { return coupling[i * cols + j]; }
};

// Exact discrete optimum: Hungarian for uniform equal-size measures,
// otherwise successive shortest paths on the transportation network.
TransportPlan wc_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostMatrix& cost);
TransportPlan wc_exact(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostFn& cost);
// Forces the network solver even for uniform equal-size inputs.
TransportPlan wc_network(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostMatrix& cost);
TransportPlan wc_hungarian(const CostMatrix& cost);

struct SinkhornOptions {
  double tolerance = 1e-8;        // marginal L1 error
  std::size_t max_iterations = 10'000;
  double scaling_factor = 0.5;    // epsilon annealing ratio
  // Final-stage scaling that shrinks the error by less than stall_ratio over
  // stall_window sweeps triggers a Newton step on the dual (n + m <= kMaxNewtonUnknowns).
  std::size_t stall_window = 50;
  double stall_ratio = 0.5;
};

// Log-domain Sinkhorn with epsilon annealing. The returned plan is rounded onto
// the exact marginals; cost is the unregularised cost of that plan.
TransportPlan wc_sinkhorn(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const CostMatrix& cost,
                          double epsilon, const SinkhornOptions& opts = {});

// (1/n) sum_i c(x_i, y_i) for paired clouds.
double synchronous_cost(std::size_t n_left, std::size_t n_right, const std::function<double(std::size_t)>& paired);
double synchronous_cost(const CostMatrix& cost);

// H(mu(. - h) | mu) = ||h||_H^2 / 2.
double entropy_shift(const CameronMartinShift& h);

// P_c g(y_j) = max_i { g(x_i) - c(x_i, y_j) }.
std::vector<double> inf_convolution(std::span<const double> g_on_x, const CostMatrix& cost);

// Sparse triplets "i,j,mass" for entries above threshold.
void write_plan_csv(std::ostream& out, const TransportPlan& plan, double threshold = 0.0);

}  // namespace tcilab
