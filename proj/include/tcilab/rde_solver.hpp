#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tcilab/core.hpp"
#include "tcilab/rough_path.hpp"

namespace tcilab {

// Vector fields V_1..V_d on R^m. eval writes V_j^i(y) at out[j*m + i];
// jacobian writes dV_j^i/dy_l at out[(j*m + i)*m + l].
class VectorField {
 public:
  virtual ~VectorField() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t drive_dim() const = 0;
  virtual void eval(std::span<const double> y, std::span<double> out) const = 0;
  virtual void jacobian(std::span<const double> y, std::span<double> out) const = 0;
};

class LinearVectorField final : public VectorField {
 public:
  // matrices[j] is the m x m row-major matrix A_j, V_j(y) = A_j y.
  LinearVectorField(std::size_t m, std::vector<std::vector<double>> matrices);
  std::size_t state_dim() const override { return m_; }
  std::size_t drive_dim() const override { return mats_.size(); }
  void eval(std::span<const double> y, std::span<double> out) const override;
  void jacobian(std::span<const double> y, std::span<double> out) const override;
  const std::vector<double>& matrix(std::size_t j) const { return mats_[j]; }

 private:
  std::size_t m_;
  std::vector<std::vector<double>> mats_;
};

struct Monomial {
  std::size_t field = 0;      // j
  std::size_t component = 0;  // i
  double coeff = 0.0;
  std::vector<int> powers;    // exponent of y_l, size m
};

class PolynomialVectorField final : public VectorField {
 public:
  PolynomialVectorField(std::size_t m, std::size_t d, std::vector<Monomial> terms);
  std::size_t state_dim() const override { return m_; }
  std::size_t drive_dim() const override { return d_; }
  void eval(std::span<const double> y, std::span<double> out) const override;
  void jacobian(std::span<const double> y, std::span<double> out) const override;
  std::size_t degree() const;

 private:
  std::size_t m_, d_;
  std::vector<Monomial> terms_;
};

class CallableVectorField final : public VectorField {
 public:
  using Fn = std::function<void(std::span<const double>, std::span<double>)>;
  CallableVectorField(std::size_t m, std::size_t d, Fn value, Fn jacobian);
  std::size_t state_dim() const override { return m_; }
  std::size_t drive_dim() const override { return d_; }
  void eval(std::span<const double> y, std::span<double> out) const override { value_(y, out); }
  void jacobian(std::span<const double> y, std::span<double> out) const override { jac_(y, out); }

 private:
  std::size_t m_, d_;
  Fn value_, jac_;
};

// Finite-difference validation of the Jacobian (eps = 1e-5, relative error
// <= 1e-4) at `points` random states of standard normal law scaled by `radius`.
// Throws ContractError on the first failure.
void validate_derivatives(const VectorField& vf, std::uint64_t seed, std::size_t points = 100,
                          double radius = 1.0);

struct RdeSolution {
  GridPtr grid;
  std::size_t dim = 0;
  std::vector<double> values;  // (N+1) x m
  int scheme_order = 2;        // local order of the Davie step in the driver increment

  Path as_path() const { return Path(grid, dim, values); }
  std::span<const double> state(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

constexpr double kBlowupThreshold = 1e12;

// Davie step on cells [first, last): returns (last-first+1) x m states.
std::vector<double> solve_rde_range(const RoughPath& rp, const VectorField& vf, std::span<const double> y0,
                                    std::size_t first, std::size_t last);
RdeSolution solve_rde(const RoughPath& rp, const VectorField& vf, std::span<const double> y0);
RdeSolution solve_shifted_rde(const RoughPath& rp, const CameronMartinShift& h, const VectorField& vf,
                              std::span<const double> y0);

std::vector<RdeSolution> solve_rde_batch(const std::vector<RoughPath>& paths, const VectorField& vf,
                                         std::span<const double> y0);
std::vector<RdeSolution> solve_rde_batch_serial(const std::vector<RoughPath>& paths, const VectorField& vf,
                                                std::span<const double> y0);

// Coarsen a rough path onto every `stride`-th grid point via Chen's relation.
RoughPath coarsen(const RoughPath& rp, std::size_t stride);

}  // namespace tcilab
