#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tcilab/core.hpp"
#include "tcilab/gauss_sim.hpp"
#include "tcilab/io.hpp"

namespace tcilab {

// max{m : m(H - kappa) - 1/2 - kappa <= 0}.
int choose_M(double hurst, double kappa);

enum class SymbolKind { Unit, Noise, Power, NoisePower };

// Power m is I(Xi)^m, NoisePower m is Xi I(Xi)^m (m >= 1).
struct Symbol {
  SymbolKind kind = SymbolKind::Unit;
  int power = 0;
  std::string name() const;
};

struct SymbolSet {
  double hurst = 0.5;
  double kappa = 0.0;
  int M = 0;

  static SymbolSet make(double hurst, double kappa);
  double degree(const Symbol& s) const;
  double power_degree(int m) const { return m * (hurst - kappa); }
  double noise_power_degree(int m) const { return m * (hurst - kappa) - 0.5 - kappa; }
  // 1, Xi, I^1..I^M, XiI^1..XiI^M
  std::vector<Symbol> symbols() const;
};

constexpr std::size_t kDefaultAnchors = 33;
constexpr std::size_t kFullGridAnchors = 0;  // every grid point; N <= 512 only

// Ito model of the rough-volatility structure on a grid. The iterated
// integrals W^m_{s,t} = sum_{s <= t_j < t} (What_j - What_s)^m dW_j are stored
// for s on the anchor subgrid and every t; for t < s the stored value is
// minus the sum over [t, s).
class ItoModel {
 public:
  ItoModel(GridPtr grid, std::vector<double> increments, double hurst, double kappa,
           std::size_t anchors = kDefaultAnchors);
  // Internal: assembles a model from precomputed arrays (used by the
  // expansion route of translate_model_expanded).
  ItoModel(GridPtr grid, std::vector<double> increments, std::vector<double> what, SymbolSet symbols,
           std::vector<std::size_t> anchors, std::vector<std::vector<double>> iterated);

  const GridPtr& grid() const { return grid_; }
  const SymbolSet& symbols() const { return sym_; }
  int M() const { return sym_.M; }
  const std::vector<double>& increments() const { return dw_; }
  const std::vector<double>& w() const { return w_; }
  const std::vector<double>& what() const { return what_; }
  const std::vector<std::size_t>& anchors() const { return anchors_; }
  // Position of grid index i in anchors(), or throws ContractError.
  std::size_t anchor_slot(std::size_t grid_index) const;
  // W^m_{anchors[slot], t_k} for all k, m in 1..M.
  std::span<const double> iterated(int m, std::size_t slot) const;
  double iterated_at(int m, std::size_t s_index, std::size_t t_index) const;
  std::uint64_t id() const { return id_; }

 private:
  void finish();

  GridPtr grid_;
  std::vector<double> dw_, w_, what_;
  SymbolSet sym_;
  std::vector<std::size_t> anchors_;
  std::vector<std::vector<double>> iter_;  // index (m-1) * anchors + slot
  std::uint64_t id_ = 0;
};

// w is a one-dimensional Brownian path on its grid.
ItoModel build_ito_model(const Path& w, double hurst, double kappa, std::size_t anchors = kDefaultAnchors);
std::vector<ItoModel> build_ito_model_batch(const std::vector<Path>& ws, double hurst, double kappa,
                                            std::size_t anchors = kDefaultAnchors);
std::vector<ItoModel> build_ito_model_batch_serial(const std::vector<Path>& ws, double hurst, double kappa,
                                                   std::size_t anchors = kDefaultAnchors);

// T_h: rebuild from dW + hbar dt.
ItoModel translate_model(const ItoModel& model, const CameronMartinShift& h);
// T_h by binomial expansion of (What - What_s + hhat - hhat_s)^m (dW + h dt)
// into mixed Ito and Riemann sums; must agree with translate_model.
ItoModel translate_model_expanded(const ItoModel& model, const CameronMartinShift& h);

// phi(x) = c (1 - x^2)^2 on (-1,1) with c chosen so that ||phi||_C1 = 1.
double mother_bump(double x);
double mother_bump_derivative(double x);

struct TestFunctionFamily {
  std::vector<double> scales;
  std::vector<double> basepoints;  // times; each must be an anchor of the model

  // lambda = 2^-j for j = j0..j1.
  static TestFunctionFamily dyadic(int j0, int j1, std::vector<double> basepoints);
  // All anchors of the model, scales 2^-j0..2^-j1.
  static TestFunctionFamily anchors_of(const ItoModel& model, int j0 = 2, int j1 = 5);
};

// <Pi_s tau, phi^lambda_s> by trapezoidal quadrature on the grid; the
// derivative symbols use -int F phi'. The support must lie in [0, T].
double model_pairing(const ItoModel& model, const Symbol& tau, std::size_t s_index, double lambda);

// Two-bar distance restricted to the family (a lower bound of the full sup).
// Basepoints whose window leaves [0, T] are skipped.
double model_distance(const ItoModel& a, const ItoModel& b, const TestFunctionFamily& fam);
// Gamma part of the three-bar distance over all grid pairs.
double gamma_distance(const ItoModel& a, const ItoModel& b);

struct ModelDistanceReport {
  double twobar = 0.0;
  double gamma_part = 0.0;
  double threebar = 0.0;
  double ratio = 1.0;  // threebar / twobar (1 when both vanish)
};
ModelDistanceReport model_distance_report(const ItoModel& a, const ItoModel& b, const TestFunctionFamily& fam);

// f(x, t) with partial derivatives in x.
struct VolatilityFunction {
  std::string name;
  std::function<double(double x, double t, int order)> partial;
  int max_order = 0;

  double operator()(double x, double t) const { return partial(x, t, 0); }

  static VolatilityFunction constant(double c);
  static VolatilityFunction identity();
  // sum_i coeffs[i] x^i
  static VolatilityFunction polynomial(std::vector<double> coeffs);
  // g(t) exp(eta x)
  static VolatilityFunction exponential(double eta, std::function<double(double)> time_factor);
  // sqrt(xi0) exp(eta x - eta^2 t^{2H} / 2)
  static VolatilityFunction rough_bergomi(double xi0, double eta, double hurst);
};

// X_{t_k} = sum_{j<k} f(What_j, t_j) dW_j. Throws EvaluationError on NaN.
Path log_price(const ItoModel& model, const VolatilityFunction& f);
Path log_price(const Path& w, double hurst, const VolatilityFunction& f);
// s0 exp(X_t - 1/2 sum f^2 dt)
Path exp_price(const ItoModel& model, const VolatilityFunction& f, double s0 = 1.0);

// |f(0)| + max_{i<j} |f_j - f_i| / (t_j - t_i)^alpha over all grid pairs.
double holder_norm(std::span<const double> values, const TimeGrid& grid, double alpha);
double holder_distance(std::span<const double> a, std::span<const double> b, const TimeGrid& grid,
                       double alpha);

// D_f(Pi) = sum_k c_k Xi I(Xi)^k with c_k(t) = d^k f(What_t, t) / k!.
struct ModelledDistribution {
  std::shared_ptr<const ItoModel> model;
  double gamma = 0.0;
  std::vector<std::vector<double>> coeffs;  // coeffs[k][i], k = 0..M

  std::uint64_t model_id() const { return model->id(); }
  // Degree of the symbol carrying coeffs[k].
  double degree(int k) const { return model->symbols().noise_power_degree(k); }
};

// Upper end of the admissible gamma range.
double max_modelled_gamma(const SymbolSet& symbols);
ModelledDistribution lift_modelled_distribution(std::shared_ptr<const ItoModel> model,
                                                const VolatilityFunction& f, double gamma);
double dgamma_distance(const ModelledDistribution& f1, const ModelledDistribution& f2);
// Three-bar distance of the base models plus dgamma_distance.
double flat_distance(const ModelledDistribution& f1, const ModelledDistribution& f2,
                     const TestFunctionFamily& fam);

// Sections "WHAT", "ANCH" and "WM<m>" (anchors x (N+1) row-major); path = W.
io::Container model_container(const ItoModel& model);

}  // namespace tcilab
