#include "tcilab/rough_vol_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <optional>

namespace tcilab {

namespace {

constexpr double kDegreeSlack = 1e-12;

std::vector<std::vector<double>> binomial_table(int n) {
  std::vector<std::vector<double>> c(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    c[i].assign(static_cast<std::size_t>(i) + 1, 1.0);
    for (int k = 1; k < i; ++k) c[i][k] = c[i - 1][k - 1] + c[i - 1][k];
  }
  return c;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::size_t> anchor_indices(std::size_t steps, std::size_t count) {
  std::vector<std::size_t> out;
  if (count == kFullGridAnchors) {
    if (steps > 512) throw ShapeError("ItoModel: full-grid anchors are limited to N <= 512");
    count = steps + 1;
  }
  if (count < 2) throw ShapeError("ItoModel: need at least two anchors");
  if (count >= steps + 1) {
    out.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) out[i] = i;
    return out;
  }
  for (std::size_t k = 0; k < count; ++k) {
    auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(k) * steps / (count - 1)));
    if (out.empty() || idx != out.back()) out.push_back(idx);
  }
  return out;
}

// Signed cumulative sum of g over cells, zero at index s.
void signed_cumsum(std::span<const double> g, std::size_t s, std::span<double> out) {
  const std::size_t n = g.size();
  out[s] = 0.0;
  for (std::size_t k = s + 1; k <= n; ++k) out[k] = out[k - 1] + g[k - 1];
  for (std::size_t k = s; k-- > 0;) out[k] = out[k + 1] - g[k];
}

std::vector<double> iterated_array(const std::vector<double>& what, const std::vector<double>& dw, int m,
                                   std::size_t s) {
  std::vector<double> g(dw.size()), out(dw.size() + 1);
  for (std::size_t j = 0; j < dw.size(); ++j) g[j] = std::pow(what[j] - what[s], m) * dw[j];
  signed_cumsum(g, s, out);
  return out;
}

std::size_t grid_index_of(const TimeGrid& grid, double t) {
  const auto& pts = grid.points();
  const double tol = 1e-12 * std::max(1.0, grid.horizon());
  auto it = std::lower_bound(pts.begin(), pts.end(), t - tol);
  if (it == pts.end() || std::abs(*it - t) > tol)
    throw ContractError("basepoint is not a grid point");
  return static_cast<std::size_t>(it - pts.begin());
}

void require_compatible(const ItoModel& a, const ItoModel& b, const char* where) {
  if (!same_grid(a.grid(), b.grid())) throw ShapeError(std::string(where) + ": models live on different grids");
  if (a.symbols().hurst != b.symbols().hurst || a.symbols().kappa != b.symbols().kappa)
    throw ShapeError(std::string(where) + ": models use different symbol sets");
}

}  // namespace

int choose_M(double hurst, double kappa) {
  if (!(hurst > 0.0 && hurst < 1.0)) throw DomainError("choose_M: H must lie in (0,1)");
  if (!(kappa > 0.0)) throw DomainError("choose_M: kappa must be positive");
  if (kappa >= hurst) throw DomainError("choose_M: kappa must be smaller than H");
  const double step = hurst - kappa, target = 0.5 + kappa;
  auto admissible = [&](long m) { return m * step - target <= kDegreeSlack; };
  long m = static_cast<long>(std::floor(target / step));
  while (admissible(m + 1)) ++m;
  while (m > 0 && !admissible(m)) --m;
  return static_cast<int>(m);
}

std::string Symbol::name() const {
  switch (kind) {
    case SymbolKind::Unit: return "1";
    case SymbolKind::Noise: return "Xi";
    case SymbolKind::Power: return "I^" + std::to_string(power);
    case SymbolKind::NoisePower: return "XiI^" + std::to_string(power);
  }
  return "?";
}

SymbolSet SymbolSet::make(double hurst, double kappa) {
  SymbolSet s;
  s.hurst = hurst;
  s.kappa = kappa;
  s.M = choose_M(hurst, kappa);
  return s;
}

double SymbolSet::degree(const Symbol& s) const {
  switch (s.kind) {
    case SymbolKind::Unit: return 0.0;
    case SymbolKind::Noise: return -0.5 - kappa;
    case SymbolKind::Power: return power_degree(s.power);
    case SymbolKind::NoisePower: return noise_power_degree(s.power);
  }
  return 0.0;
}

std::vector<Symbol> SymbolSet::symbols() const {
  std::vector<Symbol> out{{SymbolKind::Unit, 0}, {SymbolKind::Noise, 0}};
  for (int m = 1; m <= M; ++m) out.push_back({SymbolKind::Power, m});
  for (int m = 1; m <= M; ++m) out.push_back({SymbolKind::NoisePower, m});
  return out;
}

ItoModel::ItoModel(GridPtr grid, std::vector<double> increments, double hurst, double kappa,
                   std::size_t anchors)
    : grid_(std::move(grid)), dw_(std::move(increments)), sym_(SymbolSet::make(hurst, kappa)) {
  if (!grid_) throw ShapeError("ItoModel: missing grid");
  if (dw_.size() != grid_->steps()) throw ShapeError("ItoModel: one increment per cell required");
  what_ = volterra_convolve(*grid_, hurst, dw_);
  anchors_ = anchor_indices(grid_->steps(), anchors);
  iter_.reserve(static_cast<std::size_t>(sym_.M) * anchors_.size());
  for (int m = 1; m <= sym_.M; ++m)
    for (std::size_t s : anchors_) iter_.push_back(iterated_array(what_, dw_, m, s));
  finish();
}

ItoModel::ItoModel(GridPtr grid, std::vector<double> increments, std::vector<double> what, SymbolSet symbols,
                   std::vector<std::size_t> anchors, std::vector<std::vector<double>> iterated)
    : grid_(std::move(grid)),
      dw_(std::move(increments)),
      what_(std::move(what)),
      sym_(symbols),
      anchors_(std::move(anchors)),
      iter_(std::move(iterated)) {
  if (!grid_) throw ShapeError("ItoModel: missing grid");
  const std::size_t n = grid_->steps();
  if (dw_.size() != n || what_.size() != n + 1) throw ShapeError("ItoModel: array sizes do not match grid");
  if (iter_.size() != static_cast<std::size_t>(sym_.M) * anchors_.size())
    throw ShapeError("ItoModel: iterated integral table has wrong size");
  for (const auto& a : iter_)
    if (a.size() != n + 1) throw ShapeError("ItoModel: iterated integral row has wrong size");
  finish();
}

void ItoModel::finish() {
  w_.assign(dw_.size() + 1, 0.0);
  for (std::size_t j = 0; j < dw_.size(); ++j) w_[j + 1] = w_[j] + dw_[j];
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, dw_.data(), dw_.size() * sizeof(double));
  h = fnv1a(h, &sym_.hurst, sizeof(double));
  h = fnv1a(h, &sym_.kappa, sizeof(double));
  h = fnv1a(h, anchors_.data(), anchors_.size() * sizeof(std::size_t));
  id_ = h;
}

std::size_t ItoModel::anchor_slot(std::size_t grid_index) const {
  auto it = std::lower_bound(anchors_.begin(), anchors_.end(), grid_index);
  if (it == anchors_.end() || *it != grid_index)
    throw ContractError("ItoModel: grid index " + std::to_string(grid_index) + " is not an anchor");
  return static_cast<std::size_t>(it - anchors_.begin());
}

std::span<const double> ItoModel::iterated(int m, std::size_t slot) const {
  if (m < 1 || m > sym_.M || slot >= anchors_.size()) throw ShapeError("ItoModel: iterated index out of range");
  return iter_[static_cast<std::size_t>(m - 1) * anchors_.size() + slot];
}

double ItoModel::iterated_at(int m, std::size_t s_index, std::size_t t_index) const {
  return iterated(m, anchor_slot(s_index))[t_index];
}

ItoModel build_ito_model(const Path& w, double hurst, double kappa, std::size_t anchors) {
  if (w.dim != 1) throw ShapeError("build_ito_model: expected a one-dimensional Brownian path");
  std::vector<double> dw(w.grid->steps());
  for (std::size_t j = 0; j < dw.size(); ++j) dw[j] = w.increment(j, 0);
  return ItoModel(w.grid, std::move(dw), hurst, kappa, anchors);
}

std::vector<ItoModel> build_ito_model_batch(const std::vector<Path>& ws, double hurst, double kappa,
                                            std::size_t anchors) {
  std::vector<std::optional<ItoModel>> tmp(ws.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < ws.size(); ++i) tmp[i].emplace(build_ito_model(ws[i], hurst, kappa, anchors));
  std::vector<ItoModel> out;
  out.reserve(ws.size());
  for (auto& m : tmp) out.push_back(std::move(*m));
  return out;
}

std::vector<ItoModel> build_ito_model_batch_serial(const std::vector<Path>& ws, double hurst, double kappa,
                                                   std::size_t anchors) {
  std::vector<ItoModel> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(build_ito_model(w, hurst, kappa, anchors));
  return out;
}

namespace {

void require_white_noise_shift(const ItoModel& model, const CameronMartinShift& h) {
  if (!same_grid(model.grid(), h.grid)) throw ShapeError("translate_model: shift lives on a different grid");
  if (h.dim() != 1) throw ShapeError("translate_model: shift must be one-dimensional");
}

}  // namespace

ItoModel translate_model(const ItoModel& model, const CameronMartinShift& h) {
  require_white_noise_shift(model, h);
  auto dw = shift_increments(model.increments(), h, 0);
  const auto& sym = model.symbols();
  auto what = volterra_convolve(*model.grid(), sym.hurst, dw);
  std::vector<std::vector<double>> iter;
  for (int m = 1; m <= sym.M; ++m)
    for (std::size_t s : model.anchors()) iter.push_back(iterated_array(what, dw, m, s));
  return ItoModel(model.grid(), std::move(dw), std::move(what), sym, model.anchors(), std::move(iter));
}

ItoModel translate_model_expanded(const ItoModel& model, const CameronMartinShift& h) {
  require_white_noise_shift(model, h);
  const auto& grid = *model.grid();
  const auto& sym = model.symbols();
  const std::size_t n = grid.steps();
  std::vector<double> hdt(n);
  for (std::size_t j = 0; j < n; ++j) hdt[j] = h.cell_mean(j, 0) * grid.dt(j);
  const auto hhat = volterra_convolve(grid, sym.hurst, hdt);
  const auto& dw0 = model.increments();
  const auto& what0 = model.what();

  std::vector<double> dw(n), what(n + 1);
  for (std::size_t j = 0; j < n; ++j) dw[j] = dw0[j] + hdt[j];
  for (std::size_t i = 0; i <= n; ++i) what[i] = what0[i] + hhat[i];

  const auto binom = binomial_table(sym.M);
  std::vector<std::vector<double>> iter;
  std::vector<double> ito(n), riemann(n), ito_sum(n + 1), riemann_sum(n + 1);
  for (int m = 1; m <= sym.M; ++m) {
    for (std::size_t s : model.anchors()) {
      std::vector<double> total(n + 1, 0.0);
      // W'^m = sum_q C(m,q) [ int a^q b^{m-q} dW + int a^q b^{m-q} h dr ]
      for (int q = 0; q <= m; ++q) {
        for (std::size_t j = 0; j < n; ++j) {
          const double a = what0[j] - what0[s], b = hhat[j] - hhat[s];
          const double mixed = std::pow(a, q) * std::pow(b, m - q);
          ito[j] = mixed * dw0[j];
          riemann[j] = mixed * hdt[j];
        }
        signed_cumsum(ito, s, ito_sum);
        signed_cumsum(riemann, s, riemann_sum);
        for (std::size_t k = 0; k <= n; ++k) total[k] += binom[m][q] * (ito_sum[k] + riemann_sum[k]);
      }
      iter.push_back(std::move(total));
    }
  }
  return ItoModel(model.grid(), std::move(dw), std::move(what), sym, model.anchors(), std::move(iter));
}

namespace {
const double kBumpConstant = 1.0 / (1.0 + 8.0 / (3.0 * std::sqrt(3.0)));
}

double mother_bump(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  const double u = 1.0 - x * x;
  return kBumpConstant * u * u;
}

double mother_bump_derivative(double x) {
  if (std::abs(x) >= 1.0) return 0.0;
  return -4.0 * kBumpConstant * x * (1.0 - x * x);
}

TestFunctionFamily TestFunctionFamily::dyadic(int j0, int j1, std::vector<double> basepoints) {
  if (j1 < j0) throw DomainError("TestFunctionFamily: empty scale range");
  TestFunctionFamily fam;
  for (int j = j0; j <= j1; ++j) fam.scales.push_back(std::ldexp(1.0, -j));
  fam.basepoints = std::move(basepoints);
  return fam;
}

TestFunctionFamily TestFunctionFamily::anchors_of(const ItoModel& model, int j0, int j1) {
  std::vector<double> pts;
  for (std::size_t i : model.anchors()) pts.push_back((*model.grid())[i]);
  return dyadic(j0, j1, std::move(pts));
}

namespace {

bool window_inside(const TimeGrid& grid, double s, double lambda) {
  const double tol = 1e-12 * std::max(1.0, grid.horizon());
  return s - lambda >= -tol && s + lambda <= grid.horizon() + tol;
}

// Trapezoidal integral of F(t_i) * psi(t_i) over the cells meeting [s-l, s+l].
template <class F, class Psi>
double window_integral(const TimeGrid& grid, double s, double lambda, F&& value, Psi&& psi) {
  const auto& pts = grid.points();
  auto lo = static_cast<std::size_t>(std::lower_bound(pts.begin(), pts.end(), s - lambda) - pts.begin());
  auto hi = static_cast<std::size_t>(std::upper_bound(pts.begin(), pts.end(), s + lambda) - pts.begin());
  if (lo > 0) --lo;
  hi = std::min(hi, grid.steps());
  double acc = 0.0;
  double prev = value(lo) * psi(pts[lo]);
  for (std::size_t i = lo; i < hi; ++i) {
    const double next = value(i + 1) * psi(pts[i + 1]);
    acc += 0.5 * grid.dt(i) * (prev + next);
    prev = next;
  }
  return acc;
}

}  // namespace

double model_pairing(const ItoModel& model, const Symbol& tau, std::size_t s_index, double lambda) {
  const auto& grid = *model.grid();
  if (s_index > grid.steps()) throw ShapeError("model_pairing: basepoint index out of range");
  if (!(lambda > 0.0)) throw DomainError("model_pairing: scale must be positive");
  const double s = grid[s_index];
  if (!window_inside(grid, s, lambda)) throw DomainError("model_pairing: test-function window leaves [0,T]");
  auto phi = [&](double r) { return mother_bump((r - s) / lambda) / lambda; };
  auto dphi = [&](double r) { return mother_bump_derivative((r - s) / lambda) / (lambda * lambda); };
  const auto& what = model.what();
  switch (tau.kind) {
    case SymbolKind::Unit:
      return window_integral(grid, s, lambda, [](std::size_t) { return 1.0; }, phi);
    case SymbolKind::Noise: {
      const auto& w = model.w();
      return -window_integral(grid, s, lambda, [&](std::size_t i) { return w[i]; }, dphi);
    }
    case SymbolKind::Power: {
      const double base = what[s_index];
      return window_integral(
          grid, s, lambda, [&](std::size_t i) { return std::pow(what[i] - base, tau.power); }, phi);
    }
    case SymbolKind::NoisePower: {
      auto row = model.iterated(tau.power, model.anchor_slot(s_index));
      return -window_integral(grid, s, lambda, [&](std::size_t i) { return row[i]; }, dphi);
    }
  }
  return 0.0;
}

double model_distance(const ItoModel& a, const ItoModel& b, const TestFunctionFamily& fam) {
  require_compatible(a, b, "model_distance");
  const auto& grid = *a.grid();
  const auto& sym = a.symbols();
  for (double lambda : fam.scales)
    if (!(lambda > 0.0) || lambda > 1.0 || 2.0 * lambda > grid.horizon())
      throw DomainError("model_distance: scale window exceeds the time horizon");
  double best = 0.0;
  for (double t : fam.basepoints) {
    const std::size_t s = grid_index_of(grid, t);
    for (double lambda : fam.scales) {
      if (!window_inside(grid, t, lambda)) continue;
      for (const auto& tau : sym.symbols()) {
        if (tau.kind == SymbolKind::Unit) continue;
        const double diff = model_pairing(a, tau, s, lambda) - model_pairing(b, tau, s, lambda);
        best = std::max(best, std::pow(lambda, -sym.degree(tau)) * std::abs(diff));
      }
    }
  }
  return best;
}

double gamma_distance(const ItoModel& a, const ItoModel& b) {
  require_compatible(a, b, "gamma_distance");
  const auto& grid = *a.grid();
  const auto& sym = a.symbols();
  const int M = sym.M;
  const auto binom = binomial_table(M);
  const double step = sym.hurst - sym.kappa;
  const auto& wa = a.what();
  const auto& wb = b.what();
  const std::size_t n = grid.size();
  std::vector<double> pa(M + 1), pb(M + 1);
  double best = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = s + 1; t < n; ++t) {
      const double ha = wa[t] - wa[s], hb = wb[t] - wb[s];
      const double gap = grid[t] - grid[s];
      pa[0] = pb[0] = 1.0;
      for (int j = 1; j <= M; ++j) {
        pa[j] = pa[j - 1] * ha;
        pb[j] = pb[j - 1] * hb;
      }
      for (int j = 1; j <= M; ++j) {
        const double scaled = std::abs(pa[j] - pb[j]) / std::pow(gap, j * step);
        // coefficient C(m, m-j) is largest at m = M
        best = std::max(best, binom[M][M - j] * scaled);
      }
    }
  }
  return best;
}

ModelDistanceReport model_distance_report(const ItoModel& a, const ItoModel& b, const TestFunctionFamily& fam) {
  ModelDistanceReport r;
  r.twobar = model_distance(a, b, fam);
  r.gamma_part = gamma_distance(a, b);
  r.threebar = r.twobar + r.gamma_part;
  r.ratio = r.twobar > 0.0 ? r.threebar / r.twobar : (r.threebar > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  return r;
}

VolatilityFunction VolatilityFunction::constant(double c) {
  return {"constant", [c](double, double, int k) { return k == 0 ? c : 0.0; }, std::numeric_limits<int>::max()};
}

VolatilityFunction VolatilityFunction::identity() { return polynomial({0.0, 1.0}); }

VolatilityFunction VolatilityFunction::polynomial(std::vector<double> coeffs) {
  auto eval = [coeffs](double x, double, int k) {
    double acc = 0.0;
    for (std::size_t i = coeffs.size(); i-- > static_cast<std::size_t>(k);) {
      double falling = 1.0;
      for (int r = 0; r < k; ++r) falling *= static_cast<double>(i - static_cast<std::size_t>(r));
      acc = acc * x + coeffs[i] * falling;
    }
    return acc;
  };
  return {"polynomial", eval, std::numeric_limits<int>::max()};
}

VolatilityFunction VolatilityFunction::exponential(double eta, std::function<double(double)> time_factor) {
  auto eval = [eta, g = std::move(time_factor)](double x, double t, int k) {
    return std::pow(eta, k) * g(t) * std::exp(eta * x);
  };
  return {"exponential", eval, std::numeric_limits<int>::max()};
}

VolatilityFunction VolatilityFunction::rough_bergomi(double xi0, double eta, double hurst) {
  if (!(xi0 > 0.0)) throw DomainError("rough_bergomi: forward variance must be positive");
  auto f = exponential(eta, [xi0, eta, hurst](double t) {
    return std::sqrt(xi0) * std::exp(-0.5 * eta * eta * std::pow(t, 2.0 * hurst));
  });
  f.name = "rough_bergomi";
  return f;
}

namespace {

std::vector<double> price_sum(const TimeGrid& grid, std::span<const double> dw, std::span<const double> what,
                              const VolatilityFunction& f, std::vector<double>* qv) {
  const std::size_t n = grid.steps();
  std::vector<double> x(n + 1, 0.0);
  if (qv) qv->assign(n + 1, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const double v = f(what[j], grid[j]);
    if (!std::isfinite(v))
      throw EvaluationError("volatility function returned a non-finite value at t=" + std::to_string(grid[j]));
    x[j + 1] = x[j] + v * dw[j];
    if (qv) (*qv)[j + 1] = (*qv)[j] + v * v * grid.dt(j);
  }
  return x;
}

}  // namespace

Path log_price(const ItoModel& model, const VolatilityFunction& f) {
  return Path(model.grid(), 1, price_sum(*model.grid(), model.increments(), model.what(), f, nullptr));
}

Path log_price(const Path& w, double hurst, const VolatilityFunction& f) {
  if (w.dim != 1) throw ShapeError("log_price: expected a one-dimensional Brownian path");
  const auto& grid = *w.grid;
  std::vector<double> dw(grid.steps());
  for (std::size_t j = 0; j < dw.size(); ++j) dw[j] = w.increment(j, 0);
  const auto what = volterra_convolve(grid, hurst, dw);
  return Path(w.grid, 1, price_sum(grid, dw, what, f, nullptr));
}

Path exp_price(const ItoModel& model, const VolatilityFunction& f, double s0) {
  std::vector<double> qv;
  auto x = price_sum(*model.grid(), model.increments(), model.what(), f, &qv);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = s0 * std::exp(x[i] - 0.5 * qv[i]);
  return Path(model.grid(), 1, std::move(x));
}

double holder_norm(std::span<const double> values, const TimeGrid& grid, double alpha) {
  if (values.size() != grid.size()) throw ShapeError("holder_norm: values do not match grid");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("holder_norm: exponent must lie in (0,1]");
  double best = 0.0;
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      best = std::max(best, std::abs(values[j] - values[i]) / std::pow(grid[j] - grid[i], alpha));
  return std::abs(values[0]) + best;
}

double holder_distance(std::span<const double> a, std::span<const double> b, const TimeGrid& grid,
                       double alpha) {
  if (a.size() != b.size()) throw ShapeError("holder_distance: size mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return holder_norm(d, grid, alpha);
}

double max_modelled_gamma(const SymbolSet& symbols) {
  return std::min(symbols.noise_power_degree(symbols.M + 1), 0.5 - symbols.kappa);
}

ModelledDistribution lift_modelled_distribution(std::shared_ptr<const ItoModel> model,
                                                const VolatilityFunction& f, double gamma) {
  if (!model) throw ShapeError("lift_modelled_distribution: missing model");
  const auto& sym = model->symbols();
  if (!(gamma > 0.0 && gamma < max_modelled_gamma(sym)))
    throw DomainError("lift_modelled_distribution: gamma outside (0, " + std::to_string(max_modelled_gamma(sym)) +
                      ")");
  if (f.max_order < sym.M) throw ContractError("lift_modelled_distribution: derivatives up to order M required");
  const auto& grid = *model->grid();
  const auto& what = model->what();
  ModelledDistribution out;
  out.gamma = gamma;
  out.coeffs.assign(static_cast<std::size_t>(sym.M) + 1, std::vector<double>(grid.size()));
  double factorial = 1.0;
  for (int k = 0; k <= sym.M; ++k) {
    if (k > 0) factorial *= k;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double v = f.partial(what[i], grid[i], k) / factorial;
      if (!std::isfinite(v)) throw EvaluationError("lift_modelled_distribution: non-finite coefficient");
      out.coeffs[k][i] = v;
    }
  }
  out.model = std::move(model);
  return out;
}

double dgamma_distance(const ModelledDistribution& f1, const ModelledDistribution& f2) {
  const ItoModel& m1 = *f1.model;
  const ItoModel& m2 = *f2.model;
  require_compatible(m1, m2, "dgamma_distance");
  if (f1.gamma != f2.gamma) throw ShapeError("dgamma_distance: different orders gamma");
  if (f1.model_id() == f2.model_id() && f1.model != f2.model &&
      (m1.increments() != m2.increments() || m1.what() != m2.what()))
    throw ContractError("dgamma_distance: distributions claim the same model but the models differ");
  const auto& grid = *m1.grid();
  const int M = m1.M();
  const std::size_t n = grid.size();
  const auto binom = binomial_table(M);
  double coeff_term = 0.0;
  for (int k = 0; k <= M; ++k)
    for (std::size_t i = 0; i < n; ++i) coeff_term = std::max(coeff_term, std::abs(f1.coeffs[k][i] - f2.coeffs[k][i]));

  std::vector<double> gap_exp(M + 1);
  for (int l = 0; l <= M; ++l) gap_exp[l] = f1.gamma - f1.degree(l);
  std::vector<double> p1(M + 1), p2(M + 1);
  double remainder_term = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < n; ++t) {
      if (s == t) continue;
      const double h1 = m1.what()[t] - m1.what()[s], h2 = m2.what()[t] - m2.what()[s];
      const double gap = std::abs(grid[t] - grid[s]);
      p1[0] = p2[0] = 1.0;
      for (int j = 1; j <= M; ++j) {
        p1[j] = p1[j - 1] * h1;
        p2[j] = p2[j - 1] * h2;
      }
      for (int l = 0; l <= M; ++l) {
        double r1 = f1.coeffs[l][t], r2 = f2.coeffs[l][t];
        for (int k = l; k <= M; ++k) {
          r1 -= binom[k][l] * p1[k - l] * f1.coeffs[k][s];
          r2 -= binom[k][l] * p2[k - l] * f2.coeffs[k][s];
        }
        remainder_term = std::max(remainder_term, std::abs(r1 - r2) / std::pow(gap, gap_exp[l]));
      }
    }
  }
  return coeff_term + remainder_term;
}

double flat_distance(const ModelledDistribution& f1, const ModelledDistribution& f2,
                     const TestFunctionFamily& fam) {
  return model_distance_report(*f1.model, *f2.model, fam).threebar + dgamma_distance(f1, f2);
}

io::Container model_container(const ItoModel& model) {
  io::Container c;
  c.path = Path(model.grid(), 1, model.w());
  c.sections["WHAT"] = model.what();
  auto& anch = c.sections["ANCH"];
  for (std::size_t a : model.anchors()) anch.push_back(static_cast<double>(a));
  for (int m = 1; m <= model.M(); ++m) {
    auto& sec = c.sections["WM" + std::to_string(m)];
    for (std::size_t slot = 0; slot < model.anchors().size(); ++slot) {
      auto row = model.iterated(m, slot);
      sec.insert(sec.end(), row.begin(), row.end());
    }
  }
  return c;
}

}  // namespace tcilab
