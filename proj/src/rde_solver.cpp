#include "tcilab/rde_solver.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "tcilab/rng.hpp"

namespace tcilab {

LinearVectorField::LinearVectorField(std::size_t m, std::vector<std::vector<double>> matrices)
    : m_(m), mats_(std::move(matrices)) {
  if (m_ == 0 || mats_.empty()) throw ShapeError("LinearVectorField: empty dimensions");
  for (const auto& a : mats_)
    if (a.size() != m_ * m_) throw ShapeError("LinearVectorField: each matrix must be m x m");
}

void LinearVectorField::eval(std::span<const double> y, std::span<double> out) const {
  for (std::size_t j = 0; j < mats_.size(); ++j) {
    const auto& a = mats_[j];
    for (std::size_t i = 0; i < m_; ++i) {
      double acc = 0.0;
      for (std::size_t l = 0; l < m_; ++l) acc += a[i * m_ + l] * y[l];
      out[j * m_ + i] = acc;
    }
  }
}

void LinearVectorField::jacobian(std::span<const double>, std::span<double> out) const {
  for (std::size_t j = 0; j < mats_.size(); ++j)
    std::copy(mats_[j].begin(), mats_[j].end(), out.begin() + static_cast<std::ptrdiff_t>(j * m_ * m_));
}

PolynomialVectorField::PolynomialVectorField(std::size_t m, std::size_t d, std::vector<Monomial> terms)
    : m_(m), d_(d), terms_(std::move(terms)) {
  if (m_ == 0 || d_ == 0) throw ShapeError("PolynomialVectorField: empty dimensions");
  for (const auto& t : terms_) {
    if (t.field >= d_ || t.component >= m_ || t.powers.size() != m_)
      throw ShapeError("PolynomialVectorField: monomial out of range");
    for (int p : t.powers)
      if (p < 0) throw DomainError("PolynomialVectorField: negative exponent");
  }
}

std::size_t PolynomialVectorField::degree() const {
  std::size_t deg = 0;
  for (const auto& t : terms_) {
    std::size_t s = 0;
    for (int p : t.powers) s += static_cast<std::size_t>(p);
    deg = std::max(deg, s);
  }
  return deg;
}

void PolynomialVectorField::eval(std::span<const double> y, std::span<double> out) const {
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m_ * d_), 0.0);
  for (const auto& t : terms_) {
    double v = t.coeff;
    for (std::size_t l = 0; l < m_; ++l) v *= std::pow(y[l], t.powers[l]);
    out[t.field * m_ + t.component] += v;
  }
}

void PolynomialVectorField::jacobian(std::span<const double> y, std::span<double> out) const {
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m_ * m_ * d_), 0.0);
  for (const auto& t : terms_) {
    for (std::size_t l = 0; l < m_; ++l) {
      if (t.powers[l] == 0) continue;
      double v = t.coeff * t.powers[l];
      for (std::size_t r = 0; r < m_; ++r) v *= std::pow(y[r], r == l ? t.powers[r] - 1 : t.powers[r]);
      out[(t.field * m_ + t.component) * m_ + l] += v;
    }
  }
}

CallableVectorField::CallableVectorField(std::size_t m, std::size_t d, Fn value, Fn jacobian)
    : m_(m), d_(d), value_(std::move(value)), jac_(std::move(jacobian)) {
  if (!value_ || !jac_) throw ContractError("CallableVectorField: missing callable");
}

void validate_derivatives(const VectorField& vf, std::uint64_t seed, std::size_t points, double radius) {
  const std::size_t m = vf.state_dim(), d = vf.drive_dim();
  const double eps = 1e-5;
  RandomStream rng(seed, 0x5eed);
  std::vector<double> y(m), yp(m), ym(m), vp(m * d), vm(m * d), jac(m * m * d);
  for (std::size_t n = 0; n < points; ++n) {
    for (auto& v : y) v = radius * rng.normal();
    vf.jacobian(y, jac);
    for (std::size_t l = 0; l < m; ++l) {
      yp = y;
      ym = y;
      yp[l] += eps;
      ym[l] -= eps;
      vf.eval(yp, vp);
      vf.eval(ym, vm);
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < m; ++i) {
          const double fd = (vp[j * m + i] - vm[j * m + i]) / (2 * eps);
          const double an = jac[(j * m + i) * m + l];
          if (std::abs(fd - an) > 1e-4 * std::max(1.0, std::abs(an)))
            throw ContractError("vector field Jacobian disagrees with finite differences (field " +
                                std::to_string(j) + ", component " + std::to_string(i) + ")");
        }
    }
  }
}

std::vector<double> solve_rde_range(const RoughPath& rp, const VectorField& vf, std::span<const double> y0,
                                    std::size_t first, std::size_t last) {
  const std::size_t m = vf.state_dim(), d = vf.drive_dim();
  if (rp.dim() != d) throw ShapeError("solve_rde: driver dimension does not match vector field");
  if (y0.size() != m) throw ShapeError("solve_rde: initial condition has wrong dimension");
  if (first > last || last > rp.steps()) throw ShapeError("solve_rde: bad cell range");
  const auto& grid = *rp.grid();
  std::vector<double> out((last - first + 1) * m);
  std::copy(y0.begin(), y0.end(), out.begin());
  std::vector<double> v(m * d), jac(m * m * d), dv(m);
  for (std::size_t c = first; c < last; ++c) {
    const double* y = &out[(c - first) * m];
    double* next = &out[(c - first + 1) * m];
    std::span<const double> ys(y, m);
    vf.eval(ys, v);
    vf.jacobian(ys, jac);
    auto x = rp.increment(c);
    auto a = rp.area(c);
    for (std::size_t i = 0; i < m; ++i) next[i] = y[i];
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < m; ++i) next[i] += v[j * m + i] * x[j];
    // (DV_k V_j)(y) XX^{jk}
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        const double area = a[j * d + k];
        if (area == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i) {
          double acc = 0.0;
          for (std::size_t l = 0; l < m; ++l) acc += jac[(k * m + i) * m + l] * v[j * m + l];
          next[i] += acc * area;
        }
      }
    }
    double norm2 = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < m; ++i) {
      finite = finite && std::isfinite(next[i]);
      norm2 += next[i] * next[i];
    }
    if (!finite || std::sqrt(norm2) > kBlowupThreshold)
      throw BlowupError("solve_rde: solution left the admissible range", grid[c]);
  }
  return out;
}

RdeSolution solve_rde(const RoughPath& rp, const VectorField& vf, std::span<const double> y0) {
  RdeSolution s;
  s.grid = rp.grid();
  s.dim = vf.state_dim();
  s.values = solve_rde_range(rp, vf, y0, 0, rp.steps());
  return s;
}

RdeSolution solve_shifted_rde(const RoughPath& rp, const CameronMartinShift& h, const VectorField& vf,
                              std::span<const double> y0) {
  return solve_rde(translate(rp, h), vf, y0);
}

std::vector<RdeSolution> solve_rde_batch(const std::vector<RoughPath>& paths, const VectorField& vf,
                                         std::span<const double> y0) {
  std::vector<RdeSolution> out(paths.size());
  std::vector<std::optional<BlowupError>> failures(paths.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < paths.size(); ++i) {
    try {
      out[i] = solve_rde(paths[i], vf, y0);
    } catch (const BlowupError& e) {
      failures[i].emplace(e);
    }
  }
  for (auto& f : failures)
    if (f) throw *f;
  return out;
}

std::vector<RdeSolution> solve_rde_batch_serial(const std::vector<RoughPath>& paths, const VectorField& vf,
                                                std::span<const double> y0) {
  std::vector<RdeSolution> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(solve_rde(p, vf, y0));
  return out;
}

RoughPath coarsen(const RoughPath& rp, std::size_t stride) {
  const std::size_t n = rp.steps();
  if (stride == 0 || n % stride != 0) throw ShapeError("coarsen: stride must divide the step count");
  const std::size_t coarse = n / stride, d = rp.dim();
  std::vector<double> pts(coarse + 1), inc(coarse * d), area(coarse * d * d);
  for (std::size_t c = 0; c <= coarse; ++c) pts[c] = (*rp.grid())[c * stride];
  for (std::size_t c = 0; c < coarse; ++c) {
    auto s = rp.segment(c * stride, (c + 1) * stride);
    std::copy(s.level1.begin(), s.level1.end(), inc.begin() + static_cast<std::ptrdiff_t>(c * d));
    std::copy(s.level2.begin(), s.level2.end(), area.begin() + static_cast<std::ptrdiff_t>(c * d * d));
  }
  auto grid = std::make_shared<const TimeGrid>(TimeGrid::from_points(std::move(pts)));
  return RoughPath(grid, d, std::move(inc), std::move(area));
}

}  // namespace tcilab
