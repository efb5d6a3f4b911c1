#include "tcilab/rough_path.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace tcilab {

namespace {

void check_p(double p) {
  if (!(p >= 1.0 && p < 3.0)) throw DomainError("p-variation exponent must lie in [1,3)");
}

double weight_of(std::span<const double> x, std::span<const double> xx) {
  double a = 0.0, b = 0.0;
  for (double v : x) a += v * v;
  for (double v : xx) b += v * v;
  return std::sqrt(a) + std::sqrt(b);
}

}  // namespace

double Signature2::norm_weight() const { return weight_of(level1, level2); }

Segment chen_combine(const Segment& a, const Segment& b) {
  if (a.end != b.start) throw ContractError("chen_combine: intervals are not adjacent");
  if (a.sig.dim != b.sig.dim) throw ShapeError("chen_combine: dimension mismatch");
  const std::size_t d = a.sig.dim;
  Segment out{a.start, b.end, Signature2(d)};
  for (std::size_t j = 0; j < d; ++j) out.sig.level1[j] = a.sig.level1[j] + b.sig.level1[j];
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = 0; k < d; ++k)
      out.sig.level2[j * d + k] =
          a.sig.level2[j * d + k] + b.sig.level2[j * d + k] + a.sig.level1[j] * b.sig.level1[k];
  return out;
}

RoughPath::RoughPath(GridPtr grid, std::size_t dim, std::vector<double> increments,
                     std::vector<double> areas)
    : grid_(std::move(grid)), dim_(dim), inc_(std::move(increments)), area_(std::move(areas)) {
  if (!grid_) throw ShapeError("RoughPath: null grid");
  const std::size_t n = grid_->steps();
  if (dim_ == 0 || inc_.size() != n * dim_ || area_.size() != n * dim_ * dim_)
    throw ShapeError("RoughPath: storage does not match grid and dimension");
  prefix1_.assign((n + 1) * dim_, 0.0);
  prefix2_.assign((n + 1) * dim_ * dim_, 0.0);
  const std::size_t d = dim_, d2 = d * d;
  for (std::size_t c = 0; c < n; ++c) {
    const double* p1 = &prefix1_[c * d];
    const double* p2 = &prefix2_[c * d2];
    double* q1 = &prefix1_[(c + 1) * d];
    double* q2 = &prefix2_[(c + 1) * d2];
    const double* x = &inc_[c * d];
    const double* a = &area_[c * d2];
    for (std::size_t j = 0; j < d; ++j) q1[j] = p1[j] + x[j];
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k) q2[j * d + k] = p2[j * d + k] + a[j * d + k] + p1[j] * x[k];
  }
}

Signature2 RoughPath::segment(std::size_t i, std::size_t j) const {
  if (i > j || j > steps()) throw ShapeError("RoughPath::segment: bad index pair");
  const std::size_t d = dim_, d2 = d * d;
  Signature2 s(d);
  const double* p1 = &prefix1_[i * d];
  const double* q1 = &prefix1_[j * d];
  const double* p2 = &prefix2_[i * d2];
  const double* q2 = &prefix2_[j * d2];
  for (std::size_t a = 0; a < d; ++a) s.level1[a] = q1[a] - p1[a];
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      s.level2[a * d + b] = q2[a * d + b] - p2[a * d + b] - p1[a] * s.level1[b];
  return s;
}

Segment RoughPath::cell_segment(std::size_t cell) const {
  Segment s{(*grid_)[cell], (*grid_)[cell + 1], Signature2(dim_)};
  auto x = increment(cell);
  auto a = area(cell);
  std::copy(x.begin(), x.end(), s.sig.level1.begin());
  std::copy(a.begin(), a.end(), s.sig.level2.begin());
  return s;
}

Signature2 RoughPath::segment_by_chain(std::size_t i, std::size_t j) const {
  if (i > j || j > steps()) throw ShapeError("RoughPath::segment_by_chain: bad index pair");
  Segment acc{(*grid_)[i], (*grid_)[i], Signature2(dim_)};
  for (std::size_t c = i; c < j; ++c) acc = chen_combine(acc, cell_segment(c));
  return acc.sig;
}

Path RoughPath::base_path() const { return Path(grid_, dim_, prefix1_); }

RoughPath lift_piecewise_linear(const Path& path) {
  if (path.points() < 2) throw ShapeError("lift_piecewise_linear: need at least two points");
  const std::size_t n = path.grid->steps(), d = path.dim;
  std::vector<double> inc(n * d), area(n * d * d);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t j = 0; j < d; ++j) inc[c * d + j] = path.increment(c, j);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        area[(c * d + j) * d + k] = 0.5 * inc[c * d + j] * inc[c * d + k];
  }
  return RoughPath(path.grid, d, std::move(inc), std::move(area));
}

std::vector<RoughPath> lift_batch(const std::vector<Path>& paths) {
  std::vector<RoughPath> out;
  out.reserve(paths.size());
  std::vector<std::optional<RoughPath>> tmp(paths.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < paths.size(); ++i) tmp[i].emplace(lift_piecewise_linear(paths[i]));
  for (auto& r : tmp) out.push_back(std::move(*r));
  return out;
}

std::vector<RoughPath> lift_batch_serial(const std::vector<Path>& paths) {
  std::vector<RoughPath> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(lift_piecewise_linear(p));
  return out;
}

namespace {

PVarResult exact_dp(std::size_t npts, const std::function<double(std::size_t, std::size_t)>& weight, double p) {
  const double neg = -std::numeric_limits<double>::infinity();
  std::vector<double> best(npts, neg);
  std::vector<std::size_t> prev(npts, 0);
  best[0] = 0.0;
  for (std::size_t i = 0; i + 1 < npts; ++i) {
    const double base = best[i];
    for (std::size_t j = i + 1; j < npts; ++j) {
      const double cand = base + std::pow(weight(i, j), p);
      if (cand > best[j]) {
        best[j] = cand;
        prev[j] = i;
      }
    }
  }
  PVarResult r;
  r.p = p;
  r.value = std::pow(best[npts - 1], 1.0 / p);
  std::vector<std::size_t> part{npts - 1};
  while (part.back() != 0) part.push_back(prev[part.back()]);
  std::reverse(part.begin(), part.end());
  r.partition = std::move(part);
  return r;
}

double partition_sum(const std::vector<std::size_t>& part,
                     const std::function<double(std::size_t, std::size_t)>& weight, double p) {
  double s = 0.0;
  for (std::size_t a = 0; a + 1 < part.size(); ++a) s += std::pow(weight(part[a], part[a + 1]), p);
  return s;
}

PVarResult heuristic(std::size_t npts, const std::function<double(std::size_t, std::size_t)>& weight, double p) {
  const std::size_t last = npts - 1;
  std::vector<std::size_t> best_part;
  double best = -1.0;
  auto consider = [&](const std::vector<std::size_t>& part) {
    const double s = partition_sum(part, weight, p);
    if (s > best) {
      best = s;
      best_part = part;
    }
  };
  for (std::size_t stride = 1;; stride *= 2) {
    std::vector<std::size_t> part;
    for (std::size_t i = 0; i < last; i += stride) part.push_back(i);
    part.push_back(last);
    consider(part);
    if (stride >= last) break;
  }
  // Greedy removal from the full grid: drop the interior point whose removal
  // increases the sum most, until no removal helps.
  std::vector<std::size_t> left(npts), right(npts);
  std::vector<bool> alive(npts, true);
  for (std::size_t i = 0; i < npts; ++i) {
    left[i] = i == 0 ? 0 : i - 1;
    right[i] = i + 1;
  }
  auto gain = [&](std::size_t i) {
    const std::size_t a = left[i], b = right[i];
    return std::pow(weight(a, b), p) - std::pow(weight(a, i), p) - std::pow(weight(i, b), p);
  };
  std::vector<double> g(npts, -1.0);
  for (std::size_t i = 1; i < last; ++i) g[i] = gain(i);
  while (true) {
    std::size_t arg = 0;
    double top = 0.0;
    for (std::size_t i = 1; i < last; ++i)
      if (alive[i] && g[i] > top) {
        top = g[i];
        arg = i;
      }
    if (arg == 0) break;
    alive[arg] = false;
    const std::size_t a = left[arg], b = right[arg];
    right[a] = b;
    left[b] = a;
    if (a != 0) g[a] = gain(a);
    if (b != last) g[b] = gain(b);
  }
  std::vector<std::size_t> part;
  for (std::size_t i = 0; i < npts; ++i)
    if (alive[i]) part.push_back(i);
  consider(part);
  PVarResult r;
  r.p = p;
  r.value = std::pow(best, 1.0 / p);
  r.partition = std::move(best_part);
  return r;
}

PVarResult exhaustive(std::size_t npts, const std::function<double(std::size_t, std::size_t)>& weight, double p) {
  const std::size_t interior = npts - 2;
  if (interior > 19) throw DomainError("exhaustive p-variation limited to 20 steps");
  double best = -1.0;
  std::vector<std::size_t> best_part;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << interior); ++mask) {
    std::vector<std::size_t> part{0};
    for (std::size_t b = 0; b < interior; ++b)
      if (mask >> b & 1u) part.push_back(b + 1);
    part.push_back(npts - 1);
    const double s = partition_sum(part, weight, p);
    if (s > best) {
      best = s;
      best_part = part;
    }
  }
  PVarResult r;
  r.p = p;
  r.value = std::pow(best, 1.0 / p);
  r.partition = std::move(best_part);
  return r;
}

}  // namespace

PVarResult p_var_from_weights(std::size_t npoints, const std::function<double(std::size_t, std::size_t)>& weight,
                              double p, PVarMode mode) {
  check_p(p);
  if (npoints < 2) throw ShapeError("p-variation needs at least two points");
  switch (mode) {
    case PVarMode::Exact: return exact_dp(npoints, weight, p);
    case PVarMode::Heuristic: return heuristic(npoints, weight, p);
    case PVarMode::Exhaustive: return exhaustive(npoints, weight, p);
  }
  return {};
}

PVarResult p_var_norm(const RoughPath& rp, double p, PVarMode mode) {
  return p_var_from_weights(
      rp.steps() + 1, [&](std::size_t i, std::size_t j) { return rp.segment(i, j).norm_weight(); }, p, mode);
}

std::vector<double> p_var_batch(const std::vector<RoughPath>& paths, double p) {
  std::vector<double> out(paths.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < paths.size(); ++i) out[i] = p_var_norm(paths[i], p).value;
  return out;
}

std::vector<double> p_var_batch_serial(const std::vector<RoughPath>& paths, double p) {
  std::vector<double> out(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) out[i] = p_var_norm(paths[i], p).value;
  return out;
}

double pvar_distance(const RoughPath& a, const RoughPath& b, double p, PVarMode mode) {
  if (a.dim() != b.dim()) throw ShapeError("pvar_distance: dimension mismatch");
  if (!same_grid(a.grid(), b.grid())) throw ShapeError("pvar_distance: grid mismatch");
  return p_var_from_weights(
             a.steps() + 1,
             [&](std::size_t i, std::size_t j) {
               Signature2 x = a.segment(i, j);
               const Signature2 y = b.segment(i, j);
               for (std::size_t k = 0; k < x.level1.size(); ++k) x.level1[k] -= y.level1[k];
               for (std::size_t k = 0; k < x.level2.size(); ++k) x.level2[k] -= y.level2[k];
               return x.norm_weight();
             },
             p, mode)
      .value;
}

PVarResult path_p_var(const Path& path, double p, PVarMode mode) {
  return p_var_from_weights(
      path.points(),
      [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < path.dim; ++k) {
          const double dx = path.at(j, k) - path.at(i, k);
          s += dx * dx;
        }
        return std::sqrt(s);
      },
      p, mode);
}

double path_pvar_distance(const Path& a, const Path& b, double p, PVarMode mode) {
  require_same_shape(a, b, "path_pvar_distance");
  Path diff(a.grid, a.dim);
  for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] = a.values[i] - b.values[i];
  return path_p_var(diff, p, mode).value;
}

RoughPath translate(const RoughPath& rp, const Path& shift) {
  if (!same_grid(rp.grid(), shift.grid)) throw ShapeError("translate: grid mismatch");
  if (rp.dim() != shift.dim) throw ShapeError("translate: dimension mismatch");
  const std::size_t n = rp.steps(), d = rp.dim();
  std::vector<double> inc = rp.increments();
  std::vector<double> area = rp.areas();
  std::vector<double> dg(d);
  for (std::size_t c = 0; c < n; ++c) {
    const double* dx = &rp.increments()[c * d];
    for (std::size_t j = 0; j < d; ++j) dg[j] = shift.increment(c, j);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t k = 0; k < d; ++k)
        area[(c * d + j) * d + k] += 0.5 * (dg[j] * dx[k] + dx[j] * dg[k]) + 0.5 * dg[j] * dg[k];
    for (std::size_t j = 0; j < d; ++j) inc[c * d + j] += dg[j];
  }
  return RoughPath(rp.grid(), d, std::move(inc), std::move(area));
}

RoughPath translate(const RoughPath& rp, const CameronMartinShift& h) {
  if (!same_grid(rp.grid(), h.grid)) throw ShapeError("translate: grid mismatch");
  return translate(rp, injection(h));
}

}  // namespace tcilab
