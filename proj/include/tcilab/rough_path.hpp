#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tcilab/core.hpp"
#include "tcilab/gauss_sim.hpp"

namespace tcilab {

// Truncated level-2 signature of a path over one interval.
struct Signature2 {
  std::size_t dim = 0;
  std::vector<double> level1;  // d
  std::vector<double> level2;  // d x d row-major, entry (j,k) = int X^j dX^k

  explicit Signature2(std::size_t d = 0) : dim(d), level1(d, 0.0), level2(d * d, 0.0) {}
  double norm_weight() const;  // |X| + |XX| (Euclidean, Frobenius)
};

struct Segment {
  double start = 0.0;
  double end = 0.0;
  Signature2 sig;
};

// Chen's relation; b must start where a ends.
Segment chen_combine(const Segment& a, const Segment& b);

class RoughPath {
 public:
  RoughPath(GridPtr grid, std::size_t dim, std::vector<double> increments, std::vector<double> areas);

  const GridPtr& grid() const { return grid_; }
  std::size_t dim() const { return dim_; }
  std::size_t steps() const { return grid_->steps(); }
  std::span<const double> increment(std::size_t cell) const {
    return {inc_.data() + cell * dim_, dim_};
  }
  std::span<const double> area(std::size_t cell) const {
    return {area_.data() + cell * dim_ * dim_, dim_ * dim_};
  }
  const std::vector<double>& increments() const { return inc_; }
  const std::vector<double>& areas() const { return area_; }

  // (X, XX) over [t_i, t_j], i <= j, reconstructed from the cumulative
  // signature by Chen's relation in O(d^2).
  Signature2 segment(std::size_t i, std::size_t j) const;
  // Same quantity by chaining chen_combine over the elementary cells.
  Signature2 segment_by_chain(std::size_t i, std::size_t j) const;
  Segment cell_segment(std::size_t cell) const;

  // Level-1 path starting at the origin.
  Path base_path() const;

 private:
  GridPtr grid_;
  std::size_t dim_;
  std::vector<double> inc_;
  std::vector<double> area_;
  std::vector<double> prefix1_;  // X_{0,t_k}
  std::vector<double> prefix2_;  // XX_{0,t_k}
};

RoughPath lift_piecewise_linear(const Path& path);
std::vector<RoughPath> lift_batch(const std::vector<Path>& paths);
std::vector<RoughPath> lift_batch_serial(const std::vector<Path>& paths);

enum class PVarMode {
  Exact,       // dynamic programme over all grid dissections
  Heuristic,   // full grid, dyadic coarsenings, greedy point removal
  Exhaustive,  // enumeration of every dissection, N <= 20
};

struct PVarResult {
  double value = 0.0;
  std::vector<std::size_t> partition;  // grid indices, first 0, last N
  double p = 1.0;
};

// Supremum of sum w(t_a, t_b)^p over dissections of the grid {0..npoints-1},
// reported as (sum)^{1/p}. weight(i, j) must be defined for i < j.
PVarResult p_var_from_weights(std::size_t npoints, const std::function<double(std::size_t, std::size_t)>& weight,
                              double p, PVarMode mode = PVarMode::Exact);

// Inhomogeneous p-variation norm with weights |X_{s,t}| + |XX_{s,t}|.
PVarResult p_var_norm(const RoughPath& rp, double p, PVarMode mode = PVarMode::Exact);
std::vector<double> p_var_batch(const std::vector<RoughPath>& paths, double p);
std::vector<double> p_var_batch_serial(const std::vector<RoughPath>& paths, double p);
double pvar_distance(const RoughPath& a, const RoughPath& b, double p, PVarMode mode = PVarMode::Exact);

// Level-1 p-variation of a path and the corresponding distance.
PVarResult path_p_var(const Path& path, double p, PVarMode mode = PVarMode::Exact);
double path_pvar_distance(const Path& a, const Path& b, double p, PVarMode mode = PVarMode::Exact);

// T_g X for a path-space shift g (piecewise linear on the grid); cross
// integrals are the exact iterated integrals of the linear interpolants on
// each cell, so the map is additive in g.
RoughPath translate(const RoughPath& rp, const Path& shift);
RoughPath translate(const RoughPath& rp, const CameronMartinShift& h);

}  // namespace tcilab
