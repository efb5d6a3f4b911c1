#include "tcilab/core.hpp"

#include <cmath>

namespace tcilab {

TimeGrid TimeGrid::uniform(double horizon, std::size_t steps) {
  if (steps < 1) throw DomainError("TimeGrid: need at least one step");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw DomainError("TimeGrid: horizon must be positive and finite");
  std::vector<double> pts(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i)
    pts[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
  pts.back() = horizon;
  return TimeGrid(std::move(pts));
}

TimeGrid TimeGrid::from_points(std::vector<double> points) {
  if (points.size() < 2) throw DomainError("TimeGrid: need at least one step");
  if (points.front() != 0.0) throw DomainError("TimeGrid: t_0 must be 0");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i] > points[i - 1]) || !std::isfinite(points[i]))
      throw DomainError("TimeGrid: points must be strictly increasing");
  }
  return TimeGrid(std::move(points));
}

GridPtr make_uniform_grid(double horizon, std::size_t steps) {
  return std::make_shared<const TimeGrid>(TimeGrid::uniform(horizon, steps));
}

bool same_grid(const GridPtr& a, const GridPtr& b) {
  if (!a || !b) return false;
  return a == b || *a == *b;
}

Path::Path(GridPtr g, std::size_t d) : grid(std::move(g)), dim(d) {
  if (!grid) throw ShapeError("Path: null grid");
  if (dim == 0) throw ShapeError("Path: dimension must be positive");
  values.assign(grid->size() * dim, 0.0);
}

Path::Path(GridPtr g, std::size_t d, std::vector<double> v)
    : grid(std::move(g)), dim(d), values(std::move(v)) {
  if (!grid) throw ShapeError("Path: null grid");
  if (dim == 0) throw ShapeError("Path: dimension must be positive");
  if (values.size() != grid->size() * dim)
    throw ShapeError("Path: value count does not match grid x dim");
}

void require_same_shape(const Path& a, const Path& b, const char* where) {
  if (a.dim != b.dim) throw ShapeError(std::string(where) + ": dimension mismatch");
  if (!same_grid(a.grid, b.grid)) throw ShapeError(std::string(where) + ": grid mismatch");
}

}  // namespace tcilab
