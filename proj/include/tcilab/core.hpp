#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcilab {

// Error taxonomy shared by all modules. The CLI maps ConfigError to exit 2
// and every other Error to exit 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DomainError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class CovarianceError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class EvaluationError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };

class BlowupError : public Error {
 public:
  BlowupError(const std::string& what, double last_valid_time)
      : Error(what), last_valid_time_(last_valid_time) {}
  double last_valid_time() const { return last_valid_time_; }

 private:
  double last_valid_time_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class TimeGrid {
 public:
  static TimeGrid uniform(double horizon, std::size_t steps);
  static TimeGrid from_points(std::vector<double> points);

  std::size_t steps() const { return points_.size() - 1; }
  std::size_t size() const { return points_.size(); }
  double horizon() const { return points_.back(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double dt(std::size_t cell) const { return points_[cell + 1] - points_[cell]; }
  const std::vector<double>& points() const { return points_; }

  bool operator==(const TimeGrid& other) const { return points_ == other.points_; }

 private:
  explicit TimeGrid(std::vector<double> points) : points_(std::move(points)) {}
  std::vector<double> points_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

GridPtr make_uniform_grid(double horizon, std::size_t steps);

// Same grid object or identical points.
bool same_grid(const GridPtr& a, const GridPtr& b);

// Discretised d-dimensional path, row-major (N+1) x d.
struct Path {
  GridPtr grid;
  std::size_t dim = 1;
  std::vector<double> values;

  Path() = default;
  Path(GridPtr g, std::size_t d);
  Path(GridPtr g, std::size_t d, std::vector<double> v);

  std::size_t points() const { return grid->size(); }
  double& at(std::size_t i, std::size_t k) { return values[i * dim + k]; }
  double at(std::size_t i, std::size_t k) const { return values[i * dim + k]; }
  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  // Increment over cell i (t_i -> t_{i+1}) in component k.
  double increment(std::size_t i, std::size_t k) const {
    return at(i + 1, k) - at(i, k);
  }
};

void require_same_shape(const Path& a, const Path& b, const char* where);

}  // namespace tcilab
