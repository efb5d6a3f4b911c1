#include "tcilab/pam.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>

#include <fftw3.h>

#include "tcilab/rng.hpp"
#include "parallel.hpp"

namespace tcilab {

namespace {

using detail::for_each_index;

// FFTW planning is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int wavenumber(std::size_t i, std::size_t K) {
  return i <= K / 2 ? static_cast<int>(i) : static_cast<int>(i) - static_cast<int>(K);
}

void require_power_of_two(std::size_t K, const char* where) {
  if (K < 4 || (K & (K - 1)) != 0)
    throw DomainError(std::string(where) + ": K must be a power of two >= 4");
}

// Real <-> half-complex transforms of one K x K field.
class Spectral {
 public:
  explicit Spectral(std::size_t K) : K_(K), half_(K / 2 + 1) {
    real_ = fftw_alloc_real(K * K);
    spec_ = fftw_alloc_complex(K * half_);
    std::lock_guard lock(planner_mutex());
    const int n = static_cast<int>(K);
    forward_ = fftw_plan_dft_r2c_2d(n, n, real_, spec_, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_2d(n, n, spec_, real_, FFTW_ESTIMATE);
  }
  ~Spectral() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(backward_);
    }
    fftw_free(real_);
    fftw_free(spec_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  std::size_t K() const { return K_; }
  std::size_t half() const { return half_; }
  double* real() { return real_; }
  std::complex<double>* spec() { return reinterpret_cast<std::complex<double>*>(spec_); }

  void forward() { fftw_execute(forward_); }
  // Inverse including the 1/K^2 normalisation.
  void backward() {
    fftw_execute(backward_);
    const double scale = 1.0 / static_cast<double>(K_ * K_);
    for (std::size_t i = 0; i < K_ * K_; ++i) real_[i] *= scale;
  }

  // Multiplier table indexed like spec(): f(kx, ky).
  template <class F>
  std::vector<double> table(F&& f) const {
    std::vector<double> out(K_ * half_);
    for (std::size_t i = 0; i < K_; ++i)
      for (std::size_t j = 0; j < half_; ++j) out[i * half_ + j] = f(wavenumber(i, K_), static_cast<int>(j));
    return out;
  }

  void multiply(const std::vector<double>& table) {
    auto* s = spec();
    for (std::size_t i = 0; i < K_ * half_; ++i) s[i] *= table[i];
  }

 private:
  std::size_t K_, half_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr, backward_ = nullptr;
};

std::vector<double> cutoff_filter(std::span<const double> field, std::size_t K, double epsilon) {
  Spectral fft(K);
  std::copy(field.begin(), field.end(), fft.real());
  fft.forward();
  const double kmax2 = 1.0 / (epsilon * epsilon);
  fft.multiply(fft.table([&](int kx, int ky) { return kx * kx + ky * ky <= kmax2 * (1 + 1e-12) ? 1.0 : 0.0; }));
  fft.backward();
  return {fft.real(), fft.real() + K * K};
}

void check_epsilon(double epsilon, std::size_t K, const char* where) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw DomainError(std::string(where) + ": epsilon must be positive");
  if (1.0 / epsilon > static_cast<double>(K / 2) * (1 + 1e-12))
    throw DomainError(std::string(where) + ": cutoff 1/epsilon exceeds the grid Nyquist number K/2");
}

std::vector<std::size_t> snapshot_steps(std::vector<double>& times, double horizon, double step, std::size_t n) {
  if (times.empty()) times.push_back(horizon);
  std::sort(times.begin(), times.end());
  std::vector<std::size_t> out;
  for (double t : times) {
    if (!(t >= 0.0) || t > horizon * (1 + 1e-12)) throw DomainError("pam: snapshot time outside [0, horizon]");
    out.push_back(std::min(n, static_cast<std::size_t>(std::llround(t / step))));
  }
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = static_cast<double>(out[k]) * step;
  return out;
}

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TorusField TorusField::constant(std::size_t K, double value) {
  require_power_of_two(K, "TorusField");
  return {K, std::vector<double>(K * K, value)};
}

TorusField TorusField::from_function(std::size_t K, const std::function<double(double, double)>& f) {
  require_power_of_two(K, "TorusField");
  TorusField out{K, std::vector<double>(K * K)};
  const double h = kTorusSide / static_cast<double>(K);
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) out.values[i * K + j] = f(h * static_cast<double>(i), h * static_cast<double>(j));
  return out;
}

double TorusField::mean() const {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double TorusField::max_abs() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double renormalisation_constant(double epsilon, double c0) {
  if (!(epsilon > 0.0)) throw DomainError("renormalisation_constant: epsilon must be positive");
  return -std::log(epsilon) / std::numbers::pi + c0;
}

double lattice_renormalisation(double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("lattice_renormalisation: epsilon must be positive");
  const double kmax = 1.0 / epsilon;
  const int n = static_cast<int>(std::floor(kmax));
  const double kmax2 = kmax * kmax * (1 + 1e-12);
  double sum = 0.0;
  for (int a = -n; a <= n; ++a)
    for (int b = -n; b <= n; ++b) {
      const double k2 = a * a + b * b;
      if (k2 > 0 && k2 <= kmax2) sum += 1.0 / k2;
    }
  return sum / (4.0 * std::numbers::pi * std::numbers::pi);
}

double calibrate_c0(std::span<const double> epsilons) {
  if (epsilons.empty()) throw DomainError("calibrate_c0: need at least one epsilon");
  double sum = 0.0;
  for (double e : epsilons) sum += lattice_renormalisation(e) - renormalisation_constant(e);
  return sum / static_cast<double>(epsilons.size());
}

MollifiedNoise MollifiedNoise::from_white(std::size_t K, std::vector<double> xi, double epsilon, double c0) {
  require_power_of_two(K, "MollifiedNoise");
  if (xi.size() != K * K) throw ShapeError("MollifiedNoise: white noise must have K*K cells");
  check_epsilon(epsilon, K, "MollifiedNoise");
  MollifiedNoise n;
  n.K = K;
  n.epsilon = epsilon;
  n.c0 = c0;
  n.C_eps = renormalisation_constant(epsilon, c0);
  n.xi_eps = cutoff_filter(xi, K, epsilon);
  n.xi = std::move(xi);
  return n;
}

MollifiedNoise MollifiedNoise::sample(std::size_t K, double epsilon, std::uint64_t seed, std::uint64_t stream,
                                      double c0) {
  require_power_of_two(K, "MollifiedNoise");
  RandomStream rng(seed, stream);
  std::vector<double> xi(K * K);
  rng.fill_normal(xi.data(), xi.size());
  const double sd = static_cast<double>(K) / kTorusSide;
  for (double& v : xi) v *= sd;
  return from_white(K, std::move(xi), epsilon, c0);
}

MollifiedNoise MollifiedNoise::constant_potential(std::size_t K, double level, double epsilon) {
  require_power_of_two(K, "MollifiedNoise");
  MollifiedNoise n;
  n.K = K;
  n.epsilon = epsilon;
  n.c0 = 0.0;
  n.C_eps = 0.0;
  n.xi.assign(K * K, 0.0);
  n.xi_eps.assign(K * K, level);
  return n;
}

MollifiedNoise MollifiedNoise::with_epsilon(double eps) const { return from_white(K, xi, eps, c0); }

std::vector<double> MollifiedNoise::potential(double factor, bool renormalise) const {
  std::vector<double> v(xi_eps.size());
  const double shift = renormalise ? factor * factor * C_eps : 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = factor * xi_eps[i] - shift;
  return v;
}

PamSolution solve_pam_potential(const TorusField& u0, const std::vector<double>& potential, double horizon,
                                double dt, std::vector<double> snapshot_times) {
  const std::size_t K = u0.K;
  require_power_of_two(K, "solve_pam");
  if (u0.values.size() != K * K || potential.size() != K * K) throw ShapeError("solve_pam: field sizes differ");
  if (!(horizon >= 0.0) || !(dt > 0.0)) throw DomainError("solve_pam: need horizon >= 0 and dt > 0");
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9)));
  const double step = horizon / static_cast<double>(n);
  PamSolution sol;
  sol.times = std::move(snapshot_times);
  const auto marks = snapshot_steps(sol.times, horizon, step, n);

  Spectral fft(K);
  const auto heat = [&](double tau) {
    return fft.table([tau](int kx, int ky) { return std::exp(-static_cast<double>(kx * kx + ky * ky) * tau); });
  };
  const auto half_heat = heat(0.5 * step);
  const auto full_heat = heat(step);
  std::vector<double> growth(K * K);
  for (std::size_t i = 0; i < K * K; ++i) growth[i] = std::exp(potential[i] * step);

  std::vector<double> u = u0.values;
  std::size_t next = 0;
  const auto record = [&](std::size_t s) {
    while (next < marks.size() && marks[next] == s) {
      sol.snapshots.push_back(TorusField{K, u});
      ++next;
    }
  };
  record(0);
  // H_{1/2} M H_{1/2} per step; interior half-steps are fused unless a
  // snapshot falls on the boundary.
  std::copy(u.begin(), u.end(), fft.real());
  fft.forward();
  fft.multiply(half_heat);
  for (std::size_t s = 1; s <= n; ++s) {
    fft.backward();
    double* r = fft.real();
    for (std::size_t i = 0; i < K * K; ++i) {
      r[i] *= growth[i];
      if (!std::isfinite(r[i])) throw BlowupError("solve_pam: non-finite value; dt too large", (s - 1) * step);
    }
    fft.forward();
    const bool snap = next < marks.size() && marks[next] == s;
    if (snap || s == n) {
      fft.multiply(half_heat);
      fft.backward();
      u.assign(fft.real(), fft.real() + K * K);
      record(s);
      if (s < n) {
        fft.forward();
        fft.multiply(half_heat);
      }
    } else {
      fft.multiply(full_heat);
    }
  }
  return sol;
}

PamSolution solve_renormalised_pam(const TorusField& u0, const MollifiedNoise& noise, double horizon, double dt,
                                   std::vector<double> snapshot_times, const PamOptions& opts) {
  if (noise.K != u0.K) throw ShapeError("solve_renormalised_pam: noise and initial field grids differ");
  return solve_pam_potential(u0, noise.potential(opts.noise_factor, opts.renormalise), horizon, dt,
                             std::move(snapshot_times));
}

PamCauchyStudy pam_cauchy_study(const PamCauchyConfig& config) {
  if (config.epsilons.size() < 2) throw DomainError("pam_cauchy_study: need at least two levels");
  for (std::size_t k = 1; k < config.epsilons.size(); ++k)
    if (!(config.epsilons[k] < config.epsilons[k - 1])) throw DomainError("pam_cauchy_study: epsilons must decrease");
  const auto base = MollifiedNoise::sample(config.K, config.epsilons.front(), config.seed, 0, config.c0);
  const std::size_t L = config.epsilons.size();
  std::vector<std::vector<double>> ren(L), raw(L);
  const auto u0 = TorusField::constant(config.K, 1.0);
  for_each_index(2 * L, config.parallel, [&](std::size_t job) {
    const std::size_t level = job / 2;
    const bool renormalise = job % 2 == 0;
    const auto noise = base.with_epsilon(config.epsilons[level]);
    auto sol = solve_renormalised_pam(u0, noise, config.t, config.dt, {}, {renormalise, 1.0});
    (renormalise ? ren : raw)[level] = std::move(sol.snapshots.back().values);
  });
  PamCauchyStudy out;
  out.epsilons = config.epsilons;
  for (std::size_t k = 0; k < L; ++k) {
    out.renormalised_sup.push_back(TorusField{config.K, ren[k]}.max_abs());
    out.raw_sup.push_back(TorusField{config.K, raw[k]}.max_abs());
  }
  for (std::size_t k = 0; k + 1 < L; ++k) {
    out.renormalised_diff.push_back(sup_distance(ren[k], ren[k + 1]));
    out.raw_diff.push_back(sup_distance(raw[k], raw[k + 1]));
  }
  out.renormalised_decreasing = true;
  out.raw_increasing = true;
  for (std::size_t k = 1; k < out.raw_diff.size(); ++k) {
    out.renormalised_decreasing = out.renormalised_decreasing && out.renormalised_diff[k] < out.renormalised_diff[k - 1];
    out.raw_increasing = out.raw_increasing && out.raw_diff[k] > out.raw_diff[k - 1];
  }
  return out;
}

SpectralPotential::SpectralPotential(std::size_t K, const std::vector<double>& values, double cutoff) {
  require_power_of_two(K, "SpectralPotential");
  if (values.size() != K * K) throw ShapeError("SpectralPotential: field must have K*K values");
  if (!(cutoff >= 0.0) || cutoff >= static_cast<double>(K / 2))
    throw DomainError("SpectralPotential: cutoff must lie below the Nyquist number K/2");
  Spectral fft(K);
  std::copy(values.begin(), values.end(), fft.real());
  fft.forward();
  const double scale = 1.0 / static_cast<double>(K * K);
  const double c2 = cutoff * cutoff * (1 + 1e-12);
  const auto* s = fft.spec();
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < fft.half(); ++j) {
      const int kx = wavenumber(i, K), ky = static_cast<int>(j);
      if (kx * kx + ky * ky > c2) continue;
      const bool zero = kx == 0 && ky == 0;
      if (!zero && ky == 0 && kx < 0) continue;  // conjugate of a kept mode
      const double w = zero ? scale : 2.0 * scale;
      kx_.push_back(kx);
      ky_.push_back(ky);
      re_.push_back(w * s[i * fft.half() + j].real());
      im_.push_back(w * s[i * fft.half() + j].imag());
      kmax_ = std::max({kmax_, std::abs(kx), ky});
    }
}

double SpectralPotential::operator()(double x, double y) const {
  // e^{i k x} for |k| <= kmax by recurrence from one sincos per coordinate.
  const std::size_t width = 2 * static_cast<std::size_t>(kmax_) + 1;
  thread_local std::vector<std::complex<double>> ex, ey;
  ex.resize(width);
  ey.resize(width);
  const std::complex<double> sx(std::cos(x), std::sin(x)), sy(std::cos(y), std::sin(y));
  ex[kmax_] = ey[kmax_] = 1.0;
  for (int k = 1; k <= kmax_; ++k) {
    ex[kmax_ + k] = ex[kmax_ + k - 1] * sx;
    ey[kmax_ + k] = ey[kmax_ + k - 1] * sy;
    ex[kmax_ - k] = std::conj(ex[kmax_ + k]);
    ey[kmax_ - k] = std::conj(ey[kmax_ + k]);
  }
  double v = 0.0;
  for (std::size_t m = 0; m < re_.size(); ++m) {
    const std::complex<double> e = ex[kmax_ + kx_[m]] * ey[kmax_ + ky_[m]];
    v += re_[m] * e.real() - im_[m] * e.imag();
  }
  return v;
}

FeynmanKacEstimate feynman_kac_estimate(const std::function<double(double, double)>& u0, const MollifiedNoise& noise,
                                        double t, std::array<double, 2> x, std::size_t n_paths, std::uint64_t seed,
                                        const FeynmanKacOptions& opts) {
  if (!(t > 0.0) || t > 1.0) throw DomainError("feynman_kac_estimate: t must lie in (0, 1]");
  if (n_paths < 2) throw DomainError("feynman_kac_estimate: need at least two paths");
  if (!(opts.time_step > 0.0)) throw DomainError("feynman_kac_estimate: time_step must be positive");
  const auto values = noise.potential(1.0, opts.renormalise);
  // A flat potential (constant-level noise) carries no modes beyond zero.
  const double cutoff = std::min(1.0 / noise.epsilon, static_cast<double>(noise.K / 2) - 0.5);
  const SpectralPotential V(noise.K, values, cutoff);
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(t / opts.time_step - 1e-9)));
  const double h = t / static_cast<double>(n);
  const double diffusion = std::sqrt(2.0 * h);

  std::vector<double> weight(n_paths);
  for_each_index(n_paths, opts.parallel, [&](std::size_t p) {
    RandomStream rng(seed, p);
    double px = x[0], py = x[1];
    double integral = 0.5 * V(px, py);
    for (std::size_t s = 1; s <= n; ++s) {
      px += diffusion * rng.normal();
      py += diffusion * rng.normal();
      integral += (s == n ? 0.5 : 1.0) * V(px, py);
    }
    weight[p] = u0(px, py) * std::exp(h * integral);
  });
  FeynmanKacEstimate est;
  est.paths = n_paths;
  const double np = static_cast<double>(n_paths);
  est.value = std::accumulate(weight.begin(), weight.end(), 0.0) / np;
  double ss = 0.0;
  for (double w : weight) ss += (w - est.value) * (w - est.value);
  est.sigma = std::sqrt(ss / (np - 1.0) / np);
  return est;
}

PamTailStudy pam_tail_study(const PamTailConfig& config) {
  if (config.epsilons.empty()) throw DomainError("pam_tail_study: need at least one epsilon");
  if (config.realisations < 2) throw DomainError("pam_tail_study: need at least two realisations");
  for (double e : config.epsilons) check_epsilon(e, config.K, "pam_tail_study");
  const std::size_t L = config.epsilons.size(), N = config.realisations;
  std::vector<double> logs(L * N), vhalf(L * N);
  const auto u0 = TorusField::constant(config.K, 1.0);
  for_each_index(N, config.parallel, [&](std::size_t r) {
    std::vector<double> white(config.K * config.K, 0.0);
    if (!config.zero_noise) white = MollifiedNoise::sample(config.K, config.epsilons.front(), config.seed, r).xi;
    for (std::size_t l = 0; l < L; ++l) {
      const auto noise = MollifiedNoise::from_white(config.K, white, config.epsilons[l], config.c0);
      const auto u = solve_renormalised_pam(u0, noise, config.t, config.dt, {}, {true, 1.0});
      const auto v = solve_renormalised_pam(u0, noise, config.t, config.dt, {}, {true, 2.0});
      logs[l * N + r] = std::max(0.0, std::log(std::abs(u.snapshots.back().values[0])));
      vhalf[l * N + r] = std::sqrt(std::abs(v.snapshots.back().values[0]));
    }
  });
  PamTailStudy out;
  std::vector<double> shapes;
  for (std::size_t l = 0; l < L; ++l) {
    PamTailLevel level;
    level.epsilon = config.epsilons[l];
    level.log_positive.assign(logs.begin() + l * N, logs.begin() + (l + 1) * N);
    try {
      level.fit = fit_tail(level.log_positive, config.fit);
      shapes.push_back(level.fit->shape);
    } catch (const DomainError&) {
      level.fit.reset();
    }
    const std::span<const double> vh(vhalf.data() + l * N, N);
    const double mean = std::accumulate(vh.begin(), vh.end(), 0.0) / static_cast<double>(N);
    double ss = 0.0;
    for (double v : vh) ss += (v - mean) * (v - mean);
    level.v_half_moment = mean;
    level.v_half_sigma = std::sqrt(ss / static_cast<double>(N - 1) / static_cast<double>(N));
    out.levels.push_back(std::move(level));
  }
  if (shapes.size() >= 2) out.shape_spread = std::abs(shapes[shapes.size() - 1] - shapes[shapes.size() - 2]);
  return out;
}

}  // namespace tcilab
