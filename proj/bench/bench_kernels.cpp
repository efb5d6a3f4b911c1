// Serial reference against OpenMP kernels: wall time and bitwise agreement.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "tcilab/gauss_sim.hpp"
#include "tcilab/rde_solver.hpp"
#include "tcilab/rough_path.hpp"
#include "tcilab/rough_vol_model.hpp"
#include "tcilab/transport.hpp"
#include "tcilab/wlsi.hpp"

using namespace tcilab;

namespace {

template <class F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void row(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-22s %10.2f %10.2f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              identical ? "identical" : "DIFFERENT");
}

template <class T, class Flatten>
void compare(const char* name, int reps, const std::function<T()>& serial, const std::function<T()>& parallel,
             Flatten flatten) {
  T s, p;
  const double ts = best_ms(reps, [&] { s = serial(); });
  const double tp = best_ms(reps, [&] { p = parallel(); });
  row(name, ts, tp, same(flatten(s), flatten(p)));
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n = argc > 1 ? std::stoul(argv[1]) : 2000;
  const int reps = 3;
  std::printf("threads %d, batch %zu\n", omp_get_max_threads(), n);
  std::printf("%-22s %10s %10s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

  auto grid = make_uniform_grid(1.0, 128);
  DriverSpec fbm;
  fbm.kind = DriverKind::FractionalBM;
  fbm.hurst = 0.4;
  fbm.dim = 3;
  const GaussianSampler sampler(fbm, grid);
  auto flat_paths = [](const std::vector<Path>& v) {
    std::vector<double> out;
    for (const auto& p : v) out.insert(out.end(), p.values.begin(), p.values.end());
    return out;
  };
  compare<std::vector<Path>>(
      "fbm sampler", reps, [&] { return sampler.sample_batch_serial(7, 0, n); },
      [&] { return sampler.sample_batch(7, 0, n); }, flat_paths);

  const auto paths = sampler.sample_batch(7, 0, n);
  auto flat_lifts = [](const std::vector<RoughPath>& v) {
    std::vector<double> out;
    for (const auto& rp : v) {
      out.insert(out.end(), rp.increments().begin(), rp.increments().end());
      out.insert(out.end(), rp.areas().begin(), rp.areas().end());
    }
    return out;
  };
  compare<std::vector<RoughPath>>(
      "lift", reps, [&] { return lift_batch_serial(paths); }, [&] { return lift_batch(paths); }, flat_lifts);

  const auto lifts = lift_batch(paths);
  const std::vector<RoughPath> few(lifts.begin(), lifts.begin() + std::min<std::size_t>(n, 200));
  compare<std::vector<double>>(
      "p-variation (200)", 1, [&] { return p_var_batch_serial(few, 2.5); }, [&] { return p_var_batch(few, 2.5); },
      [](const std::vector<double>& v) { return v; });

  const double s = 1.0;
  const LinearVectorField field(3, {{0, 0, 0, 0, 0, -s, 0, s, 0}, {0, 0, s, 0, 0, 0, -s, 0, 0}, {0, -s, 0, s, 0, 0, 0, 0, 0}});
  const std::vector<double> y0{1.0, 0.0, 0.0};
  auto flat_solutions = [](const std::vector<RdeSolution>& v) {
    std::vector<double> out;
    for (const auto& r : v) out.insert(out.end(), r.values.begin(), r.values.end());
    return out;
  };
  compare<std::vector<RdeSolution>>(
      "so(3) RDE", reps, [&] { return solve_rde_batch_serial(lifts, field, y0); },
      [&] { return solve_rde_batch(lifts, field, y0); }, flat_solutions);

  DriverSpec bm;
  const auto noise = GaussianSampler(bm, make_uniform_grid(1.0, 256)).sample_batch(11, 0, std::min<std::size_t>(n, 500));
  auto flat_models = [](const std::vector<ItoModel>& v) {
    std::vector<double> out;
    for (const auto& m : v)
      for (int k = 1; k <= m.M(); ++k)
        for (std::size_t slot = 0; slot < m.anchors().size(); ++slot) {
          const auto it = m.iterated(k, slot);
          out.insert(out.end(), it.begin(), it.end());
        }
    return out;
  };
  compare<std::vector<ItoModel>>(
      "Ito model (500)", reps, [&] { return build_ito_model_batch_serial(noise, 0.25, 0.02); },
      [&] { return build_ito_model_batch(noise, 0.25, 0.02); }, flat_models);

  const CostFn cost = [&](std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < paths[i].values.size(); ++k) {
      const double d = paths[i].values[k] - paths[j].values[k];
      acc += d * d;
    }
    return acc;
  };
  const std::size_t side = std::min<std::size_t>(n, 1000);
  compare<CostMatrix>(
      "cost matrix", reps, [&] { return build_cost_matrix_serial(side, side, cost); },
      [&] { return build_cost_matrix(side, side, cost); }, [](const CostMatrix& m) { return m.data; });

  const auto spec = FunctionalSpec::rde_endpoint(make_uniform_grid(1.0, 32), 2.5, 1.0);
  auto flat_samples = [](const FunctionalSamples& f) {
    auto out = f.values;
    out.insert(out.end(), f.gradient_norms.begin(), f.gradient_norms.end());
    return out;
  };
  const std::size_t wn = std::min<std::size_t>(n, 500);
  compare<FunctionalSamples>(
      "wlsi RDE gradients", 1, [&] { return draw_samples(spec, wn, 3, false); },
      [&] { return draw_samples(spec, wn, 3, true); }, flat_samples);
  return 0;
}
