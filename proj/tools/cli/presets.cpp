#include "presets.hpp"

#include "tcilab/core.hpp"

namespace tcilab::cli {

const std::vector<Preset>& presets() {
  static const std::vector<Preset> list{
      {"chen-geometric", "lift", "Chen relation and symmetric-part identity on 100 lifted Brownian paths",
       R"(command: lift
driver: {kind: bm, dim: 3}
grid: {horizon: 1, steps: 256}
lift: {paths: 100, p: 2.5, chen_triples: 200, tolerance: 1.0e-10}
)"},
      {"sampler-rlfbm-h01", "simulate", "RL-fBm variance t^{2H} at H = 0.1, 1e5 samples",
       R"(command: simulate
driver: {kind: rlfbm, hurst: 0.1}
grid: {horizon: 1, steps: 64}
simulate: {paths: 1, variance_check: true, variance_samples: 100000, check_times: 5}
)"},
      {"sampler-rlfbm-h03", "simulate", "RL-fBm variance t^{2H} at H = 0.3, 1e5 samples",
       R"(command: simulate
driver: {kind: rlfbm, hurst: 0.3}
grid: {horizon: 1, steps: 64}
simulate: {paths: 1, variance_check: true, variance_samples: 100000, check_times: 5}
)"},
      {"sampler-rlfbm-h05", "simulate", "RL-fBm variance t^{2H} at H = 0.5, 1e5 samples",
       R"(command: simulate
driver: {kind: rlfbm, hurst: 0.5}
grid: {horizon: 1, steps: 64}
simulate: {paths: 1, variance_check: true, variance_samples: 100000, check_times: 5}
)"},
      {"tci-identity-bm", "tci", "Gaussian Talagrand baseline for the identity functional",
       R"(command: tci
functional: {kind: identity, steps: 32}
ray: {shape: constant, level: 0.7, t_min_exp: -4, t_max_exp: 3, count: 10}
tci: {mode: experiment, samples: 256, ot_samples: 64, alpha_constant: 0.25}
)"},
      {"model-shift-h025", "tci", "Shift-exponent regression of the Ito model, H = 0.25, kappa = 0.02",
       R"(command: tci
functional: {kind: ito-model, hurst: 0.25, kappa: 0.02, steps: 256}
ray: {shape: sine, level: 1, t_min_exp: -5, t_max_exp: 3, count: 9}
tci: {mode: regression, regression_samples: 512}
)"},
      {"rde-fbm-h04", "tci", "TCI experiment for the so(3) RDE driven by fBm, H = 0.4",
       R"(command: tci
functional: {kind: rde-solution, driver: {kind: fbm, hurst: 0.4, dim: 3}, steps: 64, p: 2.6, field_scale: 1}
ray: {shape: constant, level: 1, t_min_exp: -4, t_max_exp: 3, count: 8}
tci: {mode: experiment, samples: 256, ot_samples: 64}
)"},
      {"tails-rde-fbm-h04", "tails", "Weibull tail shape of the RDE p-variation against 2/q",
       R"(command: tails
functional: {kind: rde-solution, driver: {kind: fbm, hurst: 0.4, dim: 3}, steps: 64, p: 2.6, field_scale: 1}
tails: {samples: 200000, expected_shape: 1.8, shape_tolerance: 0.35, min_r_squared: 0.95}
)"},
      {"deviations-rde-fbm-h04", "deviations", "Deviation estimates for block means of the RDE p-variation",
       R"(command: deviations
functional: {kind: rde-solution, driver: {kind: fbm, hurst: 0.4, dim: 3}, steps: 64, p: 2.6, field_scale: 1}
deviations: {p: 0.9, n_values: [1, 2, 4, 8], s_grid: [2.45, 2.5, 2.55, 2.6, 2.65, 2.7], replications: 100000}
)"},
      {"logprice-h03", "tci", "Log-price TCI with cost C^0.4 norm to the power 1/3, quadratic volatility",
       R"(command: tci
functional: {kind: log-price, hurst: 0.3, kappa: 0.02, steps: 256, volatility: [0.2, 0.5, 0.3], holder: 0.4}
ray: {shape: sine, level: 1, t_min_exp: -5, t_max_exp: 3, count: 9}
tci: {mode: both, samples: 256, ot_samples: 64, cost_exponent: 0.3333333333333333, regression_samples: 256}
)"},
      {"pam-cauchy", "pam", "Cauchy differences of renormalised and raw PAM, K = 128, t = 0.1",
       R"(command: pam
pam: {mode: cauchy, K: 128, epsilons: [0.125, 0.0625, 0.03125], t: 0.1, dt: 1.0e-4}
)"},
      {"pam-feynman-kac", "pam", "Feynman-Kac against the spectral solver at t = 0.05, 1e4 paths",
       R"(command: pam
pam: {mode: feynman-kac, K: 128, epsilon: 0.0625, t: 0.05, dt: 1.0e-4, paths: 10000}
)"},
      {"pam-tails", "pam", "Log-normal tails of renormalised PAM at t = 0.05, 1e4 realisations",
       R"(command: pam
pam: {mode: tails, K: 64, epsilons: [0.0625, 0.03125], t: 0.05, dt: 5.0e-4, realisations: 10000, c0: calibrated}
)"},
      {"pam-solve", "pam", "One renormalised PAM solution with snapshots",
       R"(command: pam
pam: {mode: solve, K: 128, epsilon: 0.0625, t: 0.1, dt: 1.0e-4, snapshots: [0.05, 0.1]}
)"},
      {"wlsi-polynomial", "wlsi", "Weighted log-Sobolev suite for polynomial Wiener functionals",
       R"(command: wlsi
wlsi: {functional: polynomial, steps: 64, samples: 10000, p_grid: [2, 4], marginal: true}
)"},
      {"wlsi-polynomial-linear", "wlsi", "Moment consequence for the degree-one polynomial functional",
       R"(command: wlsi
wlsi: {functional: polynomial, steps: 64, levels: [1], starts: [0], ends: [1], powers: [1], samples: 10000, p_grid: [2, 4]}
)"},
      {"wlsi-rough-path", "wlsi", "Gradient bound for the Gaussian rough-path triple",
       R"(command: wlsi
wlsi: {functional: rough-path-triple, steps: 32, dim: 2, alpha: 0.4, s_index: 8, t_index: 24, samples: 10000}
)"},
      {"wlsi-rde", "wlsi", "Gradient bound and envelope for the so(3) RDE endpoint",
       R"(command: wlsi
wlsi: {functional: rde-endpoint, steps: 32, p: 2.5, field_scale: 1, samples: 10000}
)"},
  };
  return list;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  throw ConfigError("unknown preset '" + name + "' (run 'tcilab presets' for the list)");
}

}  // namespace tcilab::cli
