#include "commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "tcilab/gauss_sim.hpp"
#include "tcilab/io.hpp"
#include "tcilab/pam.hpp"
#include "tcilab/rde_solver.hpp"
#include "tcilab/rng.hpp"
#include "tcilab/rough_path.hpp"
#include "tcilab/rough_vol_model.hpp"
#include "tcilab/tci_verify.hpp"
#include "tcilab/wlsi.hpp"

namespace tcilab::cli {

namespace {

static_assert(std::endian::native == std::endian::little, "field writer assumes a little-endian host");

std::string path_csv(const Path& p) {
  std::ostringstream out;
  io::write_path_csv(out, p);
  return out.str();
}

std::string column_csv(const std::string& header, const std::vector<double>& values) {
  std::ostringstream out;
  out.precision(17);
  out << header << "\n";
  for (double v : values) out << v << "\n";
  return out.str();
}

// "TCIF", u32 version, u64 K, K*K f64 row-major.
std::string field_bytes(const TorusField& f) {
  std::string out = "TCIF";
  const std::uint32_t version = 1;
  const std::uint64_t K = f.K;
  out.append(reinterpret_cast<const char*>(&version), sizeof version);
  out.append(reinterpret_cast<const char*>(&K), sizeof K);
  out.append(reinterpret_cast<const char*>(f.values.data()), f.values.size() * sizeof(double));
  return out;
}

Json tail_fit_json(const TailFit& f) {
  Json levels = Json::array();
  for (std::size_t k = 0; k < f.levels.size(); ++k)
    levels.push_back({{"level", f.levels[k]},
                      {"survival", f.survival[k]},
                      {"exceedances", f.exceedances[k]},
                      {"trusted", static_cast<bool>(f.trusted[k])}});
  return {{"shape", f.shape},
          {"log_constant", f.log_constant},
          {"r_squared", f.r_squared},
          {"lognormal", {{"a", f.lognormal_a}, {"b", f.lognormal_b}, {"r_squared", f.lognormal_r_squared}}},
          {"levels", levels}};
}

Json deviation_function_json(const DeviationFunction& a) {
  return {{"form", a.form == DeviationFunction::Form::PowerMin ? "power-min" : "talagrand"},
          {"constant", a.constant},
          {"a", a.a},
          {"b", a.b},
          {"breakpoint", a.breakpoint}};
}

Json tci_report_json(const TciReport& r) {
  Json rows = Json::array();
  for (const auto& s : r.rows)
    rows.push_back({{"t", s.t},
                    {"shift_norm", s.shift_norm},
                    {"entropy", s.entropy},
                    {"sync_cost", s.sync_cost},
                    {"sync_sigma", s.sync_sigma},
                    {"sync_ci", {s.sync_lo, s.sync_hi}},
                    {"ot_cost", s.ot_cost},
                    {"ot_sigma", s.ot_sigma},
                    {"ot_sync_subsample", s.ot_sync_subsample},
                    {"constant_bound", s.constant_bound},
                    {"ot_below_sync", s.ot_below_sync},
                    {"passes", s.passes}});
  return {{"functional", r.functional_id},
          {"cost", r.cost_id},
          {"regime_exponent", r.regime_exponent},
          {"cost_exponent", r.cost_exponent},
          {"samples", r.samples},
          {"ot_samples", r.ot_samples},
          {"fitted_constant", r.fitted_constant},
          {"fitted_constant_half_breakpoint", r.fitted_constant_half},
          {"fitted_constant_double_breakpoint", r.fitted_constant_double},
          {"alpha", deviation_function_json(r.alpha)},
          {"pass_fraction", r.pass_fraction},
          {"pass", r.pass},
          {"rows", rows}};
}

Json regression_json(const ShiftRegression& r) {
  return {{"t", r.t_values},          {"median", r.median},   {"small_slope", r.small_slope},
          {"large_slope", r.large_slope}, {"claimed_exponent", r.claimed_exponent}, {"dropped", r.dropped},
          {"pass", r.pass}};
}

Json driver_json(const DriverSpec& d) {
  return {{"kind", to_string(d.kind)}, {"dim", d.dim}, {"hurst", d.hurst}};
}

double parse_c0(Block& b, const std::vector<double>& epsilons) {
  const auto text = b.get<std::string>("c0", "0");
  if (text == "calibrated") return calibrate_c0(epsilons);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    b.fail("c0", "must be a number or 'calibrated'");
  }
}

// ---------------------------------------------------------------- simulate

Job plan_simulate(Block& root, std::uint64_t seed) {
  const DriverSpec driver = parse_driver(root.child("driver"));
  const GridPtr grid = parse_grid(root.child("grid"));
  Block& s = root.child("simulate");
  const auto paths = s.get<std::size_t>("paths", 1);
  const bool variance = s.get<bool>("variance_check", false);
  const auto var_samples = s.get<std::size_t>("variance_samples", 100'000);
  const auto check_times = s.get<std::size_t>("check_times", 5);
  const auto z_max = s.get<double>("z_max", 4.0);
  if (paths > 10'000) s.fail("paths", "must be at most 10000");
  if (variance && (var_samples < 2 || check_times < 1 || check_times > grid->steps()))
    s.fail("check_times", "needs 1 <= check_times <= steps and variance_samples >= 2");
  return [=] {
    const GaussianSampler sampler(driver, grid);
    RunResult r;
    r.report = {{"driver", driver_json(driver)},
                {"horizon", grid->horizon()},
                {"steps", grid->steps()},
                {"paths", paths},
                {"jitter", sampler.jitter()}};
    const auto batch = sampler.sample_batch(seed, 0, paths);
    for (std::size_t i = 0; i < paths; ++i) r.files.push_back({"path-" + std::to_string(i) + ".csv", path_csv(batch[i])});
    if (variance) {
      std::vector<std::size_t> idx;
      for (std::size_t k = 1; k <= check_times; ++k)
        idx.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(k * grid->steps()) / check_times)));
      std::vector<double> s1(idx.size(), 0.0), s2(idx.size(), 0.0);
      constexpr std::size_t chunk = 4096;
      for (std::size_t first = 0; first < var_samples; first += chunk) {
        const auto part = sampler.sample_batch(seed, paths + first, std::min(chunk, var_samples - first));
        for (const auto& p : part)
          for (std::size_t k = 0; k < idx.size(); ++k) {
            const double x2 = p.at(idx[k], 0) * p.at(idx[k], 0);
            s1[k] += x2;
            s2[k] += x2 * x2;
          }
      }
      Json rows = Json::array();
      bool pass = true;
      const double n = static_cast<double>(var_samples);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double t = (*grid)[idx[k]];
        const double mean = s1[k] / n;
        const double se = std::sqrt(std::max(0.0, s2[k] / n - mean * mean) / n);
        const double exact = driver_covariance(driver, t, t);
        const double z = se > 0.0 ? (mean - exact) / se : 0.0;
        pass = pass && std::abs(z) <= z_max;
        rows.push_back({{"t", t}, {"variance", mean}, {"standard_error", se}, {"exact", exact}, {"z", z}});
      }
      r.report["variance_check"] = {{"samples", var_samples}, {"z_max", z_max}, {"rows", rows}, {"pass", pass}};
      r.report["pass"] = pass;
    }
    return r;
  };
}

// ---------------------------------------------------------------- lift

PVarMode parse_pvar_mode(Block& b) {
  const auto m = b.get<std::string>("pvar_mode", "exact");
  if (m == "exact") return PVarMode::Exact;
  if (m == "heuristic") return PVarMode::Heuristic;
  if (m == "exhaustive") return PVarMode::Exhaustive;
  b.fail("pvar_mode", "must be exact, heuristic or exhaustive");
}

Job plan_lift(Block& root, std::uint64_t seed) {
  const DriverSpec driver = parse_driver(root.child("driver"), 2);
  const GridPtr grid = parse_grid(root.child("grid"));
  Block& b = root.child("lift");
  const auto paths = b.get<std::size_t>("paths", 10);
  const auto p = b.get<double>("p", 2.5);
  const PVarMode mode = parse_pvar_mode(b);
  const auto triples = b.get<std::size_t>("chen_triples", 200);
  const auto tolerance = b.get<double>("tolerance", 1e-10);
  if (!(p >= 1.0)) b.fail("p", "must be >= 1");
  if (paths < 1) b.fail("paths", "must be positive");
  if (mode == PVarMode::Exhaustive && grid->steps() > 20) b.fail("pvar_mode", "exhaustive needs steps <= 20");
  return [=] {
    const GaussianSampler sampler(driver, grid);
    const auto lifts = lift_batch(sampler.sample_batch(seed, 0, paths));
    const std::size_t d = driver.dim, N = grid->steps();
    double chen = 0.0, sym = 0.0, chain = 0.0;
    Json norms = Json::array();
    RandomStream rng(derive_stream(seed, 0x11f7), 0);
    for (const auto& rp : lifts) {
      norms.push_back(p_var_norm(rp, p, mode).value);
      for (std::size_t k = 0; k < triples; ++k) {
        std::size_t a = static_cast<std::size_t>(rng.uniform() * (N + 1));
        std::size_t c = static_cast<std::size_t>(rng.uniform() * (N + 1));
        a = std::min(a, N);
        c = std::min(c, N);
        if (a > c) std::swap(a, c);
        const std::size_t m = a + static_cast<std::size_t>(rng.uniform() * static_cast<double>(c - a + 1));
        const auto whole = rp.segment(a, c);
        const Segment left{(*grid)[a], (*grid)[std::min(m, c)], rp.segment(a, std::min(m, c))};
        const Segment right{(*grid)[std::min(m, c)], (*grid)[c], rp.segment(std::min(m, c), c)};
        const auto joined = chen_combine(left, right).sig;
        for (std::size_t e = 0; e < d; ++e) chen = std::max(chen, std::abs(joined.level1[e] - whole.level1[e]));
        for (std::size_t e = 0; e < d * d; ++e) chen = std::max(chen, std::abs(joined.level2[e] - whole.level2[e]));
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) {
            const double s = 0.5 * (whole.level2[i * d + j] + whole.level2[j * d + i]);
            sym = std::max(sym, std::abs(s - 0.5 * whole.level1[i] * whole.level1[j]));
          }
      }
      const auto direct = rp.segment(0, N), chained = rp.segment_by_chain(0, N);
      for (std::size_t e = 0; e < d * d; ++e) chain = std::max(chain, std::abs(direct.level2[e] - chained.level2[e]));
    }
    RunResult r;
    r.report = {{"driver", driver_json(driver)},
                {"steps", N},
                {"p", p},
                {"pvar_norms", norms},
                {"chen_max_error", chen},
                {"symmetric_part_max_error", sym},
                {"prefix_vs_chain_max_error", chain},
                {"tolerance", tolerance},
                {"pass", chen <= tolerance && sym <= tolerance && chain <= tolerance}};
    io::Container c;
    c.path = lifts[0].base_path();
    c.sections["AREA"] = lifts[0].areas();
    std::ostringstream bin;
    io::write_container(bin, c);
    r.files.push_back({"lift-0.tcip", bin.str()});
    return r;
  };
}

// ---------------------------------------------------------------- solve-rde

std::vector<std::vector<double>> so3_matrices(double s) {
  return {{0, 0, 0, 0, 0, -s, 0, s, 0}, {0, 0, s, 0, 0, 0, -s, 0, 0}, {0, -s, 0, s, 0, 0, 0, 0, 0}};
}

Job plan_solve_rde(Block& root, std::uint64_t seed) {
  const DriverSpec driver = parse_driver(root.child("driver"), 3);
  const GridPtr grid = parse_grid(root.child("grid"));
  Block& b = root.child("rde");
  const auto field = b.get<std::string>("field", "so3");
  const auto scale = b.get<double>("scale", 1.0);
  auto matrices = b.get<std::vector<std::vector<double>>>("matrices", {});
  const auto y0 = b.get<std::vector<double>>("y0", {1.0, 0.0, 0.0});
  const auto paths = b.get<std::size_t>("paths", 4);
  const auto p = b.get<double>("p", 2.6);
  if (field == "so3") {
    if (!matrices.empty()) b.fail("matrices", "is only used with field: linear");
    matrices = so3_matrices(scale);
  } else if (field != "linear") {
    b.fail("field", "must be so3 or linear");
  }
  const std::size_t m = y0.size();
  if (m == 0) b.fail("y0", "must be non-empty");
  if (matrices.size() != driver.dim) b.fail("matrices", "needs one matrix per driver component");
  for (const auto& a : matrices)
    if (a.size() != m * m) b.fail("matrices", "must be m x m row-major with m = len(y0)");
  if (!driver.admits_level2_lift()) root.child("driver").fail("hurst", "driver does not admit a level-2 lift");
  if (paths < 1) b.fail("paths", "must be positive");
  return [=] {
    const LinearVectorField vf(m, matrices);
    const GaussianSampler sampler(driver, grid);
    const auto lifts = lift_batch(sampler.sample_batch(seed, 0, paths));
    const auto sols = solve_rde_batch(lifts, vf, y0);
    Json rows = Json::array();
    for (const auto& s : sols) {
      const auto end = s.state(grid->steps());
      double norm = 0.0;
      for (double v : end) norm += v * v;
      rows.push_back({{"endpoint", std::vector<double>(end.begin(), end.end())},
                      {"endpoint_norm", std::sqrt(norm)},
                      {"pvar", path_p_var(s.as_path(), p).value}});
    }
    RunResult r;
    r.report = {{"driver", driver_json(driver)}, {"steps", grid->steps()}, {"field", field}, {"p", p}, {"paths", rows}};
    r.files.push_back({"solution-0.csv", path_csv(sols[0].as_path())});
    return r;
  };
}

// ---------------------------------------------------------------- model

Job plan_model(Block& root, std::uint64_t seed) {
  const GridPtr grid = parse_grid(root.child("grid"), 1.0, 256);
  Block& b = root.child("model");
  const auto hurst = b.get<double>("hurst", 0.25);
  const auto kappa = b.get<double>("kappa", 0.02);
  const auto anchors = b.get<std::size_t>("anchors", kDefaultAnchors);
  const auto paths = b.get<std::size_t>("paths", 1);
  const auto vol = b.get<std::vector<double>>("volatility", {0.0, 1.0});
  const auto holder = b.get<double>("holder", 0.4);
  const auto j0 = b.get<int>("scale_min", 2), j1 = b.get<int>("scale_max", 5);
  if (!(kappa > 0.0 && kappa < hurst && hurst < 0.5)) b.fail("kappa", "needs 0 < kappa < hurst < 1/2");
  if (vol.empty()) b.fail("volatility", "needs at least one coefficient");
  if (paths < 1) b.fail("paths", "must be positive");
  if (j0 > j1) b.fail("scale_min", "must not exceed scale_max");
  return [=] {
    const GaussianSampler sampler(DriverSpec::brownian(1), grid);
    const auto ws = sampler.sample_batch(seed, 0, paths);
    const auto models = build_ito_model_batch(ws, hurst, kappa, anchors);
    const auto zero = build_ito_model(Path(grid, 1), hurst, kappa, anchors);
    const auto fam = TestFunctionFamily::anchors_of(zero, j0, j1);
    const auto f = VolatilityFunction::polynomial(vol);
    Json symbols = Json::array();
    for (const auto& s : zero.symbols().symbols())
      symbols.push_back({{"name", s.name()}, {"degree", zero.symbols().degree(s)}});
    Json rows = Json::array();
    Path price0;
    for (std::size_t i = 0; i < paths; ++i) {
      const auto rep = model_distance_report(models[i], zero, fam);
      const Path x = log_price(models[i], f);
      if (i == 0) price0 = x;
      rows.push_back({{"twobar_to_zero", rep.twobar},
                      {"threebar_to_zero", rep.threebar},
                      {"log_price_end", x.at(grid->steps(), 0)},
                      {"log_price_holder", holder_norm(x.values, *grid, holder)}});
    }
    RunResult r;
    r.report = {{"hurst", hurst}, {"kappa", kappa}, {"M", zero.M()}, {"symbols", symbols}, {"paths", rows}};
    std::ostringstream bin;
    io::write_container(bin, model_container(models[0]));
    r.files.push_back({"model-0.tcip", bin.str()});
    r.files.push_back({"log-price-0.csv", path_csv(price0)});
    return r;
  };
}

// ---------------------------------------------------------------- tci

ShiftRay parse_ray(Block& b) {
  ShiftRay ray;
  try {
    ray.shape = shift_shape_from_string(b.get<std::string>("shape", "constant"));
  } catch (const Error& e) {
    b.fail("shape", e.what());
  }
  ray.level = b.get<double>("level", 1.0);
  const auto lo = b.get<double>("t_min_exp", -4.0), hi = b.get<double>("t_max_exp", 3.0);
  const auto count = b.get<std::size_t>("count", 10);
  ray.t_values = b.get<std::vector<double>>("t_values", {});
  if (ray.t_values.empty()) {
    if (count < 1 || !(hi >= lo)) b.fail("count", "needs count >= 1 and t_max_exp >= t_min_exp");
    ray.t_values = ShiftRay::dyadic(lo, hi, count);
  }
  for (double t : ray.t_values)
    if (!(t >= 0.0)) b.fail("t_values", "must be nonnegative");
  return ray;
}

Job plan_tci(Block& root, std::uint64_t seed) {
  TciConfig c;
  c.functional = parse_functional(root.child("functional"));
  c.ray = parse_ray(root.child("ray"));
  c.seed = seed;
  Block& b = root.child("tci");
  const auto mode = b.get<std::string>("mode", "experiment");
  if (mode != "experiment" && mode != "regression" && mode != "both")
    b.fail("mode", "must be experiment, regression or both");
  c.samples = b.get("samples", c.samples);
  c.ot_samples = b.get("ot_samples", c.ot_samples);
  c.bootstrap = b.get("bootstrap", c.bootstrap);
  if (b.has("cost_exponent")) c.cost_exponent = b.get<double>("cost_exponent", 1.0);
  if (b.has("alpha_constant")) c.alpha_constant = b.get<double>("alpha_constant", 1.0);
  c.breakpoint = b.get("breakpoint", c.breakpoint);
  const auto reg_samples = b.get<std::size_t>("regression_samples", 512);
  if (c.ot_samples > c.samples) b.fail("ot_samples", "must not exceed samples");
  return [=] {
    RunResult r;
    bool pass = true;
    r.report["functional"] = to_string(c.functional.kind);
    if (mode != "regression") {
      const auto rep = run_tci_experiment(c);
      r.report["experiment"] = tci_report_json(rep);
      pass = pass && rep.pass;
    }
    if (mode != "experiment") {
      const auto fn = make_functional(c.functional);
      const auto h0 = c.ray.direction(fn->driver(), fn->grid());
      const auto reg = shift_exponent_regression(*fn, h0, c.ray.t_values, reg_samples, seed);
      r.report["regression"] = regression_json(reg);
      pass = pass && reg.pass;
    }
    r.report["pass"] = pass;
    return r;
  };
}

// ---------------------------------------------------------------- tails

Job plan_tails(Block& root, std::uint64_t seed) {
  const FunctionalConfig fc = parse_functional(root.child("functional"));
  Block& b = root.child("tails");
  const auto samples = b.get<std::size_t>("samples", 100'000);
  const TailFitOptions opts = parse_tail_options(b.child("fit"));
  const auto expected = b.get<double>("expected_shape", 0.0);
  const auto tol = b.get<double>("shape_tolerance", 0.35);
  const auto min_r2 = b.get<double>("min_r_squared", 0.95);
  const auto moment_p = b.get<double>("exp_moment_p", 2.0);
  const auto s_grid = b.get<std::vector<double>>("s_grid", {});
  const auto lambdas = b.get<std::vector<double>>("lambdas", {});
  if (samples < opts.min_samples) b.fail("samples", "is below fit.min_samples");
  return [=] {
    const auto fn = make_functional(fc);
    const auto sizes = sample_sizes(*fn, samples, seed);
    const auto fit = fit_tail(sizes, opts);
    RunResult r;
    r.report = {{"functional", fn->id()}, {"samples", samples}, {"fit", tail_fit_json(fit)}};
    bool pass = fit.r_squared >= min_r2;
    if (expected > 0.0) {
      pass = pass && std::abs(fit.shape - expected) <= tol;
      r.report["expected_shape"] = expected;
      r.report["shape_tolerance"] = tol;
    }
    r.report["min_r_squared"] = min_r2;
    if (!s_grid.empty()) {
      const auto em = check_exp_moments(sizes, moment_p, s_grid);
      Json pts = Json::array();
      for (const auto& pt : em.points)
        pts.push_back({{"s", pt.s}, {"log_mean", pt.log_mean}, {"rel_se", pt.rel_se}, {"ess", pt.ess},
                       {"trusted", pt.trusted}});
      r.report["exp_moments"] = {{"p", em.p}, {"points", pts}, {"all_trusted", em.all_trusted},
                                 {"finite_trend", em.finite_trend}};
    }
    if (!lambdas.empty()) {
      const auto gi = gaussian_integrability(sizes, lambdas);
      std::vector<bool> finite(gi.finite.begin(), gi.finite.end());
      r.report["gaussian_integrability"] = {{"intercept", gi.intercept}, {"rate", gi.rate},
                                            {"r_squared", gi.r_squared}, {"lambdas", gi.lambdas},
                                            {"log_values", gi.log_values}, {"finite", finite}};
    }
    r.report["pass"] = pass;
    r.files.push_back({"sizes.csv", column_csv("size", sizes)});
    return r;
  };
}

// ---------------------------------------------------------------- deviations

Job plan_deviations(Block& root, std::uint64_t seed) {
  const FunctionalConfig fc = parse_functional(root.child("functional"));
  Block& b = root.child("deviations");
  const auto p = b.get<double>("p", 0.5);
  const auto n_values = b.get<std::vector<std::size_t>>("n_values", {1, 2, 4, 8});
  const auto s_grid = b.get<std::vector<double>>("s_grid", {});
  const auto reps = b.get<std::size_t>("replications", 20'000);
  if (n_values.empty() || s_grid.empty()) b.fail("s_grid", "n_values and s_grid must be non-empty");
  return [=] {
    const auto fn = make_functional(fc);
    const std::size_t draws = reps * *std::max_element(n_values.begin(), n_values.end());
    const auto sizes = sample_sizes(*fn, draws, seed);
    const auto rep = check_deviation([&](std::uint64_t k) { return sizes[k]; }, n_values, s_grid, p, reps);
    Json pts = Json::array();
    for (const auto& pt : rep.points)
      pts.push_back({{"n", pt.n}, {"s", pt.s}, {"count", pt.count}, {"probability", pt.probability},
                     {"upper", pt.upper}, {"log_rate", pt.log_rate}});
    RunResult r;
    r.report = {{"functional", fn->id()},
                {"p", rep.p},
                {"replications", rep.replications},
                {"fitted_constant", rep.fitted_constant},
                {"fitted_exponent", rep.fitted_exponent},
                {"exponent_constant", rep.exponent_constant},
                {"points", pts},
                {"pass", rep.pass}};
    return r;
  };
}

// ---------------------------------------------------------------- pam

Job plan_pam(Block& root, std::uint64_t seed) {
  Block& b = root.child("pam");
  const auto mode = b.get<std::string>("mode", "solve");
  const auto K = b.get<std::size_t>("K", 128);
  const auto eps = b.get<double>("epsilon", 1.0 / 16);
  const auto epsilons = b.get<std::vector<double>>("epsilons", {});
  const std::vector<double> calib = epsilons.empty() ? std::vector<double>{eps} : epsilons;
  const double c0 = parse_c0(b, calib);
  const auto t = b.get<double>("t", 0.1);
  const auto dt = b.get<double>("dt", 1e-4);
  const auto renormalise = b.get<bool>("renormalise", true);
  const auto factor = b.get<double>("noise_factor", 1.0);
  const auto snapshots = b.get<std::vector<double>>("snapshots", {});
  const auto u0_kind = b.get<std::string>("u0", "one");
  const auto stream = b.get<std::uint64_t>("stream", 0);
  const auto paths = b.get<std::size_t>("paths", 10'000);
  const auto time_step = b.get<double>("time_step", 1e-4);
  const auto x = b.get<std::vector<std::size_t>>("point", {0, 0});
  const auto realisations = b.get<std::size_t>("realisations", 10'000);
  const TailFitOptions fit = parse_tail_options(b.child("fit"), PamTailConfig{}.fit);
  const auto theta_lo = b.get<double>("shape_min", 1.5), theta_hi = b.get<double>("shape_max", 2.5);
  const auto spread_max = b.get<double>("spread_max", 0.3);
  if (mode != "solve" && mode != "cauchy" && mode != "feynman-kac" && mode != "tails")
    b.fail("mode", "must be solve, cauchy, feynman-kac or tails");
  if (u0_kind != "one" && u0_kind != "cosine") b.fail("u0", "must be one or cosine");
  if (K < 4 || (K & (K - 1)) != 0) b.fail("K", "must be a power of two >= 4");
  if (x.size() != 2 || x[0] >= K || x[1] >= K) b.fail("point", "must be two grid indices below K");
  if (!(t > 0.0) || !(dt > 0.0)) b.fail("t", "t and dt must be positive");
  const std::function<double(double, double)> u0 = [u0_kind](double xx, double) {
    return u0_kind == "one" ? 1.0 : 1.0 + 0.5 * std::cos(xx);
  };

  if (mode == "solve")
    return [=] {
      const auto noise = MollifiedNoise::sample(K, eps, seed, stream, c0);
      const auto sol =
          solve_renormalised_pam(TorusField::from_function(K, u0), noise, t, dt, snapshots, {renormalise, factor});
      RunResult r;
      Json snaps = Json::array();
      for (std::size_t k = 0; k < sol.snapshots.size(); ++k) {
        const std::string name = "field-" + std::to_string(k) + ".tcif";
        r.files.push_back({name, field_bytes(sol.snapshots[k])});
        snaps.push_back({{"file", name}, {"K", K}, {"eps", eps}, {"C_eps", noise.C_eps}, {"c0", c0},
                         {"t", sol.times[k]}, {"seed", seed}, {"max_abs", sol.snapshots[k].max_abs()},
                         {"mean", sol.snapshots[k].mean()}});
      }
      r.report = {{"mode", "solve"}, {"renormalise", renormalise}, {"noise_factor", factor}, {"snapshots", snaps}};
      return r;
    };
  if (mode == "cauchy")
    return [=] {
      PamCauchyConfig cfg;
      cfg.K = K;
      if (!epsilons.empty()) cfg.epsilons = epsilons;
      cfg.t = t;
      cfg.dt = dt;
      cfg.seed = seed;
      cfg.c0 = c0;
      const auto st = pam_cauchy_study(cfg);
      RunResult r;
      r.report = {{"mode", "cauchy"},
                  {"K", K},
                  {"c0", c0},
                  {"t", t},
                  {"epsilons", st.epsilons},
                  {"renormalised_sup", st.renormalised_sup},
                  {"raw_sup", st.raw_sup},
                  {"renormalised_diff", st.renormalised_diff},
                  {"raw_diff", st.raw_diff},
                  {"renormalised_decreasing", st.renormalised_decreasing},
                  {"raw_increasing", st.raw_increasing},
                  {"pass", st.renormalised_decreasing && st.raw_increasing}};
      return r;
    };
  if (mode == "feynman-kac")
    return [=] {
      const auto noise = MollifiedNoise::sample(K, eps, seed, stream, c0);
      const auto u0f = TorusField::from_function(K, u0);
      const auto sol = solve_renormalised_pam(u0f, noise, t, dt, {}, {renormalise, 1.0});
      const double h = kTorusSide / static_cast<double>(K);
      const std::array<double, 2> at{h * static_cast<double>(x[0]), h * static_cast<double>(x[1])};
      const auto fk = feynman_kac_estimate(u0, noise, t, at, paths, derive_stream(seed, 0xfc),
                                           {time_step, renormalise, true});
      const double solver = sol.snapshots.back().at(x[0], x[1]);
      const double tol = std::max(3.0 * fk.sigma, 0.02 * std::abs(solver));
      RunResult r;
      r.report = {{"mode", "feynman-kac"}, {"K", K},          {"eps", eps},         {"c0", c0},
                  {"t", t},                {"point", at},     {"paths", paths},     {"estimate", fk.value},
                  {"sigma", fk.sigma},     {"solver", solver}, {"tolerance", tol},
                  {"pass", std::abs(fk.value - solver) <= tol}};
      return r;
    };
  return [=] {
    PamTailConfig cfg;
    cfg.K = K;
    if (!epsilons.empty()) cfg.epsilons = epsilons;
    cfg.t = t;
    cfg.dt = dt;
    cfg.realisations = realisations;
    cfg.seed = seed;
    cfg.c0 = c0;
    cfg.fit = fit;
    const auto st = pam_tail_study(cfg);
    RunResult r;
    Json levels = Json::array();
    bool shapes_ok = true;
    std::size_t fitted = 0;
    for (const auto& l : st.levels) {
      Json j = {{"epsilon", l.epsilon}, {"v_half_moment", l.v_half_moment}, {"v_half_sigma", l.v_half_sigma}};
      if (l.fit) {
        j["fit"] = tail_fit_json(*l.fit);
        shapes_ok = shapes_ok && l.fit->shape >= theta_lo && l.fit->shape <= theta_hi;
        ++fitted;
      } else {
        j["fit"] = nullptr;
      }
      levels.push_back(j);
    }
    const bool stable = fitted >= 2 && st.shape_spread <= spread_max;
    r.report = {{"mode", "tails"},  {"K", K},           {"c0", c0},
                {"t", t},           {"realisations", realisations}, {"levels", levels},
                {"shape_window", {theta_lo, theta_hi}}, {"shape_spread", st.shape_spread},
                {"spread_max", spread_max}, {"shapes_in_window", shapes_ok && fitted > 0},
                {"stable", stable}, {"pass", shapes_ok && fitted > 0 && stable}};
    return r;
  };
}

// ---------------------------------------------------------------- wlsi

FunctionalSpec parse_wlsi_functional(Block& b) {
  WlsiKind kind{};
  try {
    kind = wlsi_kind_from_string(b.get<std::string>("functional", "polynomial"));
  } catch (const ConfigError& e) {
    b.fail("functional", e.what());
  }
  const auto horizon = b.get<double>("horizon", 1.0);
  const auto steps = b.get<std::size_t>("steps", 64);
  if (!(horizon > 0.0) || steps < 1) b.fail("steps", "needs horizon > 0 and steps >= 1");
  const GridPtr grid = make_uniform_grid(horizon, steps);
  const auto dim = b.get<std::size_t>("dim", 2);
  const auto alpha = b.get<double>("alpha", 0.4);
  const auto s_index = b.get<std::size_t>("s_index", steps / 4);
  const auto t_index = b.get<std::size_t>("t_index", 3 * steps / 4);
  const auto p = b.get<double>("p", 2.5);
  const auto scale = b.get<double>("field_scale", 1.0);
  const auto y0 = b.get<std::vector<double>>("y0", {1.0, 0.0, 0.0});
  // Integrands as indicator pieces level * 1_[start, end).
  std::vector<std::vector<double>> h;
  const auto levels = b.get<std::vector<double>>("levels", {1.0, std::sqrt(2.0)});
  const auto starts = b.get<std::vector<double>>("starts", {0.0, 0.0});
  const auto ends = b.get<std::vector<double>>("ends", {horizon, 0.5 * horizon});
  const auto powers = b.get<std::vector<int>>("powers", {2, 3});
  try {
    switch (kind) {
      case WlsiKind::PolynomialWienerIntegrals: {
        if (levels.size() != starts.size() || levels.size() != ends.size())
          b.fail("levels", "levels, starts and ends must have equal length");
        for (std::size_t k = 0; k < levels.size(); ++k) {
          std::vector<double> cell(steps, 0.0);
          for (std::size_t l = 0; l < steps; ++l) {
            const double mid = 0.5 * ((*grid)[l] + (*grid)[l + 1]);
            if (mid >= starts[k] && mid < ends[k]) cell[l] = levels[k];
          }
          h.push_back(cell);
        }
        return FunctionalSpec::polynomial(grid, h, powers);
      }
      case WlsiKind::RoughPathTriple: return FunctionalSpec::rough_path_triple(grid, dim, alpha, s_index, t_index);
      case WlsiKind::RdeEndpoint: return FunctionalSpec::rde_endpoint(grid, p, scale, y0);
    }
  } catch (const ConfigError& e) {
    throw ConfigError(b.path() + ": " + e.what());
  }
  b.fail("functional", "is not supported");
}

Job plan_wlsi(Block& root, std::uint64_t seed) {
  Block& b = root.child("wlsi");
  const FunctionalSpec spec = parse_wlsi_functional(b);
  const auto samples = b.get<std::size_t>("samples", 10'000);
  const auto p_grid = b.get<std::vector<double>>("p_grid", {2.0, 4.0});
  const auto do_wlsi = b.get<bool>("check_wlsi", spec.kind == WlsiKind::PolynomialWienerIntegrals);
  const auto do_moments = b.get<bool>("moments", spec.kind == WlsiKind::PolynomialWienerIntegrals);
  const auto do_marginal = b.get<bool>("marginal", false);
  if (samples < 2) b.fail("samples", "must be at least 2");
  for (double p : p_grid)
    if (!(p >= 2.0)) b.fail("p_grid", "entries must be >= 2");
  if (do_marginal && spec.output_dim() < 2) b.fail("marginal", "needs an output dimension of at least 2");
  return [=] {
    const auto weight = stated_weight(spec);
    const auto bound = check_gradient_bound(spec, weight, samples, seed);
    RunResult r;
    r.report = {{"functional", spec.id()},
                {"output_dim", spec.output_dim()},
                {"weight", weight.name},
                {"stated_constant", bound.stated_constant},
                {"gradient_bound",
                 {{"samples", bound.n},
                  {"fitted_constant", bound.fitted_constant},
                  {"fraction", bound.fraction},
                  {"fd_checks", bound.validation.checks},
                  {"fd_worst", bound.validation.worst},
                  {"fd_pass", bound.validation.pass},
                  {"envelope", {{"intercept", bound.envelope_intercept}, {"slope", bound.envelope_slope},
                                {"r_squared", bound.envelope_r_squared}}},
                  {"pass", bound.pass}}}};
    bool pass = bound.pass && bound.validation.pass;
    const auto draws = draw_samples(spec, samples, derive_stream(seed, 0x3e));
    const auto family = default_test_family(spec.output_dim());
    Json names = Json::array();
    for (const auto& f : family) names.push_back(f.name);
    r.report["test_family"] = names;
    const auto wlsi_json = [](const WlsiReport& w) {
      Json rows = Json::array();
      for (const auto& row : w.rows)
        rows.push_back({{"name", row.name}, {"dropped", row.dropped}, {"entropy", row.entropy},
                        {"entropy_sigma", row.entropy_sigma}, {"rhs", row.rhs}, {"rhs_sigma", row.rhs_sigma},
                        {"feasible_constant", row.feasible_constant}, {"pass", row.pass}});
      return Json{{"constant", w.constant}, {"smallest_feasible_constant", w.smallest_feasible_constant},
                  {"rows", rows}, {"pass", w.pass}};
    };
    if (do_wlsi) {
      const auto w = check_wlsi(draws, weight, family);
      r.report["wlsi"] = wlsi_json(w);
      pass = pass && w.pass;
    }
    if (do_marginal) {
      std::vector<double> g(draws.size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = weight.G(draws.row(i));
      const auto g_hat = conditional_weight(draws, g, 1);
      const auto w = check_wlsi(marginal_samples(draws, 1), g_hat, weight.c, default_test_family(spec.output_dim() - 1));
      r.report["marginal"] = wlsi_json(w);
      pass = pass && w.pass;
    }
    if (do_moments) {
      const auto m = check_moment_consequence(draws, weight, p_grid, family);
      Json rows = Json::array();
      for (const auto& row : m.rows)
        rows.push_back({{"name", row.name}, {"p", row.p}, {"lhs", row.lhs}, {"lhs_sigma", row.lhs_sigma},
                        {"rhs", row.rhs}, {"rhs_sigma", row.rhs_sigma}, {"rhs_sqrt", row.rhs_sqrt},
                        {"ess", row.ess}, {"pass", row.pass}});
      r.report["moments"] = {{"rows", rows}, {"dropped_p", m.dropped_p}, {"pass", m.pass}};
      pass = pass && m.pass;
    }
    r.report["pass"] = pass;
    return r;
  };
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"simulate", "lift",       "solve-rde", "model", "tci",
                                              "tails",    "deviations", "pam",       "wlsi"};
  return names;
}

Job plan_command(const std::string& command, Block& root, std::uint64_t seed) {
  if (command == "simulate") return plan_simulate(root, seed);
  if (command == "lift") return plan_lift(root, seed);
  if (command == "solve-rde") return plan_solve_rde(root, seed);
  if (command == "model") return plan_model(root, seed);
  if (command == "tci") return plan_tci(root, seed);
  if (command == "tails") return plan_tails(root, seed);
  if (command == "deviations") return plan_deviations(root, seed);
  if (command == "pam") return plan_pam(root, seed);
  if (command == "wlsi") return plan_wlsi(root, seed);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace tcilab::cli
