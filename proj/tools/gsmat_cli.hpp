#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsmat/gsmat.hpp"

namespace gsmat::cli {

using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 2, kFormat = 3, kTolerance = 4 };

namespace detail {

// Raised by command bodies to leave with a specific exit code after the
// report has been printed.
struct Exit {
  int code;
  std::string message;
};

inline std::uint64_t seed_from_env() {
  if (const char* s = std::getenv("GS_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw detail::Exit{kUsage, std::string("GS_SEED is not an unsigned integer: '") + s + "'"};
    }
  }
  return 0;
}

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw format_error("spec", std::string("invalid JSON in '") + path + "': " + e.what());
  }
}

inline GSChain random_chain(Rng& rng, std::size_t b, std::size_t r, std::size_t m) {
  const std::vector<Permutation> perms = stride_chain_perms(b, r, m);
  std::vector<ChainFactor> factors;
  for (std::size_t i = 0; i < m; ++i) factors.push_back({random_blockdiag(rng, r, b, b), perms[i]});
  return GSChain(std::move(factors), perms.back());
}

template <class F>
double median_ns(F&& body, std::size_t warmup, std::size_t reps) {
  for (std::size_t i = 0; i < warmup; ++i) body();
  std::vector<double> samples;
  samples.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

// Keeps the optimizer from discarding benchmarked work.
inline volatile double g_sink = 0.0;

}  // namespace detail

struct DensityArgs {
  std::size_t b = 2, r = 2, m = 1;
  std::string perm = "stride";
  std::optional<std::uint64_t> seed;
};

inline json cmd_density(const DensityArgs& a) {
  if (a.b < 2) throw std::invalid_argument("--b must be at least 2");
  std::vector<Permutation> perms = stride_chain_perms(a.b, a.r, a.m);
  if (a.perm == "random") {
    Rng rng(a.seed.value_or(detail::seed_from_env()));
    for (std::size_t i = 1; i < a.m; ++i) perms[i] = random_permutation(rng, a.b * a.r);
  }
  const SupportMask mask = support_mask(a.b, a.r, perms, a.m);
  return json{{"b", a.b},
              {"r", a.r},
              {"m", a.m},
              {"d", a.b * a.r},
              {"perm", a.perm},
              {"dense", mask.dense()},
              {"zero_entries", mask.zero_count()},
              {"min_m", min_factors_dense(a.b, a.r)},
              {"butterfly_m", butterfly_factors(a.r)}};
}

struct CountArgs {
  std::size_t b = 2, r = 2, m = 1, batch = 1;
};

inline json cmd_count(const CountArgs& a) {
  const std::size_t bm = butterfly_factors(a.r);
  return json{{"b", a.b},
              {"r", a.r},
              {"m", a.m},
              {"d", a.b * a.r},
              {"params", param_count(a.b, a.r, a.m)},
              {"flops", flop_count(a.b, a.r, a.m, a.batch)},
              {"dense_params", static_cast<std::uint64_t>(a.b * a.r) * (a.b * a.r)},
              {"min_m", a.b >= 2 ? json(min_factors_dense(a.b, a.r)) : json(nullptr)},
              {"butterfly_m", bm},
              {"butterfly_params", param_count(a.b, a.r, bm)}};
}

struct ProjectArgs {
  std::string input, spec, output;
};

inline json cmd_project(const ProjectArgs& a) {
  const Matrix m = io::matrix_from(io::load(a.input));
  const GSClassSpec spec = io::spec_from_json(detail::read_json_file(a.spec));
  if (m.rows() != spec.m || m.cols() != spec.n) {
    throw format_error("shape", "input is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                    " but the spec describes " + std::to_string(spec.m) + "x" + std::to_string(spec.n));
  }
  const Projection p = project_with_residual(m, spec);
  io::save(a.output, io::to_container(p.matrix));
  const double err = frobenius_norm(m - as_dense(p.matrix));
  const double nrm = frobenius_norm(m);
  return json{{"m", spec.m},
              {"n", spec.n},
              {"error_norm", err},
              {"tail_norm", std::sqrt(p.tail_squared)},
              {"relative_error", nrm > 0 ? err / nrm : 0.0},
              {"output", a.output}};
}

struct BenchArgs {
  std::size_t d = 0, b = 0, reps = 20, warmup = 3;
  std::optional<std::size_t> m;
  std::optional<std::uint64_t> seed;
};

struct BenchRow {
  std::string method;
  std::size_t d, b, m;
  std::uint64_t params, flops;
  double ns_per_apply;
};

inline std::vector<BenchRow> cmd_bench(const BenchArgs& a) {
  if (a.b == 0 || a.d == 0 || a.d % a.b != 0) throw std::invalid_argument("--b must divide --d");
  if (a.reps == 0) throw std::invalid_argument("--reps must be positive");
  const std::size_t r = a.d / a.b;
  const std::size_t m = a.m.value_or(a.b >= 2 ? min_factors_dense(a.b, r) : 1);
  const std::size_t bm = butterfly_factors(r);
  Rng rng(a.seed.value_or(detail::seed_from_env()));
  const Vector x = random_vector(rng, a.d);

  std::vector<BenchRow> rows;
  {
    const Matrix w = random_matrix(rng, a.d, a.d);
    const double ns = detail::median_ns([&] { detail::g_sink = (w * x)[0]; }, a.warmup, a.reps);
    const std::uint64_t dd = static_cast<std::uint64_t>(a.d) * a.d;
    rows.push_back({"dense", a.d, a.b, 1, dd, dd, ns});
  }
  auto chain_row = [&](const std::string& name, std::size_t factors) {
    const GSChain c = detail::random_chain(rng, a.b, r, factors);
    const double ns = detail::median_ns([&] { detail::g_sink = gsmat::apply(c, x)[0]; }, a.warmup, a.reps);
    rows.push_back({name, a.d, a.b, factors, param_count(a.b, r, factors), flop_count(a.b, r, factors), ns});
  };
  chain_row("blockdiag", 1);
  chain_row("gs", m);
  chain_row("butterfly", bm);
  return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "method,d,b,m,params,flops,ns_per_apply\n";
  for (const BenchRow& r : rows) {
    std::ostringstream ns;
    ns.setf(std::ios::fixed);
    ns.precision(1);
    ns << r.ns_per_apply;
    out << r.method << ',' << r.d << ',' << r.b << ',' << r.m << ',' << r.params << ',' << r.flops << ',' << ns.str()
        << '\n';
  }
}

struct GsoftDemoArgs {
  std::size_t d = 16, b = 4, steps = 2000;
  double lr = 0.05, target_scale = 0.5, tol = 1e-4;
  std::optional<std::uint64_t> seed;
};

inline json cmd_demo_gsoft(const GsoftDemoArgs& a) {
  const std::uint64_t seed = a.seed.value_or(detail::seed_from_env());
  Rng rng(seed);
  const GSClassSpec spec = gsoft_spec(a.d, a.b);
  const Matrix target = as_dense(materialize(random_ortho_params(rng, spec, a.target_scale)));
  json report{{"d", a.d}, {"b", a.b}, {"steps", a.steps}, {"lr", a.lr}, {"seed", seed}, {"target_scale", a.target_scale}};

  FitResult fit{zero_params(spec), {}, 0.0};
  try {
    fit = fit_orthogonal_target(spec, target, {a.steps, a.lr});
  } catch (const numerical_error& e) {
    report["status"] = "diverged";
    report["error"] = e.what();
    throw detail::Exit{kTolerance, report.dump(2)};
  }
  const std::size_t stride = std::max<std::size_t>(1, a.steps / 50);
  json trace = json::array();
  for (std::size_t i = 0; i < fit.losses.size(); i += stride) trace.push_back({{"step", i}, {"loss", fit.losses[i]}});
  if ((fit.losses.size() - 1) % stride != 0) trace.push_back({{"step", fit.losses.size() - 1}, {"loss", fit.losses.back()}});

  report["params"] = fit.params.parameter_count();
  report["initial_loss"] = fit.losses.front();
  report["final_loss"] = fit.losses.back();
  report["max_orthogonality_residual"] = fit.max_orthogonality_residual;
  report["loss_trace"] = std::move(trace);
  if (a.d % (2 * a.b) == 0) {
    const BlockDiagonalFitResult bd = fit_blockdiag_target(2 * a.b, target, {a.steps, a.lr});
    report["blockdiag_block"] = 2 * a.b;
    report["blockdiag_final_loss"] = bd.losses.back();
  } else {
    report["blockdiag_block"] = nullptr;
    report["blockdiag_final_loss"] = nullptr;
  }
  const bool ok = fit.losses.back() <= a.tol;
  report["tol"] = a.tol;
  report["status"] = ok ? "ok" : "tolerance_failed";
  if (!ok) throw detail::Exit{kTolerance, report.dump(2)};
  return report;
}

struct ConvDemoArgs {
  std::size_t channels = 8, groups = 4, terms = 20, size = 6;
  std::optional<std::size_t> groups2;
  double tol = 1e-7, norm = 1.0;
  std::optional<std::uint64_t> seed;
};

inline json cmd_demo_conv(const ConvDemoArgs& a) {
  const std::uint64_t seed = a.seed.value_or(detail::seed_from_env());
  Rng rng(seed);
  GSConvConfig cfg;
  cfg.channels = a.channels;
  cfg.groups1 = a.groups;
  cfg.groups2 = a.groups2;
  cfg.exp_terms = a.terms;
  GSConvLayer layer = random_gs_conv_layer(cfg, rng, 1.0);
  // rescale each skew kernel to the requested spectral norm
  const double n1 = skew_conv_spectral_norm(layer.kernel1, a.size, a.size);
  if (n1 > 0) layer.kernel1 = scaled(layer.kernel1, a.norm / n1);
  if (layer.kernel2) {
    const double n2 = skew_conv_spectral_norm(*layer.kernel2, a.size, a.size);
    if (n2 > 0) layer.kernel2 = scaled(*layer.kernel2, a.norm / n2);
  }

  auto residual_at = [&](std::size_t t) {
    const Matrix j = linear_map_jacobian([&](const Tensor3& x) { return gs_conv_forward(layer, x, t); }, a.channels,
                                         a.size, a.size);
    return is_orthogonal(j, 0.0).residual;
  };
  std::vector<std::size_t> schedule{1, 2, 4, 8, 12, 16, 20};
  schedule.push_back(a.terms);
  std::sort(schedule.begin(), schedule.end());
  schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());
  json rows = json::array();
  double at_terms = 0.0;
  for (std::size_t t : schedule) {
    const double res = residual_at(t);
    if (t == a.terms) at_terms = res;
    rows.push_back({{"terms", t}, {"residual", res}});
  }

  Tensor3 x(a.channels, a.size, a.size);
  for (double& v : x.data) v = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  const Tensor3 y = gs_conv_forward(layer, x);
  const double norm_err = std::abs(norm2(y.data) - norm2(x.data)) / norm2(x.data);

  json report{{"channels", a.channels},
              {"groups", a.groups},
              {"groups2", a.groups2 ? json(*a.groups2) : json(nullptr)},
              {"terms", a.terms},
              {"size", a.size},
              {"seed", seed},
              {"kernel_norm", a.norm},
              {"residual", at_terms},
              {"norm_preservation_error", norm_err},
              {"residual_by_terms", std::move(rows)},
              {"tol", a.tol}};
  const bool ok = at_terms <= a.tol;
  report["status"] = ok ? "ok" : "tolerance_failed";
  if (!ok) throw detail::Exit{kTolerance, report.dump(2)};
  return report;
}

inline json cmd_info(const std::optional<std::string>& input) {
  json j{{"version", kVersion}, {"format", io::kFormat}};
  if (input) {
    const io::Container c = io::load(*input);
    j["header"] = c.header;
    j["count"] = c.payload.size();
  }
  return j;
}

inline constexpr const char* kSchemas = R"(Outputs:
  density     JSON {b, r, m, d, perm, dense, zero_entries, min_m, butterfly_m}
  count       JSON {b, r, m, d, params, flops, dense_params, min_m, butterfly_m, butterfly_params}
  project     writes a GSM1 'gs' container; prints JSON {m, n, error_norm, tail_norm, relative_error, output}
  bench       CSV  method,d,b,m,params,flops,ns_per_apply   (methods: dense, blockdiag, gs, butterfly;
              ns_per_apply is the median over --reps after --warmup runs and is the only non-deterministic column)
  demo-gsoft  JSON {d, b, steps, lr, seed, target_scale, params, initial_loss, final_loss,
                    max_orthogonality_residual, loss_trace[{step, loss}], blockdiag_block, blockdiag_final_loss, tol, status}
  demo-conv   JSON {channels, groups, groups2, terms, size, seed, kernel_norm, residual, norm_preservation_error,
                    residual_by_terms[{terms, residual}], tol, status}
  info        JSON {version, format[, header, count]}
Exit codes: 0 success, 2 usage, 3 I/O or format, 4 tolerance failure.
GS_SEED sets the default --seed.)";

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group-and-Shuffle structured matrices", "gsmat"};
  app.footer(kSchemas);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  DensityArgs dens;
  auto* density = app.add_subcommand("density", "Support-mask density of a stride (or random) chain");
  density->add_option("--b", dens.b, "Block size")->required();
  density->add_option("--r", dens.r, "Block count")->required();
  density->add_option("--m", dens.m, "Number of block-diagonal factors")->required();
  density->add_option("--perm", dens.perm, "Interior permutations")->check(CLI::IsMember({"stride", "random"}));
  density->add_option("--seed", dens.seed, "Seed for --perm random");

  CountArgs cnt;
  auto* count = app.add_subcommand("count", "Parameter and FLOP accounting");
  count->add_option("--b", cnt.b, "Block size")->required();
  count->add_option("--r", cnt.r, "Block count")->required();
  count->add_option("--m", cnt.m, "Number of factors")->required();
  count->add_option("--batch", cnt.batch, "Vectors per apply");

  ProjectArgs proj;
  auto* project = app.add_subcommand("project", "Project a dense matrix onto a GS class");
  project->add_option("--input", proj.input, "Dense GSM1 container")->required();
  project->add_option("--spec", proj.spec, "Class spec JSON file")->required();
  project->add_option("--output", proj.output, "Output GSM1 container")->required();

  BenchArgs bn;
  auto* bench = app.add_subcommand("bench", "Time dense, block-diagonal, GS and butterfly applies");
  bench->add_option("--d", bn.d, "Dimension")->required();
  bench->add_option("--b", bn.b, "Block size")->required();
  bench->add_option("--m", bn.m, "GS factors (default: minimal dense count)");
  bench->add_option("--reps", bn.reps, "Timed repetitions");
  bench->add_option("--warmup", bn.warmup, "Untimed warmup repetitions");
  bench->add_option("--seed", bn.seed, "Seed");

  GsoftDemoArgs gd;
  auto* demo_gsoft = app.add_subcommand("demo-gsoft", "Fit an in-class orthogonal target with GSOFT parameters");
  demo_gsoft->add_option("--d", gd.d, "Dimension");
  demo_gsoft->add_option("--b", gd.b, "Block size");
  demo_gsoft->add_option("--steps", gd.steps, "Gradient steps");
  demo_gsoft->add_option("--lr", gd.lr, "Learning rate");
  demo_gsoft->add_option("--target-scale", gd.target_scale, "Generator scale of the random target");
  demo_gsoft->add_option("--tol", gd.tol, "Final loss tolerance");
  demo_gsoft->add_option("--seed", gd.seed, "Seed");

  ConvDemoArgs cd;
  auto* demo_conv = app.add_subcommand("demo-conv", "Jacobian orthogonality of a random GS conv layer");
  demo_conv->add_option("--channels", cd.channels, "Channels");
  demo_conv->add_option("--groups", cd.groups, "Groups of the 3x3 stage");
  demo_conv->add_option("--groups2", cd.groups2, "Groups of the optional 1x1 stage");
  demo_conv->add_option("--terms", cd.terms, "Exponential series terms");
  demo_conv->add_option("--size", cd.size, "Spatial side h = w");
  demo_conv->add_option("--kernel-norm", cd.norm, "Spectral norm the kernels are rescaled to");
  demo_conv->add_option("--tol", cd.tol, "Residual tolerance ||J^T J - I||_F");
  demo_conv->add_option("--seed", cd.seed, "Seed");

  std::optional<std::string> info_input;
  auto* info = app.add_subcommand("info", "Version, or the header of a container");
  info->add_option("--input", info_input, "GSM1 container to inspect");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*density) {
      out << cmd_density(dens).dump(2) << "\n";
    } else if (*count) {
      out << cmd_count(cnt).dump(2) << "\n";
    } else if (*project) {
      out << cmd_project(proj).dump(2) << "\n";
    } else if (*bench) {
      write_bench_csv(out, cmd_bench(bn));
    } else if (*demo_gsoft) {
      out << cmd_demo_gsoft(gd).dump(2) << "\n";
    } else if (*demo_conv) {
      out << cmd_demo_conv(cd).dump(2) << "\n";
    } else if (*info) {
      out << cmd_info(info_input).dump(2) << "\n";
    }
  } catch (const detail::Exit& e) {
    if (e.code == kUsage) {
      err << "error: " << e.message << "\n";
    } else {
      out << e.message << "\n";
      err << "error: tolerance check failed\n";
    }
    return e.code;
  } catch (const format_error& e) {
    err << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const io_error& e) {
    err << "error: " << e.what() << "\n";
    return kFormat;
  } catch (const numerical_error& e) {
    err << "error: " << e.what() << "\n";
    return kTolerance;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}

inline int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, out, err);
}

}  // namespace gsmat::cli
