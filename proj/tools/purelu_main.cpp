// Command-line experiment harness: deterministic runs, CSV/JSON artifacts.
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "purelu/purelu.hpp"

#ifndef PURELU_GIT_DESCRIBE
#define PURELU_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace purelu {
namespace {

struct GlobalOpts {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

std::string fmt(double v) { return detail::fmt_double(v); }

Config load_config(const GlobalOpts& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  Config cfg = Config::from_file(g.config);
  if (g.seed) cfg.set("seed", detail::fmt_u64(*g.seed));
  return cfg;
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error("cannot create output directory " + out + ": " +
                      ec.message());
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw Error("write failed: " + path.string());
}

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

std::string csv_row(const IterRecord& r) {
  std::string row = std::to_string(r.t);
  for (double v : {r.sigma_min, r.sigma_max, r.e_pos_sym, r.e_neg_sym,
                   r.potential, r.n_inf, r.n_l1, r.col_err})
    row += "," + fmt(v);
  return row;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

/// Shared tail of `run` and `equilibrate --then-purify`: stream the
/// trajectory, then write matrices and the summary.
int purify_to_files(const Experiment& ex, const AlgoParams& params,
                    const GlobalOpts& g,
                    const std::optional<DenseMatrix>& a0) {
  const fs::path out(g.out);
  std::ofstream traj(out / "trajectory.csv", std::ios::binary);
  if (!traj) throw Error("cannot open for writing: trajectory.csv");
  traj << kTrajectoryHeader << "\n";
  const auto flush_record = [&traj](const IterRecord& r) {
    traj << csv_row(r) << "\n" << std::flush;
  };

  const auto t0 = std::chrono::steady_clock::now();
  const PurifyResult res =
      run_purification(ex.spec, params, g.threads, a0, flush_record);
  const double wall = elapsed_s(t0);

  write_csv_file((out / "a_final.csv").string(), res.a_final);
  write_csv_file((out / "a_normalized.csv").string(), res.a_normalized);

  Config echo = resolved_config(ex);
  // Bake any derived parameters in so the echo replays the exact run.
  echo.set("algo.alpha", fmt(params.alpha));
  echo.set("algo.eta", fmt(params.eta));
  echo.set("algo.r", fmt(params.r));

  json summary;
  summary["final_col_err"] = res.trajectory.back().col_err;
  summary["iterations"] = params.T;
  summary["wall_time_s"] = wall;
  summary["params_echo"] = echo.serialize();
  summary["git_describe"] = PURELU_GIT_DESCRIBE;
  write_json_file(out / "summary.json", summary);

  std::cout << "final_col_err = " << fmt(res.trajectory.back().col_err)
            << " after " << params.T << " iterations (" << fmt(wall)
            << " s)\n";
  return 0;
}

int cmd_gen(const GlobalOpts& g) {
  const Experiment ex = build_experiment(load_config(g));
  ensure_out_dir(g.out);
  const fs::path out(g.out);
  write_csv_file((out / "a_star.csv").string(), ex.spec.ground_truth);
  const DenseMatrix a0 = gen_init(ex.spec.ground_truth, ex.spec.init,
                                  Rng(ex.seed, stream::kInit));
  write_csv_file((out / "a0.csv").string(), a0);
  write_text_file(out / "resolved_config.txt",
                  resolved_config(ex).serialize());
  std::cout << "wrote a_star.csv (" << ex.m << "x" << ex.n
            << "), a0.csv, resolved_config.txt\n";
  return 0;
}

int cmd_run(const GlobalOpts& g) {
  const Experiment ex = build_experiment(load_config(g));
  if (!ex.has_algo)
    throw ConfigError("run requires algo.T and algo.N in the config");
  ensure_out_dir(g.out);
  write_text_file(fs::path(g.out) / "resolved_config.txt",
                  resolved_config(ex).serialize());
  return purify_to_files(ex, ex.algo, g, std::nullopt);
}

int cmd_equilibrate(const GlobalOpts& g, const std::string& a0_path,
                    bool then_purify) {
  const Config cfg = load_config(g);
  const Experiment ex = build_experiment(cfg);
  if (!ex.has_equil)
    throw ConfigError("equilibrate requires the equil.* config section");
  if (then_purify && !ex.has_algo)
    throw ConfigError("--then-purify requires algo.T and algo.N");
  ensure_out_dir(g.out);
  const fs::path out(g.out);
  write_text_file(out / "resolved_config.txt",
                  resolved_config(ex).serialize());

  const DenseMatrix a0 =
      a0_path.empty() ? gen_init(ex.spec.ground_truth, ex.spec.init,
                                 Rng(ex.seed, stream::kInit))
                      : read_csv_file(a0_path);
  const EquilResult res = equilibration(ex.spec, a0, ex.equil, g.threads);

  write_csv_file((out / "a_balanced.csv").string(), res.a);
  write_json_file(out / "d.json", json(res.d));
  std::string log_text = "pass,set_size,lambda,balance_ratio\n";
  for (const EquilLogRow& row : res.log)
    log_text += std::to_string(row.pass) + "," +
                std::to_string(row.set_size) + "," + fmt(row.lambda) + "," +
                fmt(row.balance_ratio) + "\n";
  write_text_file(out / "equil_log.csv", log_text);
  std::cout << "equilibrated in " << res.passes
            << " passes, final balance ratio "
            << fmt(res.log.back().balance_ratio) << "\n";

  if (!then_purify) return 0;

  AlgoParams params = ex.algo;
  if (!cfg.has("algo.alpha") || !cfg.has("algo.r")) {
    // Derive the decode threshold and gain from the balanced iterate's
    // decoded first and second moments, splitting off a fresh batch from
    // the estimate stream.
    const Rng root(ex.seed, stream::kEstimate);
    const std::vector<Sample> batch = sample_batch(
        ex.spec, ex.equil.N, &res.a, root.sub(res.draws), g.threads);
    const auto xs = decode_batch(res.a, batch, ex.equil.alpha, g.threads);
    const std::size_t n = res.a.cols();
    std::vector<double> mean(n, 0.0), sm(n, 0.0);
    for (const auto& x : xs)
      for (std::size_t j = 0; j < n; ++j) {
        mean[j] += x[j];
        sm[j] += x[j] * x[j];
      }
    for (std::size_t j = 0; j < n; ++j) {
      mean[j] /= double(batch.size());
      sm[j] /= double(batch.size());
      if (!(sm[j] > 0)) throw ZeroColumn(j);
    }
    const double c1_hat =
        double(n) * *std::max_element(mean.begin(), mean.end());
    const double c2_hat = double(n) * *std::min_element(sm.begin(), sm.end());
    if (!cfg.has("algo.alpha")) params.alpha = c2_hat / (80.0 * c1_hat);
    if (!cfg.has("algo.r")) params.r = double(n) / c2_hat;
    params.validate();
  }
  return purify_to_files(ex, params, g, res.a);
}

int cmd_sweep(const GlobalOpts& g) {
  const Config base_cfg = load_config(g);
  const Experiment base = build_experiment(base_cfg);
  if (!base.sweep)
    throw ConfigError("sweep requires sweep.param and sweep.values");
  if (!base.has_algo) throw ConfigError("sweep requires algo.T and algo.N");
  ensure_out_dir(g.out);
  const fs::path out(g.out);
  write_text_file(out / "resolved_config.txt",
                  resolved_config(base).serialize());

  std::ofstream sw(out / "sweep.csv", std::ios::binary);
  if (!sw) throw Error("cannot open for writing: sweep.csv");
  sw << "value,seed,final_col_err,wall_time_s,status\n";

  const auto sanitize = [](std::string s) {
    for (char& c : s)
      if (c == ',' || c == '\n' || c == '\r') c = ' ';
    return s;
  };

  std::size_t failed = 0, total = 0;
  for (double value : base.sweep->values) {
    for (std::uint64_t seed : base.sweep->seeds) {
      ++total;
      Config cfg = base_cfg;
      cfg.set(base.sweep->param, fmt(value));
      cfg.set("seed", detail::fmt_u64(seed));
      const auto t0 = std::chrono::steady_clock::now();
      std::string err_field = "nan", wall_field = "nan", status = "ok";
      try {
        const Experiment ex = build_experiment(cfg);
        const PurifyResult res =
            run_purification(ex.spec, ex.algo, g.threads);
        err_field = fmt(res.trajectory.back().col_err);
        wall_field = fmt(elapsed_s(t0));
      } catch (const std::exception& e) {
        ++failed;
        status = sanitize(e.what());
      }
      sw << fmt(value) << "," << seed << "," << err_field << ","
         << wall_field << "," << status << "\n"
         << std::flush;
    }
  }
  std::cout << "sweep finished: " << (total - failed) << "/" << total
            << " points ok\n";
  return (total > 0 && failed == total) ? 3 : 0;
}

int cmd_verify(const GlobalOpts& g, const std::string& suite,
               std::size_t draws, bool out_requested) {
  std::vector<std::string> names;
  if (suite == "all")
    names = verify_suite_names();
  else if (suite == "lemmas")
    names = {"decode", "v_bound", "xi_bound", "update_bounds"};
  else if (suite == "recurrences")
    names = {"coupling", "simple_recurrences"};
  else
    names = {suite};

  const std::uint64_t seed = g.seed.value_or(1);
  json arr = json::array();
  std::size_t failures = 0;
  for (const std::string& name : names) {
    const VerifyReport rep = run_verify_suite(name, draws, seed);
    failures += rep.failures;
    arr.push_back({{"name", rep.name},
                   {"draws", rep.draws},
                   {"failures", rep.failures},
                   {"worst_slack", rep.worst_slack}});
  }
  std::cout << arr.dump(2) << "\n";
  if (out_requested) {
    ensure_out_dir(g.out);
    write_json_file(fs::path(g.out) / "verify_report.json", arr);
  }
  if (failures) {
    std::cerr << "verify: " << failures << " failed draws\n";
    return 5;
  }
  return 0;
}

int cmd_pinv(const GlobalOpts& g, const std::string& matrix_path) {
  const DenseMatrix a = read_csv_file(matrix_path);
  const PinvResult res = min_inf_pinv(a);
  ensure_out_dir(g.out);
  const fs::path out(g.out);
  write_csv_file((out / "pinv.csv").string(), res.pinv);
  json sidecar;
  sidecar["inf_norm"] = res.inf_norm;
  sidecar["per_row_l1"] = res.per_row_l1;
  sidecar["rows"] = a.rows();
  sidecar["cols"] = a.cols();
  write_json_file(out / "pinv.json", sidecar);
  std::cout << "inf_norm = " << fmt(res.inf_norm) << "\n";
  return 0;
}

int cmd_oracle(const GlobalOpts& g, const std::string& a0_path) {
  const Experiment ex = build_experiment(load_config(g));
  const double alpha =
      ex.has_algo
          ? ex.algo.alpha
          : default_params(moments(ex.spec.weights), ex.n,
                           std::max(ex.spec.init.ell, 1e-3))
                .alpha;
  const DenseMatrix a =
      a0_path.empty() ? gen_init(ex.spec.ground_truth, ex.spec.init,
                                 Rng(ex.seed, stream::kInit))
                      : read_csv_file(a0_path);
  const ExactExpectation exact = exact_enumeration(ex.spec, a, alpha);
  ensure_out_dir(g.out);
  const fs::path out(g.out);
  write_csv_file((out / "oracle_delta.csv").string(), exact.delta);
  write_csv_file((out / "oracle_cross.csv").string(), exact.weight_cross);
  json meta;
  meta["m"] = ex.m;
  meta["n"] = ex.n;
  meta["alpha"] = alpha;
  write_json_file(out / "oracle.json", meta);
  std::cout << "wrote oracle_delta.csv, oracle_cross.csv, oracle.json\n";
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Deterministic dictionary-recovery experiments"};
  app.require_subcommand(1);

  GlobalOpts g;
  std::uint64_t seed_val = 0;
  app.add_option("--config", g.config, "Config file (key = value lines)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_val, "Override the config seed");
  CLI::Option* out_opt =
      app.add_option("--out", g.out, "Output directory (default: .)");
  app.add_option("--threads", g.threads, "Worker threads; results identical")
      ->check(CLI::Range(std::size_t(1), std::size_t(256)));

  CLI::App* gen = app.add_subcommand("gen", "Write a_star.csv and a0.csv");
  CLI::App* run = app.add_subcommand("run", "Run purification");
  CLI::App* equil =
      app.add_subcommand("equilibrate", "Run second-moment equilibration");
  std::string equil_a0;
  bool then_purify = false;
  equil->add_option("--a0", equil_a0, "Warm start CSV (default: generated)");
  equil->add_flag("--then-purify", then_purify,
                  "Chain purification from the balanced iterate");
  CLI::App* sweep =
      app.add_subcommand("sweep", "Run one purification per sweep value");
  CLI::App* verify =
      app.add_subcommand("verify", "Numeric audits of the analysis layer");
  std::string suite = "all";
  std::size_t draws = 200;
  verify->add_option("--suite", suite, "norms|pinv|lemmas|recurrences|all or a single audit name");
  verify->add_option("--draws", draws, "Random draws per audit");
  CLI::App* pinv_cmd =
      app.add_subcommand("pinv", "Min row-l1 left inverse of a CSV matrix");
  std::string matrix_path;
  pinv_cmd->add_option("--matrix", matrix_path, "Input CSV matrix")
      ->required();
  CLI::App* oracle =
      app.add_subcommand("oracle", "Exact update expectation by enumeration");
  std::string oracle_a0;
  oracle->add_option("--a0", oracle_a0, "Iterate CSV (default: generated)");

  for (CLI::App* sub : {gen, run, equil, sweep, verify, pinv_cmd, oracle})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count()) g.seed = seed_val;

  if (gen->parsed()) return cmd_gen(g);
  if (run->parsed()) return cmd_run(g);
  if (equil->parsed()) return cmd_equilibrate(g, equil_a0, then_purify);
  if (sweep->parsed()) return cmd_sweep(g);
  if (verify->parsed())
    return cmd_verify(g, suite, draws, out_opt->count() > 0);
  if (pinv_cmd->parsed()) return cmd_pinv(g, matrix_path);
  if (oracle->parsed()) return cmd_oracle(g, oracle_a0);
  return 2;
}

}  // namespace
}  // namespace purelu

int main(int argc, char** argv) {
  try {
    return purelu::dispatch(argc, argv);
  } catch (const purelu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const purelu::BadParams& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const purelu::BadDims& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const purelu::MaxOuterExceeded& e) {
    std::cerr << "equilibration error: " << e.what() << "\n";
    return 4;
  } catch (const purelu::RankDeficient& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const purelu::ZeroColumn& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const purelu::NoConvergence& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const purelu::SingularMatrix& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const purelu::HypothesisViolated& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const purelu::SupportTooLarge& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const purelu::Error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
