// brwx: simulation and verification driver for boundary-case branching
// random walks. Subcommands cover model checking/calibration, the seeded
// experiments (theorem ladder, tail, conditioned, stopping lines), the
// exact-identity oracle table, walk-level DP queries, and excursion
// sampling. Exit codes: 0 pass, 1 criterion or verdict failure, 2 usage or
// input error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brwx/brw.hpp"
#include "brwx/exact.hpp"
#include "brwx/excursion.hpp"
#include "brwx/experiments.hpp"
#include "brwx/law_io.hpp"
#include "brwx/model.hpp"
#include "brwx/oracle.hpp"
#include "brwx/rwalk.hpp"
#include "brwx/sitecount.hpp"

namespace {

using namespace brwx;

struct LawFlags {
  std::string family = "cosh";
  double m = 2.0;
  double b = 1.3862943611198906;
  std::string file;

  void attach(CLI::App* app) {
    app->add_option("--family", family, "model family: cosh | bin2 | file");
    app->add_option("--m", m, "mean offspring for the cosh family");
    app->add_option("--disp-b", b, "up-displacement for the bin2 family");
    app->add_option("--law", file, "law definition file (family=file)");
  }
  model::OffspringLaw make() const {
    experiments::ModelSpec spec{family, m, b, file};
    if (!file.empty() && family == "cosh") spec.family = "file";
    return spec.make();
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

int cmd_model_check(const std::string& law_file, double tol) {
  model::OffspringLaw law = model::load_law(law_file);
  model::BoundaryReport rep = model::check_boundary(law, tol);
  nlohmann::ordered_json j;
  j["mean_offspring"] = rep.mean_offspring;
  j["psi1"] = rep.psi1;
  j["psi1_deriv"] = rep.psi1_deriv;
  j["sigma2"] = rep.sigma2;
  j["x_log2_moment"] = rep.x_log2_moment;
  j["xtilde_log_moment"] = rep.xtilde_log_moment;
  j["verdicts"] = {{"supercritical", rep.supercritical},
                   {"normalized", rep.normalized},
                   {"centered", rep.centered},
                   {"sigma2_finite", rep.sigma2_finite},
                   {"integrable", rep.integrable}};
  j["pass"] = rep.pass();
  model::LatticeInfo lat = model::lattice_structure(law);
  j["lattice"] = {{"lattice", lat.lattice}, {"span", lat.span}, {"offset", lat.offset}};
  std::cout << j.dump(2) << "\n";
  return rep.pass() ? 0 : 1;
}

int cmd_model_calibrate(const std::string& law_file, const std::string& out_file) {
  model::OffspringLaw raw = model::load_law(law_file);
  model::OffspringLaw law = model::calibrate(raw);
  model::BoundaryReport rep = model::check_boundary(law, 1e-9);
  if (out_file.empty())
    std::cout << model::law_to_json(law).dump(2) << "\n";
  else
    model::save_law(law, out_file);
  return rep.pass() ? 0 : 1;
}

experiments::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  nlohmann::ordered_json j;
  in >> j;
  return experiments::ExperimentConfig::from_json(j);
}

std::vector<std::pair<std::string, model::OffspringLaw>> oracle_fixtures(const std::string& spec) {
  std::vector<std::pair<std::string, model::OffspringLaw>> out;
  std::string item;
  std::stringstream ss(spec);
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if (item == "bin2")
      out.emplace_back(item, model::bin2_family(std::log(4.0)));
    else if (item.rfind("cosh", 0) == 0)
      out.emplace_back(item, model::cosh_family(std::stod(item.substr(4))));
    else
      out.emplace_back(item, model::load_law(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boundary-case branching random walk toolkit"};
  app.require_subcommand(1);

  // ---- model ----
  auto* model_cmd = app.add_subcommand("model", "law checking and calibration");
  model_cmd->require_subcommand(1);
  std::string law_file, out_law;
  double check_tol = 1e-10;
  auto* mc = model_cmd->add_subcommand("check", "boundary-case verdicts for a law file");
  mc->add_option("--law", law_file, "law definition file")->required();
  mc->add_option("--tol", check_tol, "verdict tolerance");
  auto* mcal = model_cmd->add_subcommand("calibrate", "tilt-and-shift a law into the boundary case");
  mcal->add_option("--law", law_file, "law definition file")->required();
  mcal->add_option("--out-law", out_law, "write the calibrated law here (default: stdout)");
  auto* mmake = model_cmd->add_subcommand("make", "emit a built-in family as a law file");
  LawFlags make_law_flags;
  make_law_flags.attach(mmake);
  mmake->add_option("--out-law", out_law, "output path (default: stdout)");

  // ---- experiments ----
  auto* exp_cmd = app.add_subcommand("experiment", "seeded experiments emitting CSV/JSON");
  exp_cmd->require_subcommand(1);
  std::string cfg_file, out_dir = "out";
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  int threads_flag = -1, n_flag = -1;
  std::int64_t replicas_flag = -1;
  auto add_common = [&](CLI::App* c) {
    c->add_option("--config", cfg_file, "experiment config (JSON)");
    c->add_option("--out", out_dir, "output directory");
    c->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed_flag = s; seed_given = true; }, "root seed (64-bit)");
    c->add_option("--threads", threads_flag, "worker threads");
    c->add_option("--replicas", replicas_flag, "replica count");
    c->add_option("--n", n_flag, "generations");
  };
  auto* exp_theorem = exp_cmd->add_subcommand("theorem", "rescaled leftmost-path ladder vs excursion");
  auto* exp_tail = exp_cmd->add_subcommand("tail", "left-tail probabilities of the minimum");
  auto* exp_cond = exp_cmd->add_subcommand("conditioned", "conditioned path marginal vs excursion");
  auto* exp_lines = exp_cmd->add_subcommand("lines", "first-crossing stopping-line sums");
  for (auto* c : {exp_theorem, exp_tail, exp_cond, exp_lines}) add_common(c);

  // ---- oracle ----
  auto* oracle_cmd = app.add_subcommand("oracle", "exact-identity checks");
  auto* oracle_run = oracle_cmd->add_subcommand("run-all", "run every identity check");
  std::string fixtures = "cosh2,bin2,cosh1.2";
  bool inject_bug = false;
  oracle_run->add_option("--laws", fixtures, "comma-separated fixtures (coshM, bin2, or law files)");
  oracle_run->add_flag("--inject-bug", inject_bug, "negate one weight; the reweighting checks must fail");

  // ---- walk ----
  auto* walk_cmd = app.add_subcommand("walk", "associated random walk queries (CSV to stdout)");
  walk_cmd->require_subcommand(1);
  LawFlags walk_law;
  auto* wr = walk_cmd->add_subcommand("renewal", "renewal function R(x) table");
  walk_law.attach(wr);
  int renewal_levels = 5;
  long long kmax = 1000000;
  wr->add_option("--levels", renewal_levels, "number of span multiples to tabulate");
  wr->add_option("--kmax", kmax, "ladder DP step bound");
  auto* ws = walk_cmd->add_subcommand("survival", "stay-positive probability table");
  LawFlags surv_law;
  surv_law.attach(ws);
  int surv_n = 10000;
  std::vector<double> surv_a = {0.0};
  ws->add_option("--n", surv_n, "walk length");
  ws->add_option("--a", surv_a, "start levels");
  auto* wb = walk_cmd->add_subcommand("ballot", "n^{-3/2} envelope probe");
  LawFlags ballot_law;
  ballot_law.attach(wb);
  rwalk::BallotProbeParams ballot_params;
  wb->add_option("--x", ballot_params.x);
  wb->add_option("--a", ballot_params.a);
  wb->add_option("--b", ballot_params.b);
  wb->add_option("--lambda", ballot_params.lambda);
  wb->add_option("--y", ballot_params.y);
  wb->add_option("--nref", ballot_params.n_ref);
  wb->add_option("--checks", ballot_params.n_checks);

  // ---- excursion ----
  auto* exc_cmd = app.add_subcommand("excursion", "reference-law sampling and identity checks");
  exc_cmd->require_subcommand(1);
  auto* exc_sample = exc_cmd->add_subcommand("sample", "emit sampled paths as CSV (s,value)");
  int exc_grid = 256, exc_samples = 1;
  std::uint64_t exc_seed = 1;
  std::string exc_kind = "excursion";
  exc_sample->add_option("--grid", exc_grid);
  exc_sample->add_option("--samples", exc_samples);
  exc_sample->add_option("--seed", exc_seed);
  exc_sample->add_option("--kind", exc_kind, "excursion | meander | bessel3");
  auto* exc_ident = exc_cmd->add_subcommand("identity", "meander-to-excursion identity check (JSON)");
  double ident_delta = 0.5;
  int ident_samples = 100000, ident_grid = 256;
  std::uint64_t ident_seed = 1;
  exc_ident->add_option("--delta", ident_delta);
  exc_ident->add_option("--samples", ident_samples);
  exc_ident->add_option("--grid", ident_grid);
  exc_ident->add_option("--seed", ident_seed);

  // ---- tree ----
  auto* tree_cmd = app.add_subcommand("tree", "tiny-run utilities");
  auto* tree_dump = tree_cmd->add_subcommand("dump", "CSV dump of a small tree run");
  LawFlags tree_law;
  tree_law.attach(tree_dump);
  int tree_n = 4;
  std::uint64_t tree_seed = 1;
  tree_dump->add_option("--n", tree_n)->check(CLI::Range(0, 12));
  tree_dump->add_option("--seed", tree_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (mc->parsed()) return cmd_model_check(law_file, check_tol);
    if (mcal->parsed()) return cmd_model_calibrate(law_file, out_law);
    if (mmake->parsed()) {
      model::OffspringLaw law = make_law_flags.make();
      if (out_law.empty())
        std::cout << model::law_to_json(law).dump(2) << "\n";
      else
        model::save_law(law, out_law);
      return 0;
    }

    if (exp_cmd->parsed()) {
      experiments::ExperimentConfig cfg = load_config(cfg_file);
      if (seed_given) cfg.seed = seed_flag;
      if (threads_flag > 0) cfg.threads = threads_flag;
      if (replicas_flag > 0) cfg.replicas = static_cast<std::uint64_t>(replicas_flag);
      if (n_flag > 0) cfg.n = n_flag;
      cfg.need_seed();
      if (exp_theorem->parsed()) {
        auto res = experiments::run_theorem(cfg);
        experiments::write_theorem_outputs(cfg, res, out_dir);
      } else if (exp_tail->parsed()) {
        if (cfg.z_values.empty()) throw std::invalid_argument("tail: config needs z_values");
        auto res = experiments::run_tail(cfg);
        experiments::write_tail_outputs(cfg, res, out_dir);
      } else if (exp_cond->parsed()) {
        auto res = experiments::run_conditioned(cfg);
        experiments::write_conditioned_outputs(cfg, res, out_dir);
      } else if (exp_lines->parsed()) {
        auto res = experiments::run_lines(cfg);
        experiments::write_lines_outputs(cfg, res, out_dir);
      }
      return 0;
    }

    if (oracle_run->parsed()) {
      auto fx = oracle_fixtures(fixtures);
      if (fx.empty()) {
        std::cerr << "oracle: empty fixture list\n";
        return 2;
      }
      oracle::Report rep = oracle::run_all(fx, inject_bug);
      std::printf("%-10s %-28s %-12s %-8s %s\n", "fixture", "check", "value", "tol", "status");
      for (const auto& c : rep.checks)
        std::printf("%-10s %-28s %-12.3e %-8.0e %s\n", c.fixture.c_str(), c.name.c_str(), c.value, c.tol,
                    c.pass ? "PASS" : "FAIL");
      return rep.all_pass ? 0 : 1;
    }

    if (wr->parsed()) {
      model::OffspringLaw law = walk_law.make();
      rwalk::StepLaw step = rwalk::step_law(law);
      rwalk::LadderDist ladder = rwalk::ladder_heights(step, kmax);
      std::printf("#schema=1\nx,R,truncation\n");
      for (int j = 0; j <= renewal_levels; ++j) {
        double x = step.unit * j;
        auto r = rwalk::renewal_R(ladder, x);
        std::printf("%s,%s,%s\n", fmt(x).c_str(), fmt(r.value).c_str(), fmt(r.unresolved).c_str());
      }
      return 0;
    }
    if (ws->parsed()) {
      model::OffspringLaw law = surv_law.make();
      rwalk::StepLaw step = rwalk::step_law(law);
      std::printf("#schema=1\na,n,p,sqrt_n_p\n");
      for (double a : surv_a) {
        auto r = rwalk::survival_prob(step, surv_n, a);
        std::printf("%s,%d,%s,%s\n", fmt(a).c_str(), surv_n, fmt(r.p).c_str(),
                    fmt(std::sqrt(static_cast<double>(surv_n)) * r.p).c_str());
      }
      return 0;
    }
    if (wb->parsed()) {
      model::OffspringLaw law = ballot_law.make();
      rwalk::StepLaw step = rwalk::step_law(law);
      auto probe = rwalk::ballot_bound_probe(step, ballot_params);
      std::printf("#schema=1\nn,lhs,envelope,within,applicable\n");
      std::printf("%d,%s,%s,1,%d\n", ballot_params.n_ref, fmt(probe.lhs_ref).c_str(), fmt(probe.lhs_ref).c_str(),
                  probe.applicable ? 1 : 0);
      for (const auto& pt : probe.points)
        std::printf("%d,%s,%s,%d,%d\n", pt.n, fmt(pt.lhs).c_str(), fmt(pt.envelope).c_str(), pt.within ? 1 : 0,
                    probe.applicable ? 1 : 0);
      return probe.applicable ? 0 : 1;
    }

    if (exc_sample->parsed()) {
      rng::Engine eng = rng::make_engine(exc_seed, 0);
      std::printf("#schema=1\nsample,s,value,weight\n");
      for (int i = 0; i < exc_samples; ++i) {
        PathGrid p = exc_kind == "meander"   ? excursion::sample_meander(exc_grid, eng)
                     : exc_kind == "bessel3" ? excursion::sample_bessel3(exc_grid, eng)
                                             : excursion::sample_excursion(exc_grid, eng);
        for (int j = 0; j <= exc_grid; ++j)
          std::printf("%d,%s,%s,%s\n", i, fmt(p.s(j)).c_str(), fmt(p.values[(std::size_t)j]).c_str(),
                      fmt(p.weight).c_str());
      }
      return 0;
    }
    if (exc_ident->parsed()) {
      rng::Engine eng = rng::make_engine(ident_seed, 0);
      auto res = excursion::meander_excursion_identity(
          ident_delta, [](std::span<const double>, double) { return 1.0; }, ident_samples, ident_grid, eng);
      nlohmann::ordered_json j;
      j["delta"] = ident_delta;
      j["lhs"] = res.lhs;
      j["lhs_se"] = res.lhs_se;
      j["rhs"] = res.rhs;
      j["rhs_se"] = res.rhs_se;
      j["target"] = std::sqrt(std::numbers::pi / 2.0);
      std::cout << j.dump(2) << "\n";
      return 0;
    }

    if (tree_dump->parsed()) {
      model::OffspringLaw law = tree_law.make();
      rng::Engine eng = rng::make_engine(tree_seed, 0);
      brw::TreeRun run = brw::simulate(law, tree_n, {}, eng);
      brw::dump_csv(run, std::cout);
      return 0;
    }
  } catch (const model::LawParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const experiments::InsufficientSample& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
