#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sstream>

#include "bregman/cli.hpp"
#include "bregman/clustering.hpp"
#include "bregman/data.hpp"
#include "bregman/evaluation.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace bregman;
using test_util::TempDir;

namespace {

struct CliRun {
  int exit_code;
  nlohmann::json summary;  // null unless exit 0
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  CliRun result{code, nlohmann::json(), err.str()};
  if (code == 0 && !out.str().empty() && out.str()[0] == '{')
    result.summary = nlohmann::json::parse(out.str());
  return result;
}

void write_se_spec(const std::string& path, int dim) {
  test_util::spit(path, std::string("{\"kind\":\"squared_euclidean\",\"dim\":") +
                            std::to_string(dim) + "}");
}

}  // namespace

TEST_CASE("usage errors exit 1, runtime errors exit 2") {
  CHECK(run({}).exit_code == 1);
  CHECK(run({"gen"}).exit_code == 1);                       // missing required flags
  CHECK(run({"gen", "--bogus"}).exit_code == 1);            // unknown flag
  CHECK(run({"nonsense-subcommand"}).exit_code == 1);
  CHECK(run({"--help"}).exit_code == 0);

  TempDir tmp("cli_err");
  write_se_spec(tmp.path("se.json"), 2);
  const CliRun missing = run({"coreset", "--in", tmp.path("absent.csv"), "--divergence",
                              tmp.path("se.json"), "--k", "2", "--m", "5", "--seed", "1",
                              "--out", tmp.path("cs.csv")});
  CHECK(missing.exit_code == 2);
  CHECK(missing.err.find("data:") != std::string::npos);
}

TEST_CASE("gen is deterministic and reports its output") {
  TempDir tmp("cli_gen");
  const std::vector<std::string> args{"gen",  "--kind", "gaussian",          "--n",   "200",
                                      "--k",  "5",      "--d",               "2",     "--seed",
                                      "7",    "--out",  tmp.path("a.csv")};
  const CliRun first = run(args);
  REQUIRE(first.exit_code == 0);
  CHECK(first.summary["n"] == 200);
  CHECK(first.summary["d"] == 2);

  auto args2 = args;
  args2.back() = tmp.path("b.csv");
  CHECK(run(args2).exit_code == 0);
  CHECK(test_util::slurp(tmp.path("a.csv")) == test_util::slurp(tmp.path("b.csv")));

  const CliRun poisson = run({"gen", "--kind", "poisson", "--n", "50", "--k", "3", "--d", "2",
                              "--seed", "3", "--out", tmp.path("p.csv"), "--truth",
                              tmp.path("truth.json")});
  CHECK(poisson.exit_code == 0);
  const auto truth = nlohmann::json::parse(test_util::slurp(tmp.path("truth.json")));
  CHECK(truth["component_weights"].size() == 3);
  CHECK(truth["assignment"].size() == 50);
}

TEST_CASE("coreset subcommand writes a weighted set and a sensitivity dump") {
  TempDir tmp("cli_coreset");
  write_se_spec(tmp.path("se.json"), 2);
  REQUIRE(run({"gen", "--kind", "gaussian", "--n", "300", "--k", "4", "--d", "2", "--seed",
               "11", "--out", tmp.path("pts.csv")})
              .exit_code == 0);
  const CliRun cs = run({"coreset", "--in", tmp.path("pts.csv"), "--divergence",
                         tmp.path("se.json"), "--k", "4", "--m", "40", "--seed", "5", "--out",
                         tmp.path("cs.csv"), "--sensitivities", tmp.path("sens.json")});
  REQUIRE(cs.exit_code == 0);
  CHECK(cs.summary["origin_n"] == 300);
  CHECK(cs.summary["rows"].get<int>() <= 40);
  // Total weight estimates the data mass.
  CHECK(cs.summary["total_weight"].get<double>() > 100.0);
  CHECK(cs.summary["total_weight"].get<double>() < 900.0);

  const WeightedPointSet ws = load_weighted(tmp.path("cs.csv"));
  CHECK(ws.origin_n == 300);

  const auto sens = nlohmann::json::parse(test_util::slurp(tmp.path("sens.json")));
  CHECK(sens["s"].size() == 300);
  CHECK(sens["p"].size() == 300);
  CHECK(sens["alpha"].get<double>() == 64.0);  // 16 (log2 4 + 2)
  CHECK(sens["c_phi"].get<double>() > 0.0);

  const CliRun uf = run({"uniform", "--in", tmp.path("pts.csv"), "--m", "40", "--seed", "5",
                         "--out", tmp.path("us.csv")});
  REQUIRE(uf.exit_code == 0);
  CHECK(uf.summary["total_weight"].get<double>() == doctest::Approx(300.0).epsilon(1e-15));
}

TEST_CASE("eval is a thin wrapper over the cost functions") {
  TempDir tmp("cli_eval");
  write_se_spec(tmp.path("se.json"), 2);
  REQUIRE(run({"gen", "--kind", "gaussian", "--n", "100", "--k", "3", "--d", "2", "--seed",
               "13", "--out", tmp.path("pts.csv")})
              .exit_code == 0);
  const CliRun fit = run({"cluster-hard", "--in", tmp.path("pts.csv"), "--divergence",
                          tmp.path("se.json"), "--k", "3", "--seed", "21", "--out",
                          tmp.path("model.json"), "--report", tmp.path("report.json")});
  REQUIRE(fit.exit_code == 0);
  CHECK(fit.summary["converged"] == true);

  const CliRun ev = run({"eval", "--in", tmp.path("pts.csv"), "--model", tmp.path("model.json"),
                         "--divergence", tmp.path("se.json"), "--mode", "hard"});
  REQUIRE(ev.exit_code == 0);

  const PointSet ps = load_points(tmp.path("pts.csv"));
  const auto spec = DivergenceSpec::squared_euclidean(2);
  const HardModel model = hard_model_from_json(
      nlohmann::json::parse(test_util::slurp(tmp.path("model.json"))));
  CHECK(ev.summary["cost"].get<double>() ==
        doctest::Approx(cost_hard(spec, unit_weights(ps), model)).epsilon(1e-15));

  const auto report = nlohmann::json::parse(test_util::slurp(tmp.path("report.json")));
  CHECK(report["cost_trace"].size() >= 1);

  // Soft path round trip.
  const CliRun sfit = run({"cluster-soft", "--in", tmp.path("pts.csv"), "--divergence",
                           tmp.path("se.json"), "--k", "2", "--seed", "22", "--out",
                           tmp.path("soft.json")});
  REQUIRE(sfit.exit_code == 0);
  const CliRun sev = run({"eval", "--in", tmp.path("pts.csv"), "--model", tmp.path("soft.json"),
                          "--divergence", tmp.path("se.json"), "--mode", "soft"});
  REQUIRE(sev.exit_code == 0);
  const SoftModel soft = soft_model_from_json(
      nlohmann::json::parse(test_util::slurp(tmp.path("soft.json"))));
  CHECK(sev.summary["cost"].get<double>() ==
        doctest::Approx(cost_soft(spec, unit_weights(ps), soft)).epsilon(1e-15));
}

TEST_CASE("oracle subcommand: exhaustive and ptas paths") {
  TempDir tmp("cli_oracle");
  write_se_spec(tmp.path("se.json"), 2);
  test_util::spit(tmp.path("rect.csv"), "0,0\n0,1\n10,0\n10,1\n");

  const CliRun exact = run({"oracle", "--in", tmp.path("rect.csv"), "--divergence",
                            tmp.path("se.json"), "--k", "2", "--out", tmp.path("opt.json")});
  REQUIRE(exact.exit_code == 0);
  CHECK(exact.summary["cost"].get<double>() == 0.25);
  CHECK(exact.summary["partitions"].get<int>() == 8);

  const CliRun approx = run({"oracle", "--in", tmp.path("rect.csv"), "--divergence",
                             tmp.path("se.json"), "--k", "2", "--m", "12", "--seed", "3",
                             "--eps", "0.5"});
  REQUIRE(approx.exit_code == 0);
  CHECK(approx.summary["cost"].get<double>() == 0.25);
  CHECK(approx.summary["eps"].get<double>() == 0.5);

  // --m without --seed is a usage error.
  CHECK(run({"oracle", "--in", tmp.path("rect.csv"), "--divergence", tmp.path("se.json"),
             "--k", "2", "--m", "12"})
            .exit_code == 1);

  // Guard errors surface as runtime failures.
  REQUIRE(run({"gen", "--kind", "gaussian", "--n", "100", "--k", "2", "--d", "2", "--seed",
               "5", "--out", tmp.path("big.csv")})
              .exit_code == 0);
  CHECK(run({"oracle", "--in", tmp.path("big.csv"), "--divergence", tmp.path("se.json"),
             "--k", "2"})
            .exit_code == 2);
}

TEST_CASE("experiment subcommand and pipeline consistency") {
  TempDir tmp("cli_exp");
  write_se_spec(tmp.path("se.json"), 2);
  const std::uint64_t master = 424242;
  const nlohmann::json cfg = {
      {"dataset",
       {{"generator",
         {{"kind", "gaussian"}, {"n", 400}, {"k", 3}, {"d", 2}, {"seed", 31},
          {"mean_var", 100.0}}}}},
      {"divergence", {{"kind", "squared_euclidean"}, {"dim", 2}}},
      {"k", 3},
      {"sizes", {30}},
      {"trials", 2},
      {"seed", master},
      {"methods", {"coreset", "uniform", "full"}},
      {"mode", "hard"},
  };
  test_util::spit(tmp.path("cfg.json"), cfg.dump());

  const CliRun exp1 = run({"experiment", "--config", tmp.path("cfg.json"), "--out",
                           tmp.path("runA")});
  REQUIRE(exp1.exit_code == 0);
  CHECK(exp1.summary["failed_trials"] == 0);
  const double c_full_mean = exp1.summary["c_full_mean"].get<double>();

  // Rerun with two threads: random columns must be byte-identical.
  const CliRun exp2 = run({"experiment", "--config", tmp.path("cfg.json"), "--out",
                           tmp.path("runB"), "--threads", "2"});
  REQUIRE(exp2.exit_code == 0);
  const auto strip_timing = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
      // method,size,trial,eta,subsample_seconds,fit_seconds,cost_ss,cost_full
      std::vector<std::string> cells;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      out += cells[0] + ',' + cells[1] + ',' + cells[2] + ',' + cells[3] + ',' + cells[6] +
             ',' + cells[7] + '\n';
    }
    return out;
  };
  CHECK(strip_timing(test_util::slurp(tmp.path("runA_trials.csv"))) ==
        strip_timing(test_util::slurp(tmp.path("runB_trials.csv"))));

  // Replaying one coreset trial through the standalone subcommands reproduces
  // the recorded relative error.
  REQUIRE(run({"gen", "--kind", "gaussian", "--n", "400", "--k", "3", "--d", "2", "--seed",
               "31", "--mean-var", "100", "--out", tmp.path("pts.csv")})
              .exit_code == 0);
  const auto [sub_seed, fit_seed] = experiment_trial_seeds(master, Method::Coreset, 0, 0);
  const CliRun cs = run({"coreset", "--in", tmp.path("pts.csv"), "--divergence",
                         tmp.path("se.json"), "--k", "3", "--m", "30", "--seed",
                         std::to_string(sub_seed), "--out", tmp.path("cs.csv")});
  REQUIRE(cs.exit_code == 0);
  const CliRun fit = run({"cluster-hard", "--in", tmp.path("cs.csv"), "--weighted",
                          "--divergence", tmp.path("se.json"), "--k", "3", "--seed",
                          std::to_string(fit_seed), "--out", tmp.path("model.json")});
  REQUIRE(fit.exit_code == 0);
  const CliRun ev = run({"eval", "--in", tmp.path("pts.csv"), "--model", tmp.path("model.json"),
                         "--divergence", tmp.path("se.json"), "--mode", "hard"});
  REQUIRE(ev.exit_code == 0);
  const double replayed_eta =
      relative_error(ev.summary["cost"].get<double>(), c_full_mean);

  // Find the recorded (coreset, size 30, trial 0) row.
  const std::string trials_csv = test_util::slurp(tmp.path("runA_trials.csv"));
  std::istringstream in(trials_csv);
  std::string line;
  double recorded_eta = std::numeric_limits<double>::quiet_NaN();
  while (std::getline(in, line)) {
    if (line.rfind("coreset,30,0,", 0) == 0) {
      const auto start = std::string("coreset,30,0,").size();
      recorded_eta = std::stod(line.substr(start));
      break;
    }
  }
  REQUIRE(std::isfinite(recorded_eta));
  CHECK(std::abs(replayed_eta - recorded_eta) <= 1e-12);
}
