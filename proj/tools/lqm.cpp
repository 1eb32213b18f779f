// Scenario-driven front end for the link queue / CTM engines.
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lqm/runner.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

lqm::ScenarioFile load(const std::string& path) {
  return lqm::parse_scenario(read_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"link queue network traffic simulator"};
  app.require_subcommand(1);

  std::string scn_path, out_dir = "out";
  double xi = 0.45;
  int reps = 3;

  auto* sim = app.add_subcommand("simulate", "run a scenario's engines");
  sim->add_option("scenario", scn_path)->required();
  sim->add_option("-o,--output", out_dir);

  auto* cmp = app.add_subcommand("compare", "run both engines and compare");
  cmp->add_option("scenario", scn_path)->required();
  cmp->add_option("-o,--output", out_dir);

  auto* mfd = app.add_subcommand("mfd", "ring MFD sweep");
  mfd->add_option("scenario", scn_path)->required();
  mfd->add_option("-o,--output", out_dir);

  auto* stab = app.add_subcommand("stability",
                                  "diverge-merge stability analysis");
  stab->add_option("--xi", xi, "demand split to the short branch")->required();

  auto* ben = app.add_subcommand("bench", "timing/state-count benchmark");
  ben->add_option("scenario", scn_path)->required();
  ben->add_option("-n,--repetitions", reps);

  auto* oracle = app.add_subcommand("oracle", "closed-form oracle tables");
  std::string which;
  oracle->add_option("which", which, "oracle name (single-link)")->required();
  oracle->add_option("-o,--output", out_dir);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto rep = lqm::run_scenario(load(scn_path), out_dir);
      lqm::write_report(rep, std::filesystem::path(out_dir) / "report.jsonl");
      for (const auto& line : rep.jsonl) std::cout << line << "\n";
    } else if (cmp->parsed()) {
      const auto rep = lqm::compare_engines(load(scn_path), out_dir);
      for (const auto& line : rep.jsonl) std::cout << line << "\n";
    } else if (mfd->parsed()) {
      const auto rep = lqm::run_mfd(load(scn_path), out_dir);
      for (const auto& line : rep.jsonl) std::cout << line << "\n";
    } else if (stab->parsed()) {
      // Diverge-merge configuration of the bundled dm2 scenarios: link 1 has
      // one lane, link 2 two lanes, downstream capacity 4680 vph.
      const auto fd1 = lqm::make_triangular_fd(65, 16.25, 180, 1);
      const auto fd2 = lqm::make_triangular_fd(65, 16.25, 180, 2);
      const auto rep = lqm::dm2_stationary_state(xi, 4680, *fd1, *fd2);
      const auto [l1, l2] = lqm::dm2_jacobian_eigen(xi, rep.a, rep.b);
      nlohmann::json j{{"xi", xi},
                       {"k1", rep.k1},
                       {"k2", rep.k2},
                       {"a", rep.a},
                       {"b", rep.b},
                       {"lambda1", {l1.real(), l1.imag()}},
                       {"lambda2", {l2.real(), l2.imag()}},
                       {"stable", l1.real() < 0 && l2.real() < 0}};
      std::cout << j.dump() << "\n";
    } else if (ben->parsed()) {
      std::cout << lqm::bench(load(scn_path), reps).to_json().dump() << "\n";
    } else if (oracle->parsed()) {
      if (which != "single-link") {
        throw std::invalid_argument("unknown oracle '" + which + "'");
      }
      lqm::write_single_link_oracle(out_dir);
    }
  } catch (const lqm::ScenarioError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const lqm::NetworkError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::domain_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::out_of_range& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
