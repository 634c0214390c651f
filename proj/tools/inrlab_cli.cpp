// inrlab: fit, compare and check coordinate networks from JSON configs.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "inrlab/acceptance.hpp"
#include "inrlab/experiment.hpp"
#include "inrlab/gradcheck.hpp"
#include "inrlab/runtime.hpp"

namespace {

using namespace inrlab;

struct CommonFlags {
  std::vector<std::string> configs;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required, std::size_t max_configs = 1) {
  auto* opt = cmd->add_option("--config", f.configs, "experiment config (JSON)");
  opt->expected(1, static_cast<int>(max_configs));
  if (max_configs > 1) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  if (config_required) opt->required();
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--out", f.out, "output directory (overrides output_dir)");
  cmd->add_option("--override", f.overrides, "key=value applied on top of the config (repeatable)")->allow_extra_args(false);
}

ExperimentConfig load(const std::string& path, const CommonFlags& f) {
  std::vector<std::string> ov = f.overrides;
  if (f.seed) ov.push_back("seed=" + std::to_string(*f.seed));
  if (!f.out.empty()) ov.push_back("output_dir=" + Json(f.out).dump());
  return load_config(path, ov);
}

int report(const std::string& kind, const std::exception& e, int code) {
  std::cerr << error_line(kind, e.what()) << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Coordinate-network experiments: fit, compare, export slices, check gradients, run acceptance."};
  app.require_subcommand(1);

  CommonFlags run_f, cmp_f, exp_f, acc_f;
  auto* run = app.add_subcommand("run", "fit one config and write its artifacts");
  add_common(run, run_f, true);

  auto* cmp = app.add_subcommand("compare", "fit two configs on the same task and seed, report deltas");
  add_common(cmp, cmp_f, true, 2);

  std::optional<std::string> checkpoint;
  auto* exp = app.add_subcommand("export-slices", "write slice rasters, overlays and profiles");
  add_common(exp, exp_f, true);
  exp->add_option("--checkpoint", checkpoint, "restore parameters instead of training");

  AcceptanceOptions acc;
  auto* accept = app.add_subcommand("accept", "run the acceptance criteria");
  add_common(accept, acc_f, false);
  accept->add_option("--only", acc.only, "criterion ids to run")->delimiter(',');
  accept->add_option("--seeds", acc.seeds, "seeds per averaged criterion")->check(CLI::PositiveNumber);
  accept->add_option("--corrupt-gradients", acc.corrupt_gradients, "scale Linear weight gradients (test hook)");

  GradCheckOptions gopt;
  double gc_corrupt = 1.0;
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of every backward rule");
  gc->add_option("--configs", gopt.configs, "random configurations per check")->check(CLI::PositiveNumber);
  gc->add_option("--seed", gopt.seed, "rng seed");
  gc->add_option("--corrupt-gradients", gc_corrupt, "scale Linear weight gradients (test hook)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run) return run_command(load(run_f.configs.at(0), run_f));

    if (*cmp) {
      if (cmp_f.configs.size() != 2) throw ConfigError("compare needs two --config files");
      CommonFlags per = cmp_f;
      per.out.clear();
      const ExperimentConfig a = load(cmp_f.configs[0], per);
      const ExperimentConfig b = load(cmp_f.configs[1], per);
      return compare_command(a, b, cmp_f.out.empty() ? std::string("runs/compare") : cmp_f.out);
    }

    if (*exp) return export_slices_command(load(exp_f.configs.at(0), exp_f), checkpoint);

    if (*accept) {
      if (!acc_f.configs.empty()) throw ConfigError("accept builds its own configs; use --override instead");
      acc.overrides = acc_f.overrides;
      if (acc_f.seed) acc.grad.seed = *acc_f.seed;
      AcceptanceSuite suite(acc);
      const auto results = suite.run(std::cout);
      std::size_t passed = 0;
      Json j = Json::array();
      for (const auto& r : results) {
        passed += r.pass ? 1u : 0u;
        j.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"measured", r.measured},
                     {"threshold", r.threshold}, {"seconds", r.seconds}});
      }
      std::cout << passed << "/" << results.size() << " criteria passed\n";
      if (!acc_f.out.empty()) write_text(prepare_output_dir(acc_f.out) / "acceptance.json", j.dump(2) + "\n");
      return passed == results.size() ? kExitOk : kExitFailure;
    }

    if (*gc) {
      debug::gradient_corruption() = gc_corrupt;
      bool ok = true;
      for (const auto& r : run_all_gradient_checks(gopt)) {
        ok = ok && r.pass();
        std::printf("[%s] %-22s configs=%zu entries=%zu redraws=%zu max_rel_err=%.3e%s%s\n", r.pass() ? "PASS" : "FAIL",
                    r.name.c_str(), r.configs, r.entries, r.redraws, r.max_rel_err, r.worst.empty() ? "" : "  worst: ",
                    r.worst.c_str());
      }
      return ok ? kExitOk : kExitFailure;
    }
  } catch (const ConfigError& e) {
    return report("config", e, kExitUsage);
  } catch (const UsageError& e) {
    return report("usage", e, kExitUsage);
  } catch (const DomainError& e) {
    return report("domain", e, kExitUsage);
  } catch (const NumericError& e) {
    return report("numeric", e, kExitNumeric);
  } catch (const IoError& e) {
    return report("io", e, kExitIo);
  } catch (const std::exception& e) {
    return report("internal", e, kExitFailure);
  }
  return kExitUsage;
}
