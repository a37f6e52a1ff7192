// SPDX-License-Identifier: Apache-2.0
// tolebi: train / eval / ablate / inspect.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tolebi/core/errors.hpp"
#include "tolebi/eval/harness.hpp"
#include "tolebi/eval/report.hpp"
#include "tolebi/nn/checkpoint.hpp"
#include "tolebi/train/ablation.hpp"
#include "tolebi/train/config.hpp"
#include "tolebi/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace tolebi;

namespace {

constexpr int kOk = 0, kRuntime = 1, kUsage = 2;

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

std::vector<std::string> overrides_of(const Common& c) {
  std::vector<std::string> o = c.sets;
  if (c.has_seed) o.push_back("run.seed=" + std::to_string(c.seed));
  return o;
}

fs::path output_dir(const Common& c, const std::string& name) {
  if (!c.out.empty()) return c.out;
  const char* root = std::getenv("TOLEBI_OUT_ROOT");
  return fs::path(root && *root ? root : "runs") / name;
}

void print_progress(const train::IterationMetrics& m) {
  std::cout << "iter " << m.iteration << "  stage " << train::to_string(m.stage) << "  episodes " << m.episodes
            << "  mean_length " << m.mean_length << "  smoothed " << m.smoothed_length << "  step_reward "
            << m.mean_step_reward << "  estimator_bce " << m.estimator_loss << '\n';
}

fs::path train_run(train::TrainConfig cfg, const fs::path& dir, const std::string& resume, bool quiet) {
  train::Trainer trainer(cfg, dir);
  if (!resume.empty()) trainer.restore(nn::Checkpoint::load(resume));
  trainer.run(-1, quiet ? train::Trainer::Progress{} : train::Trainer::Progress(print_progress));
  return trainer.latest_path();
}

eval::EvalReport evaluate(const train::PolicyBundle& bundle, const fs::path& dir, const fs::path& checkpoint) {
  const auto joints = sim::RobotModel::planar_biped().joint_names();
  const auto scenarios = eval::scenario_grid(joints, bundle.config.eval, bundle.config.seed);
  eval::EvalReport report = eval::run_success_eval(bundle, scenarios);
  nlohmann::json meta{{"checkpoint", checkpoint.string()},
                      {"iteration", bundle.iteration},
                      {"seed", bundle.config.seed},
                      {"episodes_per_scenario", bundle.config.eval.episodes},
                      {"horizon", bundle.config.eval.horizon},
                      {"success_time", bundle.config.eval.success_time},
                      {"fault_onset", bundle.config.eval.onset},
                      {"command_vx", bundle.config.eval.command_vx},
                      {"post_onset_only", bundle.config.eval.post_onset_only},
                      {"joints", joints}};
  eval::emit_report(dir, report, meta);
  return report;
}

void print_rows(const std::vector<eval::ScenarioResult>& rows) {
  if (rows.empty()) return;
  std::cout << eval::kReportHeader << '\n';
  for (const auto& r : rows)
    std::cout << r.name << ',' << r.fault_type << ',' << r.joint << ',' << r.episodes << ',' << r.success_rate << ','
              << r.mean_survival << ',' << r.lin_rmse << ',' << r.lin_mbe << ',' << r.ang_rmse << ',' << r.ang_mbe
              << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fault-tolerant biped locomotion: training, evaluation and ablations"};
  app.require_subcommand(1);

  auto add_common = [](CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "YAML config file (defaults apply to missing keys)");
    sub->add_option("--out", c.out, "Output directory (default: $TOLEBI_OUT_ROOT/<run name> or runs/<run name>)");
    sub->add_option("--set", c.sets, "Override, key=value with a dotted key; repeatable");
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&c](std::uint64_t s) {
          c.seed = s;
          c.has_seed = true;
        },
        "Seed for every random stream");
  };

  Common tc;
  bool dry_run = false;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "Train a policy and status estimator");
  add_common(train_cmd, tc);
  train_cmd->add_flag("--dry-run", dry_run, "One environment, ten iterations");
  train_cmd->add_option("--resume", resume, "Continue from a checkpoint of the same run");

  Common ec;
  std::string checkpoint;
  std::vector<std::string> scenarios;
  int episodes = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint over the fault-scenario grid");
  add_common(eval_cmd, ec);
  eval_cmd->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();
  eval_cmd->add_option("--scenario", scenarios, "Scenario name (healthy, lock_<joint>, power_<joint>); repeatable");
  eval_cmd->add_option("--episodes", episodes, "Episodes per scenario");

  Common ac;
  std::vector<std::string> variants;
  bool ablate_dry = false;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate ablation variants with shared seeds");
  add_common(ablate_cmd, ac);
  ablate_cmd->add_option("--variant", variants, "Variant name; repeatable (default: full only)");
  ablate_cmd->add_flag("--dry-run", ablate_dry, "One environment, ten iterations per variant");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print a checkpoint header");
  inspect_cmd->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) {
      std::vector<std::string> o = overrides_of(tc);
      if (dry_run) {
        o.push_back("env.num_envs=1");
        o.push_back("ppo.iterations=10");
      }
      const train::TrainConfig cfg = train::load_config(tc.config, o);
      const fs::path dir = output_dir(tc, cfg.run_name);
      const fs::path latest = train_run(cfg, dir, resume, false);
      std::cout << "run directory: " << dir.string() << "\nlatest checkpoint: " << latest.string() << '\n';
      return kOk;
    }

    if (*eval_cmd) {
      std::vector<std::string> o = overrides_of(ec);
      if (!ec.config.empty()) {
        // Only the file's eval section applies; everything else comes from
        // the snapshot stored in the checkpoint.
        if (!fs::exists(ec.config)) throw ConfigError("config file not found: " + ec.config);
        const YAML::Node file = YAML::LoadFile(ec.config);
        if (file && file["eval"])
          for (const auto& kv : file["eval"]) {
            YAML::Emitter e;
            e << YAML::Flow << kv.second;
            o.insert(o.begin(), "eval." + kv.first.as<std::string>() + "=" + e.c_str());
          }
      }
      if (!scenarios.empty()) {
        std::string list = "[";
        for (std::size_t i = 0; i < scenarios.size(); ++i) list += (i ? ", " : "") + scenarios[i];
        o.push_back("eval.scenarios=" + list + "]");
      }
      if (episodes > 0) o.push_back("eval.episodes=" + std::to_string(episodes));
      const train::PolicyBundle bundle = train::load_bundle(checkpoint, o);
      const fs::path dir = output_dir(ec, bundle.config.run_name + "_eval");
      const eval::EvalReport report = evaluate(bundle, dir, checkpoint);
      print_rows(report.rows);
      print_rows(eval::summary_rows(report));
      std::cout << "report: " << (dir / "report.csv").string() << '\n';
      return kOk;
    }

    if (*ablate_cmd) {
      if (variants.empty()) variants.push_back("full");
      for (const auto& v : variants) train::variant_overrides(v);  // validate names before any work
      const train::TrainConfig base = train::load_config(ac.config, overrides_of(ac));
      const fs::path root = output_dir(ac, base.run_name + "_ablation");
      std::vector<std::pair<std::string, eval::EvalReport>> results;
      for (const auto& v : variants) {
        std::vector<std::string> o = overrides_of(ac);
        for (const auto& x : train::variant_overrides(v)) o.push_back(x);
        o.push_back("run.name=" + v);
        if (ablate_dry) {
          o.push_back("env.num_envs=1");
          o.push_back("ppo.iterations=10");
          o.push_back("eval.episodes=1");
        }
        const train::TrainConfig cfg = train::load_config(ac.config, o);
        std::cout << "== variant " << v << '\n';
        const fs::path latest = train_run(cfg, root / v, "", true);
        const train::PolicyBundle bundle = train::load_bundle(latest);
        results.emplace_back(v, evaluate(bundle, root / v / "eval", latest));
      }
      std::ofstream os(root / "ablation.csv");
      if (!os) throw IoError("cannot write " + (root / "ablation.csv").string());
      os << "variant,healthy_success,locking_success,power_loss_success,lin_rmse,lin_mbe,ang_rmse,ang_mbe\n";
      for (const auto& [v, rep] : results) {
        double healthy = 0.0;
        for (const auto& r : rep.rows)
          if (r.fault_type == "healthy") healthy = r.success_rate;
        const auto lock = eval::fault_average(rep, "joint_locking");
        const auto power = eval::fault_average(rep, "power_loss");
        const auto all = eval::fault_average(rep);
        os << v << ',' << eval::num(healthy) << ',' << eval::num(lock.success_rate) << ','
           << eval::num(power.success_rate) << ',' << eval::num(all.lin_rmse) << ',' << eval::num(all.lin_mbe) << ','
           << eval::num(all.ang_rmse) << ',' << eval::num(all.ang_mbe) << '\n';
      }
      std::cout << "ablation table: " << (root / "ablation.csv").string() << '\n';
      return kOk;
    }

    if (*inspect_cmd) {
      const nn::Checkpoint ck = nn::Checkpoint::load(inspect_path);
      nlohmann::json h = ck.header;
      h["format_version"] = nn::kCheckpointVersion;
      nlohmann::json arrays = nlohmann::json::object();
      for (const auto& [name, v] : ck.arrays) arrays[name] = v.size();
      h["arrays"] = arrays;
      h["state_bytes"] = ck.state.size();
      std::cout << h.dump(2) << '\n';
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
