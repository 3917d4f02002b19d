#include "polexp/cli/app.hpp"

#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "polexp/cli/commands.hpp"
#include "polexp/error.hpp"

namespace polexp::cli {
namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool verify = false;
};

// Parses, runs and returns everything to write, manifest included.
using Runner = std::function<std::vector<Artifact>(const nlohmann::json&, const Overrides&,
                                                   const std::filesystem::path&, std::ostream&,
                                                   std::string&)>;

template <class Parse, class Run>
Runner make_runner(const std::string& command, Parse parse, Run run) {
  return [=](const nlohmann::json& j, const Overrides& o, const std::filesystem::path& base,
             std::ostream& err, std::string& hash) {
    const auto parsed = parse(j, o, base);
    hash = hex64(parsed.hash);
    const auto result = run(parsed);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    const Provenance prov{parsed.hash, command, parsed.run.seed};
    auto files = result.files;
    files.push_back({"manifest.json", manifest_text(command, parsed.effective, prov, result)});
    return files;
  };
}

// Only the kernel command reads a second file relative to the config.
template <class Config>
auto ignoring_base(Parsed<Config> (*parse)(const nlohmann::json&, const Overrides&)) {
  return [parse](const nlohmann::json& j, const Overrides& o, const std::filesystem::path&) {
    return parse(j, o);
  };
}

int execute(const std::string& command, const Runner& runner, const CommonArgs& args,
            std::ostream& out, std::ostream& err) {
  try {
    const std::filesystem::path config_path(args.config);
    const auto j = parse_json_text(read_file(config_path), config_path.string());
    const Overrides overrides{args.seed, args.threads};
    std::string hash;
    const auto files = runner(j, overrides, config_path.parent_path(), err, hash);
    const std::filesystem::path dir = args.out.empty() ? std::filesystem::path(command + "_out")
                                                       : std::filesystem::path(args.out);
    if (args.verify) {
      const auto bad = verify_outputs(dir, files);
      for (const auto& name : bad) err << "mismatch: " << (dir / name).string() << "\n";
      if (!bad.empty()) return kExitRuntime;
      out << "verified " << files.size() << " files in " << dir.string() << " (config_hash=0x"
          << hash << ")\n";
      return kExitOk;
    }
    write_outputs(dir, files);
    out << "wrote " << files.size() << " files to " << dir.string() << " (config_hash=0x" << hash
        << ")\n";
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int run_app(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exploration experiments with randomly initialized policy networks", "polexp"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  const std::map<std::string, std::pair<std::string, Runner>> commands{
      {"rollout",
       {"Roll out a trajectory ensemble",
        make_runner("rollout", ignoring_base(parse_rollout), run_rollout)}},
      {"kernel",
       {"Evaluate the NNGP kernel on a states file", make_runner("kernel", parse_kernel, run_kernel)}},
      {"bound-check",
       {"Check the ballistic error bound on fixed-policy rollouts",
        make_runner("bound-check", ignoring_base(parse_bound_check), run_bound_check)}},
      {"hallway",
       {"Passage rates through the hallway gap per rollout mode",
        make_runner("hallway", ignoring_base(parse_hallway), run_hallway)}},
      {"steady-state",
       {"Radial tail of per-step GP rollouts against the Fokker-Planck forms",
        make_runner("steady-state", ignoring_base(parse_steady_state), run_steady_state)}},
  };

  CommonArgs args;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::pair<CLI::Option*, CLI::Option*>> overrides;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", args.config, "JSON config file")->required();
    sub->add_option("--out", args.out, "Output directory (default: <command>_out)");
    auto* seed_opt = sub->add_option("--seed", seed, "Override the master seed");
    auto* threads_opt =
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--verify", args.verify,
                  "Recompute and compare with the files already in --out");
    subs[name] = sub;
    overrides[name] = {seed_opt, threads_opt};
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    if (overrides[name].first->count() > 0) args.seed = seed;
    if (overrides[name].second->count() > 0) args.threads = threads;
    return execute(name, commands.at(name).second, args, out, err);
  }
  return kExitConfig;
}

}  // namespace polexp::cli
