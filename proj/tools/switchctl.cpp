#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "switchctl/scenario.hpp"

namespace {

/** Split "key=value"; everything after the first '=' is the value. */
std::pair<std::string, std::string> split_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("scenario: override '" + text +
                                    "' must have the form key=value");
    return {text.substr(0, eq), text.substr(eq + 1)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"switchctl: stability certificates, relax-and-round optimal control and "
                 "switching-schedule descent for switched transport systems"};
    app.require_subcommand(1);

    std::string config_path, builtin_name, out_flag;
    std::uint64_t seed_flag = 0;
    int jobs = 1;
    std::vector<std::string> overrides;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_flag,
                        "Output directory (wins over SWITCHCTL_OUT and the config's 'out')");
        cmd->add_option("--seed", seed_flag, "Replace the scenario seed");
        cmd->add_option("--jobs", jobs, "Worker thread cap (default 1)");
        cmd->add_option("--override", overrides,
                        "key=value config override; dotted keys reach nested fields, values "
                        "are JSON literals (plain strings as fallback)")
            ->take_all();
    };

    CLI::App* run_cmd = app.add_subcommand("run", "Execute a JSON scenario file");
    run_cmd->add_option("file", config_path, "Scenario config (JSON)")->required();
    add_common(run_cmd);

    CLI::App* builtin_cmd = app.add_subcommand("builtin", "Execute a named builtin scenario");
    builtin_cmd->add_option("name", builtin_name, "Builtin name (see 'builtin list')")
        ->required();
    add_common(builtin_cmd);

    CLI::App* list_cmd = app.add_subcommand("list", "List the builtin scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // bad usage is a config error
    }

    using switchctl::scenario::Scenario;

    try {
        if (list_cmd->parsed()) {
            for (const auto& name : switchctl::scenario::builtin_names())
                std::cout << name << "\n";
            return 0;
        }

        Scenario sc = run_cmd->parsed() ? switchctl::scenario::load_scenario(config_path)
                                        : switchctl::scenario::builtin_scenario(builtin_name);

        if (!overrides.empty()) {
            nlohmann::json config = sc.payload;
            for (const auto& text : overrides) {
                const auto [key, value] = split_override(text);
                switchctl::scenario::apply_override(config, key, value);
            }
            sc = switchctl::scenario::parse_scenario(config, sc.name);
        }
        const CLI::App* active = run_cmd->parsed() ? run_cmd : builtin_cmd;
        if (active->count("--seed")) {
            sc.seed = seed_flag;
            sc.payload["seed"] = seed_flag;
        }

        std::filesystem::path out_dir;
        if (!out_flag.empty()) {
            out_dir = out_flag;
        } else if (const char* env = std::getenv("SWITCHCTL_OUT"); env && *env) {
            out_dir = env;
        } else if (!sc.out.empty()) {
            out_dir = sc.out;
        } else {
            out_dir = switchctl::scenario::default_out_dir(sc);
        }

        const auto manifest = switchctl::scenario::run_scenario(sc, out_dir, jobs);
        std::cout << sc.kind << " scenario '" << sc.name << "': wrote "
                  << manifest["artifacts"].size() << " artifacts to " << out_dir.string()
                  << "\n";
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const switchctl::numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
