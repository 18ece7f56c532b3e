#include <CLI11.hpp>

#include <iostream>

#include "sfl/scenario.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Singular-set flow lab: scenario runner"};
    app.set_version_flag("--version", sfl::kVersion);
    app.require_subcommand(1);

    std::string config, out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    auto add_flags = [&](CLI::App* sub) {
        sub->add_option("--config", config, "scenario config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "overrides the config seed");
        sub->add_option("--threads", threads, "worker threads, 0 = all cores");
    };
    std::vector<CLI::App*> subs;
    for (const auto& m : sfl::module_names()) subs.push_back(app.add_subcommand(m, "run the " + m + " module"));
    subs.push_back(app.add_subcommand("all", "run the config's pipeline list"));
    for (auto* s : subs) add_flags(s);

    CLI11_PARSE(app, argc, argv);

    try {
        const sfl::Scenario sc = sfl::load_scenario(config, seed);
        const std::string name = app.get_subcommands().front()->get_name();
        const std::vector<std::string> modules = name == "all" ? sc.pipeline : std::vector<std::string>{name};
        const sfl::RunResult r = sfl::run_scenario(sc, out, modules, threads);
        if (!modules.empty()) std::cout << sfl::read_summary(out);
        std::cout << "wrote " << r.files.size() << " files to " << out << "\n";
        return r.passed() ? 0 : 1;
    } catch (const sfl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
