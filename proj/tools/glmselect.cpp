#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "glmselect/cli.hpp"

namespace cli = glmselect::cli;

int main(int argc, char** argv) {
    CLI::App app{"Penalized maximum-likelihood model selection for GLMs"};
    app.require_subcommand(1);

    std::string config;
    std::optional<int> threads;
    std::optional<std::string> out;
    std::optional<std::string> format;

    const std::pair<cli::Command, const char*> commands[] = {
        {cli::Command::select, "Exhaustive penalized selection"},
        {cli::Command::greedy, "Forward (greedy) penalized selection"},
        {cli::Command::eigen, "k-sparse eigenvalue table of the design"},
        {cli::Command::penalty_table, "Pen(k) table and weight certificates"},
        {cli::Command::packing, "Packing set construction with a Hamming certificate"},
        {cli::Command::risk_sim, "Monte-Carlo Kullback-Leibler risk"},
        {cli::Command::rate_curve, "Risk against the minimax rate over a sparsity grid"},
    };
    for (const auto& [cmd, help] : commands) {
        CLI::App* sub = app.add_subcommand(cli::to_string(cmd), help);
        sub->add_option("--config", config, "JSON configuration file")->required();
        sub->add_option("--threads", threads, "Worker threads (default: GLMSELECT_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "Output path (default: standard output)");
        sub->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kExitInput;
    }

    const cli::Command cmd = cli::command_from_string(app.get_subcommands().front()->get_name());
    try {
        const cli::RunConfig cfg =
            cli::load_config(cmd, config, out ? std::optional<std::filesystem::path>(*out) : std::nullopt,
                             format, cli::resolve_threads(threads));
        return cli::execute(cfg, std::cout, std::cerr);
    } catch (const glmselect::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitInput;
    }
}
