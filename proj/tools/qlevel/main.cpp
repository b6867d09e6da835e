#include "qlevel/run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"qlevel: level-set tracking and control of few-level quantum systems"};
    std::string command;
    std::string config;
    std::string out;
    unsigned threads = 1;
    app.add_option("command", command, "simulate | track | optimize | mesh | contour | intersect")
        ->required()
        ->check(CLI::IsMember({"simulate", "track", "optimize", "mesh", "contour", "intersect"}));
    app.add_option("--config", config, "run config (JSON)")->required();
    app.add_option("--out", out, "output directory, overrides output_dir in the config");
    app.add_option("--threads", threads, "worker threads for mesh sweeps")->check(CLI::PositiveNumber);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return qlevel::kValidation;
    }
    qlevel::RunOptions opts;
    if (!out.empty()) opts.out_dir = out;
    opts.threads = threads;
    return qlevel::run_file(command, config, opts, std::cerr);
}
