#include <string>

#include "CLI11.hpp"
#include "kinv/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"kinv - forward and inverse solvers for the modified kinetic transport equation"};
    app.require_subcommand(1);

    int threads = 0;
    bool strict = false;
    app.add_option("--threads", threads, "cap the number of worker threads (default: all cores)");
    app.add_flag("--strict", strict, "escalate validation violations to errors");

    std::string config, out, suite;

    CLI::App* fwd = app.add_subcommand("forward", "solve the direct problem");
    fwd->add_option("--config", config, "problem config (JSON)")->required();
    fwd->add_option("--out", out, "output directory")->required();

    CLI::App* inv = app.add_subcommand("inverse", "recover the stationary source or absorption factor");
    inv->add_option("--config", config, "problem config (JSON)")->required();
    inv->add_option("--out", out, "output directory")->required();

    CLI::App* ver = app.add_subcommand("verify", "run a verification suite");
    ver->add_option("--suite", suite, "one of mms|oracle|stability|alpha")->required();
    ver->add_option("--config", config, "problem config (JSON)")->required();
    ver->add_option("--out", out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    kinv::RunOptions opts;
    opts.threads = threads;
    opts.strict_override = strict; // only force strict ON; configs keep their own default
    opts.strict = strict;
    if (!strict) opts.strict_override = false;

    kinv::RunManifest manifest;
    if (fwd->parsed())
        manifest = kinv::run_forward(config, out, opts);
    else if (inv->parsed())
        manifest = kinv::run_inverse(config, out, opts);
    else
        manifest = kinv::run_verify(suite, config, out, opts);

    if (manifest.exit_code != 0)
        std::fprintf(stderr, "kinv %s: %s (exit %d)\n", manifest.command.c_str(),
                     manifest.exit_status.c_str(), manifest.exit_code);
    return manifest.exit_code;
}
