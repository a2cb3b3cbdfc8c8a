#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "nbody/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"nbody: free time minimizers and asymptotics of the Newtonian n-body problem"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    int segments = 0;
    bool quiet = false;

    struct Entry {
        const char* name;
        const char* help;
    };
    static const Entry entries[] = {
        {"minimize", "fixed- or free-time action minimization between two configurations"},
        {"flow", "integrate Newton's equations from given initial data"},
        {"classify", "integrate (or load) a trajectory and classify its asymptotics"},
        {"fit-bounds", "fit the phase bound constants by a sampling sweep"},
        {"verify-bounds", "check the no-interaction bound against fitted constants"},
        {"sweep", "run a batch of independent experiment instances"},
    };

    std::string command;
    for (const Entry& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        sub->add_option("--spec", spec_path, "experiment spec file (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides spec)");
        sub->add_option("--seed", seed, "seed override");
        sub->add_option("--segments", segments, "path segment count override");
        sub->add_flag("--quiet", quiet, "suppress summary echo");
        sub->callback([&command, name = e.name] { command = name; });
    }

    CLI11_PARSE(app, argc, argv);

    nbody::CliOverrides overrides;
    overrides.quiet = quiet;
    if (!out_dir.empty()) overrides.out_dir = out_dir;
    const CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed") > 0) overrides.seed = seed;
    if (sub->count("--segments") > 0) overrides.segments = segments;

    return nbody::run_experiment(command, spec_path, overrides, &std::cout);
}
