#include "commands.hpp"

#include "har/error.hpp"
#include "har/parallel.hpp"
#include "har/simd/kernels.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>

int main(int argc, char** argv) {
    using namespace har;
    CLI::App app{"Self-supervised activity recognition toolkit"};
    app.require_subcommand(1);
    app.footer(fmt::format("HAR_THREADS caps worker threads (now {}); HAR_ISA=scalar disables AVX2 kernels.",
                           thread_budget()));

    struct Args {
        std::string config, out;
        std::uint64_t seed = 1;
        bool seed_given = false;
        std::vector<std::string> overrides;
        bool show_keys = false;
    };
    std::vector<Args> args(cli::commands().size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < cli::commands().size(); ++i) {
        const auto& c = cli::commands()[i];
        auto* sub = app.add_subcommand(c.name, c.summary);
        auto& a = args[i];
        sub->add_option("--config", a.config, "key=value config file");
        sub->add_option("--seed", a.seed, "random seed")->each([&a](const std::string&) { a.seed_given = true; });
        sub->add_option("--out", a.out, "output directory");
        sub->add_flag("--keys", a.show_keys, "list config keys and defaults");
        sub->add_option("overrides", a.overrides, "key=value overrides");
        subs.push_back(sub);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (!subs[i]->parsed()) continue;
        const auto& c = cli::commands()[i];
        const auto& a = args[i];
        try {
            RunConfig rc;
            rc.declare("seed", "1", "random seed (--seed overrides)");
            c.declare(rc);
            if (a.show_keys) {
                fmt::print("{}", rc.describe());
                return 0;
            }
            if (!a.config.empty()) rc.load_file(a.config);
            for (const auto& o : a.overrides) rc.assign(o);
            if (a.seed_given) rc.set("seed", std::to_string(a.seed));
            if (a.out.empty()) throw ConfigError("--out is required");
            const std::filesystem::path out(a.out);
            std::filesystem::create_directories(out);
            rc.write_resolved(out / "config.txt");
            fmt::print("{}: kernels {}, {} thread(s)\n", c.name, simd::isa_name(simd::active().isa), thread_budget());
            c.run(rc, out);
            return 0;
        } catch (const ConfigError& e) {
            fmt::print(stderr, "configuration error: {}\n", e.what());
            return 2;
        } catch (const InvariantError& e) {
            fmt::print(stderr, "invariant violated: {}\n", e.what());
            return 3;
        } catch (const std::exception& e) {
            fmt::print(stderr, "error: {}\n", e.what());
            return 1;
        }
    }
    return 2;
}
