// Command line front end; talks to the library only through the C interface.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "fockchaos.h"

namespace {

int exit_code(fc_status s) {
    switch (s) {
    case FC_OK: return 0;
    case FC_CONFIG:
    case FC_INVALID_ARGUMENT:
    case FC_DIMENSION: return 2;
    case FC_CAPACITY: return 3;
    case FC_NUMERIC: return 4;
    default: return 1;
    }
}

struct Args {
    std::string config;
    std::string out;
    long long seed = -1;
    int threads = 0;
    bool validate_only = false;
};

int run(const std::string &experiment, const Args &a) {
    std::ifstream f(a.config, std::ios::binary);
    if (!f) {
        std::cerr << "error: cannot read config " << a.config << "\n";
        return 2;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();

    char *report = nullptr;
    fc_status st = fc_experiment_validate(text.c_str(), &report);
    if (st != FC_OK) {
        std::cerr << "error: " << fc_last_error() << "\n";
        return exit_code(st);
    }
    auto rep = nlohmann::json::parse(report);
    fc_string_free(report);

    bool capacity = false;
    for (const auto &i : rep["issues"]) {
        std::cerr << (i["path"].get<std::string>().empty() ? std::string("config") : i["path"].get<std::string>())
                  << ": " << i["message"].get<std::string>() << "\n";
        capacity = capacity || i["capacity"].get<bool>();
    }
    if (!rep["ok"].get<bool>())
        return capacity ? 3 : 2;

    // the subcommand names the experiment; a config for another one is a config error
    auto cfg = nlohmann::json::parse(text);
    if (cfg["experiment"].get<std::string>() != experiment) {
        std::cerr << "experiment: config describes '" << cfg["experiment"].get<std::string>()
                  << "' but the subcommand is '" << experiment << "'\n";
        return 2;
    }
    if (a.validate_only) {
        std::cout << "config ok\n";
        return 0;
    }
    if ((st = fc_set_threads(a.threads)) != FC_OK) {
        std::cerr << "error: " << fc_last_error() << "\n";
        return exit_code(st);
    }
    char *summary = nullptr;
    st = fc_experiment_run(text.c_str(), a.out.empty() ? nullptr : a.out.c_str(), a.seed, &summary);
    if (st != FC_OK) {
        std::cerr << "error: " << fc_last_error() << "\n";
        return exit_code(st);
    }
    auto sum = nlohmann::json::parse(summary);
    fc_string_free(summary);
    for (const auto &n : sum["notes"])
        std::cerr << "note: " << n.get<std::string>() << "\n";
    for (const auto &p : sum["files"])
        std::cout << p.get<std::string>() << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Bose-Hubbard quantum chaos experiments"};
    app.set_version_flag("--version", std::string(fc_version()));
    app.require_subcommand(1);

    Args a;
    const char *ids[] = {"autocorr", "cbs", "rwm", "otoc", "spectra", "lyapunov"};
    for (const char *id : ids) {
        auto *sub = app.add_subcommand(id, std::string("run the ") + id + " experiment");
        sub->add_option("--config", a.config, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", a.out, "output directory (default: config 'output')");
        sub->add_option("--seed", a.seed, "seed override")->check(CLI::NonNegativeNumber);
        sub->add_option("--threads", a.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
        sub->add_flag("--validate-only", a.validate_only, "check the config and exit");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    for (const char *id : ids)
        if (app.got_subcommand(id))
            return run(id, a);
    return 2;
}
