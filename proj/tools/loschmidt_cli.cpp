// Command-line front end: one subcommand per experiment kind, plus `run`
// (kind from preset/config) and `presets`.  Exit status: 0 success, 1 hard
// failure, 2 invalid config, 3 completed with flagged outputs.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loschmidt/loschmidt.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string preset_name;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key = value lines)");
    cmd->add_option("--preset", args.preset_name, "named experiment preset");
    cmd->add_option("--seed", args.seed, "override ensemble seed");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--workers", args.workers, "worker thread count")->default_val(1u);
    cmd->add_option("--override", args.overrides, "key=value config override (repeatable)");
}

loschmidt::ExperimentConfig build_config(const CommonArgs& args,
                                         std::optional<loschmidt::ExperimentKind> forced_kind) {
    loschmidt::ExperimentConfig cfg;
    bool have_base = false;
    if (!args.preset_name.empty()) {
        cfg = loschmidt::preset(args.preset_name);
        have_base = true;
    }
    if (!args.config_path.empty()) {
        std::ifstream in(args.config_path, std::ios::binary);
        if (!in) throw std::invalid_argument("cannot read config file " + args.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        if (have_base) {
            for (const auto& [k, v] : loschmidt::parse_kv(ss.str()))
                loschmidt::apply_setting(cfg, k, v);
        } else {
            cfg = loschmidt::parse_config(ss.str());
        }
        have_base = true;
    }
    for (const auto& ov : args.overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--override needs key=value, got '" + ov + "'");
        loschmidt::apply_setting(cfg, ov.substr(0, eq), ov.substr(eq + 1));
    }
    if (args.seed) cfg.seed = *args.seed;
    if (forced_kind) {
        if (have_base && cfg.kind != *forced_kind && !args.preset_name.empty())
            throw std::invalid_argument("preset '" + args.preset_name +
                                        "' is a different experiment kind than this subcommand");
        cfg.kind = *forced_kind;
    } else if (!have_base) {
        throw std::invalid_argument("run: needs --preset or --config to pick the experiment kind");
    }
    return cfg;
}

int execute(const CommonArgs& args, std::optional<loschmidt::ExperimentKind> forced_kind) {
    loschmidt::ExperimentConfig cfg;
    try {
        cfg = build_config(args, forced_kind);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    try {
        const loschmidt::RunManifest man = loschmidt::run(cfg, args.out_dir, args.workers);
        std::cout << "wrote " << man.outputs.size() << " outputs to " << args.out_dir
                  << " (config " << man.config_hash << ", " << loschmidt::format_double(man.wall_seconds)
                  << " s)\n";
        for (const auto& e : man.outputs)
            if (e.flagged) std::cout << "flagged: " << e.file << ": " << e.note << "\n";
        return man.any_flagged() ? 3 : 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"loschmidt: action statistics and fidelity decay of the perturbed standard map"};
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
        std::optional<loschmidt::ExperimentKind> kind;
    };
    const std::vector<Sub> subs = {
        {"variance-vs-time", "ensemble variance of the action difference vs time",
         loschmidt::ExperimentKind::VarianceVsTime},
        {"pair-variance-vs-time", "pair second moment vs time at fixed separation",
         loschmidt::ExperimentKind::PairVarianceVsTime},
        {"pair-variance-vs-separation", "pair second moment vs separation at fixed time",
         loschmidt::ExperimentKind::PairVarianceVsSeparation},
        {"correlators", "potential and force correlators with K, D, C_V_inf",
         loschmidt::ExperimentKind::Correlators},
        {"dr-fidelity", "dephasing-representation fidelity (Monte Carlo and/or quadrature)",
         loschmidt::ExperimentKind::DrFidelity},
        {"quantum-fidelity", "exact quantum fidelity on the n-state torus",
         loschmidt::ExperimentKind::QuantumFidelity},
        {"compare", "DR vs quantum vs closed-form prediction", loschmidt::ExperimentKind::Compare},
        {"predict", "closed-form decay law from regime parameters",
         loschmidt::ExperimentKind::Predict},
        {"run", "run whatever the preset/config specifies", std::nullopt},
    };

    std::vector<std::pair<CommonArgs, std::optional<loschmidt::ExperimentKind>>> plans(subs.size());
    std::vector<CLI::App*> cmds;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        CLI::App* cmd = app.add_subcommand(subs[i].name, subs[i].help);
        plans[i].second = subs[i].kind;
        add_common(cmd, plans[i].first);
        cmds.push_back(cmd);
    }
    CLI::App* list_cmd = app.add_subcommand("presets", "list named presets");

    CLI11_PARSE(app, argc, argv);

    if (list_cmd->parsed()) {
        for (const auto& name : loschmidt::preset_names()) {
            const auto cfg = loschmidt::preset(name);
            std::printf("%-28s k=%-5g eps=%-7g kind=%s\n", name.c_str(), cfg.map.k,
                        cfg.map.epsilon, loschmidt::config_detail::kind_name(cfg.kind));
        }
        return 0;
    }
    for (std::size_t i = 0; i < cmds.size(); ++i)
        if (cmds[i]->parsed()) return execute(plans[i].first, plans[i].second);
    return 1;
}
