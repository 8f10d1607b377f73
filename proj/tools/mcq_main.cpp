// Command-line front end; everything goes through the shared C API.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcq/mcq.h"

namespace {

struct ConfigHandle {
    mcq_config* ptr = nullptr;
    ~ConfigHandle() { mcq_config_free(ptr); }
};

int fail_with(mcq_status status) {
    std::fprintf(stderr, "error (%s): %s\n", mcq_status_name(status),
                 mcq_last_error());
    return status == MCQ_ERR_VERIFY_FAILED ? 1 : 2;
}

int load_config(const std::string& path, const std::vector<std::string>& sets,
                ConfigHandle& out) {
    mcq_status st = path.empty() ? mcq_config_create(&out.ptr)
                                 : mcq_config_load(path.c_str(), &out.ptr);
    if (st != MCQ_OK) return fail_with(st);
    for (const auto& assignment : sets) {
        st = mcq_config_set(out.ptr, assignment.c_str());
        if (st != MCQ_OK) return fail_with(st);
    }
    return 0;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::string tok;
    for (char c : text + ",") {
        if (c == ',') {
            if (!tok.empty()) seeds.push_back(std::stoull(tok));
            tok.clear();
        } else {
            tok += c;
        }
    }
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mildly conservative offline RL engine"};
    app.require_subcommand(1);
    app.set_version_flag("--version", mcq_version());

    std::string config_path;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir = "out";
    std::string checkpoint;
    std::string seeds_text;
    std::vector<std::string> run_dirs;

    auto add_common = [&](CLI::App* cmd, bool needs_seed) {
        cmd->add_option("--config", config_path, "Config file (INI sections)");
        cmd->add_option("--set", sets,
                        "Override a config key, e.g. --set train.lambda=0.95");
        auto* opt = cmd->add_option_function<std::uint64_t>(
            "--seed",
            [&](std::uint64_t v) {
                seed = v;
                seed_given = true;
            },
            "Random seed");
        if (needs_seed) opt->required();
    };

    auto* verify = app.add_subcommand("verify", "Run the proposition certificates");
    add_common(verify, true);
    verify->add_option("--out", out_dir, "Output directory");

    auto* gen = app.add_subcommand("gen-dataset", "Generate a dataset");
    add_common(gen, true);

    auto* train = app.add_subcommand("train", "Offline training");
    add_common(train, false);
    train->add_option("--out", out_dir, "Output directory");
    train->add_option("--seeds", seeds_text,
                      "Comma-separated seed fan-out (writes <out>_seed<k>)");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(eval, true);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();

    auto* finetune = app.add_subcommand("finetune", "Offline-to-online fine-tuning");
    add_common(finetune, true);
    finetune->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    finetune->add_option("--out", out_dir, "Output directory");

    auto* plots = app.add_subcommand("export-plots",
                                     "Convert run metrics to figure CSV series");
    plots->add_option("--runs", run_dirs, "Run directories")->required();
    plots->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (plots->parsed()) {
        std::vector<const char*> dirs;
        for (const auto& d : run_dirs) dirs.push_back(d.c_str());
        const mcq_status st = mcq_export_plots(dirs.data(), dirs.size(),
                                               out_dir.c_str());
        if (st != MCQ_OK) return fail_with(st);
        std::printf("wrote figure series to %s\n", out_dir.c_str());
        return 0;
    }

    ConfigHandle cfg;
    if (int rc = load_config(config_path, sets, cfg)) return rc;

    if (verify->parsed()) {
        int all_hold = 0;
        const mcq_status st = mcq_verify(cfg.ptr, seed, out_dir.c_str(), &all_hold);
        if (st != MCQ_OK) return fail_with(st);
        std::printf("certificates written to %s (%s)\n", out_dir.c_str(),
                    all_hold ? "all hold" : "VIOLATION");
        return all_hold ? 0 : 1;
    }

    if (gen->parsed()) {
        char path[4096];
        const mcq_status st = mcq_generate_dataset(cfg.ptr, seed, path, sizeof(path));
        if (st != MCQ_OK) return fail_with(st);
        std::printf("dataset written to %s\n", path);
        return 0;
    }

    if (train->parsed()) {
        std::vector<std::uint64_t> seeds;
        if (!seeds_text.empty()) {
            seeds = parse_seed_list(seeds_text);
        } else if (seed_given) {
            seeds = {seed};
        } else {
            std::fprintf(stderr, "train needs --seed or --seeds\n");
            return 2;
        }
        for (std::uint64_t s : seeds) {
            const std::string dir = seeds.size() == 1
                                        ? out_dir
                                        : out_dir + "_seed" + std::to_string(s);
            const mcq_status st = mcq_train(cfg.ptr, s, dir.c_str());
            if (st != MCQ_OK) return fail_with(st);
            std::printf("run (seed %llu) written to %s\n",
                        static_cast<unsigned long long>(s), dir.c_str());
        }
        return 0;
    }

    if (eval->parsed()) {
        mcq_eval_result res;
        const mcq_status st = mcq_evaluate(cfg.ptr, seed, checkpoint.c_str(), &res);
        if (st != MCQ_OK) return fail_with(st);
        std::printf("mean_return %.6f  std %.6f  normalized_score %.3f\n",
                    res.mean_return, res.std_return, res.normalized_score);
        return 0;
    }

    if (finetune->parsed()) {
        const mcq_status st =
            mcq_finetune(cfg.ptr, seed, checkpoint.c_str(), out_dir.c_str());
        if (st != MCQ_OK) return fail_with(st);
        std::printf("fine-tuned run written to %s\n", out_dir.c_str());
        return 0;
    }

    return 2;
}
