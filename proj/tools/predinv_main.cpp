#include "predinv/config.hpp"
#include "predinv/errors.hpp"
#include "predinv/models/models.hpp"
#include "predinv/oracle/server.hpp"
#include "predinv/recipes.hpp"
#include "predinv/runner.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

// --config accepts a JSON file path or a built-in recipe name
json resolve_config_arg(const std::string& arg, const std::string& output_dir,
                        const std::string& data_dir, long long seed) {
    json cfg;
    if (std::filesystem::exists(arg)) {
        cfg = predinv::config::load_config_file(arg);
    } else {
        cfg = predinv::recipes::get(arg);
    }
    if (!output_dir.empty()) cfg["output_dir"] = output_dir;
    if (!data_dir.empty()) cfg["data"]["cache_dir"] = data_dir;
    if (seed >= 0) cfg["seed"] = seed;
    return cfg;
}

int run_stages(const json& cfg, const std::vector<std::string>& stages) {
    auto summary = predinv::runner::run(cfg, stages);
    for (const auto& s : summary.stages) {
        std::fprintf(stderr, "[%s] %s\n", s.skipped ? "skip" : " ran", s.name.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"predinv - classifier inversion toolkit: train image classifiers, then "
                 "reconstruct inputs and training classes from their (truncated) predictions"};
    app.require_subcommand(1);

    std::string config_arg, output_dir, data_dir;
    long long seed = -1;
    auto add_common = [&](CLI::App* cmd, bool config_required = true) {
        cmd->add_option("-c,--config", config_arg, "config file or recipe name")->required(config_required);
        cmd->add_option("--output-dir", output_dir, "override output_dir");
        cmd->add_option("--data-dir", data_dir, "override data.cache_dir");
        cmd->add_option("--seed", seed, "override the global seed");
    };

    // data prepare
    auto* data_cmd = app.add_subcommand("data", "dataset operations");
    auto* prepare = data_cmd->add_subcommand("prepare", "load, split and summarize the datasets");
    add_common(prepare);

    // train {classifier, inversion, joint}
    auto* train_cmd = app.add_subcommand("train", "training regimes");
    auto* t_cls = train_cmd->add_subcommand("classifier", "train the victim classifier");
    add_common(t_cls);
    auto* t_inv = train_cmd->add_subcommand("inversion", "train inversion arms against the blackbox oracle");
    add_common(t_inv);
    std::string arm_filter;
    t_inv->add_option("--arm", arm_filter, "train only this arm");
    auto* t_joint = train_cmd->add_subcommand("joint", "jointly train classifier and inversion model");
    add_common(t_joint);

    // serve
    auto* serve = app.add_subcommand("serve", "run the blackbox prediction service");
    std::string checkpoint, host = "127.0.0.1";
    int serve_m = 0, port = 8710, max_batch = 256;
    serve->add_option("--checkpoint", checkpoint, "classifier checkpoint")->required();
    serve->add_option("--m", serve_m, "victim-side truncation (0 = full vectors)");
    serve->add_option("--port", port, "listen port");
    serve->add_option("--host", host, "bind address");
    serve->add_option("--max-batch", max_batch, "largest accepted batch");

    // attack {reconstruct, classinfer, mia}
    auto* attack_cmd = app.add_subcommand("attack", "attack entry points");
    auto* a_rec = attack_cmd->add_subcommand("reconstruct", "invert truncated predictions of victim data");
    add_common(a_rec);
    auto* a_ci = attack_cmd->add_subcommand("classinfer", "produce a representative image per class");
    add_common(a_ci);
    auto* a_mia = attack_cmd->add_subcommand("mia", "optimization-based inversion baseline");
    add_common(a_mia);

    // report / validate / run / recipes
    auto* report = app.add_subcommand("report", "compute metrics and emit the report");
    add_common(report);
    auto* validate = app.add_subcommand("validate", "validate a config without executing");
    add_common(validate);
    auto* run = app.add_subcommand("run", "run a whole recipe or config");
    std::string run_arg;
    run->add_option("recipe", run_arg, "recipe name or config path")->required();
    run->add_option("--output-dir", output_dir, "override output_dir");
    run->add_option("--data-dir", data_dir, "override data.cache_dir");
    run->add_option("--seed", seed, "override the global seed");
    auto* recipes_cmd = app.add_subcommand("recipes", "list built-in recipes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (recipes_cmd->parsed()) {
            for (const auto& n : predinv::recipes::names()) std::printf("%s\n", n.c_str());
            return 0;
        }
        if (serve->parsed()) {
            auto model = predinv::models::load_classifier(checkpoint);
            predinv::oracle::OracleConfig cfg;
            cfg.server_m = serve_m;
            cfg.host = host;
            cfg.port = port;
            cfg.max_batch = max_batch;
            cfg.checkpoint = checkpoint;
            predinv::oracle::serve_oracle(std::move(model), cfg);
            return 0;
        }
        if (validate->parsed()) {
            const json cfg = resolve_config_arg(config_arg, output_dir, data_dir, seed);
            auto diags = predinv::config::validate(cfg);
            for (const auto& d : diags) {
                std::fprintf(stderr, "%s: %s\n", d.path.empty() ? "<root>" : d.path.c_str(),
                             d.message.c_str());
            }
            if (!diags.empty()) return 2;
            std::printf("config ok\n");
            return 0;
        }
        if (run->parsed()) {
            return run_stages(resolve_config_arg(run_arg, output_dir, data_dir, seed), {});
        }

        const json cfg = resolve_config_arg(config_arg, output_dir, data_dir, seed);
        if (prepare->parsed()) return run_stages(cfg, {"data"});
        if (t_cls->parsed()) return run_stages(cfg, {"data", "classifier"});
        if (t_inv->parsed()) {
            if (arm_filter.empty()) return run_stages(cfg, {"inversion"});
            return run_stages(cfg, {"inversion:" + arm_filter});
        }
        if (t_joint->parsed()) return run_stages(cfg, {"joint"});
        if (a_rec->parsed()) return run_stages(cfg, {"attack:reconstruct"});
        if (a_ci->parsed()) return run_stages(cfg, {"attack:classinfer"});
        if (a_mia->parsed()) return run_stages(cfg, {"attack:mia"});
        if (report->parsed()) return run_stages(cfg, {"report"});
        std::fprintf(stderr, "no subcommand matched\n");
        return 1;
    } catch (const predinv::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
