#include "curio/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "curio/checkpoint.hpp"
#include "curio/config.hpp"
#include "curio/dataset.hpp"
#include "curio/harness.hpp"
#include "curio/io.hpp"

namespace curio::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kExploreTag = 0x6578706cULL;
constexpr std::uint64_t kLibraryTag = 0x6c696272ULL;

struct Common {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
    cmd->add_option("--config", c.config_path, "JSON experiment config (defaults when omitted)");
    if (with_out) cmd->add_option("--out", c.out_dir, "output directory");
    cmd->add_option("--seed", c.seed, "experiment seed override")->each([&](const std::string&) {
        c.seed_set = true;
    });
}

config::ExperimentConfig resolve_config(const Common& c) {
    config::ExperimentConfig cfg =
        c.config_path.empty() ? config::ExperimentConfig{} : config::load_config(c.config_path);
    if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
    if (c.seed_set) cfg.seeds = {c.seed};
    cfg.validate();
    return cfg;
}

std::size_t strategy_rank(explorer::Strategy s) {
    switch (s) {
        case explorer::Strategy::curiosity: return 0;
        case explorer::Strategy::random: return 1;
        case explorer::Strategy::active: return 2;
    }
    return 0;
}

void require_hash(std::uint64_t got, std::uint64_t want, const std::string& what) {
    if (got != want)
        throw ArtifactError(what + ": config hash " + to_hex(got) + " does not match " + to_hex(want));
}

int run(int argc, const char* const* argv) {
    CLI::App app{"effect-prediction symbol discovery pipeline"};
    app.require_subcommand(1);

    // explore
    auto* explore_cmd = app.add_subcommand("explore", "run one exploration strategy");
    Common ec;
    std::string strategy_str;
    int steps_override = -1;
    add_common(explore_cmd, ec);
    explore_cmd->add_option("--strategy", strategy_str, "curiosity | random | active");
    explore_cmd->add_option("--steps", steps_override, "override explore.total_steps");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a saved dataset");
    Common tc;
    std::string train_dataset, resume_path, head_str = "distribution";
    int train_epochs = -1;
    add_common(train_cmd, tc);
    train_cmd->add_option("--dataset", train_dataset, "dataset CSV")->required();
    train_cmd->add_option("--resume", resume_path, "checkpoint to continue from");
    train_cmd->add_option("--head", head_str, "distribution | point");
    train_cmd->add_option("--epochs", train_epochs, "override train.epochs");

    // test-set
    auto* testset_cmd = app.add_subcommand("test-set", "generate the held-out evaluation set");
    Common sc;
    add_common(testset_cmd, sc);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "prediction error of a checkpoint on a test set");
    Common evc;
    std::string eval_ckpt, eval_testset;
    add_common(eval_cmd, evc, false);
    eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval_cmd->add_option("--test-set", eval_testset, "test-set CSV")->required();

    // distill
    auto* distill_cmd = app.add_subcommand("distill", "distill symbols into a primitive library");
    Common dc;
    std::string distill_ckpt, distill_dataset;
    add_common(distill_cmd, dc);
    distill_cmd->add_option("--checkpoint", distill_ckpt, "model checkpoint")->required();
    distill_cmd->add_option("--dataset", distill_dataset, "training dataset CSV")->required();

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "plan and execute generated tasks");
    Common pc;
    std::string plan_ckpt, plan_library;
    std::size_t plan_objects = 1;
    int plan_count = -1;
    add_common(plan_cmd, pc);
    plan_cmd->add_option("--checkpoint", plan_ckpt, "model checkpoint")->required();
    plan_cmd->add_option("--library", plan_library, "primitive library JSON")->required();
    plan_cmd->add_option("--objects", plan_objects, "objects per task (1 or 2)");
    plan_cmd->add_option("--count", plan_count, "override eval.tasks_per_condition");

    // compare
    auto* compare_cmd = app.add_subcommand("compare", "full three-strategy comparison");
    Common cc;
    add_common(compare_cmd, cc);

    // report
    auto* report_cmd = app.add_subcommand("report", "rebuild the report from saved artifacts");
    Common rc;
    add_common(report_cmd, rc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (explore_cmd->parsed()) {
        config::ExperimentConfig cfg = resolve_config(ec);
        if (!strategy_str.empty()) cfg.explore.strategy = explorer::strategy_from_name(strategy_str);
        if (steps_override >= 0) cfg.explore.total_steps = steps_override;
        cfg.validate();
        const std::uint64_t hash = config::config_hash(cfg);
        const std::uint64_t seed = cfg.seeds[0];
        const std::uint64_t run_seed =
            Rng::derive(seed, {kExploreTag, static_cast<std::uint64_t>(strategy_rank(cfg.explore.strategy))});
        const explorer::ExplorationResult res =
            explorer::run_exploration(cfg.explore, cfg.world, cfg.model, cfg.train, run_seed);
        const fs::path out = cfg.output_dir;
        dataset::save_csv(out / "dataset.csv", res.dataset, hash);
        ckpt::save(out / "checkpoint.ckpt", res.params, hash);
        io::atomic_write(out / "metrics.jsonl", explorer::metrics_jsonl(res.metrics));
        std::printf("explored %zu steps (%s), dataset %zu rows, training %zu rows -> %s\n",
                    res.dataset.size(), explorer::strategy_name(cfg.explore.strategy),
                    res.dataset.size(), res.training_set.size(), out.string().c_str());
        return 0;
    }

    if (train_cmd->parsed()) {
        config::ExperimentConfig cfg = resolve_config(tc);
        if (train_epochs >= 0) cfg.train.epochs = train_epochs;
        cfg.validate();
        const std::uint64_t hash = config::config_hash(cfg);
        std::uint64_t ds_hash = 0;
        const Dataset data = dataset::load_csv(train_dataset, &ds_hash);
        require_hash(ds_hash, hash, "dataset");
        if (data.empty()) throw InputError("train: dataset has no rows");

        model::ModelParams params;
        if (!resume_path.empty()) {
            ckpt::Checkpoint cp = ckpt::load(resume_path);
            require_hash(cp.config_hash, hash, "checkpoint");
            params = std::move(cp.params);
        } else {
            model::HeadMode head;
            if (head_str == "distribution")
                head = model::HeadMode::distribution;
            else if (head_str == "point")
                head = model::HeadMode::point;
            else
                throw ConfigError("unknown head '" + head_str + "'");
            params = model::init_params(cfg.model, head, cfg.seeds[0]);
        }
        model::TrainConfig train = cfg.train;
        train.seed = Rng::derive(cfg.seeds[0], {0x747261696eULL, static_cast<std::uint64_t>(params.train_steps)});
        const std::vector<double> losses = model::train_epochs(params, data, train);
        const double loss = losses.empty() ? 0.0 : losses.back();
        const fs::path out = cfg.output_dir;
        ckpt::save(out / "checkpoint.ckpt", params, hash);
        std::printf("trained %d epochs on %zu rows, final epoch loss %.6f -> %s\n", train.epochs,
                    data.size(), loss, (out / "checkpoint.ckpt").string().c_str());
        return 0;
    }

    if (testset_cmd->parsed()) {
        const config::ExperimentConfig cfg = resolve_config(sc);
        const std::uint64_t hash = config::config_hash(cfg);
        const Dataset data =
            harness::generate_test_set(cfg.world, cfg.eval.test_set_size, cfg.eval.effect_threshold,
                                       cfg.seeds[0], cfg.eval.max_attempt_factor);
        const fs::path out = cfg.output_dir;
        dataset::save_csv(out / "test_set.csv", data, hash);
        std::printf("retained %zu transitions -> %s\n", data.size(),
                    (out / "test_set.csv").string().c_str());
        return 0;
    }

    if (eval_cmd->parsed()) {
        const config::ExperimentConfig cfg = resolve_config(evc);
        const std::uint64_t hash = config::config_hash(cfg);
        const ckpt::Checkpoint cp = ckpt::load(eval_ckpt);
        require_hash(cp.config_hash, hash, "checkpoint");
        std::uint64_t ds_hash = 0;
        const Dataset test_set = dataset::load_csv(eval_testset, &ds_hash);
        require_hash(ds_hash, hash, "test set");
        const auto mae = harness::evaluate_prediction_error(cp.params, test_set);
        std::printf("mae x %.6f  y %.6f  z %.6f over %zu rows\n", mae[0], mae[1], mae[2],
                    test_set.size());
        return 0;
    }

    if (distill_cmd->parsed()) {
        const config::ExperimentConfig cfg = resolve_config(dc);
        const std::uint64_t hash = config::config_hash(cfg);
        const ckpt::Checkpoint cp = ckpt::load(distill_ckpt);
        require_hash(cp.config_hash, hash, "checkpoint");
        std::uint64_t ds_hash = 0;
        Dataset training = dataset::load_csv(distill_dataset, &ds_hash);
        require_hash(ds_hash, hash, "dataset");
        if (cfg.explore.strategy == explorer::Strategy::active) {
            // the stored dataset is the raw stream; training used the
            // magnitude-filtered subset
            Dataset filtered;
            for (const Transition& t : training)
                if (explorer::active_filter(t, cfg.explore.active_threshold)) filtered.push_back(t);
            training = std::move(filtered);
        }
        symbols::PrimitiveLibrary lib =
            symbols::build_library(cp.params, training, cfg.world, cfg.distill,
                                   Rng::derive(cfg.seeds[0], {kLibraryTag}));
        lib.config_hash = hash;
        if (lib.primitives.empty())
            throw DistillError("distill: no symbol reached the residual bound");
        const fs::path out = cfg.output_dir;
        symbols::save_library(out / "library.json", lib);
        std::printf("distilled %zu of %zu codes -> %s\n", lib.primitives.size(),
                    lib.action_symbols.size(), (out / "library.json").string().c_str());
        for (const symbols::DistilledPrimitive& p : lib.primitives)
            std::printf("  %s  residual %.4f  %s\n", p.code.str().c_str(), p.residual,
                        p.label.c_str());
        return 0;
    }

    if (plan_cmd->parsed()) {
        const config::ExperimentConfig cfg = resolve_config(pc);
        const std::uint64_t hash = config::config_hash(cfg);
        const ckpt::Checkpoint cp = ckpt::load(plan_ckpt);
        require_hash(cp.config_hash, hash, "checkpoint");
        const symbols::PrimitiveLibrary lib = symbols::load_library(plan_library);
        require_hash(lib.config_hash, hash, "library");
        if (lib.primitives.empty()) throw InputError("plan: library has no primitives");
        const int count = plan_count > 0 ? plan_count : cfg.eval.tasks_per_condition;
        const auto tasks = harness::generate_tasks(cfg.world, cfg.planner, count, plan_objects,
                                                   cfg.seeds[0], cfg.eval.max_attempt_factor);
        std::size_t found = 0, ok = 0;
        for (const auto& task : tasks) {
            const planner::Plan plan = planner::bfs_plan(cp.params, lib.primitives, task);
            if (!plan.found) continue;
            ++found;
            if (planner::execute_plan(cfg.world, lib.primitives, plan, task).success) ++ok;
        }
        std::printf("%zu-object tasks: planned %zu/%zu, executed %zu/%zu\n", plan_objects, found,
                    tasks.size(), ok, tasks.size());
        return 0;
    }

    if (compare_cmd->parsed()) {
        const config::ExperimentConfig cfg = resolve_config(cc);
        const harness::Report report = harness::run_comparison(cfg);
        std::fputs(report.render_text().c_str(), stdout);
        return 0;
    }

    if (report_cmd->parsed()) {
        const config::ExperimentConfig cfg = resolve_config(rc);
        const harness::Report report = harness::rebuild_report(cfg);
        std::fputs(report.render_text().c_str(), stdout);
        return 0;
    }

    return 2;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    try {
        return run(argc, argv);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 3;
    } catch (const ArtifactError& e) {
        std::fprintf(stderr, "artifact error: %s\n", e.what());
        return 4;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}

}  // namespace curio::cli
