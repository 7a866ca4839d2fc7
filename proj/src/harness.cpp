#include "curio/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "curio/checkpoint.hpp"
#include "curio/dataset.hpp"
#include "curio/io.hpp"
#include "curio/model.hpp"

using nlohmann::json;

namespace curio::harness {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kTestTag = 0x74657374ULL;
constexpr std::uint64_t kTaskTag = 0x7461736bULL;
constexpr std::uint64_t kExploreTag = 0x6578706cULL;
constexpr std::uint64_t kLibraryTag = 0x6c696272ULL;

constexpr explorer::Strategy kStrategies[] = {explorer::Strategy::curiosity,
                                              explorer::Strategy::random,
                                              explorer::Strategy::active};

std::string cell_dir_name(explorer::Strategy s, std::uint64_t seed) {
    return std::string(explorer::strategy_name(s)) + "_seed" + std::to_string(seed);
}

std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::string pad(std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
}

std::vector<std::string> sorted_labels(const std::vector<std::string>& labels) {
    std::vector<std::string> out = labels;
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

struct CellTaskSets {
    const std::vector<planner::PlanningProblem>* single = nullptr;
    const std::vector<planner::PlanningProblem>* dbl = nullptr;
};

void run_planning(const model::ModelParams& params, const symbols::PrimitiveLibrary& lib,
                  const world::WorldConfig& world_cfg,
                  const std::vector<planner::PlanningProblem>& tasks, double& found_rate,
                  double& success_rate) {
    found_rate = 0.0;
    success_rate = 0.0;
    if (tasks.empty() || lib.primitives.empty()) return;
    std::size_t found = 0, succeeded = 0;
    for (const planner::PlanningProblem& task : tasks) {
        const planner::Plan plan = planner::bfs_plan(params, lib.primitives, task);
        if (!plan.found) continue;
        ++found;
        if (planner::execute_plan(world_cfg, lib.primitives, plan, task).success) ++succeeded;
    }
    found_rate = static_cast<double>(found) / static_cast<double>(tasks.size());
    success_rate = static_cast<double>(succeeded) / static_cast<double>(tasks.size());
}

CellResult evaluate_cell(const config::ExperimentConfig& cfg, const model::ModelParams& params,
                         const Dataset& dataset, const Dataset& training_set,
                         explorer::Strategy strategy, std::uint64_t seed, const Dataset& test_set,
                         const CellTaskSets& tasks) {
    CellResult cell;
    cell.strategy = strategy;
    cell.seed = seed;
    cell.dataset_rows = dataset.size();
    cell.training_rows = training_set.size();
    cell.dataset_hash = dataset::dataset_hash(dataset);
    cell.mae = evaluate_prediction_error(params, test_set);

    symbols::PrimitiveLibrary lib;
    if (!training_set.empty())
        lib = symbols::build_library(params, training_set, cfg.world, cfg.distill,
                                     Rng::derive(seed, {kLibraryTag}));
    lib.config_hash = config::config_hash(cfg);
    cell.action_symbols = lib.action_symbols;
    cell.accepted_primitives = lib.primitives.size();
    for (const symbols::DistilledPrimitive& p : lib.primitives) cell.labels.push_back(p.label);

    run_planning(params, lib, cfg.world, *tasks.single, cell.plan_found_single,
                 cell.exec_success_single);
    run_planning(params, lib, cfg.world, *tasks.dbl, cell.plan_found_double,
                 cell.exec_success_double);

    const fs::path dir = fs::path(cfg.output_dir) / cell_dir_name(strategy, seed);
    dataset::save_csv(dir / "dataset.csv", dataset, lib.config_hash);
    ckpt::save(dir / "checkpoint.ckpt", params, lib.config_hash);
    symbols::save_library(dir / "library.json", lib);
    return cell;
}

}  // namespace

Dataset generate_test_set(const world::WorldConfig& world_cfg, int count, double threshold,
                          std::uint64_t seed, int max_attempt_factor) {
    world_cfg.validate();
    if (count < 1) throw InputError("generate_test_set: count must be >= 1");
    if (!(threshold >= 0.0)) throw InputError("generate_test_set: threshold must be >= 0");
    if (max_attempt_factor < 1) throw InputError("generate_test_set: max_attempt_factor must be >= 1");

    Rng rng(Rng::derive(seed, {kTestTag}));
    Dataset out;
    out.reserve(static_cast<std::size_t>(count));
    const long budget = static_cast<long>(count) * max_attempt_factor;
    for (long attempt = 0; attempt < budget && out.size() < static_cast<std::size_t>(count); ++attempt) {
        const WorldState state = world::spawn_random(world_cfg, rng.next_u64(), 1);
        const ActionParams action = explorer::select_random_action(rng);
        const auto [next, effect] = world::execute(world_cfg, state, action);
        (void)next;
        if (world::total_effect_magnitude(effect) < threshold) continue;
        Transition t;
        t.object = state.target().spec.features();
        t.action = action.v;
        t.effect = std::array<double, 3>{effect.dx, effect.dy, effect.dz};
        out.push_back(t);
    }
    if (out.size() < static_cast<std::size_t>(count))
        throw GenerationError("generate_test_set: attempt budget exhausted");
    return out;
}

std::array<double, 3> evaluate_prediction_error(const model::ModelParams& params, const Dataset& test_set) {
    if (test_set.empty()) throw InputError("evaluate_prediction_error: empty test set");
    const model::Mat pred =
        model::predict_mean_batch(params, model::dataset_objects(test_set), model::dataset_actions(test_set));
    const model::Mat err = (pred - model::dataset_effects(test_set)).cwiseAbs();
    return {err.col(0).mean(), err.col(1).mean(), err.col(2).mean()};
}

std::vector<planner::PlanningProblem> generate_tasks(const world::WorldConfig& world_cfg,
                                                     const planner::PlannerConfig& planner_cfg,
                                                     int count, std::size_t object_count,
                                                     std::uint64_t seed, int max_attempt_factor) {
    world_cfg.validate();
    planner_cfg.validate();
    if (count < 1) throw InputError("generate_tasks: count must be >= 1");
    if (object_count < 1) throw InputError("generate_tasks: object_count must be >= 1");
    if (max_attempt_factor < 1) throw InputError("generate_tasks: max_attempt_factor must be >= 1");

    Rng rng(Rng::derive(seed, {kTaskTag, static_cast<std::uint64_t>(object_count)}));
    std::vector<planner::PlanningProblem> tasks;
    tasks.reserve(static_cast<std::size_t>(count));
    const long budget = static_cast<long>(count) * max_attempt_factor;
    for (long attempt = 0; attempt < budget && tasks.size() < static_cast<std::size_t>(count); ++attempt) {
        WorldState initial = world::spawn_random(world_cfg, rng.next_u64(), object_count);
        initial.target_index = 0;

        const int actions =
            object_count == 1
                ? 1
                : 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(std::max(planner_cfg.max_depth, 1))));
        WorldState s = initial;
        for (int a = 0; a < actions; ++a) {
            s.target_index = rng.index(object_count);
            auto [next, eff] = world::execute(world_cfg, s, explorer::select_random_action(rng));
            (void)eff;
            s = std::move(next);
        }

        bool moved = false;
        for (std::size_t i = 0; i < object_count && !moved; ++i) {
            const Pose& a = initial.objects[i].pose;
            const Pose& b = s.objects[i].pose;
            const double d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) +
                              (a.z - b.z) * (a.z - b.z);
            moved = d2 > planner_cfg.goal_threshold * planner_cfg.goal_threshold;
        }
        if (!moved) continue;

        planner::PlanningProblem task;
        task.goal_positions.reserve(object_count);
        for (const auto& e : s.objects) task.goal_positions.push_back(e.pose);
        task.initial = std::move(initial);
        task.threshold = planner_cfg.goal_threshold;
        task.max_depth = planner_cfg.max_depth;
        tasks.push_back(std::move(task));
    }
    if (tasks.size() < static_cast<std::size_t>(count))
        throw GenerationError("generate_tasks: attempt budget exhausted");
    return tasks;
}

std::string Report::render_text() const {
    std::string out;
    out += "symbol discovery comparison\n";
    out += "version ";
    out += version;
    out += "  config ";
    out += to_hex(config_hash);
    out += "\n\n";

    out += "prediction error (mean absolute, meters)\n";
    out += pad("strategy", 11) + pad("seed", 6) + pad("x", 10) + pad("y", 10) + pad("z", 10) +
           pad("rows", 8) + "trained\n";
    for (const CellResult& c : cells) {
        out += pad(explorer::strategy_name(c.strategy), 11);
        out += pad(std::to_string(c.seed), 6);
        for (double m : c.mae) out += pad(format_double(m, 6), 10);
        out += pad(std::to_string(c.dataset_rows), 8);
        out += std::to_string(c.training_rows);
        out += '\n';
    }
    out += '\n';

    out += "discovered symbols\n";
    out += pad("strategy", 11) + pad("seed", 6) + pad("codes", 7) + pad("accepted", 10) + "labels\n";
    for (const CellResult& c : cells) {
        out += pad(explorer::strategy_name(c.strategy), 11);
        out += pad(std::to_string(c.seed), 6);
        out += pad(std::to_string(c.action_symbols.size()), 7);
        out += pad(std::to_string(c.accepted_primitives), 10);
        const std::vector<std::string> distinct = sorted_labels(c.labels);
        for (std::size_t i = 0; i < distinct.size(); ++i) {
            if (i) out += ',';
            out += distinct[i];
        }
        out += '\n';
    }
    out += '\n';

    out += "planning (fraction of tasks)\n";
    out += pad("strategy", 11) + pad("seed", 6) + pad("found1", 8) + pad("exec1", 8) +
           pad("found2", 8) + "exec2\n";
    for (const CellResult& c : cells) {
        out += pad(explorer::strategy_name(c.strategy), 11);
        out += pad(std::to_string(c.seed), 6);
        out += pad(format_double(c.plan_found_single, 3), 8);
        out += pad(format_double(c.exec_success_single, 3), 8);
        out += pad(format_double(c.plan_found_double, 3), 8);
        out += format_double(c.exec_success_double, 3);
        out += '\n';
    }
    return out;
}

std::string Report::render_jsonl() const {
    std::string out;
    for (const CellResult& c : cells) {
        json syms = json::array();
        for (const symbols::SymbolCount& s : c.action_symbols)
            syms.push_back({{"code", s.code.str()}, {"count", s.count}});
        const json j = {{"version", version},
                        {"config_hash", to_hex(config_hash)},
                        {"strategy", explorer::strategy_name(c.strategy)},
                        {"seed", c.seed},
                        {"mae", c.mae},
                        {"dataset_rows", c.dataset_rows},
                        {"training_rows", c.training_rows},
                        {"dataset_hash", to_hex(c.dataset_hash)},
                        {"action_symbols", syms},
                        {"labels", c.labels},
                        {"accepted_primitives", c.accepted_primitives},
                        {"plan_found", {{"single", c.plan_found_single}, {"double", c.plan_found_double}}},
                        {"exec_success",
                         {{"single", c.exec_success_single}, {"double", c.exec_success_double}}}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

Report run_comparison(const config::ExperimentConfig& cfg) {
    cfg.validate();
    const std::uint64_t hash = config::config_hash(cfg);

    struct SeedData {
        Dataset test_set;
        std::vector<planner::PlanningProblem> single, dbl;
    };
    std::vector<SeedData> per_seed(cfg.seeds.size());
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
        const std::uint64_t seed = cfg.seeds[si];
        per_seed[si].test_set = generate_test_set(cfg.world, cfg.eval.test_set_size,
                                                  cfg.eval.effect_threshold, seed,
                                                  cfg.eval.max_attempt_factor);
        per_seed[si].single = generate_tasks(cfg.world, cfg.planner, cfg.eval.tasks_per_condition, 1,
                                             seed, cfg.eval.max_attempt_factor);
        per_seed[si].dbl = generate_tasks(cfg.world, cfg.planner, cfg.eval.tasks_per_condition, 2,
                                          seed, cfg.eval.max_attempt_factor);
    }

    Report report;
    report.config_hash = hash;
    report.version = kVersion;
    report.cells.resize(3 * cfg.seeds.size());

    std::vector<std::pair<std::size_t, std::size_t>> slots;  // (strategy idx, seed idx)
    for (std::size_t ti = 0; ti < 3; ++ti)
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) slots.push_back({ti, si});

    std::exception_ptr failure;
    std::mutex failure_mu;
    auto run_slot = [&](std::size_t slot) {
        const auto [ti, si] = slots[slot];
        const explorer::Strategy strategy = kStrategies[ti];
        const std::uint64_t seed = cfg.seeds[si];
        try {
            explorer::ExplorationConfig ec = cfg.explore;
            ec.strategy = strategy;
            const explorer::ExplorationResult res = explorer::run_exploration(
                ec, cfg.world, cfg.model, cfg.train,
                Rng::derive(seed, {kExploreTag, static_cast<std::uint64_t>(ti)}));
            report.cells[slot] =
                evaluate_cell(cfg, res.params, res.dataset, res.training_set, strategy, seed,
                              per_seed[si].test_set, {&per_seed[si].single, &per_seed[si].dbl});
            const fs::path dir = fs::path(cfg.output_dir) / cell_dir_name(strategy, seed);
            io::atomic_write(dir / "metrics.jsonl", explorer::metrics_jsonl(res.metrics));
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mu);
            if (!failure) failure = std::current_exception();
        }
    };

    if (cfg.jobs <= 1) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            run_slot(i);
            if (failure) std::rethrow_exception(failure);
        }
    } else {
        std::vector<std::thread> workers;
        const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), slots.size());
        for (std::size_t w = 0; w < jobs; ++w)
            workers.emplace_back([&, w] {
                for (std::size_t i = w; i < slots.size(); i += jobs) run_slot(i);
            });
        for (std::thread& t : workers) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    io::atomic_write(fs::path(cfg.output_dir) / "config.json", config::dump_config(cfg));
    io::atomic_write(fs::path(cfg.output_dir) / "report.txt", report.render_text());
    io::atomic_write(fs::path(cfg.output_dir) / "report.jsonl", report.render_jsonl());
    return report;
}

Report rebuild_report(const config::ExperimentConfig& cfg) {
    cfg.validate();
    const std::uint64_t hash = config::config_hash(cfg);

    Report report;
    report.config_hash = hash;
    report.version = kVersion;

    for (std::size_t ti = 0; ti < 3; ++ti) {
        const explorer::Strategy strategy = kStrategies[ti];
        for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
            const std::uint64_t seed = cfg.seeds[si];
            const fs::path dir = fs::path(cfg.output_dir) / cell_dir_name(strategy, seed);

            std::uint64_t ds_hash = 0;
            const Dataset dataset = dataset::load_csv(dir / "dataset.csv", &ds_hash);
            if (ds_hash != hash)
                throw ArtifactError("rebuild_report: config hash mismatch in " +
                                    (dir / "dataset.csv").string());
            const ckpt::Checkpoint cp = ckpt::load(dir / "checkpoint.ckpt");
            if (cp.config_hash != hash)
                throw ArtifactError("rebuild_report: config hash mismatch in " +
                                    (dir / "checkpoint.ckpt").string());
            const symbols::PrimitiveLibrary lib = symbols::load_library(dir / "library.json");
            if (lib.config_hash != hash)
                throw ArtifactError("rebuild_report: config hash mismatch in " +
                                    (dir / "library.json").string());

            const Dataset test_set =
                generate_test_set(cfg.world, cfg.eval.test_set_size, cfg.eval.effect_threshold, seed,
                                  cfg.eval.max_attempt_factor);
            const auto single = generate_tasks(cfg.world, cfg.planner, cfg.eval.tasks_per_condition,
                                               1, seed, cfg.eval.max_attempt_factor);
            const auto dbl = generate_tasks(cfg.world, cfg.planner, cfg.eval.tasks_per_condition, 2,
                                            seed, cfg.eval.max_attempt_factor);

            CellResult cell;
            cell.strategy = strategy;
            cell.seed = seed;
            cell.dataset_rows = dataset.size();
            cell.dataset_hash = dataset::dataset_hash(dataset);
            Dataset training;
            if (strategy == explorer::Strategy::active) {
                for (const Transition& t : dataset)
                    if (explorer::active_filter(t, cfg.explore.active_threshold)) training.push_back(t);
            } else {
                training = dataset;
            }
            cell.training_rows = training.size();
            cell.mae = evaluate_prediction_error(cp.params, test_set);
            cell.action_symbols = lib.action_symbols;
            cell.accepted_primitives = lib.primitives.size();
            for (const symbols::DistilledPrimitive& p : lib.primitives) cell.labels.push_back(p.label);
            run_planning(cp.params, lib, cfg.world, single, cell.plan_found_single,
                         cell.exec_success_single);
            run_planning(cp.params, lib, cfg.world, dbl, cell.plan_found_double,
                         cell.exec_success_double);
            report.cells.push_back(std::move(cell));
        }
    }

    io::atomic_write(fs::path(cfg.output_dir) / "report.txt", report.render_text());
    io::atomic_write(fs::path(cfg.output_dir) / "report.jsonl", report.render_jsonl());
    return report;
}

}  // namespace curio::harness
