#include "curio/config.hpp"

#include <json.hpp>

#include "curio/io.hpp"

using nlohmann::json;

namespace curio::config {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* ctx) {
    if (!j.is_object()) throw ConfigError(std::string(ctx) + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

json world_to_json(const world::WorldConfig& w) {
    return {{"dim_min", w.dim_min},
            {"dim_max", w.dim_max},
            {"grasp_radius", w.grasp_radius},
            {"sweep_resolution", w.sweep_resolution},
            {"noise_sigma", w.noise_sigma},
            {"workspace_extent", w.workspace_extent},
            {"effect_threshold", w.effect_threshold}};
}

void world_from_json(const json& j, world::WorldConfig& w) {
    check_keys(j,
               {"dim_min", "dim_max", "grasp_radius", "sweep_resolution", "noise_sigma",
                "workspace_extent", "effect_threshold"},
               "world");
    read(j, "dim_min", w.dim_min);
    read(j, "dim_max", w.dim_max);
    read(j, "grasp_radius", w.grasp_radius);
    read(j, "sweep_resolution", w.sweep_resolution);
    read(j, "noise_sigma", w.noise_sigma);
    read(j, "workspace_extent", w.workspace_extent);
    read(j, "effect_threshold", w.effect_threshold);
}

json model_to_json(const model::EncoderConfig& m) {
    return {{"hidden_width", m.hidden_width},
            {"hidden_layers", m.hidden_layers},
            {"object_code_bits", m.object_code_bits},
            {"action_code_bits", m.action_code_bits},
            {"dropout_rate", m.dropout_rate},
            {"temperature", m.temperature},
            {"loss_coefficient", m.loss_coefficient},
            {"logvar_clamp", m.logvar_clamp},
            {"bn_momentum", m.bn_momentum},
            {"norm_eps", m.norm_eps},
            {"straight_through_binarize", m.straight_through_binarize}};
}

void model_from_json(const json& j, model::EncoderConfig& m) {
    check_keys(j,
               {"hidden_width", "hidden_layers", "object_code_bits", "action_code_bits",
                "dropout_rate", "temperature", "loss_coefficient", "logvar_clamp", "bn_momentum",
                "norm_eps", "straight_through_binarize"},
               "model");
    read(j, "hidden_width", m.hidden_width);
    read(j, "hidden_layers", m.hidden_layers);
    read(j, "object_code_bits", m.object_code_bits);
    read(j, "action_code_bits", m.action_code_bits);
    read(j, "dropout_rate", m.dropout_rate);
    read(j, "temperature", m.temperature);
    read(j, "loss_coefficient", m.loss_coefficient);
    read(j, "logvar_clamp", m.logvar_clamp);
    read(j, "bn_momentum", m.bn_momentum);
    read(j, "norm_eps", m.norm_eps);
    read(j, "straight_through_binarize", m.straight_through_binarize);
}

json train_to_json(const model::TrainConfig& t) {
    return {{"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"epochs", t.epochs},
            {"clip_norm", t.clip_norm}};
}

void train_from_json(const json& j, model::TrainConfig& t) {
    check_keys(j, {"batch_size", "learning_rate", "epochs", "clip_norm"}, "train");
    read(j, "batch_size", t.batch_size);
    read(j, "learning_rate", t.learning_rate);
    read(j, "epochs", t.epochs);
    read(j, "clip_norm", t.clip_norm);
}

json explore_to_json(const explorer::ExplorationConfig& e) {
    return {{"strategy", explorer::strategy_name(e.strategy)},
            {"candidates", e.candidates},
            {"total_steps", e.total_steps},
            {"retrain_interval", e.retrain_interval},
            {"epochs_per_retrain", e.epochs_per_retrain},
            {"active_threshold", e.active_threshold}};
}

void explore_from_json(const json& j, explorer::ExplorationConfig& e) {
    check_keys(j,
               {"strategy", "candidates", "total_steps", "retrain_interval", "epochs_per_retrain",
                "active_threshold"},
               "explore");
    if (j.contains("strategy")) e.strategy = explorer::strategy_from_name(j.at("strategy").get<std::string>());
    read(j, "candidates", e.candidates);
    read(j, "total_steps", e.total_steps);
    read(j, "retrain_interval", e.retrain_interval);
    read(j, "epochs_per_retrain", e.epochs_per_retrain);
    read(j, "active_threshold", e.active_threshold);
}

json distill_to_json(const symbols::DistillConfig& d) {
    return {{"step_size", d.step_size},
            {"iterations", d.iterations},
            {"seed_count", d.seed_count},
            {"residual_bound", d.residual_bound}};
}

void distill_from_json(const json& j, symbols::DistillConfig& d) {
    check_keys(j, {"step_size", "iterations", "seed_count", "residual_bound"}, "distill");
    read(j, "step_size", d.step_size);
    read(j, "iterations", d.iterations);
    read(j, "seed_count", d.seed_count);
    read(j, "residual_bound", d.residual_bound);
}

json planner_to_json(const planner::PlannerConfig& p) {
    return {{"goal_threshold", p.goal_threshold}, {"max_depth", p.max_depth}};
}

void planner_from_json(const json& j, planner::PlannerConfig& p) {
    check_keys(j, {"goal_threshold", "max_depth"}, "planner");
    read(j, "goal_threshold", p.goal_threshold);
    read(j, "max_depth", p.max_depth);
}

json eval_to_json(const EvalConfig& e) {
    return {{"test_set_size", e.test_set_size},
            {"effect_threshold", e.effect_threshold},
            {"tasks_per_condition", e.tasks_per_condition},
            {"max_attempt_factor", e.max_attempt_factor}};
}

void eval_from_json(const json& j, EvalConfig& e) {
    check_keys(j, {"test_set_size", "effect_threshold", "tasks_per_condition", "max_attempt_factor"},
               "eval");
    read(j, "test_set_size", e.test_set_size);
    read(j, "effect_threshold", e.effect_threshold);
    read(j, "tasks_per_condition", e.tasks_per_condition);
    read(j, "max_attempt_factor", e.max_attempt_factor);
}

json config_to_json(const ExperimentConfig& cfg) {
    return {{"world", world_to_json(cfg.world)},
            {"model", model_to_json(cfg.model)},
            {"train", train_to_json(cfg.train)},
            {"explore", explore_to_json(cfg.explore)},
            {"distill", distill_to_json(cfg.distill)},
            {"planner", planner_to_json(cfg.planner)},
            {"eval", eval_to_json(cfg.eval)},
            {"seeds", cfg.seeds},
            {"output_dir", cfg.output_dir},
            {"jobs", cfg.jobs}};
}

}  // namespace

void EvalConfig::validate() const {
    if (test_set_size < 1) throw ConfigError("eval: test_set_size must be >= 1");
    if (!(effect_threshold >= 0.0)) throw ConfigError("eval: effect_threshold must be >= 0");
    if (tasks_per_condition < 1) throw ConfigError("eval: tasks_per_condition must be >= 1");
    if (max_attempt_factor < 1) throw ConfigError("eval: max_attempt_factor must be >= 1");
}

void ExperimentConfig::validate() const {
    world.validate();
    model.validate();
    explore.validate();
    distill.validate();
    planner.validate();
    eval.validate();
    if (train.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(train.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (train.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(train.clip_norm > 0.0)) throw ConfigError("train: clip_norm must be positive");
    if (seeds.empty()) throw ConfigError("config: at least one seed required");
    if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
}

ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    ExperimentConfig cfg;
    try {
        check_keys(j,
                   {"world", "model", "train", "explore", "distill", "planner", "eval", "seeds",
                    "output_dir", "jobs"},
                   "config");
        if (j.contains("world")) world_from_json(j.at("world"), cfg.world);
        if (j.contains("model")) model_from_json(j.at("model"), cfg.model);
        if (j.contains("train")) train_from_json(j.at("train"), cfg.train);
        if (j.contains("explore")) explore_from_json(j.at("explore"), cfg.explore);
        if (j.contains("distill")) distill_from_json(j.at("distill"), cfg.distill);
        if (j.contains("planner")) planner_from_json(j.at("planner"), cfg.planner);
        if (j.contains("eval")) eval_from_json(j.at("eval"), cfg.eval);
        read(j, "seeds", cfg.seeds);
        read(j, "output_dir", cfg.output_dir);
        read(j, "jobs", cfg.jobs);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config type error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const ArtifactError& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text);
}

std::string dump_config(const ExperimentConfig& cfg) {
    return config_to_json(cfg).dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
    json j = config_to_json(cfg);
    j.erase("output_dir");
    j.erase("jobs");
    return fnv1a64(j.dump());
}

std::string dump_model_config(const model::EncoderConfig& m) { return model_to_json(m).dump(); }

model::EncoderConfig parse_model_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config parse error: ") + e.what());
    }
    model::EncoderConfig m;
    try {
        model_from_json(j, m);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config type error: ") + e.what());
    }
    return m;
}

}  // namespace curio::config
