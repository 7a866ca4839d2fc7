#include "curio/explorer.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace curio::explorer {

namespace {

constexpr double kHalfLog2PiE = 1.4189385332046727418;  // 0.5 * ln(2*pi*e)

constexpr std::uint64_t kSpawnTag = 0x737061776eULL;
constexpr std::uint64_t kActionTag = 0x616374696f6eULL;
constexpr std::uint64_t kTrainTag = 0x747261696eULL;
constexpr std::uint64_t kInitTag = 0x696e6974ULL;

}  // namespace

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::curiosity: return "curiosity";
        case Strategy::random: return "random";
        case Strategy::active: return "active";
    }
    throw InputError("unknown strategy value");
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "curiosity") return Strategy::curiosity;
    if (name == "random") return Strategy::random;
    if (name == "active") return Strategy::active;
    throw ConfigError("unknown strategy '" + name + "'");
}

model::HeadMode head_for(Strategy s) {
    return s == Strategy::curiosity ? model::HeadMode::distribution : model::HeadMode::point;
}

void ExplorationConfig::validate() const {
    if (candidates < 1) throw ConfigError("explore: candidates must be >= 1");
    if (total_steps < 0) throw ConfigError("explore: total_steps must be >= 0");
    if (retrain_interval < 1) throw ConfigError("explore: retrain_interval must be >= 1");
    if (epochs_per_retrain < 0) throw ConfigError("explore: epochs_per_retrain must be >= 0");
    if (!(active_threshold >= 0.0)) throw ConfigError("explore: active_threshold must be >= 0");
}

double gaussian_entropy(double log_var) { return kHalfLog2PiE + 0.5 * log_var; }

double mean_entropy(const model::EffectDist& dist) {
    return (gaussian_entropy(dist.log_var[0]) + gaussian_entropy(dist.log_var[1]) +
            gaussian_entropy(dist.log_var[2])) /
           3.0;
}

ActionParams sample_candidate(Rng& rng) {
    ActionParams a;
    for (std::size_t w = 0; w < kWaypoints; ++w) {
        for (std::size_t axis = 0; axis < 3; ++axis) a.v[4 * w + axis] = rng.uniform(kOffsetLo, kOffsetHi);
        a.v[4 * w + 3] = rng.uniform(kGripLo, kGripHi);
    }
    return a;
}

ActionParams select_random_action(Rng& rng) { return sample_candidate(rng); }

void clamp_to_box(ActionParams& a) {
    for (std::size_t w = 0; w < kWaypoints; ++w) {
        for (std::size_t axis = 0; axis < 3; ++axis) {
            double& v = a.v[4 * w + axis];
            v = std::clamp(v, kOffsetLo, kOffsetHi);
        }
        double& g = a.v[4 * w + 3];
        g = std::clamp(g, kGripLo, kGripHi);
    }
}

CuriosityPick select_curious_action(const model::ModelParams& params,
                                    const std::array<double, 4>& object_features, Rng& rng,
                                    int candidates) {
    if (candidates < 1) throw InputError("select_curious_action: candidates must be >= 1");
    if (params.head != model::HeadMode::distribution)
        throw ModeError("select_curious_action: needs the distribution head");

    std::vector<ActionParams> cands(static_cast<std::size_t>(candidates));
    model::Mat A(candidates, kActionDim);
    for (int i = 0; i < candidates; ++i) {
        cands[static_cast<std::size_t>(i)] = sample_candidate(rng);
        for (std::size_t d = 0; d < kActionDim; ++d)
            A(i, static_cast<Eigen::Index>(d)) = cands[static_cast<std::size_t>(i)].v[d];
    }

    model::Mat O(1, 4);
    for (int d = 0; d < 4; ++d) O(0, d) = object_features[static_cast<std::size_t>(d)];
    const model::Mat z_o = model::encode_batch(params.obj_enc, params.cfg, O, model::Mode::eval);
    const model::Mat z_a = model::encode_batch(params.act_enc, params.cfg, A, model::Mode::eval);

    model::Mat Z(candidates, params.cfg.embedding_dim());
    Z.leftCols(params.cfg.object_code_bits) = z_o.row(0).replicate(candidates, 1);
    Z.rightCols(params.cfg.action_code_bits) = z_a;
    if (params.cfg.straight_through_binarize)
        Z = (Z.array() > 0.0).cast<double>().matrix() * 2.0 - model::Mat::Ones(Z.rows(), Z.cols());

    const model::Mat out = model::decode_batch(params.dec, params.cfg, Z, model::Mode::eval);

    const double c = params.cfg.logvar_clamp;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    double sum = 0.0;
    for (int i = 0; i < candidates; ++i) {
        double h = 0.0;
        for (int axis = 0; axis < 3; ++axis)
            h += gaussian_entropy(std::clamp(out(i, 3 + axis), -c, c));
        h /= 3.0;
        sum += h;
        if (h > best) {
            best = h;
            best_i = static_cast<std::size_t>(i);
        }
    }

    CuriosityPick pick;
    pick.action = cands[best_i];
    pick.index = best_i;
    pick.selected_entropy = best;
    pick.mean_candidate_entropy = sum / candidates;
    return pick;
}

bool active_filter(const Transition& t, double threshold) {
    const Effect e{t.effect[0], t.effect[1], t.effect[2]};
    return world::total_effect_magnitude(e) >= threshold;
}

std::string metrics_jsonl(const std::vector<MetricsRow>& rows) {
    std::string out;
    for (const MetricsRow& r : rows) {
        nlohmann::json j = {{"step", r.step},
                            {"strategy", strategy_name(r.strategy)},
                            {"dataset_size", r.dataset_size},
                            {"training_size", r.training_size},
                            {"retrained", r.retrained}};
        if (r.has_entropy) {
            j["mean_candidate_entropy"] = r.mean_candidate_entropy;
            j["selected_entropy"] = r.selected_entropy;
        }
        if (r.retrained) j["train_loss"] = r.train_loss;
        out += j.dump();
        out += '\n';
    }
    return out;
}

ExplorationResult run_exploration(const ExplorationConfig& explore,
                                  const world::WorldConfig& world_cfg,
                                  const model::EncoderConfig& model_cfg,
                                  const model::TrainConfig& train_cfg, std::uint64_t seed) {
    explore.validate();
    world_cfg.validate();
    model_cfg.validate();

    ExplorationResult res;
    res.params = model::init_params(model_cfg, head_for(explore.strategy),
                                    Rng::derive(seed, {kInitTag}));
    Rng spawn_rng(Rng::derive(seed, {kSpawnTag}));
    Rng action_rng(Rng::derive(seed, {kActionTag}));

    double last_loss = 0.0;
    int retrain_round = 0;
    for (int step = 0; step < explore.total_steps; ++step) {
        WorldState state = world::spawn_random(world_cfg, spawn_rng.next_u64(), 1);
        const std::array<double, 4> feats = state.target().spec.features();

        MetricsRow row;
        row.step = step;
        row.strategy = explore.strategy;

        ActionParams action;
        if (explore.strategy == Strategy::curiosity) {
            const CuriosityPick pick =
                select_curious_action(res.params, feats, action_rng, explore.candidates);
            action = pick.action;
            row.has_entropy = true;
            row.selected_entropy = pick.selected_entropy;
            row.mean_candidate_entropy = pick.mean_candidate_entropy;
        } else {
            action = select_random_action(action_rng);
        }

        const auto [next, effect] = world::execute(world_cfg, state, action);
        (void)next;
        Transition t;
        t.object = feats;
        t.action = action.v;
        t.effect = std::array<double, 3>{effect.dx, effect.dy, effect.dz};
        res.dataset.push_back(t);
        if (explore.strategy != Strategy::active || active_filter(t, explore.active_threshold))
            res.training_set.push_back(t);

        if ((step + 1) % explore.retrain_interval == 0 && !res.training_set.empty() &&
            explore.epochs_per_retrain > 0) {
            model::TrainConfig tc = train_cfg;
            tc.epochs = explore.epochs_per_retrain;
            tc.seed = Rng::derive(seed, {kTrainTag, static_cast<std::uint64_t>(retrain_round)});
            const std::vector<double> losses = model::train_epochs(res.params, res.training_set, tc);
            if (!losses.empty()) last_loss = losses.back();
            ++retrain_round;
            row.retrained = true;
            row.train_loss = last_loss;
        }
        row.dataset_size = res.dataset.size();
        row.training_size = res.training_set.size();
        res.metrics.push_back(row);
    }
    return res;
}

}  // namespace curio::explorer
