#include "curio/symbols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <json.hpp>

#include "curio/explorer.hpp"
#include "curio/io.hpp"

using nlohmann::json;

namespace curio::symbols {

namespace {

constexpr std::uint64_t kSeedPickTag = 0x64697374ULL;

std::vector<SymbolCount> enumerate_codes(const model::Mat& emb) {
    std::map<std::vector<int>, std::size_t> counts;
    for (Eigen::Index r = 0; r < emb.rows(); ++r) {
        std::vector<int> bits(static_cast<std::size_t>(emb.cols()));
        for (Eigen::Index c = 0; c < emb.cols(); ++c) bits[static_cast<std::size_t>(c)] = emb(r, c) > 0.0 ? 1 : 0;
        ++counts[bits];
    }
    std::vector<SymbolCount> out;
    out.reserve(counts.size());
    for (auto& [bits, n] : counts) out.push_back({SymbolCode{bits}, n});
    return out;
}

}  // namespace

std::string SymbolCode::str() const {
    std::string s;
    s.reserve(bits.size());
    for (int b : bits) s += b ? '1' : '0';
    return s;
}

SymbolCode binarize(const model::Vec& emb) {
    SymbolCode code;
    code.bits.resize(static_cast<std::size_t>(emb.size()));
    for (Eigen::Index i = 0; i < emb.size(); ++i) code.bits[static_cast<std::size_t>(i)] = emb(i) > 0.0 ? 1 : 0;
    return code;
}

std::vector<SymbolCount> enumerate_action_symbols(const model::ModelParams& params, const Dataset& data) {
    if (data.empty()) throw InputError("enumerate_action_symbols: empty dataset");
    return enumerate_codes(
        model::encode_batch(params.act_enc, params.cfg, model::dataset_actions(data), model::Mode::eval));
}

std::vector<SymbolCount> enumerate_object_symbols(const model::ModelParams& params, const Dataset& data) {
    if (data.empty()) throw InputError("enumerate_object_symbols: empty dataset");
    return enumerate_codes(
        model::encode_batch(params.obj_enc, params.cfg, model::dataset_objects(data), model::Mode::eval));
}

void DistillConfig::validate() const {
    if (!(step_size > 0.0)) throw ConfigError("distill: step_size must be positive");
    if (iterations < 0) throw ConfigError("distill: iterations must be >= 0");
    if (seed_count < 1) throw ConfigError("distill: seed_count must be >= 1");
    if (!(residual_bound > 0.0)) throw ConfigError("distill: residual_bound must be positive");
}

DistilledPrimitive distill(const model::ModelParams& params, const SymbolCode& code,
                           const std::vector<ActionParams>& seed_actions, const DistillConfig& cfg) {
    cfg.validate();
    if (seed_actions.empty()) throw InputError("distill: no seed actions");
    if (code.bits.size() != static_cast<std::size_t>(params.cfg.action_code_bits))
        throw InputError("distill: code width does not match the action encoder");

    model::Vec target(params.cfg.action_code_bits);
    for (int i = 0; i < params.cfg.action_code_bits; ++i)
        target(i) = 2.0 * code.bits[static_cast<std::size_t>(i)] - 1.0;

    const Eigen::Index n = static_cast<Eigen::Index>(seed_actions.size());
    model::Mat A(n, kActionDim);
    for (Eigen::Index r = 0; r < n; ++r)
        for (std::size_t d = 0; d < kActionDim; ++d)
            A(r, static_cast<Eigen::Index>(d)) = seed_actions[static_cast<std::size_t>(r)].v[d];

    model::Mat best_A = A;
    model::Vec best_mse = model::Vec::Constant(n, std::numeric_limits<double>::infinity());

    model::Mat dA(n, kActionDim);
    for (int it = 0;; ++it) {
        const model::Vec mse = model::action_embedding_mse_grad(params, A, target, dA);
        for (Eigen::Index r = 0; r < n; ++r) {
            if (mse(r) < best_mse(r)) {
                best_mse(r) = mse(r);
                best_A.row(r) = A.row(r);
            }
        }
        if (it == cfg.iterations) break;
        A -= cfg.step_size * dA;
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(kActionDim); ++d) {
                double& v = A(r, d);
                v = (d % 4 == 3) ? std::clamp(v, explorer::kGripLo, explorer::kGripHi)
                                 : std::clamp(v, explorer::kOffsetLo, explorer::kOffsetHi);
            }
        }
    }

    Eigen::Index win = 0;
    best_mse.minCoeff(&win);
    DistilledPrimitive prim;
    prim.code = code;
    for (std::size_t d = 0; d < kActionDim; ++d) prim.action.v[d] = best_A(win, static_cast<Eigen::Index>(d));
    prim.residual = best_mse(win);
    prim.accepted = prim.residual < cfg.residual_bound;
    return prim;
}

std::string annotate(const DistilledPrimitive& primitive, const world::WorldConfig& world_cfg) {
    world_cfg.validate();
    WorldState state;
    ObjectSpec spec;
    spec.s_x = 0.5 * (world_cfg.dim_min + world_cfg.dim_max);
    spec.s_y = spec.s_x;
    spec.d = spec.s_x;
    spec.type = 0;
    state.objects.push_back({spec, Pose{0.0, 0.0, spec.d / 2.0}});
    state.target_index = 0;

    world::WorldConfig quiet = world_cfg;
    quiet.noise_sigma = 0.0;
    world::ExecTrace trace;
    const auto [final_state, eff] = world::execute_traced(quiet, state, primitive.action, trace);
    (void)final_state;

    if (world::total_effect_magnitude(eff) < world_cfg.effect_threshold) return "null";

    constexpr double kLiftEps = 0.01;
    if (eff.dz > kLiftEps &&
        std::abs(eff.dz) >= std::max(std::abs(eff.dx), std::abs(eff.dy)))
        return "grasp";
    if (trace.max_lift > kLiftEps && std::abs(eff.dz) < kLiftEps) return "pick-and-place";

    // planar labels relative to the approach direction
    double ux = -primitive.action.x(0), uy = -primitive.action.y(0);
    double norm = std::hypot(ux, uy);
    if (norm < 1e-9) {
        ux = primitive.action.x(1) - primitive.action.x(0);
        uy = primitive.action.y(1) - primitive.action.y(0);
        norm = std::hypot(ux, uy);
    }
    if (norm < 1e-9) {
        ux = 1.0;
        uy = 0.0;
        norm = 1.0;
    }
    ux /= norm;
    uy /= norm;
    const double along = eff.dx * ux + eff.dy * uy;
    const double across = eff.dx * -uy + eff.dy * ux;  // positive = left of approach
    if (along >= std::abs(across)) return "forward-push";
    if (-along >= std::abs(across)) return "pull";
    return across > 0.0 ? "left-push" : "right-push";
}

PrimitiveLibrary build_library(const model::ModelParams& params, const Dataset& training_set,
                               const world::WorldConfig& world_cfg, const DistillConfig& cfg,
                               std::uint64_t seed) {
    cfg.validate();
    if (training_set.empty()) throw InputError("build_library: empty training set");

    PrimitiveLibrary lib;
    lib.action_symbols = enumerate_action_symbols(params, training_set);
    lib.object_symbols = enumerate_object_symbols(params, training_set);

    for (std::size_t ci = 0; ci < lib.action_symbols.size(); ++ci) {
        Rng rng(Rng::derive(seed, {kSeedPickTag, static_cast<std::uint64_t>(ci)}));
        std::vector<ActionParams> seeds(static_cast<std::size_t>(cfg.seed_count));
        for (auto& a : seeds) {
            const Transition& t = training_set[rng.index(training_set.size())];
            a.v = t.action;
        }
        DistilledPrimitive prim = distill(params, lib.action_symbols[ci].code, seeds, cfg);
        if (!prim.accepted) continue;
        prim.label = annotate(prim, world_cfg);
        lib.primitives.push_back(std::move(prim));
    }
    return lib;
}

void save_library(const std::filesystem::path& path, const PrimitiveLibrary& lib) {
    json prims = json::array();
    for (const DistilledPrimitive& p : lib.primitives) {
        prims.push_back({{"code", p.code.bits},
                         {"action", p.action.v},
                         {"residual", p.residual},
                         {"label", p.label}});
    }
    auto counts = [](const std::vector<SymbolCount>& v) {
        json arr = json::array();
        for (const SymbolCount& s : v) arr.push_back({{"code", s.code.bits}, {"count", s.count}});
        return arr;
    };
    const json j = {{"version", 1},
                    {"config_hash", to_hex(lib.config_hash)},
                    {"primitives", prims},
                    {"action_symbols", counts(lib.action_symbols)},
                    {"object_symbols", counts(lib.object_symbols)}};
    io::atomic_write(path, j.dump(2) + "\n");
}

PrimitiveLibrary load_library(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(io::read_file(path));
    } catch (const json::exception& e) {
        throw ArtifactError("library: parse error in " + path.string() + ": " + e.what());
    }
    PrimitiveLibrary lib;
    try {
        if (j.at("version").get<int>() != 1) throw ArtifactError("library: unsupported version");
        const std::string hex = j.at("config_hash").get<std::string>();
        if (hex.size() != 16) throw ArtifactError("library: malformed config hash");
        lib.config_hash = 0;
        for (char c : hex) {
            int d;
            if (c >= '0' && c <= '9')
                d = c - '0';
            else if (c >= 'a' && c <= 'f')
                d = c - 'a' + 10;
            else
                throw ArtifactError("library: malformed config hash");
            lib.config_hash = (lib.config_hash << 4) | static_cast<std::uint64_t>(d);
        }
        for (const json& e : j.at("primitives")) {
            DistilledPrimitive p;
            e.at("code").get_to(p.code.bits);
            const auto action = e.at("action").get<std::vector<double>>();
            if (action.size() != kActionDim) throw ArtifactError("library: bad action width");
            std::copy(action.begin(), action.end(), p.action.v.begin());
            e.at("residual").get_to(p.residual);
            e.at("label").get_to(p.label);
            p.accepted = true;
            lib.primitives.push_back(std::move(p));
        }
        auto read_counts = [](const json& arr) {
            std::vector<SymbolCount> v;
            for (const json& e : arr) {
                SymbolCount s;
                e.at("code").get_to(s.code.bits);
                e.at("count").get_to(s.count);
                v.push_back(std::move(s));
            }
            return v;
        };
        lib.action_symbols = read_counts(j.at("action_symbols"));
        lib.object_symbols = read_counts(j.at("object_symbols"));
    } catch (const json::exception& e) {
        throw ArtifactError("library: malformed content in " + path.string() + ": " + e.what());
    }
    return lib;
}

}  // namespace curio::symbols
