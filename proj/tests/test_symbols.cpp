#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "curio/explorer.hpp"
#include "curio/io.hpp"
#include "curio/symbols.hpp"

using namespace curio;

namespace {

model::EncoderConfig tiny_model() {
    model::EncoderConfig cfg;
    cfg.hidden_width = 16;
    cfg.hidden_layers = 2;
    return cfg;
}

Dataset random_dataset(std::uint64_t seed, std::size_t rows) {
    Rng rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < rows; ++i) {
        Transition t;
        t.object = {rng.uniform(0.02, 0.08), rng.uniform(0.02, 0.08), rng.uniform(0.02, 0.08),
                    rng.coin() ? 1.0 : 0.0};
        const ActionParams a = explorer::sample_candidate(rng);
        t.action = a.v;
        t.effect = {rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02), rng.uniform(-0.02, 0.02)};
        d.push_back(t);
    }
    return d;
}

symbols::DistilledPrimitive prim_with(std::array<double, 12> v) {
    symbols::DistilledPrimitive p;
    p.action.v = v;
    p.accepted = true;
    return p;
}

std::filesystem::path temp_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "curio_symbols_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("binarization thresholds at zero") {
    model::Vec e(3);
    e << 0.3, -0.2, 0.0;
    const symbols::SymbolCode code = symbols::binarize(e);
    CHECK(code.bits == std::vector<int>{1, 0, 0});
    CHECK(code.str() == "100");

    model::Vec tiny(2);
    tiny << 1e-300, -1e-300;
    CHECK(symbols::binarize(tiny).str() == "10");
}

TEST_CASE("symbol enumeration partitions the dataset") {
    const model::ModelParams p = model::init_params(tiny_model(), model::HeadMode::distribution, 3);
    const Dataset d = random_dataset(5, 200);

    const auto action_syms = symbols::enumerate_action_symbols(p, d);
    const auto object_syms = symbols::enumerate_object_symbols(p, d);

    std::size_t total = 0;
    for (const auto& s : action_syms) {
        CHECK(s.code.bits.size() == 3);
        CHECK(s.count >= 1);
        total += s.count;
    }
    CHECK(total == d.size());
    for (std::size_t i = 1; i < action_syms.size(); ++i)
        CHECK(action_syms[i - 1].code.bits < action_syms[i].code.bits);

    total = 0;
    for (const auto& s : object_syms) {
        CHECK(s.code.bits.size() == 2);
        total += s.count;
    }
    CHECK(total == d.size());

    // single row: exactly one code, and it matches the direct encoding
    Dataset one(d.begin(), d.begin() + 1);
    const auto single = symbols::enumerate_action_symbols(p, one);
    REQUIRE(single.size() == 1);
    CHECK(single[0].count == 1);
    CHECK(single[0].code == symbols::binarize(model::encode_action(p, one[0].action)));

    Dataset empty;
    CHECK_THROWS_AS(symbols::enumerate_action_symbols(p, empty), InputError);
    CHECK_THROWS_AS(symbols::enumerate_object_symbols(p, empty), InputError);
}

TEST_CASE("distill config validation") {
    symbols::DistillConfig cfg;
    cfg.validate();
    cfg.step_size = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = symbols::DistillConfig{};
    cfg.iterations = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = symbols::DistillConfig{};
    cfg.seed_count = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = symbols::DistillConfig{};
    cfg.residual_bound = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("distillation keeps the best iterate and stays in the box") {
    const model::ModelParams p = model::init_params(tiny_model(), model::HeadMode::distribution, 7);
    const std::uint64_t hash_before = model::params_hash(p);

    Rng rng(9);
    std::vector<ActionParams> seeds;
    for (int i = 0; i < 8; ++i) seeds.push_back(explorer::sample_candidate(rng));
    const symbols::SymbolCode code{{1, 0, 1}};

    // zero iterations: residual is the best initial seed error
    symbols::DistillConfig cfg;
    cfg.iterations = 0;
    const auto base = symbols::distill(p, code, seeds, cfg);
    {
        model::Mat A(8, kActionDim);
        for (int r = 0; r < 8; ++r)
            for (std::size_t c = 0; c < kActionDim; ++c)
                A(r, static_cast<Eigen::Index>(c)) = seeds[static_cast<std::size_t>(r)].v[c];
        model::Vec target(3);
        target << 1.0, -1.0, 1.0;
        model::Mat dA;
        const model::Vec mse = model::action_embedding_mse_grad(p, A, target, dA);
        CHECK(base.residual == doctest::Approx(mse.minCoeff()).epsilon(1e-12));
    }

    cfg.iterations = 100;
    const auto better = symbols::distill(p, code, seeds, cfg);
    CHECK(better.residual <= base.residual + 1e-15);
    CHECK(better.code == code);
    for (std::size_t w = 0; w < kWaypoints; ++w) {
        CHECK(better.action.x(w) >= explorer::kOffsetLo);
        CHECK(better.action.x(w) <= explorer::kOffsetHi);
        CHECK(better.action.y(w) >= explorer::kOffsetLo);
        CHECK(better.action.y(w) <= explorer::kOffsetHi);
        CHECK(better.action.z(w) >= explorer::kOffsetLo);
        CHECK(better.action.z(w) <= explorer::kOffsetHi);
        CHECK(better.action.g(w) >= explorer::kGripLo);
        CHECK(better.action.g(w) <= explorer::kGripHi);
    }

    // the encoder is frozen throughout
    CHECK(model::params_hash(p) == hash_before);

    // acceptance is a strict residual comparison
    cfg.residual_bound = better.residual;
    CHECK_FALSE(symbols::distill(p, code, seeds, cfg).accepted);
    cfg.residual_bound = better.residual * 1.0001 + 1e-12;
    CHECK(symbols::distill(p, code, seeds, cfg).accepted);

    CHECK_THROWS_AS(symbols::distill(p, code, {}, cfg), InputError);
    CHECK_THROWS_AS(symbols::distill(p, symbols::SymbolCode{{1, 0}}, seeds, cfg), InputError);
}

TEST_CASE("annotation classifies hand-built primitives") {
    const world::WorldConfig cfg;  // canonical object: 0.05 cube resting at z = 0.025

    // open gripper parked at the center: nothing moves
    CHECK(symbols::annotate(prim_with({0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1}), cfg) == "null");

    // a push that travels less than the effect threshold
    CHECK(symbols::annotate(
              prim_with({-0.05, 0, -0.024, 1, -0.021, 0, -0.024, 1, -0.021, 0, -0.024, 1}), cfg) ==
          "null");

    // grasp at the center and lift straight up
    CHECK(symbols::annotate(prim_with({0, 0, 0, 0, 0, 0, 0.05, 0, 0, 0, 0.05, 0}), cfg) == "grasp");

    // grasp, carry up and sideways, then release: net lift zero but max lift high
    CHECK(symbols::annotate(prim_with({0, 0, 0, 0, 0.04, 0, 0.04, 0, 0.04, 0, 0.04, 1}), cfg) ==
          "pick-and-place");

    // open sweep through the object along the approach direction
    CHECK(symbols::annotate(
              prim_with({-0.05, 0, -0.024, 1, 0, 0, -0.024, 1, 0, 0, -0.024, 1}), cfg) ==
          "forward-push");

    // grasp on approach, then drag back against the approach direction
    CHECK(symbols::annotate(prim_with({-0.05, 0, 0, 0, -0.02, 0, 0, 0, -0.05, 0, 0, 0}), cfg) ==
          "pull");

    // approach along +x, then drag to +y (the approach's left)
    CHECK(symbols::annotate(prim_with({-0.04, 0, 0, 1, 0, 0, 0, 0, 0, 0.04, 0, 0}), cfg) ==
          "left-push");

    // mirror image: drag to -y
    CHECK(symbols::annotate(prim_with({-0.04, 0, 0, 1, 0, 0, 0, 0, 0, -0.04, 0, 0}), cfg) ==
          "right-push");

    // zero first waypoint: approach direction falls back to the travel direction
    CHECK(symbols::annotate(
              prim_with({0, 0, -0.024, 1, 0.04, 0, -0.024, 1, 0.04, 0, -0.024, 1}), cfg) ==
          "forward-push");

    // no horizontal travel at all: final +x fallback
    CHECK(symbols::annotate(prim_with({0, 0, 0, 0, 0, 0, 0, 0, 0.04, 0, 0, 0}), cfg) ==
          "forward-push");

    // the annotation world is noise-free regardless of the config
    world::WorldConfig noisy = cfg;
    noisy.noise_sigma = 0.05;
    CHECK(symbols::annotate(prim_with({0, 0, 0, 0, 0, 0, 0.05, 0, 0, 0, 0.05, 0}), noisy) == "grasp");
}

TEST_CASE("library construction distills every accepted code deterministically") {
    const model::ModelParams p = model::init_params(tiny_model(), model::HeadMode::distribution, 11);
    const Dataset d = random_dataset(13, 150);
    const world::WorldConfig world;

    symbols::DistillConfig cfg;
    cfg.iterations = 20;
    cfg.seed_count = 8;
    cfg.residual_bound = 10.0;  // fresh encoder: accept everything

    const auto lib1 = symbols::build_library(p, d, world, cfg, 42);
    const auto lib2 = symbols::build_library(p, d, world, cfg, 42);

    CHECK(lib1.primitives.size() == lib1.action_symbols.size());
    REQUIRE(lib1.primitives.size() == lib2.primitives.size());
    for (std::size_t i = 0; i < lib1.primitives.size(); ++i) {
        CHECK(lib1.primitives[i].code == lib1.action_symbols[i].code);
        CHECK(lib1.primitives[i].accepted);
        CHECK_FALSE(lib1.primitives[i].label.empty());
        CHECK(lib1.primitives[i].residual == lib2.primitives[i].residual);
        CHECK(lib1.primitives[i].action.v == lib2.primitives[i].action.v);
        CHECK(lib1.primitives[i].label == lib2.primitives[i].label);
    }

    // a tight bound filters codes out instead of weakening them
    symbols::DistillConfig strict = cfg;
    strict.residual_bound = 1e-12;
    const auto lib3 = symbols::build_library(p, d, world, strict, 42);
    CHECK(lib3.primitives.empty());
    REQUIRE(lib3.action_symbols.size() == lib1.action_symbols.size());
    for (std::size_t i = 0; i < lib3.action_symbols.size(); ++i) {
        CHECK(lib3.action_symbols[i].code == lib1.action_symbols[i].code);
        CHECK(lib3.action_symbols[i].count == lib1.action_symbols[i].count);
    }

    Dataset empty;
    CHECK_THROWS_AS(symbols::build_library(p, empty, world, cfg, 42), InputError);
}

TEST_CASE("library json round-trips exactly") {
    const model::ModelParams p = model::init_params(tiny_model(), model::HeadMode::distribution, 17);
    const Dataset d = random_dataset(19, 100);
    symbols::DistillConfig cfg;
    cfg.iterations = 10;
    cfg.seed_count = 4;
    cfg.residual_bound = 10.0;
    symbols::PrimitiveLibrary lib = symbols::build_library(p, d, world::WorldConfig{}, cfg, 1);
    lib.config_hash = 0xdeadbeefcafe1234ULL;

    const auto path = temp_dir() / "library.json";
    symbols::save_library(path, lib);
    const symbols::PrimitiveLibrary back = symbols::load_library(path);

    CHECK(back.config_hash == lib.config_hash);
    REQUIRE(back.primitives.size() == lib.primitives.size());
    for (std::size_t i = 0; i < lib.primitives.size(); ++i) {
        CHECK(back.primitives[i].code == lib.primitives[i].code);
        CHECK(back.primitives[i].action.v == lib.primitives[i].action.v);
        CHECK(back.primitives[i].residual == lib.primitives[i].residual);
        CHECK(back.primitives[i].label == lib.primitives[i].label);
        CHECK(back.primitives[i].accepted);
    }
    REQUIRE(back.action_symbols.size() == lib.action_symbols.size());
    for (std::size_t i = 0; i < lib.action_symbols.size(); ++i) {
        CHECK(back.action_symbols[i].code == lib.action_symbols[i].code);
        CHECK(back.action_symbols[i].count == lib.action_symbols[i].count);
    }
    CHECK(back.object_symbols.size() == lib.object_symbols.size());
}

TEST_CASE("library loading rejects damaged files") {
    const auto dir = temp_dir();
    CHECK_THROWS_AS(symbols::load_library(dir / "missing.json"), ArtifactError);

    const auto bad_json = dir / "bad.json";
    io::atomic_write(bad_json, "{ not json");
    CHECK_THROWS_AS(symbols::load_library(bad_json), ArtifactError);

    const auto bad_version = dir / "bad_version.json";
    io::atomic_write(bad_version,
                     "{\"version\": 2, \"config_hash\": \"0000000000000000\", \"primitives\": [], "
                     "\"action_symbols\": [], \"object_symbols\": []}\n");
    CHECK_THROWS_AS(symbols::load_library(bad_version), ArtifactError);

    const auto bad_hash = dir / "bad_hash.json";
    io::atomic_write(bad_hash,
                     "{\"version\": 1, \"config_hash\": \"xyz\", \"primitives\": [], "
                     "\"action_symbols\": [], \"object_symbols\": []}\n");
    CHECK_THROWS_AS(symbols::load_library(bad_hash), ArtifactError);

    const auto bad_action = dir / "bad_action.json";
    io::atomic_write(bad_action,
                     "{\"version\": 1, \"config_hash\": \"0000000000000000\", \"primitives\": "
                     "[{\"code\": [1], \"action\": [0.0, 0.0], \"residual\": 0.1, \"label\": "
                     "\"grasp\"}], \"action_symbols\": [], \"object_symbols\": []}\n");
    CHECK_THROWS_AS(symbols::load_library(bad_action), ArtifactError);
}
