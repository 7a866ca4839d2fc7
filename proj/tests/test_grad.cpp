#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>

#include "curio/model.hpp"

using namespace curio;
using model::Mat;
using model::Vec;

namespace {

constexpr double kEps = 1e-5;
constexpr double kRelTol = 1e-4;

Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
    return m;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7});
}

struct FdProblem {
    model::ModelParams params;
    Mat O, A, E;
    std::uint64_t mask_seed = 0;
};

FdProblem make_problem(std::uint64_t seed, model::HeadMode head, int layers, double dropout) {
    model::EncoderConfig cfg;
    cfg.hidden_width = 8;
    cfg.hidden_layers = layers;
    cfg.dropout_rate = dropout;
    FdProblem p;
    p.params = model::init_params(cfg, head, seed);
    Rng rng(Rng::derive(seed, {0xfdfd}));
    // Freshly initialized biases are all zero, which parks a ReLU-dead row's
    // next preactivation exactly on the kink where central differences and the
    // subgradient legitimately disagree. Nudge every parameter off that point.
    model::visit_params(p.params, [&](const model::ParamRef& r) {
        if (!r.trainable) return;
        for (std::size_t i = 0; i < r.rows * r.cols; ++i) r.data[i] += rng.uniform(-0.1, 0.1);
    });
    const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.index(12));
    p.O = random_mat(rng, n, 4);
    p.A = random_mat(rng, n, static_cast<Eigen::Index>(kActionDim));
    p.E = random_mat(rng, n, 3, 0.05);
    p.mask_seed = seed * 1315423911ULL + 17;
    return p;
}

double loss_at(const FdProblem& p) {
    model::ForwardCache cache;
    return model::forward_loss(p.params, p.O, p.A, p.E, model::Mode::train, p.mask_seed, cache).total;
}

/// Central finite differences over every trainable coordinate.
void check_all_param_grads(FdProblem p) {
    model::ForwardCache cache;
    model::forward_loss(p.params, p.O, p.A, p.E, model::Mode::train, p.mask_seed, cache);
    const model::ModelParams grads = model::backward(p.params, cache, p.E);

    std::vector<model::ParamRef> grefs;
    model::visit_params(grads, [&](const model::ParamRef& r) { grefs.push_back(r); });
    std::size_t gi = 0;
    model::visit_params(p.params, [&](const model::ParamRef& r) {
        const model::ParamRef& g = grefs[gi++];
        if (!r.trainable) return;
        for (std::size_t i = 0; i < r.rows * r.cols; ++i) {
            const double saved = r.data[i];
            r.data[i] = saved + kEps;
            const double up = loss_at(p);
            r.data[i] = saved - kEps;
            const double dn = loss_at(p);
            r.data[i] = saved;
            const double fd = (up - dn) / (2.0 * kEps);
            const double err = rel_err(g.data[i], fd);
            if (err > kRelTol) {
                CAPTURE(r.name);
                CAPTURE(i);
                CAPTURE(g.data[i]);
                CAPTURE(fd);
                REQUIRE(err <= kRelTol);
            }
        }
    });
}

}  // namespace

TEST_CASE("analytic gradients match finite differences in 20 random configurations") {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t k = 0; k < 20; ++k) {
        const auto head = k % 2 == 0 ? model::HeadMode::distribution : model::HeadMode::point;
        const int layers = 1 + static_cast<int>(k % 3);
        const double dropout = k % 4 < 2 ? 0.0 : 0.1;
        check_all_param_grads(make_problem(1000 + k, head, layers, dropout));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(secs < 60.0);
}

TEST_CASE("input gradients match finite differences") {
    for (std::uint64_t k = 0; k < 4; ++k) {
        FdProblem p = make_problem(2000 + k, k % 2 == 0 ? model::HeadMode::distribution : model::HeadMode::point,
                                   2, k % 2 == 0 ? 0.1 : 0.0);
        model::ForwardCache cache;
        model::forward_loss(p.params, p.O, p.A, p.E, model::Mode::train, p.mask_seed, cache);
        model::InputGrads ig;
        model::backward(p.params, cache, p.E, &ig);

        auto fd_input = [&](Mat& X, Eigen::Index i, Eigen::Index j) {
            const double saved = X(i, j);
            X(i, j) = saved + kEps;
            const double up = loss_at(p);
            X(i, j) = saved - kEps;
            const double dn = loss_at(p);
            X(i, j) = saved;
            return (up - dn) / (2.0 * kEps);
        };
        for (Eigen::Index i = 0; i < p.O.rows(); ++i)
            for (Eigen::Index j = 0; j < p.O.cols(); ++j)
                CHECK(rel_err(ig.dO(i, j), fd_input(p.O, i, j)) <= kRelTol);
        for (Eigen::Index i = 0; i < p.A.rows(); ++i)
            for (Eigen::Index j = 0; j < p.A.cols(); ++j)
                CHECK(rel_err(ig.dA(i, j), fd_input(p.A, i, j)) <= kRelTol);
    }
}

TEST_CASE("dead relu units receive zero gradient") {
    FdProblem p = make_problem(3000, model::HeadMode::distribution, 2, 0.0);
    // drive the first decoder hidden unit permanently negative
    p.params.dec.hidden[0].b(0) = -100.0;
    model::ForwardCache cache;
    model::forward_loss(p.params, p.O, p.A, p.E, model::Mode::train, p.mask_seed, cache);
    const model::ModelParams grads = model::backward(p.params, cache, p.E);
    CHECK(grads.dec.hidden[0].b(0) == 0.0);
    for (Eigen::Index j = 0; j < grads.dec.hidden[0].W.cols(); ++j)
        CHECK(grads.dec.hidden[0].W(0, j) == 0.0);
}

TEST_CASE("embedding distillation gradient matches finite differences") {
    FdProblem p = make_problem(4000, model::HeadMode::distribution, 2, 0.1);
    Vec target(3);
    target << 1.0, -1.0, 1.0;
    Mat dA;
    const Vec mse = model::action_embedding_mse_grad(p.params, p.A, target, dA);
    CHECK(mse.size() == p.A.rows());
    CHECK((mse.array() >= 0.0).all());

    auto sum_mse = [&]() {
        Mat tmp;
        return model::action_embedding_mse_grad(p.params, p.A, target, tmp).sum();
    };
    for (Eigen::Index i = 0; i < p.A.rows(); ++i)
        for (Eigen::Index j = 0; j < p.A.cols(); ++j) {
            const double saved = p.A(i, j);
            p.A(i, j) = saved + kEps;
            const double up = sum_mse();
            p.A(i, j) = saved - kEps;
            const double dn = sum_mse();
            p.A(i, j) = saved;
            CHECK(rel_err(dA(i, j), (up - dn) / (2.0 * kEps)) <= kRelTol);
        }

    Vec bad(2);
    bad << 1.0, -1.0;
    CHECK_THROWS_AS(model::action_embedding_mse_grad(p.params, p.A, bad, dA), InputError);
}

TEST_CASE("global norm clipping rescales to the bound") {
    model::ModelParams p = model::init_params(model::EncoderConfig{}, model::HeadMode::distribution, 1);
    model::ModelParams g = model::zero_like(p);
    g.dec.out.b(0) = 6.0;
    g.dec.out.b(1) = 8.0;
    CHECK(model::global_grad_norm(g) == doctest::Approx(10.0).epsilon(1e-12));

    // running statistics are not gradients and never count
    g.obj_enc.bn.run_mean(0) = 1e6;
    CHECK(model::global_grad_norm(g) == doctest::Approx(10.0).epsilon(1e-12));

    model::clip_global_norm(g, 1.0);
    CHECK(model::global_grad_norm(g) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.dec.out.b(0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(g.dec.out.b(1) == doctest::Approx(0.8).epsilon(1e-12));

    // already within the bound: untouched
    model::ModelParams h = model::zero_like(p);
    h.dec.out.b(0) = 0.25;
    model::clip_global_norm(h, 1.0);
    CHECK(h.dec.out.b(0) == 0.25);
}

TEST_CASE("sgd steps trainable tensors only") {
    model::ModelParams p = model::init_params(model::EncoderConfig{}, model::HeadMode::distribution, 2);
    const Vec run_mean_before = p.obj_enc.bn.run_mean;
    const double w_before = p.dec.out.W(0, 0);
    model::ModelParams g = model::zero_like(p);
    g.dec.out.W(0, 0) = 2.0;
    g.obj_enc.bn.run_mean(0) = 5.0;
    model::sgd_step(p, g, 0.1);
    CHECK(p.dec.out.W(0, 0) == doctest::Approx(w_before - 0.2).epsilon(1e-12));
    CHECK((p.obj_enc.bn.run_mean - run_mean_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training on a fixed batch decreases the loss") {
    model::EncoderConfig cfg;
    cfg.hidden_width = 16;
    cfg.hidden_layers = 2;
    model::ModelParams p = model::init_params(cfg, model::HeadMode::distribution, 7);
    Rng rng(71);
    const Mat O = random_mat(rng, 64, 4);
    const Mat A = random_mat(rng, 64, static_cast<Eigen::Index>(kActionDim), 0.05);
    const Mat E = random_mat(rng, 64, 3, 0.02);

    model::ForwardCache cache;
    const double initial = model::forward_loss(p, O, A, E, model::Mode::train, 0, cache).total;
    double last = initial;
    for (int step = 0; step < 100; ++step) {
        const double loss =
            model::forward_loss(p, O, A, E, model::Mode::train, static_cast<std::uint64_t>(step), cache).total;
        model::ModelParams grads = model::backward(p, cache, E);
        model::clip_global_norm(grads, 1.0);
        model::sgd_step(p, grads, 1e-3);
        model::commit_batchnorm_stats(p, cache);
        last = loss;
    }
    CHECK(last < initial);
}
