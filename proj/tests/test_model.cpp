#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "curio/model.hpp"

using namespace curio;
using model::Mat;
using model::Vec;

namespace {

model::EncoderConfig small_config() {
    model::EncoderConfig cfg;
    cfg.hidden_width = 16;
    cfg.hidden_layers = 2;
    return cfg;
}

Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
    return m;
}

}  // namespace

TEST_CASE("gaussian nll closed forms") {
    model::EffectDist d;
    d.mu = Vec::Zero(3);
    d.log_var = Vec::Zero(3);

    // residual zero, unit variance: 3 * 1/2 log(2 pi)
    CHECK(model::nll_loss(d, {0.0, 0.0, 0.0}) == doctest::Approx(2.7568155996140182).epsilon(1e-10));

    // residual-free general variance: sum of 1/2 (log 2 pi + log var)
    d.log_var << 0.3, -1.2, 2.0;
    const double expect = 0.5 * (3.0 * 1.8378770664093455 + 0.3 - 1.2 + 2.0);
    CHECK(model::nll_loss(d, {0.0, 0.0, 0.0}) == doctest::Approx(expect).epsilon(1e-10));

    // doubling a residual quadruples its quadratic term
    d.log_var = Vec::Zero(3);
    const double base = model::nll_loss(d, {0.0, 0.0, 0.0});
    const double r1 = model::nll_loss(d, {0.1, 0.0, 0.0}) - base;
    const double r2 = model::nll_loss(d, {0.2, 0.0, 0.0}) - base;
    CHECK(r2 == doctest::Approx(4.0 * r1).epsilon(1e-10));
    CHECK(r1 == doctest::Approx(0.1 * 0.1 / 2.0).epsilon(1e-10));
}

TEST_CASE("nt-xent closed forms") {
    Mat z(2, 2);
    z << 1.0, 0.0, 0.0, 1.0;  // orthogonal pair
    CHECK(model::nt_xent_loss(z, 1.0) == doctest::Approx(0.3132616875182228).epsilon(1e-10));
    CHECK(model::nt_xent_loss(z, 0.5) == doctest::Approx(0.1269280110429726).epsilon(1e-10));

    Mat same(2, 2);
    same << 0.3, 0.4, 0.3, 0.4;  // identical rows: uniform softmax
    CHECK(model::nt_xent_loss(same, 1.0) == doctest::Approx(std::numbers::ln2).epsilon(1e-10));
}

TEST_CASE("nt-xent invariances and input validation") {
    Rng rng(11);
    Mat z = random_mat(rng, 5, 4);
    const double base = model::nt_xent_loss(z, 0.5);
    CHECK(base >= 0.0);

    // row permutation
    Mat perm(5, 4);
    perm << z.row(3), z.row(0), z.row(4), z.row(2), z.row(1);
    CHECK(model::nt_xent_loss(perm, 0.5) == doctest::Approx(base).epsilon(1e-12));

    // positive per-row rescaling is absorbed by the normalization
    Mat scaled = z;
    scaled.row(1) *= 7.5;
    scaled.row(4) *= 0.01;
    CHECK(model::nt_xent_loss(scaled, 0.5) == doctest::Approx(base).epsilon(1e-9));

    Mat one = random_mat(rng, 1, 4);
    CHECK_THROWS_AS(model::nt_xent_loss(one, 0.5), InputError);
    Mat degenerate = z;
    degenerate.row(2).setZero();
    CHECK_THROWS_AS(model::nt_xent_loss(degenerate, 0.5), DegenerateInputError);
}

TEST_CASE("total loss is the scaled sum") {
    CHECK(model::total_loss(1.0, 0.5, 0.01) == doctest::Approx(0.015).epsilon(1e-12));
    CHECK(model::total_loss(0.0, 0.0, 0.01) == 0.0);
    CHECK(model::total_loss(2.0, 3.0, 0.5) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("config validation") {
    model::EncoderConfig cfg = small_config();
    cfg.validate();
    cfg.hidden_layers = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.dropout_rate = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.object_code_bits = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.logvar_clamp = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.bn_momentum = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("fresh parameters map the running mean to the zero embedding") {
    const model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 3);

    // input equals the batch-norm running mean, so normalization yields zero,
    // every bias is zero, and the code is tanh(0)
    const Vec z_o = model::encode_object(p, {0.0, 0.0, 0.0, 0.0});
    CHECK(z_o.size() == 2);
    for (Eigen::Index i = 0; i < z_o.size(); ++i) CHECK(z_o(i) == 0.0);

    std::array<double, kActionDim> zero_action{};
    const Vec z_a = model::encode_action(p, zero_action);
    CHECK(z_a.size() == 3);
    for (Eigen::Index i = 0; i < z_a.size(); ++i) CHECK(z_a(i) == 0.0);

    const model::EffectDist dist = model::decode(p, z_o, z_a);
    for (int j = 0; j < 3; ++j) {
        CHECK(dist.mu(j) == 0.0);
        CHECK(dist.log_var(j) == 0.0);
    }
}

TEST_CASE("embeddings stay inside the tanh box") {
    const model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 5);
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, kActionDim> a{};
        for (double& v : a) v = rng.uniform(-3.0, 3.0);
        const Vec z = model::encode_action(p, a);
        for (Eigen::Index i = 0; i < z.size(); ++i) CHECK(std::abs(z(i)) <= 1.0);
    }
}

TEST_CASE("head modes are enforced") {
    const model::ModelParams dist = model::init_params(small_config(), model::HeadMode::distribution, 1);
    const model::ModelParams point = model::init_params(small_config(), model::HeadMode::point, 1);
    CHECK_THROWS_AS(model::decode(point, Vec::Zero(2), Vec::Zero(3)), ModeError);
    CHECK_THROWS_AS(model::point_head_predict(dist, {0, 0, 0, 0}, {}), ModeError);
    // and the permitted directions work
    model::decode(dist, Vec::Zero(2), Vec::Zero(3));
    model::point_head_predict(point, {0, 0, 0, 0}, {});
}

TEST_CASE("eval-mode forward is pure and repeatable") {
    model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 9);
    const std::uint64_t before = model::params_hash(p);

    Rng rng(23);
    const Mat O = random_mat(rng, 8, 4);
    const Mat A = random_mat(rng, 8, static_cast<Eigen::Index>(kActionDim));
    const Mat E = random_mat(rng, 8, 3, 0.05);

    model::ForwardCache c1, c2;
    const auto l1 = model::forward_loss(p, O, A, E, model::Mode::eval, 111, c1);
    const auto l2 = model::forward_loss(p, O, A, E, model::Mode::eval, 222, c2);
    CHECK(model::params_hash(p) == before);
    CHECK(l1.total == l2.total);
    CHECK(l1.data_term == l2.data_term);
    CHECK(l1.ntxent == l2.ntxent);
    CHECK((c1.mu - c2.mu).cwiseAbs().maxCoeff() == 0.0);

    // committing an eval cache must not touch the running statistics
    model::commit_batchnorm_stats(p, c1);
    CHECK(model::params_hash(p) == before);
}

TEST_CASE("train-mode dropout masks follow the seed") {
    model::EncoderConfig cfg = small_config();
    cfg.dropout_rate = 0.5;
    const model::ModelParams p = model::init_params(cfg, model::HeadMode::distribution, 9);
    Rng rng(29);
    const Mat O = random_mat(rng, 16, 4);
    const Mat A = random_mat(rng, 16, static_cast<Eigen::Index>(kActionDim));
    const Mat E = random_mat(rng, 16, 3, 0.05);

    model::ForwardCache a, b, c;
    const auto la = model::forward_loss(p, O, A, E, model::Mode::train, 7, a);
    const auto lb = model::forward_loss(p, O, A, E, model::Mode::train, 7, b);
    const auto lc = model::forward_loss(p, O, A, E, model::Mode::train, 8, c);
    CHECK(la.total == lb.total);
    CHECK(la.total != lc.total);
}

TEST_CASE("batch statistics commit with the unbiased correction") {
    model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 13);
    Rng rng(31);
    const Eigen::Index n = 6;
    const Mat O = random_mat(rng, n, 4);
    const Mat A = random_mat(rng, n, static_cast<Eigen::Index>(kActionDim));
    const Mat E = random_mat(rng, n, 3, 0.05);

    model::ForwardCache cache;
    model::forward_loss(p, O, A, E, model::Mode::train, 1, cache);
    model::commit_batchnorm_stats(p, cache);

    const double nd = static_cast<double>(n);
    for (int j = 0; j < 4; ++j) {
        const double mean = O.col(j).mean();
        const double biased = (O.col(j).array() - mean).square().sum() / nd;
        const double unbiased = biased * nd / (nd - 1.0);
        CHECK(p.obj_enc.bn.run_mean(j) == doctest::Approx(0.1 * mean).epsilon(1e-12));
        CHECK(p.obj_enc.bn.run_var(j) == doctest::Approx(0.9 + 0.1 * unbiased).epsilon(1e-12));
    }
}

TEST_CASE("batches of one skip the contrastive term") {
    const model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 2);
    Rng rng(37);
    const Mat O = random_mat(rng, 1, 4);
    const Mat A = random_mat(rng, 1, static_cast<Eigen::Index>(kActionDim));
    const Mat E = random_mat(rng, 1, 3, 0.05);
    model::ForwardCache cache;
    const auto l = model::forward_loss(p, O, A, E, model::Mode::train, 0, cache);
    CHECK(l.ntxent == 0.0);
    CHECK(l.total == doctest::Approx(p.cfg.loss_coefficient * l.data_term).epsilon(1e-12));
}

TEST_CASE("forward rejects malformed batches") {
    const model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 2);
    Rng rng(41);
    const Mat O = random_mat(rng, 4, 4);
    const Mat A = random_mat(rng, 4, static_cast<Eigen::Index>(kActionDim));
    const Mat E = random_mat(rng, 4, 3);
    model::ForwardCache cache;
    CHECK_THROWS_AS(model::forward_loss(p, O.topRows(3), A, E, model::Mode::eval, 0, cache), InputError);
    CHECK_THROWS_AS(model::forward_loss(p, O, A, E.leftCols(2), model::Mode::eval, 0, cache), InputError);
    Mat bad = E;
    bad(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(model::forward_loss(p, O, A, bad, model::Mode::eval, 0, cache), InputError);
    CHECK_THROWS_AS(model::encode_batch(p.obj_enc, p.cfg, A, model::Mode::eval), InputError);
    CHECK_THROWS_AS(model::encode_batch(p.obj_enc, p.cfg, Mat(0, 4), model::Mode::eval), InputError);
}

TEST_CASE("point head uses squared error") {
    const model::ModelParams p = model::init_params(small_config(), model::HeadMode::point, 21);
    Rng rng(43);
    const Mat O = random_mat(rng, 5, 4);
    const Mat A = random_mat(rng, 5, static_cast<Eigen::Index>(kActionDim));
    const Mat E = random_mat(rng, 5, 3, 0.05);
    model::ForwardCache cache;
    const auto l = model::forward_loss(p, O, A, E, model::Mode::eval, 0, cache);
    const Mat pred = model::predict_mean_batch(p, O, A);
    CHECK(pred.rows() == 5);
    CHECK(pred.cols() == 3);
    const double mse = (pred - E).array().square().rowwise().sum().mean();
    CHECK(l.data_term == doctest::Approx(mse).epsilon(1e-12));
    CHECK((cache.mu - pred).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("logvar clamping bounds the decoded distribution") {
    model::EncoderConfig cfg = small_config();
    cfg.logvar_clamp = 2.0;
    model::ModelParams p = model::init_params(cfg, model::HeadMode::distribution, 30);
    p.dec.out.b(4) = 50.0;   // force a raw log-variance far beyond the clamp
    p.dec.out.b(5) = -50.0;
    const model::EffectDist d = model::decode(p, Vec::Zero(2), Vec::Zero(3));
    CHECK(d.log_var(1) == 2.0);
    CHECK(d.log_var(2) == -2.0);
}

TEST_CASE("zero epochs leave the parameters untouched") {
    model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 51);
    const std::uint64_t before = model::params_hash(p);
    Dataset data;
    Rng rng(53);
    for (int i = 0; i < 10; ++i) {
        Transition t;
        for (double& v : t.object) v = rng.uniform01();
        for (double& v : t.action) v = rng.uniform(-0.05, 0.05);
        for (double& v : t.effect) v = rng.uniform(-0.02, 0.02);
        data.push_back(t);
    }
    model::TrainConfig tc;
    tc.epochs = 0;
    const auto losses = model::train_epochs(p, data, tc);
    CHECK(losses.empty());
    CHECK(model::params_hash(p) == before);

    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 77;
    model::ModelParams q1 = model::init_params(small_config(), model::HeadMode::distribution, 51);
    model::ModelParams q2 = model::init_params(small_config(), model::HeadMode::distribution, 51);
    const auto la = model::train_epochs(q1, data, tc);
    const auto lb = model::train_epochs(q2, data, tc);
    CHECK(la == lb);
    CHECK(la.size() == 2);
    CHECK(model::params_hash(q1) == model::params_hash(q2));
    CHECK(model::params_hash(q1) != before);

    Dataset empty;
    CHECK_THROWS_AS(model::train_epochs(p, empty, tc), InputError);
}

TEST_CASE("parameter visitation is stable and hash-sensitive") {
    model::ModelParams p = model::init_params(small_config(), model::HeadMode::distribution, 61);
    std::vector<std::string> names1, names2;
    model::visit_params(p, [&](const model::ParamRef& r) { names1.push_back(r.name); });
    model::visit_params(p, [&](const model::ParamRef& r) { names2.push_back(r.name); });
    CHECK(names1 == names2);
    CHECK(names1.front() == "obj_enc.bn.gamma");
    CHECK(names1.back() == "dec.out.b");

    const std::uint64_t before = model::params_hash(p);
    p.dec.out.b(0) += 1e-9;
    CHECK(model::params_hash(p) != before);

    const model::ModelParams z = model::zero_like(p);
    double sum = 0.0;
    model::visit_params(z, [&](const model::ParamRef& r) {
        for (std::size_t i = 0; i < r.rows * r.cols; ++i) sum += std::abs(r.data[i]);
    });
    CHECK(sum == 0.0);
}
