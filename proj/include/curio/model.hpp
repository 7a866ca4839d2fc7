#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "curio/types.hpp"

namespace curio::model {

using Mat = Eigen::MatrixXd;  // rows = batch samples
using Vec = Eigen::VectorXd;

enum class Mode { train, eval };
enum class HeadMode { distribution, point };

struct EncoderConfig {
    int hidden_width = 128;
    /// Encoder depth counts the tanh projection as its final hidden layer;
    /// the decoder uses the same count of ReLU layers plus its output layer.
    int hidden_layers = 4;
    int object_code_bits = 2;
    int action_code_bits = 3;
    double dropout_rate = 0.1;
    double temperature = 0.5;
    double loss_coefficient = 0.01;
    /// log-variance is clamped to [-logvar_clamp, logvar_clamp] before exp.
    double logvar_clamp = 10.0;
    double bn_momentum = 0.1;
    double norm_eps = 1e-5;
    /// Ablation flag: feed the decoder binarized {0,1} codes with a
    /// straight-through gradient instead of the continuous embeddings.
    bool straight_through_binarize = false;

    void validate() const;
    int embedding_dim() const { return object_code_bits + action_code_bits; }
};

// --- parameter containers ---------------------------------------------------

struct Linear {
    Mat W;  // out x in
    Vec b;
};

struct BatchNorm {
    Vec gamma, beta;
    Vec run_mean, run_var;
};

struct LayerNorm {
    Vec gamma, beta;
};

struct EncoderParams {
    BatchNorm bn;
    std::vector<Linear> layers;  // last layer projects to the code bits (tanh)
};

struct DecoderParams {
    LayerNorm ln;
    std::vector<Linear> hidden;
    Linear out;  // 6 outputs (mu, log-var per axis) or 3 in point mode
};

struct ModelParams {
    EncoderConfig cfg;
    HeadMode head = HeadMode::distribution;
    std::uint64_t train_steps = 0;
    EncoderParams obj_enc, act_enc;
    DecoderParams dec;
};

ModelParams init_params(const EncoderConfig& cfg, HeadMode head, std::uint64_t seed);

/// Gradients share the parameter layout; running statistics stay zero.
ModelParams zero_like(const ModelParams& params);

struct ParamRef {
    std::string name;
    double* data;
    std::size_t rows, cols;
    bool trainable;
};

/// Visits every named array in a fixed canonical order (also the checkpoint
/// tensor order).
void visit_params(ModelParams& p, const std::function<void(const ParamRef&)>& fn);
void visit_params(const ModelParams& p, const std::function<void(const ParamRef&)>& fn);

/// FNV hash over all parameter bytes in visitation order.
std::uint64_t params_hash(const ModelParams& p);

// --- forward -----------------------------------------------------------------

struct EncCache {
    Mat input;
    Vec mean, var;  // statistics used for normalization
    Mat xhat, bn_out;
    std::vector<Mat> pre, post, mask;
    Mat emb;
};

struct DecCache {
    Mat input;  // what the first hidden layer consumed (after layer norm)
    Mat raw_in;
    Vec ln_mean, ln_var;
    Mat ln_xhat;
    std::vector<Mat> pre, post, mask;
    Mat out;
};

struct ForwardCache {
    Mode mode = Mode::eval;
    EncCache obj, act;
    Mat concat;  // raw tanh embeddings, NT-Xent input
    DecCache dec;
    Mat mu;          // N x 3
    Mat logvar_raw;  // before clamping (distribution head)
    Mat logvar;
};

/// Per-axis Gaussian over the effect.
struct EffectDist {
    Vec mu;       // 3
    Vec log_var;  // 3
};

/// Batched encoder pass. Train mode normalizes with batch statistics and
/// applies dropout from `dropout_rng`; eval mode uses running statistics, no
/// dropout, and is pure.
Mat encode_batch(const EncoderParams& enc, const EncoderConfig& cfg, const Mat& X, Mode mode,
                 Rng* dropout_rng = nullptr, EncCache* cache = nullptr);

Mat decode_batch(const DecoderParams& dec, const EncoderConfig& cfg, const Mat& Z, Mode mode,
                 Rng* dropout_rng = nullptr, DecCache* cache = nullptr);

Vec encode_object(const ModelParams& p, const std::array<double, 4>& o, Mode mode = Mode::eval);
Vec encode_action(const ModelParams& p, const std::array<double, kActionDim>& a, Mode mode = Mode::eval);

/// Distribution-head decode of a single embedding pair. ModeError on a
/// point-head model.
EffectDist decode(const ModelParams& p, const Vec& z_o, const Vec& z_a, Mode mode = Mode::eval);

/// Point-head direct prediction, used only by the baselines. ModeError on a
/// distribution-head model.
Effect point_head_predict(const ModelParams& p, const std::array<double, 4>& o,
                          const std::array<double, kActionDim>& a);

/// Mean effect prediction for either head (eval mode).
Mat predict_mean_batch(const ModelParams& p, const Mat& O, const Mat& A);

// --- losses ------------------------------------------------------------------

/// Eq-style per-sample NLL: sum over axes of 1/2 log(2 pi s^2) + r^2/(2 s^2).
double nll_loss(const EffectDist& dist, const std::array<double, 3>& e);

/// NT-Xent over raw embedding rows: rows are L2-normalized, s_ij = zi . zj,
/// loss = -(1/N) sum_i log softmax(s_i/tau)_i. Throws DegenerateInputError on
/// a zero-norm row; requires N >= 2.
double nt_xent_loss(const Mat& embeddings, double tau);

double total_loss(double nll, double ntxent, double lambda);

struct BatchLoss {
    double total = 0.0;
    double data_term = 0.0;  // mean NLL (distribution) or mean squared error (point)
    double ntxent = 0.0;
};

/// Full training-objective forward. Batches of size 1 skip the contrastive
/// term. Train mode draws dropout masks from `mask_seed`; running batch-norm
/// statistics are only changed by commit_batchnorm_stats.
BatchLoss forward_loss(const ModelParams& p, const Mat& O, const Mat& A, const Mat& E, Mode mode,
                       std::uint64_t mask_seed, ForwardCache& cache);

/// Folds the batch statistics recorded in `cache` into the running estimates.
void commit_batchnorm_stats(ModelParams& p, const ForwardCache& cache);

// --- backward ----------------------------------------------------------------

struct InputGrads {
    Mat dO, dA;
};

/// Exact reverse-mode gradients of the total loss recorded in `cache`.
/// When `input_grads` is given, also returns d loss / d inputs.
ModelParams backward(const ModelParams& p, const ForwardCache& cache, const Mat& E,
                     InputGrads* input_grads = nullptr);

/// Gradient of mean squared embedding error ||phi_a(A) - target||^2 / k with
/// respect to the action inputs, encoder frozen, eval mode. Used by
/// distillation. Returns the per-row MSE.
Vec action_embedding_mse_grad(const ModelParams& p, const Mat& A, const Vec& target, Mat& dA);

// --- training ----------------------------------------------------------------

struct TrainConfig {
    int batch_size = 512;
    double learning_rate = 1e-5;
    int epochs = 10;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
};

double global_grad_norm(const ModelParams& grads);
void clip_global_norm(ModelParams& grads, double max_norm);
void sgd_step(ModelParams& params, const ModelParams& grads, double lr);

/// Mini-batch SGD with seeded shuffling and global-norm clipping. Returns the
/// per-epoch mean total loss.
std::vector<double> train_epochs(ModelParams& params, const Dataset& data, const TrainConfig& cfg);

// --- helpers -----------------------------------------------------------------

Mat dataset_objects(const Dataset& d);
Mat dataset_actions(const Dataset& d);
Mat dataset_effects(const Dataset& d);

}  // namespace curio::model
