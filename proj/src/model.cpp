#include "curio/model.hpp"

#include <algorithm>
#include <cmath>

namespace curio::model {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void fill_uniform(Mat& m, Rng& rng, double limit) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-limit, limit);
}

Linear make_linear(int out, int in, Rng& rng) {
    Linear l;
    l.W = Mat::Zero(out, in);
    l.b = Vec::Zero(out);
    fill_uniform(l.W, rng, 1.0 / std::sqrt(static_cast<double>(in)));
    return l;
}

/// Dropout multiplier matrix: entries are 0 or 1/(1-rate).
Mat draw_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Mat m(rows, cols);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform01() >= rate ? scale : 0.0;
    return m;
}

Mat binarize01(const Mat& z) {
    return (z.array() > 0.0).cast<double>().matrix();
}

void check_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) throw InputError(std::string("non-finite input: ") + what);
}

}  // namespace

void EncoderConfig::validate() const {
    if (hidden_width < 1 || hidden_layers < 1) throw ConfigError("model: width/layers must be >= 1");
    if (object_code_bits < 1 || action_code_bits < 1) throw ConfigError("model: code bits must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("model: dropout_rate in [0,1)");
    if (!(temperature > 0.0)) throw ConfigError("model: temperature must be positive");
    if (!(loss_coefficient > 0.0)) throw ConfigError("model: loss_coefficient must be positive");
    if (!(logvar_clamp > 0.0)) throw ConfigError("model: logvar_clamp must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ConfigError("model: bn_momentum in (0,1]");
    if (!(norm_eps > 0.0)) throw ConfigError("model: norm_eps must be positive");
}

ModelParams init_params(const EncoderConfig& cfg, HeadMode head, std::uint64_t seed) {
    cfg.validate();
    ModelParams p;
    p.cfg = cfg;
    p.head = head;
    Rng rng(Rng::derive(seed, {0x6d6f64656cULL}));

    auto make_encoder = [&](int in_dim, int bits) {
        EncoderParams enc;
        enc.bn.gamma = Vec::Ones(in_dim);
        enc.bn.beta = Vec::Zero(in_dim);
        enc.bn.run_mean = Vec::Zero(in_dim);
        enc.bn.run_var = Vec::Ones(in_dim);
        int prev = in_dim;
        for (int l = 0; l < cfg.hidden_layers; ++l) {
            const int out = (l == cfg.hidden_layers - 1) ? bits : cfg.hidden_width;
            enc.layers.push_back(make_linear(out, prev, rng));
            prev = out;
        }
        return enc;
    };
    p.obj_enc = make_encoder(4, cfg.object_code_bits);
    p.act_enc = make_encoder(static_cast<int>(kActionDim), cfg.action_code_bits);

    const int emb = cfg.embedding_dim();
    p.dec.ln.gamma = Vec::Ones(emb);
    p.dec.ln.beta = Vec::Zero(emb);
    int prev = emb;
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        p.dec.hidden.push_back(make_linear(cfg.hidden_width, prev, rng));
        prev = cfg.hidden_width;
    }
    p.dec.out = make_linear(head == HeadMode::distribution ? 6 : 3, prev, rng);
    return p;
}

ModelParams zero_like(const ModelParams& params) {
    ModelParams g = params;
    visit_params(g, [](const ParamRef& r) { std::fill(r.data, r.data + r.rows * r.cols, 0.0); });
    return g;
}

namespace {

template <typename Params, typename Fn>
void visit_impl(Params& p, const Fn& fn) {
    auto vec = [&](const std::string& name, auto& v, bool trainable) {
        fn(ParamRef{name, const_cast<double*>(v.data()), static_cast<std::size_t>(v.size()), 1,
                    trainable});
    };
    auto mat = [&](const std::string& name, auto& m, bool trainable) {
        fn(ParamRef{name, const_cast<double*>(m.data()), static_cast<std::size_t>(m.rows()),
                    static_cast<std::size_t>(m.cols()), trainable});
    };
    auto encoder = [&](const std::string& prefix, auto& enc) {
        vec(prefix + ".bn.gamma", enc.bn.gamma, true);
        vec(prefix + ".bn.beta", enc.bn.beta, true);
        vec(prefix + ".bn.run_mean", enc.bn.run_mean, false);
        vec(prefix + ".bn.run_var", enc.bn.run_var, false);
        for (std::size_t l = 0; l < enc.layers.size(); ++l) {
            mat(prefix + ".l" + std::to_string(l) + ".W", enc.layers[l].W, true);
            vec(prefix + ".l" + std::to_string(l) + ".b", enc.layers[l].b, true);
        }
    };
    encoder("obj_enc", p.obj_enc);
    encoder("act_enc", p.act_enc);
    vec("dec.ln.gamma", p.dec.ln.gamma, true);
    vec("dec.ln.beta", p.dec.ln.beta, true);
    for (std::size_t l = 0; l < p.dec.hidden.size(); ++l) {
        mat("dec.h" + std::to_string(l) + ".W", p.dec.hidden[l].W, true);
        vec("dec.h" + std::to_string(l) + ".b", p.dec.hidden[l].b, true);
    }
    mat("dec.out.W", p.dec.out.W, true);
    vec("dec.out.b", p.dec.out.b, true);
}

}  // namespace

void visit_params(ModelParams& p, const std::function<void(const ParamRef&)>& fn) {
    visit_impl(p, fn);
}

void visit_params(const ModelParams& p, const std::function<void(const ParamRef&)>& fn) {
    visit_impl(p, fn);
}

std::uint64_t params_hash(const ModelParams& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    visit_params(p, [&](const ParamRef& r) { h = fnv1a64(r.data, r.rows * r.cols * sizeof(double), h); });
    return h;
}

// --- forward -----------------------------------------------------------------

Mat encode_batch(const EncoderParams& enc, const EncoderConfig& cfg, const Mat& X, Mode mode,
                 Rng* dropout_rng, EncCache* cache) {
    check_finite(X, "encoder features");
    if (X.cols() != enc.bn.gamma.size()) throw InputError("encode_batch: feature dimension mismatch");
    if (X.rows() < 1) throw InputError("encode_batch: empty batch");
    const double n = static_cast<double>(X.rows());

    Vec mean, var;
    if (mode == Mode::train) {
        mean = X.colwise().mean().transpose();
        Mat xc = X.rowwise() - mean.transpose();
        var = (xc.cwiseProduct(xc).colwise().sum() / n).transpose();
    } else {
        mean = enc.bn.run_mean;
        var = enc.bn.run_var;
    }
    const Vec inv_std = (var.array() + cfg.norm_eps).rsqrt().matrix();
    Mat xhat = (X.rowwise() - mean.transpose()) * inv_std.asDiagonal();
    Mat h = (xhat * enc.bn.gamma.asDiagonal()).rowwise() + enc.bn.beta.transpose();

    if (cache) {
        cache->input = X;
        cache->mean = mean;
        cache->var = var;
        cache->xhat = xhat;
        cache->bn_out = h;
        cache->pre.clear();
        cache->post.clear();
        cache->mask.clear();
    }

    const std::size_t last = enc.layers.size() - 1;
    for (std::size_t l = 0; l < enc.layers.size(); ++l) {
        Mat pre = (h * enc.layers[l].W.transpose()).rowwise() + enc.layers[l].b.transpose();
        Mat post;
        if (l == last) {
            post = pre.array().tanh().matrix();
        } else {
            post = pre.cwiseMax(0.0);
            if (mode == Mode::train && cfg.dropout_rate > 0.0 && dropout_rng) {
                Mat m = draw_mask(post.rows(), post.cols(), cfg.dropout_rate, *dropout_rng);
                post = post.cwiseProduct(m);
                if (cache) cache->mask.push_back(std::move(m));
            }
        }
        if (cache) {
            cache->pre.push_back(pre);
            cache->post.push_back(post);
        }
        h = std::move(post);
    }
    if (cache) cache->emb = h;
    return h;
}

Mat decode_batch(const DecoderParams& dec, const EncoderConfig& cfg, const Mat& Z, Mode mode,
                 Rng* dropout_rng, DecCache* cache) {
    check_finite(Z, "decoder embeddings");
    if (Z.cols() != dec.ln.gamma.size()) throw InputError("decode_batch: embedding dimension mismatch");
    const double d = static_cast<double>(Z.cols());

    Vec mean = Z.rowwise().mean();
    Mat zc = Z.colwise() - mean;
    Vec var = zc.cwiseProduct(zc).rowwise().sum() / d;
    const Vec inv_std = (var.array() + cfg.norm_eps).rsqrt().matrix();
    Mat xhat = inv_std.asDiagonal() * zc;
    Mat h = (xhat * dec.ln.gamma.asDiagonal()).rowwise() + dec.ln.beta.transpose();

    if (cache) {
        cache->raw_in = Z;
        cache->ln_mean = mean;
        cache->ln_var = var;
        cache->ln_xhat = xhat;
        cache->input = h;
        cache->pre.clear();
        cache->post.clear();
        cache->mask.clear();
    }

    for (std::size_t l = 0; l < dec.hidden.size(); ++l) {
        Mat pre = (h * dec.hidden[l].W.transpose()).rowwise() + dec.hidden[l].b.transpose();
        Mat post = pre.cwiseMax(0.0);
        if (mode == Mode::train && cfg.dropout_rate > 0.0 && dropout_rng) {
            Mat m = draw_mask(post.rows(), post.cols(), cfg.dropout_rate, *dropout_rng);
            post = post.cwiseProduct(m);
            if (cache) cache->mask.push_back(std::move(m));
        }
        if (cache) {
            cache->pre.push_back(pre);
            cache->post.push_back(post);
        }
        h = std::move(post);
    }
    Mat out = (h * dec.out.W.transpose()).rowwise() + dec.out.b.transpose();
    if (cache) cache->out = out;
    return out;
}

Vec encode_object(const ModelParams& p, const std::array<double, 4>& o, Mode mode) {
    Mat X(1, 4);
    for (int i = 0; i < 4; ++i) X(0, i) = o[i];
    Rng rng(0);
    return encode_batch(p.obj_enc, p.cfg, X, mode, mode == Mode::train ? &rng : nullptr, nullptr)
        .row(0)
        .transpose();
}

Vec encode_action(const ModelParams& p, const std::array<double, kActionDim>& a, Mode mode) {
    Mat X(1, kActionDim);
    for (std::size_t i = 0; i < kActionDim; ++i) X(0, static_cast<Eigen::Index>(i)) = a[i];
    Rng rng(1);
    return encode_batch(p.act_enc, p.cfg, X, mode, mode == Mode::train ? &rng : nullptr, nullptr)
        .row(0)
        .transpose();
}

EffectDist decode(const ModelParams& p, const Vec& z_o, const Vec& z_a, Mode mode) {
    if (p.head != HeadMode::distribution) throw ModeError("decode: model has a point head");
    if (z_o.size() != p.cfg.object_code_bits || z_a.size() != p.cfg.action_code_bits)
        throw InputError("decode: embedding length mismatch");
    Mat Z(1, p.cfg.embedding_dim());
    Z << z_o.transpose(), z_a.transpose();
    if (p.cfg.straight_through_binarize) Z = binarize01(Z);
    Rng rng(2);
    Mat out = decode_batch(p.dec, p.cfg, Z, mode, mode == Mode::train ? &rng : nullptr, nullptr);
    EffectDist dist;
    dist.mu = out.row(0).head(3).transpose();
    dist.log_var =
        out.row(0).tail(3).transpose().cwiseMax(-p.cfg.logvar_clamp).cwiseMin(p.cfg.logvar_clamp);
    return dist;
}

Effect point_head_predict(const ModelParams& p, const std::array<double, 4>& o,
                          const std::array<double, kActionDim>& a) {
    if (p.head != HeadMode::point) throw ModeError("point_head_predict: model has a distribution head");
    Mat O(1, 4), A(1, kActionDim);
    for (int i = 0; i < 4; ++i) O(0, i) = o[i];
    for (std::size_t i = 0; i < kActionDim; ++i) A(0, static_cast<Eigen::Index>(i)) = a[i];
    Mat out = predict_mean_batch(p, O, A);
    return Effect{out(0, 0), out(0, 1), out(0, 2)};
}

Mat predict_mean_batch(const ModelParams& p, const Mat& O, const Mat& A) {
    if (O.rows() != A.rows()) throw InputError("predict_mean_batch: batch size mismatch");
    Mat z_o = encode_batch(p.obj_enc, p.cfg, O, Mode::eval, nullptr, nullptr);
    Mat z_a = encode_batch(p.act_enc, p.cfg, A, Mode::eval, nullptr, nullptr);
    Mat Z(z_o.rows(), z_o.cols() + z_a.cols());
    Z << z_o, z_a;
    if (p.cfg.straight_through_binarize) Z = binarize01(Z);
    Mat out = decode_batch(p.dec, p.cfg, Z, Mode::eval, nullptr, nullptr);
    return out.leftCols(3);
}

// --- losses ------------------------------------------------------------------

double nll_loss(const EffectDist& dist, const std::array<double, 3>& e) {
    double loss = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double var = std::exp(dist.log_var(j));
        const double r = e[j] - dist.mu(j);
        loss += 0.5 * (kLog2Pi + dist.log_var(j)) + r * r / (2.0 * var);
    }
    return loss;
}

double nt_xent_loss(const Mat& embeddings, double tau) {
    const auto n = embeddings.rows();
    if (n < 2) throw InputError("nt_xent_loss: batch size must be >= 2");
    Vec norms = embeddings.rowwise().norm();
    if ((norms.array() < 1e-12).any()) throw DegenerateInputError("nt_xent_loss: zero-norm embedding row");
    Mat zn = norms.cwiseInverse().asDiagonal() * embeddings;
    Mat s = zn * zn.transpose();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = s.row(i).maxCoeff() / tau;
        Eigen::ArrayXd ex = ((s.row(i).transpose().array() / tau) - mx).exp();
        loss += -(s(i, i) / tau - mx - std::log(ex.sum()));
    }
    return loss / static_cast<double>(n);
}

double total_loss(double nll, double ntxent, double lambda) {
    return lambda * (nll + ntxent);
}

BatchLoss forward_loss(const ModelParams& p, const Mat& O, const Mat& A, const Mat& E, Mode mode,
                       std::uint64_t mask_seed, ForwardCache& cache) {
    if (O.rows() != A.rows() || O.rows() != E.rows() || O.rows() < 1)
        throw InputError("forward_loss: batch shape mismatch");
    if (E.cols() != 3) throw InputError("forward_loss: effects must have 3 columns");
    check_finite(E, "effects");
    cache = ForwardCache{};
    cache.mode = mode;

    Rng dropout(Rng::derive(mask_seed, {0x64726f70ULL}));
    Rng* rng = mode == Mode::train ? &dropout : nullptr;

    Mat z_o = encode_batch(p.obj_enc, p.cfg, O, mode, rng, &cache.obj);
    Mat z_a = encode_batch(p.act_enc, p.cfg, A, mode, rng, &cache.act);
    cache.concat.resize(O.rows(), z_o.cols() + z_a.cols());
    cache.concat << z_o, z_a;

    Mat dec_in = p.cfg.straight_through_binarize ? binarize01(cache.concat) : cache.concat;
    Mat out = decode_batch(p.dec, p.cfg, dec_in, mode, rng, &cache.dec);

    BatchLoss loss;
    if (p.head == HeadMode::distribution) {
        cache.mu = out.leftCols(3);
        cache.logvar_raw = out.rightCols(3);
        cache.logvar = cache.logvar_raw.cwiseMax(-p.cfg.logvar_clamp).cwiseMin(p.cfg.logvar_clamp);
        const Mat resid = E - cache.mu;
        loss.data_term = ((0.5 * (kLog2Pi + cache.logvar.array())) +
                          resid.array().square() / (2.0 * cache.logvar.array().exp()))
                             .rowwise()
                             .sum()
                             .mean();
    } else {
        cache.mu = out;
        loss.data_term = (out - E).array().square().rowwise().sum().mean();
    }
    loss.ntxent = O.rows() >= 2 ? nt_xent_loss(cache.concat, p.cfg.temperature) : 0.0;
    loss.total = total_loss(loss.data_term, loss.ntxent, p.cfg.loss_coefficient);
    return loss;
}

void commit_batchnorm_stats(ModelParams& p, const ForwardCache& cache) {
    if (cache.mode != Mode::train) return;
    auto commit = [&](BatchNorm& bn, const EncCache& c) {
        if (c.mean.size() == 0) return;
        const double m = p.cfg.bn_momentum;
        const double n = static_cast<double>(c.input.rows());
        const Vec var_update = n > 1.0 ? Vec(c.var * (n / (n - 1.0))) : c.var;
        bn.run_mean = (1.0 - m) * bn.run_mean + m * c.mean;
        bn.run_var = (1.0 - m) * bn.run_var + m * var_update;
    };
    commit(p.obj_enc.bn, cache.obj);
    commit(p.act_enc.bn, cache.act);
}

// --- backward ----------------------------------------------------------------

namespace {

struct EncGrads {
    Vec dgamma, dbeta;
    std::vector<Mat> dW;
    std::vector<Vec> db;
    Mat dX;
};

/// Reverse pass through one encoder; `demb` is d loss / d embedding.
EncGrads encoder_backward(const EncoderParams& enc, const EncoderConfig& cfg, const EncCache& c,
                          Mode mode, const Mat& demb) {
    EncGrads g;
    const std::size_t L = enc.layers.size();
    g.dW.resize(L);
    g.db.resize(L);

    Mat dh = demb.cwiseProduct((1.0 - c.post[L - 1].array().square()).matrix());
    for (std::size_t l = L; l-- > 0;) {
        if (l != L - 1) {
            if (!c.mask.empty()) dh = dh.cwiseProduct(c.mask[l]);
            dh = dh.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
        }
        const Mat& in = l == 0 ? c.bn_out : c.post[l - 1];
        g.dW[l] = dh.transpose() * in;
        g.db[l] = dh.colwise().sum().transpose();
        dh = dh * enc.layers[l].W;
    }

    g.dgamma = dh.cwiseProduct(c.xhat).colwise().sum().transpose();
    g.dbeta = dh.colwise().sum().transpose();
    Mat dxhat = dh * enc.bn.gamma.asDiagonal();
    const Vec inv_std = (c.var.array() + cfg.norm_eps).rsqrt().matrix();
    if (mode == Mode::eval) {
        g.dX = dxhat * inv_std.asDiagonal();
        return g;
    }
    const double n = static_cast<double>(c.input.rows());
    Mat xc = c.input.rowwise() - c.mean.transpose();
    Vec dvar = (dxhat.cwiseProduct(xc).colwise().sum().transpose().array() * (-0.5) *
                inv_std.array().cube())
                   .matrix();
    Vec dmean = (-(dxhat.colwise().sum().transpose().array() * inv_std.array()) +
                 dvar.array() * xc.colwise().sum().transpose().array() * (-2.0 / n))
                    .matrix();
    g.dX = dxhat * inv_std.asDiagonal() + xc * (dvar * (2.0 / n)).asDiagonal();
    g.dX.rowwise() += (dmean / n).transpose();
    return g;
}

struct DecGrads {
    Vec dln_gamma, dln_beta;
    std::vector<Mat> dW;
    std::vector<Vec> db;
    Mat dWo;
    Vec dbo;
    Mat dZ;  // gradient w.r.t. the decoder's raw input embeddings
};

DecGrads decoder_backward(const DecoderParams& dec, const EncoderConfig& cfg, const DecCache& c,
                          const Mat& dout) {
    DecGrads g;
    const std::size_t H = dec.hidden.size();
    g.dW.resize(H);
    g.db.resize(H);

    g.dWo = dout.transpose() * (H > 0 ? c.post[H - 1] : c.input);
    g.dbo = dout.colwise().sum().transpose();
    Mat dh = dout * dec.out.W;
    for (std::size_t l = H; l-- > 0;) {
        if (!c.mask.empty()) dh = dh.cwiseProduct(c.mask[l]);
        dh = dh.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
        const Mat& in = l == 0 ? c.input : c.post[l - 1];
        g.dW[l] = dh.transpose() * in;
        g.db[l] = dh.colwise().sum().transpose();
        dh = dh * dec.hidden[l].W;
    }

    // layer-norm backward, per row
    const double d = static_cast<double>(c.raw_in.cols());
    g.dln_gamma = dh.cwiseProduct(c.ln_xhat).colwise().sum().transpose();
    g.dln_beta = dh.colwise().sum().transpose();
    Mat dxhat = dh * dec.ln.gamma.asDiagonal();
    const Vec inv_std = (c.ln_var.array() + cfg.norm_eps).rsqrt().matrix();
    Vec m1 = dxhat.rowwise().sum() / d;
    Vec m2 = dxhat.cwiseProduct(c.ln_xhat).rowwise().sum() / d;
    Mat centered = dxhat;
    centered.colwise() -= m1;
    centered -= Mat(m2.asDiagonal() * c.ln_xhat);
    g.dZ = inv_std.asDiagonal() * centered;
    return g;
}

/// d NT-Xent / d raw (un-normalized) embedding rows.
Mat nt_xent_backward(const Mat& z, double tau) {
    const auto n = z.rows();
    Vec norms = z.rowwise().norm();
    if ((norms.array() < 1e-12).any()) throw DegenerateInputError("nt_xent backward: zero-norm row");
    Mat zn = norms.cwiseInverse().asDiagonal() * z;
    Mat s = zn * zn.transpose();
    Mat pr(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mx = s.row(i).maxCoeff() / tau;
        Eigen::ArrayXd ex = ((s.row(i).transpose().array() / tau) - mx).exp();
        pr.row(i) = (ex / ex.sum()).matrix().transpose();
    }
    Mat grad_s = (pr - Mat::Identity(n, n)) / (static_cast<double>(n) * tau);
    Mat dzn = (grad_s + grad_s.transpose()) * zn;
    // back through row normalization: project out the radial component
    Vec radial = dzn.cwiseProduct(zn).rowwise().sum();
    Mat dz = norms.cwiseInverse().asDiagonal() * (dzn - Mat(radial.asDiagonal() * zn));
    return dz;
}

}  // namespace

ModelParams backward(const ModelParams& p, const ForwardCache& cache, const Mat& E,
                     InputGrads* input_grads) {
    const auto n = cache.mu.rows();
    if (E.rows() != n || E.cols() != 3) throw InputError("backward: effect shape mismatch");
    const double lambda = p.cfg.loss_coefficient;
    const double nd = static_cast<double>(n);

    Mat dout;
    if (p.head == HeadMode::distribution) {
        const Mat resid = cache.mu - E;
        const Mat var = cache.logvar.array().exp().matrix();
        Mat dmu = (lambda / nd) * resid.cwiseQuotient(var);
        Mat dlv = ((lambda / nd) * (0.5 - resid.array().square() / (2.0 * var.array()))).matrix();
        const Mat pass = ((cache.logvar_raw.array() > -p.cfg.logvar_clamp) &&
                          (cache.logvar_raw.array() < p.cfg.logvar_clamp))
                             .cast<double>()
                             .matrix();
        dlv = dlv.cwiseProduct(pass);
        dout.resize(n, 6);
        dout << dmu, dlv;
    } else {
        dout = (2.0 * lambda / nd) * (cache.mu - E);
    }

    DecGrads dg = decoder_backward(p.dec, p.cfg, cache.dec, dout);

    // With straight-through binarization the decoder-input gradient passes
    // through the threshold unchanged.
    Mat dconcat = dg.dZ;
    if (n >= 2) dconcat += lambda * nt_xent_backward(cache.concat, p.cfg.temperature);

    const int j = p.cfg.object_code_bits;
    EncGrads og = encoder_backward(p.obj_enc, p.cfg, cache.obj, cache.mode, dconcat.leftCols(j));
    EncGrads ag = encoder_backward(p.act_enc, p.cfg, cache.act, cache.mode,
                                   dconcat.rightCols(p.cfg.action_code_bits));

    ModelParams grads = zero_like(p);
    auto store_enc = [](EncoderParams& dst, const EncGrads& src) {
        dst.bn.gamma = src.dgamma;
        dst.bn.beta = src.dbeta;
        for (std::size_t l = 0; l < dst.layers.size(); ++l) {
            dst.layers[l].W = src.dW[l];
            dst.layers[l].b = src.db[l];
        }
    };
    store_enc(grads.obj_enc, og);
    store_enc(grads.act_enc, ag);
    grads.dec.ln.gamma = dg.dln_gamma;
    grads.dec.ln.beta = dg.dln_beta;
    for (std::size_t l = 0; l < grads.dec.hidden.size(); ++l) {
        grads.dec.hidden[l].W = dg.dW[l];
        grads.dec.hidden[l].b = dg.db[l];
    }
    grads.dec.out.W = dg.dWo;
    grads.dec.out.b = dg.dbo;

    if (input_grads) {
        input_grads->dO = og.dX;
        input_grads->dA = ag.dX;
    }
    return grads;
}

Vec action_embedding_mse_grad(const ModelParams& p, const Mat& A, const Vec& target, Mat& dA) {
    if (target.size() != p.cfg.action_code_bits) throw InputError("embedding target length mismatch");
    EncCache cache;
    Mat emb = encode_batch(p.act_enc, p.cfg, A, Mode::eval, nullptr, &cache);
    const double k = static_cast<double>(target.size());
    Mat diff = emb.rowwise() - target.transpose();
    Vec mse = diff.cwiseProduct(diff).rowwise().sum() / k;
    Mat demb = (2.0 / k) * diff;
    EncGrads g = encoder_backward(p.act_enc, p.cfg, cache, Mode::eval, demb);
    dA = g.dX;
    return mse;
}

// --- training ----------------------------------------------------------------

double global_grad_norm(const ModelParams& grads) {
    double sq = 0.0;
    visit_params(grads, [&](const ParamRef& r) {
        if (!r.trainable) return;
        for (std::size_t i = 0; i < r.rows * r.cols; ++i) sq += r.data[i] * r.data[i];
    });
    return std::sqrt(sq);
}

void clip_global_norm(ModelParams& grads, double max_norm) {
    const double norm = global_grad_norm(grads);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    visit_params(grads, [&](const ParamRef& r) {
        if (!r.trainable) return;
        for (std::size_t i = 0; i < r.rows * r.cols; ++i) r.data[i] *= scale;
    });
}

void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
    std::vector<const double*> gptrs;
    visit_params(grads, [&](const ParamRef& r) { gptrs.push_back(r.data); });
    std::size_t idx = 0;
    visit_params(params, [&](const ParamRef& r) {
        const double* g = gptrs[idx++];
        if (!r.trainable) return;
        for (std::size_t i = 0; i < r.rows * r.cols; ++i) r.data[i] -= lr * g[i];
    });
}

Mat dataset_objects(const Dataset& d) {
    Mat O(static_cast<Eigen::Index>(d.size()), 4);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (int c = 0; c < 4; ++c) O(static_cast<Eigen::Index>(i), c) = d[i].object[c];
    return O;
}

Mat dataset_actions(const Dataset& d) {
    Mat A(static_cast<Eigen::Index>(d.size()), kActionDim);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t c = 0; c < kActionDim; ++c)
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = d[i].action[c];
    return A;
}

Mat dataset_effects(const Dataset& d) {
    Mat E(static_cast<Eigen::Index>(d.size()), 3);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (int c = 0; c < 3; ++c) E(static_cast<Eigen::Index>(i), c) = d[i].effect[c];
    return E;
}

std::vector<double> train_epochs(ModelParams& params, const Dataset& data, const TrainConfig& cfg) {
    if (data.empty()) throw InputError("train_epochs: empty dataset");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.epochs < 0) throw ConfigError("train: epochs must be >= 0");
    const Mat O = dataset_objects(data);
    const Mat A = dataset_actions(data);
    const Mat E = dataset_effects(data);
    const std::size_t n = data.size();
    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

    std::vector<double> epoch_losses;
    std::vector<std::size_t> order(n);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle(Rng::derive(cfg.seed, {0x73687566ULL, static_cast<std::uint64_t>(epoch)}));
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);

        double loss_sum = 0.0;
        std::uint64_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += bs, ++batch_index) {
            const std::size_t count = std::min(bs, n - start);
            Mat bo(count, 4), ba(count, kActionDim), be(count, 3);
            for (std::size_t r = 0; r < count; ++r) {
                const auto src = static_cast<Eigen::Index>(order[start + r]);
                const auto dst = static_cast<Eigen::Index>(r);
                bo.row(dst) = O.row(src);
                ba.row(dst) = A.row(src);
                be.row(dst) = E.row(src);
            }
            const std::uint64_t mask_seed =
                Rng::derive(cfg.seed, {0x6d61736bULL, static_cast<std::uint64_t>(epoch), batch_index});
            ForwardCache cache;
            BatchLoss loss = forward_loss(params, bo, ba, be, Mode::train, mask_seed, cache);
            ModelParams grads = backward(params, cache, be);
            clip_global_norm(grads, cfg.clip_norm);
            commit_batchnorm_stats(params, cache);
            sgd_step(params, grads, cfg.learning_rate);
            params.train_steps += 1;
            loss_sum += loss.total * static_cast<double>(count);
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(n));
    }
    return epoch_losses;
}

}  // namespace curio::model
