// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/denoiser.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"

#include <algorithm>
#include <cmath>

namespace et2m {

using ad::Mat;
using ad::ParamId;
using ad::Tape;
using ad::Var;

std::string_view to_string(Backbone b) { return b == Backbone::conformer ? "conformer" : "transformer"; }

Backbone parse_backbone(std::string_view s) {
    if (s == "conformer") return Backbone::conformer;
    if (s == "transformer") return Backbone::transformer;
    throw ConfigError("unknown backbone: " + std::string(s));
}

void DenoiserConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("model." + msg);
    };
    need(motion_dim >= 1, "motion_dim must be >= 1");
    need(cond_dim >= 1, "cond_dim must be >= 1");
    need(n_blocks >= 1, "n_blocks must be >= 1");
    need(hidden >= 2 && hidden % 2 == 0, "hidden must be even and >= 2");
    need(downsample >= 1, "downsample must be >= 1");
    need(heads >= 1 && head_dim >= 1 && heads * head_dim == hidden, "heads * head_dim must equal hidden");
    need(ffn_expansion >= 1, "ffn_expansion must be >= 1");
    need(limm_kernel >= 1 && conv_width >= 1, "kernel sizes must be >= 1");
    need(norm_groups >= 1, "norm_groups must be >= 1");
    need(dropout_p >= 0.0 && dropout_p < 1.0, "dropout_p must be in [0, 1)");
    need(max_events >= 1, "max_events must be >= 1");
    need(rel_buckets >= 4 && rel_buckets % 2 == 0, "rel_buckets must be even and >= 4");
    need(rel_exact >= 1 && rel_exact < rel_buckets / 2, "rel_exact must be in [1, rel_buckets/2)");
    need(rel_max_distance > rel_exact, "rel_max_distance must exceed rel_exact");
    need(timesteps >= 1, "timesteps must be >= 1");
}

// ---- helpers ----------------------------------------------------------------

namespace {

Var dropout(ForwardContext& ctx, Var x) {
    if (!ctx.train || ctx.dropout_p <= 0.0) return x;
    if (!ctx.rng) throw ConfigError("dropout in training mode needs an rng");
    return ad::mul(x, ctx.tape.constant(ad::dropout_mask(x.rows(), x.cols(), ctx.dropout_p, *ctx.rng)));
}

Var layer_norm(Tape& tape, Var x, ParamId g, ParamId b) {
    return ad::add_row(ad::mul_row(ad::layer_norm_rows(x), tape.param(g)), tape.param(b));
}

Var bias_add(Tape& tape, Var x, ParamId b) { return ad::add_row(x, tape.param(b)); }

void expect_cols(Var x, Eigen::Index c, const char* what) {
    if (x.cols() != c) {
        throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(c) + " channels, got " +
                            std::to_string(x.cols()));
    }
}

}  // namespace

int relative_bucket(int offset, int buckets, int exact, int max_distance) {
    const int half = buckets / 2;
    const int base = offset > 0 ? half : 0;
    const int a = std::abs(offset);
    if (a < exact) return base + a;
    const double frac = std::log(static_cast<double>(a) / exact) / std::log(static_cast<double>(max_distance) / exact);
    const int b = exact + static_cast<int>(frac * (half - exact));
    return base + std::min(b, half - 1);
}

Mat sinusoidal_embedding(const std::vector<double>& positions, int dim) {
    Mat out(static_cast<Eigen::Index>(positions.size()), dim);
    const int half = dim / 2;
    for (size_t r = 0; r < positions.size(); ++r) {
        for (int i = 0; i < half; ++i) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / std::max(1, half));
            out(static_cast<Eigen::Index>(r), i) = std::sin(positions[r] * freq);
            out(static_cast<Eigen::Index>(r), half + i) = std::cos(positions[r] * freq);
        }
        if (dim % 2) out(static_cast<Eigen::Index>(r), dim - 1) = 0.0;
    }
    return out;
}

Mat interpolation_matrix(Eigen::Index out_len, Eigen::Index in_len) {
    Mat m = Mat::Zero(out_len, in_len);
    const double ratio = static_cast<double>(in_len) / static_cast<double>(out_len);
    for (Eigen::Index i = 0; i < out_len; ++i) {
        const double pos = std::clamp((static_cast<double>(i) + 0.5) * ratio - 0.5, 0.0, static_cast<double>(in_len - 1));
        const auto lo = static_cast<Eigen::Index>(std::floor(pos));
        const auto hi = std::min(lo + 1, in_len - 1);
        const double w = pos - static_cast<double>(lo);
        m(i, lo) += 1.0 - w;
        m(i, hi) += w;
    }
    return m;
}

// ---- sublayers --------------------------------------------------------------

Var limm(ForwardContext& ctx, Var x, const LimmParams& p, int groups) {
    Tape& tape = ctx.tape;
    Var dw = tape.param(p.dw);
    expect_cols(x, dw.cols(), "limm");
    Var h = bias_add(tape, ad::depthwise_conv1d(x, dw), p.dw_b);
    h = ad::linear(tape, h, p.pw, p.pw_b);
    const int c = static_cast<int>(h.cols());
    int g = std::clamp(groups, 1, c);
    while (c % g) --g;
    h = ad::add_row(ad::mul_row(ad::group_norm(h, g), tape.param(p.gn_g)), tape.param(p.gn_b));
    return ad::relu(h);
}

Var atii(ForwardContext& ctx, Var x, Var global, const AtiiParams& p) {
    Tape& tape = ctx.tape;
    Var m = x;
    if (p.stride > 1) {
        m = ad::window_taps(x, tape.param(p.taps));
        m = ad::linear(tape, m, p.down_pw, p.down_b);
    }
    const Eigen::Index len = m.rows();
    Var g = ad::broadcast_rows(global, len);
    Var gate = ad::sigmoid(ad::linear(tape, ad::concat_cols({m, g}), p.w_c, p.b_c));
    if (ctx.trace) ctx.trace->gates.push_back(gate.value());
    Var g_hat = ad::mul(gate, g);
    return ad::linear(tape, ad::concat_cols({m, g_hat}), p.w_f, p.b_f);
}

Var feed_forward(ForwardContext& ctx, Var x, const FfnParams& p) {
    Tape& tape = ctx.tape;
    Var h = layer_norm(tape, x, p.ln_g, p.ln_b);
    h = dropout(ctx, ad::silu(ad::linear(tape, h, p.w1, p.b1)));
    return dropout(ctx, ad::linear(tape, h, p.w2, p.b2));
}

Var conformer_sa(ForwardContext& ctx, Var x, const SaParams& p, int heads, ParamId rel_table,
                 const DenoiserConfig& cfg, const std::vector<char>* key_valid) {
    Tape& tape = ctx.tape;
    const Eigen::Index len = x.rows();
    const Eigen::Index d = x.cols();
    if (d % heads) throw ShapeMismatch("conformer_sa: channels not divisible by heads");
    const Eigen::Index dh = d / heads;
    if (key_valid && static_cast<Eigen::Index>(key_valid->size()) != len) throw ShapeMismatch("conformer_sa: mask length");

    Var h = layer_norm(tape, x, p.ln_g, p.ln_b);
    Var q = ad::linear(tape, h, p.wq);
    Var k = ad::linear(tape, h, p.wk);
    Var v = ad::linear(tape, h, p.wv);

    std::optional<Var> mask;
    if (key_valid) {
        Mat mm = Mat::Zero(len, len);
        for (Eigen::Index j = 0; j < len; ++j) {
            if (!(*key_valid)[static_cast<size_t>(j)]) mm.col(j).setConstant(-1e30);
        }
        mask = tape.constant(std::move(mm));
    }
    std::vector<int> buckets;
    if (rel_table >= 0) {
        buckets.resize(static_cast<size_t>(len * len));
        for (Eigen::Index i = 0; i < len; ++i) {
            for (Eigen::Index j = 0; j < len; ++j) {
                buckets[static_cast<size_t>(i * len + j)] =
                    relative_bucket(static_cast<int>(j - i), cfg.rel_buckets, cfg.rel_exact, cfg.rel_max_distance);
            }
        }
    }
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    for (int hd = 0; hd < heads; ++hd) {
        Var qh = ad::slice_cols(q, hd * dh, dh);
        Var kh = ad::slice_cols(k, hd * dh, dh);
        Var vh = ad::slice_cols(v, hd * dh, dh);
        Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv);
        if (rel_table >= 0) {
            std::vector<int> idx(buckets);
            for (auto& b : idx) b += hd * cfg.rel_buckets;
            scores = ad::add(scores, ad::gather(tape.param(rel_table), idx, len, len));
        }
        if (mask) scores = ad::add(scores, *mask);
        Var attn = ad::softmax_rows(scores);
        if (ctx.trace) ctx.trace->sa_attention.push_back(attn.value());
        outs.push_back(ad::matmul(attn, vh));
    }
    Var z = heads == 1 ? outs.front() : ad::concat_cols(outs);
    return dropout(ctx, ad::linear(tape, z, p.wo, p.bo));
}

Var eca(ForwardContext& ctx, Var x, Var events, const EcaParams& p, int heads, std::optional<Var> key_offset) {
    Tape& tape = ctx.tape;
    if (events.rows() < 1) throw ShapeMismatch("eca: needs at least one event token");
    Var wq = tape.param(p.wq), wk = tape.param(p.wk);
    expect_cols(events, wk.rows(), "eca events");
    expect_cols(x, wq.rows(), "eca queries");
    const Eigen::Index d = wq.cols();
    if (d % heads) throw ShapeMismatch("eca: channels not divisible by heads");
    const Eigen::Index dh = d / heads;

    Var q = ad::matmul(x, wq);
    Var k = ad::matmul(key_offset ? ad::add(events, *key_offset) : events, wk);
    Var v = ad::linear(tape, events, p.wv);
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    for (int hd = 0; hd < heads; ++hd) {
        Var scores = ad::scale(ad::matmul(ad::slice_cols(q, hd * dh, dh), ad::transpose(ad::slice_cols(k, hd * dh, dh))), inv);
        Var attn = ad::softmax_rows(scores);
        if (ctx.trace) ctx.trace->eca_attention.push_back(attn.value());
        outs.push_back(ad::matmul(attn, ad::slice_cols(v, hd * dh, dh)));
    }
    Var z = heads == 1 ? outs.front() : ad::concat_cols(outs);
    Var o = dropout(ctx, ad::linear(tape, z, p.wo));
    return ad::scale_by(o, tape.param(p.gamma));
}

Var conformer_conv(ForwardContext& ctx, Var x, const ConvParams& p) {
    Tape& tape = ctx.tape;
    Var h = layer_norm(tape, x, p.ln_g, p.ln_b);
    h = ad::glu(ad::linear(tape, h, p.pw1, p.pw1_b));
    h = bias_add(tape, ad::depthwise_conv1d(h, tape.param(p.dw)), p.dw_b);
    h = ad::silu(layer_norm(tape, h, p.ln2_g, p.ln2_b));
    return dropout(ctx, ad::linear(tape, h, p.pw2, p.pw2_b));
}

// ---- model ------------------------------------------------------------------

namespace {

Mat randn(Eigen::Index r, Eigen::Index c, double std, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, std);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

Mat fan_in(Eigen::Index in, Eigen::Index out, std::mt19937_64& rng) {
    return randn(in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

}  // namespace

LimmParams Denoiser::make_limm(const std::string& prefix, int in_ch, int out_ch, std::mt19937_64& rng) {
    LimmParams p;
    p.dw = params_.add(prefix + ".dw", randn(cfg_.limm_kernel, in_ch, 1.0 / std::sqrt(cfg_.limm_kernel), rng));
    p.dw_b = params_.add(prefix + ".dw_b", Mat::Zero(1, in_ch));
    p.pw = params_.add(prefix + ".pw", fan_in(in_ch, out_ch, rng));
    p.pw_b = params_.add(prefix + ".pw_b", Mat::Zero(1, out_ch));
    p.gn_g = params_.add(prefix + ".gn_g", Mat::Ones(1, out_ch));
    p.gn_b = params_.add(prefix + ".gn_b", Mat::Zero(1, out_ch));
    return p;
}

FfnParams Denoiser::make_ffn(const std::string& prefix, std::mt19937_64& rng) {
    const int d = cfg_.hidden, e = cfg_.hidden * cfg_.ffn_expansion;
    FfnParams p;
    p.ln_g = params_.add(prefix + ".ln_g", Mat::Ones(1, d));
    p.ln_b = params_.add(prefix + ".ln_b", Mat::Zero(1, d));
    p.w1 = params_.add(prefix + ".w1", fan_in(d, e, rng));
    p.b1 = params_.add(prefix + ".b1", Mat::Zero(1, e));
    p.w2 = params_.add(prefix + ".w2", fan_in(e, d, rng));
    p.b2 = params_.add(prefix + ".b2", Mat::Zero(1, d));
    return p;
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    std::mt19937_64 rng(mix_seed(cfg_.seed, 0x64656e6fULL));
    const int d = cfg_.hidden, dy = cfg_.cond_dim, dm = cfg_.motion_dim;

    in_w_ = params_.add("input.w", fan_in(dm, d, rng));
    in_b_ = params_.add("input.b", Mat::Zero(1, d));
    rel_table_ = params_.add("sa.rel_bias", Mat::Zero(1, cfg_.heads * cfg_.rel_buckets));
    event_index_ = params_.add("eca.event_index", randn(cfg_.max_events, dy, 0.1, rng));
    null_g_ = params_.add("null.global", randn(1, dy, 0.1, rng));
    null_e_ = params_.add("null.event", randn(1, dy, 0.1, rng));

    auto up = [&](const std::string& prefix) {
        UpsampleParams u;
        u.pw = params_.add(prefix + ".pw", fan_in(d, d, rng));
        u.b = params_.add(prefix + ".b", Mat::Zero(1, d));
        return u;
    };

    for (int b = 0; b < cfg_.n_blocks; ++b) {
        const std::string pre = "block" + std::to_string(b);
        BlockParams bp;
        bp.limm_in = make_limm(pre + ".limm_in", 2 * d, d, rng);

        auto& a = bp.atii;
        a.stride = (b == 0 || cfg_.per_block_downsample) ? cfg_.downsample : 1;
        if (a.stride > 1) {
            a.taps = params_.add(pre + ".atii.taps", Mat::Constant(a.stride, d, 1.0 / a.stride));
            a.down_pw = params_.add(pre + ".atii.down_pw", fan_in(d, d, rng));
            a.down_b = params_.add(pre + ".atii.down_b", Mat::Zero(1, d));
        }
        a.w_c = params_.add(pre + ".atii.w_c", fan_in(d + dy, dy, rng));
        a.b_c = params_.add(pre + ".atii.b_c", Mat::Zero(1, dy));
        a.w_f = params_.add(pre + ".atii.w_f", fan_in(d + dy, d, rng));
        a.b_f = params_.add(pre + ".atii.b_f", Mat::Zero(1, d));

        bp.ffn1 = make_ffn(pre + ".ffn1", rng);

        auto& s = bp.sa;
        s.ln_g = params_.add(pre + ".sa.ln_g", Mat::Ones(1, d));
        s.ln_b = params_.add(pre + ".sa.ln_b", Mat::Zero(1, d));
        s.wq = params_.add(pre + ".sa.wq", fan_in(d, d, rng));
        s.wk = params_.add(pre + ".sa.wk", fan_in(d, d, rng));
        s.wv = params_.add(pre + ".sa.wv", fan_in(d, d, rng));
        s.wo = params_.add(pre + ".sa.wo", fan_in(d, d, rng));
        s.bo = params_.add(pre + ".sa.bo", Mat::Zero(1, d));

        if (cfg_.use_eca) {
            auto& e = bp.eca;
            e.wq = params_.add(pre + ".eca.wq", fan_in(d, d, rng));
            e.wk = params_.add(pre + ".eca.wk", fan_in(dy, d, rng));
            e.wv = params_.add(pre + ".eca.wv", fan_in(dy, d, rng));
            e.wo = params_.add(pre + ".eca.wo", fan_in(d, d, rng));
            e.gamma = params_.add(pre + ".eca.gamma", Mat::Zero(1, 1));
        }

        if (cfg_.backbone == Backbone::conformer) {
            auto& c = bp.conv;
            c.ln_g = params_.add(pre + ".conv.ln_g", Mat::Ones(1, d));
            c.ln_b = params_.add(pre + ".conv.ln_b", Mat::Zero(1, d));
            c.pw1 = params_.add(pre + ".conv.pw1", fan_in(d, 2 * d, rng));
            c.pw1_b = params_.add(pre + ".conv.pw1_b", Mat::Zero(1, 2 * d));
            c.dw = params_.add(pre + ".conv.dw", randn(cfg_.conv_width, d, 1.0 / std::sqrt(cfg_.conv_width), rng));
            c.dw_b = params_.add(pre + ".conv.dw_b", Mat::Zero(1, d));
            c.ln2_g = params_.add(pre + ".conv.ln2_g", Mat::Ones(1, d));
            c.ln2_b = params_.add(pre + ".conv.ln2_b", Mat::Zero(1, d));
            c.pw2 = params_.add(pre + ".conv.pw2", fan_in(d, d, rng));
            c.pw2_b = params_.add(pre + ".conv.pw2_b", Mat::Zero(1, d));
        } else {
            bp.ffn_mid = make_ffn(pre + ".ffn_mid", rng);
        }

        bp.ffn2 = make_ffn(pre + ".ffn2", rng);
        bp.limm_out = make_limm(pre + ".limm_out", d, d, rng);
        if (cfg_.per_block_downsample && a.stride > 1) bp.upsample = up(pre + ".upsample");
        blocks_.push_back(bp);
    }
    if (!cfg_.per_block_downsample && cfg_.downsample > 1) upsample_ = up("upsample");
    out_w_ = params_.add("output.w", fan_in(d, dm, rng));
    out_b_ = params_.add("output.b", Mat::Zero(1, dm));
}

ConditioningBundle Denoiser::null_bundle() const {
    ConditioningBundle b;
    b.events = params_[null_e_].value;
    b.global = params_[null_g_].value;
    b.is_null = true;
    return b;
}

Var Denoiser::global_token(Tape& tape, const ConditioningBundle& bundle) const {
    if (bundle.is_null) return tape.param(null_g_);
    if (bundle.global.cols() != cfg_.cond_dim) throw ShapeMismatch("global token width differs from cond_dim");
    return tape.constant(bundle.global);
}

Var Denoiser::event_tokens(Tape& tape, const ConditioningBundle& bundle) const {
    if (bundle.is_null) return tape.param(null_e_);
    if (bundle.events.rows() < 1) throw ShapeMismatch("bundle has no event tokens");
    if (bundle.events.cols() != cfg_.cond_dim) throw ShapeMismatch("event token width differs from cond_dim");
    return tape.constant(bundle.events);
}

Var Denoiser::event_index_offsets(Tape& tape, Eigen::Index k) const {
    Mat onehot = Mat::Zero(k, cfg_.max_events);
    for (Eigen::Index i = 0; i < k; ++i) onehot(i, std::min<Eigen::Index>(i, cfg_.max_events - 1)) = 1.0;
    return ad::matmul(tape.constant(std::move(onehot)), tape.param(event_index_));
}

Var Denoiser::block_forward(ForwardContext& ctx, int index, Var x, Var t_embed, Var global, Var events) const {
    Tape& tape = ctx.tape;
    const BlockParams& bp = block(index);
    const Eigen::Index len_in = x.rows();

    x = ad::add(x, limm(ctx, ad::concat_cols({x, ad::broadcast_rows(t_embed, len_in)}), bp.limm_in, cfg_.norm_groups));
    x = atii(ctx, x, global, bp.atii);
    if (ctx.trace) ctx.trace->block_lengths.push_back(x.rows());
    x = ad::add(ad::scale(x, 0.5), feed_forward(ctx, x, bp.ffn1));
    const bool conformer = cfg_.backbone == Backbone::conformer;
    x = ad::add(x, conformer_sa(ctx, x, bp.sa, cfg_.heads, conformer ? rel_table_ : -1, cfg_));
    if (cfg_.use_eca) {
        x = ad::add(x, eca(ctx, x, events, bp.eca, cfg_.heads, event_index_offsets(tape, events.rows())));
    }
    x = ad::add(x, conformer ? conformer_conv(ctx, x, bp.conv) : feed_forward(ctx, x, bp.ffn_mid));
    x = ad::add(ad::scale(x, 0.5), feed_forward(ctx, x, bp.ffn2));
    x = ad::add(x, limm(ctx, x, bp.limm_out, cfg_.norm_groups));
    if (bp.upsample) {
        x = ad::matmul(tape.constant(interpolation_matrix(len_in, x.rows())), x);
        x = ad::linear(tape, x, bp.upsample->pw, bp.upsample->b);
    }
    return x;
}

Var Denoiser::forward(ForwardContext& ctx, Var x_t, int t, const ConditioningBundle& bundle) const {
    Tape& tape = ctx.tape;
    if (t < 1 || t > cfg_.timesteps) throw TimestepOutOfRange("timestep " + std::to_string(t) + " outside [1, " + std::to_string(cfg_.timesteps) + "]");
    expect_cols(x_t, cfg_.motion_dim, "denoiser input");
    const Eigen::Index len = x_t.rows();
    if (len < 1) throw ShapeMismatch("denoiser input has no frames");
    ctx.dropout_p = cfg_.dropout_p;

    std::vector<double> pos(static_cast<size_t>(len));
    for (Eigen::Index i = 0; i < len; ++i) pos[static_cast<size_t>(i)] = static_cast<double>(i);
    Var x = ad::add(ad::linear(tape, x_t, in_w_, in_b_), tape.constant(sinusoidal_embedding(pos, cfg_.hidden)));
    Var t_embed = tape.constant(sinusoidal_embedding({static_cast<double>(t)}, cfg_.hidden));
    Var global = global_token(tape, bundle);
    Var events = event_tokens(tape, bundle);

    for (int b = 0; b < cfg_.n_blocks; ++b) x = block_forward(ctx, b, x, t_embed, global, events);
    if (upsample_) {
        x = ad::matmul(tape.constant(interpolation_matrix(len, x.rows())), x);
        x = ad::linear(tape, x, upsample_->pw, upsample_->b);
    }
    return ad::linear(tape, x, out_w_, out_b_);
}

Mat X0Model::predict(const Mat& x_t, int t, const ConditioningBundle& bundle) const {
    Tape tape(parameters());
    ForwardContext ctx{tape};
    return forward(ctx, tape.constant(x_t), t, bundle).value();
}

Mat Denoiser::predict(const Mat& x_t, int t, const ConditioningBundle& bundle, DenoiserTrace* trace) const {
    Tape tape(&params_);
    ForwardContext ctx{tape};
    ctx.trace = trace;
    return forward(ctx, tape.constant(x_t), t, bundle).value();
}

}  // namespace et2m
