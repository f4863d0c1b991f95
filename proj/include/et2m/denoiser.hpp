// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// The x0-predicting denoiser: input projection, N blocks of
//   x += LIMM(x ++ t); x = ATII(x, G); x = 0.5x + FFN(x); x += SA(x);
//   x += ECA(x, E); x += Conv(x); x = 0.5x + FFN(x); x += LIMM(x)
// then an upsampler back to the input length and an output projection.

#pragma once

#include "et2m/autodiff.hpp"
#include "et2m/text_encoding.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace et2m {

enum class Backbone { conformer, transformer };
std::string_view to_string(Backbone b);
Backbone parse_backbone(std::string_view s);

struct DenoiserConfig {
    int motion_dim = 263;
    int cond_dim = 512;  // D_y, set from the text encoder
    int n_blocks = 4;
    int hidden = 256;
    int downsample = 8;
    int heads = 4;
    int head_dim = 64;
    int ffn_expansion = 2;
    int limm_kernel = 3;
    int conv_width = 4;  // depthwise kernel of the conformer convolution module
    int norm_groups = 8;
    double dropout_p = 0.1;
    Backbone backbone = Backbone::conformer;
    bool per_block_downsample = false;
    bool use_eca = true;     // false: global-token-only conditioning
    int max_events = 16;     // size of the event-index key embedding
    int rel_buckets = 32;
    int rel_exact = 8;
    int rel_max_distance = 128;
    int timesteps = 1000;
    uint64_t seed = 0;

    void validate() const;  // throws ConfigError
};

struct LimmParams {
    ad::ParamId dw = -1, dw_b = -1, pw = -1, pw_b = -1, gn_g = -1, gn_b = -1;
};
struct AtiiParams {
    int stride = 1;
    ad::ParamId taps = -1, down_pw = -1, down_b = -1;  // only when stride > 1
    ad::ParamId w_c = -1, b_c = -1, w_f = -1, b_f = -1;
};
struct FfnParams {
    ad::ParamId ln_g = -1, ln_b = -1, w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};
struct SaParams {
    ad::ParamId ln_g = -1, ln_b = -1, wq = -1, wk = -1, wv = -1, wo = -1, bo = -1;
};
struct EcaParams {
    ad::ParamId wq = -1, wk = -1, wv = -1, wo = -1, gamma = -1;
};
struct ConvParams {
    ad::ParamId ln_g = -1, ln_b = -1, pw1 = -1, pw1_b = -1, dw = -1, dw_b = -1;
    ad::ParamId ln2_g = -1, ln2_b = -1, pw2 = -1, pw2_b = -1;
};
struct UpsampleParams {
    ad::ParamId pw = -1, b = -1;
};
struct BlockParams {
    LimmParams limm_in;
    AtiiParams atii;
    FfnParams ffn1;
    SaParams sa;
    EcaParams eca;
    ConvParams conv;  // conformer backbone
    FfnParams ffn_mid;  // transformer backbone, in place of conv
    FfnParams ffn2;
    LimmParams limm_out;
    std::optional<UpsampleParams> upsample;  // per-block downsampling only
};

// Intermediate values collected for tests and diagnostics.
struct DenoiserTrace {
    std::vector<Mat> sa_attention;   // one (L' x L') matrix per block and head
    std::vector<Mat> eca_attention;  // one (L' x K) matrix per block and head
    std::vector<Mat> gates;          // sigmoid outputs, one per block
    std::vector<Eigen::Index> block_lengths;
};

struct ForwardContext {
    ad::Tape& tape;
    bool train = false;
    std::mt19937_64* rng = nullptr;  // required when train && dropout_p > 0
    double dropout_p = 0.0;
    DenoiserTrace* trace = nullptr;
};

// Sublayers. Sequences are (length x channels).
ad::Var limm(ForwardContext& ctx, ad::Var x, const LimmParams& p, int groups);
ad::Var atii(ForwardContext& ctx, ad::Var x, ad::Var global, const AtiiParams& p);
ad::Var feed_forward(ForwardContext& ctx, ad::Var x, const FfnParams& p);
// rel_table is a 1 x (heads * buckets) parameter, or -1 for no relative bias.
// key_valid, when given, masks padded keys out of the softmax.
ad::Var conformer_sa(ForwardContext& ctx, ad::Var x, const SaParams& p, int heads, ad::ParamId rel_table,
                     const DenoiserConfig& cfg, const std::vector<char>* key_valid = nullptr);
// key_offset (K x D_y), when given, is added to the events before the key
// projection only.
ad::Var eca(ForwardContext& ctx, ad::Var x, ad::Var events, const EcaParams& p, int heads,
            std::optional<ad::Var> key_offset = std::nullopt);
ad::Var conformer_conv(ForwardContext& ctx, ad::Var x, const ConvParams& p);

// Signed offset (key - query) to bucket index in [0, buckets).
int relative_bucket(int offset, int buckets, int exact, int max_distance);
// Rows are sinusoidal embeddings of `positions`, width `dim`.
Mat sinusoidal_embedding(const std::vector<double>& positions, int dim);
// (out_len x in_len) linear interpolation matrix.
Mat interpolation_matrix(Eigen::Index out_len, Eigen::Index in_len);

// Anything that maps (x_t, t, conditioning) to an estimate of x0. The loss
// and the sampler only see this interface, so tests can plug in oracles.
class X0Model {
public:
    virtual ~X0Model() = default;
    virtual ad::Var forward(ForwardContext& ctx, ad::Var x_t, int t, const ConditioningBundle& bundle) const = 0;
    virtual Mat predict(const Mat& x_t, int t, const ConditioningBundle& bundle) const;
    virtual ConditioningBundle null_bundle() const = 0;
    virtual int motion_dim() const = 0;
    virtual const ad::ParameterSet* parameters() const { return nullptr; }
};

class Denoiser : public X0Model {
public:
    explicit Denoiser(DenoiserConfig cfg);

    // x_t is (L x motion_dim); returns x0_hat of the same shape.
    ad::Var forward(ForwardContext& ctx, ad::Var x_t, int t, const ConditioningBundle& bundle) const override;
    Mat predict(const Mat& x_t, int t, const ConditioningBundle& bundle) const override { return predict(x_t, t, bundle, nullptr); }
    Mat predict(const Mat& x_t, int t, const ConditioningBundle& bundle, DenoiserTrace* trace) const;
    const ad::ParameterSet* parameters() const override { return &params_; }
    int motion_dim() const override { return cfg_.motion_dim; }

    // One block on an already-projected hidden sequence.
    ad::Var block_forward(ForwardContext& ctx, int index, ad::Var x, ad::Var t_embed, ad::Var global,
                          ad::Var events) const;

    // Learned unconditional tokens; forward() substitutes the parameters
    // whenever bundle.is_null is set so they receive gradients.
    ConditioningBundle null_bundle() const override;

    const DenoiserConfig& config() const { return cfg_; }
    ad::ParameterSet& params() { return params_; }
    const ad::ParameterSet& params() const { return params_; }
    const BlockParams& block(int i) const { return blocks_[static_cast<size_t>(i)]; }
    ad::ParamId rel_table() const { return rel_table_; }

    // Resolves the conditioning tokens on a tape.
    ad::Var global_token(ad::Tape& tape, const ConditioningBundle& bundle) const;
    ad::Var event_tokens(ad::Tape& tape, const ConditioningBundle& bundle) const;
    ad::Var event_index_offsets(ad::Tape& tape, Eigen::Index k) const;

private:
    LimmParams make_limm(const std::string& prefix, int in_ch, int out_ch, std::mt19937_64& rng);
    FfnParams make_ffn(const std::string& prefix, std::mt19937_64& rng);

    DenoiserConfig cfg_;
    ad::ParameterSet params_;
    std::vector<BlockParams> blocks_;
    ad::ParamId in_w_ = -1, in_b_ = -1, out_w_ = -1, out_b_ = -1;
    ad::ParamId rel_table_ = -1, event_index_ = -1, null_g_ = -1, null_e_ = -1;
    std::optional<UpsampleParams> upsample_;
};

}  // namespace et2m
