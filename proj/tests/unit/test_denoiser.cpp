// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/denoiser.hpp"
#include "et2m/errors.hpp"
#include "support/fd.hpp"

#include <doctest.h>

#include <cmath>

using namespace et2m;
using ad::Mat;
using ad::Tape;
using ad::Var;
using et2m::testing::fd_check_input;
using et2m::testing::fd_check_params;
using et2m::testing::param_indices;
using et2m::testing::random_matrix;

namespace {

DenoiserConfig tiny(int hidden = 8, int heads = 2) {
    DenoiserConfig c;
    c.motion_dim = 3;
    c.cond_dim = 5;
    c.n_blocks = 2;
    c.hidden = hidden;
    c.heads = heads;
    c.head_dim = hidden / heads;
    c.downsample = 2;
    c.norm_groups = 2;
    c.max_events = 4;
    c.rel_buckets = 8;
    c.rel_exact = 2;
    c.rel_max_distance = 16;
    c.timesteps = 50;
    c.dropout_p = 0.0;
    c.seed = 5;
    return c;
}

ConditioningBundle bundle(int k, int dy, std::mt19937_64& rng) {
    ConditioningBundle b;
    b.events = random_matrix(k, dy, rng);
    b.global = random_matrix(1, dy, rng);
    return b;
}

Denoiser randomized(const DenoiserConfig& c, uint64_t seed, double scale = 0.3) {
    Denoiser m(c);
    std::mt19937_64 rng(seed);
    et2m::testing::randomize(m.params(), rng, scale);
    return m;
}

std::vector<ad::ParamId> ids(std::initializer_list<ad::ParamId> l) { return l; }

constexpr double kTol = 1e-3;

}  // namespace

// ---- finite-difference suite ------------------------------------------------

TEST_CASE("LIMM gradients") {
    auto m = randomized(tiny(4, 2), 1);
    const auto& p = m.block(1).limm_out;
    std::mt19937_64 rng(2);
    const Mat x = random_matrix(3, 4, rng);
    const Mat w = random_matrix(3, 4, rng);
    auto build = [&](Tape& t, Var in) {
        ForwardContext ctx{t};
        return et2m::testing::project(t, limm(ctx, in, p, 2), w);
    };
    CHECK(fd_check_input(&m.params(), x, build).max_rel < kTol);
    const auto rep = fd_check_params(m.params(), [&](Tape& t) { return build(t, t.constant(x)); },
                                     param_indices(m.params(), ids({p.dw, p.dw_b, p.pw, p.pw_b, p.gn_g, p.gn_b})));
    CHECK(rep.checked == 3 * 4 + 4 + 16 + 4 + 4 + 4);
    CHECK(rep.max_rel < kTol);
}

TEST_CASE("ATII gradients, with and without downsampling") {
    auto m = randomized(tiny(), 3);
    std::mt19937_64 rng(4);
    for (int b : {0, 1}) {
        const auto& p = m.block(b).atii;
        CHECK(p.stride == (b == 0 ? 2 : 1));
        const Mat x = random_matrix(5, 8, rng);
        const Mat g = random_matrix(1, 5, rng);
        const Mat w = random_matrix(b == 0 ? 3 : 5, 8, rng);
        auto build = [&](Tape& t, Var in) {
            ForwardContext ctx{t};
            return et2m::testing::project(t, atii(ctx, in, t.constant(g), p), w);
        };
        CHECK(fd_check_input(&m.params(), x, build).max_rel < kTol);
        CHECK(fd_check_input(&m.params(), g, [&](Tape& t, Var gg) {
                  ForwardContext ctx{t};
                  return et2m::testing::project(t, atii(ctx, t.constant(x), gg, p), w);
              }).max_rel < kTol);
        const auto rep = fd_check_params(m.params(), [&](Tape& t) { return build(t, t.constant(x)); },
                                         param_indices(m.params(), ids({p.taps, p.down_pw, p.down_b, p.w_c, p.b_c, p.w_f, p.b_f})));
        CHECK(rep.max_rel < kTol);
    }
}

TEST_CASE("ConformerSA gradients including the relative bias") {
    auto cfg = tiny();
    auto m = randomized(cfg, 5);
    const auto& p = m.block(0).sa;
    std::mt19937_64 rng(6);
    const Mat x = random_matrix(6, 8, rng);
    const Mat w = random_matrix(6, 8, rng);
    auto build = [&](Tape& t, Var in) {
        ForwardContext ctx{t};
        return et2m::testing::project(t, conformer_sa(ctx, in, p, cfg.heads, m.rel_table(), cfg), w);
    };
    CHECK(fd_check_input(&m.params(), x, build).max_rel < kTol);
    const auto rep = fd_check_params(m.params(), [&](Tape& t) { return build(t, t.constant(x)); },
                                     param_indices(m.params(), ids({p.ln_g, p.ln_b, p.wq, p.wk, p.wv, p.wo, p.bo, m.rel_table()})));
    CHECK(rep.max_rel < kTol);
}

TEST_CASE("ECA gradients") {
    auto cfg = tiny();
    auto m = randomized(cfg, 7);
    const auto& p = m.block(0).eca;
    std::mt19937_64 rng(8);
    const Mat x = random_matrix(4, 8, rng);
    const Mat e = random_matrix(3, 5, rng);
    const Mat w = random_matrix(4, 8, rng);
    auto build = [&](Tape& t, Var in, Var ev) {
        ForwardContext ctx{t};
        return et2m::testing::project(t, eca(ctx, in, ev, p, cfg.heads, m.event_index_offsets(t, 3)), w);
    };
    CHECK(fd_check_input(&m.params(), x, [&](Tape& t, Var in) { return build(t, in, t.constant(e)); }).max_rel < kTol);
    CHECK(fd_check_input(&m.params(), e, [&](Tape& t, Var ev) { return build(t, t.constant(x), ev); }).max_rel < kTol);
    const auto rep = fd_check_params(m.params(), [&](Tape& t) { return build(t, t.constant(x), t.constant(e)); },
                                     param_indices(m.params(), ids({p.wq, p.wk, p.wv, p.wo, p.gamma, m.params().find("eca.event_index")})));
    CHECK(rep.max_rel < kTol);
}

TEST_CASE("ConformerConv gradients on a 4x6 input") {
    auto cfg = tiny(6, 2);
    auto m = randomized(cfg, 9);
    const auto& p = m.block(0).conv;
    std::mt19937_64 rng(10);
    const Mat x = random_matrix(4, 6, rng);
    const Mat w = random_matrix(4, 6, rng);
    auto build = [&](Tape& t, Var in) {
        ForwardContext ctx{t};
        return et2m::testing::project(t, conformer_conv(ctx, in, p), w);
    };
    CHECK(fd_check_input(&m.params(), x, build).max_rel < kTol);
    const auto rep = fd_check_params(m.params(), [&](Tape& t) { return build(t, t.constant(x)); },
                                     param_indices(m.params(), ids({p.ln_g, p.ln_b, p.pw1, p.pw1_b, p.dw, p.dw_b, p.ln2_g, p.ln2_b, p.pw2, p.pw2_b})));
    CHECK(rep.max_rel < kTol);
}

TEST_CASE("FFN gradients, including inverted dropout with a fixed mask") {
    auto m = randomized(tiny(), 11);
    const auto& p = m.block(0).ffn1;
    std::mt19937_64 rng(12);
    const Mat x = random_matrix(5, 8, rng);
    const Mat w = random_matrix(5, 8, rng);
    for (bool train : {false, true}) {
        auto build = [&](Tape& t, Var in) {
            std::mt19937_64 drop_rng(99);  // same mask on every evaluation
            ForwardContext ctx{t, train, &drop_rng, train ? 0.3 : 0.0};
            return et2m::testing::project(t, feed_forward(ctx, in, p), w);
        };
        CHECK(fd_check_input(&m.params(), x, build).max_rel < kTol);
        const auto rep = fd_check_params(m.params(), [&](Tape& t) { return build(t, t.constant(x)); },
                                         param_indices(m.params(), ids({p.ln_g, p.ln_b, p.w1, p.b1, p.w2, p.b2})));
        CHECK(rep.max_rel < kTol);
    }
}

TEST_CASE("full block gradients on a 2-frame D=8 config") {
    for (auto backbone : {Backbone::conformer, Backbone::transformer}) {
        auto cfg = tiny();
        cfg.backbone = backbone;
        auto m = randomized(cfg, 13);
        std::mt19937_64 rng(14);
        const Mat x = random_matrix(2, 8, rng);
        const Mat te = random_matrix(1, 8, rng);
        auto b = bundle(3, 5, rng);
        const Mat w = random_matrix(1, 8, rng);  // block 0 downsamples 2 -> 1
        auto build = [&](Tape& t, Var in) {
            ForwardContext ctx{t};
            Var out = m.block_forward(ctx, 0, in, t.constant(te), t.constant(b.global), t.constant(b.events));
            return et2m::testing::project(t, out, w);
        };
        INFO(to_string(backbone));
        CHECK(fd_check_input(&m.params(), x, build).max_rel < kTol);
        std::vector<ad::ParamId> block_ids;
        for (int i = 0; i < m.params().size(); ++i) {
            if (m.params()[i].name.rfind("block0.", 0) == 0 || m.params()[i].name == "sa.rel_bias" ||
                m.params()[i].name == "eca.event_index") {
                block_ids.push_back(i);
            }
        }
        const auto rep = fd_check_params(m.params(), [&](Tape& t) { return build(t, t.constant(x)); }, param_indices(m.params(), block_ids));
        CHECK(rep.checked > 500);
        CHECK(rep.max_rel < kTol);
    }
}

TEST_CASE("full model loss gradient on a sampled 32-parameter subset") {
    auto cfg = tiny();
    auto m = randomized(cfg, 15, 0.2);
    std::mt19937_64 rng(16);
    const Mat x_t = random_matrix(7, 3, rng);
    const Mat x0 = random_matrix(7, 3, rng);
    auto b = bundle(2, 5, rng);
    auto build = [&](Tape& t) {
        ForwardContext ctx{t};
        return ad::mean_square(ad::sub(m.forward(ctx, t.constant(x_t), 17, b), t.constant(x0)));
    };
    const auto subset = et2m::testing::sample_indices(static_cast<size_t>(m.params().scalar_count()), 32, rng);
    const auto rep = fd_check_params(m.params(), build, subset);
    CHECK(rep.checked == 32);
    CHECK(rep.max_rel < kTol);
    CHECK(fd_check_input(&m.params(), x_t, [&](Tape& t, Var in) {
              ForwardContext ctx{t};
              return ad::mean_square(ad::sub(m.forward(ctx, in, 17, b), t.constant(x0)));
          }).max_rel < kTol);
}

TEST_CASE("null tokens receive gradients when the null bundle is used") {
    auto cfg = tiny();
    auto m = randomized(cfg, 17);
    std::mt19937_64 rng(18);
    const Mat x_t = random_matrix(4, 3, rng);
    const auto nb = m.null_bundle();
    auto build = [&](Tape& t) {
        ForwardContext ctx{t};
        return ad::mean_square(m.forward(ctx, t.constant(x_t), 3, nb));
    };
    const auto idx = param_indices(m.params(), ids({m.params().find("null.global"), m.params().find("null.event")}));
    const auto rep = fd_check_params(m.params(), build, idx);
    CHECK(rep.max_rel < kTol);
    ad::Tape t(&m.params());
    ad::Gradients g(m.params());
    t.backward(build(t), &g);
    CHECK(g.grads[static_cast<size_t>(m.params().find("null.global"))].norm() > 0.0);
    CHECK(g.grads[static_cast<size_t>(m.params().find("null.event"))].norm() > 0.0);
}

// ---- sublayer contracts -----------------------------------------------------

TEST_CASE("LIMM zero and length contracts") {
    Denoiser m(tiny(4, 2));
    Tape t(&m.params());
    ForwardContext ctx{t};
    const auto& p = m.block(1).limm_out;
    CHECK(limm(ctx, t.constant(Mat::Zero(5, 4)), p, 2).value().isZero(0.0));
    std::mt19937_64 rng(1);
    CHECK(limm(ctx, t.constant(random_matrix(1, 4, rng)), p, 2).rows() == 1);
    CHECK(limm(ctx, t.constant(random_matrix(9, 4, rng)), p, 3).rows() == 9);  // groups clamp to a divisor
    CHECK_THROWS_AS(limm(ctx, t.constant(Mat::Zero(3, 5)), p, 2), ShapeMismatch);
}

TEST_CASE("ATII gate contracts") {
    auto cfg = tiny();
    cfg.cond_dim = 32;
    cfg.downsample = 1;
    Denoiser m(cfg);
    std::mt19937_64 rng(2);
    const Mat x = random_matrix(400, 8, rng, 3.0);
    const Mat g = random_matrix(1, 32, rng);
    {
        DenoiserTrace trace;
        Tape t(&m.params());
        ForwardContext ctx{t, false, nullptr, 0.0, &trace};
        Var out = atii(ctx, t.constant(x), t.constant(g), m.block(0).atii);
        CHECK(out.rows() == 400);  // S = 1
        REQUIRE(trace.gates.size() == 1);
        const Mat& gate = trace.gates[0];
        CHECK(gate.size() >= 10000);
        CHECK(gate.minCoeff() > 0.0);
        CHECK(gate.maxCoeff() < 1.0);
    }
    // W_c = 0, b_c = 0: the gate is exactly one half everywhere.
    m.params()[m.block(0).atii.w_c].value.setZero();
    DenoiserTrace trace;
    Tape t(&m.params());
    ForwardContext ctx{t, false, nullptr, 0.0, &trace};
    atii(ctx, t.constant(x), t.constant(g), m.block(0).atii);
    CHECK((trace.gates[0].array() == 0.5).all());
}

TEST_CASE("ATII downsampling length is ceil(L/S)") {
    for (int s : {1, 2, 3, 8}) {
        auto cfg = tiny();
        cfg.downsample = s;
        Denoiser m(cfg);
        for (int L : {1, 5, 8, 17}) {
            Tape t(&m.params());
            ForwardContext ctx{t};
            Var out = atii(ctx, t.constant(Mat::Ones(L, 8)), t.constant(Mat::Ones(1, 5)), m.block(0).atii);
            CHECK(out.rows() == (L + s - 1) / s);
        }
    }
}

TEST_CASE("self-attention rows are distributions") {
    auto cfg = tiny();
    auto m = randomized(cfg, 3, 1.0);
    std::mt19937_64 rng(4);
    DenoiserTrace trace;
    Tape t(&m.params());
    ForwardContext ctx{t, false, nullptr, 0.0, &trace};
    conformer_sa(ctx, t.constant(random_matrix(1, 8, rng)), m.block(0).sa, cfg.heads, m.rel_table(), cfg);
    for (const auto& a : trace.sa_attention) CHECK(a(0, 0) == 1.0);
    trace.sa_attention.clear();
    conformer_sa(ctx, t.constant(random_matrix(20, 8, rng, 5.0)), m.block(0).sa, cfg.heads, m.rel_table(), cfg);
    REQUIRE(trace.sa_attention.size() == 2);
    for (const auto& a : trace.sa_attention) {
        for (int r = 0; r < a.rows(); ++r) CHECK(std::abs(a.row(r).sum() - 1.0) < 1e-6);
    }
}

TEST_CASE("relative bias makes self-attention translation equivariant") {
    auto cfg = tiny();
    auto m = randomized(cfg, 21, 0.8);
    std::mt19937_64 rng(22);
    const Mat x = random_matrix(9, 8, rng);
    const int shift = 5;
    Mat padded = Mat::Zero(9 + shift, 8);
    padded.bottomRows(9) = x;
    padded.topRows(shift) = random_matrix(shift, 8, rng);  // content never attended to
    std::vector<char> valid(9 + shift, 1);
    for (int i = 0; i < shift; ++i) valid[static_cast<size_t>(i)] = 0;
    Tape t(&m.params());
    ForwardContext ctx{t};
    const Mat a = conformer_sa(ctx, t.constant(x), m.block(0).sa, cfg.heads, m.rel_table(), cfg).value();
    const Mat b = conformer_sa(ctx, t.constant(padded), m.block(0).sa, cfg.heads, m.rel_table(), cfg, &valid).value();
    CHECK((a - b.bottomRows(9)).cwiseAbs().maxCoeff() < 1e-12);
    // The bias is not trivially zero, so this is not vacuous.
    CHECK(m.params()[m.rel_table()].value.norm() > 0.0);
}

TEST_CASE("relative buckets") {
    CHECK(relative_bucket(0, 32, 8, 128) == 0);
    for (int off = -300; off <= 300; ++off) {
        const int b = relative_bucket(off, 32, 8, 128);
        CHECK(b >= 0);
        CHECK(b < 32);
        if (off > 0) CHECK(b >= 16);
        if (off <= 0) CHECK(b < 16);
        if (std::abs(off) < 8) CHECK(b == (off > 0 ? 16 : 0) + std::abs(off));
    }
    for (int off = 1; off < 300; ++off) CHECK(relative_bucket(off + 1, 32, 8, 128) >= relative_bucket(off, 32, 8, 128));
    CHECK(relative_bucket(1000, 32, 8, 128) == 31);
    CHECK(relative_bucket(-1000, 32, 8, 128) == 15);
}

TEST_CASE("ECA contracts") {
    auto cfg = tiny();
    Denoiser fresh(cfg);
    std::mt19937_64 rng(5);
    const Mat x = random_matrix(6, 8, rng);
    const Mat e = random_matrix(3, 5, rng);
    {
        Tape t(&fresh.params());
        ForwardContext ctx{t};
        CHECK(eca(ctx, t.constant(x), t.constant(e), fresh.block(0).eca, cfg.heads).value().isZero(0.0));
    }
    auto m = randomized(cfg, 6, 0.8);
    const auto& p = m.block(0).eca;
    SUBCASE("single event: weights are exactly one") {
        DenoiserTrace trace;
        Tape t(&m.params());
        ForwardContext ctx{t, false, nullptr, 0.0, &trace};
        const Mat out = eca(ctx, t.constant(x), t.constant(e.topRows(1)), p, cfg.heads).value();
        for (const auto& a : trace.eca_attention) CHECK((a.array() == 1.0).all());
        // gamma * (V row broadcast) W_O, by hand.
        const Mat v = e.topRows(1) * m.params()[p.wv].value;
        const Mat expected = (v * m.params()[p.wo].value * m.params()[p.gamma].value(0, 0)).replicate(6, 1);
        CHECK((out - expected).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("a duplicated single event splits its weight in half and keeps the output") {
        Mat dup(2, 5);
        dup << e.row(0), e.row(0);
        DenoiserTrace t1, t2;
        Tape t(&m.params());
        ForwardContext c1{t, false, nullptr, 0.0, &t1};
        ForwardContext c2{t, false, nullptr, 0.0, &t2};
        const Mat o1 = eca(c1, t.constant(x), t.constant(e.topRows(1)), p, cfg.heads).value();
        const Mat o2 = eca(c2, t.constant(x), t.constant(dup), p, cfg.heads).value();
        CHECK((o1 - o2).cwiseAbs().maxCoeff() < 1e-12);
        for (const auto& a : t2.eca_attention) CHECK(((a.array() - 0.5).abs() < 1e-15).all());
    }
    SUBCASE("with several events a duplicate follows the brute-force softmax") {
        // Each copy of event j gets exp(s_j) / (Z + exp(s_j)); the pair then
        // holds more mass than j alone did, so the output does change.
        Mat dup(4, 5);
        dup << e, e.row(1);
        DenoiserTrace t1, t2;
        Tape t(&m.params());
        ForwardContext c1{t, false, nullptr, 0.0, &t1};
        ForwardContext c2{t, false, nullptr, 0.0, &t2};
        eca(c1, t.constant(x), t.constant(e), p, cfg.heads);
        eca(c2, t.constant(x), t.constant(dup), p, cfg.heads);
        for (size_t h = 0; h < t1.eca_attention.size(); ++h) {
            const Mat& a = t1.eca_attention[h];
            const Mat& b = t2.eca_attention[h];
            for (int r = 0; r < a.rows(); ++r) {
                CHECK(std::abs(a.row(r).sum() - 1.0) < 1e-12);
                const double z = a(r, 0) + a(r, 1) + a(r, 2);
                CHECK(std::abs(b(r, 1) - b(r, 3)) < 1e-12);
                CHECK(std::abs(b(r, 1) - a(r, 1) / (z + a(r, 1))) < 1e-12);
                CHECK(std::abs(b(r, 0) / b(r, 2) - a(r, 0) / a(r, 2)) < 1e-9);
            }
        }
    }
    Tape t(&m.params());
    ForwardContext ctx{t};
    CHECK_THROWS_AS(eca(ctx, t.constant(x), t.constant(Mat(0, 5)), p, cfg.heads), ShapeMismatch);
    CHECK_THROWS_AS(eca(ctx, t.constant(x), t.constant(Mat::Ones(2, 4)), p, cfg.heads), ShapeMismatch);
}

TEST_CASE("ConformerConv contracts") {
    auto cfg = tiny(6, 2);
    Denoiser m(cfg);
    const auto& p = m.block(0).conv;
    CHECK(m.params()[p.pw1].value.cols() == 12);
    CHECK(m.params()[p.dw].value.cols() == 6);  // after GLU: 12 / 2
    CHECK(m.params()[p.dw].value.rows() == cfg.conv_width);
    for (auto id : {p.ln_g, p.ln_b, p.pw1, p.pw1_b, p.dw, p.dw_b, p.ln2_g, p.ln2_b, p.pw2, p.pw2_b}) m.params()[id].value.setZero();
    std::mt19937_64 rng(1);
    Tape t(&m.params());
    ForwardContext ctx{t};
    const Mat out = conformer_conv(ctx, t.constant(random_matrix(7, 6, rng)), p).value();
    CHECK(out.rows() == 7);
    CHECK(out.isZero(0.0));
}

// ---- block and model properties ---------------------------------------------

TEST_CASE("zeroed sublayers leave a quarter of the input") {
    for (auto backbone : {Backbone::conformer, Backbone::transformer}) {
        auto cfg = tiny();
        cfg.backbone = backbone;
        cfg.downsample = 1;
        auto m = randomized(cfg, 30);
        for (int i = 0; i < m.params().size(); ++i) m.params()[i].value.setZero();
        // ATII is a replacement, not a residual: make it pass motion through.
        auto& wf = m.params()[m.block(0).atii.w_f].value;
        wf.topRows(8).setIdentity();
        std::mt19937_64 rng(31);
        const Mat x = random_matrix(6, 8, rng, 4.0);
        auto b = bundle(3, 5, rng);
        Tape t(&m.params());
        ForwardContext ctx{t};
        const Mat out = m.block_forward(ctx, 0, t.constant(x), t.constant(random_matrix(1, 8, rng)), t.constant(b.global),
                                        t.constant(b.events))
                            .value();
        INFO(to_string(backbone));
        CHECK(out == 0.25 * x);
    }
}

TEST_CASE("at gamma = 0 the event tokens have no effect") {
    auto cfg = tiny();
    cfg.n_blocks = 3;
    Denoiser m(cfg);
    std::mt19937_64 rng(40);
    const Mat x = random_matrix(11, 3, rng);
    auto b1 = bundle(2, 5, rng);
    auto b2 = b1;
    b2.events = random_matrix(4, 5, rng, 100.0);
    CHECK(m.predict(x, 9, b1) == m.predict(x, 9, b2));
    // Changing G does change the output.
    auto b3 = b1;
    b3.global = random_matrix(1, 5, rng);
    CHECK(m.predict(x, 9, b1) != m.predict(x, 9, b3));
    // With gamma != 0 the events matter.
    for (int i = 0; i < cfg.n_blocks; ++i) m.params()[m.block(i).eca.gamma].value(0, 0) = 0.5;
    CHECK(m.predict(x, 9, b1) != m.predict(x, 9, b2));
}

TEST_CASE("initialization values") {
    Denoiser m(tiny());
    for (int i = 0; i < 2; ++i) CHECK(m.params()[m.block(i).eca.gamma].value(0, 0) == 0.0);
    CHECK(m.params()[m.rel_table()].value.isZero(0.0));
    const auto n1 = m.null_bundle();
    const auto n2 = m.null_bundle();
    CHECK(n1.k() == 1);
    CHECK(n1.is_null);
    CHECK(n1.events == n2.events);
    CHECK(n1.global == n2.global);
    Denoiser again(tiny());
    CHECK(again.params().content_hash() == m.params().content_hash());
}

TEST_CASE("output shape matches input for several lengths") {
    auto cfg = tiny(16, 4);
    cfg.motion_dim = 7;
    cfg.downsample = 4;
    Denoiser m(cfg);
    std::mt19937_64 rng(50);
    auto b = bundle(3, 5, rng);
    for (int L : {1, 7, 196}) {
        DenoiserTrace trace;
        const Mat out = m.predict(random_matrix(L, 7, rng), 25, b, &trace);
        CHECK(out.rows() == L);
        CHECK(out.cols() == 7);
        CHECK(out.allFinite());
        REQUIRE(trace.block_lengths.size() == 2);
        CHECK(trace.block_lengths[0] == (L + 3) / 4);
        CHECK(trace.block_lengths[1] == (L + 3) / 4);
    }
}

TEST_CASE("per-block downsampling keeps the input length between blocks") {
    auto cfg = tiny();
    cfg.per_block_downsample = true;
    Denoiser m(cfg);
    CHECK(m.block(1).atii.stride == 2);
    CHECK(m.block(1).upsample.has_value());
    std::mt19937_64 rng(51);
    DenoiserTrace trace;
    const Mat out = m.predict(random_matrix(9, 3, rng), 4, bundle(2, 5, rng), &trace);
    CHECK(out.rows() == 9);
    CHECK(trace.block_lengths == std::vector<Eigen::Index>{5, 5});
}

TEST_CASE("eval mode is bitwise deterministic") {
    auto m = randomized(tiny(), 60);
    std::mt19937_64 rng(61);
    const Mat x = random_matrix(13, 3, rng);
    auto b = bundle(3, 5, rng);
    CHECK(m.predict(x, 30, b) == m.predict(x, 30, b));
}

TEST_CASE("transformer backbone swaps the convolution for a feed-forward") {
    auto cfg = tiny();
    cfg.backbone = Backbone::transformer;
    auto m = randomized(cfg, 70);
    CHECK(m.params().find("block0.conv.pw1") == -1);
    CHECK(m.params().find("block0.ffn_mid.w1") >= 0);
    std::mt19937_64 rng(71);
    const Mat x = random_matrix(10, 3, rng);
    auto b = bundle(2, 5, rng);
    const Mat out = m.predict(x, 5, b);
    CHECK(out.rows() == 10);
    CHECK(out.cols() == 3);
    // No relative bias: changing its table changes nothing.
    m.params()[m.rel_table()].value.setConstant(3.0);
    CHECK(m.predict(x, 5, b) == out);

    auto conf = tiny();
    auto mc = randomized(conf, 70);
    const Mat before = mc.predict(x, 5, b);
    mc.params()[mc.rel_table()].value.setConstant(3.0);
    mc.params()[mc.rel_table()].value(0, 1) = -2.0;
    CHECK(mc.predict(x, 5, b) != before);
}

TEST_CASE("input validation") {
    Denoiser m(tiny());
    std::mt19937_64 rng(80);
    auto b = bundle(2, 5, rng);
    CHECK_THROWS_AS(m.predict(Mat::Zero(4, 3), 0, b), TimestepOutOfRange);
    CHECK_THROWS_AS(m.predict(Mat::Zero(4, 3), 51, b), TimestepOutOfRange);
    CHECK_THROWS_AS(m.predict(Mat::Zero(4, 2), 1, b), ShapeMismatch);
    auto wrong = b;
    wrong.global = Mat::Zero(1, 4);
    CHECK_THROWS_AS(m.predict(Mat::Zero(4, 3), 1, wrong), ShapeMismatch);
    auto bad = tiny();
    bad.head_dim = 3;
    CHECK_THROWS_AS(Denoiser{bad}, ConfigError);
    CHECK(parse_backbone("transformer") == Backbone::transformer);
    CHECK_THROWS_AS(parse_backbone("rnn"), ConfigError);
}

TEST_CASE("event index embedding distinguishes event order") {
    auto cfg = tiny();
    auto m = randomized(cfg, 90);
    std::mt19937_64 rng(91);
    const Mat x = random_matrix(8, 3, rng);
    auto b = bundle(3, 5, rng);
    auto swapped = b;
    swapped.events.row(0) = b.events.row(2);
    swapped.events.row(2) = b.events.row(0);
    CHECK((m.predict(x, 7, b) - m.predict(x, 7, swapped)).norm() > 1e-6);
}

TEST_CASE("helper matrices") {
    CHECK(interpolation_matrix(5, 5).isIdentity(1e-15));
    const Mat up = interpolation_matrix(9, 3);
    for (int r = 0; r < up.rows(); ++r) CHECK(up.row(r).sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((up.array() >= 0.0).all());
    const Mat e = sinusoidal_embedding({0.0, 3.0}, 8);
    CHECK(e(0, 0) == 0.0);
    CHECK(e(0, 4) == 1.0);
    CHECK(e(1, 0) == doctest::Approx(std::sin(3.0)));
}
