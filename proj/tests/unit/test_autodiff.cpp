// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/autodiff.hpp"
#include "support/fd.hpp"

#include <doctest.h>

#include <functional>
#include <string>
#include <vector>

using namespace et2m;
using namespace et2m::ad;
using et2m::testing::fd_check_input;
using et2m::testing::random_matrix;

namespace {

using Op = std::function<Var(Tape&, Var)>;

void check_op(const std::string& name, const Mat& x, const Op& op, std::mt19937_64& rng, double tol = 1e-6) {
    // Project the output onto fixed random weights so every output entry matters.
    Mat w;
    {
        Tape probe;
        Var out = op(probe, probe.input(x));
        w = random_matrix(out.rows(), out.cols(), rng);
    }
    auto rep = fd_check_input(nullptr, x, [&](Tape& t, Var in) { return et2m::testing::project(t, op(t, in), w); });
    INFO(name);
    CHECK(rep.max_rel < tol);
}

}  // namespace

TEST_CASE("elementwise and structural ops match finite differences") {
    std::mt19937_64 rng(1);
    const Mat x = random_matrix(5, 6, rng);
    const Mat y = random_matrix(5, 6, rng);
    const Mat sq = random_matrix(6, 4, rng);
    const Mat row = random_matrix(1, 6, rng);

    check_op("add", x, [&](Tape& t, Var a) { return add(a, t.constant(y)); }, rng);
    check_op("sub", x, [&](Tape& t, Var a) { return sub(t.constant(y), a); }, rng);
    check_op("mul", x, [&](Tape& t, Var a) { return mul(a, t.constant(y)); }, rng);
    check_op("mul self", x, [](Tape&, Var a) { return mul(a, a); }, rng);
    check_op("scale", x, [](Tape&, Var a) { return scale(a, -2.5); }, rng);
    check_op("scale_by value", x, [](Tape& t, Var a) { return scale_by(t.constant(Mat::Constant(5, 6, 1.0)), slice_cols(slice_rows(a, 1, 1), 2, 1)); }, rng);
    check_op("scale_by matrix", x, [](Tape& t, Var a) { return scale_by(a, t.constant(Mat::Constant(1, 1, 0.7))); }, rng);
    check_op("matmul left", x, [&](Tape& t, Var a) { return matmul(a, t.constant(sq)); }, rng);
    check_op("matmul right", sq, [&](Tape& t, Var b) { return matmul(t.constant(x), b); }, rng);
    check_op("transpose", x, [](Tape&, Var a) { return transpose(a); }, rng);
    check_op("add_row matrix", x, [&](Tape& t, Var a) { return add_row(a, t.constant(row)); }, rng);
    check_op("add_row row", row, [&](Tape& t, Var r) { return add_row(t.constant(x), r); }, rng);
    check_op("mul_row matrix", x, [&](Tape& t, Var a) { return mul_row(a, t.constant(row)); }, rng);
    check_op("mul_row row", row, [&](Tape& t, Var r) { return mul_row(t.constant(x), r); }, rng);
    check_op("broadcast_rows", row, [](Tape&, Var r) { return broadcast_rows(r, 4); }, rng);
    check_op("concat_cols", x, [&](Tape& t, Var a) { return concat_cols({a, t.constant(y), a}); }, rng);
    check_op("concat_rows", x, [&](Tape& t, Var a) { return concat_rows({t.constant(y), a}); }, rng);
    check_op("slice_cols", x, [](Tape&, Var a) { return slice_cols(a, 2, 3); }, rng);
    check_op("slice_rows", x, [](Tape&, Var a) { return slice_rows(a, 1, 3); }, rng);
    check_op("relu", x, [](Tape&, Var a) { return relu(a); }, rng);
    check_op("sigmoid", x, [](Tape&, Var a) { return sigmoid(a); }, rng);
    check_op("silu", x, [](Tape&, Var a) { return silu(a); }, rng);
    check_op("glu", x, [](Tape&, Var a) { return glu(a); }, rng);
    check_op("softmax_rows", x, [](Tape&, Var a) { return softmax_rows(a); }, rng);
    check_op("layer_norm_rows", x, [](Tape&, Var a) { return layer_norm_rows(a); }, rng);
    check_op("group_norm", x, [](Tape&, Var a) { return group_norm(a, 3); }, rng);
    check_op("l2_normalize_rows", x, [](Tape&, Var a) { return l2_normalize_rows(a); }, rng);
    check_op("sum", x, [](Tape&, Var a) { return sum(a); }, rng);
    check_op("mean", x, [](Tape&, Var a) { return mean(a); }, rng);
    check_op("mean_square", x, [](Tape&, Var a) { return mean_square(a); }, rng);
    check_op("cross_entropy_rows", x, [](Tape&, Var a) { return cross_entropy_rows(a, {0, 5, 2, 2, 1}); }, rng);
}

TEST_CASE("convolution, window and gather ops match finite differences") {
    std::mt19937_64 rng(2);
    const Mat x = random_matrix(7, 4, rng);
    for (int k : {1, 2, 3, 4}) {
        const Mat w = random_matrix(k, 4, rng);
        check_op("depthwise input k=" + std::to_string(k), x, [&](Tape& t, Var a) { return depthwise_conv1d(a, t.constant(w)); }, rng);
        check_op("depthwise weight k=" + std::to_string(k), w, [&](Tape& t, Var ww) { return depthwise_conv1d(t.constant(x), ww); }, rng);
    }
    for (int s : {1, 2, 3, 8}) {
        const Mat taps = random_matrix(s, 4, rng);
        check_op("window input S=" + std::to_string(s), x, [&](Tape& t, Var a) { return window_taps(a, t.constant(taps)); }, rng);
        check_op("window taps S=" + std::to_string(s), taps, [&](Tape& t, Var tp) { return window_taps(t.constant(x), tp); }, rng);
    }
    const Mat table = random_matrix(1, 5, rng);
    check_op("gather", table, [](Tape&, Var tb) { return gather(tb, {0, 1, 1, 4, 3, 0}, 2, 3); }, rng);
}

TEST_CASE("depthwise conv matches a direct zero-padded loop") {
    std::mt19937_64 rng(3);
    const Mat x = random_matrix(6, 3, rng);
    for (int k : {1, 2, 3, 4, 5}) {
        const Mat w = random_matrix(k, 3, rng);
        Tape t;
        const Mat out = depthwise_conv1d(t.constant(x), t.constant(w)).value();
        const int left = (k - 1) / 2;
        REQUIRE(out.rows() == x.rows());
        for (int r = 0; r < x.rows(); ++r) {
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = 0; i < k; ++i) {
                    const int src = r + i - left;
                    if (src >= 0 && src < x.rows()) acc += w(i, c) * x(src, c);
                }
                CHECK(out(r, c) == doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("window_taps output length is ceil(L/S)") {
    Tape t;
    const Mat x = Mat::Ones(7, 2);
    CHECK(window_taps(t.constant(x), t.constant(Mat::Ones(3, 2))).rows() == 3);
    CHECK(window_taps(t.constant(x), t.constant(Mat::Ones(8, 2))).rows() == 1);
    CHECK(window_taps(t.constant(x), t.constant(Mat::Ones(1, 2))).rows() == 7);
    // The last window is partial: 7 = 3 + 3 + 1.
    CHECK(window_taps(t.constant(x), t.constant(Mat::Ones(3, 2))).value()(2, 0) == 1.0);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    std::mt19937_64 rng(4);
    Tape t;
    const Mat x = random_matrix(4, 9, rng, 30.0);
    const Mat s = softmax_rows(t.constant(x)).value();
    for (int r = 0; r < 4; ++r) CHECK(s.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    const Mat s2 = softmax_rows(t.constant((x.array() + 1000.0).matrix())).value();
    CHECK((s - s2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("parameter gradients accumulate over repeated use") {
    ParameterSet ps;
    std::mt19937_64 rng(5);
    const ParamId w = ps.add("w", random_matrix(3, 2, rng));
    const ParamId b = ps.add("b", random_matrix(1, 2, rng));
    const Mat x = random_matrix(4, 3, rng);
    auto build = [&](Tape& t) {
        Var h = linear(t, t.constant(x), w, b);
        Var h2 = linear(t, t.constant(x), w);  // w used twice
        return sum(mul(silu(h), h2));
    };
    auto rep = et2m::testing::fd_check_params(ps, build);
    CHECK(rep.checked == 8);
    CHECK(rep.max_rel < 1e-6);
}

TEST_CASE("flatten and unflatten round trip; hash tracks content") {
    ParameterSet ps;
    ps.add("a", Mat::Constant(2, 2, 1.5));
    ps.add("b", Mat::Constant(1, 3, -2.0));
    CHECK(ps.scalar_count() == 7);
    CHECK(ps.find("b") == 1);
    CHECK(ps.find("nope") == -1);
    const auto h0 = ps.content_hash();
    auto flat = ps.flatten();
    REQUIRE(flat.size() == 7);
    flat[6] = 4.0;
    ps.unflatten(flat);
    CHECK(ps[1].value(0, 2) == 4.0);
    CHECK(ps.content_hash() != h0);
    flat[6] = -2.0;
    ps.unflatten(flat);
    CHECK(ps.content_hash() == h0);
}

TEST_CASE("nodes that do not reach the loss get zero gradients") {
    Tape t;
    Var a = t.input(Mat::Ones(2, 2));
    Var b = t.input(Mat::Ones(2, 2));
    Var loss = sum(scale(a, 3.0));
    (void)relu(b);
    t.backward(loss);
    CHECK(t.grad(a).isApproxToConstant(3.0));
    CHECK(t.grad(b).isZero());
}

TEST_CASE("dropout mask is inverted-scaled and seeded") {
    std::mt19937_64 r1(9), r2(9);
    const Mat m1 = dropout_mask(50, 40, 0.25, r1);
    const Mat m2 = dropout_mask(50, 40, 0.25, r2);
    CHECK(m1 == m2);
    for (Eigen::Index i = 0; i < m1.size(); ++i) {
        const double v = m1.data()[i];
        CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    }
    const double kept = (m1.array() > 0.0).cast<double>().mean();
    CHECK(kept == doctest::Approx(0.75).epsilon(0.05));
}
