// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/segmentation.hpp"
#include "et2m/toy.hpp"

#include <doctest.h>

#include <cmath>

using namespace et2m;

TEST_CASE("single-event toy sample has one clause") {
    const auto split = toy::generate_toy_dataset(1, 1, 0);
    REQUIRE(split.pairs.size() == 1);
    const auto& s = split.pairs[0];
    CHECK(s.true_event_count() == 1);
    for (const auto& c : s.captions) CHECK(decompose_rule(c).k() == 1);
}

TEST_CASE("toy generation is deterministic in the seed") {
    const auto a = toy::generate_toy_dataset(20, 4, 42);
    const auto b = toy::generate_toy_dataset(20, 4, 42);
    const auto c = toy::generate_toy_dataset(20, 4, 43);
    bool any_diff = false;
    for (size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].motion.frames == b.pairs[i].motion.frames);
        CHECK(serialize_caption_line(a.pairs[i].captions[0]) == serialize_caption_line(b.pairs[i].captions[0]));
        CHECK(a.pairs[i].segment_bounds == b.pairs[i].segment_bounds);
        any_diff |= a.pairs[i].motion.frames.rows() != c.pairs[i].motion.frames.rows() ||
                    a.pairs[i].motion.frames != c.pairs[i].motion.frames;
    }
    CHECK(any_diff);
}

TEST_CASE("event-count histogram follows the configured weights") {
    toy::ToyOptions opt;
    opt.max_events = 4;
    opt.event_weights = {1.0, 2.0, 3.0, 4.0};
    const int n = 100;
    const auto split = toy::generate_toy_dataset(n, opt, 7);
    std::vector<int> hist(5, 0);
    for (const auto& s : split.pairs) hist[static_cast<size_t>(s.true_event_count())]++;
    for (int k = 1; k <= 4; ++k) {
        const double p = k / 10.0;
        const double sigma = std::sqrt(n * p * (1 - p));
        INFO("k=" << k << " count=" << hist[static_cast<size_t>(k)]);
        CHECK(std::abs(hist[static_cast<size_t>(k)] - n * p) <= 3.0 * sigma);
    }
}

TEST_CASE("segment bounds tile the trajectory and match the caption") {
    const auto split = toy::generate_toy_dataset(50, 4, 8);
    for (const auto& s : split.pairs) {
        REQUIRE(s.segment_bounds.size() == s.segment_labels.size() + 1);
        CHECK(s.segment_bounds.front() == 0);
        CHECK(s.segment_bounds.back() == s.motion.length());
        for (size_t k = 0; k + 1 < s.segment_bounds.size(); ++k) CHECK(s.segment_bounds[k] < s.segment_bounds[k + 1]);
        for (const auto& c : s.captions) CHECK(c.verb_count() == s.true_event_count());
    }
}

TEST_CASE("segment classifier recovers clean and noisy primitives") {
    for (int p = 0; p < toy::kPrimitiveCount; ++p) {
        const auto prim = static_cast<toy::Primitive>(p);
        for (int len : {12, 16, 20}) {
            const Mat f = toy::render_segments({prim}, {len}, 0.3);
            CHECK(toy::classify_segment(f) == prim);
        }
    }
    // Labels on generated (noisy) samples.
    const auto split = toy::generate_toy_dataset(40, 4, 12);
    for (const auto& s : split.pairs) {
        CHECK(toy::event_order_matches(s.motion.frames, s.segment_bounds, s.segment_labels));
    }
}

TEST_CASE("reordered segments fail the order check") {
    using toy::Primitive;
    const std::vector<Primitive> prims = {Primitive::Jump, Primitive::WalkForward, Primitive::TurnLeft};
    const std::vector<int> len = {16, 16, 16};
    const Mat f = toy::render_segments(prims, len, 0.0);
    const std::vector<int> bounds = {0, 16, 32, 48};
    CHECK(toy::event_order_matches(f, bounds, {2, 0, 4}));
    CHECK_FALSE(toy::event_order_matches(f, bounds, {0, 2, 4}));
    // A truncated trajectory cannot match.
    CHECK_FALSE(toy::event_order_matches(f.topRows(20), bounds, {2, 0, 4}));
}

TEST_CASE("toy splits share train statistics") {
    toy::ToyOptions opt;
    const auto s = toy::generate_toy_splits(10, 4, 4, opt, 3);
    CHECK(s.val.normalization_stats.mean == s.train.normalization_stats.mean);
    CHECK(s.test.normalization_stats.std == s.train.normalization_stats.std);
    CHECK(s.train.pairs[0].motion.id != s.test.pairs[0].motion.id);
}
