// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multi-event motion data for desk-scale runs.
//
// Frames have 7 channels: planar position (x, y), height z, heading, forward
// speed, vertical velocity and yaw rate. Every sample concatenates primitive
// segments; its captions name the primitives in order, joined by temporal
// connectives.

#pragma once

#include "et2m/data.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace et2m::toy {

inline constexpr int kMotionDim = 7;
inline constexpr double kFps = 20.0;

enum class Primitive : int { WalkForward = 0, WalkBackward, Jump, Crouch, TurnLeft, TurnRight, Pause };
inline constexpr int kPrimitiveCount = 7;

std::string_view primitive_name(Primitive p);

struct ToyOptions {
    int max_events = 4;
    // Relative sampling weight of each event count 1..max_events; uniform if empty.
    std::vector<double> event_weights;
    int segment_frames = 16;
    int segment_jitter = 2;
    int captions_per_sample = 2;
    double noise_std = 0.01;
    std::string id_prefix = "toy";
};

// Deterministic in (n_samples, options, seed). Statistics are computed over
// the generated samples themselves.
DatasetSplit generate_toy_dataset(int n_samples, int max_events, uint64_t seed);
DatasetSplit generate_toy_dataset(int n_samples, const ToyOptions& options, uint64_t seed);

// Train/val/test with val and test normalized by train statistics.
struct ToySplits {
    DatasetSplit train, val, test;
};
ToySplits generate_toy_splits(int n_train, int n_val, int n_test, const ToyOptions& options, uint64_t seed);

// Clean trajectory for a primitive sequence with the given segment lengths.
Mat render_segments(const std::vector<Primitive>& prims, const std::vector<int>& lengths, double start_heading);

// Nearest-prototype classifier over one window of raw (denormalized) frames.
Primitive classify_segment(const Mat& window);

// True iff every window [bounds[k], bounds[k+1]) of `frames` classifies as
// labels[k].
bool event_order_matches(const Mat& frames, const std::vector<int>& bounds, const std::vector<int>& labels);

}  // namespace et2m::toy
