// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Forward noising, the x0-prediction objective with conditioning dropout, and
// the few-step ancestral sampler with classifier-free guidance.

#pragma once

#include "et2m/data.hpp"
#include "et2m/denoiser.hpp"

#include <cstdint>
#include <vector>

namespace et2m {

struct DiffusionSchedule {
    int T = 0;
    std::vector<double> betas;       // index t-1
    std::vector<double> alphas;
    std::vector<double> alpha_bars;
    std::vector<int> inference_steps;  // strictly decreasing

    // Linear betas from beta_1 to beta_T.
    static DiffusionSchedule linear(int T = 1000, double beta_1 = 1e-4, double beta_T = 2e-2, int n_steps = 10);

    double beta(int t) const;
    double alpha_bar(int t) const;
    void check_timestep(int t) const;  // throws TimestepOutOfRange
};

// Evenly spaced timesteps t_i = round(1 + i (T-1)/(n-1)), returned in
// decreasing order; n = 1 gives {T}.
std::vector<int> select_inference_steps(int T, int n);

struct GuidanceConfig {
    double scale = 4.0;
    double dropout_tau = 0.2;
    double clamp = 6.0;

    void validate() const;  // throws ConfigError
};

Mat forward_noise(const Mat& x0, int t, const Mat& eps, const DiffusionSchedule& schedule);
Mat recover_x0(const Mat& x_t, int t, const Mat& eps, const DiffusionSchedule& schedule);

// s * cond + (1 - s) * uncond, so s = 1 and s = 0 reproduce either input.
Mat guided_prediction(const Mat& cond, const Mat& uncond, double scale);

struct TrainingSample {
    Mat x0;  // normalized motion, L x D_m
    ConditioningBundle bundle;
    std::string id;
};

struct LossResult {
    double loss = 0.0;
    int null_uses = 0;
    int64_t elements = 0;
    std::vector<int> timesteps;
    ad::Gradients grads;  // filled when gradients were requested
};

// Mean squared error over every frame and channel of the batch. Sample i
// draws t, the dropout coin, eps and dropout masks from mix_seed(seed, i),
// so the value is independent of `workers`.
LossResult training_loss(const std::vector<TrainingSample>& batch, const X0Model& model,
                         const DiffusionSchedule& schedule, const GuidanceConfig& guidance, uint64_t seed,
                         bool with_grads, int workers = 1);

struct SampleTrace {
    std::vector<int> steps;
    std::vector<Mat> cond_x0, uncond_x0, guided_x0;
};

// Ancestral sampling over `steps` (schedule.inference_steps when empty).
// The result is in normalized units.
MotionSequence sample(const X0Model& model, const ConditioningBundle& bundle, int length,
                      const DiffusionSchedule& schedule, const GuidanceConfig& guidance, uint64_t seed,
                      const std::vector<int>& steps = {}, SampleTrace* trace = nullptr);

}  // namespace et2m
