// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "et2m/denoiser.hpp"
#include "et2m/diffusion.hpp"
#include "et2m/optim.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace et2m {

struct TrainConfig {
    double lr = 1e-4;
    double lr_floor = 0.0;  // cosine annealing end point
    int batch_size = 128;
    int epochs = 600;
    int checkpoint_interval = 1;  // epochs between checkpoints
    uint64_t seed = 0;
    double grad_clip = 1.0;
    AdamWConfig adamw;
    bool ema = false;  // not supported; must stay off
    int workers = 1;
    int64_t stop_after_steps = 0;  // > 0: stop early and checkpoint there

    void validate() const;  // throws ConfigError
};

struct Checkpoint {
    DenoiserConfig model_config;
    ad::ParameterSet params;
    std::string optimizer_state;  // AdamW::save bytes
    int epoch = 0;                // completed epochs
    int64_t step = 0;             // optimizer steps taken
    double val_fid = 0.0;
    uint64_t seed = 0;            // per-step randomness is mix_seed(seed, step, ...)
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Restores parameters into a model built from ckpt.model_config.
Denoiser model_from_checkpoint(const Checkpoint& ckpt);

// argmin val_fid; ties go to the later epoch.
const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints);

// Validation score of the current model (lower is better), e.g. FID on
// the validation split.
using ValidationFn = std::function<double(const Denoiser&)>;

struct TrainResult {
    Checkpoint best;
    std::vector<Checkpoint> checkpoints;
    std::vector<double> step_losses;
    std::vector<double> step_lrs;
};

// Deterministic given cfg.seed: epoch e shuffles with mix_seed(seed, e) and
// step k draws its noise from mix_seed(seed, k). When `resume` is given the
// run continues from it. With an empty run_dir nothing is written; otherwise
// checkpoints go to run_dir/checkpoints and the log to run_dir/train_log.jsonl.
TrainResult train(const std::vector<TrainingSample>& data, Denoiser& model, const DiffusionSchedule& schedule,
                  const GuidanceConfig& guidance, const TrainConfig& cfg, const ValidationFn& validate = {},
                  const std::filesystem::path& run_dir = {}, const Checkpoint* resume = nullptr);

}  // namespace et2m
