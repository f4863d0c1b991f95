// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. Files are JSON objects with one object per section;
// unknown sections or keys are rejected.

#pragma once

#include "et2m/denoiser.hpp"
#include "et2m/diffusion.hpp"
#include "et2m/evaluation.hpp"
#include "et2m/segmentation.hpp"
#include "et2m/text_encoding.hpp"
#include "et2m/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace et2m {

struct DataConfig {
    std::string root;  // empty: generate the toy corpus
    int n_train = 600;
    int n_val = 64;
    int n_test = 128;
    int max_events = 4;
    int segment_frames = 16;
    int captions_per_sample = 2;
    uint64_t seed = 0;
};

struct SegmentationConfig {
    std::string backend = "rule";  // rule | llm
    Strategy strategy = Strategy::event_aware;
    std::string cache_dir;  // empty: <run>/llm_cache
};

struct EncoderConfig {
    std::string kind = "stub";  // stub | http
    std::string url;
    int dim = 64;  // http only; the stub uses stub.embed_dim
    ConditioningMode mode = ConditioningMode::event;
    StubEncoderConfig stub;
};

struct DiffusionConfig {
    int T = 1000;
    double beta_1 = 1e-4;
    double beta_T = 2e-2;
    int steps = 10;
    GuidanceConfig guidance;

    DiffusionSchedule schedule() const { return DiffusionSchedule::linear(T, beta_1, beta_T, steps); }
};

struct EvaluationConfig {
    int n_repeats = 20;
    int pool_size = 32;
    int mm_prompts = 16;
    int mm_generations = 20;
    int mm_pairs = 10;
    uint64_t seed = 0;
};

struct RunConfig {
    std::string name = "run";
    int workers = 1;
    DataConfig data;
    SegmentationConfig segmentation;
    EncoderConfig encoder;
    DenoiserConfig model;
    DiffusionConfig diffusion;
    TrainConfig training;
    EvaluationConfig evaluation;

    // Small settings that finish in minutes on one CPU core.
    static RunConfig toy();

    void validate() const;  // throws ConfigError
    nlohmann::json to_json() const;
    // Keys missing from `j` keep their value in `base` (defaults otherwise).
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_json(const nlohmann::json& j, const RunConfig& base);
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig load(const std::filesystem::path& path, const RunConfig& base);
    void save(const std::filesystem::path& path) const;

    // Overrides of the form section.key=value (value parsed as JSON, or
    // taken as a string when that fails).
    void apply_override(const std::string& assignment);
};

// "section.key  default  description" lines for every key.
std::string config_help();

nlohmann::json denoiser_config_to_json(const DenoiserConfig& c);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

EvalConfig make_eval_config(const RunConfig& cfg);

}  // namespace et2m
