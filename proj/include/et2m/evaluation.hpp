// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "et2m/diffusion.hpp"
#include "et2m/segmentation.hpp"
#include "et2m/text_encoding.hpp"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace et2m {

struct FidResult {
    double value = 0.0;
    bool degenerate = false;  // fewer samples than dimensions on either side
};

// Frechet distance between Gaussian fits; the matrix square root uses the
// symmetric form sqrt(S_r^1/2 S_g S_r^1/2) with eigenvalues clamped at 1e-10.
FidResult fid_detail(const Mat& real, const Mat& gen);
double fid(const Mat& real, const Mat& gen);

// Row i of `text` is the caption of generation i. Each generation ranks its
// caption against pool_size - 1 distinct distractors by Euclidean distance.
std::array<double, 3> r_precision_top3(const Mat& gen, const Mat& text, int pool_size, uint64_t seed);
double r_precision(const Mat& gen, const Mat& text, int pool_size, int k, uint64_t seed);

double mm_dist(const Mat& gen, const Mat& text);

inline constexpr int kAllPairs = -1;
// Rows of each matrix are generations for one prompt. n_pairs random pairs
// of distinct generations per prompt, or every unordered pair for kAllPairs.
double mmodality(const std::vector<Mat>& per_prompt, int n_pairs, uint64_t seed);

struct MetricResult {
    std::string name;
    double value = 0.0;
    double ci95 = 0.0;
    int n_repeats = 0;
    bool ci_degenerate = false;  // single repeat
};

// Mean and normal-approximation 95% half-width over repeats.
MetricResult summarize(const std::string& name, const std::vector<double>& values);

struct EvaluationReport {
    // condition ("all", ">=2", ...) -> metric -> result
    std::map<std::string, std::map<std::string, MetricResult>> conditions;
    std::map<std::string, size_t> counts;
    std::map<std::string, std::string> meta;

    nlohmann::json to_json() const;
    static EvaluationReport from_json(const nlohmann::json& j);
    std::string to_text() const;
};

struct EvalItem {
    std::string id;
    std::string caption;
    ConditioningBundle bundle;
    Mat real;  // normalized
    // Ground-truth segmentation, when the generator knows it.
    std::vector<int> segment_bounds;
    std::vector<int> segment_labels;
};

struct EvalConfig {
    int n_repeats = 20;
    int pool_size = 32;
    int mm_prompts = 16;     // prompts used for MModality, 0 disables it
    int mm_generations = 20;
    int mm_pairs = 10;
    uint64_t seed = 0;
    int workers = 1;
    GuidanceConfig guidance;
    std::vector<int> steps;  // empty: schedule default
    std::optional<NormalizationStats> stats;  // needed for event-order accuracy
};

// Everything needed to recompute a report from embeddings.
struct EvalDump {
    std::vector<std::string> ids;
    Mat real, text;
    std::vector<Mat> gen;                       // per repeat, item order
    std::vector<std::vector<Mat>> mm_gen;       // per repeat, per prompt
    std::vector<std::vector<char>> order_hits;  // per repeat, item order
};

class EventOrderJudge {
public:
    virtual ~EventOrderJudge() = default;
    // frames are in data units.
    virtual bool matches(const Mat& frames, const EvalItem& item) const = 0;
};

// Repeats the whole evaluation with fresh sampling seeds and reports the
// mean and CI of each metric for "all" and each benchmark condition.
EvaluationReport evaluate(const X0Model& model, const std::vector<EvalItem>& items, const StratifiedBenchmark& benchmark,
                          TextEncoder& text_eval, const MotionEncoder& motion_eval, const DiffusionSchedule& schedule,
                          const EvalConfig& cfg, const EventOrderJudge* judge = nullptr, EvalDump* dump = nullptr);

// Recomputes the per-repeat metric values from a dump, as evaluate() does.
EvaluationReport report_from_dump(const EvalDump& dump, const std::vector<EvalItem>& items,
                                  const StratifiedBenchmark& benchmark, const EvalConfig& cfg);

std::string condition_name(int min_events);

}  // namespace et2m
