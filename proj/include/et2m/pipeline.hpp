// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration: data -> decompose -> evaluator -> encode ->
// train -> eval. Each stage writes into stages/<name>-<key>/ where the key
// hashes the stage's config and its inputs' keys, so reruns skip finished
// stages.

#pragma once

#include "et2m/config.hpp"
#include "et2m/llm.hpp"

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace et2m {

struct Corpus {
    DatasetSplit train, val, test;
};

// One training pair per (motion, caption).
std::vector<TrainingSample> make_training_samples(const DatasetSplit& split, const DecompositionTable& table,
                                                  EventEncoder& encoder, ConditioningMode mode);
// One item per motion, conditioned on its first caption.
std::vector<EvalItem> make_eval_items(const DatasetSplit& split, const DecompositionTable& table, EventEncoder& encoder,
                                      ConditioningMode mode);

// Judges toy generations with the generator's segment classifier.
class ToyOrderJudge : public EventOrderJudge {
public:
    bool matches(const Mat& frames, const EvalItem& item) const override;
};

// FID of one generation per item against the items' real motions.
ValidationFn make_validation_fid(const std::vector<EvalItem>& items, const MotionEncoder& evaluator,
                                 const DiffusionSchedule& schedule, const GuidanceConfig& guidance, uint64_t seed,
                                 int workers);

// Stratifies a directory of event files (<id>.txt). When `ids` is given only
// those ids are used, and each must have a file.
StratifiedBenchmark stratify_event_directory(const std::filesystem::path& dir,
                                             const std::vector<std::string>* ids = nullptr);

struct StageRecord {
    std::string name;
    std::string key;
    bool cached = false;
};

class Pipeline {
public:
    // Stage directories live under stage_root (default run_dir/stages).
    Pipeline(RunConfig cfg, std::filesystem::path run_dir, std::ostream* log = nullptr,
             std::filesystem::path stage_root = {});

    const RunConfig& config() const { return cfg_; }
    const std::filesystem::path& run_dir() const { return run_dir_; }

    const Corpus& corpus();
    const DecompositionTable& decompositions();
    const StratifiedBenchmark& benchmark();
    StubEncoder& evaluator();
    TextEncoder& conditioning_encoder();
    EventEncoder& event_encoder();
    const std::vector<TrainingSample>& training_samples();
    const std::vector<EvalItem>& test_items();
    const std::vector<EvalItem>& val_items();
    const Checkpoint& trained();
    const EvaluationReport& report();

    // Evaluates the trained model with modified sampling settings.
    EvaluationReport evaluate_with(const EvalConfig& eval_cfg, EvalDump* dump = nullptr);

    // Effective model config (dims from data and encoder, ECA from mode).
    DenoiserConfig model_config();
    DiffusionSchedule schedule() const { return cfg_.diffusion.schedule(); }

    const std::vector<StageRecord>& stages() const { return stages_; }

private:
    std::filesystem::path stage_dir(const std::string& name, const std::string& key) const;
    bool stage_done(const std::filesystem::path& dir) const;
    void mark_done(const std::filesystem::path& dir) const;
    void record(const std::string& name, const std::string& key, bool cached);

    std::string data_key();
    std::string decompose_key();
    std::string evaluator_key();
    std::string encode_key();
    std::string train_key();
    std::string eval_key();

    RunConfig cfg_;
    std::filesystem::path run_dir_, stage_root_;
    std::ostream* log_;
    std::vector<StageRecord> stages_;

    std::optional<Corpus> corpus_;
    std::optional<DecompositionTable> table_;
    std::optional<StratifiedBenchmark> benchmark_;
    std::unique_ptr<StubEncoder> evaluator_;
    std::unique_ptr<TextEncoder> http_encoder_;
    std::unique_ptr<EventEncoder> event_encoder_;
    std::optional<std::vector<TrainingSample>> train_samples_;
    std::optional<std::vector<EvalItem>> test_items_, val_items_;
    std::optional<Checkpoint> trained_;
    std::unique_ptr<Denoiser> model_;
    std::optional<EvaluationReport> report_;
};

enum class AblationAxis { steps, scale, backbone, encoder_mode };
AblationAxis parse_ablation_axis(std::string_view s);

struct AblationResult {
    std::vector<std::string> values;
    std::vector<EvaluationReport> reports;
    std::string table;  // merged comparison
};

// steps/scale reuse one trained model; backbone/encoder_mode train one model
// per value. Stage caches are shared under run_dir/stages.
AblationResult run_ablation(const RunConfig& base, AblationAxis axis, const std::vector<std::string>& values,
                            const std::filesystem::path& run_dir, std::ostream* log = nullptr);

// Static SVG of metrics against the event-count condition.
std::string render_condition_plot_svg(const EvaluationReport& report);

}  // namespace et2m
