// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Motion/caption data types, HumanML3D-style caption lines and dataset
// directory IO, and per-channel normalization.

#pragma once

#include "et2m/autodiff.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace et2m {

using Mat = ad::Mat;
using RowVec = ad::RowVec;

// L x D_m pose features, one row per frame.
struct MotionSequence {
    Mat frames;
    double fps = 20.0;
    std::string id;

    Eigen::Index length() const { return frames.rows(); }
    Eigen::Index dim() const { return frames.cols(); }
    // Throws DimensionMismatch when empty or non-finite.
    void validate() const;
};

struct PosToken {
    std::string word;
    std::string tag;
};

// One line of a HumanML3D text file: caption#word/TAG ...#start#end.
struct CaptionRecord {
    std::string text;
    std::vector<PosToken> pos_tokens;
    double start_s = 0.0;
    double end_s = 0.0;

    bool whole_clip() const { return start_s == 0.0 && end_s == 0.0; }
    int verb_count() const;
};

CaptionRecord parse_caption_line(std::string_view line);
std::string serialize_caption_line(const CaptionRecord& record);
std::string format_seconds(double s);

struct NormalizationStats {
    RowVec mean;
    RowVec std;

    static constexpr double kMinStd = 1e-8;
};

NormalizationStats compute_stats(const std::vector<MotionSequence>& motions);
MotionSequence normalize(const MotionSequence& motion, const NormalizationStats& stats);
MotionSequence denormalize(const MotionSequence& motion, const NormalizationStats& stats);

struct Sample {
    MotionSequence motion;
    std::vector<CaptionRecord> captions;
    // Toy ground truth; empty for external data. segment_bounds holds the
    // first frame of each segment followed by the total length.
    std::vector<int> segment_bounds;
    std::vector<int> segment_labels;

    int true_event_count() const { return static_cast<int>(segment_labels.size()); }
};

struct DatasetSplit {
    std::string name;
    std::vector<Sample> pairs;
    NormalizationStats normalization_stats;

    const Sample* find(const std::string& id) const;
    std::vector<MotionSequence> motions() const;
};

// Dataset directory layout:
//   texts/<id>.txt     caption lines
//   motions/<id>.bin   row-major float32 frames
//   motions/<id>.meta  "rows N\ncols D\nfps F\n"
//   labels/<id>.txt    optional "label start end" rows (toy ground truth)
//   splits/<name>.txt  one id per row
void write_motion(const std::filesystem::path& bin_path, const MotionSequence& motion);
MotionSequence read_motion(const std::filesystem::path& bin_path, const std::string& id = {});

void write_split(const std::filesystem::path& root, const DatasetSplit& split);
// Statistics come from `train_stats` when given, else from the loaded split.
DatasetSplit read_split(const std::filesystem::path& root, const std::string& name,
                        const std::optional<NormalizationStats>& train_stats = std::nullopt);
std::vector<CaptionRecord> read_caption_file(const std::filesystem::path& path);

}  // namespace et2m
