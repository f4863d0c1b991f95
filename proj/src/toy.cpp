// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/toy.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace et2m::toy {

namespace {

constexpr double kBaseHeight = 1.0;
constexpr double kWalkSpeed = 1.2;
constexpr double kHeightExcursion = 0.4;
constexpr double kNominalSegmentSeconds = 0.8;
constexpr double kNominalYawRate = (std::numbers::pi / 2.0) / kNominalSegmentSeconds;

struct Word {
    const char* surface;
    const char* lemma;
    const char* tag;
};

using Phrase = std::vector<Word>;

const std::array<std::vector<Phrase>, kPrimitiveCount>& phrase_table() {
    static const std::array<std::vector<Phrase>, kPrimitiveCount> table = {{
        {{{"walks", "walk", "VERB"}, {"forward", "forward", "ADV"}}, {{"steps", "step", "VERB"}, {"forward", "forward", "ADV"}}},
        {{{"walks", "walk", "VERB"}, {"backward", "backward", "ADV"}}, {{"steps", "step", "VERB"}, {"backward", "backward", "ADV"}}},
        {{{"jumps", "jump", "VERB"}, {"up", "up", "ADV"}}, {{"leaps", "leap", "VERB"}, {"up", "up", "ADV"}}},
        {{{"crouches", "crouch", "VERB"}, {"down", "down", "ADV"}}, {{"squats", "squat", "VERB"}, {"down", "down", "ADV"}}},
        {{{"turns", "turn", "VERB"}, {"left", "left", "ADV"}},
         {{"turns", "turn", "VERB"}, {"to", "to", "ADP"}, {"the", "the", "DET"}, {"left", "left", "NOUN"}}},
        {{{"turns", "turn", "VERB"}, {"right", "right", "ADV"}},
         {{"turns", "turn", "VERB"}, {"to", "to", "ADP"}, {"the", "the", "DET"}, {"right", "right", "NOUN"}}},
        {{{"stands", "stand", "VERB"}, {"still", "still", "ADV"}}, {{"pauses", "pause", "VERB"}}},
    }};
    return table;
}

const std::vector<Phrase>& subjects() {
    static const std::vector<Phrase> s = {
        {{"a", "a", "DET"}, {"person", "person", "NOUN"}},
        {{"a", "a", "DET"}, {"man", "man", "NOUN"}},
        {{"a", "a", "DET"}, {"woman", "woman", "NOUN"}},
        {{"someone", "someone", "PRON"}},
    };
    return s;
}

// Connective words inserted before event k (k >= 1) for a caption style.
// Surface text and POS tokens are built side by side.
struct CaptionBuilder {
    std::string text;
    std::vector<PosToken> pos;

    void word(const Word& w) {
        if (!text.empty() && text.back() != ' ') text.push_back(' ');
        text += w.surface;
        pos.push_back({w.lemma, w.tag});
    }
    void phrase(const Phrase& p) {
        for (const auto& w : p) word(w);
    }
    void comma() { text.push_back(','); }
};

CaptionRecord make_caption(const std::vector<Primitive>& prims, std::mt19937_64& rng) {
    const auto& table = phrase_table();
    std::uniform_int_distribution<size_t> pick_subject(0, subjects().size() - 1);
    std::uniform_int_distribution<int> pick_style(0, 3);
    std::uniform_int_distribution<int> pick_variant(0, 1);
    CaptionBuilder b;
    b.phrase(subjects()[pick_subject(rng)]);
    const int style = pick_style(rng);
    const size_t k_total = prims.size();
    for (size_t k = 0; k < k_total; ++k) {
        if (k > 0) {
            const bool last = k + 1 == k_total;
            switch (style) {
                case 0:
                    b.comma();
                    b.word({"then", "then", "ADV"});
                    break;
                case 1:
                    b.word({"and", "and", "CCONJ"});
                    b.word({"then", "then", "ADV"});
                    break;
                case 2:
                    if (last) {
                        if (k_total > 2) b.comma();
                        b.word({"and", "and", "CCONJ"});
                        b.word({"finally", "finally", "ADV"});
                    } else {
                        b.comma();
                    }
                    break;
                default:
                    b.word({"then", "then", "ADV"});
                    break;
            }
        }
        const auto& variants = table[static_cast<size_t>(prims[k])];
        b.phrase(variants[static_cast<size_t>(pick_variant(rng)) % variants.size()]);
    }
    b.text.push_back('.');
    CaptionRecord rec;
    rec.text = std::move(b.text);
    rec.pos_tokens = std::move(b.pos);
    return rec;
}

int sample_event_count(const ToyOptions& opt, std::mt19937_64& rng) {
    std::vector<double> w = opt.event_weights;
    if (w.empty()) w.assign(static_cast<size_t>(opt.max_events), 1.0);
    if (static_cast<int>(w.size()) != opt.max_events) throw ConfigError("event_weights must have max_events entries");
    std::discrete_distribution<int> d(w.begin(), w.end());
    return d(rng) + 1;
}

}  // namespace

std::string_view primitive_name(Primitive p) {
    static constexpr std::array<std::string_view, kPrimitiveCount> names = {"walk_forward", "walk_backward", "jump", "crouch",
                                                                            "turn_left",    "turn_right",    "pause"};
    return names[static_cast<size_t>(p)];
}

Mat render_segments(const std::vector<Primitive>& prims, const std::vector<int>& lengths, double start_heading) {
    int total = 0;
    for (int n : lengths) total += n;
    Mat frames(total, kMotionDim);
    const double dt = 1.0 / kFps;
    double x = 0.0, y = 0.0, h = start_heading;
    int row = 0;
    for (size_t k = 0; k < prims.size(); ++k) {
        const int n = lengths[k];
        const double seconds = n * dt;
        for (int i = 0; i < n; ++i, ++row) {
            const double u = (i + 0.5) / n;
            const double bump = 2.0 * std::pow(std::sin(std::numbers::pi * u), 2);
            double speed = 0.0, z = kBaseHeight, vz = 0.0, yaw = 0.0;
            switch (prims[k]) {
                case Primitive::WalkForward: speed = kWalkSpeed * bump; break;
                case Primitive::WalkBackward: speed = -kWalkSpeed * bump; break;
                case Primitive::Jump:
                    z += kHeightExcursion * std::sin(std::numbers::pi * u);
                    vz = kHeightExcursion * std::numbers::pi * std::cos(std::numbers::pi * u) / seconds;
                    break;
                case Primitive::Crouch:
                    z -= kHeightExcursion * std::sin(std::numbers::pi * u);
                    vz = -kHeightExcursion * std::numbers::pi * std::cos(std::numbers::pi * u) / seconds;
                    break;
                case Primitive::TurnLeft: yaw = (std::numbers::pi / 2.0) / seconds * bump; break;
                case Primitive::TurnRight: yaw = -(std::numbers::pi / 2.0) / seconds * bump; break;
                case Primitive::Pause: break;
            }
            h += yaw * dt;
            x += speed * std::cos(h) * dt;
            y += speed * std::sin(h) * dt;
            frames.row(row) << x, y, z, h, speed, vz, yaw;
        }
    }
    return frames;
}

DatasetSplit generate_toy_dataset(int n_samples, int max_events, uint64_t seed) {
    ToyOptions opt;
    opt.max_events = max_events;
    return generate_toy_dataset(n_samples, opt, seed);
}

DatasetSplit generate_toy_dataset(int n_samples, const ToyOptions& opt, uint64_t seed) {
    if (opt.max_events < 1 || opt.max_events > 6) throw ConfigError("max_events must be in 1..6");
    if (n_samples < 1) throw ConfigError("n_samples must be positive");
    DatasetSplit split;
    split.name = "train";
    for (int i = 0; i < n_samples; ++i) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<uint64_t>(i)));
        const int k = sample_event_count(opt, rng);
        std::uniform_int_distribution<int> pick_prim(0, kPrimitiveCount - 1);
        std::uniform_int_distribution<int> jitter(-opt.segment_jitter, opt.segment_jitter);
        std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
        std::vector<Primitive> prims;
        std::vector<int> lengths;
        while (static_cast<int>(prims.size()) < k) {
            auto p = static_cast<Primitive>(pick_prim(rng));
            if (!prims.empty() && prims.back() == p) continue;  // adjacent events differ
            prims.push_back(p);
            lengths.push_back(opt.segment_frames + jitter(rng));
        }
        Sample s;
        s.motion.id = opt.id_prefix + "_" + std::to_string(i);
        s.motion.fps = kFps;
        s.motion.frames = render_segments(prims, lengths, heading(rng));
        std::normal_distribution<double> noise(0.0, opt.noise_std);
        for (Eigen::Index j = 0; j < s.motion.frames.size(); ++j) s.motion.frames.data()[j] += noise(rng);
        int start = 0;
        s.segment_bounds.push_back(0);
        for (size_t j = 0; j < prims.size(); ++j) {
            start += lengths[j];
            s.segment_bounds.push_back(start);
            s.segment_labels.push_back(static_cast<int>(prims[j]));
        }
        for (int c = 0; c < opt.captions_per_sample; ++c) s.captions.push_back(make_caption(prims, rng));
        split.pairs.push_back(std::move(s));
    }
    split.normalization_stats = compute_stats(split.motions());
    return split;
}

ToySplits generate_toy_splits(int n_train, int n_val, int n_test, const ToyOptions& options, uint64_t seed) {
    ToySplits out;
    auto opt = options;
    opt.id_prefix = options.id_prefix + "_train";
    out.train = generate_toy_dataset(n_train, opt, mix_seed(seed, 1));
    opt.id_prefix = options.id_prefix + "_val";
    out.val = generate_toy_dataset(n_val, opt, mix_seed(seed, 2));
    opt.id_prefix = options.id_prefix + "_test";
    out.test = generate_toy_dataset(n_test, opt, mix_seed(seed, 3));
    out.train.name = "train";
    out.val.name = "val";
    out.test.name = "test";
    out.val.normalization_stats = out.train.normalization_stats;
    out.test.normalization_stats = out.train.normalization_stats;
    return out;
}

Primitive classify_segment(const Mat& window) {
    if (window.rows() < 1 || window.cols() != kMotionDim) throw DimensionMismatch("classify_segment: bad window");
    Eigen::Vector4d f;
    f << window.col(4).mean() / kWalkSpeed, window.col(6).mean() / kNominalYawRate,
        (window.col(2).maxCoeff() - kBaseHeight) / kHeightExcursion, (kBaseHeight - window.col(2).minCoeff()) / kHeightExcursion;
    static const std::array<Eigen::Vector4d, kPrimitiveCount> prototypes = [] {
        std::array<Eigen::Vector4d, kPrimitiveCount> p;
        p[0] << 1, 0, 0, 0;
        p[1] << -1, 0, 0, 0;
        p[2] << 0, 0, 1, 0;
        p[3] << 0, 0, 0, 1;
        p[4] << 0, 1, 0, 0;
        p[5] << 0, -1, 0, 0;
        p[6] << 0, 0, 0, 0;
        return p;
    }();
    int best = 0;
    double best_d = (f - prototypes[0]).squaredNorm();
    for (int i = 1; i < kPrimitiveCount; ++i) {
        const double d = (f - prototypes[static_cast<size_t>(i)]).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return static_cast<Primitive>(best);
}

bool event_order_matches(const Mat& frames, const std::vector<int>& bounds, const std::vector<int>& labels) {
    if (bounds.size() != labels.size() + 1) throw DimensionMismatch("event_order_matches: bounds/labels mismatch");
    for (size_t k = 0; k < labels.size(); ++k) {
        const int b0 = bounds[k], b1 = std::min<int>(bounds[k + 1], static_cast<int>(frames.rows()));
        if (b1 <= b0) return false;
        if (static_cast<int>(classify_segment(frames.middleRows(b0, b1 - b0))) != labels[k]) return false;
    }
    return true;
}

}  // namespace et2m::toy
