// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Event tokens E (one row per clause) and the global token G (whole prompt)
// from a text encoder. The stub contrastive encoder lets the pipeline run
// without external model weights and doubles as the toy evaluator.

#pragma once

#include "et2m/autodiff.hpp"
#include "et2m/data.hpp"
#include "et2m/segmentation.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace et2m {

// embed_text(list of strings) -> (n x dim) matrix. Implementations must be
// deterministic for a fixed version().
class TextEncoder {
public:
    virtual ~TextEncoder() = default;
    virtual std::string version() const = 0;
    virtual int dim() const = 0;
    virtual Mat embed_text(const std::vector<std::string>& texts) = 0;
};

// Motion side of an evaluator pair. Input motions are normalized.
class MotionEncoder {
public:
    virtual ~MotionEncoder() = default;
    virtual int dim() const = 0;
    virtual Mat embed_motion(const std::vector<Mat>& motions) const = 0;
};

struct ConditioningBundle {
    Mat events;      // K x D_y
    RowVec global;   // 1 x D_y
    bool is_null = false;

    int k() const { return static_cast<int>(events.rows()); }
};

enum class ConditioningMode { event, token, global_only };
std::string_view to_string(ConditioningMode m);
ConditioningMode parse_conditioning_mode(std::string_view s);

// Caches embeddings per (encoder version, text); encoder_calls() counts the
// texts actually sent to the encoder.
class EventEncoder {
public:
    explicit EventEncoder(TextEncoder& encoder) : encoder_(encoder) {}

    // Row k of E is encoder(C_k); G is encoder(W). Token mode keys on the
    // words of W instead of the clauses.
    ConditioningBundle encode(const Decomposition& d, ConditioningMode mode = ConditioningMode::event);
    Mat embed(const std::vector<std::string>& texts);

    int64_t encoder_calls() const { return calls_; }
    int dim() const { return encoder_.dim(); }

private:
    TextEncoder& encoder_;
    std::mutex mu_;
    std::unordered_map<std::string, RowVec> cache_;
    std::atomic<int64_t> calls_{0};
};

std::vector<std::string> word_tokens(const std::string& text);

struct StubEncoderConfig {
    int embed_dim = 64;
    int hidden = 64;
    double temperature = 0.1;
    int epochs = 30;
    int batch_size = 64;
    double lr = 3e-3;
    uint64_t seed = 0;
};

// Bag-of-words text tower and temporal-pooling motion tower trained with a
// symmetric contrastive loss. Outputs are L2-normalized.
class StubEncoder : public TextEncoder, public MotionEncoder {
public:
    StubEncoder(std::vector<std::string> vocab, StubEncoderConfig cfg);

    std::string version() const override;
    int dim() const override { return cfg_.embed_dim; }
    Mat embed_text(const std::vector<std::string>& texts) override;
    Mat embed_motion(const std::vector<Mat>& motions) const override;
    Mat embed_text_const(const std::vector<std::string>& texts) const;

    // Differentiable towers, used by training.
    ad::Var text_tower(ad::Tape& tape, const std::vector<std::string>& texts) const;
    ad::Var motion_tower(ad::Tape& tape, const std::vector<Mat>& motions) const;

    ad::ParameterSet& params() { return params_; }
    const ad::ParameterSet& params() const { return params_; }
    const StubEncoderConfig& config() const { return cfg_; }
    const std::vector<std::string>& vocab() const { return vocab_; }
    int motion_dim() const { return motion_dim_; }

    void save(const std::filesystem::path& path) const;
    static StubEncoder load(const std::filesystem::path& path);

    std::vector<double> loss_history;

private:
    friend StubEncoder stub_encoder_train(const DatasetSplit&, const StubEncoderConfig&);
    friend StubEncoder make_stub_encoder(const DatasetSplit&, const StubEncoderConfig&);
    void init(int motion_dim);

    std::vector<std::string> vocab_;
    std::unordered_map<std::string, int> word_index_;
    StubEncoderConfig cfg_;
    int motion_dim_ = 0;
    ad::ParameterSet params_;
    ad::ParamId emb_ = -1, t_w1_ = -1, t_b1_ = -1, t_w2_ = -1;
    ad::ParamId m_w1_ = -1, m_b1_ = -1, m_w2_ = -1;
};

// Untrained encoder over the corpus vocabulary (motion dim from the data).
StubEncoder make_stub_encoder(const DatasetSplit& corpus, const StubEncoderConfig& cfg);
// Trains on normalized motions of `corpus` paired with each of its captions.
StubEncoder stub_encoder_train(const DatasetSplit& corpus, const StubEncoderConfig& cfg = {});

// HTTP adapter for an external text encoder:
//   POST {"texts": [...]} -> {"embeddings": [[...], ...], "version": "..."}
class HttpTextEncoder : public TextEncoder {
public:
    HttpTextEncoder(std::string url, int dim, int timeout_s = 60);
    std::string version() const override { return version_; }
    int dim() const override { return dim_; }
    Mat embed_text(const std::vector<std::string>& texts) override;

private:
    std::string url_;
    int dim_;
    int timeout_s_;
    std::string version_;
};

// Precomputed embeddings: id -> (E, G).
struct EmbeddingRecord {
    std::string id;
    Mat events;
    RowVec global;
};
void write_embedding_file(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path);

}  // namespace et2m
