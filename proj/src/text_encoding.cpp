// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/text_encoding.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"
#include "et2m/optim.hpp"
#include "et2m/serialize.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <regex>
#include <set>

namespace et2m {

using ad::Mat;
using ad::Tape;
using ad::Var;

std::string_view to_string(ConditioningMode m) {
    switch (m) {
        case ConditioningMode::event: return "event";
        case ConditioningMode::token: return "token";
        case ConditioningMode::global_only: return "global_only";
    }
    return "event";
}

ConditioningMode parse_conditioning_mode(std::string_view s) {
    if (s == "event") return ConditioningMode::event;
    if (s == "token") return ConditioningMode::token;
    if (s == "global_only" || s == "global") return ConditioningMode::global_only;
    throw ConfigError("unknown conditioning mode: " + std::string(s));
}

std::vector<std::string> word_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '\'') {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// ---- EventEncoder ----------------------------------------------------------

Mat EventEncoder::embed(const std::vector<std::string>& texts) {
    std::vector<std::string> missing;
    {
        std::lock_guard lock(mu_);
        std::set<std::string> seen;
        for (const auto& t : texts) {
            if (!cache_.count(t) && seen.insert(t).second) missing.push_back(t);
        }
    }
    if (!missing.empty()) {
        ++calls_;
        Mat fresh = encoder_.embed_text(missing);
        if (fresh.rows() != static_cast<Eigen::Index>(missing.size()) || fresh.cols() != encoder_.dim() || !fresh.allFinite()) {
            throw EncoderFailure("encoder returned a malformed embedding matrix");
        }
        std::lock_guard lock(mu_);
        for (size_t i = 0; i < missing.size(); ++i) cache_[missing[i]] = fresh.row(static_cast<Eigen::Index>(i));
    }
    Mat out(static_cast<Eigen::Index>(texts.size()), encoder_.dim());
    std::lock_guard lock(mu_);
    for (size_t i = 0; i < texts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = cache_.at(texts[i]);
    return out;
}

ConditioningBundle EventEncoder::encode(const Decomposition& d, ConditioningMode mode) {
    if (d.events.empty()) throw EncoderFailure("cannot encode a decomposition without events");
    std::vector<std::string> rows;
    if (mode == ConditioningMode::token) {
        rows = word_tokens(d.prompt);
        if (rows.empty()) rows.push_back(d.prompt);
    } else {
        rows = d.clause_texts();
    }
    rows.push_back(d.prompt);
    Mat all = embed(rows);
    ConditioningBundle b;
    b.events = all.topRows(all.rows() - 1);
    b.global = all.bottomRows(1);
    if (mode == ConditioningMode::global_only) b.events = b.global;  // no event keys to attend over
    return b;
}

// ---- StubEncoder -----------------------------------------------------------

StubEncoder::StubEncoder(std::vector<std::string> vocab, StubEncoderConfig cfg) : vocab_(std::move(vocab)), cfg_(cfg) {
    for (size_t i = 0; i < vocab_.size(); ++i) word_index_[vocab_[i]] = static_cast<int>(i);
}

void StubEncoder::init(int motion_dim) {
    motion_dim_ = motion_dim;
    std::mt19937_64 rng(cfg_.seed);
    auto randn = [&](Eigen::Index r, Eigen::Index c, double s) {
        std::normal_distribution<double> n(0.0, s);
        Mat m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
        return m;
    };
    const auto V = static_cast<Eigen::Index>(std::max<size_t>(vocab_.size(), 1));
    const int h = cfg_.hidden, d = cfg_.embed_dim;
    emb_ = params_.add("text.embedding", randn(V, h, 1.0));
    t_w1_ = params_.add("text.w1", randn(h, h, 1.0 / std::sqrt(h)));
    t_b1_ = params_.add("text.b1", Mat::Zero(1, h));
    t_w2_ = params_.add("text.w2", randn(h, d, 1.0 / std::sqrt(h)));
    m_w1_ = params_.add("motion.w1", randn(motion_dim, h, 1.0 / std::sqrt(motion_dim)));
    m_b1_ = params_.add("motion.b1", Mat::Zero(1, h));
    m_w2_ = params_.add("motion.w2", randn(3 * h, d, 1.0 / std::sqrt(3.0 * h)));
}

std::string StubEncoder::version() const { return "stub-" + params_.content_hash().substr(0, 16); }

Var StubEncoder::text_tower(Tape& tape, const std::vector<std::string>& texts) const {
    const auto V = params_[emb_].value.rows();
    Mat bow = Mat::Zero(static_cast<Eigen::Index>(texts.size()), V);
    for (size_t i = 0; i < texts.size(); ++i) {
        int known = 0;
        for (const auto& w : word_tokens(texts[i])) {
            auto it = word_index_.find(w);
            if (it == word_index_.end()) continue;
            bow(static_cast<Eigen::Index>(i), it->second) += 1.0;
            ++known;
        }
        if (known) bow.row(static_cast<Eigen::Index>(i)) /= known;
    }
    Var h = ad::matmul(tape.constant(std::move(bow)), tape.param(emb_));
    h = ad::relu(ad::linear(tape, h, t_w1_, t_b1_));
    return ad::l2_normalize_rows(ad::linear(tape, h, t_w2_));
}

Var StubEncoder::motion_tower(Tape& tape, const std::vector<Mat>& motions) const {
    std::vector<Var> rows;
    rows.reserve(motions.size());
    for (const auto& m : motions) {
        if (m.cols() != motion_dim_) throw DimensionMismatch("motion tower expects " + std::to_string(motion_dim_) + " channels");
        const auto L = m.rows();
        const auto half = std::max<Eigen::Index>(1, L / 2);
        Mat pool = Mat::Zero(3, L);
        pool.row(0).setConstant(1.0 / static_cast<double>(L));
        pool.row(1).head(half).setConstant(1.0 / static_cast<double>(half));
        const auto rest = L - half;
        if (rest > 0) {
            pool.row(2).tail(rest).setConstant(1.0 / static_cast<double>(rest));
        } else {
            pool.row(2) = pool.row(1);
        }
        Var f = ad::relu(ad::linear(tape, tape.constant(m), m_w1_, m_b1_));
        Var pooled = ad::matmul(tape.constant(std::move(pool)), f);
        rows.push_back(ad::concat_cols({ad::slice_rows(pooled, 0, 1), ad::slice_rows(pooled, 1, 1), ad::slice_rows(pooled, 2, 1)}));
    }
    return ad::l2_normalize_rows(ad::linear(tape, ad::concat_rows(rows), m_w2_));
}

Mat StubEncoder::embed_text_const(const std::vector<std::string>& texts) const {
    if (texts.empty()) return Mat(0, cfg_.embed_dim);
    Tape tape(&params_);
    return text_tower(tape, texts).value();
}

Mat StubEncoder::embed_text(const std::vector<std::string>& texts) { return embed_text_const(texts); }

Mat StubEncoder::embed_motion(const std::vector<Mat>& motions) const {
    if (motions.empty()) return Mat(0, cfg_.embed_dim);
    Tape tape(&params_);
    return motion_tower(tape, motions).value();
}

void StubEncoder::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    out.write("ET2MSTUB", 8);
    io::write_u64(out, vocab_.size());
    for (const auto& w : vocab_) io::write_string(out, w);
    io::write_u64(out, static_cast<uint64_t>(cfg_.embed_dim));
    io::write_u64(out, static_cast<uint64_t>(cfg_.hidden));
    io::write_f64(out, cfg_.temperature);
    io::write_u64(out, cfg_.seed);
    io::write_u64(out, static_cast<uint64_t>(motion_dim_));
    io::write_params(out, params_);
    if (!out) throw IoError("cannot write " + path.string());
}

StubEncoder StubEncoder::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    io::expect_magic(in, "ET2MSTUB");
    std::vector<std::string> vocab(io::read_u64(in));
    for (auto& w : vocab) w = io::read_string(in);
    StubEncoderConfig cfg;
    cfg.embed_dim = static_cast<int>(io::read_u64(in));
    cfg.hidden = static_cast<int>(io::read_u64(in));
    cfg.temperature = io::read_f64(in);
    cfg.seed = io::read_u64(in);
    const int motion_dim = static_cast<int>(io::read_u64(in));
    StubEncoder enc(std::move(vocab), cfg);
    enc.init(motion_dim);
    io::read_params_into(in, enc.params_);
    return enc;
}

StubEncoder make_stub_encoder(const DatasetSplit& corpus, const StubEncoderConfig& cfg) {
    std::set<std::string> words;
    for (const auto& s : corpus.pairs) {
        for (const auto& c : s.captions) {
            for (auto& w : word_tokens(c.text)) words.insert(std::move(w));
        }
    }
    if (corpus.pairs.empty()) throw DimensionMismatch("empty corpus");
    StubEncoder enc(std::vector<std::string>(words.begin(), words.end()), cfg);
    enc.init(static_cast<int>(corpus.pairs.front().motion.dim()));
    return enc;
}

StubEncoder stub_encoder_train(const DatasetSplit& corpus, const StubEncoderConfig& cfg) {
    StubEncoder enc = make_stub_encoder(corpus, cfg);
    std::vector<Mat> motions;
    for (const auto& s : corpus.pairs) motions.push_back(normalize(s.motion, corpus.normalization_stats).frames);

    AdamW opt(enc.params_);
    std::mt19937_64 rng(mix_seed(cfg.seed, 17));
    std::vector<size_t> order(corpus.pairs.size());
    std::iota(order.begin(), order.end(), 0);
    const size_t batch = static_cast<size_t>(std::max(2, cfg.batch_size));
    const int64_t steps_per_epoch = static_cast<int64_t>((order.size() + batch - 1) / batch);
    const int64_t total = steps_per_epoch * cfg.epochs;
    int64_t step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t b0 = 0; b0 < order.size(); b0 += batch) {
            const size_t b1 = std::min(order.size(), b0 + batch);
            if (b1 - b0 < 2) continue;
            std::vector<std::string> texts;
            std::vector<Mat> batch_motions;
            for (size_t i = b0; i < b1; ++i) {
                const auto& s = corpus.pairs[order[i]];
                std::uniform_int_distribution<size_t> pick(0, s.captions.size() - 1);
                texts.push_back(s.captions[pick(rng)].text);
                batch_motions.push_back(motions[order[i]]);
            }
            Tape tape(&enc.params_);
            Var t = enc.text_tower(tape, texts);
            Var m = enc.motion_tower(tape, batch_motions);
            Var logits = ad::scale(ad::matmul(t, ad::transpose(m)), 1.0 / cfg.temperature);
            std::vector<int> labels(texts.size());
            std::iota(labels.begin(), labels.end(), 0);
            // Captions shared by several motions in the batch are positives
            // for each; the diagonal label keeps the loss well defined.
            Var loss = ad::scale(ad::add(ad::cross_entropy_rows(logits, labels), ad::cross_entropy_rows(ad::transpose(logits), labels)), 0.5);
            ad::Gradients g(enc.params_);
            tape.backward(loss, &g);
            clip_grad_norm(g, 1.0);
            opt.step(enc.params_, g, cosine_lr(cfg.lr, 0.0, step, total));
            enc.loss_history.push_back(loss.scalar());
            ++step;
        }
    }
    return enc;
}

// ---- HTTP encoder ----------------------------------------------------------

HttpTextEncoder::HttpTextEncoder(std::string url, int dim, int timeout_s)
    : url_(std::move(url)), dim_(dim), timeout_s_(timeout_s), version_("http:" + url_) {}

Mat HttpTextEncoder::embed_text(const std::vector<std::string>& texts) {
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url_, m, url_re)) throw EncoderFailure("bad encoder url: " + url_);
    httplib::Client cli(m[1].str());
    cli.set_connection_timeout(timeout_s_);
    cli.set_read_timeout(timeout_s_);
    nlohmann::json body = {{"texts", texts}};
    auto res = cli.Post(m[2].matched ? m[2].str() : "/", body.dump(), "application/json");
    if (!res) throw EncoderFailure("encoder request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw EncoderFailure("encoder returned HTTP " + std::to_string(res->status));
    try {
        auto reply = nlohmann::json::parse(res->body);
        const auto& rows = reply.at("embeddings");
        if (rows.size() != texts.size()) throw EncoderFailure("encoder returned wrong row count");
        Mat out(static_cast<Eigen::Index>(texts.size()), dim_);
        for (size_t i = 0; i < rows.size(); ++i) {
            if (static_cast<int>(rows[i].size()) != dim_) throw EncoderFailure("encoder returned wrong embedding width");
            for (int j = 0; j < dim_; ++j) out(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(j)].get<double>();
        }
        if (reply.contains("version")) version_ = "http:" + reply["version"].get<std::string>();
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw EncoderFailure(std::string("malformed encoder reply: ") + e.what());
    }
}

// ---- embedding file --------------------------------------------------------

void write_embedding_file(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    out.write("ET2MEMB1", 8);
    io::write_u64(out, records.size());
    for (const auto& r : records) {
        io::write_string(out, r.id);
        io::write_matrix(out, r.events);
        io::write_matrix(out, r.global);
    }
    if (!out) throw IoError("cannot write " + path.string());
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    io::expect_magic(in, "ET2MEMB1");
    std::vector<EmbeddingRecord> out(io::read_u64(in));
    for (auto& r : out) {
        r.id = io::read_string(in);
        r.events = io::read_matrix(in);
        r.global = io::read_matrix(in);
        if (r.global.rows() != 1 || r.global.cols() != r.events.cols()) throw IoError("inconsistent embedding record " + r.id);
    }
    return out;
}

}  // namespace et2m
