// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/pipeline.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"
#include "et2m/parallel.hpp"
#include "et2m/toy.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace et2m {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- building blocks --------------------------------------------------------

std::vector<TrainingSample> make_training_samples(const DatasetSplit& split, const DecompositionTable& table,
                                                  EventEncoder& encoder, ConditioningMode mode) {
    std::vector<TrainingSample> out;
    for (const auto& s : split.pairs) {
        auto it = table.find(s.motion.id);
        if (it == table.end() || it->second.size() < s.captions.size()) {
            throw MissingDecomposition("no decomposition for sample '" + s.motion.id + "'");
        }
        const Mat x0 = normalize(s.motion, split.normalization_stats).frames;
        for (size_t c = 0; c < s.captions.size(); ++c) {
            out.push_back({x0, encoder.encode(it->second[c], mode), s.motion.id + "/" + std::to_string(c)});
        }
    }
    return out;
}

std::vector<EvalItem> make_eval_items(const DatasetSplit& split, const DecompositionTable& table, EventEncoder& encoder,
                                      ConditioningMode mode) {
    std::vector<EvalItem> out;
    for (const auto& s : split.pairs) {
        auto it = table.find(s.motion.id);
        if (it == table.end() || it->second.empty() || s.captions.empty()) {
            throw MissingDecomposition("no decomposition for sample '" + s.motion.id + "'");
        }
        EvalItem item;
        item.id = s.motion.id;
        item.caption = s.captions.front().text;
        item.bundle = encoder.encode(it->second.front(), mode);
        item.real = normalize(s.motion, split.normalization_stats).frames;
        item.segment_bounds = s.segment_bounds;
        item.segment_labels = s.segment_labels;
        out.push_back(std::move(item));
    }
    return out;
}

bool ToyOrderJudge::matches(const Mat& frames, const EvalItem& item) const {
    if (item.segment_labels.empty()) return false;
    return toy::event_order_matches(frames, item.segment_bounds, item.segment_labels);
}

ValidationFn make_validation_fid(const std::vector<EvalItem>& items, const MotionEncoder& evaluator,
                                 const DiffusionSchedule& schedule, const GuidanceConfig& guidance, uint64_t seed,
                                 int workers) {
    std::vector<Mat> reals;
    for (const auto& it : items) reals.push_back(it.real);
    const Mat real = evaluator.embed_motion(reals);
    return [&items, &evaluator, schedule, guidance, seed, workers, real](const Denoiser& model) {
        std::vector<Mat> gens(items.size());
        parallel_for(items.size(), workers, [&](size_t i) {
            gens[i] = sample(model, items[i].bundle, static_cast<int>(items[i].real.rows()), schedule, guidance,
                             mix_seed(seed, 0x76616cULL, i))
                          .frames;
        });
        return fid(real, evaluator.embed_motion(gens));
    };
}

StratifiedBenchmark stratify_event_directory(const fs::path& dir, const std::vector<std::string>* ids) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::string> names;
    if (ids) {
        names = *ids;
    } else {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".txt") names.push_back(e.path().stem().string());
        }
        std::sort(names.begin(), names.end());
    }
    std::vector<std::pair<std::string, std::vector<int>>> counts;
    for (const auto& id : names) {
        const auto path = dir / (id + ".txt");
        if (!fs::exists(path)) throw MissingDecomposition("no event file for '" + id + "'");
        std::vector<int> ks;
        for (const auto& caption : read_event_file(path)) ks.push_back(static_cast<int>(caption.size()));
        counts.emplace_back(id, std::move(ks));
    }
    return stratify_counts(counts);
}

// ---- pipeline ---------------------------------------------------------------

namespace {

std::string short_key(const std::vector<std::string>& parts) {
    std::string joined;
    for (const auto& p : parts) joined += p + '\x1f';
    return sha256_hex(joined).substr(0, 16);
}

template <class F>
auto guarded(const std::string& stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure("stage " + stage + " failed: " + e.what());
    }
}

const std::vector<std::string> kSplits = {"train", "val", "test"};

}  // namespace

Pipeline::Pipeline(RunConfig cfg, fs::path run_dir, std::ostream* log, fs::path stage_root)
    : cfg_(std::move(cfg)), run_dir_(std::move(run_dir)), stage_root_(std::move(stage_root)), log_(log) {
    cfg_.validate();
    if (stage_root_.empty()) stage_root_ = run_dir_ / "stages";
    fs::create_directories(run_dir_);
    cfg_.save(run_dir_ / "config.json");
}

fs::path Pipeline::stage_dir(const std::string& name, const std::string& key) const { return stage_root_ / (name + "-" + key); }
bool Pipeline::stage_done(const fs::path& dir) const { return fs::exists(dir / "DONE"); }

void Pipeline::mark_done(const fs::path& dir) const {
    std::ofstream(dir / "DONE") << "ok\n";
}

void Pipeline::record(const std::string& name, const std::string& key, bool cached) {
    stages_.push_back({name, key, cached});
    if (log_) *log_ << "stage " << name << ": " << (cached ? "cached" : "done") << " [" << key << "]\n";
}

std::string Pipeline::data_key() { return short_key({"data-v1", cfg_.to_json()["data"].dump()}); }

std::string Pipeline::decompose_key() {
    const auto& s = cfg_.segmentation;
    std::string templ = s.backend == "llm" ? sha256_hex(prompt_template(s.strategy)) : "";
    return short_key({"decompose-v1", data_key(), s.backend, std::string(to_string(s.strategy)), templ});
}

std::string Pipeline::evaluator_key() {
    return short_key({"evaluator-v1", data_key(), cfg_.to_json()["encoder"].dump()});
}

std::string Pipeline::encode_key() {
    const auto& e = cfg_.encoder;
    return short_key({"encode-v1", decompose_key(), e.kind == "stub" ? evaluator_key() : e.url + "#" + std::to_string(e.dim),
                      std::string(to_string(e.mode))});
}

std::string Pipeline::train_key() {
    const json j = cfg_.to_json();
    return short_key({"train-v1", encode_key(), denoiser_config_to_json(model_config()).dump(), j["diffusion"].dump(),
                      j["training"].dump()});
}

std::string Pipeline::eval_key() {
    const json j = cfg_.to_json();
    return short_key({"eval-v1", train_key(), j["evaluation"].dump(), j["diffusion"].dump()});
}

const Corpus& Pipeline::corpus() {
    if (corpus_) return *corpus_;
    return guarded("data", [&]() -> const Corpus& {
        const std::string key = data_key();
        fs::path src = cfg_.data.root;
        bool cached = true;
        if (cfg_.data.root.empty()) {
            src = stage_dir("data", key);
            if (!stage_done(src)) {
                cached = false;
                toy::ToyOptions opt;
                opt.max_events = cfg_.data.max_events;
                opt.segment_frames = cfg_.data.segment_frames;
                opt.captions_per_sample = cfg_.data.captions_per_sample;
                auto splits = toy::generate_toy_splits(cfg_.data.n_train, cfg_.data.n_val, cfg_.data.n_test, opt, cfg_.data.seed);
                fs::create_directories(src);
                write_split(src, splits.train);
                write_split(src, splits.val);
                write_split(src, splits.test);
                mark_done(src);
            }
        }
        Corpus c;
        c.train = read_split(src, "train");
        c.val = read_split(src, "val", c.train.normalization_stats);
        c.test = read_split(src, "test", c.train.normalization_stats);
        corpus_ = std::move(c);
        record("data", key, cached);
        return *corpus_;
    });
}

const DecompositionTable& Pipeline::decompositions() {
    if (table_) return *table_;
    const Corpus& data = corpus();
    return guarded("decompose", [&]() -> const DecompositionTable& {
        const std::string key = decompose_key();
        const fs::path dir = stage_dir("decompose", key);
        const bool cached = stage_done(dir);
        const auto& seg = cfg_.segmentation;
        const std::vector<const DatasetSplit*> splits = {&data.train, &data.val, &data.test};
        if (!cached) {
            std::unique_ptr<LlmClient> llm;
            std::unique_ptr<ResponseCache> cache;
            if (seg.backend == "llm") {
                auto ep = LlmEndpoint::from_env();
                if (!ep) throw ConfigError("segmentation.backend=llm needs ET2M_LLM_ENDPOINT");
                llm = std::make_unique<HttpLlmClient>(*ep);
                cache = std::make_unique<ResponseCache>(seg.cache_dir.empty() ? run_dir_ / "llm_cache" : fs::path(seg.cache_dir));
            }
            for (size_t s = 0; s < splits.size(); ++s) {
                const auto& pairs = splits[s]->pairs;
                parallel_for(pairs.size(), cfg_.workers, [&](size_t i) {
                    std::vector<Decomposition> per_caption;
                    for (const auto& cap : pairs[i].captions) {
                        per_caption.push_back(llm ? decompose_with_fallback(serialize_caption_line(cap), seg.strategy, *llm, cache.get())
                                                  : decompose_rule(cap));
                    }
                    write_event_file(dir / kSplits[s] / (pairs[i].motion.id + ".txt"), per_caption);
                });
            }
            mark_done(dir);
        }
        DecompositionTable table;
        for (size_t s = 0; s < splits.size(); ++s) {
            for (const auto& p : splits[s]->pairs) {
                auto events = read_event_file(dir / kSplits[s] / (p.motion.id + ".txt"));
                if (events.size() != p.captions.size()) throw MissingDecomposition("event file of '" + p.motion.id + "' has the wrong caption count");
                auto& dst = table[p.motion.id];
                for (size_t c = 0; c < events.size(); ++c) {
                    Decomposition d;
                    d.prompt = p.captions[c].text;
                    d.strategy = seg.strategy;
                    d.events = std::move(events[c]);
                    dst.push_back(std::move(d));
                }
            }
        }
        table_ = std::move(table);
        record("decompose", key, cached);
        return *table_;
    });
}

const StratifiedBenchmark& Pipeline::benchmark() {
    if (!benchmark_) benchmark_ = stratify(corpus().test, decompositions());
    return *benchmark_;
}

StubEncoder& Pipeline::evaluator() {
    if (evaluator_) return *evaluator_;
    const Corpus& data = corpus();
    return guarded("evaluator", [&]() -> StubEncoder& {
        const std::string key = evaluator_key();
        const fs::path dir = stage_dir("evaluator", key);
        const bool cached = stage_done(dir);
        if (!cached) {
            fs::create_directories(dir);
            stub_encoder_train(data.train, cfg_.encoder.stub).save(dir / "evaluator.bin");
            mark_done(dir);
        }
        evaluator_ = std::make_unique<StubEncoder>(StubEncoder::load(dir / "evaluator.bin"));
        record("evaluator", key, cached);
        return *evaluator_;
    });
}

TextEncoder& Pipeline::conditioning_encoder() {
    if (cfg_.encoder.kind == "stub") return evaluator();
    if (!http_encoder_) http_encoder_ = std::make_unique<HttpTextEncoder>(cfg_.encoder.url, cfg_.encoder.dim);
    return *http_encoder_;
}

EventEncoder& Pipeline::event_encoder() {
    if (!event_encoder_) event_encoder_ = std::make_unique<EventEncoder>(conditioning_encoder());
    return *event_encoder_;
}

DenoiserConfig Pipeline::model_config() {
    DenoiserConfig m = cfg_.model;
    m.motion_dim = static_cast<int>(corpus().train.pairs.front().motion.dim());
    m.cond_dim = cfg_.encoder.kind == "stub" ? cfg_.encoder.stub.embed_dim : cfg_.encoder.dim;
    m.timesteps = cfg_.diffusion.T;
    if (cfg_.encoder.mode == ConditioningMode::global_only) m.use_eca = false;
    return m;
}

const std::vector<TrainingSample>& Pipeline::training_samples() {
    if (!train_samples_) test_items();
    return *train_samples_;
}

const std::vector<EvalItem>& Pipeline::val_items() {
    if (!val_items_) test_items();
    return *val_items_;
}

const std::vector<EvalItem>& Pipeline::test_items() {
    if (test_items_) return *test_items_;
    const Corpus& data = corpus();
    const DecompositionTable& table = decompositions();
    const std::string enc_key = encode_key();
    return guarded("encode", [&]() -> const std::vector<EvalItem>& {
        const fs::path dir = stage_dir("encode", enc_key);
        const bool cached = stage_done(dir);
        const auto mode = cfg_.encoder.mode;
        if (!cached) {
            EventEncoder& enc = event_encoder();
            fs::create_directories(dir);
            for (size_t s = 0; s < kSplits.size(); ++s) {
                const DatasetSplit& split = s == 0 ? data.train : s == 1 ? data.val : data.test;
                std::vector<EmbeddingRecord> records;
                for (const auto& p : split.pairs) {
                    const auto& decs = table.at(p.motion.id);
                    for (size_t c = 0; c < p.captions.size(); ++c) {
                        auto b = enc.encode(decs[c], mode);
                        records.push_back({p.motion.id + "/" + std::to_string(c), b.events, b.global});
                    }
                }
                write_embedding_file(dir / (kSplits[s] + ".emb"), records);
            }
            mark_done(dir);
        }
        std::vector<std::map<std::string, ConditioningBundle>> bundles(3);
        for (size_t s = 0; s < kSplits.size(); ++s) {
            for (auto& r : read_embedding_file(dir / (kSplits[s] + ".emb"))) {
                ConditioningBundle b;
                b.events = std::move(r.events);
                b.global = std::move(r.global);
                bundles[s][r.id] = std::move(b);
            }
        }
        auto bundle_of = [&](size_t s, const std::string& id, size_t c) -> const ConditioningBundle& {
            auto it = bundles[s].find(id + "/" + std::to_string(c));
            if (it == bundles[s].end()) throw MissingDecomposition("no embedding for " + id + "/" + std::to_string(c));
            return it->second;
        };
        std::vector<TrainingSample> train;
        for (const auto& p : data.train.pairs) {
            const Mat x0 = normalize(p.motion, data.train.normalization_stats).frames;
            for (size_t c = 0; c < p.captions.size(); ++c) train.push_back({x0, bundle_of(0, p.motion.id, c), p.motion.id + "/" + std::to_string(c)});
        }
        auto items = [&](size_t s, const DatasetSplit& split) {
            std::vector<EvalItem> out;
            for (const auto& p : split.pairs) {
                EvalItem it;
                it.id = p.motion.id;
                it.caption = p.captions.front().text;
                it.bundle = bundle_of(s, p.motion.id, 0);
                it.real = normalize(p.motion, split.normalization_stats).frames;
                it.segment_bounds = p.segment_bounds;
                it.segment_labels = p.segment_labels;
                out.push_back(std::move(it));
            }
            return out;
        };
        train_samples_ = std::move(train);
        val_items_ = items(1, data.val);
        test_items_ = items(2, data.test);
        record("encode", enc_key, cached);
        return *test_items_;
    });
}

const Checkpoint& Pipeline::trained() {
    if (trained_) return *trained_;
    const auto& samples = training_samples();
    const auto& val = val_items();
    StubEncoder& eval_enc = evaluator();
    const DenoiserConfig mc = model_config();
    const std::string key = train_key();
    return guarded("train", [&]() -> const Checkpoint& {
        const fs::path dir = stage_dir("train", key);
        const bool cached = stage_done(dir);
        if (!cached) {
            Denoiser model(mc);
            const auto sched = schedule();
            ValidationFn vf = make_validation_fid(val, eval_enc, sched, cfg_.diffusion.guidance,
                                                  mix_seed(cfg_.training.seed, 0x76ULL), cfg_.workers);
            TrainConfig tc = cfg_.training;
            tc.workers = cfg_.workers;
            train(samples, model, sched, cfg_.diffusion.guidance, tc, vf, dir);
            mark_done(dir);
        }
        trained_ = load_checkpoint(dir / "best.ckpt");
        model_ = std::make_unique<Denoiser>(model_from_checkpoint(*trained_));
        record("train", key, cached);
        return *trained_;
    });
}

EvaluationReport Pipeline::evaluate_with(const EvalConfig& eval_cfg, EvalDump* dump) {
    trained();
    const auto& items = test_items();
    const auto& bench = benchmark();
    StubEncoder& eval_enc = evaluator();
    EvalConfig ec = eval_cfg;
    ec.stats = corpus().train.normalization_stats;
    ToyOrderJudge judge;
    const bool toy = !items.empty() && !items.front().segment_labels.empty();
    return evaluate(*model_, items, bench, eval_enc, eval_enc, schedule(), ec, toy ? &judge : nullptr, dump);
}

const EvaluationReport& Pipeline::report() {
    if (report_) return *report_;
    trained();
    const std::string key = eval_key();
    return guarded("eval", [&]() -> const EvaluationReport& {
        const fs::path dir = stage_dir("eval", key);
        const bool cached = stage_done(dir);
        if (!cached) {
            EvaluationReport rep = evaluate_with(make_eval_config(cfg_));
            rep.meta["run"] = cfg_.name;
            fs::create_directories(dir);
            std::ofstream(dir / "report.json") << rep.to_json().dump(2) << '\n';
            std::ofstream(dir / "report.txt") << rep.to_text();
            mark_done(dir);
        }
        std::ifstream in(dir / "report.json");
        report_ = EvaluationReport::from_json(json::parse(in));
        fs::copy_file(dir / "report.json", run_dir_ / "report.json", fs::copy_options::overwrite_existing);
        fs::copy_file(dir / "report.txt", run_dir_ / "report.txt", fs::copy_options::overwrite_existing);
        record("eval", key, cached);
        return *report_;
    });
}

// ---- ablation ---------------------------------------------------------------

AblationAxis parse_ablation_axis(std::string_view s) {
    if (s == "steps") return AblationAxis::steps;
    if (s == "scale") return AblationAxis::scale;
    if (s == "backbone") return AblationAxis::backbone;
    if (s == "encoder_mode") return AblationAxis::encoder_mode;
    throw ConfigError("unknown ablation axis: " + std::string(s));
}

namespace {

std::string ablation_table(const std::string& axis, const AblationResult& r) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-14s %10s %10s %10s %10s %12s %12s\n", axis.c_str(), "top1", "top3", "fid", "mm_dist",
                  "order(all)", "order(>=3)");
    out << buf;
    auto get = [](const EvaluationReport& rep, const std::string& cond, const std::string& m) {
        auto c = rep.conditions.find(cond);
        if (c == rep.conditions.end()) return std::nan("");
        auto v = c->second.find(m);
        return v == c->second.end() ? std::nan("") : v->second.value;
    };
    for (size_t i = 0; i < r.values.size(); ++i) {
        const auto& rep = r.reports[i];
        std::snprintf(buf, sizeof buf, "%-14s %10.4f %10.4f %10.4f %10.4f %12.4f %12.4f\n", r.values[i].c_str(),
                      get(rep, "all", "top1"), get(rep, "all", "top3"), get(rep, "all", "fid"), get(rep, "all", "mm_dist"),
                      get(rep, "all", "event_order"), get(rep, ">=3", "event_order"));
        out << buf;
    }
    return out.str();
}

}  // namespace

AblationResult run_ablation(const RunConfig& base, AblationAxis axis, const std::vector<std::string>& values,
                            const fs::path& run_dir, std::ostream* log) {
    if (values.empty()) throw ConfigError("ablation needs at least one value");
    static const char* names[] = {"steps", "scale", "backbone", "encoder_mode"};
    const std::string axis_name = names[static_cast<int>(axis)];
    AblationResult result;
    const fs::path out_dir = run_dir / ("ablate_" + axis_name);
    const fs::path stage_root = run_dir / "stages";

    // Validate every value before any work.
    std::vector<RunConfig> per_value;
    for (const auto& v : values) {
        RunConfig c = base;
        try {
            switch (axis) {
                case AblationAxis::steps: c.diffusion.steps = std::stoi(v); break;
                case AblationAxis::scale: c.diffusion.guidance.scale = std::stod(v); break;
                case AblationAxis::backbone: c.model.backbone = parse_backbone(v); break;
                case AblationAxis::encoder_mode: c.encoder.mode = parse_conditioning_mode(v); break;
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("invalid " + axis_name + " value: " + v);
        } catch (const std::out_of_range&) {
            throw ConfigError("invalid " + axis_name + " value: " + v);
        }
        c.validate();
        per_value.push_back(std::move(c));
    }

    if (axis == AblationAxis::steps || axis == AblationAxis::scale) {
        Pipeline p(base, run_dir, log, stage_root);
        for (size_t i = 0; i < values.size(); ++i) {
            EvalConfig ec = make_eval_config(base);
            if (axis == AblationAxis::steps) {
                ec.steps = select_inference_steps(base.diffusion.T, per_value[i].diffusion.steps);
            } else {
                ec.guidance.scale = per_value[i].diffusion.guidance.scale;
            }
            EvaluationReport rep = guarded("eval", [&] { return p.evaluate_with(ec); });
            rep.meta["ablation_axis"] = axis_name;
            rep.meta["ablation_value"] = values[i];
            result.values.push_back(values[i]);
            result.reports.push_back(std::move(rep));
            if (log) *log << "ablation " << axis_name << "=" << values[i] << ": done\n";
        }
    } else {
        for (size_t i = 0; i < values.size(); ++i) {
            Pipeline p(per_value[i], out_dir / values[i], log, stage_root);
            EvaluationReport rep = p.report();
            rep.meta["ablation_axis"] = axis_name;
            rep.meta["ablation_value"] = values[i];
            result.values.push_back(values[i]);
            result.reports.push_back(std::move(rep));
        }
    }
    fs::create_directories(out_dir);
    json all = json::array();
    for (size_t i = 0; i < result.values.size(); ++i) {
        fs::create_directories(out_dir / result.values[i]);
        std::ofstream(out_dir / result.values[i] / "report.json") << result.reports[i].to_json().dump(2) << '\n';
        all.push_back({{"value", result.values[i]}, {"report", result.reports[i].to_json()}});
    }
    result.table = ablation_table(axis_name, result);
    std::ofstream(out_dir / "ablation.json") << all.dump(2) << '\n';
    std::ofstream(out_dir / "ablation.txt") << result.table;
    return result;
}

// ---- plot -------------------------------------------------------------------

std::string render_condition_plot_svg(const EvaluationReport& report) {
    std::vector<std::string> conds;
    if (report.conditions.count("all")) conds.push_back("all");
    for (const auto& [c, m] : report.conditions) {
        if (c != "all") conds.push_back(c);
    }
    const std::vector<std::pair<std::string, std::string>> metrics = {
        {"fid", "#d62728"}, {"top1", "#1f77b4"}, {"event_order", "#2ca02c"}};
    const int panel_w = 300, panel_h = 220, pad = 50;
    const int width = pad + static_cast<int>(metrics.size()) * (panel_w + pad);
    const int height = panel_h + 2 * pad;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    char buf[256];
    for (size_t mi = 0; mi < metrics.size(); ++mi) {
        const auto& [name, color] = metrics[mi];
        const int x0 = pad + static_cast<int>(mi) * (panel_w + pad), y0 = pad;
        std::vector<std::pair<double, double>> pts;  // (value, ci)
        for (const auto& c : conds) {
            const auto& m = report.conditions.at(c);
            auto it = m.find(name);
            pts.emplace_back(it == m.end() ? std::nan("") : it->second.value, it == m.end() ? 0.0 : it->second.ci95);
        }
        double lo = 0.0, hi = 0.0;
        bool any = false;
        for (const auto& [v, ci] : pts) {
            if (!std::isfinite(v)) continue;
            hi = any ? std::max(hi, v + ci) : v + ci;
            lo = any ? std::min(lo, v - ci) : std::min(0.0, v - ci);
            any = true;
        }
        if (!any || hi <= lo) hi = lo + 1.0;
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" stroke=\"#444\"/>\n"
                      "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" font-weight=\"bold\">%s</text>\n",
                      x0, y0, panel_w, panel_h, x0 + panel_w / 2, y0 - 12, name.c_str());
        svg << buf;
        auto px = [&](size_t i) { return x0 + (conds.size() == 1 ? panel_w / 2.0 : 20.0 + (panel_w - 40.0) * i / (conds.size() - 1)); };
        auto py = [&](double v) { return y0 + panel_h - 10.0 - (panel_h - 20.0) * (v - lo) / (hi - lo); };
        std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n",
                      x0 - 4, py(hi) + 4, hi, x0 - 4, py(lo) + 4, lo);
        svg << buf;
        std::string path;
        for (size_t i = 0; i < conds.size(); ++i) {
            std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%s</text>\n", px(i), y0 + panel_h + 16,
                          conds[i] == "all" ? "all" : conds[i].c_str());
            svg << buf;
            const auto [v, ci] = pts[i];
            if (!std::isfinite(v)) continue;
            std::snprintf(buf, sizeof buf, "%s%.1f,%.1f", path.empty() ? "" : " ", px(i), py(v));
            path += buf;
            std::snprintf(buf, sizeof buf,
                          "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\"/>\n<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n",
                          px(i), py(v - ci), px(i), py(v + ci), color.c_str(), px(i), py(v), color.c_str());
            svg << buf;
        }
        if (!path.empty()) svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << path << "\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace et2m
