// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/config.hpp"

#include "et2m/errors.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace et2m {

using nlohmann::json;

namespace {

template <class T>
void assign(T& dst, const json& v, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(key + " must be a boolean");
            dst = v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(key + " must be an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned() || v.get<int64_t>() >= 0) {
                    dst = v.get<T>();
                } else {
                    throw ConfigError(key + " must be non-negative");
                }
            } else {
                dst = v.get<T>();
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(key + " must be a number");
            dst = v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(key + " must be a string");
            dst = v.get<std::string>();
        } else {
            static_assert(sizeof(T) == 0, "unsupported config field type");
        }
    } catch (const json::exception& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

struct Field {
    std::string section, key, help;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

#define ET2M_FIELD(sec, name, member, help)                                                                       \
    Field {                                                                                                       \
        sec, name, help, [](const RunConfig& c) { return json(c.member); },                                       \
            [](RunConfig& c, const json& v) { assign(c.member, v, std::string(sec).empty() ? name : std::string(sec) + "." + name); } \
    }

template <class E>
Field enum_field(std::string sec, std::string name, std::string help, std::function<E&(RunConfig&)> ref,
                 std::function<E(std::string_view)> parse) {
    return Field{sec, name, help,
                 [ref](const RunConfig& c) { return json(std::string(to_string(ref(const_cast<RunConfig&>(c))))); },
                 [ref, parse, sec, name](RunConfig& c, const json& v) {
                     if (!v.is_string()) throw ConfigError(sec + "." + name + " must be a string");
                     ref(c) = parse(v.get<std::string>());
                 }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        ET2M_FIELD("", "name", name, "run name"),
        ET2M_FIELD("", "workers", workers, "worker threads for per-sample work"),

        ET2M_FIELD("data", "root", data.root, "dataset root (texts/, motions/, splits/); empty generates the toy corpus"),
        ET2M_FIELD("data", "n_train", data.n_train, "toy training samples"),
        ET2M_FIELD("data", "n_val", data.n_val, "toy validation samples"),
        ET2M_FIELD("data", "n_test", data.n_test, "toy test samples"),
        ET2M_FIELD("data", "max_events", data.max_events, "toy: maximum events per sample (1..6)"),
        ET2M_FIELD("data", "segment_frames", data.segment_frames, "toy: nominal frames per event"),
        ET2M_FIELD("data", "captions_per_sample", data.captions_per_sample, "toy: captions per motion"),
        ET2M_FIELD("data", "seed", data.seed, "toy generator seed"),

        ET2M_FIELD("segmentation", "backend", segmentation.backend, "rule | llm (llm falls back to rule on failure)"),
        enum_field<Strategy>("segmentation", "strategy", "event_aware | verb_aware prompt",
                             [](RunConfig& c) -> Strategy& { return c.segmentation.strategy; }, parse_strategy),
        ET2M_FIELD("segmentation", "cache_dir", segmentation.cache_dir, "LLM response cache; empty uses <run>/llm_cache"),

        ET2M_FIELD("encoder", "kind", encoder.kind, "stub | http"),
        ET2M_FIELD("encoder", "url", encoder.url, "http encoder endpoint"),
        ET2M_FIELD("encoder", "dim", encoder.dim, "http encoder embedding width"),
        enum_field<ConditioningMode>("encoder", "mode", "event | token | global_only",
                                     [](RunConfig& c) -> ConditioningMode& { return c.encoder.mode; }, parse_conditioning_mode),
        ET2M_FIELD("encoder", "stub_embed_dim", encoder.stub.embed_dim, "stub encoder output width D_y"),
        ET2M_FIELD("encoder", "stub_hidden", encoder.stub.hidden, "stub encoder hidden width"),
        ET2M_FIELD("encoder", "stub_temperature", encoder.stub.temperature, "contrastive temperature"),
        ET2M_FIELD("encoder", "stub_epochs", encoder.stub.epochs, "stub encoder training epochs"),
        ET2M_FIELD("encoder", "stub_batch_size", encoder.stub.batch_size, "stub encoder batch size"),
        ET2M_FIELD("encoder", "stub_lr", encoder.stub.lr, "stub encoder learning rate"),
        ET2M_FIELD("encoder", "stub_seed", encoder.stub.seed, "stub encoder seed"),

        ET2M_FIELD("model", "motion_dim", model.motion_dim, "pose feature width D_m (taken from the data)"),
        ET2M_FIELD("model", "cond_dim", model.cond_dim, "text embedding width D_y (taken from the encoder)"),
        ET2M_FIELD("model", "n_blocks", model.n_blocks, "denoiser blocks N"),
        ET2M_FIELD("model", "hidden", model.hidden, "hidden width D"),
        ET2M_FIELD("model", "downsample", model.downsample, "temporal downsampling factor S"),
        ET2M_FIELD("model", "heads", model.heads, "attention heads H"),
        ET2M_FIELD("model", "head_dim", model.head_dim, "per-head width d_h (H * d_h = D)"),
        ET2M_FIELD("model", "ffn_expansion", model.ffn_expansion, "feed-forward expansion factor"),
        ET2M_FIELD("model", "limm_kernel", model.limm_kernel, "local module depthwise kernel"),
        ET2M_FIELD("model", "conv_width", model.conv_width, "conformer depthwise kernel"),
        ET2M_FIELD("model", "norm_groups", model.norm_groups, "group norm groups (clamped to channels)"),
        ET2M_FIELD("model", "dropout_p", model.dropout_p, "dropout in attention and feed-forward outputs"),
        enum_field<Backbone>("model", "backbone", "conformer | transformer",
                             [](RunConfig& c) -> Backbone& { return c.model.backbone; }, parse_backbone),
        ET2M_FIELD("model", "per_block_downsample", model.per_block_downsample, "downsample and upsample inside every block"),
        ET2M_FIELD("model", "use_eca", model.use_eca, "event cross-attention on (false: global token only)"),
        ET2M_FIELD("model", "max_events", model.max_events, "event-index key embeddings"),
        ET2M_FIELD("model", "rel_buckets", model.rel_buckets, "relative position buckets"),
        ET2M_FIELD("model", "rel_exact", model.rel_exact, "offsets below this get their own bucket"),
        ET2M_FIELD("model", "rel_max_distance", model.rel_max_distance, "offset where buckets saturate"),
        ET2M_FIELD("model", "timesteps", model.timesteps, "largest accepted timestep (set from diffusion.T)"),
        ET2M_FIELD("model", "seed", model.seed, "parameter initialization seed"),

        ET2M_FIELD("diffusion", "T", diffusion.T, "diffusion steps"),
        ET2M_FIELD("diffusion", "beta_1", diffusion.beta_1, "first beta of the linear schedule"),
        ET2M_FIELD("diffusion", "beta_T", diffusion.beta_T, "last beta of the linear schedule"),
        ET2M_FIELD("diffusion", "steps", diffusion.steps, "sampling steps"),
        ET2M_FIELD("diffusion", "guidance_scale", diffusion.guidance.scale, "classifier-free guidance scale s"),
        ET2M_FIELD("diffusion", "cond_dropout", diffusion.guidance.dropout_tau, "conditioning dropout tau during training"),
        ET2M_FIELD("diffusion", "clamp", diffusion.guidance.clamp, "x0 estimate clamp (normalized units)"),

        ET2M_FIELD("training", "lr", training.lr, "AdamW learning rate"),
        ET2M_FIELD("training", "lr_floor", training.lr_floor, "cosine annealing floor"),
        ET2M_FIELD("training", "batch_size", training.batch_size, "batch size"),
        ET2M_FIELD("training", "epochs", training.epochs, "epochs"),
        ET2M_FIELD("training", "checkpoint_interval", training.checkpoint_interval, "epochs between checkpoints"),
        ET2M_FIELD("training", "seed", training.seed, "training seed"),
        ET2M_FIELD("training", "grad_clip", training.grad_clip, "global gradient norm clip (0 disables)"),
        ET2M_FIELD("training", "beta1", training.adamw.beta1, "AdamW beta1"),
        ET2M_FIELD("training", "beta2", training.adamw.beta2, "AdamW beta2"),
        ET2M_FIELD("training", "weight_decay", training.adamw.weight_decay, "AdamW decoupled weight decay"),
        ET2M_FIELD("training", "ema", training.ema, "exponential moving average (unsupported, must be false)"),

        ET2M_FIELD("evaluation", "n_repeats", evaluation.n_repeats, "repeated evaluations for confidence intervals"),
        ET2M_FIELD("evaluation", "pool_size", evaluation.pool_size, "R-precision candidate pool"),
        ET2M_FIELD("evaluation", "mm_prompts", evaluation.mm_prompts, "prompts used for MModality (0 disables)"),
        ET2M_FIELD("evaluation", "mm_generations", evaluation.mm_generations, "generations per MModality prompt"),
        ET2M_FIELD("evaluation", "mm_pairs", evaluation.mm_pairs, "pairs per MModality prompt"),
        ET2M_FIELD("evaluation", "seed", evaluation.seed, "evaluation sampling seed"),
    };
    return f;
}

#undef ET2M_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields()) {
        if (f.section == section && f.key == key) return &f;
    }
    return nullptr;
}

}  // namespace

RunConfig RunConfig::toy() {
    RunConfig c;
    c.name = "toy";
    c.model.n_blocks = 2;
    c.model.hidden = 64;
    c.model.heads = 4;
    c.model.head_dim = 16;
    c.model.downsample = 4;
    c.training.batch_size = 32;
    c.training.epochs = 50;
    c.training.lr = 1e-3;
    c.training.checkpoint_interval = 10;
    c.evaluation.n_repeats = 3;
    c.evaluation.mm_prompts = 8;
    c.evaluation.mm_generations = 4;
    c.evaluation.mm_pairs = 4;
    return c;
}

void RunConfig::validate() const {
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (data.root.empty()) {
        if (data.n_train < 1 || data.n_val < 2 || data.n_test < 2) throw ConfigError("data: need n_train >= 1, n_val >= 2, n_test >= 2");
        if (data.max_events < 1 || data.max_events > 6) throw ConfigError("data.max_events must be in [1, 6]");
        if (data.segment_frames < 4) throw ConfigError("data.segment_frames must be >= 4");
        if (data.captions_per_sample < 1) throw ConfigError("data.captions_per_sample must be >= 1");
    }
    if (segmentation.backend != "rule" && segmentation.backend != "llm") throw ConfigError("segmentation.backend must be rule or llm");
    if (encoder.kind != "stub" && encoder.kind != "http") throw ConfigError("encoder.kind must be stub or http");
    if (encoder.kind == "http" && (encoder.url.empty() || encoder.dim < 1)) throw ConfigError("encoder: http needs url and dim");
    if (encoder.stub.embed_dim < 1 || encoder.stub.hidden < 1 || encoder.stub.epochs < 0 || encoder.stub.batch_size < 2 ||
        !(encoder.stub.temperature > 0.0) || !(encoder.stub.lr > 0.0)) {
        throw ConfigError("encoder: invalid stub settings");
    }
    model.validate();
    if (diffusion.T < 1) throw ConfigError("diffusion.T must be >= 1");
    if (diffusion.steps < 1 || diffusion.steps > diffusion.T) throw ConfigError("diffusion.steps must be in [1, T]");
    if (!(diffusion.beta_1 > 0.0 && diffusion.beta_1 <= diffusion.beta_T && diffusion.beta_T < 1.0)) {
        throw ConfigError("diffusion: need 0 < beta_1 <= beta_T < 1");
    }
    diffusion.guidance.validate();
    training.validate();
    if (evaluation.n_repeats < 1) throw ConfigError("evaluation.n_repeats must be >= 1");
    if (evaluation.pool_size < 2) throw ConfigError("evaluation.pool_size must be >= 2");
    if (evaluation.mm_prompts < 0 || evaluation.mm_pairs < 1) throw ConfigError("evaluation: invalid mmodality settings");
    if (evaluation.mm_prompts > 0 && evaluation.mm_generations < 2) throw ConfigError("evaluation.mm_generations must be >= 2");
}

json RunConfig::to_json() const {
    json j = json::object();
    for (const auto& f : fields()) {
        if (f.section.empty()) {
            j[f.key] = f.get(*this);
        } else {
            j[f.section][f.key] = f.get(*this);
        }
    }
    return j;
}

RunConfig RunConfig::from_json(const json& j) { return from_json(j, RunConfig{}); }
RunConfig RunConfig::load(const std::filesystem::path& path) { return load(path, RunConfig{}); }

RunConfig RunConfig::from_json(const json& j, const RunConfig& base) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    RunConfig c = base;
    for (const auto& [k, v] : j.items()) {
        if (v.is_object()) {
            bool known_section = false;
            for (const auto& f : fields()) known_section |= f.section == k;
            if (!known_section) throw ConfigError("unknown config section: " + k);
            for (const auto& [kk, vv] : v.items()) {
                const Field* f = find_field(k, kk);
                if (!f) throw ConfigError("unknown config key: " + k + "." + kk);
                f->set(c, vv);
            }
        } else {
            const Field* f = find_field("", k);
            if (!f) throw ConfigError("unknown config key: " + k);
            f->set(c, v);
        }
    }
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const RunConfig& base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path.string());
    try {
        return from_json(json::parse(in), base);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
}

void RunConfig::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    out << to_json().dump(2) << '\n';
    if (!out) throw IoError("cannot write " + path.string());
}

void RunConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like section.key=value: " + assignment);
    const std::string path = assignment.substr(0, eq), value = assignment.substr(eq + 1);
    const auto dot = path.find('.');
    const std::string section = dot == std::string::npos ? "" : path.substr(0, dot);
    const std::string key = dot == std::string::npos ? path : path.substr(dot + 1);
    const Field* f = find_field(section, key);
    if (!f) throw ConfigError("unknown config key: " + path);
    json v;
    try {
        v = json::parse(value);
    } catch (const json::parse_error&) {
        v = value;
    }
    f->set(*this, v);
}

std::string config_help() {
    const RunConfig defaults;
    std::ostringstream out;
    for (const auto& f : fields()) {
        const std::string name = f.section.empty() ? f.key : f.section + "." + f.key;
        out << "  " << name << std::string(name.size() < 30 ? 30 - name.size() : 1, ' ') << f.get(defaults).dump()
            << "  " << f.help << '\n';
    }
    return out.str();
}

json denoiser_config_to_json(const DenoiserConfig& c) {
    RunConfig r;
    r.model = c;
    return r.to_json()["model"];
}

DenoiserConfig denoiser_config_from_json(const json& j) {
    return RunConfig::from_json(json{{"model", j}}).model;
}

EvalConfig make_eval_config(const RunConfig& cfg) {
    EvalConfig e;
    e.n_repeats = cfg.evaluation.n_repeats;
    e.pool_size = cfg.evaluation.pool_size;
    e.mm_prompts = cfg.evaluation.mm_prompts;
    e.mm_generations = cfg.evaluation.mm_generations;
    e.mm_pairs = cfg.evaluation.mm_pairs;
    e.seed = cfg.evaluation.seed;
    e.workers = cfg.workers;
    e.guidance = cfg.diffusion.guidance;
    return e;
}

}  // namespace et2m
