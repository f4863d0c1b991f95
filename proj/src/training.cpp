// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/training.hpp"

#include "et2m/config.hpp"
#include "et2m/errors.hpp"
#include "et2m/hash.hpp"
#include "et2m/serialize.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace et2m {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    auto need = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError("training." + msg);
    };
    need(lr > 0.0 && std::isfinite(lr), "lr must be > 0");
    need(lr_floor >= 0.0 && lr_floor <= lr, "lr_floor must be in [0, lr]");
    need(batch_size >= 1, "batch_size must be >= 1");
    need(epochs >= 1, "epochs must be >= 1");
    need(checkpoint_interval >= 1, "checkpoint_interval must be >= 1");
    need(grad_clip >= 0.0, "grad_clip must be >= 0");
    need(!ema, "ema is not supported");
    need(workers >= 1, "workers must be >= 1");
    need(stop_after_steps >= 0, "stop_after_steps must be >= 0");
    need(adamw.beta1 >= 0.0 && adamw.beta1 < 1.0 && adamw.beta2 >= 0.0 && adamw.beta2 < 1.0, "betas must be in [0, 1)");
    need(adamw.weight_decay >= 0.0, "weight_decay must be >= 0");
}

namespace {

constexpr uint64_t kCheckpointVersion = 1;

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
    if (!std::isfinite(ckpt.val_fid)) throw NonFiniteLoss("checkpoint val_fid is not finite");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    {
        std::ofstream out(path, std::ios::binary);
        out.write("ET2MCKPT", 8);
        io::write_u64(out, kCheckpointVersion);
        io::write_string(out, denoiser_config_to_json(ckpt.model_config).dump());
        io::write_params(out, ckpt.params);
        io::write_string(out, ckpt.optimizer_state);
        io::write_u64(out, static_cast<uint64_t>(ckpt.epoch));
        io::write_u64(out, static_cast<uint64_t>(ckpt.step));
        io::write_f64(out, ckpt.val_fid);
        io::write_u64(out, ckpt.seed);
        if (!out) throw IoError("cannot write " + path.string());
    }
    std::ofstream manifest(path.string() + ".txt");
    manifest << "epoch " << ckpt.epoch << "\nstep " << ckpt.step << "\nval_fid " << nlohmann::json(ckpt.val_fid).dump()
             << "\nseed " << ckpt.seed << "\nparams_sha256 " << ckpt.params.content_hash() << "\nmodel "
             << denoiser_config_to_json(ckpt.model_config).dump(2) << '\n';
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    io::expect_magic(in, "ET2MCKPT");
    const auto version = io::read_u64(in);
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.model_config = denoiser_config_from_json(nlohmann::json::parse(io::read_string(in)));
    c.params = io::read_params(in);
    c.optimizer_state = io::read_string(in);
    c.epoch = static_cast<int>(io::read_u64(in));
    c.step = static_cast<int64_t>(io::read_u64(in));
    c.val_fid = io::read_f64(in);
    c.seed = io::read_u64(in);
    return c;
}

Denoiser model_from_checkpoint(const Checkpoint& ckpt) {
    Denoiser m(ckpt.model_config);
    if (m.params().size() != ckpt.params.size()) throw IoError("checkpoint parameters do not match the model config");
    for (const auto& p : ckpt.params) {
        const auto id = m.params().find(p.name);
        if (id < 0) throw IoError("checkpoint has unknown parameter " + p.name);
        auto& dst = m.params()[id].value;
        if (dst.rows() != p.value.rows() || dst.cols() != p.value.cols()) throw IoError("shape mismatch for " + p.name);
        dst = p.value;
    }
    return m;
}

const Checkpoint& select_best(const std::vector<Checkpoint>& checkpoints) {
    if (checkpoints.empty()) throw EmptyCheckpointSet("no checkpoints to select from");
    const Checkpoint* best = &checkpoints.front();
    for (const auto& c : checkpoints) {
        if (c.val_fid < best->val_fid || (c.val_fid == best->val_fid && c.epoch > best->epoch)) best = &c;
    }
    return *best;
}

TrainResult train(const std::vector<TrainingSample>& data, Denoiser& model, const DiffusionSchedule& schedule,
                  const GuidanceConfig& guidance, const TrainConfig& cfg, const ValidationFn& validate,
                  const fs::path& run_dir, const Checkpoint* resume) {
    cfg.validate();
    guidance.validate();
    if (data.empty()) throw ConfigError("training set is empty");

    const size_t n = data.size();
    const size_t batch = std::min(n, static_cast<size_t>(cfg.batch_size));
    const int64_t steps_per_epoch = static_cast<int64_t>((n + batch - 1) / batch);
    const int64_t total = steps_per_epoch * cfg.epochs;

    AdamW opt(model.params(), cfg.adamw);
    int64_t step = 0;
    if (resume) {
        for (const auto& p : resume->params) {
            const auto id = model.params().find(p.name);
            if (id < 0) throw IoError("resume checkpoint has unknown parameter " + p.name);
            model.params()[id].value = p.value;
        }
        std::istringstream os(resume->optimizer_state);
        opt.load(os);
        step = resume->step;
    }

    std::ofstream log;
    if (!run_dir.empty()) {
        fs::create_directories(run_dir / "checkpoints");
        log.open(run_dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
    }

    TrainResult result;
    auto make_checkpoint = [&](int epochs_done, double score) {
        Checkpoint c;
        c.model_config = model.config();
        c.params = model.params();
        std::ostringstream os;
        opt.save(os);
        c.optimizer_state = os.str();
        c.epoch = epochs_done;
        c.step = step;
        c.val_fid = score;
        c.seed = cfg.seed;
        if (!run_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof name, "epoch_%04d_step_%06lld.ckpt", epochs_done, static_cast<long long>(step));
            save_checkpoint(run_dir / "checkpoints" / name, c);
        }
        result.checkpoints.push_back(std::move(c));
    };
    auto score = [&](double fallback) {
        const double v = validate ? validate(model) : fallback;
        if (!std::isfinite(v)) throw NonFiniteLoss("validation score is not finite at step " + std::to_string(step));
        return v;
    };

    std::vector<size_t> order(n);
    for (int epoch = static_cast<int>(step / steps_per_epoch); epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0, epoch_norm = 0.0;
        int epoch_steps = 0, epoch_nulls = 0;
        for (int64_t b = step - static_cast<int64_t>(epoch) * steps_per_epoch; b < steps_per_epoch; ++b) {
            std::vector<TrainingSample> mb;
            const size_t lo = static_cast<size_t>(b) * batch, hi = std::min(n, lo + batch);
            for (size_t i = lo; i < hi; ++i) mb.push_back(data[order[i]]);
            const double lr = cosine_lr(cfg.lr, cfg.lr_floor, step, total);
            LossResult lr_res = training_loss(mb, model, schedule, guidance, mix_seed(cfg.seed, 0x7374657000ULL, static_cast<uint64_t>(step)),
                                              true, cfg.workers);
            if (!std::isfinite(lr_res.loss) || !std::isfinite(lr_res.grads.global_norm())) {
                std::string ids;
                for (const auto& s : mb) ids += (ids.empty() ? "" : ",") + s.id;
                throw NonFiniteLoss("non-finite loss at step " + std::to_string(step) + " (batch " + std::to_string(b) +
                                    " of epoch " + std::to_string(epoch) + ": " + ids + ")");
            }
            epoch_norm += clip_grad_norm(lr_res.grads, cfg.grad_clip);
            opt.step(model.params(), lr_res.grads, lr);
            ++step;
            result.step_losses.push_back(lr_res.loss);
            result.step_lrs.push_back(lr);
            epoch_loss += lr_res.loss;
            epoch_nulls += lr_res.null_uses;
            ++epoch_steps;
            if (cfg.stop_after_steps > 0 && step >= cfg.stop_after_steps) {
                make_checkpoint(static_cast<int>(step / steps_per_epoch), score(epoch_loss / epoch_steps));
                result.best = select_best(result.checkpoints);
                return result;
            }
        }
        const bool last = epoch + 1 == cfg.epochs;
        double val = std::nan("");
        if ((epoch + 1) % cfg.checkpoint_interval == 0 || last) {
            val = score(epoch_loss / std::max(1, epoch_steps));
            make_checkpoint(epoch + 1, val);
        }
        if (log.is_open()) {
            nlohmann::json line = {{"epoch", epoch + 1},
                                   {"step", step},
                                   {"loss", epoch_loss / std::max(1, epoch_steps)},
                                   {"lr", cosine_lr(cfg.lr, cfg.lr_floor, step, total)},
                                   {"grad_norm", epoch_norm / std::max(1, epoch_steps)},
                                   {"null_uses", epoch_nulls}};
            if (std::isfinite(val)) line["val_fid"] = val;
            log << line.dump() << '\n';
            log.flush();
        }
    }
    result.best = select_best(result.checkpoints);
    if (!run_dir.empty()) save_checkpoint(run_dir / "best.ckpt", result.best);
    return result;
}

}  // namespace et2m
