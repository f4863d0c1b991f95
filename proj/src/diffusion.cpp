// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/diffusion.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"
#include "et2m/parallel.hpp"

#include <cmath>
#include <random>

namespace et2m {

using ad::Tape;
using ad::Var;

DiffusionSchedule DiffusionSchedule::linear(int T, double beta_1, double beta_T, int n_steps) {
    if (T < 1) throw ConfigError("diffusion.T must be >= 1");
    if (!(beta_1 > 0.0 && beta_T < 1.0 && beta_1 <= beta_T)) throw ConfigError("diffusion betas must satisfy 0 < beta_1 <= beta_T < 1");
    DiffusionSchedule s;
    s.T = T;
    double cum = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double f = T == 1 ? 1.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        const double b = T == 1 ? beta_T : beta_1 * (1.0 - f) + beta_T * f;
        s.betas.push_back(b);
        s.alphas.push_back(1.0 - b);
        cum *= 1.0 - b;
        s.alpha_bars.push_back(cum);
    }
    s.inference_steps = select_inference_steps(T, std::min(n_steps, T));
    return s;
}

void DiffusionSchedule::check_timestep(int t) const {
    if (t < 1 || t > T) throw TimestepOutOfRange("timestep " + std::to_string(t) + " outside [1, " + std::to_string(T) + "]");
}

double DiffusionSchedule::beta(int t) const {
    check_timestep(t);
    return betas[static_cast<size_t>(t - 1)];
}

double DiffusionSchedule::alpha_bar(int t) const {
    check_timestep(t);
    return alpha_bars[static_cast<size_t>(t - 1)];
}

std::vector<int> select_inference_steps(int T, int n) {
    if (T < 1 || n < 1 || n > T) {
        throw InvalidStepCount("step count " + std::to_string(n) + " must be in [1, " + std::to_string(T) + "]");
    }
    if (n == 1) return {T};
    std::vector<int> out;
    for (int i = n - 1; i >= 0; --i) {
        out.push_back(static_cast<int>(std::lround(1.0 + static_cast<double>(i) * (T - 1) / (n - 1))));
    }
    return out;
}

void GuidanceConfig::validate() const {
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("diffusion.guidance_scale must be finite and >= 0");
    if (!(dropout_tau >= 0.0 && dropout_tau < 1.0)) throw ConfigError("diffusion.cond_dropout must be in [0, 1)");
    if (!(clamp > 0.0)) throw ConfigError("diffusion.clamp must be > 0");
}

Mat forward_noise(const Mat& x0, int t, const Mat& eps, const DiffusionSchedule& schedule) {
    if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) throw ShapeMismatch("forward_noise: eps shape differs from x0");
    const double ab = schedule.alpha_bar(t);
    return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Mat recover_x0(const Mat& x_t, int t, const Mat& eps, const DiffusionSchedule& schedule) {
    const double ab = schedule.alpha_bar(t);
    return (x_t - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
}

Mat guided_prediction(const Mat& cond, const Mat& uncond, double scale) {
    if (scale == 1.0) return cond;
    if (scale == 0.0) return uncond;
    return scale * cond + (1.0 - scale) * uncond;
}

namespace {

Mat standard_normal(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

}  // namespace

LossResult training_loss(const std::vector<TrainingSample>& batch, const X0Model& model,
                         const DiffusionSchedule& schedule, const GuidanceConfig& guidance, uint64_t seed,
                         bool with_grads, int workers) {
    LossResult out;
    if (batch.empty()) return out;
    for (const auto& s : batch) out.elements += s.x0.size();
    const ad::ParameterSet* params = model.parameters();
    if (with_grads && !params) throw ConfigError("training_loss: gradients requested for a model without parameters");

    const size_t n = batch.size();
    std::vector<double> sq(n, 0.0);
    std::vector<int> ts(n, 0);
    std::vector<char> null_used(n, 0);
    std::vector<ad::Gradients> grads(with_grads ? n : 0);
    const double inv = 1.0 / static_cast<double>(out.elements);
    const ConditioningBundle null_b = model.null_bundle();

    parallel_for(n, workers, [&](size_t i) {
        const auto& s = batch[i];
        std::mt19937_64 rng(mix_seed(seed, i));
        std::uniform_int_distribution<int> pick_t(1, schedule.T);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        const int t = pick_t(rng);
        const bool use_null = coin(rng) < guidance.dropout_tau;
        Mat eps = standard_normal(s.x0.rows(), s.x0.cols(), rng);
        Mat x_t = forward_noise(s.x0, t, eps, schedule);

        Tape tape(params);
        ForwardContext ctx{tape};
        ctx.train = true;
        ctx.rng = &rng;
        Var pred = model.forward(ctx, tape.constant(std::move(x_t)), t, use_null ? null_b : s.bundle);
        if (pred.rows() != s.x0.rows() || pred.cols() != s.x0.cols()) throw ShapeMismatch("model output shape differs from x0");
        Var diff = ad::sub(pred, tape.constant(s.x0));
        Var loss = ad::scale(ad::sum(ad::mul(diff, diff)), inv);
        sq[i] = loss.scalar();
        ts[i] = t;
        null_used[i] = use_null;
        if (with_grads) {
            grads[i] = ad::Gradients(*params);
            tape.backward(loss, &grads[i]);
        }
    });

    for (size_t i = 0; i < n; ++i) {
        out.loss += sq[i];
        out.null_uses += null_used[i];
        out.timesteps.push_back(ts[i]);
    }
    if (with_grads) {
        out.grads = ad::Gradients(*params);
        for (const auto& g : grads) out.grads.add(g);
    }
    return out;
}

MotionSequence sample(const X0Model& model, const ConditioningBundle& bundle, int length,
                      const DiffusionSchedule& schedule, const GuidanceConfig& guidance, uint64_t seed,
                      const std::vector<int>& steps_in, SampleTrace* trace) {
    const std::vector<int>& steps = steps_in.empty() ? schedule.inference_steps : steps_in;
    if (steps.empty()) throw InvalidStepCount("sampler needs at least one step");
    for (size_t i = 0; i < steps.size(); ++i) {
        schedule.check_timestep(steps[i]);
        if (i > 0 && steps[i] >= steps[i - 1]) throw InvalidStepCount("inference steps must be strictly decreasing");
    }
    if (length < 1) throw ShapeMismatch("sample length must be >= 1");
    const ConditioningBundle null_b = model.null_bundle();

    std::mt19937_64 rng(mix_seed(seed, 0x73616d70ULL));
    Mat x = standard_normal(length, model.motion_dim(), rng);
    for (size_t i = 0; i < steps.size(); ++i) {
        const int t = steps[i];
        Mat cond, uncond;
        if (guidance.scale != 0.0) cond = model.predict(x, t, bundle);
        if (guidance.scale != 1.0) uncond = model.predict(x, t, null_b);
        Mat x0 = guided_prediction(cond, uncond, guidance.scale);
        x0 = x0.cwiseMax(-guidance.clamp).cwiseMin(guidance.clamp);
        if (trace) {
            trace->steps.push_back(t);
            trace->cond_x0.push_back(cond);
            trace->uncond_x0.push_back(uncond);
            trace->guided_x0.push_back(x0);
        }
        const double ab_t = schedule.alpha_bar(t);
        const bool last = i + 1 == steps.size();
        const double ab_prev = last ? 1.0 : schedule.alpha_bar(steps[i + 1]);
        const double beta = 1.0 - ab_t / ab_prev;
        const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab_t);
        const double ct = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab_t);
        Mat mean = c0 * x0 + ct * x;
        if (last) {
            x = std::move(mean);
        } else {
            const double var = (1.0 - ab_prev) / (1.0 - ab_t) * beta;
            x = mean + std::sqrt(var) * standard_normal(mean.rows(), mean.cols(), rng);
        }
    }
    MotionSequence m;
    m.frames = std::move(x);
    return m;
}

}  // namespace et2m
