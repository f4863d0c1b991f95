// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/optim.hpp"

#include "et2m/errors.hpp"
#include "et2m/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace et2m {

AdamW::AdamW(const ad::ParameterSet& params, AdamWConfig cfg) : cfg_(cfg) {
    for (const auto& p : params) {
        m_.push_back(ad::Mat::Zero(p.value.rows(), p.value.cols()));
        v_.push_back(ad::Mat::Zero(p.value.rows(), p.value.cols()));
    }
}

void AdamW::step(ad::ParameterSet& params, const ad::Gradients& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (int i = 0; i < params.size(); ++i) {
        const auto& g = grads.grads[static_cast<size_t>(i)];
        auto& m = m_[static_cast<size_t>(i)];
        auto& v = v_[static_cast<size_t>(i)];
        auto& w = params[i].value;
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        if (cfg_.weight_decay > 0.0) w *= 1.0 - lr * cfg_.weight_decay;
        w.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg_.eps);
    }
}

void AdamW::save(std::ostream& out) const {
    io::write_u64(out, static_cast<uint64_t>(t_));
    io::write_u64(out, m_.size());
    for (size_t i = 0; i < m_.size(); ++i) {
        io::write_matrix(out, m_[i]);
        io::write_matrix(out, v_[i]);
    }
}

void AdamW::load(std::istream& in) {
    t_ = static_cast<int64_t>(io::read_u64(in));
    const auto n = io::read_u64(in);
    if (n != m_.size()) throw IoError("optimizer state does not match the parameter set");
    for (size_t i = 0; i < n; ++i) {
        m_[i] = io::read_matrix(in);
        v_[i] = io::read_matrix(in);
    }
}

double cosine_lr(double base_lr, double floor_lr, int64_t step, int64_t total) {
    if (total <= 0) return base_lr;
    const double frac = std::clamp(static_cast<double>(step) / static_cast<double>(total), 0.0, 1.0);
    if (frac >= 1.0) return floor_lr;
    return floor_lr + 0.5 * (base_lr - floor_lr) * (1.0 + std::cos(std::numbers::pi * frac));
}

double clip_grad_norm(ad::Gradients& grads, double max_norm) {
    const double norm = grads.global_norm();
    if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
    return norm;
}

}  // namespace et2m
