// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "et2m/autodiff.hpp"

#include <istream>
#include <ostream>

namespace et2m {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled weight decay Adam.
class AdamW {
public:
    AdamW(const ad::ParameterSet& params, AdamWConfig cfg = {});

    void step(ad::ParameterSet& params, const ad::Gradients& grads, double lr);
    int64_t steps() const { return t_; }

    void save(std::ostream& out) const;
    void load(std::istream& in);

private:
    AdamWConfig cfg_;
    std::vector<ad::Mat> m_, v_;
    int64_t t_ = 0;
};

// Cosine annealing from base_lr at step 0 to floor_lr at step `total`.
double cosine_lr(double base_lr, double floor_lr, int64_t step, int64_t total);

// Rescales grads to global norm `max_norm` when above it; returns the norm
// before clipping.
double clip_grad_norm(ad::Gradients& grads, double max_norm);

}  // namespace et2m
