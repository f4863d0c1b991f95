// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Tape records every operation of one forward pass. Values are Eigen
// matrices; sequences are laid out as (time x channels). Parameters live in a
// ParameterSet and enter the tape as leaves; Tape::backward accumulates their
// gradients into a Gradients buffer indexed like the ParameterSet.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace et2m::ad {

using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

using ParamId = int;

struct Parameter {
    std::string name;
    Mat value;
};

class ParameterSet {
public:
    ParamId add(std::string name, Mat value);
    ParamId find(const std::string& name) const;  // -1 when absent

    Parameter& operator[](ParamId id) { return params_[static_cast<size_t>(id)]; }
    const Parameter& operator[](ParamId id) const { return params_[static_cast<size_t>(id)]; }
    int size() const { return static_cast<int>(params_.size()); }
    int64_t scalar_count() const;

    std::vector<Parameter>::const_iterator begin() const { return params_.begin(); }
    std::vector<Parameter>::const_iterator end() const { return params_.end(); }

    // Flat views used by the optimizer, checkpoints and finite-difference tests.
    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
    std::string content_hash() const;

private:
    std::vector<Parameter> params_;
    std::map<std::string, ParamId> index_;
};

// One gradient matrix per parameter, same shapes as the ParameterSet.
struct Gradients {
    std::vector<Mat> grads;

    Gradients() = default;
    explicit Gradients(const ParameterSet& params);
    void zero();
    void add(const Gradients& other);
    void scale(double s);
    double global_norm() const;
    std::vector<double> flatten() const;
};

class Tape;

struct Var {
    Tape* tape = nullptr;
    int id = -1;

    const Mat& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
};

class Tape {
public:
    explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Mat value);
    // Leaf that receives a gradient (tests differentiate w.r.t. inputs).
    Var input(Mat value);
    Var param(ParamId id);

    // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1x1.
    // Parameter gradients are added into `out` when given.
    void backward(Var loss, Gradients* out = nullptr);

    // Gradient of any recorded node after backward(); zero matrix if the
    // node did not influence the loss.
    Mat grad(Var v) const;

    const Mat& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
    size_t size() const { return nodes_.size(); }

    using Backward = std::function<void(Tape&, const Mat& grad_out)>;
    // Records a node computed by an op; `inputs` decides whether a gradient
    // is tracked at all.
    Var record(Mat value, std::initializer_list<Var> inputs, Backward backward);
    Var record(Mat value, const std::vector<Var>& inputs, Backward backward);
    void accumulate(int id, const Mat& g);

private:
    struct Node {
        Mat value;
        Mat grad;
        Backward backward;
        ParamId param = -1;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
    const ParameterSet* params_;
};

// ---- elementwise / structural ops -----------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // Hadamard
Var scale(Var a, double s);
Var scale_by(Var a, Var s);  // s is 1x1
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add_row(Var a, Var row);  // broadcast a (n x c) + row (1 x c)
Var mul_row(Var a, Var row);  // broadcast a (n x c) * row (1 x c)
Var broadcast_rows(Var row, Eigen::Index n);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);

Var relu(Var a);
Var sigmoid(Var a);
Var silu(Var a);
Var glu(Var a);  // first half * sigmoid(second half) along channels

Var softmax_rows(Var a);
Var layer_norm_rows(Var a, double eps = 1e-5);
Var group_norm(Var a, int groups, double eps = 1e-5);
Var l2_normalize_rows(Var a, double eps = 1e-12);

// Depthwise temporal convolution: out(t,c) = sum_i w(i,c) x(t + i - left, c),
// zero padded, left = (k - 1) / 2, so the length is preserved.
Var depthwise_conv1d(Var x, Var weight);
// Non-overlapping per-channel weighted window sum:
// out(j,c) = sum_s taps(s,c) x(j*S + s, c), S = taps.rows(), length ceil(L/S).
Var window_taps(Var x, Var taps);
// out(i,j) = table(0, index[i*cols + j]).
Var gather(Var table, const std::vector<int>& index, Eigen::Index rows, Eigen::Index cols);

Var sum(Var a);
Var mean(Var a);
Var mean_square(Var a);
// Mean over rows of -log softmax(logits)(i, labels[i]).
Var cross_entropy_rows(Var logits, const std::vector<int>& labels);

// ---- helpers for layers ----------------------------------------------------

// Linear layer y = x W + b, W (in x out), b (1 x out) or -1 for none.
Var linear(Tape& tape, Var x, ParamId weight, ParamId bias = -1);

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng);

}  // namespace et2m::ad
