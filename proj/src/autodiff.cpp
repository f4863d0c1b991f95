// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/autodiff.hpp"

#include "et2m/errors.hpp"
#include "et2m/hash.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace et2m::ad {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ShapeMismatch(what);
}

}  // namespace

// ---- ParameterSet ----------------------------------------------------------

ParamId ParameterSet::add(std::string name, Mat value) {
    if (index_.count(name)) throw Error("duplicate parameter name: " + name);
    const auto id = static_cast<ParamId>(params_.size());
    index_.emplace(name, id);
    params_.push_back(Parameter{std::move(name), std::move(value)});
    return id;
}

ParamId ParameterSet::find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

int64_t ParameterSet::scalar_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::vector<double> ParameterSet::flatten() const {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(scalar_count()));
    for (const auto& p : params_) flat.insert(flat.end(), p.value.data(), p.value.data() + p.value.size());
    return flat;
}

void ParameterSet::unflatten(const std::vector<double>& flat) {
    if (static_cast<int64_t>(flat.size()) != scalar_count()) throw DimensionMismatch("parameter vector size mismatch");
    size_t off = 0;
    for (auto& p : params_) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), p.value.size(), p.value.data());
        off += static_cast<size_t>(p.value.size());
    }
}

std::string ParameterSet::content_hash() const {
    std::string buf;
    for (const auto& p : params_) {
        buf += p.name;
        buf.push_back('\0');
        buf.append(reinterpret_cast<const char*>(p.value.data()), static_cast<size_t>(p.value.size()) * sizeof(double));
    }
    return sha256_hex(buf);
}

// ---- Gradients -------------------------------------------------------------

Gradients::Gradients(const ParameterSet& params) {
    grads.reserve(static_cast<size_t>(params.size()));
    for (const auto& p : params) grads.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
}

void Gradients::zero() {
    for (auto& g : grads) g.setZero();
}

void Gradients::add(const Gradients& other) {
    if (other.grads.size() != grads.size()) throw DimensionMismatch("gradient buffers differ");
    for (size_t i = 0; i < grads.size(); ++i) grads[i] += other.grads[i];
}

void Gradients::scale(double s) {
    for (auto& g : grads) g *= s;
}

double Gradients::global_norm() const {
    double sq = 0.0;
    for (const auto& g : grads) sq += g.squaredNorm();
    return std::sqrt(sq);
}

std::vector<double> Gradients::flatten() const {
    std::vector<double> flat;
    for (const auto& g : grads) flat.insert(flat.end(), g.data(), g.data() + g.size());
    return flat;
}

// ---- Tape ------------------------------------------------------------------

const Mat& Var::value() const { return tape->value(id); }

Var Tape::constant(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, {}, -1, false});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Mat value) {
    nodes_.push_back(Node{std::move(value), {}, {}, -1, true});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(ParamId id) {
    if (!params_) throw Error("tape has no parameter set");
    nodes_.push_back(Node{(*params_)[id].value, {}, {}, id, true});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Mat value, std::initializer_list<Var> inputs, Backward backward) {
    bool track = false;
    for (const auto& v : inputs) track = track || nodes_[static_cast<size_t>(v.id)].requires_grad;
    nodes_.push_back(Node{std::move(value), {}, track ? std::move(backward) : Backward{}, -1, track});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Mat value, const std::vector<Var>& inputs, Backward backward) {
    bool track = false;
    for (const auto& v : inputs) track = track || nodes_[static_cast<size_t>(v.id)].requires_grad;
    nodes_.push_back(Node{std::move(value), {}, track ? std::move(backward) : Backward{}, -1, track});
    return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Mat& g) {
    auto& node = nodes_[static_cast<size_t>(id)];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
        node.grad = g;
    } else {
        node.grad += g;
    }
}

void Tape::backward(Var loss, Gradients* out) {
    require(loss.rows() == 1 && loss.cols() == 1, "backward() needs a scalar loss");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    accumulate(loss.id, Mat::Ones(1, 1));
    for (int i = loss.id; i >= 0; --i) {
        auto& node = nodes_[static_cast<size_t>(i)];
        if (node.grad.size() == 0) continue;
        if (node.backward) node.backward(*this, node.grad);
        if (node.param >= 0 && out) out->grads[static_cast<size_t>(node.param)] += node.grad;
    }
}

Mat Tape::grad(Var v) const {
    const auto& node = nodes_[static_cast<size_t>(v.id)];
    if (node.grad.size() == 0) return Mat::Zero(node.value.rows(), node.value.cols());
    return node.grad;
}

// ---- ops -------------------------------------------------------------------

Var add(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape");
    const int ia = a.id, ib = b.id;
    return a.tape->record(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var sub(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape");
    const int ia = a.id, ib = b.id;
    return a.tape->record(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
    });
}

Var mul(Var a, Var b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape");
    const int ia = a.id, ib = b.id;
    return a.tape->record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& t, const Mat& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
        if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
    });
}

Var scale(Var a, double s) {
    const int ia = a.id;
    return a.tape->record(a.value() * s, {a}, [ia, s](Tape& t, const Mat& g) { t.accumulate(ia, g * s); });
}

Var scale_by(Var a, Var s) {
    require(s.rows() == 1 && s.cols() == 1, "scale_by: scalar");
    const int ia = a.id, is = s.id;
    return a.tape->record(a.value() * s.scalar(), {a, s}, [ia, is](Tape& t, const Mat& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(is)(0, 0));
        if (t.requires_grad(is)) t.accumulate(is, Mat::Constant(1, 1, g.cwiseProduct(t.value(ia)).sum()));
    });
}

Var matmul(Var a, Var b) {
    require(a.cols() == b.rows(), "matmul: inner dimension");
    const int ia = a.id, ib = b.id;
    return a.tape->record(a.value() * b.value(), {a, b}, [ia, ib](Tape& t, const Mat& g) {
        if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
        if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
    });
}

Var transpose(Var a) {
    const int ia = a.id;
    return a.tape->record(a.value().transpose(), {a}, [ia](Tape& t, const Mat& g) { t.accumulate(ia, g.transpose()); });
}

Var add_row(Var a, Var row) {
    require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape");
    const int ia = a.id, ir = row.id;
    Mat out = a.value().rowwise() + row.value().row(0);
    return a.tape->record(std::move(out), {a, row}, [ia, ir](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        if (t.requires_grad(ir)) t.accumulate(ir, g.colwise().sum());
    });
}

Var mul_row(Var a, Var row) {
    require(row.rows() == 1 && row.cols() == a.cols(), "mul_row: shape");
    const int ia = a.id, ir = row.id;
    Mat out = a.value().array().rowwise() * row.value().row(0).array();
    return a.tape->record(std::move(out), {a, row}, [ia, ir](Tape& t, const Mat& g) {
        if (t.requires_grad(ia)) {
            Mat ga = g.array().rowwise() * t.value(ir).row(0).array();
            t.accumulate(ia, ga);
        }
        if (t.requires_grad(ir)) t.accumulate(ir, g.cwiseProduct(t.value(ia)).colwise().sum());
    });
}

Var broadcast_rows(Var row, Eigen::Index n) {
    require(row.rows() == 1, "broadcast_rows: needs a row");
    const int ir = row.id;
    Mat out = row.value().replicate(n, 1);
    return row.tape->record(std::move(out), {row}, [ir](Tape& t, const Mat& g) { t.accumulate(ir, g.colwise().sum()); });
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols: empty");
    const auto rows = parts.front().rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
        require(p.rows() == rows, "concat_cols: row mismatch");
        cols += p.cols();
    }
    Mat out(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> spans;
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        out.middleCols(off, p.cols()) = p.value();
        spans.emplace_back(p.id, off);
        off += p.cols();
    }
    return parts.front().tape->record(std::move(out), parts, [spans](Tape& t, const Mat& g) {
        for (const auto& [id, start] : spans) {
            if (t.requires_grad(id)) t.accumulate(id, g.middleCols(start, t.value(id).cols()));
        }
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_rows: empty");
    const auto cols = parts.front().cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
        require(p.cols() == cols, "concat_rows: column mismatch");
        rows += p.rows();
    }
    Mat out(rows, cols);
    std::vector<std::pair<int, Eigen::Index>> spans;
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        out.middleRows(off, p.rows()) = p.value();
        spans.emplace_back(p.id, off);
        off += p.rows();
    }
    return parts.front().tape->record(std::move(out), parts, [spans](Tape& t, const Mat& g) {
        for (const auto& [id, start] : spans) {
            if (t.requires_grad(id)) t.accumulate(id, g.middleRows(start, t.value(id).rows()));
        }
    });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
    require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: range");
    const int ia = a.id;
    const auto rows = a.rows(), cols = a.cols();
    return a.tape->record(a.value().middleCols(start, count), {a}, [ia, rows, cols, start, count](Tape& t, const Mat& g) {
        Mat full = Mat::Zero(rows, cols);
        full.middleCols(start, count) = g;
        t.accumulate(ia, full);
    });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
    require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: range");
    const int ia = a.id;
    const auto rows = a.rows(), cols = a.cols();
    return a.tape->record(a.value().middleRows(start, count), {a}, [ia, rows, cols, start, count](Tape& t, const Mat& g) {
        Mat full = Mat::Zero(rows, cols);
        full.middleRows(start, count) = g;
        t.accumulate(ia, full);
    });
}

Var relu(Var a) {
    const int ia = a.id;
    return a.tape->record(a.value().cwiseMax(0.0), {a}, [ia](Tape& t, const Mat& g) {
        t.accumulate(ia, (t.value(ia).array() > 0.0).select(g, 0.0));
    });
}

namespace {
Mat sigmoid_of(const Mat& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }
}  // namespace

Var sigmoid(Var a) {
    const int ia = a.id;
    Mat y = sigmoid_of(a.value());
    // sigmoid'(x) = y (1 - y), recomputed from the stored input.
    return a.tape->record(std::move(y), {a}, [ia](Tape& t, const Mat& g) {
        const Mat s = sigmoid_of(t.value(ia));
        t.accumulate(ia, g.cwiseProduct((s.array() * (1.0 - s.array())).matrix()));
    });
}

Var silu(Var a) {
    const int ia = a.id;
    const Mat s = sigmoid_of(a.value());
    Mat y = a.value().cwiseProduct(s);
    return a.tape->record(std::move(y), {a}, [ia](Tape& t, const Mat& g) {
        const Mat& x = t.value(ia);
        const Mat s = sigmoid_of(x);
        t.accumulate(ia, g.cwiseProduct((s.array() * (1.0 + x.array() * (1.0 - s.array()))).matrix()));
    });
}

Var glu(Var a) {
    require(a.cols() % 2 == 0, "glu: odd channel count");
    const int ia = a.id;
    const auto half = a.cols() / 2;
    const Mat s = sigmoid_of(a.value().rightCols(half));
    Mat y = a.value().leftCols(half).cwiseProduct(s);
    return a.tape->record(std::move(y), {a}, [ia, half](Tape& t, const Mat& g) {
        const Mat& x = t.value(ia);
        const Mat s = sigmoid_of(x.rightCols(half));
        Mat full(x.rows(), x.cols());
        full.leftCols(half) = g.cwiseProduct(s);
        full.rightCols(half) = (g.array() * x.leftCols(half).array() * s.array() * (1.0 - s.array())).matrix();
        t.accumulate(ia, full);
    });
}

namespace {
Mat softmax_of(const Mat& x) {
    Mat y(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double m = x.row(r).maxCoeff();
        y.row(r) = (x.row(r).array() - m).exp();
        y.row(r) /= y.row(r).sum();
    }
    return y;
}
}  // namespace

Var softmax_rows(Var a) {
    const int ia = a.id;
    return a.tape->record(softmax_of(a.value()), {a}, [ia](Tape& t, const Mat& g) {
        const Mat y = softmax_of(t.value(ia));
        const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
        Mat gx = y.cwiseProduct(g - dot.replicate(1, g.cols()));
        t.accumulate(ia, gx);
    });
}

namespace {
// Normalizes one block of values; returns (xhat, inv_std).
std::pair<Mat, double> normalize_block(const Mat& x, double eps) {
    const double mu = x.mean();
    const Mat c = x.array() - mu;
    const double var = c.squaredNorm() / static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(var + eps);
    return {c * inv, inv};
}

Mat normalize_block_grad(const Mat& xhat, double inv, const Mat& g) {
    const double n = static_cast<double>(g.size());
    const double mg = g.sum() / n;
    const double mgx = g.cwiseProduct(xhat).sum() / n;
    return inv * (g.array() - mg - xhat.array() * mgx).matrix();
}
}  // namespace

Var layer_norm_rows(Var a, double eps) {
    const int ia = a.id;
    Mat y(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) y.row(r) = normalize_block(a.value().row(r), eps).first;
    return a.tape->record(std::move(y), {a}, [ia, eps](Tape& t, const Mat& g) {
        const Mat& x = t.value(ia);
        Mat gx(x.rows(), x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            auto [xhat, inv] = normalize_block(x.row(r), eps);
            gx.row(r) = normalize_block_grad(xhat, inv, g.row(r));
        }
        t.accumulate(ia, gx);
    });
}

Var group_norm(Var a, int groups, double eps) {
    require(groups >= 1 && a.cols() % groups == 0, "group_norm: groups must divide channels");
    const int ia = a.id;
    const auto width = a.cols() / groups;
    Mat y(a.rows(), a.cols());
    for (int gi = 0; gi < groups; ++gi) y.middleCols(gi * width, width) = normalize_block(a.value().middleCols(gi * width, width), eps).first;
    return a.tape->record(std::move(y), {a}, [ia, groups, width, eps](Tape& t, const Mat& g) {
        const Mat& x = t.value(ia);
        Mat gx(x.rows(), x.cols());
        for (int gi = 0; gi < groups; ++gi) {
            auto [xhat, inv] = normalize_block(x.middleCols(gi * width, width), eps);
            gx.middleCols(gi * width, width) = normalize_block_grad(xhat, inv, g.middleCols(gi * width, width));
        }
        t.accumulate(ia, gx);
    });
}

Var l2_normalize_rows(Var a, double eps) {
    const int ia = a.id;
    const Eigen::VectorXd norms = (a.value().rowwise().squaredNorm().array() + eps).sqrt();
    Mat y = a.value().array().colwise() / norms.array();
    return a.tape->record(std::move(y), {a}, [ia, eps](Tape& t, const Mat& g) {
        const Mat& x = t.value(ia);
        const Eigen::VectorXd n = (x.rowwise().squaredNorm().array() + eps).sqrt();
        const Mat yy = x.array().colwise() / n.array();
        const Eigen::VectorXd dot = g.cwiseProduct(yy).rowwise().sum();
        Mat gx = (g - yy.cwiseProduct(dot.replicate(1, g.cols()))).array().colwise() / n.array();
        t.accumulate(ia, gx);
    });
}

Var depthwise_conv1d(Var x, Var weight) {
    require(weight.cols() == x.cols(), "depthwise_conv1d: channel mismatch");
    const int ix = x.id, iw = weight.id;
    const auto len = x.rows(), k = weight.rows();
    const auto left = (k - 1) / 2;
    const Mat& xv = x.value();
    const Mat& wv = weight.value();
    Mat y = Mat::Zero(len, x.cols());
    for (Eigen::Index i = 0; i < k; ++i) {
        const auto shift = i - left;
        // rows t with 0 <= t + shift < len
        const auto t0 = std::max<Eigen::Index>(0, -shift);
        const auto t1 = std::min<Eigen::Index>(len, len - shift);
        if (t1 <= t0) continue;
        y.middleRows(t0, t1 - t0).array() += xv.middleRows(t0 + shift, t1 - t0).array().rowwise() * wv.row(i).array();
    }
    return x.tape->record(std::move(y), {x, weight}, [ix, iw, len, k, left](Tape& t, const Mat& g) {
        const Mat& xv = t.value(ix);
        const Mat& wv = t.value(iw);
        Mat gx = Mat::Zero(xv.rows(), xv.cols());
        Mat gw = Mat::Zero(wv.rows(), wv.cols());
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto shift = i - left;
            const auto t0 = std::max<Eigen::Index>(0, -shift);
            const auto t1 = std::min<Eigen::Index>(len, len - shift);
            if (t1 <= t0) continue;
            const auto n = t1 - t0;
            gx.middleRows(t0 + shift, n).array() += g.middleRows(t0, n).array().rowwise() * wv.row(i).array();
            gw.row(i) += g.middleRows(t0, n).cwiseProduct(xv.middleRows(t0 + shift, n)).colwise().sum();
        }
        t.accumulate(ix, gx);
        if (t.requires_grad(iw)) t.accumulate(iw, gw);
    });
}

Var window_taps(Var x, Var taps) {
    require(taps.cols() == x.cols(), "window_taps: channel mismatch");
    const int ix = x.id, it = taps.id;
    const auto len = x.rows(), stride = taps.rows();
    const auto out_len = (len + stride - 1) / stride;
    Mat y = Mat::Zero(out_len, x.cols());
    for (Eigen::Index j = 0; j < out_len; ++j) {
        for (Eigen::Index s = 0; s < stride && j * stride + s < len; ++s) {
            y.row(j) += x.value().row(j * stride + s).cwiseProduct(taps.value().row(s));
        }
    }
    return x.tape->record(std::move(y), {x, taps}, [ix, it, len, stride, out_len](Tape& t, const Mat& g) {
        const Mat& xv = t.value(ix);
        const Mat& tv = t.value(it);
        Mat gx = Mat::Zero(xv.rows(), xv.cols());
        Mat gt = Mat::Zero(tv.rows(), tv.cols());
        for (Eigen::Index j = 0; j < out_len; ++j) {
            for (Eigen::Index s = 0; s < stride && j * stride + s < len; ++s) {
                gx.row(j * stride + s) += g.row(j).cwiseProduct(tv.row(s));
                gt.row(s) += g.row(j).cwiseProduct(xv.row(j * stride + s));
            }
        }
        t.accumulate(ix, gx);
        if (t.requires_grad(it)) t.accumulate(it, gt);
    });
}

Var gather(Var table, const std::vector<int>& index, Eigen::Index rows, Eigen::Index cols) {
    require(table.rows() == 1 && static_cast<Eigen::Index>(index.size()) == rows * cols, "gather: shape");
    const int itab = table.id;
    Mat y(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) y(i, j) = table.value()(0, index[static_cast<size_t>(i * cols + j)]);
    }
    return table.tape->record(std::move(y), {table}, [itab, index, cols](Tape& t, const Mat& g) {
        Mat gt = Mat::Zero(1, t.value(itab).cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) gt(0, index[static_cast<size_t>(i * cols + j)]) += g(i, j);
        }
        t.accumulate(itab, gt);
    });
}

Var sum(Var a) {
    const int ia = a.id;
    const auto rows = a.rows(), cols = a.cols();
    return a.tape->record(Mat::Constant(1, 1, a.value().sum()), {a},
                          [ia, rows, cols](Tape& t, const Mat& g) { t.accumulate(ia, Mat::Constant(rows, cols, g(0, 0))); });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var mean_square(Var a) {
    const int ia = a.id;
    const double n = static_cast<double>(a.value().size());
    return a.tape->record(Mat::Constant(1, 1, a.value().squaredNorm() / n), {a},
                          [ia, n](Tape& t, const Mat& g) { t.accumulate(ia, t.value(ia) * (2.0 * g(0, 0) / n)); });
}

Var cross_entropy_rows(Var logits, const std::vector<int>& labels) {
    require(static_cast<Eigen::Index>(labels.size()) == logits.rows(), "cross_entropy_rows: label count");
    const int il = logits.id;
    const Mat p = softmax_of(logits.value());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) loss -= std::log(std::max(p(i, labels[static_cast<size_t>(i)]), 1e-300));
    loss /= static_cast<double>(p.rows());
    return logits.tape->record(Mat::Constant(1, 1, loss), {logits}, [il, labels](Tape& t, const Mat& g) {
        Mat gp = softmax_of(t.value(il));
        for (Eigen::Index i = 0; i < gp.rows(); ++i) gp(i, labels[static_cast<size_t>(i)]) -= 1.0;
        gp *= g(0, 0) / static_cast<double>(gp.rows());
        t.accumulate(il, gp);
    });
}

Var linear(Tape& tape, Var x, ParamId weight, ParamId bias) {
    Var y = matmul(x, tape.param(weight));
    return bias >= 0 ? add_row(y, tape.param(bias)) : y;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return Mat::Ones(rows, cols);
    std::bernoulli_distribution keep(1.0 - p);
    Mat m(rows, cols);
    const double s = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? s : 0.0;
    return m;
}

}  // namespace et2m::ad
