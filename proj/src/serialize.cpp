// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#include "et2m/serialize.hpp"

#include "et2m/errors.hpp"

namespace et2m::io {

namespace {
void check(std::istream& in) {
    if (!in) throw IoError("unexpected end of binary stream");
}
}  // namespace

void write_u64(std::ostream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_matrix(std::ostream& out, const ad::Mat& m) {
    write_u64(out, static_cast<uint64_t>(m.rows()));
    write_u64(out, static_cast<uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void write_params(std::ostream& out, const ad::ParameterSet& params) {
    write_u64(out, static_cast<uint64_t>(params.size()));
    for (const auto& p : params) {
        write_string(out, p.name);
        write_matrix(out, p.value);
    }
}

uint64_t read_u64(std::istream& in) {
    uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    check(in);
    return v;
}

double read_f64(std::istream& in) {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    check(in);
    return v;
}

std::string read_string(std::istream& in) {
    const auto n = read_u64(in);
    if (n > (1ULL << 32)) throw IoError("implausible string length in binary stream");
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    check(in);
    return s;
}

ad::Mat read_matrix(std::istream& in) {
    const auto rows = read_u64(in), cols = read_u64(in);
    if (rows * cols > (1ULL << 31)) throw IoError("implausible matrix size in binary stream");
    ad::Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    check(in);
    return m;
}

void read_params_into(std::istream& in, ad::ParameterSet& params) {
    const auto n = read_u64(in);
    if (n != static_cast<uint64_t>(params.size())) throw IoError("parameter count mismatch");
    for (uint64_t i = 0; i < n; ++i) {
        const auto name = read_string(in);
        auto m = read_matrix(in);
        const auto id = params.find(name);
        if (id < 0) throw IoError("unknown parameter in file: " + name);
        auto& p = params[id];
        if (p.value.rows() != m.rows() || p.value.cols() != m.cols()) throw IoError("shape mismatch for parameter " + name);
        p.value = std::move(m);
    }
}

ad::ParameterSet read_params(std::istream& in) {
    ad::ParameterSet params;
    const auto n = read_u64(in);
    for (uint64_t i = 0; i < n; ++i) {
        auto name = read_string(in);
        params.add(std::move(name), read_matrix(in));
    }
    return params;
}

void expect_magic(std::istream& in, const std::string& magic) {
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in || got != magic) throw IoError("bad file magic, expected " + magic);
}

}  // namespace et2m::io
