// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "et2m/autodiff.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace et2m::io {

// Little-endian host assumed; files are not meant to cross architectures.
void write_u64(std::ostream& out, uint64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, const std::string& s);
void write_matrix(std::ostream& out, const ad::Mat& m);
void write_params(std::ostream& out, const ad::ParameterSet& params);

uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);
ad::Mat read_matrix(std::istream& in);
// Overwrites values of an existing set; names and shapes must match.
void read_params_into(std::istream& in, ad::ParameterSet& params);
ad::ParameterSet read_params(std::istream& in);

void expect_magic(std::istream& in, const std::string& magic);

}  // namespace et2m::io
