// Copyright 2026 The Event-T2M Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace et2m {

// Every library failure derives from Error so callers can catch one type;
// the subclasses exist so tests and the CLI can tell failure kinds apart.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define ET2M_ERROR(Name)                     \
    struct Name : Error {                    \
        using Error::Error;                  \
    }

ET2M_ERROR(MalformedLine);
ET2M_ERROR(DimensionMismatch);
ET2M_ERROR(ShapeMismatch);
ET2M_ERROR(TimestepOutOfRange);
ET2M_ERROR(InvalidStepCount);
ET2M_ERROR(IoError);
ET2M_ERROR(LlmTransport);
ET2M_ERROR(UnparseableResponse);
ET2M_ERROR(MissingDecomposition);
ET2M_ERROR(EncoderFailure);
ET2M_ERROR(NonFiniteLoss);
ET2M_ERROR(EmptyCheckpointSet);
ET2M_ERROR(InsufficientPool);
ET2M_ERROR(CountMismatch);
ET2M_ERROR(TooFewGenerations);
ET2M_ERROR(ConfigError);
ET2M_ERROR(StageFailure);

#undef ET2M_ERROR

}  // namespace et2m
