// SPDX-License-Identifier: Apache-2.0
// ----------------------------------------------------------------------------
// Copyright 2026 CNTC Contributors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at:
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.
// ----------------------------------------------------------------------------

#pragma once

#include <stdexcept>
#include <string>

namespace cntc {

/// Base class for all library errors.
struct Error : std::runtime_error {
	using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes do not line up.
struct DimensionError : Error {
	using Error::Error;
};

/// Bad user-supplied data (files, extents, manifests, codes out of range).
struct InputError : Error {
	using Error::Error;
};

/// An index (mip level, rect, texel) is outside the valid range.
struct RangeError : Error {
	using Error::Error;
};

/// Asset container could not be written or parsed.
struct SerializationError : Error {
	using Error::Error;
};

/// Asset trailer checksum does not match the payload.
struct ChecksumError : SerializationError {
	using SerializationError::SerializationError;
};

/// Metric computation cannot proceed (e.g. no quality overlap for BD-rate).
struct EvaluationError : Error {
	using Error::Error;
};

/// Optimization failed (non-finite loss); carries the offending step.
struct TrainingError : Error {
	TrainingError(const std::string& msg, long step_index)
	    : Error(msg), step(step_index) {}
	long step;
};

}  // namespace cntc
