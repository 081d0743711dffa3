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

/**
 * @brief Counter-based pseudo-random generator.
 *
 * Every random quantity in the codec (weight init, crop origins, mip draws,
 * texel positions, quantization noise) is derived from one u64 seed plus a
 * (stream, counter) pair, so runs are reproducible bit-for-bit regardless of
 * evaluation order and no generator state has to be threaded through APIs.
 */

#pragma once

#include <cmath>
#include <cstdint>

namespace cntc {

namespace detail {

// splitmix64 finalizer; full-period avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
	z += 0x9E3779B97F4A7C15ull;
	z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
	z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
	return z ^ (z >> 31);
}

}  // namespace detail

/// Stateless keyed generator: value = f(seed, stream, counter).
class CounterRng {
public:
	explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

	std::uint64_t seed() const { return seed_; }

	std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
		return detail::mix64(detail::mix64(seed_ ^ detail::mix64(stream)) + counter);
	}

	/// Uniform on the open interval (0, 1); never returns an endpoint.
	double unit(std::uint64_t stream, std::uint64_t counter) const {
		return (static_cast<double>(bits(stream, counter) >> 11) + 0.5) * 0x1p-53;
	}

	/// A sequential view over one stream.
	class Stream {
	public:
		Stream(const CounterRng& rng, std::uint64_t stream)
		    : rng_(&rng), stream_(stream) {}

		std::uint64_t bits() { return rng_->bits(stream_, counter_++); }
		double unit() { return rng_->unit(stream_, counter_++); }

		/// Uniform integer in [0, n); n must be positive.
		std::uint64_t below(std::uint64_t n) { return bits() % n; }

		/// Standard normal via Box-Muller (unit() never returns 0).
		double normal() {
			const double u1 = unit();
			const double u2 = unit();
			return std::sqrt(-2.0 * std::log(u1)) *
			       std::cos(6.283185307179586476925286766559 * u2);
		}

	private:
		const CounterRng* rng_;
		std::uint64_t stream_;
		std::uint64_t counter_ = 0;
	};

	Stream stream(std::uint64_t id) const { return Stream(*this, id); }

	/// Packs a purpose tag with step/element indices into one stream id.
	static std::uint64_t stream_id(std::uint64_t purpose, std::uint64_t step = 0,
	                               std::uint64_t element = 0) {
		return purpose | (element << 8) | (step << 16);
	}

private:
	std::uint64_t seed_;
};

/// Stream purpose tags used across the codec.
namespace rng_stream {
inline constexpr std::uint64_t kWeightInit = 1;
inline constexpr std::uint64_t kCropOrigin = 2;
inline constexpr std::uint64_t kMipLevel = 3;
inline constexpr std::uint64_t kTexel = 4;
inline constexpr std::uint64_t kNoiseGrid0 = 5;
inline constexpr std::uint64_t kNoiseGrid1 = 6;
inline constexpr std::uint64_t kProbeBatch = 7;
}  // namespace rng_stream

}  // namespace cntc
