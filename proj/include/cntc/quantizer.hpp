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
 * @brief Asymmetric scalar quantizer for grid features.
 *
 * At B bits the 2^B uniform levels start at -(2^B - 1) / 2^(B + 1) with step
 * 1 / 2^B, so the top representable level is (2^B - 1) / 2^(B + 1) and the
 * clamp range reaches up to 1/2 (inputs at the top edge fall into the top
 * bin). Two training surrogates are provided: additive uniform noise of one
 * half-step, and hard quantization with a straight-through gradient masked
 * to the clamp range.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cntc/autodiff.hpp"
#include "cntc/rng.hpp"
#include "cntc/tensor.hpp"

namespace cntc {

struct QuantizerSpec {
	int bits;

	explicit QuantizerSpec(int b = 4) : bits(b) {
		if (b < 1 || b > 8) throw InputError("quantizer bits must be in 1..8");
	}

	int level_count() const { return 1 << bits; }
	double step() const { return 1.0 / static_cast<double>(1 << bits); }
	double lo() const {
		return -static_cast<double>((1 << bits) - 1) /
		       static_cast<double>(1 << (bits + 1));
	}
	double hi() const { return 0.5; }

	/// Reconstruction value of code k.
	double level(int k) const { return lo() + static_cast<double>(k) * step(); }

	std::vector<double> levels() const {
		std::vector<double> out(static_cast<std::size_t>(level_count()));
		for (int k = 0; k < level_count(); ++k) out[static_cast<std::size_t>(k)] = level(k);
		return out;
	}

	template <typename S>
	int code_of(S x) const {
		double v = static_cast<double>(x);
		if (v < lo()) v = lo();
		if (v > hi()) v = hi();
		// Mid-bin ties resolve to the larger code.
		int k = static_cast<int>(std::floor((v - lo()) / step() + 0.5));
		if (k > level_count() - 1) k = level_count() - 1;
		return k;
	}
};

/// Nearest-level codes, integers in [0, 2^B).
template <typename S>
Tensor<std::uint8_t> quantize(const Tensor<S>& x, const QuantizerSpec& spec) {
	Tensor<std::uint8_t> codes(x.shape());
	for (long i = 0; i < x.numel(); ++i)
		codes[i] = static_cast<std::uint8_t>(spec.code_of(x[i]));
	return codes;
}

template <typename S>
Tensor<S> dequantize(const Tensor<std::uint8_t>& codes, const QuantizerSpec& spec) {
	Tensor<S> out(codes.shape());
	for (long i = 0; i < codes.numel(); ++i) {
		if (codes[i] >= spec.level_count())
			throw InputError("dequantize: code " + std::to_string(codes[i]) +
			                 " out of range for " + std::to_string(spec.bits) + " bits");
		out[i] = static_cast<S>(spec.level(codes[i]));
	}
	return out;
}

/// quantize then dequantize in one pass.
template <typename S>
Tensor<S> quantize_dequantize(const Tensor<S>& x, const QuantizerSpec& spec) {
	Tensor<S> out(x.shape());
	for (long i = 0; i < x.numel(); ++i)
		out[i] = static_cast<S>(spec.level(spec.code_of(x[i])));
	return out;
}

/// Uniform noise in the open interval (-step/2, +step/2), elementwise i.i.d.
template <typename S>
Tensor<S> quantization_noise(const Shape& shape, const QuantizerSpec& spec,
                             CounterRng::Stream& rng) {
	Tensor<S> out(shape);
	const double half = 0.5 * spec.step();
	for (long i = 0; i < out.numel(); ++i)
		out[i] = static_cast<S>((2.0 * rng.unit() - 1.0) * half);
	return out;
}

namespace ad {

/// Training surrogate: y = x + u with u drawn from (-step/2, step/2).
/// The gradient of y with respect to x is the identity.
template <typename S>
NodeRef<S> noise_quantize(const NodeRef<S>& x, const QuantizerSpec& spec,
                          CounterRng::Stream& rng) {
	return add_const(x, quantization_noise<S>(x->value.shape(), spec, rng));
}

/// Straight-through quantizer: forward emits exact level-set values, the
/// backward pass is the identity inside [lo, hi] and zero outside.
template <typename S>
NodeRef<S> ste_quantize(const NodeRef<S>& x, const QuantizerSpec& spec) {
	Tensor<S> out(x->value.shape());
	for (long i = 0; i < out.numel(); ++i)
		out[i] = static_cast<S>(spec.level(spec.code_of(x->value[i])));
	const S lo = static_cast<S>(spec.lo());
	const S hi = static_cast<S>(spec.hi());
	return detail::make_op<S>("ste_quantize", std::move(out), {x},
	                          [lo, hi](Node<S>& n) {
		                          const Tensor<S>& xv = n.inputs[0]->value;
		                          Tensor<S> gx(xv.shape());
		                          for (long i = 0; i < gx.numel(); ++i)
			                          gx[i] = (xv[i] >= lo && xv[i] <= hi) ? n.grad[i] : S(0);
		                          detail::accum(*n.inputs[0], gx);
	                          });
}

}  // namespace ad
}  // namespace cntc
