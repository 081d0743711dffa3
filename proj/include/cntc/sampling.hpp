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
 * @brief Grid sampling geometry.
 *
 * Texture coordinates live in [-1, +1] per axis. A request at mip level m
 * reads the single-resolution grid through a strided sub-lattice anchored at
 * index 0: stride 1 for m <= 3, otherwise 2^(m - 3). Coordinates map onto
 * the sub-lattice with the align-corners convention
 *     u = (y + 1) / 2 * (points - 1),
 * are clamped at the borders, and the four cell corners are emitted in a
 * fixed order: top-left, top-right, bottom-left, bottom-right. Strided
 * sampling therefore equals unstrided sampling on the materialized
 * every-s-th sub-lattice.
 */

#pragma once

#include <cmath>

#include "cntc/errors.hpp"

namespace cntc {

/// One decode request: coordinates in [-1, 1] and a mip level in 0..M.
struct SampleRequest {
	double x = 0.0;  // horizontal, maps to columns
	double y = 0.0;  // vertical, maps to rows
	int m = 0;
};

/// Sub-lattice stride serving mip level m from the single-resolution grid.
inline int mip_stride(int m) { return m > 3 ? 1 << (m - 3) : 1; }

/// Number of sub-lattice points along an axis of `extent` grid points.
inline int strided_points(int extent, int stride) {
	return (extent + stride - 1) / stride;
}

/// Center of texel `idx` on an axis with `extent` texels, in [-1, 1].
inline double texel_center(int idx, int extent) {
	return 2.0 * (static_cast<double>(idx) + 0.5) / static_cast<double>(extent) - 1.0;
}

/// Texel index containing coordinate t in [-1, 1] on an axis of `extent`.
inline int texel_index(double t, int extent) {
	int i = static_cast<int>(std::floor((t + 1.0) * 0.5 * static_cast<double>(extent)));
	if (i < 0) i = 0;
	if (i > extent - 1) i = extent - 1;
	return i;
}

inline double normalized_mip(int m, int max_level) {
	return max_level > 0 ? static_cast<double>(m) / static_cast<double>(max_level) : 0.0;
}

/// The four grid corners serving one request, plus the in-cell fractions.
struct LatticeSample {
	int r0, r1;  // grid rows of the top and bottom corners
	int c0, c1;  // grid columns of the left and right corners
	double fu;   // fractional row position in [0, 1]
	double fv;   // fractional column position in [0, 1]
};

namespace detail {

inline void strided_axis(double coord, int points, int stride, int& i0, int& i1,
                         double& frac) {
	if (points <= 1) {
		i0 = i1 = 0;
		frac = 0.0;
		return;
	}
	double u = (coord + 1.0) * 0.5 * static_cast<double>(points - 1);
	if (u < 0.0) u = 0.0;
	if (u > static_cast<double>(points - 1)) u = static_cast<double>(points - 1);
	int cell = static_cast<int>(std::floor(u));
	if (cell > points - 2) cell = points - 2;
	i0 = cell * stride;
	i1 = (cell + 1) * stride;
	frac = u - static_cast<double>(cell);
}

}  // namespace detail

/// Resolves a request against an hz x wz grid using the stride rule.
inline LatticeSample resolve_lattice(const SampleRequest& req, int hz, int wz) {
	if (req.x < -1.0 || req.x > 1.0 || req.y < -1.0 || req.y > 1.0)
		throw RangeError("sample coordinates must lie in [-1, 1]");
	if (req.m < 0) throw RangeError("mip level must be non-negative");
	const int s = mip_stride(req.m);
	LatticeSample out;
	detail::strided_axis(req.y, strided_points(hz, s), s, out.r0, out.r1, out.fu);
	detail::strided_axis(req.x, strided_points(wz, s), s, out.c0, out.c1, out.fv);
	return out;
}

/// Sinusoidal positional features: for k = 0..F-1 emits
/// sin(2^k pi x), cos(2^k pi x), sin(2^k pi y), cos(2^k pi y).
template <typename S>
void encode_position(double x, double y, int freq_bands, S* out) {
	constexpr double kPi = 3.14159265358979323846;
	for (int k = 0; k < freq_bands; ++k) {
		const double f = static_cast<double>(1 << k) * kPi;
		*out++ = static_cast<S>(std::sin(f * x));
		*out++ = static_cast<S>(std::cos(f * x));
		*out++ = static_cast<S>(std::sin(f * y));
		*out++ = static_cast<S>(std::cos(f * y));
	}
}

}  // namespace cntc
