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

// Seeded value-noise texture sets for tests and benchmarks: per channel a
// mixture of bilinearly upsampled random lattices at a few octave scales,
// rescaled into [0.05, 0.95].

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "cntc/rng.hpp"
#include "cntc/texture.hpp"

namespace cntc::testing {

/// Bilinearly upsampled random lattice with `cell`-texel spacing.
inline void add_value_noise(Tensor<float>& plane, int h, int w, int cell,
                            double amplitude, CounterRng::Stream& rng) {
	const int gh = h / cell + 1, gw = w / cell + 1;
	std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
	for (auto& v : lattice) v = rng.unit();
	for (int r = 0; r < h; ++r)
		for (int c = 0; c < w; ++c) {
			const double u = static_cast<double>(r) / cell;
			const double v = static_cast<double>(c) / cell;
			const int i0 = std::min(static_cast<int>(u), gh - 2);
			const int j0 = std::min(static_cast<int>(v), gw - 2);
			const double fu = u - i0, fv = v - j0;
			const double a = lattice[static_cast<std::size_t>(i0) * gw + j0];
			const double b = lattice[static_cast<std::size_t>(i0) * gw + j0 + 1];
			const double cc = lattice[static_cast<std::size_t>(i0 + 1) * gw + j0];
			const double d = lattice[static_cast<std::size_t>(i0 + 1) * gw + j0 + 1];
			const double blended = (1 - fu) * ((1 - fv) * a + fv * b) +
			                       fu * ((1 - fv) * cc + fv * d);
			plane[static_cast<long>(r) * w + c] += static_cast<float>(amplitude * blended);
		}
}

/// c-channel value-noise mixture at h x w. Channel octaves vary from smooth
/// to fairly detailed so encoder capacity and synthesizer depth both matter.
inline TextureSet value_noise_texture(int h, int w, int c, std::uint64_t seed) {
	CounterRng rng(seed);
	std::vector<std::string> labels;
	TextureSet t = TextureSet::internal(c, h, w);
	for (int ch = 0; ch < c; ++ch) {
		auto stream = rng.stream(1000 + static_cast<std::uint64_t>(ch));
		Tensor<float> plane({h, w});
		struct Octave {
			int cell;
			double amp;
		};
		std::vector<Octave> octaves;
		switch (ch % 3) {
			case 0: octaves = {{16, 0.55}, {8, 0.3}, {4, 0.15}}; break;
			case 1: octaves = {{32, 0.6}, {8, 0.4}}; break;
			default: octaves = {{16, 0.5}, {4, 0.5}}; break;
		}
		for (const auto& o : octaves)
			add_value_noise(plane, h, w, std::min(o.cell, h / 2), o.amp, stream);
		float lo = plane[0], hi = plane[0];
		for (long i = 0; i < plane.numel(); ++i) {
			lo = std::min(lo, plane[i]);
			hi = std::max(hi, plane[i]);
		}
		const float span = hi > lo ? hi - lo : 1.0f;
		for (long i = 0; i < plane.numel(); ++i)
			t.values()[static_cast<long>(ch) * h * w + i] =
			    0.05f + 0.9f * (plane[i] - lo) / span;
		labels.push_back("ch" + std::to_string(ch));
	}
	t.set_labels(labels);
	return t;
}

}  // namespace cntc::testing
