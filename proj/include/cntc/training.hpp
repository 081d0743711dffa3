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
 * @brief The staged per-texture optimization protocol.
 *
 * Each step draws a batch of aligned random crops, re-encodes every crop,
 * samples one mip level per crop (exponential law mixed with 10% uniform),
 * reconstructs a fixed number of random texels at that level and applies one
 * Adam update on the mean gradient. Early stages relax quantization to
 * additive uniform noise; the final stage switches to the straight-through
 * estimator, and the exported grids are hard-quantized once at the end.
 *
 * Crops act as self-contained textures: each carries its own mip chain and
 * normalizes the sampled level by its own chain length, so the synthesizer
 * sees the same (normalized level, sub-lattice extent) patterns the decoder
 * will replay at full texture scale.
 */

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cntc/asset.hpp"
#include "cntc/model.hpp"
#include "cntc/rng.hpp"
#include "cntc/texture.hpp"

namespace cntc {

struct TrainStage {
	int crop_size = 256;
	double learning_rate = 1e-4;
	long step_count = 0;
	int mip_lo = 0;
	int mip_hi = 0;  // inclusive; clamped to each crop's own chain
	QuantMode quantizer_mode = QuantMode::kNoise;
};

/// Mip-level law: with probability 0.9 a truncated exponential with rate
/// log 4 (mass ~ 4^-m), with probability 0.1 uniform over 0..M.
struct MipSampler {
	int max_level = 0;
	double lambda = std::log(4.0);
	double uniform_fraction = 0.10;

	double probability(int m) const {
		if (m < 0 || m > max_level) return 0.0;
		if (max_level == 0) return 1.0;
		const double r = std::exp(-lambda);
		const double geo = std::pow(r, m) * (1.0 - r) /
		                   (1.0 - std::pow(r, static_cast<double>(max_level) + 1.0));
		return (1.0 - uniform_fraction) * geo +
		       uniform_fraction / (static_cast<double>(max_level) + 1.0);
	}

	int sample(CounterRng::Stream& rng) const {
		if (max_level == 0) return 0;
		if (rng.unit() < uniform_fraction)
			return static_cast<int>(rng.below(static_cast<std::uint64_t>(max_level) + 1));
		const double r = std::exp(-lambda);
		const double total = (1.0 - std::pow(r, static_cast<double>(max_level) + 1.0));
		double u = rng.unit() * total;
		double cum = 0.0, mass = 1.0 - r;
		for (int m = 0; m <= max_level; ++m) {
			cum += mass;
			if (u <= cum) return m;
			mass *= r;
		}
		return max_level;
	}
};

/**
 * @brief Stage list for a texture of the given extents.
 *
 * 2048x2048 gets the reference protocol: crop 256 at lr 1e-4 for 160k steps
 * (mips 0..M-1, noise), crop 512 at 5e-5 for 80k steps (mips 0..M, noise),
 * then crop 512 at 1e-5 for 20k steps under the straight-through estimator.
 * Other extents above 256 scale the step counts by texel count. At 256 and
 * below a single-crop variant is used: crop = extent at lr 1e-4 with steps
 * proportional to texel count, the final tenth under STE at lr 1e-5.
 */
inline std::vector<TrainStage> default_schedule(int h, int w) {
	TextureSet::validate_extents(h, w);
	const int extent = std::max(h, w);
	const int max_level = max_mip_level(h, w);
	const double texels = static_cast<double>(h) * static_cast<double>(w);
	std::vector<TrainStage> stages;
	if (extent > 256) {
		const double scale = texels / (2048.0 * 2048.0);
		auto steps = [scale](double base) {
			return std::max(1000l, static_cast<long>(std::llround(base * scale)));
		};
		const int big_crop = std::min(512, extent);
		stages.push_back({256, 1e-4, steps(160000), 0, max_level - 1, QuantMode::kNoise});
		stages.push_back({big_crop, 5e-5, steps(80000), 0, max_level, QuantMode::kNoise});
		stages.push_back({big_crop, 1e-5, steps(20000), 0, max_level, QuantMode::kSte});
	} else {
		// ~1.7 steps per texel lands a 64x64 set at 7000 steps, which
		// converges comfortably within a CPU desk budget.
		const long total = std::max(2000l, std::min(160000l, static_cast<long>(
		                                                         std::llround(texels * 1.709))));
		const long ste_steps = std::max(200l, total / 10);
		stages.push_back({extent, 1e-4, total - ste_steps, 0, max_level, QuantMode::kNoise});
		stages.push_back({extent, 1e-5, ste_steps, 0, max_level, QuantMode::kSte});
	}
	return stages;
}

struct TrainConfig {
	ModelConfig model;
	TrainMode mode = TrainMode::kFull;
	std::vector<TrainStage> schedule;  // empty: default_schedule(h, w)
	std::uint64_t seed = 0;
	int batch_crops = 4;
	int samples_per_crop = 4096;
	long log_every = 50;
	long checkpoint_every = 0;  // steps; 0 disables
	std::string checkpoint_path;
};

struct TrainLogRow {
	long step;
	int stage;
	double loss;
	double learning_rate;
};

struct TrainResult {
	CodecModel<float> model;
	std::vector<std::array<Tensor<float>, 2>> hard_grids;  // one pair per level
	std::vector<TrainLogRow> log;
	std::vector<QuantMode> stage_modes;  // instrumentation: mode used per stage
	double final_loss = 0.0;
	long total_steps = 0;
};

/// Hard-quantized grids for the full texture under the trained model.
std::vector<std::array<Tensor<float>, 2>> export_grids(const CodecModel<float>& model,
                                                       const TextureSet& texture);

/// Runs the staged protocol. Deterministic given the seed: two runs with the
/// same configuration produce bit-identical parameters and grids.
TrainResult train(const TextureSet& texture, const TrainConfig& config);

/// Asset assembly from a training result.
CompressedAsset make_asset(const TrainResult& result, const TextureSet& texture,
                           bool checkpoint = false);

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows);

}  // namespace cntc
