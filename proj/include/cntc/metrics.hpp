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
 * @brief Quality and rate metrics.
 *
 * PSNR over a mip chain pools squared error across every level and channel
 * jointly (peak 1.0); identical inputs report +infinity, serialized as the
 * "inf" sentinel in CSV output. SSIM uses the canonical 11x11 Gaussian
 * window (sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1) per channel and
 * mip, falling back to a uniform window when a mip is smaller than 11, and
 * aggregates with per-mip area weights. BD-rate fits log10-rate against
 * quality (least-squares cubic by default, monotone piecewise-cubic behind a
 * flag) and integrates the difference over the overlapping quality range.
 */

#pragma once

#include <string>
#include <vector>

#include "cntc/asset.hpp"
#include "cntc/texture.hpp"

namespace cntc {

double psnr_single(const TextureSet& ref, const TextureSet& rec);
double psnr_mips(const MipChain& ref, const MipChain& rec);

/// Channel-window variants used for the per-group breakdown rows.
double psnr_window(const TextureSet& ref, const TextureSet& rec, int chan0, int count);
double ssim_window(const TextureSet& ref, const TextureSet& rec, int chan0, int count);

double ssim_single(const TextureSet& ref, const TextureSet& rec);
double ssim_mips(const MipChain& ref, const MipChain& rec);

/// Bits-per-pixel-per-channel on the mip-0 pixel basis.
double bppc(const AssetBits& bits, int h, int w, int c, bool include_header = false);

struct RDPoint {
	double bppc = 0.0;
	double quality = 0.0;
};

enum class BdFit { kPolynomial, kPiecewiseCubic };

/// Bjontegaard delta rate of `test` against `anchor`, in percent (negative
/// means the test curve needs fewer bits at equal quality).
double bd_rate(std::vector<RDPoint> anchor, std::vector<RDPoint> test,
               BdFit fit = BdFit::kPolynomial);

struct RDRow {
	std::string label;
	double bppc = 0.0;
	double psnr_db = 0.0;
	double ssim = 0.0;
};

/// "label,bppc,psnr_db,ssim" with rows sorted by (label, bppc); rates are
/// printed with 6 significant digits and infinities as "inf".
std::string emit_rd_csv(std::vector<RDRow> rows);

/// Parses emit_rd_csv output; malformed rows report their line number.
std::vector<RDRow> parse_rd_csv(const std::string& text);

}  // namespace cntc
