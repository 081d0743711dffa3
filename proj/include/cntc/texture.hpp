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
 * @brief Texture sets and their mip pyramids.
 *
 * A texture set stacks all material channels (diffuse, normal, height, ...)
 * at one power-of-two extent, values in [0, 1]. The mip chain runs from the
 * full-resolution level 0 down to 4x4 on the larger axis: level count is
 * log2(max(h, w)) - 1. Downscaling is a 2x2 box filter, which commutes with
 * aligned cropping and preserves per-channel means exactly.
 */

#pragma once

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "cntc/errors.hpp"
#include "cntc/tensor.hpp"

namespace cntc {

inline bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

inline int log2_int(int v) {
	int l = 0;
	while ((1 << l) < v) ++l;
	return l;
}

/// Highest mip index for a texture of the given extents.
inline int max_mip_level(int h, int w) { return log2_int(std::max(h, w)) - 2; }

class TextureSet {
public:
	TextureSet() = default;

	TextureSet(int c, int h, int w, std::vector<std::string> labels = {})
	    : c_(c), h_(h), w_(w), values_({c, h, w}), labels_(std::move(labels)) {
		validate_extents(h, w);
		if (!labels_.empty() && static_cast<int>(labels_.size()) != c)
			throw InputError("channel label count does not match channel count");
	}

	static void validate_extents(int h, int w) {
		if (!is_power_of_two(h) || !is_power_of_two(w) || h < 4 || w < 4)
			throw InputError("texture extents must be powers of two and >= 4 (got " +
			                 std::to_string(h) + "x" + std::to_string(w) + ")");
		// Every level of the mip chain must keep integral extents >= 1.
		if (h * 4 < w || w * 4 < h)
			throw InputError("texture aspect ratio must not exceed 4:1");
	}

	/// Mip levels of rectangular sources can fall below 4 texels on one
	/// axis; this factory skips the source-extent validation for them.
	static TextureSet internal(int c, int h, int w, std::vector<std::string> labels = {}) {
		TextureSet t;
		t.c_ = c;
		t.h_ = h;
		t.w_ = w;
		t.values_ = Tensor<float>({c, h, w});
		t.labels_ = std::move(labels);
		return t;
	}

	int channels() const { return c_; }
	int height() const { return h_; }
	int width() const { return w_; }
	int mip_levels() const { return max_mip_level(h_, w_); }
	const std::vector<std::string>& labels() const { return labels_; }
	void set_labels(std::vector<std::string> labels) {
		if (!labels.empty() && static_cast<int>(labels.size()) != c_)
			throw InputError("channel label count does not match channel count");
		labels_ = std::move(labels);
	}

	float& at(int ch, int r, int col) { return values_.at3(ch, r, col); }
	float at(int ch, int r, int col) const { return values_.at3(ch, r, col); }
	Tensor<float>& values() { return values_; }
	const Tensor<float>& values() const { return values_; }

	bool values_in_unit_range() const {
		for (long i = 0; i < values_.numel(); ++i)
			if (!(values_[i] >= 0.0f && values_[i] <= 1.0f)) return false;
		return true;
	}

	/// 2x2 box downscale (2x1 / 1x2 on axes already at extent 1).
	TextureSet downscaled() const {
		const int kh = h_ > 1 ? 2 : 1;
		const int kw = w_ > 1 ? 2 : 1;
		TextureSet out;
		out.c_ = c_;
		out.h_ = h_ / kh;
		out.w_ = w_ / kw;
		out.values_ = Tensor<float>({c_, out.h_, out.w_});
		out.labels_ = labels_;
		const float inv = 1.0f / static_cast<float>(kh * kw);
		for (int ch = 0; ch < c_; ++ch)
			for (int r = 0; r < out.h_; ++r)
				for (int col = 0; col < out.w_; ++col) {
					float acc = 0.0f;
					for (int i = 0; i < kh; ++i)
						for (int j = 0; j < kw; ++j)
							acc += at(ch, r * kh + i, col * kw + j);
					out.at(ch, r, col) = acc * inv;
				}
		return out;
	}

	/// Window copy; the window must lie inside the texture.
	TextureSet window(int row0, int col0, int wh, int ww) const {
		if (row0 < 0 || col0 < 0 || row0 + wh > h_ || col0 + ww > w_)
			throw InputError("texture window out of bounds");
		TextureSet out;
		out.c_ = c_;
		out.h_ = wh;
		out.w_ = ww;
		out.values_ = Tensor<float>({c_, wh, ww});
		out.labels_ = labels_;
		for (int ch = 0; ch < c_; ++ch)
			for (int r = 0; r < wh; ++r)
				for (int col = 0; col < ww; ++col)
					out.at(ch, r, col) = at(ch, row0 + r, col0 + col);
		return out;
	}

private:
	int c_ = 0, h_ = 0, w_ = 0;
	Tensor<float> values_;
	std::vector<std::string> labels_;

	friend class MipChain;
};

/// Levels m = 0..M with extents h/2^m x w/2^m; level 0 is the source.
class MipChain {
public:
	MipChain() = default;

	explicit MipChain(std::vector<TextureSet> levels) : levels_(std::move(levels)) {
		if (levels_.empty()) throw InputError("mip chain needs at least one level");
	}

	static MipChain generate(const TextureSet& t) {
		std::vector<TextureSet> levels;
		levels.reserve(static_cast<std::size_t>(t.mip_levels()) + 1);
		levels.push_back(t);
		for (int m = 1; m <= t.mip_levels(); ++m)
			levels.push_back(levels.back().downscaled());
		return MipChain(std::move(levels));
	}

	int max_level() const { return static_cast<int>(levels_.size()) - 1; }
	int channels() const { return levels_[0].channels(); }

	const TextureSet& level(int m) const {
		if (m < 0 || m > max_level())
			throw RangeError("mip level " + std::to_string(m) + " out of range 0.." +
			                 std::to_string(max_level()));
		return levels_[static_cast<std::size_t>(m)];
	}

	const std::vector<TextureSet>& levels() const { return levels_; }

private:
	std::vector<TextureSet> levels_;
};

/// A training crop: power-of-two size >= 64 with its origin on the 8-texel
/// grid lattice, so the crop's latent lattice is a sub-lattice of the full
/// texture's.
struct CropSpec {
	int row0 = 0;
	int col0 = 0;
	int size = 64;

	void validate(int h, int w) const {
		if (!is_power_of_two(size) || size < 64)
			throw InputError("crop size must be a power of two >= 64");
		if (row0 % 8 != 0 || col0 % 8 != 0)
			throw InputError("crop origin must be a multiple of 8");
		if (row0 < 0 || col0 < 0 || row0 + size > h || col0 + size > w)
			throw InputError("crop does not fit inside the texture");
	}
};

/// Crops level 0 and rebuilds the window's own mip chain (levels down to
/// 4x4, i.e. log2(size) - 1 of them). For origins aligned to the crop's
/// coarsest level this equals windowing every level of the full chain.
inline MipChain random_crop(const MipChain& chain, const CropSpec& spec) {
	const TextureSet& base = chain.level(0);
	spec.validate(base.height(), base.width());
	return MipChain::generate(base.window(spec.row0, spec.col0, spec.size, spec.size));
}

}  // namespace cntc
