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
 * @brief Texture set input/output.
 *
 * Two formats are understood:
 *  - PNG, 8- or 16-bit, gray / gray+alpha / RGB / RGBA. Integer samples map
 *    to [0, 1] by dividing by 2^bits - 1.
 *  - "NTXR" raw float planes: a 16-byte header (magic "NTXR", u32 c, u32 h,
 *    u32 w, little-endian) followed by c*h*w float32 values, channel-major
 *    then row-major.
 *
 * A texture set is assembled from a manifest: one "path label[,label...]"
 * line per image, channels concatenated in the order given.
 */

#pragma once

#include <string>
#include <vector>

#include "cntc/texture.hpp"

namespace cntc {

/// One image plus the channel labels it contributes.
struct ManifestEntry {
	std::string path;
	std::vector<std::string> labels;  // empty: auto-named from the file stem
};

/// Decoded planar image; values already scaled to [0, 1].
struct ImagePlanes {
	int channels = 0;
	int height = 0;
	int width = 0;
	std::vector<float> values;  // channel-major, row-major

	float at(int c, int r, int col) const {
		return values[(static_cast<std::size_t>(c) * height + r) * width + col];
	}
};

ImagePlanes read_png(const std::string& path);
void write_png(const std::string& path, const ImagePlanes& img, int bit_depth = 8);

ImagePlanes read_ntxr(const std::string& path);
void write_ntxr(const std::string& path, const ImagePlanes& img);

/// Dispatches on the file extension (.png vs .ntxr).
ImagePlanes read_image(const std::string& path);
void write_image(const std::string& path, const ImagePlanes& img, int png_bit_depth = 8);

/// Parses "path label[,label...]" lines; '#' starts a comment.
std::vector<ManifestEntry> parse_manifest(const std::string& manifest_path);

/// Concatenates all images of a manifest into one texture set. All sources
/// must share extents; extents must be valid texture extents.
TextureSet load_texture_set(const std::vector<ManifestEntry>& entries);

/// Loads either a manifest (.txt/.manifest) or a single image file.
TextureSet load_texture_set_from(const std::string& path);

/// Writes a texture set (or a channel subset starting at chan0) as an image.
void save_texture(const std::string& path, const TextureSet& t, int chan0 = 0,
                  int chan_count = -1, int png_bit_depth = 8);

ImagePlanes to_planes(const TextureSet& t, int chan0 = 0, int chan_count = -1);

}  // namespace cntc
