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

#include "cntc/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "cntc/errors.hpp"

namespace cntc {

namespace {

struct FileCloser {
	void operator()(std::FILE* f) const {
		if (f) std::fclose(f);
	}
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
	FilePtr f(std::fopen(path.c_str(), mode));
	if (!f) throw InputError("cannot open file: " + path);
	return f;
}

std::string lower_ext(const std::string& path) {
	const auto dot = path.find_last_of('.');
	if (dot == std::string::npos) return "";
	std::string ext = path.substr(dot + 1);
	std::transform(ext.begin(), ext.end(), ext.begin(),
	               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
	return ext;
}

void write_u32_le(std::ostream& os, std::uint32_t v) {
	unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
	                      static_cast<unsigned char>(v >> 16),
	                      static_cast<unsigned char>(v >> 24)};
	os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32_le(std::istream& is) {
	unsigned char b[4];
	is.read(reinterpret_cast<char*>(b), 4);
	return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
	       (static_cast<std::uint32_t>(b[2]) << 16) |
	       (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

ImagePlanes read_png(const std::string& path) {
	FilePtr f = open_file(path, "rb");

	png_byte sig[8];
	if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
		throw InputError("not a PNG file: " + path);

	png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
	png_infop info = png ? png_create_info_struct(png) : nullptr;
	if (!png || !info) {
		png_destroy_read_struct(&png, &info, nullptr);
		throw InputError("libpng init failed");
	}
	std::vector<png_bytep> rows;
	std::vector<png_byte> raster;
	if (setjmp(png_jmpbuf(png))) {
		png_destroy_read_struct(&png, &info, nullptr);
		throw InputError("PNG decode failed: " + path);
	}
	png_init_io(png, f.get());
	png_set_sig_bytes(png, 8);
	png_read_info(png, info);

	const int bit_depth = png_get_bit_depth(png, info);
	const int color_type = png_get_color_type(png, info);
	if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
	if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
		png_set_expand_gray_1_2_4_to_8(png);
	if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
	if (bit_depth == 16) png_set_swap(png);  // file is big-endian
	png_read_update_info(png, info);

	ImagePlanes img;
	img.height = static_cast<int>(png_get_image_height(png, info));
	img.width = static_cast<int>(png_get_image_width(png, info));
	img.channels = png_get_channels(png, info);
	const int out_depth = png_get_bit_depth(png, info);
	const std::size_t row_bytes = png_get_rowbytes(png, info);

	raster.resize(row_bytes * static_cast<std::size_t>(img.height));
	rows.resize(static_cast<std::size_t>(img.height));
	for (int r = 0; r < img.height; ++r)
		rows[static_cast<std::size_t>(r)] = raster.data() + row_bytes * static_cast<std::size_t>(r);
	png_read_image(png, rows.data());
	png_read_end(png, nullptr);
	png_destroy_read_struct(&png, &info, nullptr);

	img.values.resize(static_cast<std::size_t>(img.channels) * img.height * img.width);
	const float scale = out_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
	for (int r = 0; r < img.height; ++r) {
		const png_byte* row = raster.data() + row_bytes * static_cast<std::size_t>(r);
		for (int col = 0; col < img.width; ++col)
			for (int c = 0; c < img.channels; ++c) {
				std::uint32_t v;
				if (out_depth == 16) {
					const std::uint16_t* p = reinterpret_cast<const std::uint16_t*>(row);
					v = p[col * img.channels + c];
				} else {
					v = row[col * img.channels + c];
				}
				img.values[(static_cast<std::size_t>(c) * img.height + r) * img.width + col] =
				    static_cast<float>(v) * scale;
			}
	}
	return img;
}

void write_png(const std::string& path, const ImagePlanes& img, int bit_depth) {
	if (bit_depth != 8 && bit_depth != 16)
		throw InputError("PNG bit depth must be 8 or 16");
	if (img.channels < 1 || img.channels > 4)
		throw InputError("PNG supports 1..4 channels; use NTXR for " +
		                 std::to_string(img.channels) + " channels");

	FilePtr f = open_file(path, "wb");
	png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
	png_infop info = png ? png_create_info_struct(png) : nullptr;
	if (!png || !info) {
		png_destroy_write_struct(&png, &info);
		throw InputError("libpng init failed");
	}
	std::vector<png_byte> raster;
	std::vector<png_bytep> rows;
	if (setjmp(png_jmpbuf(png))) {
		png_destroy_write_struct(&png, &info);
		throw InputError("PNG encode failed: " + path);
	}
	png_init_io(png, f.get());

	static const int color_types[5] = {0, PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA,
	                                   PNG_COLOR_TYPE_RGB, PNG_COLOR_TYPE_RGB_ALPHA};
	png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
	             static_cast<png_uint_32>(img.height), bit_depth,
	             color_types[img.channels], PNG_INTERLACE_NONE,
	             PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
	png_write_info(png, info);
	if (bit_depth == 16) png_set_swap(png);

	const std::size_t row_bytes =
	    static_cast<std::size_t>(img.width) * img.channels * (bit_depth / 8);
	raster.resize(row_bytes * static_cast<std::size_t>(img.height));
	rows.resize(static_cast<std::size_t>(img.height));
	const float maxv = bit_depth == 16 ? 65535.0f : 255.0f;
	for (int r = 0; r < img.height; ++r) {
		png_byte* row = raster.data() + row_bytes * static_cast<std::size_t>(r);
		rows[static_cast<std::size_t>(r)] = row;
		for (int col = 0; col < img.width; ++col)
			for (int c = 0; c < img.channels; ++c) {
				float v = img.at(c, r, col);
				v = std::min(1.0f, std::max(0.0f, v));
				const std::uint32_t q =
				    static_cast<std::uint32_t>(std::lround(v * maxv));
				if (bit_depth == 16)
					reinterpret_cast<std::uint16_t*>(row)[col * img.channels + c] =
					    static_cast<std::uint16_t>(q);
				else
					row[col * img.channels + c] = static_cast<png_byte>(q);
			}
	}
	png_write_image(png, rows.data());
	png_write_end(png, nullptr);
	png_destroy_write_struct(&png, &info);
}

ImagePlanes read_ntxr(const std::string& path) {
	std::ifstream is(path, std::ios::binary);
	if (!is) throw InputError("cannot open file: " + path);
	char magic[4];
	is.read(magic, 4);
	if (!is || std::memcmp(magic, "NTXR", 4) != 0)
		throw InputError("not an NTXR file: " + path);
	ImagePlanes img;
	img.channels = static_cast<int>(read_u32_le(is));
	img.height = static_cast<int>(read_u32_le(is));
	img.width = static_cast<int>(read_u32_le(is));
	if (img.channels < 1 || img.height < 1 || img.width < 1)
		throw InputError("NTXR header has invalid extents: " + path);
	const std::size_t count =
	    static_cast<std::size_t>(img.channels) * img.height * img.width;
	img.values.resize(count);
	is.read(reinterpret_cast<char*>(img.values.data()),
	        static_cast<std::streamsize>(count * sizeof(float)));
	if (!is) throw InputError("NTXR file truncated: " + path);
	return img;
}

void write_ntxr(const std::string& path, const ImagePlanes& img) {
	std::ofstream os(path, std::ios::binary);
	if (!os) throw InputError("cannot open file for writing: " + path);
	os.write("NTXR", 4);
	write_u32_le(os, static_cast<std::uint32_t>(img.channels));
	write_u32_le(os, static_cast<std::uint32_t>(img.height));
	write_u32_le(os, static_cast<std::uint32_t>(img.width));
	os.write(reinterpret_cast<const char*>(img.values.data()),
	         static_cast<std::streamsize>(img.values.size() * sizeof(float)));
	if (!os) throw InputError("NTXR write failed: " + path);
}

ImagePlanes read_image(const std::string& path) {
	const std::string ext = lower_ext(path);
	if (ext == "png") return read_png(path);
	if (ext == "ntxr") return read_ntxr(path);
	throw InputError("unsupported image extension ." + ext + ": " + path);
}

void write_image(const std::string& path, const ImagePlanes& img, int png_bit_depth) {
	const std::string ext = lower_ext(path);
	if (ext == "png")
		write_png(path, img, png_bit_depth);
	else if (ext == "ntxr")
		write_ntxr(path, img);
	else
		throw InputError("unsupported image extension ." + ext + ": " + path);
}

std::vector<ManifestEntry> parse_manifest(const std::string& manifest_path) {
	std::ifstream is(manifest_path);
	if (!is) throw InputError("cannot open manifest: " + manifest_path);
	std::vector<ManifestEntry> entries;
	std::string line;
	while (std::getline(is, line)) {
		const auto hash = line.find('#');
		if (hash != std::string::npos) line.erase(hash);
		std::istringstream ls(line);
		ManifestEntry e;
		std::string labels;
		if (!(ls >> e.path)) continue;  // blank line
		if (ls >> labels) {
			std::istringstream lls(labels);
			std::string one;
			while (std::getline(lls, one, ','))
				if (!one.empty()) e.labels.push_back(one);
		}
		entries.push_back(std::move(e));
	}
	if (entries.empty())
		throw InputError("manifest lists no images: " + manifest_path);
	return entries;
}

TextureSet load_texture_set(const std::vector<ManifestEntry>& entries) {
	if (entries.empty()) throw InputError("no input images");
	std::vector<ImagePlanes> images;
	images.reserve(entries.size());
	int h = -1, w = -1, c = 0;
	for (const auto& e : entries) {
		images.push_back(read_image(e.path));
		const ImagePlanes& img = images.back();
		if (h < 0) {
			h = img.height;
			w = img.width;
		} else if (img.height != h || img.width != w) {
			throw InputError("image extents differ: " + e.path + " is " +
			                 std::to_string(img.width) + "x" + std::to_string(img.height) +
			                 ", expected " + std::to_string(w) + "x" + std::to_string(h));
		}
		c += img.channels;
	}
	TextureSet::validate_extents(h, w);

	std::vector<std::string> labels;
	labels.reserve(static_cast<std::size_t>(c));
	for (std::size_t i = 0; i < entries.size(); ++i) {
		const auto& e = entries[i];
		const int ic = images[i].channels;
		if (static_cast<int>(e.labels.size()) == ic) {
			labels.insert(labels.end(), e.labels.begin(), e.labels.end());
		} else if (e.labels.size() == 1 && ic > 1) {
			for (int k = 0; k < ic; ++k)
				labels.push_back(e.labels[0] + "." + std::to_string(k));
		} else if (e.labels.empty()) {
			std::string stem = e.path;
			const auto slash = stem.find_last_of("/\\");
			if (slash != std::string::npos) stem.erase(0, slash + 1);
			const auto dot = stem.find_last_of('.');
			if (dot != std::string::npos) stem.erase(dot);
			for (int k = 0; k < ic; ++k)
				labels.push_back(stem + "." + std::to_string(k));
		} else {
			throw InputError("manifest labels for " + e.path + " list " +
			                 std::to_string(e.labels.size()) + " names for " +
			                 std::to_string(ic) + " channels");
		}
	}

	TextureSet t(c, h, w, std::move(labels));
	int at = 0;
	for (const auto& img : images) {
		for (int ch = 0; ch < img.channels; ++ch)
			for (int r = 0; r < h; ++r)
				for (int col = 0; col < w; ++col)
					t.at(at + ch, r, col) =
					    std::min(1.0f, std::max(0.0f, img.at(ch, r, col)));
		at += img.channels;
	}
	return t;
}

TextureSet load_texture_set_from(const std::string& path) {
	const std::string ext = lower_ext(path);
	if (ext == "png" || ext == "ntxr")
		return load_texture_set({ManifestEntry{path, {}}});
	return load_texture_set(parse_manifest(path));
}

ImagePlanes to_planes(const TextureSet& t, int chan0, int chan_count) {
	if (chan_count < 0) chan_count = t.channels() - chan0;
	if (chan0 < 0 || chan_count < 1 || chan0 + chan_count > t.channels())
		throw RangeError("channel window out of range");
	ImagePlanes img;
	img.channels = chan_count;
	img.height = t.height();
	img.width = t.width();
	img.values.resize(static_cast<std::size_t>(chan_count) * img.height * img.width);
	for (int c = 0; c < chan_count; ++c)
		for (int r = 0; r < img.height; ++r)
			for (int col = 0; col < img.width; ++col)
				img.values[(static_cast<std::size_t>(c) * img.height + r) * img.width + col] =
				    t.at(chan0 + c, r, col);
	return img;
}

void save_texture(const std::string& path, const TextureSet& t, int chan0,
                  int chan_count, int png_bit_depth) {
	write_image(path, to_planes(t, chan0, chan_count), png_bit_depth);
}

}  // namespace cntc
