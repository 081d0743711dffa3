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

#include "cntc/asset.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "cntc/quantizer.hpp"

namespace cntc {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'C', 'A'};

class Writer {
public:
	std::vector<std::uint8_t> bytes;

	void u8(std::uint8_t v) { bytes.push_back(v); }
	void u16(std::uint16_t v) {
		u8(static_cast<std::uint8_t>(v));
		u8(static_cast<std::uint8_t>(v >> 8));
	}
	void u32(std::uint32_t v) {
		u16(static_cast<std::uint16_t>(v));
		u16(static_cast<std::uint16_t>(v >> 16));
	}
	void raw(const void* p, std::size_t n) {
		const auto* b = static_cast<const std::uint8_t*>(p);
		bytes.insert(bytes.end(), b, b + n);
	}
};

class Reader {
public:
	Reader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

	std::uint8_t u8() {
		need(1);
		return b_[at_++];
	}
	std::uint16_t u16() {
		const std::uint16_t lo = u8();
		return static_cast<std::uint16_t>(lo | (static_cast<std::uint16_t>(u8()) << 8));
	}
	std::uint32_t u32() {
		const std::uint32_t lo = u16();
		return lo | (static_cast<std::uint32_t>(u16()) << 16);
	}
	void raw(void* p, std::size_t n) {
		need(n);
		std::memcpy(p, b_.data() + at_, n);
		at_ += n;
	}
	std::size_t offset() const { return at_; }

private:
	void need(std::size_t n) {
		if (at_ + n > b_.size()) throw SerializationError("asset truncated");
	}
	const std::vector<std::uint8_t>& b_;
	std::size_t at_ = 0;
};

long packed_plane_bytes(long numel, int bits) {
	return (numel * bits + 7) / 8;
}

void pack_codes(const Tensor<std::uint8_t>& codes, int bits, Writer& w) {
	const long n = codes.numel();
	std::vector<std::uint8_t> out(static_cast<std::size_t>(packed_plane_bytes(n, bits)), 0);
	long pos = 0;
	for (long i = 0; i < n; ++i, pos += bits) {
		const std::uint32_t v = codes[i];
		for (int b = 0; b < bits; ++b) {
			const long bit = pos + b;
			out[static_cast<std::size_t>(bit >> 3)] |=
			    static_cast<std::uint8_t>(((v >> b) & 1u) << (bit & 7));
		}
	}
	w.raw(out.data(), out.size());
}

Tensor<std::uint8_t> unpack_codes(Reader& r, Shape shape, int bits) {
	Tensor<std::uint8_t> codes(std::move(shape));
	const long n = codes.numel();
	std::vector<std::uint8_t> in(static_cast<std::size_t>(packed_plane_bytes(n, bits)));
	r.raw(in.data(), in.size());
	long pos = 0;
	for (long i = 0; i < n; ++i, pos += bits) {
		std::uint32_t v = 0;
		for (int b = 0; b < bits; ++b) {
			const long bit = pos + b;
			v |= static_cast<std::uint32_t>((in[static_cast<std::size_t>(bit >> 3)] >> (bit & 7)) & 1u)
			     << b;
		}
		codes[i] = static_cast<std::uint8_t>(v);
	}
	return codes;
}

std::uint16_t float_to_half_bits(float f) {
	return Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(f));
}

float half_bits_to_float(std::uint16_t bits) {
	return static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(bits));
}

double gelu_scalar(double v) {
	return 0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440));
}

}  // namespace

Eigen::MatrixXf round_to_half(const Eigen::MatrixXf& m) {
	Eigen::MatrixXf out(m.rows(), m.cols());
	for (Eigen::Index c = 0; c < m.cols(); ++c)
		for (Eigen::Index r = 0; r < m.rows(); ++r)
			out(r, c) = half_bits_to_float(float_to_half_bits(m(r, c)));
	return out;
}

CompressedAsset CompressedAsset::build(
    const AssetMeta& meta, const std::vector<std::array<Tensor<float>, 2>>& grids,
    const std::vector<DenseLayer>& synth_layers) {
	CompressedAsset a;
	a.meta_ = meta;
	a.grids_ = grids;
	a.layers_.reserve(synth_layers.size());
	for (const auto& l : synth_layers) {
		DenseLayer half;
		half.w = round_to_half(l.w);
		half.b = round_to_half(l.b);
		a.layers_.push_back(std::move(half));
	}
	a.validate();
	// Re-snap grid values onto the level set so codes round-trip exactly.
	const QuantizerSpec q0(meta.b0), q1(meta.b1);
	for (auto& pair : a.grids_) {
		pair[0] = quantize_dequantize(pair[0], q0);
		pair[1] = quantize_dequantize(pair[1], q1);
	}
	return a;
}

void CompressedAsset::validate() const {
	const AssetMeta& m = meta_;
	if (m.h < 4 || m.w < 4 || !is_power_of_two(static_cast<int>(m.h)) ||
	    !is_power_of_two(static_cast<int>(m.w)))
		throw SerializationError("asset extents must be powers of two >= 4");
	if (m.max_level != max_mip_level(static_cast<int>(m.h), static_cast<int>(m.w)))
		throw SerializationError("asset mip count does not match extents");
	if (m.h % 8 != 0 || m.w % 8 != 0)
		throw SerializationError("asset extents must be divisible by 8");
	if (m.c < 1) throw SerializationError("asset needs at least one channel");
	if (m.b0 < 1 || m.b0 > 8 || m.b1 < 1 || m.b1 > 8)
		throw SerializationError("grid bits must be in 1..8");
	const int expected_levels =
	    m.multires() ? std::max(1, static_cast<int>(m.max_level) - 2) : 1;
	if (m.grid_levels != expected_levels)
		throw SerializationError("asset grid level count does not match flags");
	if (grids_.size() != m.grid_levels)
		throw SerializationError("asset grid payload does not match header");
	for (int l = 0; l < m.grid_levels; ++l) {
		const Shape s0{m.cg0, m.latent_h() >> l, m.latent_w() >> l};
		const Shape s1{m.cg1, m.latent_h() >> l, m.latent_w() >> l};
		if (grids_[static_cast<std::size_t>(l)][0].shape() != s0 ||
		    grids_[static_cast<std::size_t>(l)][1].shape() != s1)
			throw SerializationError("asset grid extents do not match header");
	}
	if (m.synth_dims.size() < 3)
		throw SerializationError("synthesizer needs at least input and output layers");
	if (m.synth_dims.front() != static_cast<std::uint32_t>(m.synth_input_dim()))
		throw SerializationError("synthesizer input width does not match grids");
	if (m.synth_dims.back() != m.c)
		throw SerializationError("synthesizer output width does not match channels");
	for (std::size_t i = 1; i + 1 < m.synth_dims.size(); ++i)
		if (m.synth_dims[i] != m.synth_dims[1])
			throw SerializationError("hidden synthesizer widths must match");
	if (layers_.size() != m.synth_dims.size() - 1)
		throw SerializationError("synthesizer layer count does not match dims");
	for (std::size_t i = 0; i < layers_.size(); ++i) {
		if (layers_[i].w.rows() != static_cast<long>(m.synth_dims[i + 1]) ||
		    layers_[i].w.cols() != static_cast<long>(m.synth_dims[i]) ||
		    layers_[i].b.size() != static_cast<long>(m.synth_dims[i + 1]))
			throw SerializationError("synthesizer layer extents do not match dims");
	}
	if (!m.labels.empty() && m.labels.size() != m.c)
		throw SerializationError("label count does not match channels");
}

std::vector<std::uint8_t> CompressedAsset::serialize() const {
	validate();
	const QuantizerSpec q0(meta_.b0), q1(meta_.b1);
	// Grids must be hard-quantized: every value exactly on its level set.
	for (const auto& pair : grids_) {
		for (int i = 0; i < 2; ++i) {
			const QuantizerSpec& q = i == 0 ? q0 : q1;
			for (long k = 0; k < pair[i].numel(); ++k) {
				const float v = pair[i][k];
				if (v != static_cast<float>(q.level(q.code_of(v))))
					throw SerializationError(
					    "grid values must be hard-quantized before serialization");
			}
		}
	}

	Writer w;
	w.raw(kMagic, 4);
	w.u32(meta_.version);
	w.u32(meta_.h);
	w.u32(meta_.w);
	w.u16(meta_.c);
	w.u16(meta_.max_level);
	w.u16(meta_.cg0);
	w.u16(meta_.cg1);
	w.u8(meta_.b0);
	w.u8(meta_.b1);
	w.u8(meta_.freq_bands);
	w.u8(meta_.flags);
	w.u8(meta_.grid_levels);
	w.u8(0);  // reserved
	w.u16(static_cast<std::uint16_t>(meta_.synth_dims.size()));
	for (std::uint32_t d : meta_.synth_dims) w.u32(d);
	w.u16(static_cast<std::uint16_t>(meta_.labels.size()));
	for (const auto& label : meta_.labels) {
		w.u16(static_cast<std::uint16_t>(label.size()));
		w.raw(label.data(), label.size());
	}
	for (const auto& pair : grids_) {
		pack_codes(quantize(pair[0], q0), meta_.b0, w);
		pack_codes(quantize(pair[1], q1), meta_.b1, w);
	}
	for (const auto& layer : layers_) {
		for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
			for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
				w.u16(float_to_half_bits(layer.w(r, c)));
		for (Eigen::Index r = 0; r < layer.b.size(); ++r)
			w.u16(float_to_half_bits(layer.b(r)));
	}
	const auto crc = static_cast<std::uint32_t>(
	    crc32(0, w.bytes.data(), static_cast<uInt>(w.bytes.size())));
	w.u32(crc);
	return std::move(w.bytes);
}

CompressedAsset CompressedAsset::deserialize(const std::vector<std::uint8_t>& bytes) {
	if (bytes.size() < 4 + 4 + 4) throw SerializationError("asset truncated");
	if (std::memcmp(bytes.data(), kMagic, 4) != 0)
		throw SerializationError("not an NTCA asset");
	const auto stored_at = bytes.size() - 4;
	const std::uint32_t stored =
	    static_cast<std::uint32_t>(bytes[stored_at]) |
	    (static_cast<std::uint32_t>(bytes[stored_at + 1]) << 8) |
	    (static_cast<std::uint32_t>(bytes[stored_at + 2]) << 16) |
	    (static_cast<std::uint32_t>(bytes[stored_at + 3]) << 24);
	const auto computed = static_cast<std::uint32_t>(
	    crc32(0, bytes.data(), static_cast<uInt>(stored_at)));
	if (stored != computed) throw ChecksumError("asset checksum mismatch");

	Reader r(bytes);
	char magic[4];
	r.raw(magic, 4);
	CompressedAsset a;
	AssetMeta& m = a.meta_;
	m.version = r.u32();
	if (m.version != 1)
		throw SerializationError("unsupported asset version " + std::to_string(m.version));
	m.h = r.u32();
	m.w = r.u32();
	m.c = r.u16();
	m.max_level = r.u16();
	m.cg0 = r.u16();
	m.cg1 = r.u16();
	m.b0 = r.u8();
	m.b1 = r.u8();
	m.freq_bands = r.u8();
	m.flags = r.u8();
	m.grid_levels = r.u8();
	r.u8();  // reserved
	const int dim_count = r.u16();
	m.synth_dims.resize(static_cast<std::size_t>(dim_count));
	for (auto& d : m.synth_dims) d = r.u32();
	const int label_count = r.u16();
	m.labels.resize(static_cast<std::size_t>(label_count));
	for (auto& label : m.labels) {
		label.resize(r.u16());
		r.raw(label.data(), label.size());
	}

	const QuantizerSpec q0(m.b0), q1(m.b1);
	a.grids_.resize(m.grid_levels);
	for (int l = 0; l < m.grid_levels; ++l) {
		const int hz = m.latent_h() >> l, wz = m.latent_w() >> l;
		if (hz < 1 || wz < 1)
			throw SerializationError("grid level extents degenerate");
		a.grids_[static_cast<std::size_t>(l)][0] =
		    dequantize<float>(unpack_codes(r, {m.cg0, hz, wz}, m.b0), q0);
		a.grids_[static_cast<std::size_t>(l)][1] =
		    dequantize<float>(unpack_codes(r, {m.cg1, hz, wz}, m.b1), q1);
	}

	a.layers_.resize(m.synth_dims.size() - 1);
	for (std::size_t i = 0; i < a.layers_.size(); ++i) {
		auto& layer = a.layers_[i];
		const long rows = static_cast<long>(m.synth_dims[i + 1]);
		const long cols = static_cast<long>(m.synth_dims[i]);
		layer.w.resize(rows, cols);
		for (long rr = 0; rr < rows; ++rr)
			for (long cc = 0; cc < cols; ++cc) layer.w(rr, cc) = half_bits_to_float(r.u16());
		layer.b.resize(rows);
		for (long rr = 0; rr < rows; ++rr) layer.b(rr) = half_bits_to_float(r.u16());
	}
	if (r.offset() != stored_at)
		throw SerializationError("asset has trailing bytes");
	a.validate();
	return a;
}

void CompressedAsset::save(const std::string& path) const {
	const auto bytes = serialize();
	std::ofstream os(path, std::ios::binary);
	if (!os) throw InputError("cannot open file for writing: " + path);
	os.write(reinterpret_cast<const char*>(bytes.data()),
	         static_cast<std::streamsize>(bytes.size()));
	if (!os) throw InputError("asset write failed: " + path);
}

CompressedAsset CompressedAsset::load(const std::string& path) {
	std::ifstream is(path, std::ios::binary);
	if (!is) throw InputError("cannot open file: " + path);
	std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
	                                std::istreambuf_iterator<char>());
	return deserialize(bytes);
}

long CompressedAsset::synth_parameter_count() const {
	long n = 0;
	for (const auto& l : layers_) n += l.w.size() + l.b.size();
	return n;
}

AssetBits CompressedAsset::bits_of() const {
	AssetBits bits;
	for (const auto& pair : grids_) {
		bits.grid_bits += packed_plane_bytes(pair[0].numel(), meta_.b0) * 8;
		bits.grid_bits += packed_plane_bytes(pair[1].numel(), meta_.b1) * 8;
	}
	bits.weight_bits = 16 * synth_parameter_count();
	const long total = static_cast<long>(serialize().size()) * 8;
	bits.header_bits = total - bits.grid_bits - bits.weight_bits;
	bits.grid_bits_div32_formula =
	    static_cast<long>(meta_.cg0 + meta_.cg1) * meta_.h * meta_.w / 32;
	return bits;
}

// ---------------------------------------------------------------------------
// Random-access decode
// ---------------------------------------------------------------------------

void CompressedAsset::synth_forward(const float* input, float* out_texel) const {
	const long din = layers_.front().w.cols();
	Eigen::VectorXf h = layers_.front().w * Eigen::Map<const Eigen::VectorXf>(input, din) +
	                    layers_.front().b;
	for (long i = 0; i < h.size(); ++i)
		h[i] = static_cast<float>(gelu_scalar(static_cast<double>(h[i])));
	Eigen::VectorXf tmp;
	for (std::size_t l = 1; l + 1 < layers_.size(); ++l) {
		tmp.noalias() = layers_[l].w * h;
		tmp += layers_[l].b;
		for (long i = 0; i < tmp.size(); ++i)
			h[i] += static_cast<float>(gelu_scalar(static_cast<double>(tmp[i])));
	}
	Eigen::Map<Eigen::VectorXf> out(out_texel, meta_.c);
	out.noalias() = layers_.back().w * h + layers_.back().b;
}

std::vector<float> CompressedAsset::decode_texel(const SampleRequest& req) const {
	if (req.m < 0 || req.m > meta_.max_level)
		throw RangeError("mip level " + std::to_string(req.m) + " out of range 0.." +
		                 std::to_string(meta_.max_level));
	const int level = meta_.multires() ? multires_level(req.m) : 0;
	const auto& g0 = grids_[static_cast<std::size_t>(level)][0];
	const auto& g1 = grids_[static_cast<std::size_t>(level)][1];
	SampleRequest local = req;
	if (meta_.multires()) local.m = std::min(req.m, 3);  // stride 1 on selected pair
	const LatticeSample L = resolve_lattice(local, g0.extent(1), g0.extent(2));

	const int cg0 = meta_.cg0, cg1 = meta_.cg1;
	std::vector<float> input(static_cast<std::size_t>(meta_.synth_input_dim()));
	float* at = input.data();
	for (int ch = 0; ch < cg0; ++ch) at[ch] = fetch(g0, ch, L.r0, L.c0);
	at += cg0;
	for (int ch = 0; ch < cg0; ++ch) at[ch] = fetch(g0, ch, L.r0, L.c1);
	at += cg0;
	for (int ch = 0; ch < cg0; ++ch) at[ch] = fetch(g0, ch, L.r1, L.c0);
	at += cg0;
	for (int ch = 0; ch < cg0; ++ch) at[ch] = fetch(g0, ch, L.r1, L.c1);
	at += cg0;
	const float fu = static_cast<float>(L.fu), fv = static_cast<float>(L.fv);
	const float w00 = (1.0f - fu) * (1.0f - fv), w01 = (1.0f - fu) * fv;
	const float w10 = fu * (1.0f - fv), w11 = fu * fv;
	for (int ch = 0; ch < cg1; ++ch)
		at[ch] = w00 * fetch(g1, ch, L.r0, L.c0) + w01 * fetch(g1, ch, L.r0, L.c1) +
		         w10 * fetch(g1, ch, L.r1, L.c0) + w11 * fetch(g1, ch, L.r1, L.c1);
	at += cg1;
	*at++ = static_cast<float>(normalized_mip(req.m, meta_.max_level));
	encode_position(req.x, req.y, meta_.freq_bands, at);

	std::vector<float> texel(static_cast<std::size_t>(meta_.c));
	synth_forward(input.data(), texel.data());
	return texel;
}

Tensor<float> CompressedAsset::decode_tile(int m, int row0, int col0, int th,
                                           int tw) const {
	if (m < 0 || m > meta_.max_level)
		throw RangeError("mip level " + std::to_string(m) + " out of range 0.." +
		                 std::to_string(meta_.max_level));
	const int hm = mip_height(m), wm = mip_width(m);
	if (row0 < 0 || col0 < 0 || th < 1 || tw < 1 || row0 + th > hm || col0 + tw > wm)
		throw RangeError("tile rectangle out of mip extents");
	Tensor<float> out({static_cast<int>(meta_.c), th, tw});
	decode_rows(m, row0, col0, th, tw, out.data());
	return out;
}

// Tile path: each texel runs the exact decode_texel computation, so tiles,
// full-mip decodes and single-texel decodes agree bit for bit.
void CompressedAsset::decode_rows(int m, int row0, int col0, int th, int tw,
                                  float* out) const {
	const int hm = mip_height(m), wm = mip_width(m);
	const int c = meta_.c;
	for (int r = 0; r < th; ++r) {
		const double y = texel_center(row0 + r, hm);
		for (int col = 0; col < tw; ++col) {
			const double x = texel_center(col0 + col, wm);
			const auto t = decode_texel({x, y, m});
			for (int ch = 0; ch < c; ++ch)
				out[(static_cast<long>(ch) * th + r) * tw + col] = t[static_cast<std::size_t>(ch)];
		}
	}
}

TextureSet CompressedAsset::decode_mip_image(int m) const {
	const int hm = mip_height(m), wm = mip_width(m);
	TextureSet t = TextureSet::internal(
	    meta_.c, hm, wm, meta_.labels.empty() ? std::vector<std::string>{} : meta_.labels);
	t.values() = decode_tile(m, 0, 0, hm, wm);
	return t;
}

}  // namespace cntc
