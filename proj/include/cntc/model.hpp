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
 * @brief The learned codec stages.
 *
 * Encoding: a convolutional global transformer maps the full-resolution
 * texture set to a bottleneck latent at 1/8 spatial extent, squashed into
 * (-0.5, 0.5). Two grid constructors (1x1 projection, squash, quantize)
 * turn the latent into the stored grid pair. Decoding: per texel, grid 0 is
 * read by corner concatenation and grid 1 by bilinear interpolation, both
 * through the mip-stride sub-lattice; the texture synthesizer (an MLP with
 * residual blocks) maps sampled features + normalized mip level +
 * positional encoding to the texel value.
 */

#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "cntc/adam.hpp"
#include "cntc/autodiff.hpp"
#include "cntc/quantizer.hpp"
#include "cntc/rng.hpp"
#include "cntc/sampling.hpp"
#include "cntc/texture.hpp"

namespace cntc {

enum class QuantMode { kHard, kNoise, kSte };

inline const char* quant_mode_name(QuantMode m) {
	switch (m) {
		case QuantMode::kHard: return "hard";
		case QuantMode::kNoise: return "noise";
		default: return "ste";
	}
}

struct ModelConfig {
	int channels = 3;
	int cg0 = 8, cg1 = 8;  // grid channel counts
	int b0 = 4, b1 = 4;    // bits per grid element
	int cz = 32;           // latent channels
	int we = 64;           // encoder hidden width
	int n_res = 2;         // residual blocks per encoder stage
	int wd = 64;           // synthesizer hidden width
	int r_blocks = 4;      // synthesizer residual blocks
	int freq_bands = 6;    // positional encoding bands per axis

	int synth_input_dim() const { return 4 * cg0 + cg1 + 1 + 4 * freq_bands; }

	/// "cntcN" profiles carry N total grid channels split evenly between the
	/// two grids; remaining knobs stay at their defaults.
	static ModelConfig profile(const std::string& name, int channels) {
		ModelConfig cfg;
		cfg.channels = channels;
		int total = 0;
		if (name == "cntc16")
			total = 16;
		else if (name == "cntc32")
			total = 32;
		else if (name == "cntc64")
			total = 64;
		else if (name == "custom")
			total = cfg.cg0 + cfg.cg1;
		else
			throw InputError("unknown profile: " + name +
			                 " (expected cntc16, cntc32, cntc64 or custom)");
		cfg.cg0 = total / 2;
		cfg.cg1 = total - cfg.cg0;
		return cfg;
	}
};

namespace detail {

template <typename S>
ad::NodeRef<S> init_weight(Shape shape, double std_dev, CounterRng::Stream& rng) {
	Tensor<S> t(std::move(shape));
	for (long i = 0; i < t.numel(); ++i)
		t[i] = static_cast<S>(rng.normal() * std_dev);
	return ad::param(std::move(t));
}

template <typename S>
ad::NodeRef<S> init_zeros(Shape shape) {
	return ad::param(Tensor<S>::zeros(std::move(shape)));
}

inline double he_std(long fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }
inline double proj_std(long fan_in) { return std::sqrt(1.0 / static_cast<double>(fan_in)); }

// Elementwise tensor helpers for graph-free inference; the math matches the
// autodiff ops exactly.
template <typename S>
Tensor<S> tensor_gelu(Tensor<S> x) {
	for (long i = 0; i < x.numel(); ++i) {
		const double v = static_cast<double>(x[i]);
		x[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * 0.70710678118654752440)));
	}
	return x;
}

template <typename S>
Tensor<S> tensor_half_tanh(Tensor<S> x) {
	for (long i = 0; i < x.numel(); ++i) x[i] = S(0.5) * std::tanh(x[i]);
	return x;
}

template <typename S>
Tensor<S> tensor_bias_chw(Tensor<S> x, const Tensor<S>& b) {
	const long plane = static_cast<long>(x.extent(1)) * x.extent(2);
	for (int ch = 0; ch < x.extent(0); ++ch)
		x.flat().segment(ch * plane, plane) += b[ch];
	return x;
}

template <typename S>
Tensor<S> tensor_avg_pool(const Tensor<S>& x, int k) {
	const int c = x.extent(0), ho = x.extent(1) / k, wo = x.extent(2) / k;
	const S inv = S(1) / static_cast<S>(k * k);
	Tensor<S> out({c, ho, wo});
	for (int ci = 0; ci < c; ++ci)
		for (int r = 0; r < ho; ++r)
			for (int col = 0; col < wo; ++col) {
				S acc = S(0);
				for (int i = 0; i < k; ++i)
					for (int j = 0; j < k; ++j) acc += x.at3(ci, r * k + i, col * k + j);
				out.at3(ci, r, col) = acc * inv;
			}
	return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Global transformer
// ---------------------------------------------------------------------------

template <typename S>
struct EncoderParams {
	struct Stage {
		ad::NodeRef<S> down_w, down_b;  // 5x5, stride 2, padding 2
		struct ResBlock {
			ad::NodeRef<S> w1, b1, w2, b2;  // two 3x3 convolutions
		};
		std::vector<ResBlock> res;
	};
	std::array<Stage, 3> stages;
	ad::NodeRef<S> proj_w, proj_b;  // 1x1 to latent channels

	static EncoderParams init(const ModelConfig& cfg, CounterRng::Stream& rng) {
		EncoderParams p;
		int prev = cfg.channels;
		for (auto& st : p.stages) {
			st.down_w = detail::init_weight<S>({cfg.we, prev, 5, 5},
			                                   detail::he_std(25l * prev), rng);
			st.down_b = detail::init_zeros<S>({cfg.we});
			st.res.resize(static_cast<std::size_t>(cfg.n_res));
			for (auto& rb : st.res) {
				rb.w1 = detail::init_weight<S>({cfg.we, cfg.we, 3, 3},
				                               detail::he_std(9l * cfg.we), rng);
				rb.b1 = detail::init_zeros<S>({cfg.we});
				rb.w2 = detail::init_weight<S>({cfg.we, cfg.we, 3, 3},
				                               detail::he_std(9l * cfg.we), rng);
				rb.b2 = detail::init_zeros<S>({cfg.we});
			}
			prev = cfg.we;
		}
		p.proj_w = detail::init_weight<S>({cfg.cz, prev, 1, 1}, detail::proj_std(prev), rng);
		p.proj_b = detail::init_zeros<S>({cfg.cz});
		return p;
	}

	std::vector<ad::NodeRef<S>> parameters() const {
		std::vector<ad::NodeRef<S>> out;
		for (const auto& st : stages) {
			out.push_back(st.down_w);
			out.push_back(st.down_b);
			for (const auto& rb : st.res) {
				out.push_back(rb.w1);
				out.push_back(rb.b1);
				out.push_back(rb.w2);
				out.push_back(rb.b2);
			}
		}
		out.push_back(proj_w);
		out.push_back(proj_b);
		return out;
	}

	/// [c, h, w] -> [cz, h/8, w/8], every output in (-0.5, 0.5).
	ad::NodeRef<S> forward(const ad::NodeRef<S>& input) const {
		const int h = input->value.extent(1);
		const int w = input->value.extent(2);
		if (h % 8 != 0 || w % 8 != 0)
			throw DimensionError("encoder input extents must be divisible by 8");
		ad::NodeRef<S> x = input;
		for (const auto& st : stages) {
			x = ad::gelu(ad::bias_chw(ad::conv2d(x, st.down_w, 2, 2), st.down_b));
			for (const auto& rb : st.res) {
				auto h1 = ad::gelu(ad::bias_chw(ad::conv2d(x, rb.w1, 1, 1), rb.b1));
				x = ad::add(x, ad::bias_chw(ad::conv2d(h1, rb.w2, 1, 1), rb.b2));
			}
		}
		return ad::half_tanh(ad::bias_chw(ad::conv2d(x, proj_w, 1, 0), proj_b));
	}

	/// Graph-free forward for export paths; intermediates are released as
	/// the stages advance, which matters for full-size textures.
	Tensor<S> infer(const Tensor<S>& input) const {
		if (input.extent(1) % 8 != 0 || input.extent(2) % 8 != 0)
			throw DimensionError("encoder input extents must be divisible by 8");
		Tensor<S> x = input;
		for (const auto& st : stages) {
			x = detail::tensor_gelu(
			    detail::tensor_bias_chw(ad::detail::conv2d_forward(x, st.down_w->value, 2, 2),
			                            st.down_b->value));
			for (const auto& rb : st.res) {
				Tensor<S> h1 = detail::tensor_gelu(detail::tensor_bias_chw(
				    ad::detail::conv2d_forward(x, rb.w1->value, 1, 1), rb.b1->value));
				Tensor<S> h2 = detail::tensor_bias_chw(
				    ad::detail::conv2d_forward(h1, rb.w2->value, 1, 1), rb.b2->value);
				x.flat() += h2.flat();
			}
		}
		return detail::tensor_half_tanh(detail::tensor_bias_chw(
		    ad::detail::conv2d_forward(x, proj_w->value, 1, 0), proj_b->value));
	}
};

/// global_transform: run the encoder over a texture set.
template <typename S>
ad::NodeRef<S> global_transform(const TextureSet& t, const EncoderParams<S>& enc) {
	return enc.forward(ad::constant(t.values().template cast<S>()));
}

// ---------------------------------------------------------------------------
// Grid constructors
// ---------------------------------------------------------------------------

/// Applies the training-mode quantizer: additive uniform noise, or the
/// straight-through estimator (hard mode shares the STE forward).
template <typename S>
ad::NodeRef<S> apply_quant_mode(const ad::NodeRef<S>& pre, const QuantizerSpec& spec,
                                QuantMode mode, CounterRng::Stream* noise_rng) {
	if (mode == QuantMode::kNoise) {
		if (!noise_rng) throw Error("noise quantization requires an rng stream");
		return ad::noise_quantize(pre, spec, *noise_rng);
	}
	return ad::ste_quantize(pre, spec);
}

template <typename S>
struct ConstructorParams {
	ad::NodeRef<S> proj_w, proj_b;  // 1x1, latent channels -> grid channels
	QuantizerSpec quant;

	static ConstructorParams init(int cz, int cg, int bits, CounterRng::Stream& rng) {
		ConstructorParams p{detail::init_weight<S>({cg, cz, 1, 1}, detail::proj_std(cz), rng),
		                    detail::init_zeros<S>({cg}), QuantizerSpec(bits)};
		return p;
	}

	std::vector<ad::NodeRef<S>> parameters() const { return {proj_w, proj_b}; }

	/// Projection, squash into (-0.5, 0.5), then the requested quantizer.
	ad::NodeRef<S> forward(const ad::NodeRef<S>& z, QuantMode mode,
	                       CounterRng::Stream* noise_rng = nullptr) const {
		auto pre = ad::half_tanh(ad::bias_chw(ad::conv2d(z, proj_w, 1, 0), proj_b));
		return apply_quant_mode(pre, quant, mode, noise_rng);
	}
};

/// Multi-resolution variant: per level l a separate projection followed by
/// 2^l average pooling, so pair l has extent hz/2^l x wz/2^l. Level
/// selection at sampling time uses the indicator m <= 3 ? 0 : m - 3.
inline int multires_level(int m) { return m <= 3 ? 0 : m - 3; }

template <typename S>
struct MultiResConstructors {
	std::vector<std::array<ConstructorParams<S>, 2>> levels;

	static MultiResConstructors init(const ModelConfig& cfg, int level_count,
	                                 CounterRng::Stream& rng) {
		MultiResConstructors p;
		p.levels.reserve(static_cast<std::size_t>(level_count));
		for (int l = 0; l < level_count; ++l)
			p.levels.push_back({ConstructorParams<S>::init(cfg.cz, cfg.cg0, cfg.b0, rng),
			                    ConstructorParams<S>::init(cfg.cz, cfg.cg1, cfg.b1, rng)});
		return p;
	}

	std::vector<ad::NodeRef<S>> parameters() const {
		std::vector<ad::NodeRef<S>> out;
		for (const auto& lv : levels)
			for (const auto& c : lv) {
				out.push_back(c.proj_w);
				out.push_back(c.proj_b);
			}
		return out;
	}

	/// Grid i of level l: quantize(pool_2^l(squash(project(z)))).
	ad::NodeRef<S> forward(const ad::NodeRef<S>& z, int level, int grid_index,
	                       QuantMode mode, CounterRng::Stream* noise_rng) const {
		const auto& c = levels.at(static_cast<std::size_t>(level))[static_cast<std::size_t>(grid_index)];
		auto pre = ad::half_tanh(ad::bias_chw(ad::conv2d(z, c.proj_w, 1, 0), c.proj_b));
		if (level > 0) pre = ad::avg_pool2d(pre, 1 << level);
		return apply_quant_mode(pre, c.quant, mode, noise_rng);
	}
};

// ---------------------------------------------------------------------------
// Grid samplers
// ---------------------------------------------------------------------------

namespace ad {

/// Corner-concatenation sampler over a batch of resolved lattice cells:
/// grid [cg, hz, wz] -> [batch, 4 cg], corners ordered top-left, top-right,
/// bottom-left, bottom-right.
template <typename S>
NodeRef<S> grid_sample_concat_batch(const NodeRef<S>& grid,
                                    const std::vector<LatticeSample>& cells) {
	const int cg = grid->value.extent(0);
	const int batch = static_cast<int>(cells.size());
	Tensor<S> out({batch, 4 * cg});
	for (int b = 0; b < batch; ++b) {
		const LatticeSample& L = cells[static_cast<std::size_t>(b)];
		S* row = out.data() + static_cast<long>(b) * 4 * cg;
		for (int ch = 0; ch < cg; ++ch) {
			row[ch] = grid->value.at3(ch, L.r0, L.c0);
			row[cg + ch] = grid->value.at3(ch, L.r0, L.c1);
			row[2 * cg + ch] = grid->value.at3(ch, L.r1, L.c0);
			row[3 * cg + ch] = grid->value.at3(ch, L.r1, L.c1);
		}
	}
	return detail::make_op<S>("grid_sample_concat", std::move(out), {grid},
	                          [cells, cg, batch](Node<S>& n) {
		                          Tensor<S> gg(n.inputs[0]->value.shape());
		                          for (int b = 0; b < batch; ++b) {
			                          const LatticeSample& L = cells[static_cast<std::size_t>(b)];
			                          const S* row = n.grad.data() + static_cast<long>(b) * 4 * cg;
			                          for (int ch = 0; ch < cg; ++ch) {
				                          gg.at3(ch, L.r0, L.c0) += row[ch];
				                          gg.at3(ch, L.r0, L.c1) += row[cg + ch];
				                          gg.at3(ch, L.r1, L.c0) += row[2 * cg + ch];
				                          gg.at3(ch, L.r1, L.c1) += row[3 * cg + ch];
			                          }
		                          }
		                          detail::accum(*n.inputs[0], gg);
	                          });
}

/// Bilinear sampler over a batch of resolved cells: [cg, hz, wz] -> [batch, cg].
template <typename S>
NodeRef<S> grid_sample_bilinear_batch(const NodeRef<S>& grid,
                                      const std::vector<LatticeSample>& cells) {
	const int cg = grid->value.extent(0);
	const int batch = static_cast<int>(cells.size());
	Tensor<S> out({batch, cg});
	for (int b = 0; b < batch; ++b) {
		const LatticeSample& L = cells[static_cast<std::size_t>(b)];
		const S fu = static_cast<S>(L.fu), fv = static_cast<S>(L.fv);
		const S w00 = (S(1) - fu) * (S(1) - fv), w01 = (S(1) - fu) * fv;
		const S w10 = fu * (S(1) - fv), w11 = fu * fv;
		S* row = out.data() + static_cast<long>(b) * cg;
		for (int ch = 0; ch < cg; ++ch)
			row[ch] = w00 * grid->value.at3(ch, L.r0, L.c0) +
			          w01 * grid->value.at3(ch, L.r0, L.c1) +
			          w10 * grid->value.at3(ch, L.r1, L.c0) +
			          w11 * grid->value.at3(ch, L.r1, L.c1);
	}
	return detail::make_op<S>(
	    "grid_sample_bilinear", std::move(out), {grid}, [cells, cg, batch](Node<S>& n) {
		    Tensor<S> gg(n.inputs[0]->value.shape());
		    for (int b = 0; b < batch; ++b) {
			    const LatticeSample& L = cells[static_cast<std::size_t>(b)];
			    const S fu = static_cast<S>(L.fu), fv = static_cast<S>(L.fv);
			    const S w00 = (S(1) - fu) * (S(1) - fv), w01 = (S(1) - fu) * fv;
			    const S w10 = fu * (S(1) - fv), w11 = fu * fv;
			    const S* row = n.grad.data() + static_cast<long>(b) * cg;
			    for (int ch = 0; ch < cg; ++ch) {
				    gg.at3(ch, L.r0, L.c0) += w00 * row[ch];
				    gg.at3(ch, L.r0, L.c1) += w01 * row[ch];
				    gg.at3(ch, L.r1, L.c0) += w10 * row[ch];
				    gg.at3(ch, L.r1, L.c1) += w11 * row[ch];
			    }
		    }
		    detail::accum(*n.inputs[0], gg);
	    });
}

}  // namespace ad

/// Single-request samplers (the batch forms are used in training loops).
template <typename S>
ad::NodeRef<S> grid_sample_concat(const ad::NodeRef<S>& grid, const SampleRequest& req) {
	return ad::grid_sample_concat_batch(
	    grid, {resolve_lattice(req, grid->value.extent(1), grid->value.extent(2))});
}

template <typename S>
ad::NodeRef<S> grid_sample_bilinear(const ad::NodeRef<S>& grid, const SampleRequest& req) {
	return ad::grid_sample_bilinear_batch(
	    grid, {resolve_lattice(req, grid->value.extent(1), grid->value.extent(2))});
}

template <typename S>
Tensor<S> positional_encode(double x, double y, int freq_bands) {
	Tensor<S> out({4 * freq_bands});
	encode_position(x, y, freq_bands, out.data());
	return out;
}

// ---------------------------------------------------------------------------
// Texture synthesizer
// ---------------------------------------------------------------------------

template <typename S>
struct SynthesizerParams {
	ad::NodeRef<S> in_w, in_b;
	struct Block {
		ad::NodeRef<S> w, b;
	};
	std::vector<Block> blocks;
	ad::NodeRef<S> out_w, out_b;

	static SynthesizerParams init(const ModelConfig& cfg, CounterRng::Stream& rng) {
		const int din = cfg.synth_input_dim();
		SynthesizerParams p;
		p.in_w = detail::init_weight<S>({cfg.wd, din}, detail::he_std(din), rng);
		p.in_b = detail::init_zeros<S>({cfg.wd});
		p.blocks.resize(static_cast<std::size_t>(cfg.r_blocks));
		for (auto& blk : p.blocks) {
			blk.w = detail::init_weight<S>({cfg.wd, cfg.wd}, detail::he_std(cfg.wd), rng);
			blk.b = detail::init_zeros<S>({cfg.wd});
		}
		p.out_w = detail::init_weight<S>({cfg.channels, cfg.wd}, detail::proj_std(cfg.wd), rng);
		p.out_b = detail::init_zeros<S>({cfg.channels});
		return p;
	}

	std::vector<ad::NodeRef<S>> parameters() const {
		std::vector<ad::NodeRef<S>> out{in_w, in_b};
		for (const auto& blk : blocks) {
			out.push_back(blk.w);
			out.push_back(blk.b);
		}
		out.push_back(out_w);
		out.push_back(out_b);
		return out;
	}

	long parameter_count() const {
		long n = 0;
		for (const auto& p : parameters()) n += p->value.numel();
		return n;
	}

	/// [batch, din] -> [batch, c]; residual blocks are x + gelu(linear(x)).
	ad::NodeRef<S> forward(const ad::NodeRef<S>& x) const {
		auto h = ad::gelu(ad::linear(x, in_w, in_b));
		for (const auto& blk : blocks)
			h = ad::add(h, ad::gelu(ad::linear(h, blk.w, blk.b)));
		return ad::linear(h, out_w, out_b);
	}
};

/// synthesize_texel: one texel from already-sampled features.
template <typename S>
Tensor<S> synthesize_texel(const Tensor<S>& y0, const Tensor<S>& y1, double m_norm,
                           const Tensor<S>& pos, const SynthesizerParams<S>& synth) {
	const long din = y0.numel() + y1.numel() + 1 + pos.numel();
	if (din != synth.in_w->value.extent(1))
		throw DimensionError("synthesize_texel: input features do not match synthesizer");
	Tensor<S> in({1, static_cast<int>(din)});
	long at = 0;
	for (long i = 0; i < y0.numel(); ++i) in[at++] = y0[i];
	for (long i = 0; i < y1.numel(); ++i) in[at++] = y1[i];
	in[at++] = static_cast<S>(m_norm);
	for (long i = 0; i < pos.numel(); ++i) in[at++] = pos[i];
	auto out = synth.forward(ad::constant(std::move(in)));
	Tensor<S> texel({out->value.extent(1)});
	texel.flat() = out->value.flat();
	return texel;
}

// ---------------------------------------------------------------------------
// Whole-model assembly
// ---------------------------------------------------------------------------

enum class TrainMode { kFull, kNoEncoder, kMultiRes };

inline const char* train_mode_name(TrainMode m) {
	switch (m) {
		case TrainMode::kFull: return "full";
		case TrainMode::kNoEncoder: return "no_encoder";
		default: return "multires";
	}
}

template <typename S>
struct CodecModel {
	ModelConfig cfg;
	TrainMode mode = TrainMode::kFull;

	EncoderParams<S> encoder;                   // full + multires
	ConstructorParams<S> con0, con1;            // full
	MultiResConstructors<S> mr;                 // multires
	ad::NodeRef<S> free_g0, free_g1;            // no_encoder: raw grids
	SynthesizerParams<S> synth;

	/// no_encoder needs the texture extents to size its free grids;
	/// multires needs the level count (max mip - 3 + 1, at least 1).
	static CodecModel init(const ModelConfig& cfg, TrainMode mode, const CounterRng& rng,
	                       int h = 0, int w = 0, int multires_levels = 1) {
		auto ws = rng.stream(rng_stream::kWeightInit);
		CodecModel m;
		m.cfg = cfg;
		m.mode = mode;
		switch (mode) {
			case TrainMode::kFull:
				m.encoder = EncoderParams<S>::init(cfg, ws);
				m.con0 = ConstructorParams<S>::init(cfg.cz, cfg.cg0, cfg.b0, ws);
				m.con1 = ConstructorParams<S>::init(cfg.cz, cfg.cg1, cfg.b1, ws);
				break;
			case TrainMode::kNoEncoder: {
				if (h % 8 != 0 || w % 8 != 0)
					throw DimensionError("free grids need extents divisible by 8");
				m.free_g0 = detail::init_weight<S>({cfg.cg0, h / 8, w / 8}, 0.3, ws);
				m.free_g1 = detail::init_weight<S>({cfg.cg1, h / 8, w / 8}, 0.3, ws);
				break;
			}
			case TrainMode::kMultiRes:
				m.encoder = EncoderParams<S>::init(cfg, ws);
				m.mr = MultiResConstructors<S>::init(cfg, multires_levels, ws);
				break;
		}
		m.synth = SynthesizerParams<S>::init(cfg, ws);
		return m;
	}

	std::vector<ad::NodeRef<S>> parameters() const {
		std::vector<ad::NodeRef<S>> out;
		auto push = [&out](const std::vector<ad::NodeRef<S>>& v) {
			out.insert(out.end(), v.begin(), v.end());
		};
		switch (mode) {
			case TrainMode::kFull:
				push(encoder.parameters());
				push(con0.parameters());
				push(con1.parameters());
				break;
			case TrainMode::kNoEncoder:
				out.push_back(free_g0);
				out.push_back(free_g1);
				break;
			case TrainMode::kMultiRes:
				push(encoder.parameters());
				push(mr.parameters());
				break;
		}
		push(synth.parameters());
		return out;
	}

	int multires_level_count() const {
		return static_cast<int>(mr.levels.size());
	}
};

/// grid_construct over a latent, matching the constructor contract.
template <typename S>
ad::NodeRef<S> grid_construct(const ad::NodeRef<S>& z, const ConstructorParams<S>& con,
                              QuantMode mode, CounterRng::Stream* noise_rng = nullptr) {
	return con.forward(z, mode, noise_rng);
}

namespace detail {

/// Builds the constant [batch, 1 + 4F] block of normalized mip levels and
/// positional encodings.
template <typename S>
Tensor<S> aux_features(const std::vector<SampleRequest>& batch, int max_level,
                       int freq_bands) {
	const int cols = 1 + 4 * freq_bands;
	Tensor<S> aux({static_cast<int>(batch.size()), cols});
	for (std::size_t b = 0; b < batch.size(); ++b) {
		S* row = aux.data() + static_cast<long>(b) * cols;
		row[0] = static_cast<S>(normalized_mip(batch[b].m, max_level));
		encode_position(batch[b].x, batch[b].y, freq_bands, row + 1);
	}
	return aux;
}

template <typename S>
Tensor<S> gather_targets(const MipChain& chain, const std::vector<SampleRequest>& batch) {
	const int c = chain.channels();
	Tensor<S> t({static_cast<int>(batch.size()), c});
	for (std::size_t b = 0; b < batch.size(); ++b) {
		const TextureSet& level = chain.level(batch[b].m);
		const int r = texel_index(batch[b].y, level.height());
		const int col = texel_index(batch[b].x, level.width());
		for (int ch = 0; ch < c; ++ch)
			t[static_cast<long>(b) * c + ch] = static_cast<S>(level.at(ch, r, col));
	}
	return t;
}

}  // namespace detail

/// Per-request noise streams for the two grids within one training step.
struct NoiseStreams {
	CounterRng::Stream g0;
	CounterRng::Stream g1;
};

/**
 * @brief End-to-end reconstruction loss over a batch of sample requests.
 *
 * Encodes level 0 of the chain, constructs the grid pair under the given
 * quantizer mode, samples every request, synthesizes the texels and returns
 * the mean squared error against the chain's texels. The prediction node is
 * also exposed for evaluation probes.
 */
template <typename S>
struct ForwardResult {
	ad::NodeRef<S> loss;
	ad::NodeRef<S> prediction;
};

template <typename S>
ForwardResult<S> forward_loss(const MipChain& chain, const CodecModel<S>& model,
                              const std::vector<SampleRequest>& batch, QuantMode mode,
                              NoiseStreams* noise = nullptr) {
	if (batch.empty()) throw InputError("forward_loss: batch must be non-empty");
	const int max_level = chain.max_level();
	for (const auto& req : batch)
		if (req.m < 0 || req.m > max_level)
			throw RangeError("forward_loss: mip level out of range");

	CounterRng::Stream* n0 = noise ? &noise->g0 : nullptr;
	CounterRng::Stream* n1 = noise ? &noise->g1 : nullptr;

	ad::NodeRef<S> y0, y1;
	if (model.mode == TrainMode::kMultiRes) {
		auto z = global_transform(chain.level(0), model.encoder);
		// Group requests by pyramid level; grids are built once per level.
		std::vector<std::vector<int>> by_level(model.mr.levels.size());
		for (std::size_t b = 0; b < batch.size(); ++b)
			by_level.at(static_cast<std::size_t>(multires_level(batch[b].m)))
			    .push_back(static_cast<int>(b));
		// Sample per level, then stitch rows back into batch order.
		std::vector<ad::NodeRef<S>> pieces0, pieces1;
		std::vector<std::vector<int>> rows_used;
		for (std::size_t l = 0; l < by_level.size(); ++l) {
			if (by_level[l].empty()) continue;
			auto g0 = model.mr.forward(z, static_cast<int>(l), 0, mode, n0);
			auto g1 = model.mr.forward(z, static_cast<int>(l), 1, mode, n1);
			std::vector<LatticeSample> cells;
			cells.reserve(by_level[l].size());
			for (int b : by_level[l]) {
				SampleRequest req = batch[static_cast<std::size_t>(b)];
				req.m = std::min(req.m, 3);  // stride 1 on the selected pair
				cells.push_back(
				    resolve_lattice(req, g0->value.extent(1), g0->value.extent(2)));
			}
			pieces0.push_back(ad::grid_sample_concat_batch(g0, cells));
			pieces1.push_back(ad::grid_sample_bilinear_batch(g1, cells));
			rows_used.push_back(by_level[l]);
		}
		y0 = ad::scatter_rows(pieces0, rows_used, static_cast<int>(batch.size()));
		y1 = ad::scatter_rows(pieces1, rows_used, static_cast<int>(batch.size()));
	} else {
		ad::NodeRef<S> g0, g1;
		if (model.mode == TrainMode::kNoEncoder) {
			g0 = apply_quant_mode(ad::half_tanh(model.free_g0),
			                      QuantizerSpec(model.cfg.b0), mode, n0);
			g1 = apply_quant_mode(ad::half_tanh(model.free_g1),
			                      QuantizerSpec(model.cfg.b1), mode, n1);
		} else {
			auto z = global_transform(chain.level(0), model.encoder);
			g0 = model.con0.forward(z, mode, n0);
			g1 = model.con1.forward(z, mode, n1);
		}
		std::vector<LatticeSample> cells;
		cells.reserve(batch.size());
		for (const auto& req : batch)
			cells.push_back(resolve_lattice(req, g0->value.extent(1), g0->value.extent(2)));
		y0 = ad::grid_sample_concat_batch(g0, cells);
		y1 = ad::grid_sample_bilinear_batch(g1, cells);
	}

	auto aux = ad::constant(
	    detail::aux_features<S>(batch, max_level, model.cfg.freq_bands));
	auto in = ad::concat_cols<S>({y0, y1, aux});
	auto pred = model.synth.forward(in);
	auto loss = ad::mse_loss(pred, detail::gather_targets<S>(chain, batch));
	return {loss, pred};
}

}  // namespace cntc
