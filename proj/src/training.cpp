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

#include "cntc/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cntc/adam.hpp"
#include "cntc/quantizer.hpp"

namespace cntc {

namespace {

std::vector<SampleRequest> draw_texel_batch(const MipChain& chain, int m, int count,
                                            CounterRng::Stream& rng) {
	const TextureSet& level = chain.level(m);
	const int hm = level.height(), wm = level.width();
	std::vector<SampleRequest> reqs;
	reqs.reserve(static_cast<std::size_t>(count));
	for (int i = 0; i < count; ++i) {
		const long flat =
		    static_cast<long>(rng.below(static_cast<std::uint64_t>(hm) * wm));
		const int r = static_cast<int>(flat / wm);
		const int col = static_cast<int>(flat % wm);
		reqs.push_back({texel_center(col, wm), texel_center(r, hm), m});
	}
	return reqs;
}

/// Fixed held-out probe: finite loss here is asserted at every log point.
struct Probe {
	MipChain chain;
	std::vector<SampleRequest> requests;
};

Probe make_probe(const MipChain& full_chain, const TrainConfig& cfg, int crop_size) {
	Probe probe;
	const TextureSet& base = full_chain.level(0);
	if (cfg.mode == TrainMode::kNoEncoder ||
	    crop_size >= std::max(base.height(), base.width())) {
		probe.chain = full_chain;
	} else {
		probe.chain = MipChain::generate(base.window(0, 0, crop_size, crop_size));
	}
	CounterRng rng(cfg.seed);
	auto stream = rng.stream(rng_stream::kProbeBatch);
	MipSampler sampler{probe.chain.max_level()};
	for (int i = 0; i < 256; ++i) {
		const int m = sampler.sample(stream);
		auto one = draw_texel_batch(probe.chain, m, 1, stream);
		probe.requests.push_back(one[0]);
	}
	return probe;
}

}  // namespace

std::vector<std::array<Tensor<float>, 2>> export_grids(const CodecModel<float>& model,
                                                       const TextureSet& texture) {
	std::vector<std::array<Tensor<float>, 2>> out;
	switch (model.mode) {
		case TrainMode::kNoEncoder: {
			out.push_back(
			    {quantize_dequantize(detail::tensor_half_tanh(model.free_g0->value),
			                         QuantizerSpec(model.cfg.b0)),
			     quantize_dequantize(detail::tensor_half_tanh(model.free_g1->value),
			                         QuantizerSpec(model.cfg.b1))});
			break;
		}
		case TrainMode::kFull: {
			const Tensor<float> z = model.encoder.infer(texture.values());
			auto hard = [&z](const ConstructorParams<float>& con) {
				Tensor<float> pre = detail::tensor_half_tanh(detail::tensor_bias_chw(
				    ad::detail::conv2d_forward(z, con.proj_w->value, 1, 0),
				    con.proj_b->value));
				return quantize_dequantize(pre, con.quant);
			};
			out.push_back({hard(model.con0), hard(model.con1)});
			break;
		}
		case TrainMode::kMultiRes: {
			const Tensor<float> z = model.encoder.infer(texture.values());
			for (std::size_t l = 0; l < model.mr.levels.size(); ++l) {
				std::array<Tensor<float>, 2> pair;
				for (int i = 0; i < 2; ++i) {
					const auto& con = model.mr.levels[l][static_cast<std::size_t>(i)];
					Tensor<float> pre = detail::tensor_half_tanh(detail::tensor_bias_chw(
					    ad::detail::conv2d_forward(z, con.proj_w->value, 1, 0),
					    con.proj_b->value));
					if (l > 0) pre = detail::tensor_avg_pool(pre, 1 << l);
					pair[static_cast<std::size_t>(i)] = quantize_dequantize(pre, con.quant);
				}
				out.push_back(std::move(pair));
			}
			break;
		}
	}
	return out;
}

CompressedAsset make_asset(const TrainResult& result, const TextureSet& texture,
                           bool checkpoint) {
	const ModelConfig& mc = result.model.cfg;
	AssetMeta meta;
	meta.h = static_cast<std::uint32_t>(texture.height());
	meta.w = static_cast<std::uint32_t>(texture.width());
	meta.c = static_cast<std::uint16_t>(texture.channels());
	meta.max_level = static_cast<std::uint16_t>(texture.mip_levels());
	meta.cg0 = static_cast<std::uint16_t>(mc.cg0);
	meta.cg1 = static_cast<std::uint16_t>(mc.cg1);
	meta.b0 = static_cast<std::uint8_t>(mc.b0);
	meta.b1 = static_cast<std::uint8_t>(mc.b1);
	meta.freq_bands = static_cast<std::uint8_t>(mc.freq_bands);
	meta.flags = 0;
	if (result.model.mode == TrainMode::kMultiRes) meta.flags |= kAssetFlagMultiRes;
	if (checkpoint) meta.flags |= kAssetFlagCheckpoint;
	meta.grid_levels = static_cast<std::uint8_t>(result.hard_grids.size());
	meta.synth_dims.push_back(static_cast<std::uint32_t>(mc.synth_input_dim()));
	for (int i = 0; i < mc.r_blocks + 1; ++i)
		meta.synth_dims.push_back(static_cast<std::uint32_t>(mc.wd));
	meta.synth_dims.push_back(static_cast<std::uint32_t>(mc.channels));
	meta.labels = texture.labels();
	return CompressedAsset::build(meta, result.hard_grids,
	                              synth_dense_layers(result.model.synth));
}

TrainResult train(const TextureSet& texture, const TrainConfig& config) {
	if (!texture.values_in_unit_range())
		throw InputError("texture values must lie in [0, 1]");
	TrainConfig cfg = config;
	cfg.model.channels = texture.channels();
	if (cfg.batch_crops < 1 || cfg.samples_per_crop < 1)
		throw InputError("batch size and samples per crop must be positive");
	if (cfg.schedule.empty())
		cfg.schedule = default_schedule(texture.height(), texture.width());

	const int extent = std::max(texture.height(), texture.width());
	const int full_max_level = texture.mip_levels();
	const CounterRng rng(cfg.seed);

	CodecModel<float> model = CodecModel<float>::init(
	    cfg.model, cfg.mode, rng, texture.height(), texture.width(),
	    std::max(1, full_max_level - 2));
	const auto params = model.parameters();
	AdamState<float> adam(params);

	const MipChain full_chain = MipChain::generate(texture);
	const Probe probe = make_probe(full_chain, cfg, cfg.schedule.front().crop_size);

	TrainResult result;
	result.stage_modes.reserve(cfg.schedule.size());

	long g = 0;  // global step
	double last_mean_loss = 0.0;
	for (std::size_t stage_idx = 0; stage_idx < cfg.schedule.size(); ++stage_idx) {
		const TrainStage& stage = cfg.schedule[stage_idx];
		if (stage.step_count < 1) throw InputError("stage step count must be positive");
		result.stage_modes.push_back(stage.quantizer_mode);
		const int crop = std::min(stage.crop_size, extent);
		const bool whole = cfg.mode == TrainMode::kNoEncoder || crop >= extent;

		for (long step = 0; step < stage.step_count; ++step, ++g) {
			zero_grads(params);
			double loss_sum = 0.0;
			for (int e = 0; e < cfg.batch_crops; ++e) {
				MipChain crop_chain;
				const MipChain* chain = &full_chain;
				if (!whole) {
					auto cs = rng.stream(CounterRng::stream_id(rng_stream::kCropOrigin,
					                                           static_cast<std::uint64_t>(g),
					                                           static_cast<std::uint64_t>(e)));
					const int max_r = (texture.height() - crop) / 8;
					const int max_c = (texture.width() - crop) / 8;
					const CropSpec spec{
					    8 * static_cast<int>(cs.below(static_cast<std::uint64_t>(max_r) + 1)),
					    8 * static_cast<int>(cs.below(static_cast<std::uint64_t>(max_c) + 1)),
					    crop};
					crop_chain = random_crop(full_chain, spec);
					chain = &crop_chain;
				}

				const int hi = std::min(stage.mip_hi, chain->max_level());
				const int lo = std::min(stage.mip_lo, hi);
				auto ms = rng.stream(CounterRng::stream_id(rng_stream::kMipLevel,
				                                           static_cast<std::uint64_t>(g),
				                                           static_cast<std::uint64_t>(e)));
				const int m = std::max(lo, MipSampler{hi}.sample(ms));

				auto ts = rng.stream(CounterRng::stream_id(rng_stream::kTexel,
				                                           static_cast<std::uint64_t>(g),
				                                           static_cast<std::uint64_t>(e)));
				const auto batch = draw_texel_batch(*chain, m, cfg.samples_per_crop, ts);

				NoiseStreams noise{
				    rng.stream(CounterRng::stream_id(rng_stream::kNoiseGrid0,
				                                     static_cast<std::uint64_t>(g),
				                                     static_cast<std::uint64_t>(e))),
				    rng.stream(CounterRng::stream_id(rng_stream::kNoiseGrid1,
				                                     static_cast<std::uint64_t>(g),
				                                     static_cast<std::uint64_t>(e)))};
				auto fwd = forward_loss(*chain, model, batch, stage.quantizer_mode, &noise);
				const double loss = fwd.loss->value[0];
				if (!std::isfinite(loss))
					throw TrainingError("training diverged (non-finite loss)", g);
				loss_sum += loss;
				ad::backward(fwd.loss);
			}
			const float inv_batch = 1.0f / static_cast<float>(cfg.batch_crops);
			for (const auto& p : params)
				if (p->has_grad()) p->grad.flat() *= inv_batch;
			adam.step(params, stage.learning_rate);
			last_mean_loss = loss_sum / cfg.batch_crops;

			const bool last_step = step + 1 == stage.step_count;
			if (g % cfg.log_every == 0 || last_step) {
				auto held = forward_loss(probe.chain, model, probe.requests, QuantMode::kSte);
				if (!std::isfinite(held.loss->value[0]))
					throw TrainingError("held-out loss became non-finite", g);
				result.log.push_back({g, static_cast<int>(stage_idx), last_mean_loss,
				                      stage.learning_rate});
			}
			if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
			    (g + 1) % cfg.checkpoint_every == 0) {
				TrainResult snapshot;
				snapshot.model = model;
				snapshot.hard_grids = export_grids(model, texture);
				make_asset(snapshot, texture, true).save(cfg.checkpoint_path);
			}
		}
	}

	result.model = std::move(model);
	result.hard_grids = export_grids(result.model, texture);
	result.final_loss = last_mean_loss;
	result.total_steps = g;
	return result;
}

void write_train_log(const std::string& path, const std::vector<TrainLogRow>& rows) {
	std::ofstream os(path);
	if (!os) throw InputError("cannot open log file for writing: " + path);
	os << "step,stage,loss,lr\n";
	char buf[128];
	for (const auto& r : rows) {
		std::snprintf(buf, sizeof buf, "%ld,%d,%.8g,%.8g\n", r.step, r.stage, r.loss,
		              r.learning_rate);
		os << buf;
	}
}

}  // namespace cntc
