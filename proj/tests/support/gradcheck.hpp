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

// Central finite-difference oracle for the autodiff tests. Independent of
// the backward implementation: it only re-runs forward builds at perturbed
// parameter values.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cntc/adam.hpp"
#include "cntc/autodiff.hpp"
#include "cntc/rng.hpp"

namespace cntc::testing {

using BuildFn = std::function<ad::NodeRef<double>()>;

/// Max relative error between analytic gradients and central differences
/// over the given parameters. If coords_per_param > 0, only that many
/// deterministically chosen coordinates of each parameter are probed.
inline double gradcheck_max_rel_error(const std::vector<ad::NodeRef<double>>& params,
                                      const BuildFn& build, double h = 1e-6,
                                      int coords_per_param = 0) {
	zero_grads(params);
	auto loss = build();
	ad::backward(loss);
	std::vector<Tensor<double>> analytic;
	analytic.reserve(params.size());
	for (const auto& p : params) analytic.push_back(p->grad_or_zeros());

	CounterRng rng(0xC0FFEE);
	auto pick = rng.stream(99);
	double worst = 0.0;
	for (std::size_t pi = 0; pi < params.size(); ++pi) {
		auto& p = params[pi];
		const long n = p->value.numel();
		std::vector<long> coords;
		if (coords_per_param > 0 && n > coords_per_param) {
			for (int k = 0; k < coords_per_param; ++k)
				coords.push_back(static_cast<long>(pick.below(static_cast<std::uint64_t>(n))));
		} else {
			coords.resize(static_cast<std::size_t>(n));
			for (long i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
		}
		for (long i : coords) {
			const double orig = p->value[i];
			p->value[i] = orig + h;
			const double lp = build()->value[0];
			p->value[i] = orig - h;
			const double lm = build()->value[0];
			p->value[i] = orig;
			const double fd = (lp - lm) / (2.0 * h);
			const double a = analytic[pi][i];
			const double rel = std::abs(a - fd) / std::max(std::abs(a) + std::abs(fd), 1e-6);
			worst = std::max(worst, rel);
		}
	}
	return worst;
}

inline Tensor<double> random_tensor(Shape shape, CounterRng::Stream& rng,
                                    double scale = 1.0) {
	Tensor<double> t(std::move(shape));
	for (long i = 0; i < t.numel(); ++i) t[i] = (2.0 * rng.unit() - 1.0) * scale;
	return t;
}

}  // namespace cntc::testing
