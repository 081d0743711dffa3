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

#pragma once

#include <cmath>
#include <vector>

#include "cntc/autodiff.hpp"
#include "cntc/tensor.hpp"

namespace cntc {

/// Adam with bias correction. Moment buffers mirror the parameter shapes;
/// the step counter advances by one per update.
template <typename S>
class AdamState {
public:
	AdamState(const std::vector<ad::NodeRef<S>>& params, double beta1 = 0.9,
	          double beta2 = 0.999, double epsilon = 1e-8)
	    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
		m_.reserve(params.size());
		v_.reserve(params.size());
		for (const auto& p : params) {
			m_.push_back(Tensor<S>::zeros(p->value.shape()));
			v_.push_back(Tensor<S>::zeros(p->value.shape()));
		}
	}

	long step_count() const { return t_; }

	/// One update from the gradients currently held on the parameter nodes.
	void step(const std::vector<ad::NodeRef<S>>& params, double lr) {
		if (params.size() != m_.size())
			throw DimensionError("adam_step: parameter list changed size");
		++t_;
		const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
		const S bc1 = static_cast<S>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
		const S bc2 = static_cast<S>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
		const S alpha = static_cast<S>(lr);
		const S eps = static_cast<S>(epsilon_);
		for (std::size_t i = 0; i < params.size(); ++i) {
			Tensor<S>& p = params[i]->value;
			const Tensor<S> g = params[i]->grad_or_zeros();
			require_same_shape(p, g, "adam_step");
			require_same_shape(p, m_[i], "adam_step");
			m_[i].flat() = b1 * m_[i].flat() + (S(1) - b1) * g.flat();
			v_[i].flat() = b2 * v_[i].flat() + (S(1) - b2) * g.flat().square();
			p.flat() -= alpha * (m_[i].flat() / bc1) /
			            ((v_[i].flat() / bc2).sqrt() + eps);
		}
	}

private:
	double beta1_, beta2_, epsilon_;
	long t_ = 0;
	std::vector<Tensor<S>> m_;
	std::vector<Tensor<S>> v_;
};

/// Plain SGD step, used by the encoder-free grid ablation.
template <typename S>
void sgd_step(const std::vector<ad::NodeRef<S>>& params, double lr) {
	for (const auto& p : params)
		if (p->has_grad()) p->value.flat() -= static_cast<S>(lr) * p->grad.flat();
}

template <typename S>
void zero_grads(const std::vector<ad::NodeRef<S>>& params) {
	for (const auto& p : params) p->zero_grad();
}

}  // namespace cntc
