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

#include <doctest.h>

#include <cmath>

#include "cntc/adam.hpp"
#include "cntc/autodiff.hpp"
#include "support/gradcheck.hpp"

using namespace cntc;
using cntc::testing::gradcheck_max_rel_error;
using cntc::testing::random_tensor;

TEST_CASE("conv2d all-ones 3x3 kernel sums full support at the center") {
	auto x = ad::constant(Tensor<double>::full({1, 4, 4}, 1.0));
	auto k = ad::param(Tensor<double>::full({1, 1, 3, 3}, 1.0));
	auto y = ad::conv2d(x, k, 1, 1);
	CHECK(y->value.shape() == Shape{1, 4, 4});
	CHECK(y->value.at3(0, 1, 1) == doctest::Approx(9.0));
	CHECK(y->value.at3(0, 2, 2) == doctest::Approx(9.0));
	CHECK(y->value.at3(0, 0, 0) == doctest::Approx(4.0));  // corner support
}

TEST_CASE("conv2d k5 s2 p2 halves a 5x5 input to 3x3") {
	CounterRng rng(1);
	auto s = rng.stream(0);
	auto x = ad::constant(random_tensor({1, 5, 5}, s));
	auto k = ad::param(random_tensor({1, 1, 5, 5}, s));
	auto y = ad::conv2d(x, k, 2, 2);
	CHECK(y->value.shape() == Shape{1, 3, 3});
}

TEST_CASE("conv2d rejects mismatched input channels") {
	auto x = ad::constant(Tensor<double>::zeros({2, 4, 4}));
	auto k = ad::param(Tensor<double>::zeros({1, 3, 3, 3}));
	CHECK_THROWS_AS(ad::conv2d(x, k, 1, 1), DimensionError);
}

TEST_CASE("conv2d gradients match finite differences") {
	CounterRng rng(7);
	auto s = rng.stream(0);
	auto x = ad::param(random_tensor({2, 8, 8}, s));
	auto k = ad::param(random_tensor({4, 2, 5, 5}, s, 0.5));
	const double err = gradcheck_max_rel_error(
	    {x, k}, [&] { return ad::sum_all(ad::conv2d(x, k, 2, 2)); });
	CHECK(err < 1e-5);
}

TEST_CASE("linear identity weight and zero bias is the identity") {
	auto x = ad::constant(Tensor<double>::from_values({2, 3}, {1, 2, 3, 4, 5, 6}));
	Tensor<double> eye({3, 3});
	for (int i = 0; i < 3; ++i) eye.at2(i, i) = 1.0;
	auto y = ad::linear(x, ad::param(eye), ad::param(Tensor<double>::zeros({3})));
	for (long i = 0; i < 6; ++i) CHECK(y->value[i] == doctest::Approx(x->value[i]));
}

TEST_CASE("linear with zero weight emits the bias on every row") {
	auto x = ad::constant(Tensor<double>::from_values({2, 2}, {5, 6, 7, 8}));
	auto b = ad::param(Tensor<double>::from_values({3}, {0.5, -1.0, 2.0}));
	auto y = ad::linear(x, ad::param(Tensor<double>::zeros({3, 2})), b);
	for (int r = 0; r < 2; ++r)
		for (int c = 0; c < 3; ++c) CHECK(y->value.at2(r, c) == doctest::Approx(b->value[c]));
}

TEST_CASE("linear rejects inner-dimension mismatch") {
	auto x = ad::constant(Tensor<double>::zeros({3, 7}));
	auto w = ad::param(Tensor<double>::zeros({5, 6}));
	auto b = ad::param(Tensor<double>::zeros({5}));
	CHECK_THROWS_AS(ad::linear(x, w, b), DimensionError);
}

TEST_CASE("linear gradients match finite differences") {
	CounterRng rng(11);
	auto s = rng.stream(0);
	auto x = ad::param(random_tensor({3, 7}, s));
	auto w = ad::param(random_tensor({5, 7}, s));
	auto b = ad::param(random_tensor({5}, s));
	const double err = gradcheck_max_rel_error(
	    {x, w, b}, [&] { return ad::sum_all(ad::linear(x, w, b)); });
	CHECK(err < 1e-5);
}

TEST_CASE("half-tanh fixes zero and approaches +-0.5") {
	auto x = ad::constant(Tensor<double>::from_values({3}, {0.0, 20.0, -20.0}));
	auto y = ad::activation(x, ad::Activation::kHalfTanh);
	CHECK(y->value[0] == 0.0);
	CHECK(y->value[1] > 0.4999);
	CHECK(y->value[2] < -0.4999);
	CHECK(std::abs(y->value[1]) <= 0.5);  // saturates to 0.5 exactly in floats
}

TEST_CASE("gelu gradient matches finite differences") {
	CounterRng rng(13);
	auto s = rng.stream(0);
	auto x = ad::param(random_tensor({10}, s, 2.0));
	const double err =
	    gradcheck_max_rel_error({x}, [&] { return ad::sum_all(ad::gelu(x)); });
	CHECK(err < 1e-5);
}

TEST_CASE("bilinear_sample hits lattice values at integer coordinates") {
	CounterRng rng(17);
	auto s = rng.stream(0);
	auto plane = ad::param(random_tensor({3, 4, 5}, s));
	for (int u = 0; u < 4; ++u)
		for (int v = 0; v < 5; ++v) {
			auto y = ad::bilinear_sample(plane, static_cast<double>(u), static_cast<double>(v));
			for (int c = 0; c < 3; ++c)
				CHECK(y->value[c] == doctest::Approx(plane->value.at3(c, u, v)));
		}
}

TEST_CASE("bilinear_sample at a cell center averages the four corners") {
	auto plane = ad::param(Tensor<double>::from_values({1, 2, 2}, {1.0, 2.0, 3.0, 4.0}));
	auto y = ad::bilinear_sample(plane, 0.5, 0.5);
	CHECK(y->value[0] == doctest::Approx(2.5));
}

TEST_CASE("bilinear_sample gradient w.r.t. the plane matches finite differences") {
	CounterRng rng(19);
	auto s = rng.stream(0);
	auto plane = ad::param(random_tensor({2, 6, 7}, s));
	const double u = 2.37, v = 4.81;
	const double err = gradcheck_max_rel_error(
	    {plane}, [&] { return ad::sum_all(ad::bilinear_sample(plane, u, v)); });
	CHECK(err < 1e-5);
}

TEST_CASE("avg_pool2d and scatter/concat gradients match finite differences") {
	CounterRng rng(23);
	auto s = rng.stream(0);
	auto x = ad::param(random_tensor({2, 4, 4}, s));
	const double err = gradcheck_max_rel_error(
	    {x}, [&] { return ad::sum_all(ad::avg_pool2d(x, 2)); });
	CHECK(err < 1e-5);

	auto a = ad::param(random_tensor({3, 2}, s));
	auto b = ad::param(random_tensor({3, 4}, s));
	const double err2 = gradcheck_max_rel_error({a, b}, [&] {
		auto cat = ad::concat_cols<double>({a, b});
		return ad::mse_loss(cat, Tensor<double>::full({3, 6}, 0.25));
	});
	CHECK(err2 < 1e-5);
}

TEST_CASE("diamond graphs route gradients through shared subexpressions once") {
	auto x = ad::param(Tensor<double>::from_values({2}, {1.5, -0.75}));
	// y = sum(x + x): dy/dx = 2 everywhere.
	auto y = ad::sum_all(ad::add(x, x));
	ad::backward(y);
	CHECK(x->grad[0] == doctest::Approx(2.0));
	CHECK(x->grad[1] == doctest::Approx(2.0));
}

TEST_CASE("parameters outside the loss path keep exactly zero gradients") {
	auto used = ad::param(Tensor<double>::from_values({2}, {1.0, 2.0}));
	auto unused = ad::param(Tensor<double>::from_values({3}, {1.0, 2.0, 3.0}));
	auto loss = ad::sum_all(used);
	ad::backward(loss);
	const Tensor<double> g = unused->grad_or_zeros();
	for (long i = 0; i < g.numel(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("forward evaluation is pure and bit-identical across rebuilds") {
	CounterRng rng(29);
	auto s = rng.stream(0);
	auto x = ad::param(random_tensor({2, 8, 8}, s));
	auto k = ad::param(random_tensor({3, 2, 3, 3}, s));
	auto build = [&] { return ad::gelu(ad::conv2d(x, k, 1, 1)); };
	auto y1 = build();
	auto y2 = build();
	for (long i = 0; i < y1->value.numel(); ++i) CHECK(y1->value[i] == y2->value[i]);
}

TEST_CASE("adam leaves parameters untouched under zero gradients") {
	auto p = ad::param(Tensor<double>::from_values({3}, {1.0, -2.0, 3.0}));
	const Tensor<double> before = p->value;
	AdamState<double> adam({p});
	for (int i = 0; i < 5; ++i) {
		zero_grads<double>({p});
		adam.step({p}, 1e-2);
	}
	for (long i = 0; i < 3; ++i) CHECK(p->value[i] == before[i]);
}

TEST_CASE("adam first step moves by ~lr under a constant gradient") {
	auto p = ad::param(Tensor<double>::from_values({2}, {0.0, 0.0}));
	p->grad = Tensor<double>::from_values({2}, {3.0, -0.25});
	AdamState<double> adam({p});
	const double lr = 1e-3;
	adam.step({p}, lr);
	// Bias-corrected first step: lr * g / (|g| + eps) = lr * sign(g), up to eps.
	CHECK(std::abs(std::abs(p->value[0]) - lr) < 1e-9);
	CHECK(std::abs(std::abs(p->value[1]) - lr) < 1e-9);
	CHECK(p->value[0] < 0.0);
	CHECK(p->value[1] > 0.0);
	CHECK(adam.step_count() == 1);
}

TEST_CASE("adam trajectories are bit-identical across reruns") {
	auto run = [] {
		CounterRng rng(31);
		auto s = rng.stream(0);
		auto p = ad::param(random_tensor({4}, s));
		AdamState<double> adam({p});
		for (int step = 0; step < 25; ++step) {
			zero_grads<double>({p});
			auto loss = ad::mse_loss(ad::add(p, p), Tensor<double>::full({4}, 0.7));
			ad::backward(loss);
			adam.step({p}, 3e-3);
		}
		return p->value;
	};
	const Tensor<double> a = run();
	const Tensor<double> b = run();
	for (long i = 0; i < a.numel(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("adam rejects mismatched gradient shapes") {
	auto p = ad::param(Tensor<double>::zeros({3}));
	p->grad = Tensor<double>::zeros({4});
	AdamState<double> adam({p});
	CHECK_THROWS_AS(adam.step({p}, 1e-3), DimensionError);
}
