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
#include <set>

#include "cntc/quantizer.hpp"

using namespace cntc;

TEST_CASE("4-bit level set: 16 levels from -15/32 with step 1/16") {
	QuantizerSpec q(4);
	CHECK(q.level_count() == 16);
	CHECK(q.lo() == doctest::Approx(-15.0 / 32.0));
	CHECK(q.lo() == -0.46875);
	CHECK(q.hi() == 0.5);
	const auto levels = q.levels();
	CHECK(levels.front() == doctest::Approx(-15.0 / 32.0));
	CHECK(levels.back() == doctest::Approx(15.0 / 32.0));
	for (std::size_t k = 1; k < levels.size(); ++k)
		CHECK(levels[k] - levels[k - 1] == doctest::Approx(q.step()));
}

TEST_CASE("levels are fixed points of quantize") {
	QuantizerSpec q(4);
	for (int k = 0; k < q.level_count(); ++k)
		CHECK(q.code_of(q.level(k)) == k);
}

TEST_CASE("top-of-range input clamps into the top code") {
	QuantizerSpec q(4);
	CHECK(q.code_of(0.5) == 15);
	CHECK(q.code_of(0.9) == 15);
	CHECK(q.code_of(-0.5) == 0);
}

TEST_CASE("dequantize code 0 yields the range lower bound") {
	QuantizerSpec q(4);
	Tensor<std::uint8_t> codes({1});
	codes[0] = 0;
	CHECK(dequantize<double>(codes, q)[0] == doctest::Approx(-15.0 / 32.0));
}

TEST_CASE("round trip over all codes is the identity") {
	QuantizerSpec q(4);
	Tensor<std::uint8_t> codes({16});
	for (int k = 0; k < 16; ++k) codes[k] = static_cast<std::uint8_t>(k);
	const auto values = dequantize<double>(codes, q);
	const auto back = quantize(values, q);
	for (int k = 0; k < 16; ++k) CHECK(back[k] == k);
}

TEST_CASE("dequantize rejects out-of-range codes") {
	QuantizerSpec q(4);
	Tensor<std::uint8_t> codes({1});
	codes[0] = 16;
	CHECK_THROWS_AS(dequantize<double>(codes, q), InputError);
}

TEST_CASE("reconstruction error stays within a half step for clamped inputs") {
	QuantizerSpec q(4);
	CounterRng rng(5);
	auto s = rng.stream(0);
	for (int i = 0; i < 100000; ++i) {
		const double x = 2.0 * s.unit() - 1.0;
		const double rec = q.level(q.code_of(x));
		const double clamped = std::min(q.hi(), std::max(q.lo(), x));
		CHECK(std::abs(rec - clamped) <= q.step() / 2.0 + 1e-15);
	}
}

TEST_CASE("quantize is monotonic and reaches exactly 2^B distinct values") {
	QuantizerSpec q(4);
	std::set<int> seen;
	int prev = 0;
	for (int i = 0; i <= 2000; ++i) {
		const double x = -1.0 + 2.0 * i / 2000.0;
		const int k = q.code_of(x);
		if (i > 0) CHECK(k >= prev);
		prev = k;
		seen.insert(k);
	}
	CHECK(seen.size() == 16);
}

TEST_CASE("noise surrogate stays strictly within a half step and centers on zero") {
	QuantizerSpec q(4);
	CounterRng rng(9);
	auto s = rng.stream(0);
	const long n = 1000000;
	double sum = 0.0;
	double worst = 0.0;
	for (long i = 0; i < n; ++i) {
		const double u = (2.0 * s.unit() - 1.0) * q.step() / 2.0;
		sum += u;
		worst = std::max(worst, std::abs(u));
	}
	CHECK(worst < q.step() / 2.0);  // 1/32 at 4 bits
	// Mean of n draws ~ N(0, (step/sqrt(12))^2 / n); allow 3 sigma.
	const double sigma = q.step() / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
	CHECK(std::abs(sum / static_cast<double>(n)) < 3.0 * sigma);
}

TEST_CASE("noise surrogate is an identity for gradients") {
	QuantizerSpec q(4);
	CounterRng rng(41);
	auto s = rng.stream(0);
	auto x = ad::param(Tensor<double>::from_values({3}, {0.1, -0.2, 0.4}));
	auto y = ad::noise_quantize(x, q, s);
	for (long i = 0; i < 3; ++i) CHECK(std::abs(y->value[i] - x->value[i]) < q.step() / 2.0);
	ad::backward(ad::sum_all(y));
	for (long i = 0; i < 3; ++i) CHECK(x->grad[i] == 1.0);
}

TEST_CASE("straight-through estimator: level-set forward, clamp-masked gradient") {
	QuantizerSpec q(4);
	auto x = ad::param(Tensor<double>::from_values({3}, {0.2, 0.9, -0.46875}));
	auto y = ad::ste_quantize(x, q);
	// Forward values lie in the level set; levels are fixed points.
	for (long i = 0; i < 3; ++i) {
		const int k = q.code_of(y->value[i]);
		CHECK(y->value[i] == doctest::Approx(q.level(k)));
	}
	CHECK(y->value[2] == doctest::Approx(-15.0 / 32.0));
	ad::backward(ad::sum_all(y));
	CHECK(x->grad[0] == 1.0);  // inside [lo, hi]
	CHECK(x->grad[1] == 0.0);  // above hi
	CHECK(x->grad[2] == 1.0);  // exactly at lo
}

TEST_CASE("straight-through forward is idempotent") {
	QuantizerSpec q(4);
	CounterRng rng(43);
	auto s = rng.stream(0);
	Tensor<double> v({1000});
	for (long i = 0; i < v.numel(); ++i) v[i] = 2.0 * s.unit() - 1.0;
	const auto once = quantize_dequantize(v, q);
	const auto twice = quantize_dequantize(once, q);
	for (long i = 0; i < v.numel(); ++i) CHECK(once[i] == twice[i]);
}
