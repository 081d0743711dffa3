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
 * @brief Dense tensor with a small fixed feature set.
 *
 * Shapes are runtime vectors of extents (all >= 1), storage is a flat
 * row-major Eigen array (last index fastest). Only what the codec needs:
 * no broadcasting, no views, no dynamic rank tricks.
 */

#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cntc/errors.hpp"

namespace cntc {

using Shape = std::vector<int>;

inline long shape_numel(const Shape& s) {
	long n = 1;
	for (int e : s) {
		if (e < 1) throw DimensionError("tensor extent must be >= 1");
		n *= e;
	}
	return n;
}

inline std::string shape_str(const Shape& s) {
	std::ostringstream os;
	os << "[";
	for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
	os << "]";
	return os.str();
}

template <typename S>
class Tensor {
public:
	using Scalar = S;
	using Flat = Eigen::Array<S, Eigen::Dynamic, 1>;
	using MatrixMap =
	    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
	using ConstMatrixMap = Eigen::Map<
	    const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

	Tensor() = default;

	explicit Tensor(Shape shape) : shape_(std::move(shape)) {
		data_ = Flat::Zero(shape_numel(shape_));
	}

	Tensor(Shape shape, Flat data) : shape_(std::move(shape)), data_(std::move(data)) {
		if (data_.size() != shape_numel(shape_))
			throw DimensionError("tensor data does not match shape " + shape_str(shape_));
	}

	static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

	static Tensor full(Shape shape, S value) {
		Tensor t(std::move(shape));
		t.data_.setConstant(value);
		return t;
	}

	static Tensor from_values(Shape shape, std::initializer_list<S> values) {
		Tensor t(std::move(shape));
		if (static_cast<long>(values.size()) != t.numel())
			throw DimensionError("value count does not match shape");
		long i = 0;
		for (S v : values) t.data_[i++] = v;
		return t;
	}

	const Shape& shape() const { return shape_; }
	int rank() const { return static_cast<int>(shape_.size()); }
	int extent(int axis) const { return shape_[static_cast<std::size_t>(axis)]; }
	long numel() const { return data_.size(); }

	Flat& flat() { return data_; }
	const Flat& flat() const { return data_; }
	S* data() { return data_.data(); }
	const S* data() const { return data_.data(); }

	S& operator[](long i) { return data_[i]; }
	S operator[](long i) const { return data_[i]; }

	// 2-d and 3-d accessors for the shapes the codec actually uses.
	S& at2(int r, int c) { return data_[static_cast<long>(r) * shape_[1] + c]; }
	S at2(int r, int c) const { return data_[static_cast<long>(r) * shape_[1] + c]; }
	S& at3(int ch, int r, int c) {
		return data_[(static_cast<long>(ch) * shape_[1] + r) * shape_[2] + c];
	}
	S at3(int ch, int r, int c) const {
		return data_[(static_cast<long>(ch) * shape_[1] + r) * shape_[2] + c];
	}

	/// Maps the flat storage as a rows x cols row-major matrix.
	MatrixMap as_matrix(long rows, long cols) {
		if (rows * cols != numel()) throw DimensionError("matrix view does not cover tensor");
		return MatrixMap(data_.data(), rows, cols);
	}
	ConstMatrixMap as_matrix(long rows, long cols) const {
		if (rows * cols != numel()) throw DimensionError("matrix view does not cover tensor");
		return ConstMatrixMap(data_.data(), rows, cols);
	}

	Tensor reshaped(Shape shape) const {
		if (shape_numel(shape) != numel())
			throw DimensionError("reshape changes element count");
		return Tensor(std::move(shape), data_);
	}

	bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

	template <typename T>
	Tensor<T> cast() const {
		Tensor<T> out(shape_);
		out.flat() = data_.template cast<T>();
		return out;
	}

	void set_zero() { data_.setZero(); }

private:
	Shape shape_;
	Flat data_;
};

/// Throws unless the two tensors share a shape; `what` names the operation.
template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
	if (!a.same_shape(b))
		throw DimensionError(std::string(what) + ": shape mismatch " +
		                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace cntc
