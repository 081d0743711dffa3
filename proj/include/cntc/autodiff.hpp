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
 * @brief Define-by-run reverse-mode automatic differentiation.
 *
 * Graphs are built eagerly: every op computes its forward value at
 * construction and records a closure that routes gradients to its inputs.
 * backward() runs a single reverse topological sweep, so each node is
 * visited exactly once even when it feeds several consumers.
 *
 * Forward evaluation never mutates inputs; parameters may be shared by
 * graphs built on different threads. Gradient accumulation and optimizer
 * updates mutate node state and need exclusive access, which callers
 * enforce (the training loop is sequential over batch elements).
 */

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cntc/tensor.hpp"

namespace cntc {
namespace ad {

template <typename S>
struct Node;

template <typename S>
using NodeRef = std::shared_ptr<Node<S>>;

template <typename S>
struct Node {
	Tensor<S> value;
	Tensor<S> grad;  // empty until first accumulation
	bool requires_grad = false;
	const char* op = "leaf";
	std::vector<NodeRef<S>> inputs;
	std::function<void(Node<S>&)> backward;

	bool has_grad() const { return grad.numel() != 0; }

	/// Gradient with the value's shape; zeros if nothing was accumulated.
	Tensor<S> grad_or_zeros() const {
		return has_grad() ? grad : Tensor<S>::zeros(value.shape());
	}

	void zero_grad() {
		if (has_grad())
			grad.set_zero();
	}
};

template <typename S>
NodeRef<S> constant(Tensor<S> value) {
	auto n = std::make_shared<Node<S>>();
	n->value = std::move(value);
	n->op = "constant";
	return n;
}

template <typename S>
NodeRef<S> param(Tensor<S> value) {
	auto n = std::make_shared<Node<S>>();
	n->value = std::move(value);
	n->grad = Tensor<S>::zeros(n->value.shape());
	n->requires_grad = true;
	n->op = "param";
	return n;
}

namespace detail {

template <typename S>
void accum(Node<S>& target, const Tensor<S>& g) {
	if (!target.requires_grad) return;
	if (!target.has_grad()) target.grad = Tensor<S>::zeros(target.value.shape());
	require_same_shape(target.grad, g, "gradient accumulation");
	target.grad.flat() += g.flat();
}

template <typename S>
NodeRef<S> make_op(const char* op, Tensor<S> value, std::vector<NodeRef<S>> inputs,
                   std::function<void(Node<S>&)> backward) {
	auto n = std::make_shared<Node<S>>();
	n->value = std::move(value);
	n->op = op;
	n->inputs = std::move(inputs);
	for (const auto& in : n->inputs)
		n->requires_grad = n->requires_grad || in->requires_grad;
	if (n->requires_grad) n->backward = std::move(backward);
	return n;
}

/// Containing cell and fractional offset for a coordinate on a lattice of
/// `extent` points. The cell index is clamped so both corners stay in range;
/// a single-point lattice degenerates to (0, 0).
template <typename S>
std::pair<int, S> lattice_cell(double coord, int extent) {
	if (extent <= 1) return {0, S(0)};
	double u = coord;
	if (u < 0.0) u = 0.0;
	if (u > static_cast<double>(extent - 1)) u = static_cast<double>(extent - 1);
	int i0 = static_cast<int>(std::floor(u));
	if (i0 > extent - 2) i0 = extent - 2;
	return {i0, static_cast<S>(u - i0)};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename S>
NodeRef<S> add(const NodeRef<S>& a, const NodeRef<S>& b) {
	require_same_shape(a->value, b->value, "add");
	Tensor<S> out(a->value.shape());
	out.flat() = a->value.flat() + b->value.flat();
	return detail::make_op<S>("add", std::move(out), {a, b}, [](Node<S>& n) {
		detail::accum(*n.inputs[0], n.grad);
		detail::accum(*n.inputs[1], n.grad);
	});
}

template <typename S>
NodeRef<S> add_const(const NodeRef<S>& a, const Tensor<S>& c) {
	require_same_shape(a->value, c, "add_const");
	Tensor<S> out(a->value.shape());
	out.flat() = a->value.flat() + c.flat();
	return detail::make_op<S>("add_const", std::move(out), {a},
	                          [](Node<S>& n) { detail::accum(*n.inputs[0], n.grad); });
}

template <typename S>
NodeRef<S> sub_const(const NodeRef<S>& a, const Tensor<S>& c) {
	require_same_shape(a->value, c, "sub_const");
	Tensor<S> out(a->value.shape());
	out.flat() = a->value.flat() - c.flat();
	return detail::make_op<S>("sub_const", std::move(out), {a},
	                          [](Node<S>& n) { detail::accum(*n.inputs[0], n.grad); });
}

/// 0.5 * tanh(x); squashes into (-0.5, 0.5).
template <typename S>
NodeRef<S> half_tanh(const NodeRef<S>& x) {
	Tensor<S> out(x->value.shape());
	for (long i = 0; i < out.numel(); ++i)
		out[i] = S(0.5) * std::tanh(x->value[i]);
	return detail::make_op<S>("half_tanh", std::move(out), {x}, [](Node<S>& n) {
		Tensor<S> gx(n.value.shape());
		for (long i = 0; i < gx.numel(); ++i) {
			const S y = n.value[i];  // tanh(x) = 2y
			gx[i] = n.grad[i] * (S(0.5) - S(2) * y * y);
		}
		detail::accum(*n.inputs[0], gx);
	});
}

/// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
template <typename S>
NodeRef<S> gelu(const NodeRef<S>& x) {
	constexpr double kInvSqrt2 = 0.70710678118654752440;
	Tensor<S> out(x->value.shape());
	for (long i = 0; i < out.numel(); ++i) {
		const double v = static_cast<double>(x->value[i]);
		out[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
	}
	return detail::make_op<S>("gelu", std::move(out), {x}, [](Node<S>& n) {
		constexpr double kInvSqrt2Pi = 0.39894228040143267794;
		Tensor<S> gx(n.value.shape());
		const Tensor<S>& xv = n.inputs[0]->value;
		for (long i = 0; i < gx.numel(); ++i) {
			const double v = static_cast<double>(xv[i]);
			const double cdf = 0.5 * (1.0 + std::erf(v * 0.70710678118654752440));
			const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
			gx[i] = n.grad[i] * static_cast<S>(cdf + v * pdf);
		}
		detail::accum(*n.inputs[0], gx);
	});
}

enum class Activation { kHalfTanh, kGelu };

template <typename S>
NodeRef<S> activation(const NodeRef<S>& x, Activation kind) {
	return kind == Activation::kHalfTanh ? half_tanh(x) : gelu(x);
}

// ---------------------------------------------------------------------------
// Linear algebra ops
// ---------------------------------------------------------------------------

/// x [batch, n_in] * w [n_out, n_in]^T + b [n_out] -> [batch, n_out].
template <typename S>
NodeRef<S> linear(const NodeRef<S>& x, const NodeRef<S>& w, const NodeRef<S>& b) {
	if (x->value.rank() != 2 || w->value.rank() != 2 || b->value.rank() != 1)
		throw DimensionError("linear: expected x[batch,n_in], w[n_out,n_in], b[n_out]");
	const int batch = x->value.extent(0);
	const int n_in = x->value.extent(1);
	const int n_out = w->value.extent(0);
	if (w->value.extent(1) != n_in)
		throw DimensionError("linear: inner dimensions disagree (" +
		                     shape_str(x->value.shape()) + " vs " +
		                     shape_str(w->value.shape()) + ")");
	if (b->value.extent(0) != n_out)
		throw DimensionError("linear: bias length does not match n_out");

	Tensor<S> out({batch, n_out});
	auto xm = x->value.as_matrix(batch, n_in);
	auto wm = w->value.as_matrix(n_out, n_in);
	auto bm = b->value.as_matrix(1, n_out);
	auto ym = out.as_matrix(batch, n_out);
	ym.noalias() = xm * wm.transpose();
	ym.rowwise() += bm.row(0);

	return detail::make_op<S>(
	    "linear", std::move(out), {x, w, b}, [batch, n_in, n_out](Node<S>& n) {
		    auto gy = n.grad.as_matrix(batch, n_out);
		    auto xm = n.inputs[0]->value.as_matrix(batch, n_in);
		    auto wm = n.inputs[1]->value.as_matrix(n_out, n_in);
		    if (n.inputs[0]->requires_grad) {
			    Tensor<S> gx({batch, n_in});
			    gx.as_matrix(batch, n_in).noalias() = gy * wm;
			    detail::accum(*n.inputs[0], gx);
		    }
		    if (n.inputs[1]->requires_grad) {
			    Tensor<S> gw({n_out, n_in});
			    gw.as_matrix(n_out, n_in).noalias() = gy.transpose() * xm;
			    detail::accum(*n.inputs[1], gw);
		    }
		    if (n.inputs[2]->requires_grad) {
			    Tensor<S> gb({n_out});
			    gb.as_matrix(1, n_out).noalias() = gy.colwise().sum();
			    detail::accum(*n.inputs[2], gb);
		    }
	    });
}

namespace detail {

// im2col tile cap, in scalars; bounds the GEMM workspace for large images.
inline constexpr long kColTileScalars = 1l << 22;

struct ConvDims {
	int c_in, h, w, c_out, k, stride, pad, h_out, w_out;
	long patch;  // c_in * k * k
};

template <typename S>
ConvDims conv_dims(const Tensor<S>& x, const Tensor<S>& kernel, int stride, int pad) {
	if (x.rank() != 3 || kernel.rank() != 4)
		throw DimensionError("conv2d: expected x[c_in,h,w], kernel[c_out,c_in,k,k]");
	if (kernel.extent(2) != kernel.extent(3))
		throw DimensionError("conv2d: only square kernels are supported");
	if (stride < 1) throw DimensionError("conv2d: stride must be positive");
	if (pad < 0) throw DimensionError("conv2d: padding must be non-negative");
	ConvDims d;
	d.c_in = x.extent(0);
	d.h = x.extent(1);
	d.w = x.extent(2);
	d.c_out = kernel.extent(0);
	d.k = kernel.extent(2);
	d.stride = stride;
	d.pad = pad;
	if (kernel.extent(1) != d.c_in)
		throw DimensionError("conv2d: input channels " + std::to_string(d.c_in) +
		                     " do not match kernel channels " +
		                     std::to_string(kernel.extent(1)));
	if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k)
		throw DimensionError("conv2d: padded input smaller than kernel");
	d.h_out = (d.h + 2 * pad - d.k) / stride + 1;
	d.w_out = (d.w + 2 * pad - d.k) / stride + 1;
	d.patch = static_cast<long>(d.c_in) * d.k * d.k;
	return d;
}

// Gathers receptive fields for output pixels [n0, n1) into a patch x count
// column-major matrix; out-of-image taps read as zero.
template <typename S>
void im2col_tile(const Tensor<S>& x, const ConvDims& d, long n0, long n1,
                 Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& col) {
	col.resize(d.patch, n1 - n0);
	for (long n = n0; n < n1; ++n) {
		const int oy = static_cast<int>(n / d.w_out);
		const int ox = static_cast<int>(n % d.w_out);
		const int ry = oy * d.stride - d.pad;
		const int rx = ox * d.stride - d.pad;
		S* dst = col.data() + (n - n0) * d.patch;
		for (int ci = 0; ci < d.c_in; ++ci)
			for (int ki = 0; ki < d.k; ++ki) {
				const int y = ry + ki;
				for (int kj = 0; kj < d.k; ++kj) {
					const int xcol = rx + kj;
					*dst++ = (y >= 0 && y < d.h && xcol >= 0 && xcol < d.w)
					             ? x.at3(ci, y, xcol)
					             : S(0);
				}
			}
	}
}

/// Plain convolution forward (tiled im2col + GEMM); shared by the autodiff
/// op and by graph-free inference paths.
template <typename S>
Tensor<S> conv2d_forward(const Tensor<S>& x, const Tensor<S>& kernel, int stride,
                         int pad) {
	const ConvDims d = conv_dims(x, kernel, stride, pad);
	const long n_pix = static_cast<long>(d.h_out) * d.w_out;
	const long tile = std::max<long>(1, kColTileScalars / d.patch);
	Tensor<S> out({d.c_out, d.h_out, d.w_out});
	auto wm = kernel.as_matrix(d.c_out, d.patch);
	Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> col;
	for (long n0 = 0; n0 < n_pix; n0 += tile) {
		const long n1 = std::min(n_pix, n0 + tile);
		im2col_tile(x, d, n0, n1, col);
		auto ym = out.as_matrix(d.c_out, n_pix);
		ym.middleCols(n0, n1 - n0).noalias() = wm * col;
	}
	return out;
}

}  // namespace detail

/**
 * @brief 2-d convolution, x [c_in,h,w] with kernel [c_out,c_in,k,k].
 *
 * Output extent is floor((h + 2 pad - k) / stride) + 1 per axis. Implemented
 * as tiled im2col + GEMM so the workspace stays bounded for large images.
 */
template <typename S>
NodeRef<S> conv2d(const NodeRef<S>& x, const NodeRef<S>& kernel, int stride, int pad) {
	const detail::ConvDims d = detail::conv_dims(x->value, kernel->value, stride, pad);
	const long n_pix = static_cast<long>(d.h_out) * d.w_out;
	const long tile = std::max<long>(1, detail::kColTileScalars / d.patch);
	Tensor<S> out = detail::conv2d_forward(x->value, kernel->value, stride, pad);

	return detail::make_op<S>(
	    "conv2d", std::move(out), {x, kernel}, [d, n_pix, tile](Node<S>& n) {
		    const Tensor<S>& xv = n.inputs[0]->value;
		    auto wm = n.inputs[1]->value.as_matrix(d.c_out, d.patch);
		    auto gy = n.grad.as_matrix(d.c_out, n_pix);
		    const bool want_gx = n.inputs[0]->requires_grad;
		    const bool want_gw = n.inputs[1]->requires_grad;
		    Tensor<S> gx = want_gx ? Tensor<S>::zeros(xv.shape()) : Tensor<S>();
		    Tensor<S> gw =
		        want_gw ? Tensor<S>::zeros(n.inputs[1]->value.shape()) : Tensor<S>();
		    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> col, dcol;
		    for (long n0 = 0; n0 < n_pix; n0 += tile) {
			    const long n1 = std::min(n_pix, n0 + tile);
			    if (want_gw) {
				    detail::im2col_tile(xv, d, n0, n1, col);
				    gw.as_matrix(d.c_out, d.patch).noalias() +=
				        gy.middleCols(n0, n1 - n0) * col.transpose();
			    }
			    if (want_gx) {
				    dcol.noalias() = wm.transpose() * gy.middleCols(n0, n1 - n0);
				    for (long nn = n0; nn < n1; ++nn) {
					    const int oy = static_cast<int>(nn / d.w_out);
					    const int ox = static_cast<int>(nn % d.w_out);
					    const int ry = oy * d.stride - d.pad;
					    const int rx = ox * d.stride - d.pad;
					    const S* src = dcol.data() + (nn - n0) * d.patch;
					    for (int ci = 0; ci < d.c_in; ++ci)
						    for (int ki = 0; ki < d.k; ++ki) {
							    const int y = ry + ki;
							    for (int kj = 0; kj < d.k; ++kj, ++src) {
								    const int xcol = rx + kj;
								    if (y >= 0 && y < d.h && xcol >= 0 && xcol < d.w)
									    gx.at3(ci, y, xcol) += *src;
							    }
						    }
				    }
			    }
		    }
		    if (want_gw) detail::accum(*n.inputs[1], gw);
		    if (want_gx) detail::accum(*n.inputs[0], gx);
	    });
}

/// Adds a per-channel bias to a [c,h,w] tensor.
template <typename S>
NodeRef<S> bias_chw(const NodeRef<S>& x, const NodeRef<S>& b) {
	if (x->value.rank() != 3 || b->value.rank() != 1 ||
	    b->value.extent(0) != x->value.extent(0))
		throw DimensionError("bias_chw: bias length must equal channel count");
	const int c = x->value.extent(0);
	const long plane = static_cast<long>(x->value.extent(1)) * x->value.extent(2);
	Tensor<S> out(x->value.shape());
	for (int ci = 0; ci < c; ++ci)
		out.flat().segment(ci * plane, plane) =
		    x->value.flat().segment(ci * plane, plane) + b->value[ci];
	return detail::make_op<S>("bias_chw", std::move(out), {x, b},
	                          [c, plane](Node<S>& n) {
		                          detail::accum(*n.inputs[0], n.grad);
		                          if (n.inputs[1]->requires_grad) {
			                          Tensor<S> gb({c});
			                          for (int ci = 0; ci < c; ++ci)
				                          gb[ci] = n.grad.flat().segment(ci * plane, plane).sum();
			                          detail::accum(*n.inputs[1], gb);
		                          }
	                          });
}

/// Average pooling with kernel size == stride == k; extents must divide.
template <typename S>
NodeRef<S> avg_pool2d(const NodeRef<S>& x, int k) {
	if (x->value.rank() != 3) throw DimensionError("avg_pool2d: expected [c,h,w]");
	const int c = x->value.extent(0), h = x->value.extent(1), w = x->value.extent(2);
	if (k < 1 || h % k != 0 || w % k != 0)
		throw DimensionError("avg_pool2d: extents must be divisible by the kernel");
	const int ho = h / k, wo = w / k;
	const S inv = S(1) / static_cast<S>(k * k);
	Tensor<S> out({c, ho, wo});
	for (int ci = 0; ci < c; ++ci)
		for (int r = 0; r < ho; ++r)
			for (int col = 0; col < wo; ++col) {
				S acc = S(0);
				for (int i = 0; i < k; ++i)
					for (int j = 0; j < k; ++j)
						acc += x->value.at3(ci, r * k + i, col * k + j);
				out.at3(ci, r, col) = acc * inv;
			}
	return detail::make_op<S>("avg_pool2d", std::move(out), {x},
	                          [c, ho, wo, k, inv](Node<S>& n) {
		                          Tensor<S> gx(n.inputs[0]->value.shape());
		                          for (int ci = 0; ci < c; ++ci)
			                          for (int r = 0; r < ho; ++r)
				                          for (int col = 0; col < wo; ++col) {
					                          const S g = n.grad.at3(ci, r, col) * inv;
					                          for (int i = 0; i < k; ++i)
						                          for (int j = 0; j < k; ++j)
							                          gx.at3(ci, r * k + i, col * k + j) = g;
				                          }
		                          detail::accum(*n.inputs[0], gx);
	                          });
}

/// Concatenates [batch, n_i] blocks along columns.
template <typename S>
NodeRef<S> concat_cols(const std::vector<NodeRef<S>>& parts) {
	if (parts.empty()) throw DimensionError("concat_cols: no inputs");
	const int batch = parts[0]->value.extent(0);
	int total = 0;
	for (const auto& p : parts) {
		if (p->value.rank() != 2 || p->value.extent(0) != batch)
			throw DimensionError("concat_cols: all inputs must be [batch, n_i]");
		total += p->value.extent(1);
	}
	Tensor<S> out({batch, total});
	auto om = out.as_matrix(batch, total);
	int at = 0;
	for (const auto& p : parts) {
		const int n = p->value.extent(1);
		om.middleCols(at, n) = p->value.as_matrix(batch, n);
		at += n;
	}
	return detail::make_op<S>("concat_cols", std::move(out), parts,
	                          [batch, total](Node<S>& n) {
		                          auto gm = n.grad.as_matrix(batch, total);
		                          int at = 0;
		                          for (auto& in : n.inputs) {
			                          const int cols = in->value.extent(1);
			                          if (in->requires_grad) {
				                          Tensor<S> g({batch, cols});
				                          g.as_matrix(batch, cols) = gm.middleCols(at, cols);
				                          detail::accum(*in, g);
			                          }
			                          at += cols;
		                          }
	                          });
}

/// Reassembles [batch, n] rows from pieces: piece i supplies the rows listed
/// in rows[i]. Every destination row must be covered exactly once.
template <typename S>
NodeRef<S> scatter_rows(const std::vector<NodeRef<S>>& pieces,
                        const std::vector<std::vector<int>>& rows, int batch) {
	if (pieces.empty() || pieces.size() != rows.size())
		throw DimensionError("scatter_rows: pieces and row lists must pair up");
	const int n = pieces[0]->value.extent(1);
	Tensor<S> out({batch, n});
	long covered = 0;
	for (std::size_t i = 0; i < pieces.size(); ++i) {
		const auto& p = pieces[i]->value;
		if (p.rank() != 2 || p.extent(1) != n ||
		    p.extent(0) != static_cast<int>(rows[i].size()))
			throw DimensionError("scatter_rows: piece shape does not match its rows");
		for (std::size_t k = 0; k < rows[i].size(); ++k) {
			out.as_matrix(batch, n).row(rows[i][k]) =
			    p.as_matrix(p.extent(0), n).row(static_cast<long>(k));
			++covered;
		}
	}
	if (covered != batch) throw DimensionError("scatter_rows: rows must cover the batch");
	return detail::make_op<S>("scatter_rows", std::move(out), pieces,
	                          [rows, batch, n](Node<S>& n_) {
		                          auto gm = n_.grad.as_matrix(batch, n);
		                          for (std::size_t i = 0; i < n_.inputs.size(); ++i) {
			                          auto& in = n_.inputs[i];
			                          if (!in->requires_grad) continue;
			                          const int r = in->value.extent(0);
			                          Tensor<S> g({r, n});
			                          auto gmat = g.as_matrix(r, n);
			                          for (std::size_t k = 0; k < rows[i].size(); ++k)
				                          gmat.row(static_cast<long>(k)) = gm.row(rows[i][k]);
			                          detail::accum(*in, g);
		                          }
	                          });
}

// ---------------------------------------------------------------------------
// Sampling and reductions
// ---------------------------------------------------------------------------

/**
 * @brief Bilinear read of a [c,h,w] plane at fractional (u, v).
 *
 * u indexes rows in [0, h-1], v indexes columns in [0, w-1]; callers clamp
 * beforehand. Differentiable with respect to the plane values.
 */
template <typename S>
NodeRef<S> bilinear_sample(const NodeRef<S>& plane, double u, double v) {
	if (plane->value.rank() != 3) throw DimensionError("bilinear_sample: expected [c,h,w]");
	const int c = plane->value.extent(0);
	const int h = plane->value.extent(1);
	const int w = plane->value.extent(2);
	const auto [i0, fu] = detail::lattice_cell<S>(u, h);
	const auto [j0, fv] = detail::lattice_cell<S>(v, w);
	const int i1 = h > 1 ? i0 + 1 : i0;
	const int j1 = w > 1 ? j0 + 1 : j0;
	const S w00 = (S(1) - fu) * (S(1) - fv), w01 = (S(1) - fu) * fv;
	const S w10 = fu * (S(1) - fv), w11 = fu * fv;

	Tensor<S> out({c});
	for (int ci = 0; ci < c; ++ci)
		out[ci] = w00 * plane->value.at3(ci, i0, j0) + w01 * plane->value.at3(ci, i0, j1) +
		          w10 * plane->value.at3(ci, i1, j0) + w11 * plane->value.at3(ci, i1, j1);

	return detail::make_op<S>(
	    "bilinear_sample", std::move(out), {plane},
	    [c, i0, i1, j0, j1, w00, w01, w10, w11](Node<S>& n) {
		    Tensor<S> gp(n.inputs[0]->value.shape());
		    for (int ci = 0; ci < c; ++ci) {
			    const S g = n.grad[ci];
			    gp.at3(ci, i0, j0) += g * w00;
			    gp.at3(ci, i0, j1) += g * w01;
			    gp.at3(ci, i1, j0) += g * w10;
			    gp.at3(ci, i1, j1) += g * w11;
		    }
		    detail::accum(*n.inputs[0], gp);
	    });
}

template <typename S>
NodeRef<S> sum_all(const NodeRef<S>& x) {
	Tensor<S> out({1});
	out[0] = x->value.flat().sum();
	return detail::make_op<S>("sum_all", std::move(out), {x}, [](Node<S>& n) {
		Tensor<S> gx(n.inputs[0]->value.shape());
		gx.flat().setConstant(n.grad[0]);
		detail::accum(*n.inputs[0], gx);
	});
}

template <typename S>
NodeRef<S> mean_all(const NodeRef<S>& x) {
	Tensor<S> out({1});
	const S inv = S(1) / static_cast<S>(x->value.numel());
	out[0] = x->value.flat().sum() * inv;
	return detail::make_op<S>("mean_all", std::move(out), {x}, [inv](Node<S>& n) {
		Tensor<S> gx(n.inputs[0]->value.shape());
		gx.flat().setConstant(n.grad[0] * inv);
		detail::accum(*n.inputs[0], gx);
	});
}

/// Mean squared error against a fixed target, averaged over all elements.
template <typename S>
NodeRef<S> mse_loss(const NodeRef<S>& pred, const Tensor<S>& target) {
	require_same_shape(pred->value, target, "mse_loss");
	const S inv = S(1) / static_cast<S>(pred->value.numel());
	Tensor<S> out({1});
	out[0] = (pred->value.flat() - target.flat()).square().sum() * inv;
	return detail::make_op<S>("mse_loss", std::move(out), {pred},
	                          [target, inv](Node<S>& n) {
		                          Tensor<S> gp(n.inputs[0]->value.shape());
		                          gp.flat() = n.grad[0] * S(2) * inv *
		                                      (n.inputs[0]->value.flat() - target.flat());
		                          detail::accum(*n.inputs[0], gp);
	                          });
}

// ---------------------------------------------------------------------------
// Backward sweep
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar root; visits each node exactly once and
/// accumulates into parameter gradients (callers zero them between steps).
template <typename S>
void backward(const NodeRef<S>& root) {
	if (root->value.numel() != 1)
		throw DimensionError("backward: root must be scalar");
	if (!root->requires_grad)
		throw Error("backward: root does not depend on any parameter");

	// Iterative post-order over requires_grad nodes.
	std::vector<Node<S>*> order;
	std::unordered_set<Node<S>*> seen;
	std::vector<std::pair<Node<S>*, std::size_t>> stack;
	stack.emplace_back(root.get(), 0);
	seen.insert(root.get());
	while (!stack.empty()) {
		auto& [node, next] = stack.back();
		if (next < node->inputs.size()) {
			Node<S>* in = node->inputs[next++].get();
			if (in->requires_grad && seen.insert(in).second)
				stack.emplace_back(in, 0);
		} else {
			order.push_back(node);
			stack.pop_back();
		}
	}

	root->grad = Tensor<S>::full(root->value.shape(), S(1));
	for (auto it = order.rbegin(); it != order.rend(); ++it) {
		Node<S>* n = *it;
		if (n->backward && n->has_grad()) n->backward(*n);
	}
}

}  // namespace ad
}  // namespace cntc
