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

#include "cntc/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "cntc/errors.hpp"

namespace cntc {

namespace {

void require_matching(const TextureSet& ref, const TextureSet& rec) {
	if (ref.channels() != rec.channels() || ref.height() != rec.height() ||
	    ref.width() != rec.width())
		throw InputError("texture sets do not share extents/channels");
}

void require_matching(const MipChain& ref, const MipChain& rec) {
	if (ref.max_level() != rec.max_level())
		throw InputError("mip chains have different level counts");
	for (int m = 0; m <= ref.max_level(); ++m) require_matching(ref.level(m), rec.level(m));
}

double sq_error_window(const TextureSet& ref, const TextureSet& rec, int chan0,
                       int count) {
	double acc = 0.0;
	for (int c = chan0; c < chan0 + count; ++c)
		for (int r = 0; r < ref.height(); ++r)
			for (int col = 0; col < ref.width(); ++col) {
				const double d = static_cast<double>(ref.at(c, r, col)) -
				                 static_cast<double>(rec.at(c, r, col));
				acc += d * d;
			}
	return acc;
}

double mse_to_psnr(double mse) {
	if (mse <= 0.0) return std::numeric_limits<double>::infinity();
	return -10.0 * std::log10(mse);
}

// --- SSIM -------------------------------------------------------------------

struct SsimWindow {
	std::vector<double> taps;
	int size;
};

SsimWindow make_window(int h, int w) {
	SsimWindow win;
	win.size = std::min({h, w, 11});
	win.taps.resize(static_cast<std::size_t>(win.size));
	if (win.size == 11) {
		const double sigma = 1.5;
		double sum = 0.0;
		for (int i = 0; i < 11; ++i) {
			const double d = i - 5.0;
			win.taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
			sum += win.taps[static_cast<std::size_t>(i)];
		}
		for (auto& t : win.taps) t /= sum;
	} else {
		// Uniform fallback for mips smaller than the canonical window.
		for (auto& t : win.taps) t = 1.0 / win.size;
	}
	return win;
}

// Separable valid-region filter of a single channel viewed as doubles.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const SsimWindow& win) {
	const int k = win.size;
	const long oh = img.rows() - k + 1, ow = img.cols() - k + 1;
	Eigen::MatrixXd rows(img.rows(), ow);
	for (long r = 0; r < img.rows(); ++r)
		for (long c = 0; c < ow; ++c) {
			double acc = 0.0;
			for (int i = 0; i < k; ++i) acc += win.taps[static_cast<std::size_t>(i)] * img(r, c + i);
			rows(r, c) = acc;
		}
	Eigen::MatrixXd out(oh, ow);
	for (long r = 0; r < oh; ++r)
		for (long c = 0; c < ow; ++c) {
			double acc = 0.0;
			for (int i = 0; i < k; ++i) acc += win.taps[static_cast<std::size_t>(i)] * rows(r + i, c);
			out(r, c) = acc;
		}
	return out;
}

Eigen::MatrixXd channel_as_matrix(const TextureSet& t, int c) {
	Eigen::MatrixXd m(t.height(), t.width());
	for (int r = 0; r < t.height(); ++r)
		for (int col = 0; col < t.width(); ++col) m(r, col) = t.at(c, r, col);
	return m;
}

double ssim_channel(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
	constexpr double kC1 = 0.01 * 0.01;  // (K1 L)^2, L = 1
	constexpr double kC2 = 0.03 * 0.03;
	const SsimWindow win = make_window(static_cast<int>(x.rows()), static_cast<int>(x.cols()));
	const Eigen::MatrixXd mu_x = filter_valid(x, win);
	const Eigen::MatrixXd mu_y = filter_valid(y, win);
	const Eigen::MatrixXd xx = filter_valid(x.cwiseProduct(x), win);
	const Eigen::MatrixXd yy = filter_valid(y.cwiseProduct(y), win);
	const Eigen::MatrixXd xy = filter_valid(x.cwiseProduct(y), win);
	double acc = 0.0;
	for (long r = 0; r < mu_x.rows(); ++r)
		for (long c = 0; c < mu_x.cols(); ++c) {
			const double mx = mu_x(r, c), my = mu_y(r, c);
			const double vx = xx(r, c) - mx * mx;
			const double vy = yy(r, c) - my * my;
			const double cov = xy(r, c) - mx * my;
			const double num = (2.0 * mx * my + kC1) * (2.0 * cov + kC2);
			const double den = (mx * mx + my * my + kC1) * (vx + vy + kC2);
			acc += num / den;
		}
	return acc / static_cast<double>(mu_x.rows() * mu_x.cols());
}

// --- BD-rate ----------------------------------------------------------------

struct Curve {
	std::vector<double> quality;
	std::vector<double> log_rate;
};

Curve prepare_curve(std::vector<RDPoint> pts, const char* name) {
	Curve c;
	for (const auto& p : pts) {
		if (!std::isfinite(p.quality)) continue;  // lossless sentinel rows
		if (!(p.bppc > 0.0) || !std::isfinite(p.bppc))
			throw EvaluationError(std::string(name) + " curve has a non-positive rate");
		c.quality.push_back(p.quality);
		c.log_rate.push_back(std::log10(p.bppc));
	}
	if (c.quality.size() < 2)
		throw EvaluationError(std::string(name) + " curve needs at least two finite points");
	// Sort by quality for fitting/integration.
	std::vector<std::size_t> idx(c.quality.size());
	for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
	std::sort(idx.begin(), idx.end(),
	          [&c](std::size_t a, std::size_t b) { return c.quality[a] < c.quality[b]; });
	Curve sorted;
	for (std::size_t i : idx) {
		if (!sorted.quality.empty() && c.quality[i] == sorted.quality.back())
			throw EvaluationError(std::string(name) + " curve repeats a quality value");
		sorted.quality.push_back(c.quality[i]);
		sorted.log_rate.push_back(c.log_rate[i]);
	}
	return sorted;
}

/// Definite integral of the least-squares polynomial fit of log-rate(q).
double poly_integral(const Curve& c, double lo, double hi) {
	const int n = static_cast<int>(c.quality.size());
	const int degree = std::min(3, n - 1);
	Eigen::MatrixXd vand(n, degree + 1);
	for (int i = 0; i < n; ++i) {
		double p = 1.0;
		for (int d = 0; d <= degree; ++d) {
			vand(i, d) = p;
			p *= c.quality[static_cast<std::size_t>(i)];
		}
	}
	Eigen::VectorXd rhs(n);
	for (int i = 0; i < n; ++i) rhs(i) = c.log_rate[static_cast<std::size_t>(i)];
	const Eigen::VectorXd coef = vand.colPivHouseholderQr().solve(rhs);
	double integral = 0.0;
	for (int d = 0; d <= degree; ++d)
		integral += coef(d) / (d + 1) * (std::pow(hi, d + 1) - std::pow(lo, d + 1));
	return integral;
}

/// Monotone piecewise-cubic (Fritsch-Carlson) integral of log-rate(q).
double pchip_integral(const Curve& c, double lo, double hi) {
	const std::size_t n = c.quality.size();
	std::vector<double> h(n - 1), delta(n - 1), slope(n);
	for (std::size_t i = 0; i + 1 < n; ++i) {
		h[i] = c.quality[i + 1] - c.quality[i];
		delta[i] = (c.log_rate[i + 1] - c.log_rate[i]) / h[i];
	}
	slope[0] = delta[0];
	slope[n - 1] = delta[n - 2];
	for (std::size_t i = 1; i + 1 < n; ++i) {
		if (delta[i - 1] * delta[i] <= 0.0) {
			slope[i] = 0.0;
		} else {
			const double w1 = 2.0 * h[i] + h[i - 1];
			const double w2 = h[i] + 2.0 * h[i - 1];
			slope[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
		}
	}
	double integral = 0.0;
	for (std::size_t i = 0; i + 1 < n; ++i) {
		const double a = std::max(lo, c.quality[i]);
		const double b = std::min(hi, c.quality[i + 1]);
		if (b <= a) continue;
		// Hermite segment on [q_i, q_{i+1}], integrated on [a, b] via its
		// antiderivative in normalized coordinates t = (q - q_i) / h.
		const double y0 = c.log_rate[i], y1 = c.log_rate[i + 1];
		const double m0 = slope[i] * h[i], m1 = slope[i + 1] * h[i];
		auto anti = [&](double q) {
			const double t = (q - c.quality[i]) / h[i];
			const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
			// Antiderivatives of the Hermite basis, scaled by h.
			const double H00 = t - t3 + t4 / 2.0;
			const double H10 = t2 / 2.0 - 2.0 * t3 / 3.0 + t4 / 4.0;
			const double H01 = t3 - t4 / 2.0;
			const double H11 = t4 / 4.0 - t3 / 3.0;
			return h[i] * (y0 * H00 + m0 * H10 + y1 * H01 + m1 * H11);
		};
		integral += anti(b) - anti(a);
	}
	return integral;
}

}  // namespace

double psnr_window(const TextureSet& ref, const TextureSet& rec, int chan0, int count) {
	require_matching(ref, rec);
	if (chan0 < 0 || count < 1 || chan0 + count > ref.channels())
		throw InputError("channel window out of range");
	const double den = static_cast<double>(count) * ref.height() * ref.width();
	return mse_to_psnr(sq_error_window(ref, rec, chan0, count) / den);
}

double psnr_single(const TextureSet& ref, const TextureSet& rec) {
	return psnr_window(ref, rec, 0, ref.channels());
}

double psnr_mips(const MipChain& ref, const MipChain& rec) {
	require_matching(ref, rec);
	double err = 0.0, area = 0.0;
	for (int m = 0; m <= ref.max_level(); ++m) {
		const TextureSet& level = ref.level(m);
		err += sq_error_window(level, rec.level(m), 0, level.channels());
		area += static_cast<double>(level.height()) * level.width();
	}
	return mse_to_psnr(err / (static_cast<double>(ref.channels()) * area));
}

double ssim_window(const TextureSet& ref, const TextureSet& rec, int chan0, int count) {
	require_matching(ref, rec);
	if (chan0 < 0 || count < 1 || chan0 + count > ref.channels())
		throw InputError("channel window out of range");
	double acc = 0.0;
	for (int c = chan0; c < chan0 + count; ++c)
		acc += ssim_channel(channel_as_matrix(ref, c), channel_as_matrix(rec, c));
	const double v = acc / count;
	return std::min(1.0, std::max(0.0, v));
}

double ssim_single(const TextureSet& ref, const TextureSet& rec) {
	return ssim_window(ref, rec, 0, ref.channels());
}

double ssim_mips(const MipChain& ref, const MipChain& rec) {
	require_matching(ref, rec);
	double num = 0.0, area = 0.0;
	for (int m = 0; m <= ref.max_level(); ++m) {
		const TextureSet& level = ref.level(m);
		const double hw = static_cast<double>(level.height()) * level.width();
		for (int c = 0; c < level.channels(); ++c)
			num += hw * ssim_channel(channel_as_matrix(level, c),
			                         channel_as_matrix(rec.level(m), c));
		area += hw;
	}
	const double v = num / (static_cast<double>(ref.channels()) * area);
	return std::min(1.0, std::max(0.0, v));
}

double bppc(const AssetBits& bits, int h, int w, int c, bool include_header) {
	if (h < 1 || w < 1 || c < 1) throw InputError("bppc needs positive extents");
	const double payload = static_cast<double>(bits.payload_bits()) +
	                       (include_header ? static_cast<double>(bits.header_bits) : 0.0);
	return payload / (static_cast<double>(h) * w * c);
}

double bd_rate(std::vector<RDPoint> anchor, std::vector<RDPoint> test, BdFit fit) {
	const Curve a = prepare_curve(std::move(anchor), "anchor");
	const Curve t = prepare_curve(std::move(test), "test");
	const double lo = std::max(a.quality.front(), t.quality.front());
	const double hi = std::min(a.quality.back(), t.quality.back());
	if (!(hi > lo))
		throw EvaluationError("rate-distortion curves have no overlapping quality range");
	double ia, it;
	if (fit == BdFit::kPolynomial) {
		ia = poly_integral(a, lo, hi);
		it = poly_integral(t, lo, hi);
	} else {
		ia = pchip_integral(a, lo, hi);
		it = pchip_integral(t, lo, hi);
	}
	const double avg_diff = (it - ia) / (hi - lo);
	return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

std::string emit_rd_csv(std::vector<RDRow> rows) {
	std::sort(rows.begin(), rows.end(), [](const RDRow& a, const RDRow& b) {
		return a.label != b.label ? a.label < b.label : a.bppc < b.bppc;
	});
	std::string out = "label,bppc,psnr_db,ssim\n";
	char buf[160];
	for (const auto& r : rows) {
		if (std::isinf(r.psnr_db))
			std::snprintf(buf, sizeof buf, "%s,%.6g,inf,%.6g\n", r.label.c_str(), r.bppc,
			              r.ssim);
		else
			std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g\n", r.label.c_str(), r.bppc,
			              r.psnr_db, r.ssim);
		out += buf;
	}
	return out;
}

std::vector<RDRow> parse_rd_csv(const std::string& text) {
	std::istringstream is(text);
	std::string line;
	int line_no = 0;
	std::vector<RDRow> rows;
	auto fail = [&line_no](const std::string& why) {
		throw InputError("CSV line " + std::to_string(line_no) + ": " + why);
	};
	while (std::getline(is, line)) {
		++line_no;
		if (line.empty()) continue;
		if (line_no == 1) {
			if (line != "label,bppc,psnr_db,ssim")
				fail("expected header 'label,bppc,psnr_db,ssim'");
			continue;
		}
		std::istringstream ls(line);
		RDRow row;
		std::string field;
		if (!std::getline(ls, row.label, ',') || row.label.empty()) fail("missing label");
		auto parse_number = [&](const char* what) {
			if (!std::getline(ls, field, ',')) fail(std::string("missing ") + what);
			if (field == "inf") return std::numeric_limits<double>::infinity();
			try {
				std::size_t used = 0;
				const double v = std::stod(field, &used);
				if (used != field.size()) fail(std::string("malformed ") + what);
				return v;
			} catch (const std::exception&) {
				fail(std::string("malformed ") + what);
			}
			return 0.0;  // unreachable
		};
		row.bppc = parse_number("bppc");
		row.psnr_db = parse_number("psnr_db");
		row.ssim = parse_number("ssim");
		rows.push_back(std::move(row));
	}
	return rows;
}

}  // namespace cntc
