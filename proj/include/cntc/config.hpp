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

/// Plain-text "key = value" configuration files. '#' starts a comment.
/// Unknown keys are rejected once the consumer has read everything it
/// understands, so typos fail loudly.

#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "cntc/errors.hpp"

namespace cntc {

class KeyValueConfig {
public:
	KeyValueConfig() = default;

	static KeyValueConfig from_file(const std::string& path) {
		std::ifstream is(path);
		if (!is) throw InputError("cannot open config file: " + path);
		KeyValueConfig cfg;
		std::string line;
		int line_no = 0;
		while (std::getline(is, line)) {
			++line_no;
			const auto hash = line.find('#');
			if (hash != std::string::npos) line.erase(hash);
			const auto eq = line.find('=');
			if (eq == std::string::npos) {
				if (line.find_first_not_of(" \t\r") != std::string::npos)
					throw InputError("config line " + std::to_string(line_no) +
					                 ": expected key = value");
				continue;
			}
			const std::string key = trim(line.substr(0, eq));
			const std::string value = trim(line.substr(eq + 1));
			if (key.empty() || value.empty())
				throw InputError("config line " + std::to_string(line_no) +
				                 ": empty key or value");
			cfg.values_[key] = value;
		}
		return cfg;
	}

	bool has(const std::string& key) const { return values_.count(key) != 0; }

	std::string get_string(const std::string& key, const std::string& fallback) const {
		consumed_.insert(key);
		const auto it = values_.find(key);
		return it == values_.end() ? fallback : it->second;
	}

	long get_int(const std::string& key, long fallback) const {
		consumed_.insert(key);
		const auto it = values_.find(key);
		if (it == values_.end()) return fallback;
		return parse<long>(key, it->second);
	}

	double get_double(const std::string& key, double fallback) const {
		consumed_.insert(key);
		const auto it = values_.find(key);
		if (it == values_.end()) return fallback;
		return parse<double>(key, it->second);
	}

	std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
		consumed_.insert(key);
		const auto it = values_.find(key);
		if (it == values_.end()) return fallback;
		return parse<std::uint64_t>(key, it->second);
	}

	/// Throws if the file contains keys nothing consumed.
	void reject_unknown_keys() const {
		std::string unknown;
		for (const auto& [key, value] : values_)
			if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
		if (!unknown.empty()) throw InputError("unknown config keys: " + unknown);
	}

	/// One-line resolved view for run logs.
	std::string describe() const {
		std::string out;
		for (const auto& [key, value] : values_)
			out += (out.empty() ? "" : " ") + key + "=" + value;
		return out;
	}

private:
	static std::string trim(std::string s) {
		const auto a = s.find_first_not_of(" \t\r");
		const auto b = s.find_last_not_of(" \t\r");
		if (a == std::string::npos) return "";
		return s.substr(a, b - a + 1);
	}

	template <typename T>
	static T parse(const std::string& key, const std::string& value) {
		std::istringstream is(value);
		T out;
		is >> out;
		if (is.fail() || !is.eof())
			throw InputError("config key '" + key + "' has malformed value '" + value + "'");
		return out;
	}

	std::map<std::string, std::string> values_;
	mutable std::set<std::string> consumed_;
};

}  // namespace cntc
