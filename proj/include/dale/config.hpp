// Copyright 2026 The dale-forge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// PipelineConfig holds every tunable of the pipeline. Defaults are the
// published hyperparameters; a config file only needs to name overrides.
//
// File format: flat `key = value` lines. `#` starts a comment. Values are
// integers, reals, `true`/`false`, bare words, or double-quoted strings.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dale/error.hpp"
#include "dale/text.hpp"

namespace dale {

enum class RankingDirection { kHighest, kLowest };

inline std::string_view to_string(RankingDirection d) {
  return d == RankingDirection::kHighest ? "highest" : "lowest";
}

struct PipelineConfig {
  // Span extraction.
  int q = 7;
  double j_percent = 50.0;
  double pc_percentile = 95.0;
  RankingDirection ranking_direction = RankingDirection::kHighest;
  bool lowercase = false;

  // Context selection.
  double lambda_context = 0.7;
  double ctx_mu = 0.5;
  double ctx_sigma2 = 0.7;
  double ctx_beta = 0.3;
  int output_budget_tokens = 1024;
  double damping = 0.85;
  double pagerank_tol = 1e-8;
  int pagerank_max_iter = 200;

  // Masking.
  double lambda_finetune = 0.5;
  double mask_mu = 0.4;
  double mask_sigma2 = 0.6;
  double mask_alpha = 0.4;
  double preserve_budget = 0.20;
  bool merge_pretrain_masks = true;
  std::string mask_token = "<mask>";
  int window = 1024;
  int context_len = 64;

  // Generation.
  int R = 5;
  int beams = 4;
  double temperature = 1.0;
  bool fixed_template = false;
  int max_in_flight = 4;

  std::uint64_t seed = 0;
  int embed_dim = 512;

  bool operator==(const PipelineConfig&) const = default;
};

namespace detail {

[[noreturn]] inline void invalid(std::string_view key, std::string_view why) {
  fail(ErrorCode::kInvalidConfig,
       "invalid config key '" + std::string(key) + "': " + std::string(why));
}

template <typename T>
std::string format_value(const T& v) {
  // Shortest representation that parses back to the same value.
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// One entry per key: how to read it from text and how to write it back.
struct Field {
  std::string_view key;
  std::function<void(PipelineConfig&, const std::string&)> read;
  std::function<std::string(const PipelineConfig&)> write;
};

inline long long parse_int(std::string_view key, const std::string& raw) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(raw, &used);
  } catch (const std::exception&) {
    invalid(key, "expected an integer, got '" + raw + "'");
  }
  if (used != raw.size()) invalid(key, "expected an integer, got '" + raw + "'");
  return v;
}

inline double parse_real(std::string_view key, const std::string& raw) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(raw, &used);
  } catch (const std::exception&) {
    invalid(key, "expected a number, got '" + raw + "'");
  }
  if (used != raw.size()) invalid(key, "expected a number, got '" + raw + "'");
  return v;
}

inline bool parse_bool(std::string_view key, const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  invalid(key, "expected true or false, got '" + raw + "'");
}

template <typename M>
Field int_field(std::string_view key, M PipelineConfig::*member) {
  return {key,
          [key, member](PipelineConfig& c, const std::string& raw) {
            c.*member = static_cast<M>(parse_int(key, raw));
          },
          [member](const PipelineConfig& c) { return format_value(c.*member); }};
}

inline Field real_field(std::string_view key, double PipelineConfig::*member) {
  return {key,
          [key, member](PipelineConfig& c, const std::string& raw) {
            c.*member = parse_real(key, raw);
          },
          [member](const PipelineConfig& c) { return format_value(c.*member); }};
}

inline Field bool_field(std::string_view key, bool PipelineConfig::*member) {
  return {key,
          [key, member](PipelineConfig& c, const std::string& raw) {
            c.*member = parse_bool(key, raw);
          },
          [member](const PipelineConfig& c) {
            return std::string(c.*member ? "true" : "false");
          }};
}

inline const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      int_field("q", &PipelineConfig::q),
      real_field("j_percent", &PipelineConfig::j_percent),
      real_field("pc_percentile", &PipelineConfig::pc_percentile),
      {"ranking_direction",
       [](PipelineConfig& c, const std::string& raw) {
         if (raw == "highest") {
           c.ranking_direction = RankingDirection::kHighest;
         } else if (raw == "lowest") {
           c.ranking_direction = RankingDirection::kLowest;
         } else {
           invalid("ranking_direction", "expected highest or lowest");
         }
       },
       [](const PipelineConfig& c) {
         return std::string(to_string(c.ranking_direction));
       }},
      bool_field("lowercase", &PipelineConfig::lowercase),
      real_field("lambda_context", &PipelineConfig::lambda_context),
      real_field("ctx_mu", &PipelineConfig::ctx_mu),
      real_field("ctx_sigma2", &PipelineConfig::ctx_sigma2),
      real_field("ctx_beta", &PipelineConfig::ctx_beta),
      int_field("output_budget_tokens", &PipelineConfig::output_budget_tokens),
      real_field("damping", &PipelineConfig::damping),
      real_field("pagerank_tol", &PipelineConfig::pagerank_tol),
      int_field("pagerank_max_iter", &PipelineConfig::pagerank_max_iter),
      real_field("lambda_finetune", &PipelineConfig::lambda_finetune),
      real_field("mask_mu", &PipelineConfig::mask_mu),
      real_field("mask_sigma2", &PipelineConfig::mask_sigma2),
      real_field("mask_alpha", &PipelineConfig::mask_alpha),
      real_field("preserve_budget", &PipelineConfig::preserve_budget),
      bool_field("merge_pretrain_masks", &PipelineConfig::merge_pretrain_masks),
      {"mask_token",
       [](PipelineConfig& c, const std::string& raw) { c.mask_token = raw; },
       [](const PipelineConfig& c) { return "\"" + c.mask_token + "\""; }},
      int_field("window", &PipelineConfig::window),
      int_field("context_len", &PipelineConfig::context_len),
      int_field("R", &PipelineConfig::R),
      int_field("beams", &PipelineConfig::beams),
      real_field("temperature", &PipelineConfig::temperature),
      bool_field("fixed_template", &PipelineConfig::fixed_template),
      int_field("max_in_flight", &PipelineConfig::max_in_flight),
      {"seed",
       [](PipelineConfig& c, const std::string& raw) {
         const long long v = parse_int("seed", raw);
         if (v < 0) invalid("seed", "must be >= 0");
         c.seed = static_cast<std::uint64_t>(v);
       },
       [](const PipelineConfig& c) { return format_value(c.seed); }},
      int_field("embed_dim", &PipelineConfig::embed_dim),
  };
  return kFields;
}

}  // namespace detail

// Throws InvalidConfig naming the first offending key.
inline void validate(const PipelineConfig& c) {
  using detail::invalid;
  if (c.q < 2) invalid("q", "must be >= 2");
  if (!(c.j_percent > 0.0 && c.j_percent <= 100.0)) invalid("j_percent", "must be in (0, 100]");
  if (!(c.pc_percentile >= 0.0 && c.pc_percentile <= 100.0)) {
    invalid("pc_percentile", "must be in [0, 100]");
  }
  if (!(c.lambda_context >= 0.0 && c.lambda_context <= 1.0)) {
    invalid("lambda_context", "must be in [0, 1]");
  }
  if (!(c.lambda_finetune >= 0.0 && c.lambda_finetune <= 1.0)) {
    invalid("lambda_finetune", "must be in [0, 1]");
  }
  if (!(c.ctx_sigma2 > 0.0)) invalid("ctx_sigma2", "must be > 0");
  if (!(c.mask_sigma2 > 0.0)) invalid("mask_sigma2", "must be > 0");
  if (c.output_budget_tokens < 1) invalid("output_budget_tokens", "must be >= 1");
  if (!(c.damping > 0.0 && c.damping < 1.0)) invalid("damping", "must be in (0, 1)");
  if (!(c.pagerank_tol > 0.0)) invalid("pagerank_tol", "must be > 0");
  if (c.pagerank_max_iter < 1) invalid("pagerank_max_iter", "must be >= 1");
  if (!(c.preserve_budget > 0.0 && c.preserve_budget <= 1.0)) {
    invalid("preserve_budget", "must be in (0, 1]");
  }
  if (c.mask_token.empty()) invalid("mask_token", "must be non-empty");
  for (std::size_t i = 0; i < c.mask_token.size();) {
    const auto cp = text::decode_utf8(c.mask_token, i);
    if (text::is_space(cp.value)) invalid("mask_token", "must not contain whitespace");
    i += cp.length;
  }
  if (c.window < 1) invalid("window", "must be >= 1");
  if (c.window > c.output_budget_tokens) invalid("window", "must be <= output_budget_tokens");
  if (c.context_len < 0) invalid("context_len", "must be >= 0");
  if (c.context_len + 2 >= c.window) {
    invalid("context_len", "context plus its two delimiters must be shorter than window");
  }
  if (c.R < 1) invalid("R", "must be >= 1");
  if (c.beams < 1) invalid("beams", "must be >= 1");
  if (!(c.temperature > 0.0)) invalid("temperature", "must be > 0");
  if (c.max_in_flight < 1) invalid("max_in_flight", "must be >= 1");
  if (c.embed_dim < 1) invalid("embed_dim", "must be >= 1");
}

// Applies one `key = value` override. Used by both the file parser and CLI
// flag overrides.
inline void set_config_value(PipelineConfig& c, std::string_view key,
                             const std::string& raw) {
  for (const auto& f : detail::fields()) {
    if (f.key == key) {
      f.read(c, raw);
      return;
    }
  }
  detail::invalid(key, "unknown key");
}

inline PipelineConfig parse_config(std::string_view content) {
  PipelineConfig c;
  std::istringstream in{std::string(content)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = text::trim(line);
    if (v.empty() || v.front() == '#') continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::kParseError,
           "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(text::trim(v.substr(0, eq)));
    std::string_view rhs = text::trim(v.substr(eq + 1));
    std::string value;
    if (!rhs.empty() && rhs.front() == '"') {
      const auto close = rhs.find('"', 1);
      if (close == std::string_view::npos) {
        fail(ErrorCode::kParseError,
             "config line " + std::to_string(line_no) + ": unterminated string");
      }
      const auto rest = text::trim(rhs.substr(close + 1));
      if (!rest.empty() && rest.front() != '#') {
        fail(ErrorCode::kParseError,
             "config line " + std::to_string(line_no) + ": trailing text after string");
      }
      value = std::string(rhs.substr(1, close - 1));
    } else {
      const auto hash = rhs.find('#');
      value = std::string(text::trim(rhs.substr(0, hash)));
    }
    if (key.empty()) {
      fail(ErrorCode::kParseError, "config line " + std::to_string(line_no) + ": empty key");
    }
    set_config_value(c, key, value);
  }
  validate(c);
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// Canonical text form: every key, fixed order. parse_config(save_config(c)) == c.
inline std::string save_config(const PipelineConfig& c) {
  std::string out;
  for (const auto& f : detail::fields()) {
    out += std::string(f.key) + " = " + f.write(c) + "\n";
  }
  return out;
}

inline std::string config_hash(const PipelineConfig& c) {
  return text::hex64(text::fnv1a64(save_config(c)));
}

}  // namespace dale
