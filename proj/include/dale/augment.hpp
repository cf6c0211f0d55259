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

// Augmentation rounds against a pluggable generator, window stitching,
// training-file emission and the diversity metrics.

#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "dale/config.hpp"
#include "dale/corpus.hpp"
#include "dale/embed.hpp"
#include "dale/error.hpp"
#include "dale/http.hpp"
#include "dale/masker.hpp"
#include "dale/random.hpp"
#include "dale/text.hpp"

namespace dale {

struct GenerationRequest {
  std::string template_text;
  int num_beams = 4;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

enum class BackendKind { kEcho, kRemote };

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual BackendKind kind() const = 0;
  virtual std::string generate(const GenerationRequest& request) = 0;
};

// Deterministic stand-in for a model: returns the template with every mask
// token deleted.
class EchoBackend final : public GenerationBackend {
 public:
  explicit EchoBackend(std::string mask_token = "<mask>") : mask_token_(std::move(mask_token)) {}

  BackendKind kind() const override { return BackendKind::kEcho; }

  std::string generate(const GenerationRequest& request) override {
    std::vector<std::string> kept;
    for (auto& tok : text::split_spaces(request.template_text)) {
      if (tok != mask_token_) kept.push_back(std::move(tok));
    }
    return text::join(kept);
  }

 private:
  std::string mask_token_;
};

// POST /generate {"template", "num_beams", "temperature", "seed"} -> {"output"}.
class RemoteBackend final : public GenerationBackend {
 public:
  explicit RemoteBackend(const std::string& endpoint, int max_in_flight = 4)
      : endpoint_(http::parse_endpoint(endpoint)), in_flight_(std::max(1, max_in_flight)) {}

  BackendKind kind() const override { return BackendKind::kRemote; }

  std::string generate(const GenerationRequest& request) override {
    nlohmann::json body;
    body["template"] = request.template_text;
    body["num_beams"] = request.num_beams;
    body["temperature"] = request.temperature;
    body["seed"] = request.seed;
    nlohmann::json res;
    in_flight_.acquire();
    try {
      res = http::post_json(endpoint_, "/generate", body);
    } catch (const Error& e) {
      in_flight_.release();
      fail(ErrorCode::kBackendError, std::string(e.code_name()) + ": " + e.what());
    }
    in_flight_.release();
    if (!res.contains("output") || !res["output"].is_string()) {
      fail(ErrorCode::kBackendError, "ProtocolError: /generate response lacks string \"output\"");
    }
    return res["output"].get<std::string>();
  }

 private:
  http::Endpoint endpoint_;
  std::counting_semaphore<> in_flight_;
};

// POST /score {"text"} -> {"perplexity"}.
class PerplexityScorer {
 public:
  explicit PerplexityScorer(const std::string& endpoint) : endpoint_(http::parse_endpoint(endpoint)) {}

  double score(const std::string& s) {
    nlohmann::json body;
    body["text"] = s;
    const auto res = http::post_json(endpoint_, "/score", body);
    if (!res.contains("perplexity") || !res["perplexity"].is_number()) {
      fail(ErrorCode::kProtocolError, "/score response lacks numeric \"perplexity\"");
    }
    return res["perplexity"].get<double>();
  }

 private:
  http::Endpoint endpoint_;
};

struct AugmentationSet {
  std::string source_id;
  std::vector<std::string> augmentations;
  std::string label_text;
};

// Seed sent with one window of one round; kept within 31 bits so any
// generator-side RNG accepts it.
inline std::uint64_t window_seed(std::uint64_t seed, const std::string& doc_id, int round, std::size_t w) {
  return derive_seed(seed, doc_id, (static_cast<std::uint64_t>(round) << 20) | w) & 0x7FFFFFFFULL;
}

// Drops everything up to and including the first </context> marker.
inline std::string strip_context(const std::string& output) {
  const auto pos = output.find(kContextClose);
  if (pos == std::string::npos) return std::string(text::trim(output));
  return std::string(text::trim(std::string_view(output).substr(pos + kContextClose.size())));
}

// Template for one round: the fine-tune template plus per-round hints. With
// fixed_template, every round reuses round 0's layout.
inline Template round_template(const Template& base, const std::string& doc_id, int round,
                               std::uint64_t seed, const PipelineConfig& config) {
  Template t = base;
  const int layout_round = config.fixed_template ? 0 : round;
  Rng rng(derive_seed(seed, doc_id, 0x10000ULL + static_cast<std::uint64_t>(layout_round)));
  apply_hints(t, rng, config.mask_mu, config.mask_sigma2, config.mask_alpha);
  attach_windows(t, config);
  return t;
}

// Sends each window to the backend, strips echoed context, and concatenates
// the fresh parts in order.
inline std::string generate_stitched(const Template& t, GenerationBackend& backend, std::uint64_t seed,
                                     int round, const PipelineConfig& config) {
  std::vector<std::string> pieces;
  for (std::size_t w = 0; w < t.windows.size(); ++w) {
    const TokenList toks = window_tokens(t.masked_tokens, t.windows[w]);
    const bool has_content = std::any_of(toks.begin(), toks.end(),
                                         [&](const std::string& s) { return s != config.mask_token; });
    GenerationRequest req;
    req.template_text = text::join(toks);
    req.num_beams = config.beams;
    req.temperature = config.temperature;
    req.seed = window_seed(seed, t.doc_id, round, w);
    const std::string raw = backend.generate(req);
    if (has_content && text::trim(raw).empty()) {
      fail(ErrorCode::kMalformedOutput, "empty generator output for window " + std::to_string(w) +
                                            " of '" + t.doc_id + "'");
    }
    std::string piece = t.windows[w].context_delimited ? strip_context(raw) : std::string(text::trim(raw));
    if (!piece.empty()) pieces.push_back(std::move(piece));
  }
  return text::join(pieces);
}

// R rounds over an already built fine-tune template.
inline AugmentationSet generate_from_template(const Template& base, const std::string& label,
                                              GenerationBackend& backend, const PipelineConfig& config,
                                              int rounds, std::uint64_t seed) {
  if (rounds < 1) fail(ErrorCode::kInvalidConfig, "invalid config key 'R': must be >= 1");
  AugmentationSet set;
  set.source_id = base.doc_id;
  set.label_text = label;
  for (int r = 0; r < rounds; ++r) {
    const Template t = round_template(base, base.doc_id, r, seed, config);
    set.augmentations.push_back(generate_stitched(t, backend, seed, r, config));
  }
  return set;
}

inline AugmentationSet generate_augmentations(const Document& doc, GenerationBackend& backend,
                                              EmbeddingProvider& provider, const PipelineConfig& config,
                                              int rounds, std::uint64_t seed) {
  if (rounds < 1) fail(ErrorCode::kInvalidConfig, "invalid config key 'R': must be >= 1");
  if (!doc.label_text) fail(ErrorCode::kMissingLabel, "document '" + doc.id + "' has no label text");
  const Template base = mask_finetune(doc, provider, config.lambda_finetune, config.preserve_budget, config);
  return generate_from_template(base, *doc.label_text, backend, config, rounds, seed);
}

struct QualityReport {
  double diversity = 0.0;
  double length_diversity = 0.0;
  std::optional<double> perplexity;
};

// diversity: mean count of token types in an augmentation that never occur
// in the source. length_diversity: mean |len(aug) - len(source)|.
inline QualityReport diversity_metrics(std::span<const std::string> source,
                                       const std::vector<std::vector<std::string>>& augs) {
  QualityReport r;
  if (augs.empty()) return r;
  const std::unordered_set<std::string> src(source.begin(), source.end());
  double novel_total = 0.0;
  double len_total = 0.0;
  for (const auto& aug : augs) {
    std::unordered_set<std::string> novel;
    for (const auto& t : aug) {
      if (!src.count(t)) novel.insert(t);
    }
    novel_total += static_cast<double>(novel.size());
    const auto a = static_cast<double>(aug.size());
    const auto s = static_cast<double>(source.size());
    len_total += a > s ? a - s : s - a;
  }
  const auto n = static_cast<double>(augs.size());
  r.diversity = novel_total / n;
  r.length_diversity = len_total / n;
  return r;
}

inline std::vector<std::string> metric_tokens(const std::string& s) {
  std::vector<std::string> out;
  for (auto& t : tokenize(s)) out.push_back(std::move(t.text));
  return out;
}

struct EmitSummary {
  std::size_t gold_count = 0;
  std::size_t aug_count = 0;
};

inline std::string augmentation_id(const std::string& source_id, std::size_t round) {
  return source_id + "#dale-" + std::to_string(round);
}

// Gold records first, then every augmentation tagged origin "dale" and
// carrying its source's label.
inline EmitSummary write_training_records(std::ostream& out, const Corpus& gold,
                                          const std::vector<AugmentationSet>& aug_sets) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : gold.documents) by_id.emplace(d.id, &d);
  for (const auto& a : aug_sets) {
    if (!by_id.count(a.source_id)) {
      fail(ErrorCode::kUnknownSource, "augmentation source '" + a.source_id + "' is not in the gold corpus");
    }
  }
  EmitSummary sum;
  for (const auto& d : gold.documents) {
    out << document_record(d).dump() << '\n';
    ++sum.gold_count;
  }
  for (const auto& a : aug_sets) {
    const Document& src = *by_id.at(a.source_id);
    for (std::size_t r = 0; r < a.augmentations.size(); ++r) {
      nlohmann::ordered_json rec;
      rec["id"] = augmentation_id(a.source_id, r);
      rec["text"] = a.augmentations[r];
      if (src.label_text) rec["label"] = *src.label_text;
      rec["origin"] = "dale";
      rec["source"] = a.source_id;
      rec["round"] = r;
      out << rec.dump() << '\n';
      ++sum.aug_count;
    }
  }
  return sum;
}

inline EmitSummary emit_training_file(const Corpus& gold, const std::vector<AugmentationSet>& aug_sets,
                                      const std::string& path) {
  std::unordered_set<std::string> ids;
  for (const auto& d : gold.documents) ids.insert(d.id);
  for (const auto& a : aug_sets) {
    if (!ids.count(a.source_id)) {
      fail(ErrorCode::kUnknownSource, "augmentation source '" + a.source_id + "' is not in the gold corpus");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write training file: " + path);
  const EmitSummary sum = write_training_records(out, gold, aug_sets);
  out.flush();
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path);
  return sum;
}

// Reads origin "dale" records back into per-source sets, in file order.
inline std::vector<AugmentationSet> load_augmentations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read augmentations: " + path);
  std::vector<AugmentationSet> sets;
  std::unordered_map<std::string, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object()) fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": not an object");
    if (rec.value("origin", std::string()) != "dale") continue;
    if (!rec.contains("source") || !rec["source"].is_string() || !rec.contains("text") ||
        !rec["text"].is_string()) {
      fail(ErrorCode::kParseError, "line " + std::to_string(line_no) + ": augmentation lacks source/text");
    }
    const std::string src = rec["source"].get<std::string>();
    auto [it, fresh] = index.try_emplace(src, sets.size());
    if (fresh) {
      AugmentationSet s;
      s.source_id = src;
      s.label_text = rec.value("label", std::string());
      sets.push_back(std::move(s));
    }
    sets[it->second].augmentations.push_back(rec["text"].get<std::string>());
  }
  return sets;
}

}  // namespace dale
