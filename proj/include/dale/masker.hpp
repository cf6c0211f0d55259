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

// Template construction. Pretraining templates mask occurrences of
// corpus-level correlated spans while preserving the most document-relevant
// ones; fine-tuning templates keep the n-grams closest to the document and
// its label and mask the rest. Long templates are cut into context-framed
// windows.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dale/config.hpp"
#include "dale/corpus.hpp"
#include "dale/embed.hpp"
#include "dale/error.hpp"
#include "dale/pmi.hpp"
#include "dale/random.hpp"
#include "dale/text.hpp"

namespace dale {

using TokenList = std::vector<std::string>;
using TokenRange = std::pair<std::size_t, std::size_t>;  // [start, end)

inline constexpr std::string_view kContextOpen = "<context>";
inline constexpr std::string_view kContextClose = "</context>";
inline constexpr std::size_t kMaxWindowTokens = 1024;

struct ScoredSpan {
  std::size_t start_token = 0;
  std::size_t end_token = 0;
  TokenList surface;
  double similarity = 0.0;
  double importance = 0.0;
  double length_norm = 1.0;

  std::size_t length() const noexcept { return end_token - start_token; }
};

struct WindowSpec {
  std::size_t start_token = 0;  // fresh region, template coordinates
  std::size_t end_token = 0;
  TokenList context_tokens;
  bool context_delimited = false;

  bool operator==(const WindowSpec&) const = default;
};

struct Template {
  std::string doc_id;
  TokenList masked_tokens;
  TokenList target_tokens;
  std::vector<TokenRange> mask_spans;  // one per mask token, in order
  std::vector<WindowSpec> windows;
  std::vector<TokenRange> preserved_spans;  // target coordinates
  std::string mask_token = "<mask>";

  std::size_t mask_count() const { return mask_spans.size(); }
};

// Substitutes each mask token with its target span.
inline TokenList reconstruct(const Template& t) {
  TokenList out;
  out.reserve(t.target_tokens.size());
  std::size_t k = 0;
  for (const auto& tok : t.masked_tokens) {
    if (tok == t.mask_token && k < t.mask_spans.size()) {
      const auto [s, e] = t.mask_spans[k++];
      for (std::size_t i = s; i < e && i < t.target_tokens.size(); ++i) out.push_back(t.target_tokens[i]);
    } else {
      out.push_back(tok);
    }
  }
  return out;
}

namespace detail {

struct MaskRun {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<std::size_t> hint;  // absolute index of the kept token
};

// Lays out masked tokens for non-overlapping, ascending runs.
inline void assemble(Template& t, const std::vector<MaskRun>& runs) {
  t.masked_tokens.clear();
  t.mask_spans.clear();
  std::size_t pos = 0;
  auto emit_mask = [&](std::size_t s, std::size_t e) {
    t.masked_tokens.push_back(t.mask_token);
    t.mask_spans.emplace_back(s, e);
  };
  for (const auto& run : runs) {
    for (; pos < run.start; ++pos) t.masked_tokens.push_back(t.target_tokens[pos]);
    if (run.hint) {
      const std::size_t h = *run.hint;
      if (h > run.start) emit_mask(run.start, h);
      t.masked_tokens.push_back(t.target_tokens[h]);
      if (h + 1 < run.end) emit_mask(h + 1, run.end);
    } else {
      emit_mask(run.start, run.end);
    }
    pos = run.end;
  }
  for (; pos < t.target_tokens.size(); ++pos) t.masked_tokens.push_back(t.target_tokens[pos]);
}

// Maximal runs of masked positions.
inline std::vector<MaskRun> runs_from_flags(const std::vector<bool>& masked) {
  std::vector<MaskRun> runs;
  std::size_t i = 0;
  while (i < masked.size()) {
    if (!masked[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < masked.size() && masked[j]) ++j;
    runs.push_back({i, j, std::nullopt});
    i = j;
  }
  return runs;
}

template <RandomSource Rand>
void draw_hints(std::vector<MaskRun>& runs, Rand& rng, double mu, double sigma2, double alpha) {
  for (auto& run : runs) {
    const double gamma = rng.gaussian(mu, sigma2);
    if (gamma > alpha) run.hint = run.start + rng.uniform_index(run.end - run.start);
  }
}

inline bool overlaps(const std::vector<bool>& taken, std::size_t s, std::size_t e) {
  for (std::size_t i = s; i < e; ++i) {
    if (taken[i]) return true;
  }
  return false;
}

}  // namespace detail

inline Template identity_template(std::string doc_id, TokenList tokens, std::string mask_token) {
  Template t;
  t.doc_id = std::move(doc_id);
  t.masked_tokens = tokens;
  t.target_tokens = std::move(tokens);
  t.mask_token = std::move(mask_token);
  return t;
}

// For every existing mask, draws gamma ~ N(mu, sigma2); when gamma > alpha one
// uniformly chosen token of the masked run is kept as a hint, splitting the
// mask around it.
template <RandomSource Rand>
void apply_hints(Template& t, Rand& rng, double mu, double sigma2, double alpha) {
  std::vector<detail::MaskRun> runs;
  runs.reserve(t.mask_spans.size());
  for (const auto& [s, e] : t.mask_spans) runs.push_back({s, e, std::nullopt});
  detail::draw_hints(runs, rng, mu, sigma2, alpha);
  detail::assemble(t, runs);
}

// importance = cosine(embed(span), doc_embedding) / (len / max_len), sorted
// descending; ties go to the earlier start, then the shorter span.
inline std::vector<ScoredSpan> rank_spans(std::span<const std::string> doc_tokens,
                                          std::span<const TokenRange> spans_in_doc,
                                          const EmbeddingVector& doc_embedding,
                                          EmbeddingProvider& provider) {
  std::vector<ScoredSpan> out;
  if (spans_in_doc.empty()) return out;
  std::size_t max_len = 0;
  for (const auto& [s, e] : spans_in_doc) {
    if (!(s < e && e <= doc_tokens.size())) {
      fail(ErrorCode::kOutOfBounds, "span [" + std::to_string(s) + ", " + std::to_string(e) +
                                        ") outside a document of " + std::to_string(doc_tokens.size()) +
                                        " tokens");
    }
    max_len = std::max(max_len, e - s);
  }
  // Embed each distinct surface once.
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::string> texts;
  std::vector<std::size_t> text_of(spans_in_doc.size());
  for (std::size_t k = 0; k < spans_in_doc.size(); ++k) {
    const auto [s, e] = spans_in_doc[k];
    std::string surface = text::join(doc_tokens.subspan(s, e - s));
    auto [it, fresh] = slot.try_emplace(surface, texts.size());
    if (fresh) texts.push_back(std::move(surface));
    text_of[k] = it->second;
  }
  const auto vecs = embed_texts(provider, texts);
  out.reserve(spans_in_doc.size());
  for (std::size_t k = 0; k < spans_in_doc.size(); ++k) {
    const auto [s, e] = spans_in_doc[k];
    ScoredSpan sp;
    sp.start_token = s;
    sp.end_token = e;
    sp.surface.assign(doc_tokens.begin() + static_cast<std::ptrdiff_t>(s),
                      doc_tokens.begin() + static_cast<std::ptrdiff_t>(e));
    sp.similarity = cosine(vecs[text_of[k]], doc_embedding);
    sp.length_norm = static_cast<double>(e - s) / static_cast<double>(max_len);
    sp.importance = sp.similarity / sp.length_norm;
    out.push_back(std::move(sp));
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredSpan& a, const ScoredSpan& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    if (a.start_token != b.start_token) return a.start_token < b.start_token;
    return a.end_token < b.end_token;
  });
  return out;
}

// Lookup structure over a span set's keys, normalized the same way the
// counts were.
class SpanMatcher {
 public:
  SpanMatcher(const SpanSet& set, bool lowercase) : lowercase_(lowercase) {
    for (const auto& s : set.spans) {
      keys_.insert(lowercase ? text::ascii_lower(s.key.joined()) : s.key.joined());
      lengths_.insert(s.key.size());
      max_len_ = std::max(max_len_, s.key.size());
    }
  }

  // Every (possibly overlapping) occurrence, ordered by start then length.
  std::vector<TokenRange> find(std::span<const std::string> tokens) const {
    std::vector<TokenRange> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      NgramKey key;
      for (std::size_t k = 1; k <= max_len_ && i + k <= tokens.size(); ++k) {
        key.push_back(lowercase_ ? text::ascii_lower(tokens[i + k - 1]) : tokens[i + k - 1]);
        if (lengths_.count(k) && keys_.count(key.joined())) out.emplace_back(i, i + k);
      }
    }
    return out;
  }

 private:
  bool lowercase_;
  std::unordered_set<std::string> keys_;
  std::unordered_set<std::size_t> lengths_;
  std::size_t max_len_ = 0;
};

// Pretraining template over one (already context-selected) token sequence.
//  1. find occurrences of span-set keys;
//  2. rank them and drop any occurrence overlapping a better-ranked one;
//  3. preserve spans in rank order while the preserved total stays within
//     preserve_budget of the document length, stopping at the first that
//     does not fit;
//  4. mask the remaining occurrences, one mask per span, adjacent masks
//     merged unless merge_pretrain_masks is off;
//  5. per masked run, maybe keep one hint token (gamma > alpha).
template <RandomSource Rand>
Template mask_pretrain(std::string doc_id, std::span<const std::string> doc_tokens,
                       const SpanMatcher& matcher, EmbeddingProvider& provider, Rand& rng,
                       const PipelineConfig& config) {
  TokenList tokens(doc_tokens.begin(), doc_tokens.end());
  Template t = identity_template(std::move(doc_id), tokens, config.mask_token);
  if (tokens.empty()) return t;
  const auto occurrences = matcher.find(tokens);
  if (occurrences.empty()) return t;

  const EmbeddingVector doc_vec = embed_text(provider, text::join(tokens));
  const auto ranked = rank_spans(tokens, occurrences, doc_vec, provider);

  std::vector<bool> taken(tokens.size(), false);
  std::vector<const ScoredSpan*> accepted;
  for (const auto& sp : ranked) {
    if (detail::overlaps(taken, sp.start_token, sp.end_token)) continue;
    for (std::size_t i = sp.start_token; i < sp.end_token; ++i) taken[i] = true;
    accepted.push_back(&sp);
  }

  const double budget = config.preserve_budget * static_cast<double>(tokens.size());
  std::size_t preserved = 0;
  std::size_t k = 0;
  for (; k < accepted.size(); ++k) {
    const std::size_t len = accepted[k]->length();
    if (static_cast<double>(preserved + len) > budget + 1e-9) break;
    preserved += len;
    t.preserved_spans.emplace_back(accepted[k]->start_token, accepted[k]->end_token);
  }
  std::sort(t.preserved_spans.begin(), t.preserved_spans.end());

  std::vector<detail::MaskRun> runs;
  if (config.merge_pretrain_masks) {
    std::vector<bool> masked(tokens.size(), false);
    for (std::size_t m = k; m < accepted.size(); ++m) {
      for (std::size_t i = accepted[m]->start_token; i < accepted[m]->end_token; ++i) masked[i] = true;
    }
    runs = detail::runs_from_flags(masked);
  } else {
    for (std::size_t m = k; m < accepted.size(); ++m) {
      runs.push_back({accepted[m]->start_token, accepted[m]->end_token, std::nullopt});
    }
    std::sort(runs.begin(), runs.end(),
              [](const detail::MaskRun& a, const detail::MaskRun& b) { return a.start < b.start; });
  }
  detail::draw_hints(runs, rng, config.mask_mu, config.mask_sigma2, config.mask_alpha);
  detail::assemble(t, runs);
  return t;
}

template <RandomSource Rand>
Template mask_pretrain(std::string doc_id, std::span<const std::string> doc_tokens,
                       const SpanSet& span_set, EmbeddingProvider& provider, Rand& rng,
                       const PipelineConfig& config) {
  return mask_pretrain(std::move(doc_id), doc_tokens, SpanMatcher(span_set, config.lowercase),
                       provider, rng, config);
}

// Fine-tuning template: every within-sentence n-gram (n in [1, q]) is scored
// by cosine against lambda * e(doc) + (1 - lambda) * e(label). N-grams are
// kept best first, skipping overlaps, until the next one would push the kept
// total past preserve_budget of the document length. Everything else is
// masked, consecutive masks merged.
inline Template mask_finetune(const Document& doc, EmbeddingProvider& provider, double lambda_ft,
                              double preserve_budget, const PipelineConfig& config) {
  if (!doc.label_text || text::trim(*doc.label_text).empty()) {
    fail(ErrorCode::kMissingLabel, "document '" + doc.id + "' has no label text");
  }
  TokenList tokens = doc.token_texts();
  if (tokens.empty()) fail(ErrorCode::kEmptyText, "document '" + doc.id + "' has no tokens");
  Template t = identity_template(doc.id, tokens, config.mask_token);

  std::vector<TokenRange> grams;
  std::size_t base = 0;
  for (const auto& s : doc.sentences) {
    const std::size_t len = s.tokens.size();
    for (std::size_t i = 0; i < len; ++i) {
      for (std::size_t n = 1; n <= static_cast<std::size_t>(config.q) && i + n <= len; ++n) {
        grams.emplace_back(base + i, base + i + n);
      }
    }
    base += len;
  }

  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::string> texts;
  std::vector<std::size_t> text_of(grams.size());
  for (std::size_t g = 0; g < grams.size(); ++g) {
    const auto [s, e] = grams[g];
    std::string surface = text::join(std::span<const std::string>(tokens).subspan(s, e - s));
    auto [it, fresh] = slot.try_emplace(surface, texts.size());
    if (fresh) texts.push_back(std::move(surface));
    text_of[g] = it->second;
  }
  texts.push_back(doc.text);
  texts.push_back(*doc.label_text);
  const auto vecs = embed_texts(provider, texts);
  const EmbeddingVector target = blend(vecs[texts.size() - 2], vecs[texts.size() - 1], lambda_ft);

  std::vector<double> gram_score(texts.size() - 2);
  for (std::size_t i = 0; i + 2 < texts.size(); ++i) gram_score[i] = cosine(vecs[i], target);

  std::vector<std::size_t> order(grams.size());
  for (std::size_t g = 0; g < grams.size(); ++g) order[g] = g;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = gram_score[text_of[a]];
    const double sb = gram_score[text_of[b]];
    if (sa != sb) return sa > sb;
    if (grams[a].first != grams[b].first) return grams[a].first < grams[b].first;
    return grams[a].second < grams[b].second;
  });

  const double budget = preserve_budget * static_cast<double>(tokens.size());
  std::vector<bool> kept(tokens.size(), false);
  std::size_t kept_total = 0;
  for (std::size_t g : order) {
    const auto [s, e] = grams[g];
    if (detail::overlaps(kept, s, e)) continue;
    if (static_cast<double>(kept_total + (e - s)) > budget + 1e-9) break;
    for (std::size_t i = s; i < e; ++i) kept[i] = true;
    kept_total += e - s;
    t.preserved_spans.emplace_back(s, e);
  }
  std::sort(t.preserved_spans.begin(), t.preserved_spans.end());

  std::vector<bool> masked(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) masked[i] = !kept[i];
  detail::assemble(t, detail::runs_from_flags(masked));
  return t;
}

// Splits a template into windows of at most `window` tokens. The first
// window holds fresh tokens only; each later one starts with the last
// `context_len` non-mask tokens of the previous window's fresh region,
// framed by <context> ... </context>, then fresh tokens up to the window
// size. Fresh regions tile the template exactly once.
inline std::vector<WindowSpec> sliding_windows(std::span<const std::string> tokens, std::size_t window,
                                               std::size_t context_len,
                                               std::string_view mask_token = "<mask>") {
  if (window < 1 || window > kMaxWindowTokens) {
    fail(ErrorCode::kInvalidConfig, "window must be in [1, " + std::to_string(kMaxWindowTokens) + "]");
  }
  if (context_len >= window) fail(ErrorCode::kInvalidConfig, "context_len must be smaller than window");
  if (context_len > 0 && context_len + 2 >= window) {
    fail(ErrorCode::kInvalidConfig, "context plus delimiters leaves no room for fresh tokens");
  }
  std::vector<WindowSpec> out;
  if (tokens.empty()) return out;
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    WindowSpec w;
    if (!out.empty() && context_len > 0) {
      const WindowSpec& prev = out.back();
      for (std::size_t i = prev.end_token; i > prev.start_token && w.context_tokens.size() < context_len; --i) {
        if (tokens[i - 1] != mask_token) w.context_tokens.push_back(tokens[i - 1]);
      }
      std::reverse(w.context_tokens.begin(), w.context_tokens.end());
      w.context_delimited = !w.context_tokens.empty();
    }
    const std::size_t overhead = w.context_delimited ? w.context_tokens.size() + 2 : 0;
    const std::size_t capacity = window - overhead;
    w.start_token = pos;
    w.end_token = std::min(tokens.size(), pos + capacity);
    pos = w.end_token;
    out.push_back(std::move(w));
  }
  return out;
}

// Full token sequence of one window as sent to a generator.
inline TokenList window_tokens(std::span<const std::string> tokens, const WindowSpec& w) {
  TokenList out;
  if (w.context_delimited) {
    out.emplace_back(kContextOpen);
    out.insert(out.end(), w.context_tokens.begin(), w.context_tokens.end());
    out.emplace_back(kContextClose);
  }
  out.insert(out.end(), tokens.begin() + static_cast<std::ptrdiff_t>(w.start_token),
             tokens.begin() + static_cast<std::ptrdiff_t>(w.end_token));
  return out;
}

inline void attach_windows(Template& t, const PipelineConfig& config) {
  t.windows = sliding_windows(t.masked_tokens, static_cast<std::size_t>(config.window),
                              static_cast<std::size_t>(config.context_len), config.mask_token);
}

enum class Task { kMulticlass, kMultilabel, kNer, kMcq, kRr, kDli };

inline Task parse_task(std::string_view name) {
  if (name == "multiclass") return Task::kMulticlass;
  if (name == "multilabel") return Task::kMultilabel;
  if (name == "ner") return Task::kNer;
  if (name == "mcq") return Task::kMcq;
  if (name == "rr") return Task::kRr;
  if (name == "dli") return Task::kDli;
  fail(ErrorCode::kUnknownTask, "unknown task '" + std::string(name) + "'");
}

namespace detail {

inline std::string scalar_label(const nlohmann::json& v, std::string_view field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  fail(ErrorCode::kMissingLabel, "field \"" + std::string(field) + "\" is not a string");
}

inline const nlohmann::json* field(const nlohmann::json& rec, std::string_view name) {
  if (!rec.is_object()) return nullptr;
  const auto it = rec.find(std::string(name));
  if (it == rec.end() || it->is_null()) return nullptr;
  return &*it;
}

inline std::string require_string(const nlohmann::json& rec, std::string_view name) {
  const auto* v = field(rec, name);
  if (!v) fail(ErrorCode::kMissingLabel, "record lacks field \"" + std::string(name) + "\"");
  return scalar_label(*v, name);
}

}  // namespace detail

// Label text conditioning fine-tune masking, per task:
//   multiclass  the gold label                        ("label")
//   multilabel  gold labels joined by one space       ("labels" or "label" array)
//   ner         "E1 is a L1 [SEP] ... [SEP] En is a Ln" ("entities": [[text, type]] or
//                                                      [{"text", "label"}])
//   mcq         the gold answer                       ("answer", or "choices" + index "label")
//   rr          the sentence's rhetorical role        ("role" or "label")
//   dli         the gold hypothesis                   ("hypothesis")
inline std::string label_text(Task task, const nlohmann::json& rec) {
  using detail::field;
  switch (task) {
    case Task::kMulticlass:
      return detail::require_string(rec, "label");
    case Task::kMultilabel: {
      const auto* v = field(rec, "labels");
      if (!v) v = field(rec, "label");
      if (!v) fail(ErrorCode::kMissingLabel, "record lacks field \"labels\"");
      if (v->is_string()) return v->get<std::string>();
      if (!v->is_array() || v->empty()) fail(ErrorCode::kMissingLabel, "\"labels\" must be a non-empty array");
      std::vector<std::string> parts;
      for (const auto& x : *v) parts.push_back(detail::scalar_label(x, "labels"));
      return text::join(parts);
    }
    case Task::kNer: {
      const auto* v = field(rec, "entities");
      if (!v || !v->is_array() || v->empty()) {
        fail(ErrorCode::kMissingLabel, "record lacks a non-empty \"entities\" array");
      }
      std::vector<std::string> parts;
      for (const auto& e : *v) {
        std::string surface;
        std::string type;
        if (e.is_array() && e.size() == 2) {
          surface = detail::scalar_label(e[0], "entities");
          type = detail::scalar_label(e[1], "entities");
        } else if (e.is_object()) {
          surface = detail::require_string(e, "text");
          type = detail::require_string(e, "label");
        } else {
          fail(ErrorCode::kMissingLabel, "malformed entity in \"entities\"");
        }
        parts.push_back(surface + " is a " + type);
      }
      return text::join(parts, " [SEP] ");
    }
    case Task::kMcq: {
      if (field(rec, "answer")) return detail::require_string(rec, "answer");
      const auto* choices = field(rec, "choices");
      const auto* idx = field(rec, "label");
      if (choices && choices->is_array() && idx && idx->is_number_integer()) {
        const auto i = idx->get<long long>();
        if (i >= 0 && static_cast<std::size_t>(i) < choices->size()) {
          return detail::scalar_label((*choices)[static_cast<std::size_t>(i)], "choices");
        }
      }
      fail(ErrorCode::kMissingLabel, "record lacks \"answer\" or a valid \"choices\"/\"label\" pair");
    }
    case Task::kRr:
      if (field(rec, "role")) return detail::require_string(rec, "role");
      return detail::require_string(rec, "label");
    case Task::kDli:
      return detail::require_string(rec, "hypothesis");
  }
  fail(ErrorCode::kUnknownTask, "unknown task");
}

inline nlohmann::ordered_json template_record(const Template& t) {
  nlohmann::ordered_json rec;
  rec["id"] = t.doc_id;
  rec["template"] = text::join(t.masked_tokens);
  rec["target"] = text::join(t.target_tokens);
  auto spans = nlohmann::ordered_json::array();
  for (const auto& [s, e] : t.mask_spans) spans.push_back({s, e});
  rec["mask_spans"] = std::move(spans);
  auto windows = nlohmann::ordered_json::array();
  for (const auto& w : t.windows) {
    nlohmann::ordered_json wr;
    wr["start"] = w.start_token;
    wr["end"] = w.end_token;
    wr["context"] = text::join(w.context_tokens);
    windows.push_back(std::move(wr));
  }
  rec["windows"] = std::move(windows);
  return rec;
}

}  // namespace dale
