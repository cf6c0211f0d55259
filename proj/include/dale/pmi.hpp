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

// Corpus n-gram statistics, segmentation-min PMI with rare-span discounting,
// and selection of the correlated span set.

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "dale/config.hpp"
#include "dale/corpus.hpp"
#include "dale/error.hpp"
#include "dale/parallel.hpp"
#include "dale/text.hpp"

namespace dale {

// Token sequence stored as one string joined by U+001F. The tokenizer treats
// U+001F as whitespace, so it never occurs inside a token.
class NgramKey {
 public:
  static constexpr char kSep = '\x1f';

  NgramKey() = default;

  explicit NgramKey(std::span<const std::string> tokens) : size_(tokens.size()) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) joined_ += kSep;
      joined_ += tokens[i];
    }
  }

  NgramKey(std::initializer_list<std::string> tokens)
      : NgramKey(std::span<const std::string>(tokens.begin(), tokens.size())) {}

  std::size_t size() const noexcept { return size_; }
  const std::string& joined() const noexcept { return joined_; }

  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    if (size_ == 0) return out;
    out.reserve(size_);
    std::size_t start = 0;
    for (;;) {
      const auto pos = joined_.find(kSep, start);
      if (pos == std::string::npos) {
        out.push_back(joined_.substr(start));
        break;
      }
      out.push_back(joined_.substr(start, pos - start));
      start = pos + 1;
    }
    return out;
  }

  std::string surface() const {
    std::string s = joined_;
    std::replace(s.begin(), s.end(), kSep, ' ');
    return s;
  }

  // Appends one token, used to grow windows incrementally while counting.
  void push_back(std::string_view token) {
    if (size_) joined_ += kSep;
    joined_ += token;
    ++size_;
  }

  bool operator==(const NgramKey& o) const noexcept { return joined_ == o.joined_ && size_ == o.size_; }
  std::strong_ordering operator<=>(const NgramKey& o) const noexcept {
    if (auto c = joined_.compare(o.joined_); c != 0) {
      return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    }
    return size_ <=> o.size_;
  }

 private:
  std::string joined_;
  std::size_t size_ = 0;
};

struct NgramKeyHash {
  std::size_t operator()(const NgramKey& k) const noexcept {
    return std::hash<std::string>{}(k.joined());
  }
};

using FrequencyMap = std::unordered_map<NgramKey, std::uint64_t, NgramKeyHash>;

inline void merge_counts(FrequencyMap& into, const FrequencyMap& from) {
  for (const auto& [k, v] : from) into[k] += v;
}

// Counts for every within-sentence window of length 1..q, together with the
// number of windows of each length (the normalizer for probabilities).
struct CorpusStats {
  int q = 0;
  FrequencyMap counts;
  std::vector<std::uint64_t> windows;  // windows[k], k in [0, q]

  std::uint64_t count(const NgramKey& key) const {
    const auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
  }

  // count(key) / windows[len]; nullopt when the key was never seen.
  std::optional<double> probability(const NgramKey& key) const {
    const auto it = counts.find(key);
    if (it == counts.end() || key.size() == 0 || key.size() >= windows.size()) return std::nullopt;
    return static_cast<double>(it->second) / static_cast<double>(windows[key.size()]);
  }

  void merge(const CorpusStats& other) {
    if (windows.size() < other.windows.size()) windows.resize(other.windows.size(), 0);
    for (std::size_t k = 0; k < other.windows.size(); ++k) windows[k] += other.windows[k];
    merge_counts(counts, other.counts);
    q = std::max(q, other.q);
  }
};

namespace detail {

inline void count_sentence(const Sentence& s, int min_n, int q, bool lowercase,
                           FrequencyMap& counts, std::vector<std::uint64_t>& windows) {
  const std::size_t len = s.tokens.size();
  std::vector<std::string> toks;
  toks.reserve(len);
  for (const auto& t : s.tokens) toks.push_back(lowercase ? text::ascii_lower(t.text) : t.text);
  for (int k = 1; k <= q; ++k) {
    if (static_cast<std::size_t>(k) <= len) windows[static_cast<std::size_t>(k)] += len - static_cast<std::size_t>(k) + 1;
  }
  for (std::size_t i = 0; i < len; ++i) {
    NgramKey key;
    for (std::size_t k = 1; k <= static_cast<std::size_t>(q) && i + k <= len; ++k) {
      key.push_back(toks[i + k - 1]);
      if (static_cast<int>(k) >= min_n) ++counts[key];
    }
  }
}

inline CorpusStats count_range(std::span<const Document> docs, int min_n, int q, bool lowercase) {
  CorpusStats st;
  st.q = q;
  st.windows.assign(static_cast<std::size_t>(q) + 1, 0);
  for (const auto& d : docs) {
    for (const auto& s : d.sentences) count_sentence(s, min_n, q, lowercase, st.counts, st.windows);
  }
  return st;
}

inline CorpusStats count_sharded(const Corpus& corpus, int min_n, int q, bool lowercase, unsigned jobs) {
  if (q < 2) fail(ErrorCode::kInvalidConfig, "invalid config key 'q': must be >= 2");
  const std::span<const Document> docs(corpus.documents);
  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(jobs, docs.size()));
  std::vector<CorpusStats> partial(shards);
  parallel_for(shards, jobs, [&](std::size_t s) {
    const std::size_t begin = docs.size() * s / shards;
    const std::size_t end = docs.size() * (s + 1) / shards;
    partial[s] = count_range(docs.subspan(begin, end - begin), min_n, q, lowercase);
  });
  CorpusStats total = std::move(partial[0]);
  for (std::size_t s = 1; s < shards; ++s) total.merge(partial[s]);
  return total;
}

}  // namespace detail

// Frequencies of every contiguous within-sentence window of length 2..q.
inline FrequencyMap count_ngrams(const Corpus& corpus, int q, bool lowercase = false,
                                 unsigned jobs = 1) {
  return detail::count_sharded(corpus, 2, q, lowercase, jobs).counts;
}

// Frequencies of lengths 1..q plus window totals.
inline CorpusStats gather_stats(const Corpus& corpus, int q, bool lowercase = false,
                                unsigned jobs = 1) {
  return detail::count_sharded(corpus, 1, q, lowercase, jobs);
}

// min over contiguous segmentations (two or more parts) of
// log p(key) - sum log p(part), natural log. `prob` maps a token span to its
// probability, or nullopt when unknown.
template <typename ProbFn>
double pmi_score(std::span<const std::string> key, ProbFn&& prob) {
  const std::size_t n = key.size();
  if (n < 2) fail(ErrorCode::kInvalidConfig, "PMI needs an n-gram of at least 2 tokens");
  // logp[i * (n + 1) + j] holds log p(key[i, j)).
  std::vector<double> logp((n + 1) * (n + 1), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j <= n; ++j) {
      const auto seg = key.subspan(i, j - i);
      const std::optional<double> p = prob(seg);
      if (!p) {
        fail(ErrorCode::kMissingStat,
             "no probability for segment '" + text::join(seg) + "'");
      }
      if (!(*p > 0.0)) {
        fail(ErrorCode::kDegenerateProbability,
             "non-positive probability for segment '" + text::join(seg) + "'");
      }
      logp[i * (n + 1) + j] = std::log(*p);
    }
  }
  // best[j]: max over segmentations of key[0, j) of the summed log-probs.
  std::vector<double> best(n + 1, -INFINITY);
  best[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    const std::size_t first = (j == n) ? 1 : 0;  // the whole key is not a segmentation
    for (std::size_t i = first; i < j; ++i) {
      best[j] = std::max(best[j], best[i] + logp[i * (n + 1) + j]);
    }
  }
  return logp[n] - best[n];
}

inline double pmi_score(const NgramKey& key, const CorpusStats& stats) {
  const auto toks = key.tokens();
  return pmi_score(std::span<const std::string>(toks), [&](std::span<const std::string> seg) {
    return stats.probability(NgramKey(seg));
  });
}

// pmi * log f / (log c + log f). Zero for f = 1; exactly pmi / 2 at f = c.
inline double discount(double pmi, std::uint64_t frequency, std::uint64_t c) {
  if (c < 2) fail(ErrorCode::kInvalidConfig, "discount cutoff c must be >= 2");
  if (frequency < 1) fail(ErrorCode::kInvalidConfig, "frequency must be >= 1");
  const double lf = std::log(static_cast<double>(frequency));
  const double lc = std::log(static_cast<double>(c));
  if (lf == lc) return pmi / 2.0;
  return pmi * lf / (lc + lf);
}

// Nearest-rank percentile of the frequencies, floored at 2.
inline std::uint64_t compute_cutoff(std::span<const std::uint64_t> freqs, double pc) {
  if (freqs.empty()) fail(ErrorCode::kEmptyDistribution, "empty frequency distribution");
  if (!(pc >= 0.0 && pc <= 100.0)) fail(ErrorCode::kInvalidConfig, "percentile must be in [0, 100]");
  std::vector<std::uint64_t> sorted(freqs.begin(), freqs.end());
  std::sort(sorted.begin(), sorted.end());
  const double exact = pc / 100.0 * static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return std::max<std::uint64_t>(2, sorted[rank - 1]);
}

struct SpanCandidate {
  NgramKey key;
  double pmi = 0.0;
  double discounted_pmi = 0.0;
  std::uint64_t frequency = 0;

  bool operator==(const SpanCandidate&) const = default;
};

struct SpanSet {
  std::vector<SpanCandidate> spans;  // discounted_pmi descending
  std::map<int, std::uint64_t> cutoffs_used;
  std::size_t eligible = 0;  // candidates scored before the j% cut

  std::size_t size() const noexcept { return spans.size(); }
};

namespace detail {

// Ordering used for both selection and storage: score in `dir`, then
// frequency descending, then key.
inline bool span_before(const SpanCandidate& a, const SpanCandidate& b, RankingDirection dir) {
  if (a.discounted_pmi != b.discounted_pmi) {
    return dir == RankingDirection::kHighest ? a.discounted_pmi > b.discounted_pmi
                                             : a.discounted_pmi < b.discounted_pmi;
  }
  if (a.frequency != b.frequency) return a.frequency > b.frequency;
  return a.key < b.key;
}

}  // namespace detail

// Scores every n-gram (n in [2, q]) with per-length cutoffs and keeps the
// top j% in the configured direction.
inline SpanSet build_span_set(const Corpus& corpus, const PipelineConfig& config,
                              unsigned jobs = 1) {
  validate(config);
  if (corpus.documents.empty()) fail(ErrorCode::kEmptyDistribution, "cannot build spans from an empty corpus");
  const CorpusStats stats = gather_stats(corpus, config.q, config.lowercase, jobs);

  SpanSet result;
  std::vector<std::vector<std::uint64_t>> by_len(static_cast<std::size_t>(config.q) + 1);
  std::vector<const std::pair<const NgramKey, std::uint64_t>*> entries;
  for (const auto& entry : stats.counts) {
    if (entry.first.size() < 2) continue;
    by_len[entry.first.size()].push_back(entry.second);
    entries.push_back(&entry);
  }
  for (int n = 2; n <= config.q; ++n) {
    const auto& dist = by_len[static_cast<std::size_t>(n)];
    if (!dist.empty()) result.cutoffs_used[n] = compute_cutoff(dist, config.pc_percentile);
  }

  std::vector<SpanCandidate> cands(entries.size());
  const std::size_t chunk = 4096;
  const std::size_t chunks = (entries.size() + chunk - 1) / chunk;
  parallel_for(chunks, jobs, [&](std::size_t c) {
    const std::size_t end = std::min(entries.size(), (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const auto& [key, freq] = *entries[i];
      SpanCandidate& sc = cands[i];
      sc.key = key;
      sc.frequency = freq;
      sc.pmi = pmi_score(key, stats);
      sc.discounted_pmi = discount(sc.pmi, freq, result.cutoffs_used.at(static_cast<int>(key.size())));
    }
  });

  const RankingDirection dir = config.ranking_direction;
  std::sort(cands.begin(), cands.end(),
            [dir](const SpanCandidate& a, const SpanCandidate& b) { return detail::span_before(a, b, dir); });
  result.eligible = cands.size();
  const double exact = config.j_percent / 100.0 * static_cast<double>(cands.size());
  const auto keep = std::min(cands.size(), static_cast<std::size_t>(std::ceil(exact - 1e-9)));
  cands.resize(keep);
  if (dir == RankingDirection::kLowest) {
    std::sort(cands.begin(), cands.end(), [](const SpanCandidate& a, const SpanCandidate& b) {
      return detail::span_before(a, b, RankingDirection::kHighest);
    });
  }
  result.spans = std::move(cands);
  return result;
}

inline void write_span_set(std::ostream& out, const SpanSet& set) {
  for (const auto& s : set.spans) {
    nlohmann::ordered_json rec;
    rec["tokens"] = s.key.tokens();
    rec["freq"] = s.frequency;
    rec["pmi"] = s.pmi;
    rec["dpmi"] = s.discounted_pmi;
    out << rec.dump() << '\n';
  }
}

inline SpanSet read_span_set(std::istream& in) {
  SpanSet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      SpanCandidate sc;
      const auto toks = rec.at("tokens").get<std::vector<std::string>>();
      sc.key = NgramKey(std::span<const std::string>(toks));
      sc.frequency = rec.at("freq").get<std::uint64_t>();
      sc.pmi = rec.at("pmi").get<double>();
      sc.discounted_pmi = rec.at("dpmi").get<double>();
      set.spans.push_back(std::move(sc));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kParseError, "spans line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  set.eligible = set.spans.size();
  return set;
}

inline void save_span_set(const std::string& path, const SpanSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIoError, "cannot write spans: " + path);
  write_span_set(out, set);
}

inline SpanSet load_span_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read spans: " + path);
  return read_span_set(in);
}

}  // namespace dale
