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

// dale-forge: command-line front end for span extraction, context
// selection, template building, augmentation and evaluation.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dale/dale.hpp"

namespace {

using dale::ErrorCode;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

// Random streams per stage, so stages never share draws.
constexpr std::uint64_t kContextStream = 1;
constexpr std::uint64_t kMaskStream = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  unsigned jobs = dale::default_jobs();
  std::string embedder = "hashed_bow";
  std::string embeddings_path;
  std::string embed_endpoint;
  std::optional<int> embed_dim;
  std::string task;
};

struct Manifest {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::size_t span_set_size = 0;
  std::size_t template_count = 0;
  std::size_t aug_count = 0;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

std::string env_endpoint() {
  const char* v = std::getenv("DALE_FORGE_ENDPOINT");
  return v ? std::string(v) : std::string();
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "Flat key = value config file");
  cmd->add_option("--set", o.overrides, "Config override key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "Global random seed");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--embedder", o.embedder, "Embedding provider")
      ->check(CLI::IsMember({"hashed_bow", "file_backed", "remote"}));
  cmd->add_option("--embeddings", o.embeddings_path, "JSON-lines vectors for --embedder file_backed");
  cmd->add_option("--embed-endpoint", o.embed_endpoint,
                  "Model service URL for --embedder remote (default $DALE_FORGE_ENDPOINT)");
  cmd->add_option("--embed-dim", o.embed_dim, "Embedding dimension");
  cmd->add_option("--task", o.task, "Label layout of the corpus records")
      ->check(CLI::IsMember({"multiclass", "multilabel", "ner", "mcq", "rr", "dli"}));
}

dale::PipelineConfig resolve_config(const CommonOptions& o,
                                    const std::map<std::string, std::string>& flag_values) {
  dale::PipelineConfig cfg = o.config_path.empty() ? dale::PipelineConfig{} : dale::load_config(o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) dale::fail(ErrorCode::kInvalidConfig, "--set expects key=value, got '" + kv + "'");
    dale::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [key, value] : flag_values) dale::set_config_value(cfg, key, value);
  if (o.seed) cfg.seed = *o.seed;
  if (o.embed_dim) cfg.embed_dim = *o.embed_dim;
  dale::validate(cfg);
  return cfg;
}

std::unique_ptr<dale::EmbeddingProvider> make_provider(const CommonOptions& o, const dale::PipelineConfig& cfg) {
  const auto dim = static_cast<std::size_t>(cfg.embed_dim);
  if (o.embedder == "file_backed") {
    if (o.embeddings_path.empty()) dale::fail(ErrorCode::kInvalidConfig, "--embedder file_backed needs --embeddings");
    return std::make_unique<dale::FileBackedProvider>(o.embeddings_path);
  }
  if (o.embedder == "remote") {
    const std::string url = o.embed_endpoint.empty() ? env_endpoint() : o.embed_endpoint;
    if (url.empty()) dale::fail(ErrorCode::kInvalidConfig, "--embedder remote needs --embed-endpoint");
    return std::make_unique<dale::RemoteProvider>(url, dim, 64, cfg.max_in_flight);
  }
  return std::make_unique<dale::HashedBowProvider>(dim);
}

dale::Corpus read_corpus(const std::string& path, const CommonOptions& o) {
  if (o.task.empty()) return dale::load_corpus(path);
  const dale::Task task = dale::parse_task(o.task);
  return dale::load_corpus(path, [task](const nlohmann::json& rec) -> std::optional<std::string> {
    return dale::label_text(task, rec);
  });
}

class Output {
 public:
  explicit Output(const std::string& path) : path_(path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) dale::fail(ErrorCode::kIoError, "cannot write " + path);
    }
  }
  std::ostream& stream() { return path_.empty() ? std::cout : file_; }
  void close() {
    if (path_.empty()) {
      std::cout.flush();
      return;
    }
    file_.close();
    if (!file_) dale::fail(ErrorCode::kIoError, "write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream file_;
};

void write_manifest(const std::string& path, const Manifest& m, const dale::PipelineConfig& cfg,
                    Clock::time_point started) {
  nlohmann::ordered_json j;
  j["subcommand"] = m.subcommand;
  j["config_hash"] = dale::config_hash(cfg);
  j["seed"] = cfg.seed;
  j["input_paths"] = m.inputs;
  j["output_paths"] = m.outputs;
  j["span_set_size"] = m.span_set_size;
  j["template_count"] = m.template_count;
  j["aug_count"] = m.aug_count;
  for (const auto& [k, v] : m.extra.items()) j[k] = v;
  j["wall_time_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started).count();
  std::ofstream out(path, std::ios::binary);
  if (!out) dale::fail(ErrorCode::kIoError, "cannot write manifest " + path);
  out << j.dump(2) << '\n';
}

void maybe_manifest(const std::string& primary_out, const Manifest& m, const dale::PipelineConfig& cfg,
                    Clock::time_point started) {
  if (!primary_out.empty()) write_manifest(primary_out + ".manifest.json", m, cfg, started);
}

// ---- stages ----------------------------------------------------------------

dale::SpanSet stage_extract(const dale::Corpus& corpus, const dale::PipelineConfig& cfg, unsigned jobs) {
  return dale::build_span_set(corpus, cfg, jobs);
}

nlohmann::ordered_json cutoffs_json(const dale::SpanSet& set) {
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [n, v] : set.cutoffs_used) c[std::to_string(n)] = v;
  return c;
}

struct ContextPick {
  dale::SelectionResult selection;
  std::vector<std::string> tokens;
};

ContextPick pick_context(const dale::Document& doc, dale::EmbeddingProvider& provider,
                         const dale::PipelineConfig& cfg) {
  ContextPick p;
  const auto budget = static_cast<std::size_t>(cfg.output_budget_tokens);
  if (doc.sentences.empty()) return p;
  const auto graph = dale::build_similarity_graph(doc, provider, cfg.lambda_context);
  const auto pr = dale::pagerank(graph, cfg.damping, cfg.pagerank_tol, cfg.pagerank_max_iter);
  dale::Rng rng(dale::derive_seed(cfg.seed, doc.id, kContextStream));
  p.selection = dale::select_context(doc, pr.scores, budget, rng, {cfg.ctx_mu, cfg.ctx_sigma2, cfg.ctx_beta});
  p.tokens = dale::selected_tokens(doc, p.selection, budget);
  return p;
}

std::vector<dale::Template> stage_pretrain(const dale::Corpus& corpus, const dale::SpanSet& spans,
                                           dale::EmbeddingProvider& provider, const dale::PipelineConfig& cfg,
                                           unsigned jobs) {
  const dale::SpanMatcher matcher(spans, cfg.lowercase);
  std::vector<dale::Template> out(corpus.documents.size());
  dale::parallel_for(out.size(), jobs, [&](std::size_t i) {
    const auto& doc = corpus.documents[i];
    const ContextPick ctx = pick_context(doc, provider, cfg);
    dale::Rng rng(dale::derive_seed(cfg.seed, doc.id, kMaskStream));
    out[i] = dale::mask_pretrain(doc.id, ctx.tokens, matcher, provider, rng, cfg);
    dale::attach_windows(out[i], cfg);
  });
  return out;
}

std::vector<dale::Template> stage_finetune(const dale::Corpus& corpus, dale::EmbeddingProvider& provider,
                                           const dale::PipelineConfig& cfg, unsigned jobs) {
  std::vector<dale::Template> out(corpus.documents.size());
  dale::parallel_for(out.size(), jobs, [&](std::size_t i) {
    out[i] = dale::mask_finetune(corpus.documents[i], provider, cfg.lambda_finetune, cfg.preserve_budget, cfg);
    dale::attach_windows(out[i], cfg);
  });
  return out;
}

std::vector<dale::AugmentationSet> stage_augment(const dale::Corpus& corpus,
                                                 const std::vector<dale::Template>& templates,
                                                 dale::GenerationBackend& backend, const dale::PipelineConfig& cfg,
                                                 unsigned jobs) {
  std::vector<dale::AugmentationSet> out(corpus.documents.size());
  dale::parallel_for(out.size(), jobs, [&](std::size_t i) {
    const auto& doc = corpus.documents[i];
    if (!doc.label_text) dale::fail(ErrorCode::kMissingLabel, "document '" + doc.id + "' has no label");
    out[i] = dale::generate_from_template(templates[i], *doc.label_text, backend, cfg, cfg.R, cfg.seed);
  });
  return out;
}

nlohmann::ordered_json stage_evaluate(const dale::Corpus& gold, const std::vector<dale::AugmentationSet>& sets,
                                      dale::PerplexityScorer* scorer) {
  std::map<std::string, const dale::Document*> by_id;
  for (const auto& d : gold.documents) by_id.emplace(d.id, &d);
  nlohmann::ordered_json docs = nlohmann::ordered_json::array();
  double div_sum = 0.0;
  double len_sum = 0.0;
  double ppl_sum = 0.0;
  std::size_t ppl_n = 0;
  std::size_t nonzero = 0;
  for (const auto& s : sets) {
    const auto it = by_id.find(s.source_id);
    if (it == by_id.end()) {
      dale::fail(ErrorCode::kUnknownSource, "augmentation source '" + s.source_id + "' is not in the gold corpus");
    }
    std::vector<std::vector<std::string>> augs;
    for (const auto& a : s.augmentations) augs.push_back(dale::metric_tokens(a));
    const auto source = it->second->token_texts();
    dale::QualityReport rep = dale::diversity_metrics(source, augs);
    if (scorer && !s.augmentations.empty()) {
      double total = 0.0;
      for (const auto& a : s.augmentations) total += scorer->score(a);
      rep.perplexity = total / static_cast<double>(s.augmentations.size());
    }
    nlohmann::ordered_json d;
    d["id"] = s.source_id;
    d["rounds"] = s.augmentations.size();
    d["diversity"] = rep.diversity;
    d["length_diversity"] = rep.length_diversity;
    if (rep.perplexity) {
      d["perplexity"] = *rep.perplexity;
      ppl_sum += *rep.perplexity;
      ++ppl_n;
    }
    docs.push_back(std::move(d));
    div_sum += rep.diversity;
    len_sum += rep.length_diversity;
    if (rep.diversity > 0.0) ++nonzero;
  }
  const double n = sets.empty() ? 1.0 : static_cast<double>(sets.size());
  nlohmann::ordered_json report;
  report["document_count"] = sets.size();
  report["mean_diversity"] = div_sum / n;
  report["mean_length_diversity"] = len_sum / n;
  report["documents_with_nonzero_diversity"] = nonzero;
  if (ppl_n) report["mean_perplexity"] = ppl_sum / static_cast<double>(ppl_n);
  report["documents"] = std::move(docs);
  return report;
}

std::unique_ptr<dale::GenerationBackend> make_backend(const std::string& kind, const std::string& endpoint,
                                                      const dale::PipelineConfig& cfg) {
  if (kind == "remote") {
    const std::string url = endpoint.empty() ? env_endpoint() : endpoint;
    if (url.empty()) dale::fail(ErrorCode::kInvalidConfig, "--backend remote needs --endpoint");
    return std::make_unique<dale::RemoteBackend>(url, cfg.max_in_flight);
  }
  return std::make_unique<dale::EchoBackend>(cfg.mask_token);
}

void write_templates(std::ostream& out, const std::vector<dale::Template>& ts) {
  for (const auto& t : ts) out << dale::template_record(t).dump() << '\n';
}

void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) dale::fail(ErrorCode::kIoError, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) dale::fail(ErrorCode::kIoError, "write failed: " + path);
}

void print_error(std::string_view code, const std::string& message) {
  nlohmann::ordered_json e;
  e["error"] = code;
  e["message"] = message;
  std::cerr << e.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dale-forge: correlated-span templates and augmentation for legal text"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  CommonOptions common;
  std::map<std::string, std::string> flags;  // config key -> raw value, filled from subcommand flags
  auto config_flag = [&](CLI::App* cmd, const std::string& name, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  };
  auto config_switch = [&](CLI::App* cmd, const std::string& name, const std::string& key, const std::string& value,
                           const std::string& help) {
    cmd->add_flag_callback(name, [&flags, key, value] { flags[key] = value; }, help);
  };

  std::string corpus_path, spans_path, out_path, mode = "finetune", backend_kind = "echo", endpoint;
  std::string source_path, augs_path, report_path, scorer_endpoint, out_dir = "dale-out";
  bool emit_tokens = false;

  auto* tok = app.add_subcommand("tokenize", "Re-emit a corpus, optionally with its tokens");
  tok->add_option("--corpus", corpus_path, "Input JSON-lines corpus")->required();
  tok->add_option("--out", out_path, "Output path (default stdout)");
  tok->add_flag("--emit-tokens", emit_tokens, "Add a \"tokens\" array to each record");
  add_common(tok, common);

  auto* ext = app.add_subcommand("extract-spans", "Score n-grams and write the correlated span set");
  ext->add_option("--corpus", corpus_path, "Input JSON-lines corpus")->required();
  ext->add_option("--out", out_path, "Span set output (JSON-lines)")->required();
  config_flag(ext, "--q", "q", "Maximum n-gram length");
  config_flag(ext, "--j", "j_percent", "Percent of candidates kept");
  config_flag(ext, "--pc", "pc_percentile", "Cutoff percentile of the per-n frequency distribution");
  config_flag(ext, "--direction", "ranking_direction", "highest or lowest discounted PMI");
  config_switch(ext, "--lowercase", "lowercase", "true", "Lowercase tokens before counting");
  add_common(ext, common);

  auto* sel = app.add_subcommand("select-context", "PageRank context selection per document");
  sel->add_option("--corpus", corpus_path, "Input JSON-lines corpus")->required();
  sel->add_option("--out", out_path, "Output path (default stdout)");
  config_flag(sel, "--budget", "output_budget_tokens", "Output token budget");
  config_flag(sel, "--lambda", "lambda_context", "Sentence/document blend weight");
  add_common(sel, common);

  auto* bt = app.add_subcommand("build-templates", "Build masked templates");
  bt->add_option("--mode", mode, "pretrain or finetune")->check(CLI::IsMember({"pretrain", "finetune"}));
  bt->add_option("--spans", spans_path, "Span set from extract-spans (required for pretrain)");
  bt->add_option("--corpus", corpus_path, "Input JSON-lines corpus")->required();
  bt->add_option("--out", out_path, "Output path (default stdout)");
  config_flag(bt, "--preserve-budget", "preserve_budget", "Fraction of tokens kept unmasked");
  config_flag(bt, "--window", "window", "Window size in tokens");
  config_flag(bt, "--context-len", "context_len", "Context tokens carried into the next window");
  config_switch(bt, "--no-merge-pretrain", "merge_pretrain_masks", "false", "Keep one mask per span");
  add_common(bt, common);

  auto* aug = app.add_subcommand("augment", "Generate augmentations and write the training file");
  aug->add_option("--corpus", corpus_path, "Gold JSON-lines corpus")->required();
  aug->add_option("--spans", spans_path, "Span set (recorded in the manifest)");
  aug->add_option("--out", out_path, "Training file output")->required();
  aug->add_option("--backend", backend_kind, "echo or remote")->check(CLI::IsMember({"echo", "remote"}));
  aug->add_option("--endpoint", endpoint, "Generator URL (default $DALE_FORGE_ENDPOINT)");
  config_flag(aug, "--rounds", "R", "Augmentation rounds per document");
  config_flag(aug, "--preserve-budget", "preserve_budget", "Fraction of tokens kept unmasked");
  config_switch(aug, "--fixed-template", "fixed_template", "true", "Reuse one mask layout for all rounds");
  add_common(aug, common);

  auto* ev = app.add_subcommand("evaluate", "Diversity metrics of an augmentation file");
  ev->add_option("--source", source_path, "Gold JSON-lines corpus")->required();
  ev->add_option("--augs", augs_path, "Training file from augment")->required();
  ev->add_option("--report", report_path, "Report output (JSON)")->required();
  ev->add_option("--scorer-endpoint", scorer_endpoint, "Perplexity scorer URL");
  add_common(ev, common);

  auto* pl = app.add_subcommand("pipeline", "extract-spans, build-templates, augment and evaluate in one run");
  pl->add_option("--corpus", corpus_path, "Gold JSON-lines corpus")->required();
  pl->add_option("--out-dir", out_dir, "Directory for every output");
  pl->add_option("--backend", backend_kind, "echo or remote")->check(CLI::IsMember({"echo", "remote"}));
  pl->add_option("--endpoint", endpoint, "Generator URL (default $DALE_FORGE_ENDPOINT)");
  pl->add_option("--scorer-endpoint", scorer_endpoint, "Perplexity scorer URL");
  config_flag(pl, "--rounds", "R", "Augmentation rounds per document");
  config_flag(pl, "--q", "q", "Maximum n-gram length");
  config_flag(pl, "--j", "j_percent", "Percent of candidates kept");
  config_flag(pl, "--pc", "pc_percentile", "Cutoff percentile");
  config_flag(pl, "--preserve-budget", "preserve_budget", "Fraction of tokens kept unmasked");
  config_switch(pl, "--fixed-template", "fixed_template", "true", "Reuse one mask layout for all rounds");
  add_common(pl, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    std::cerr << app.help();
    return 2;
  }

  const auto started = Clock::now();
  try {
    const dale::PipelineConfig cfg = resolve_config(common, flags);
    Manifest m;
    if (!common.config_path.empty()) m.inputs.push_back(common.config_path);

    if (tok->parsed()) {
      m.subcommand = "tokenize";
      const auto corpus = read_corpus(corpus_path, common);
      Output out(out_path);
      dale::write_corpus(out.stream(), corpus, emit_tokens);
      out.close();
      m.inputs.push_back(corpus_path);
      if (!out_path.empty()) m.outputs.push_back(out_path);
      maybe_manifest(out_path, m, cfg, started);
    } else if (ext->parsed()) {
      m.subcommand = "extract-spans";
      const auto corpus = read_corpus(corpus_path, common);
      const auto spans = stage_extract(corpus, cfg, common.jobs);
      dale::save_span_set(out_path, spans);
      m.inputs.push_back(corpus_path);
      m.outputs.push_back(out_path);
      m.span_set_size = spans.size();
      m.extra["eligible_candidates"] = spans.eligible;
      m.extra["cutoffs"] = cutoffs_json(spans);
      maybe_manifest(out_path, m, cfg, started);
    } else if (sel->parsed()) {
      m.subcommand = "select-context";
      const auto corpus = read_corpus(corpus_path, common);
      auto provider = make_provider(common, cfg);
      std::vector<ContextPick> picks(corpus.documents.size());
      dale::parallel_for(picks.size(), common.jobs,
                         [&](std::size_t i) { picks[i] = pick_context(corpus.documents[i], *provider, cfg); });
      Output out(out_path);
      for (std::size_t i = 0; i < picks.size(); ++i) {
        nlohmann::ordered_json rec;
        rec["id"] = corpus.documents[i].id;
        rec["kept"] = picks[i].selection.kept_sentence_indices;
        rec["applied"] = picks[i].selection.applied;
        rec["token_count"] = picks[i].selection.token_count;
        out.stream() << rec.dump() << '\n';
      }
      out.close();
      m.inputs.push_back(corpus_path);
      if (!out_path.empty()) m.outputs.push_back(out_path);
      m.template_count = picks.size();
      maybe_manifest(out_path, m, cfg, started);
    } else if (bt->parsed()) {
      m.subcommand = "build-templates";
      const auto corpus = read_corpus(corpus_path, common);
      auto provider = make_provider(common, cfg);
      std::vector<dale::Template> templates;
      m.inputs.push_back(corpus_path);
      if (mode == "pretrain") {
        if (spans_path.empty()) dale::fail(ErrorCode::kInvalidConfig, "--mode pretrain needs --spans");
        const auto spans = dale::load_span_set(spans_path);
        m.inputs.push_back(spans_path);
        m.span_set_size = spans.size();
        templates = stage_pretrain(corpus, spans, *provider, cfg, common.jobs);
      } else {
        if (!spans_path.empty()) {
          m.span_set_size = dale::load_span_set(spans_path).size();
          m.inputs.push_back(spans_path);
        }
        templates = stage_finetune(corpus, *provider, cfg, common.jobs);
      }
      Output out(out_path);
      write_templates(out.stream(), templates);
      out.close();
      if (!out_path.empty()) m.outputs.push_back(out_path);
      m.template_count = templates.size();
      m.extra["mode"] = mode;
      maybe_manifest(out_path, m, cfg, started);
    } else if (aug->parsed()) {
      m.subcommand = "augment";
      const auto corpus = read_corpus(corpus_path, common);
      auto provider = make_provider(common, cfg);
      auto backend = make_backend(backend_kind, endpoint, cfg);
      m.inputs.push_back(corpus_path);
      if (!spans_path.empty()) {
        m.span_set_size = dale::load_span_set(spans_path).size();
        m.inputs.push_back(spans_path);
      }
      const auto templates = stage_finetune(corpus, *provider, cfg, common.jobs);
      const auto sets = stage_augment(corpus, templates, *backend, cfg, common.jobs);
      const auto sum = dale::emit_training_file(corpus, sets, out_path);
      m.outputs.push_back(out_path);
      m.template_count = templates.size();
      m.aug_count = sum.aug_count;
      m.extra["gold_count"] = sum.gold_count;
      m.extra["backend"] = backend_kind;
      maybe_manifest(out_path, m, cfg, started);
    } else if (ev->parsed()) {
      m.subcommand = "evaluate";
      const auto gold = read_corpus(source_path, common);
      const auto sets = dale::load_augmentations(augs_path);
      std::unique_ptr<dale::PerplexityScorer> scorer;
      if (!scorer_endpoint.empty()) scorer = std::make_unique<dale::PerplexityScorer>(scorer_endpoint);
      const auto report = stage_evaluate(gold, sets, scorer.get());
      write_json_file(report_path, report);
      m.inputs = {source_path, augs_path};
      m.outputs.push_back(report_path);
      for (const auto& s : sets) m.aug_count += s.augmentations.size();
      maybe_manifest(report_path, m, cfg, started);
    } else if (pl->parsed()) {
      m.subcommand = "pipeline";
      fs::create_directories(out_dir);
      const auto corpus = read_corpus(corpus_path, common);
      auto provider = make_provider(common, cfg);
      auto backend = make_backend(backend_kind, endpoint, cfg);
      const std::string spans_out = (fs::path(out_dir) / "spans.jsonl").string();
      const std::string templates_out = (fs::path(out_dir) / "templates.jsonl").string();
      const std::string train_out = (fs::path(out_dir) / "train_aug.jsonl").string();
      const std::string report_out = (fs::path(out_dir) / "report.json").string();

      const auto spans = stage_extract(corpus, cfg, common.jobs);
      dale::save_span_set(spans_out, spans);
      const auto templates = stage_finetune(corpus, *provider, cfg, common.jobs);
      {
        Output out(templates_out);
        write_templates(out.stream(), templates);
        out.close();
      }
      const auto sets = stage_augment(corpus, templates, *backend, cfg, common.jobs);
      const auto sum = dale::emit_training_file(corpus, sets, train_out);
      std::unique_ptr<dale::PerplexityScorer> scorer;
      if (!scorer_endpoint.empty()) scorer = std::make_unique<dale::PerplexityScorer>(scorer_endpoint);
      write_json_file(report_out, stage_evaluate(corpus, dale::load_augmentations(train_out), scorer.get()));

      m.inputs.push_back(corpus_path);
      m.outputs = {spans_out, templates_out, train_out, report_out};
      m.span_set_size = spans.size();
      m.template_count = templates.size();
      m.aug_count = sum.aug_count;
      m.extra["gold_count"] = sum.gold_count;
      m.extra["backend"] = backend_kind;
      m.extra["cutoffs"] = cutoffs_json(spans);
      write_manifest((fs::path(out_dir) / "manifest.json").string(), m, cfg, started);
    }
  } catch (const dale::Error& e) {
    print_error(e.code_name(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 0;
}
