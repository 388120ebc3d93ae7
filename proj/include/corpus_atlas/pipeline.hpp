#pragma once

// End-to-end run driven by one configuration file:
// ingest -> align -> split -> PCA (per embedding variant) -> k sweep ->
// final clustering at the selected k -> report -> optional t-SNE projection.
// Every stage writes its artifact to the output directory; manifest.json
// lists them with SHA-256 digests.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus_atlas/cluster.hpp"
#include "corpus_atlas/config.hpp"
#include "corpus_atlas/corpus.hpp"
#include "corpus_atlas/digest.hpp"
#include "corpus_atlas/embedstore.hpp"
#include "corpus_atlas/io.hpp"
#include "corpus_atlas/modelsel.hpp"
#include "corpus_atlas/project.hpp"
#include "corpus_atlas/reduce.hpp"
#include "corpus_atlas/report.hpp"

namespace corpus_atlas::pipeline {

struct PipelineConfig {
  std::filesystem::path corpus_path;
  std::vector<std::filesystem::path> embedding_paths;  // one per variant
  std::optional<std::filesystem::path> alias_path;
  corpus::FilterPolicy filter;
  std::uint64_t split_seed = 0;
  double pca_target = 0.95;
  bool pca_fit_on_all = false;
  std::size_t kmin = 2;
  std::size_t kmax = 50;
  std::uint64_t cluster_seed = 0;
  modelsel::SweepOptions sweep;
  std::size_t report_top = 3;
  std::size_t report_min_count = 10;
  bool report_on_test = true;
  bool project = false;
  project::TsneConfig tsne;
  std::size_t project_max_points = 5000;
  std::filesystem::path output_dir = "atlas-out";
};

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "input.corpus",       "input.embeddings",      "input.aliases",     "filter.min_words",
      "filter.min_category_count", "split.seed",     "pca.target",        "pca.fit_on",
      "sweep.kmin",         "sweep.kmax",            "sweep.seed",        "sweep.n_init",
      "sweep.max_iter",     "sweep.rel_tol",         "sweep.subsample_cap", "report.top",
      "report.min_count",   "report.on",             "project.enabled",   "project.perplexity",
      "project.iterations", "project.learning_rate", "project.seed",      "project.max_points",
      "output.dir"};
  return keys;
}

}  // namespace detail

/// Relative paths are resolved against `base_dir`.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                                   std::string_view source = "<config>") {
  const auto doc = config::Document::parse(text, source);
  for (const auto& key : doc.keys()) {
    if (!detail::known_keys().contains(key)) {
      throw std::runtime_error(std::string(source) + ": unknown key '" + key + "'");
    }
  }
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  PipelineConfig c;
  const std::string corpus_path = doc.get_string("input.corpus", "");
  if (corpus_path.empty()) throw std::runtime_error(std::string(source) + ": input.corpus is required");
  c.corpus_path = resolve(corpus_path);
  for (const auto& e : doc.get_strings("input.embeddings")) c.embedding_paths.push_back(resolve(e));
  if (c.embedding_paths.empty()) throw std::runtime_error(std::string(source) + ": input.embeddings is required");
  if (const auto a = doc.get_string("input.aliases", ""); !a.empty()) c.alias_path = resolve(a);

  c.filter.min_abstract_words = doc.get_count("filter.min_words", c.filter.min_abstract_words);
  c.filter.min_category_count = doc.get_count("filter.min_category_count", c.filter.min_category_count);
  c.split_seed = doc.get_count("split.seed", c.split_seed);
  c.pca_target = doc.get_real("pca.target", c.pca_target);
  const auto fit_on = doc.get_string("pca.fit_on", "train");
  if (fit_on != "train" && fit_on != "all") throw std::runtime_error("pca.fit_on must be 'train' or 'all'");
  c.pca_fit_on_all = fit_on == "all";
  c.kmin = doc.get_count("sweep.kmin", c.kmin);
  c.kmax = doc.get_count("sweep.kmax", c.kmax);
  c.cluster_seed = doc.get_count("sweep.seed", c.cluster_seed);
  c.sweep.n_init = doc.get_count("sweep.n_init", c.sweep.n_init);
  c.sweep.max_iter = doc.get_count("sweep.max_iter", c.sweep.max_iter);
  c.sweep.rel_tol = doc.get_real("sweep.rel_tol", c.sweep.rel_tol);
  c.sweep.subsample_cap = doc.get_count("sweep.subsample_cap", c.sweep.subsample_cap);
  c.report_top = doc.get_count("report.top", c.report_top);
  c.report_min_count = doc.get_count("report.min_count", c.report_min_count);
  const auto on = doc.get_string("report.on", "test");
  if (on != "test" && on != "all") throw std::runtime_error("report.on must be 'test' or 'all'");
  c.report_on_test = on == "test";
  c.project = doc.get_bool("project.enabled", false);
  c.tsne.perplexity = doc.get_real("project.perplexity", c.tsne.perplexity);
  c.tsne.iterations = doc.get_count("project.iterations", c.tsne.iterations);
  c.tsne.learning_rate = doc.get_real("project.learning_rate", c.tsne.learning_rate);
  c.tsne.seed = doc.get_count("project.seed", c.tsne.seed);
  c.project_max_points = doc.get_count("project.max_points", c.project_max_points);
  c.output_dir = resolve(doc.get_string("output.dir", "atlas-out"));
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.parent_path(), path.string());
}

inline void validate(const PipelineConfig& c) {
  namespace fs = std::filesystem;
  if (!fs::is_regular_file(c.corpus_path)) throw std::runtime_error("corpus file '" + c.corpus_path.string() + "' not found");
  for (const auto& p : c.embedding_paths) {
    if (!fs::is_regular_file(p)) throw std::runtime_error("embedding file '" + p.string() + "' not found");
  }
  if (c.alias_path && !fs::is_regular_file(*c.alias_path)) {
    throw std::runtime_error("alias file '" + c.alias_path->string() + "' not found");
  }
  if (c.filter.min_abstract_words == 0 || c.filter.min_category_count == 0) {
    throw std::runtime_error("filter thresholds must be positive");
  }
  if (c.kmin < 2 || c.kmax < c.kmin) throw std::runtime_error("sweep range must satisfy 2 <= kmin <= kmax");
  if (!(c.pca_target > 0 && c.pca_target <= 1)) throw std::runtime_error("pca.target must lie in (0, 1]");
  if (c.report_top == 0) throw std::runtime_error("report.top must be positive");
}

struct Artifact {
  std::string name;
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
  std::size_t files = 0;
};

struct VariantSummary {
  std::string variant;
  std::size_t input_dim = 0;
  std::size_t retained_dim = 0;
  std::size_t best_k = 0;
  double best_silhouette = 0;
};

struct RunOutcome {
  bool ok = false;
  std::string failed_stage;
  std::string error;
  std::vector<Artifact> artifacts;
  std::vector<std::string> warnings;
  std::vector<VariantSummary> variants;
  std::string selected_variant;
  std::size_t best_k = 0;
  double val_silhouette = 0;
  double test_silhouette = 0;
  std::size_t records = 0;
  std::filesystem::path manifest_path;
};

namespace detail {

inline std::string file_tag(const std::string& variant, std::size_t index, std::set<std::string>& used) {
  std::string tag;
  for (char c : variant) {
    tag += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  }
  if (tag.empty()) tag = "emb" + std::to_string(index);
  std::string unique = tag;
  for (std::size_t n = 2; used.contains(unique); ++n) unique = tag + "-" + std::to_string(n);
  used.insert(unique);
  return unique;
}

inline nlohmann::ordered_json echo_config(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["filter"] = {{"min_words", c.filter.min_abstract_words}, {"min_category_count", c.filter.min_category_count}};
  j["split"] = {{"seed", c.split_seed}};
  j["pca"] = {{"target", c.pca_target}, {"fit_on", c.pca_fit_on_all ? "all" : "train"}};
  j["sweep"] = {{"kmin", c.kmin},
                {"kmax", c.kmax},
                {"seed", c.cluster_seed},
                {"n_init", c.sweep.n_init},
                {"max_iter", c.sweep.max_iter},
                {"rel_tol", c.sweep.rel_tol},
                {"subsample_cap", c.sweep.subsample_cap}};
  j["report"] = {{"top", c.report_top}, {"min_count", c.report_min_count}, {"on", c.report_on_test ? "test" : "all"}};
  j["project"] = {{"enabled", c.project},
                  {"perplexity", c.tsne.perplexity},
                  {"iterations", c.tsne.iterations},
                  {"seed", c.tsne.seed},
                  {"max_points", c.project_max_points}};
  return j;
}

inline void write_manifest(const PipelineConfig& c, const RunOutcome& r) {
  nlohmann::ordered_json m;
  m["format"] = "corpus-atlas-manifest/1";
  m["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) {
    m["failed_stage"] = r.failed_stage;
    m["error"] = r.error;
    m["partial"] = true;
  }
  m["config"] = echo_config(c);
  nlohmann::ordered_json summary;
  summary["records"] = r.records;
  summary["selected_variant"] = r.selected_variant;
  summary["best_k"] = r.best_k;
  summary["silhouette_val"] = r.val_silhouette;
  summary["silhouette_test"] = r.test_silhouette;
  summary["variants"] = nlohmann::ordered_json::array();
  for (const auto& v : r.variants) {
    summary["variants"].push_back({{"variant", v.variant},
                                   {"input_dim", v.input_dim},
                                   {"retained_dim", v.retained_dim},
                                   {"best_k", v.best_k},
                                   {"best_silhouette", v.best_silhouette}});
  }
  m["summary"] = summary;
  m["warnings"] = r.warnings;
  m["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& a : r.artifacts) {
    m["artifacts"].push_back(
        {{"name", a.name}, {"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}, {"files", a.files}, {"complete", true}});
  }
  io::write_file(r.manifest_path, m.dump(2) + "\n");
}

}  // namespace detail

inline RunOutcome run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
  namespace fs = std::filesystem;
  RunOutcome out;
  out.manifest_path = cfg.output_dir / "manifest.json";
  std::string stage = "config";
  auto say = [&](const std::string& msg) {
    if (log) *log << "[" << stage << "] " << msg << "\n";
  };
  auto record = [&](const std::string& name, const fs::path& rel) {
    const auto d = digest::tree_digest(cfg.output_dir / rel);
    out.artifacts.push_back({name, rel.generic_string(), d.sha256, d.bytes, d.files});
  };

  try {
    validate(cfg);
    fs::create_directories(cfg.output_dir);
    const corpus::AliasMap aliases = cfg.alias_path ? corpus::load_alias_file(*cfg.alias_path) : corpus::default_aliases();

    stage = "ingest";
    corpus::Corpus corpus = corpus::load_corpus(cfg.corpus_path, cfg.filter);
    corpus::save_corpus(corpus, cfg.output_dir / "corpus.atlas");
    record("corpus", "corpus.atlas");
    say(std::to_string(corpus.size()) + " records after filtering");
    if (corpus.provenance.malformed > 0) {
      out.warnings.push_back(std::to_string(corpus.provenance.malformed) + " malformed input lines skipped");
    }

    stage = "align";
    std::vector<embedstore::EmbeddingMatrix> variants;
    std::unordered_map<std::string, std::size_t> coverage;
    for (const auto& path : cfg.embedding_paths) {
      auto m = embedstore::read_embeddings(path);
      auto a = embedstore::align(corpus, m);
      if (!a.missing_embedding.empty()) {
        out.warnings.push_back(path.filename().string() + ": " + std::to_string(a.missing_embedding.size()) +
                               " corpus records have no embedding");
      }
      if (!a.missing_in_corpus.empty()) {
        out.warnings.push_back(path.filename().string() + ": " + std::to_string(a.missing_in_corpus.size()) +
                               " embeddings have no corpus record");
      }
      for (const auto& id : a.matrix.ids) ++coverage[id];
      variants.push_back(std::move(a.matrix));
    }
    std::vector<std::string> common;
    for (const auto& r : corpus.records) {
      if (coverage[r.id] == variants.size()) common.push_back(r.id);
    }
    if (common.size() != corpus.size()) corpus = corpus::restrict_to(corpus, common);
    out.records = common.size();

    stage = "split";
    const corpus::SplitIndex split = corpus::split_ids(common, cfg.split_seed);
    corpus::save_split(split, cfg.output_dir / "split.json");
    record("split", "split.json");

    std::set<std::string> used_tags;
    std::vector<std::string> tags;
    std::vector<embedstore::EmbeddingMatrix> reduced_all;
    std::vector<modelsel::SweepResult> sweeps;
    const auto ks = modelsel::k_range(cfg.kmin, cfg.kmax);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const std::string tag = detail::file_tag(variants[v].variant, v, used_tags);
      tags.push_back(tag);
      const auto aligned = embedstore::select(variants[v], common);

      stage = "reduce:" + tag;
      const auto fit_rows = cfg.pca_fit_on_all ? aligned : embedstore::select(aligned, split.train_ids);
      const auto pca = reduce::fit(fit_rows, cfg.pca_target);
      auto reduced = reduce::transform(pca, aligned);
      reduce::save_model(pca, cfg.output_dir / ("pca." + tag + ".json"));
      embedstore::write_embeddings(reduced, cfg.output_dir / ("reduced." + tag + ".emb1"));
      record("pca:" + tag, "pca." + tag + ".json");
      record("reduced:" + tag, "reduced." + tag + ".emb1");
      say(std::to_string(aligned.dim()) + " -> " + std::to_string(pca.retained()) + " dimensions");

      stage = "sweep:" + tag;
      const auto train = embedstore::select(reduced, split.train_ids);
      const auto val = embedstore::select(reduced, split.val_ids);
      auto s = modelsel::sweep(train.values, val.values, ks, cfg.cluster_seed, cfg.sweep);
      for (const auto& w : s.warnings) out.warnings.push_back(tag + ": " + w);
      const fs::path dir = "sweep." + tag;
      io::write_file(cfg.output_dir / dir / "sweep.csv", modelsel::sweep_csv(s));
      io::write_file(cfg.output_dir / dir / "sweep_plot.csv", modelsel::sweep_plot_csv(s));
      record("sweep:" + tag, dir);
      const auto best = static_cast<std::size_t>(std::find(s.k_values.begin(), s.k_values.end(), s.best_k) - s.k_values.begin());
      out.variants.push_back({variants[v].variant, aligned.dim(), pca.retained(), s.best_k, s.silhouette_val[best]});
      say("best k = " + std::to_string(s.best_k) + ", silhouette " + io::format_fixed(s.silhouette_val[best], 4));
      reduced_all.push_back(std::move(reduced));
      sweeps.push_back(std::move(s));
    }

    std::size_t chosen = 0;
    for (std::size_t v = 1; v < out.variants.size(); ++v) {
      if (out.variants[v].best_silhouette > out.variants[chosen].best_silhouette) chosen = v;
    }
    out.selected_variant = out.variants[chosen].variant;
    out.best_k = out.variants[chosen].best_k;
    out.val_silhouette = out.variants[chosen].best_silhouette;

    stage = "cluster";
    const auto& reduced = reduced_all[chosen];
    const auto train = embedstore::select(reduced, split.train_ids);
    cluster::KMeansParams params{out.best_k, cfg.cluster_seed, cfg.sweep.n_init, cfg.sweep.max_iter, cfg.sweep.rel_tol};
    const auto model = cluster::fit(train.values, params);
    cluster::save_model(model, cfg.output_dir / "model.kmeans");
    record("model", "model.kmeans");
    const auto labels = cluster::predict(model, reduced.values);
    cluster::LabelTable table;
    std::unordered_map<std::string, int> label_of;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      table.emplace_back(reduced.ids[i], labels[i]);
      label_of.emplace(reduced.ids[i], labels[i]);
    }
    cluster::write_labels_csv(table, cfg.output_dir / "labels.csv");
    record("labels", "labels.csv");
    {
      const auto test = embedstore::select(reduced, split.test_ids);
      std::vector<int> test_labels;
      for (const auto& id : split.test_ids) test_labels.push_back(label_of.at(id));
      if (test.rows() >= 3 && modelsel::count_distinct(test_labels) >= 2) {
        out.test_silhouette = modelsel::silhouette_capped(test.values, std::span<const int>(test_labels),
                                                          cfg.sweep.subsample_cap, cfg.cluster_seed)
                                  .mean;
      } else {
        out.warnings.push_back("test silhouette undefined (fewer than 2 clusters among test rows)");
      }
    }

    stage = "report";
    cluster::LabelTable reported;
    if (cfg.report_on_test) {
      for (const auto& id : split.test_ids) reported.emplace_back(id, label_of.at(id));
      std::sort(reported.begin(), reported.end());
    } else {
      reported = table;
    }
    std::vector<int> all_clusters(out.best_k);
    for (std::size_t j = 0; j < out.best_k; ++j) all_clusters[j] = static_cast<int>(j);
    const auto rep = report::build_report(reported, corpus, cfg.report_top, cfg.report_min_count, aliases, all_clusters);
    report::emit_report(rep, cfg.output_dir / "report");
    record("report", "report");

    if (cfg.project) {
      stage = "project";
      std::vector<std::string> ids;
      for (const auto& [id, c] : reported) ids.push_back(id);
      if (ids.size() > cfg.project_max_points) {
        const auto keep = sample_indices(ids.size(), cfg.project_max_points, cfg.tsne.seed);
        std::vector<std::string> sub;
        for (auto i : keep) sub.push_back(ids[i]);
        ids = std::move(sub);
      }
      const auto rows = embedstore::select(reduced, ids);
      std::vector<std::uint64_t> keys;
      for (const auto& id : ids) keys.push_back(project::key_of(id));
      const auto y = project::tsne(rows.values, cfg.tsne, keys);
      std::unordered_map<std::string_view, const corpus::PaperRecord*> by_id;
      for (const auto& r : corpus.records) by_id.emplace(r.id, &r);
      std::string csv = "id,x,y,cluster,category\n";
      for (std::size_t i = 0; i < ids.size(); ++i) {
        csv += io::csv_field(ids[i]) + "," + io::format_real(y(i, 0)) + "," + io::format_real(y(i, 1)) + "," +
               std::to_string(label_of.at(ids[i])) + "," + io::csv_field(by_id.at(ids[i])->categories.front()) + "\n";
      }
      io::write_file(cfg.output_dir / "projection.csv", csv);
      record("projection", "projection.csv");
    }
    out.ok = true;
    stage = "done";
  } catch (const std::exception& e) {
    out.ok = false;
    out.failed_stage = stage;
    out.error = e.what();
  }
  detail::write_manifest(cfg, out);
  return out;
}

}  // namespace corpus_atlas::pipeline
