#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "corpus_atlas/cluster.hpp"
#include "corpus_atlas/corpus.hpp"
#include "corpus_atlas/embedstore.hpp"
#include "corpus_atlas/io.hpp"
#include "corpus_atlas/modelsel.hpp"
#include "corpus_atlas/pipeline.hpp"
#include "corpus_atlas/project.hpp"
#include "corpus_atlas/reduce.hpp"
#include "corpus_atlas/report.hpp"

namespace fs = std::filesystem;
namespace ca = corpus_atlas;

namespace {

struct IngestArgs {
  std::string input, out;
  ca::corpus::FilterPolicy policy;
};

struct StatsArgs {
  std::string atlas, csv_dir;
};

struct SplitArgs {
  std::string corpus, emb, out_dir;
  std::uint64_t seed = 0;
};

struct ReduceArgs {
  std::string in, out, model, split, fit_on = "train";
  double target = 0.95;
};

struct ClusterArgs {
  std::string in, out, labels;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
};

struct SweepArgs {
  std::string train, val, out, plot;
  std::size_t kmin = 2, kmax = 50;
  std::uint64_t seed = 0;
  ca::modelsel::SweepOptions options;
};

struct ProjectArgs {
  std::string in, out, labels, corpus;
  ca::project::TsneConfig config;
  std::size_t max_points = 5000;
};

struct ReportArgs {
  std::string labels, corpus, out, aliases;
  std::size_t top = 3, min_count = 10;
};

void log_filters(const ca::corpus::FilterLog& log) {
  std::cerr << "read " << log.input_lines << " lines: " << log.malformed << " malformed, " << log.duplicates
            << " duplicates, " << log.withdrawn << " withdrawn, " << log.short_abstracts << " short\n";
  if (!log.stripped_categories.empty()) {
    std::cerr << "stripped " << log.stripped_categories.size() << " rare categories (" << log.stripped_labels
              << " labels); " << log.unlabeled_records << " records left unlabeled\n";
  }
  std::cerr << "kept " << log.kept << " records\n";
}

int run_ingest(const IngestArgs& a) {
  const auto corpus = ca::corpus::load_corpus(a.input, a.policy);
  log_filters(corpus.provenance);
  ca::corpus::save_corpus(corpus, a.out);
  return 0;
}

std::string stats_text(const ca::corpus::Corpus& corpus) {
  const auto s = ca::corpus::length_stats(corpus);
  const auto h = ca::corpus::category_histograms(corpus);
  std::string out = "Abstract length (words)\n";
  auto row = [&](const std::string& name, const std::string& value) {
    out += "  " + name + std::string(8 - std::min<std::size_t>(8, name.size()), ' ') + value + "\n";
  };
  row("count", std::to_string(s.n));
  row("mean", ca::io::format_fixed(s.mean, 2));
  row("std", ca::io::format_fixed(s.std, 2));
  row("min", ca::io::format_fixed(s.min, 0));
  row("25%", ca::io::format_fixed(s.q25, 2));
  row("50%", ca::io::format_fixed(s.q50, 2));
  row("75%", ca::io::format_fixed(s.q75, 2));
  row("max", ca::io::format_fixed(s.max, 0));

  std::size_t width = 8;
  for (const auto& [code, n] : h.ranked) width = std::max(width, code.size());
  out += "\nCategories (" + std::to_string(h.ranked.size()) + ")\n";
  for (const auto& [code, n] : h.ranked) {
    out += "  " + code + std::string(width - code.size() + 2, ' ') + std::to_string(n) + "\n";
  }
  out += "\nCategories per paper\n";
  for (const auto& [m, n] : h.multiplicity) out += "  " + std::to_string(m) + "  " + std::to_string(n) + "\n";
  return out;
}

int run_stats(const StatsArgs& a) {
  const auto corpus = ca::corpus::load_atlas(a.atlas);
  std::cout << stats_text(corpus);
  if (!a.csv_dir.empty()) {
    const fs::path dir(a.csv_dir);
    const auto s = ca::corpus::length_stats(corpus);
    std::string lengths = "statistic,value\n";
    lengths += "count," + std::to_string(s.n) + "\n";
    lengths += "mean," + ca::io::format_real(s.mean) + "\n";
    lengths += "std," + ca::io::format_real(s.std) + "\n";
    lengths += "min," + ca::io::format_real(s.min) + "\n";
    lengths += "25%," + ca::io::format_real(s.q25) + "\n";
    lengths += "50%," + ca::io::format_real(s.q50) + "\n";
    lengths += "75%," + ca::io::format_real(s.q75) + "\n";
    lengths += "max," + ca::io::format_real(s.max) + "\n";
    ca::io::write_file(dir / "lengths.csv", lengths);
    const auto h = ca::corpus::category_histograms(corpus);
    std::string ranked = "category,count\n";
    for (const auto& [code, n] : h.ranked) ranked += ca::io::csv_field(code) + "," + std::to_string(n) + "\n";
    ca::io::write_file(dir / "categories.csv", ranked);
    std::string multi = "categories_per_paper,papers\n";
    for (const auto& [m, n] : h.multiplicity) multi += std::to_string(m) + "," + std::to_string(n) + "\n";
    ca::io::write_file(dir / "multiplicity.csv", multi);
  }
  return 0;
}

int run_split(const SplitArgs& a) {
  const auto corpus = ca::corpus::load_atlas(a.corpus);
  const fs::path dir(a.out_dir);
  if (a.emb.empty()) {
    ca::corpus::save_split(ca::corpus::split(corpus, a.seed), dir / "split.json");
    return 0;
  }
  const auto aligned = ca::embedstore::align(corpus, ca::embedstore::read_embeddings(a.emb));
  if (!aligned.missing_embedding.empty()) {
    std::cerr << "warning: " << aligned.missing_embedding.size() << " corpus records have no embedding\n";
  }
  const auto s = ca::corpus::split_ids(aligned.matrix.ids, a.seed);
  ca::corpus::save_split(s, dir / "split.json");
  ca::embedstore::write_embeddings(ca::embedstore::select(aligned.matrix, s.train_ids), dir / "train.emb1");
  ca::embedstore::write_embeddings(ca::embedstore::select(aligned.matrix, s.val_ids), dir / "val.emb1");
  ca::embedstore::write_embeddings(ca::embedstore::select(aligned.matrix, s.test_ids), dir / "test.emb1");
  return 0;
}

int run_reduce(const ReduceArgs& a) {
  const auto x = ca::embedstore::read_embeddings(a.in);
  auto fit_rows = x;
  if (a.fit_on == "train") {
    if (!a.split.empty()) fit_rows = ca::embedstore::select(x, ca::corpus::load_split(a.split).train_ids);
  } else if (a.fit_on != "all") {
    throw std::invalid_argument("--fit-on must be 'train' or 'all'");
  }
  const auto model = ca::reduce::fit(fit_rows, a.target);
  std::cerr << "retained " << model.retained() << " of " << model.input_dim() << " dimensions (fit on "
            << model.fit_rows << " rows)\n";
  ca::embedstore::write_embeddings(ca::reduce::transform(model, x), a.out);
  if (!a.model.empty()) ca::reduce::save_model(model, a.model);
  return 0;
}

int run_cluster(const ClusterArgs& a) {
  const auto x = ca::embedstore::read_embeddings(a.in);
  const ca::cluster::KMeansParams params{a.k, a.seed, a.n_init, a.max_iter, 1e-4};
  const auto fit = ca::cluster::fit_detailed(x.values, params);
  std::cerr << "k=" << a.k << " wcss=" << ca::io::format_real(fit.model.wcss) << " after " << fit.model.iterations
            << " iterations\n";
  ca::cluster::save_model(fit.model, a.out);
  if (!a.labels.empty()) {
    ca::cluster::LabelTable table;
    for (std::size_t i = 0; i < x.rows(); ++i) table.emplace_back(x.ids[i], fit.labels[i]);
    ca::cluster::write_labels_csv(table, a.labels);
  }
  return 0;
}

int run_sweep(const SweepArgs& a) {
  const auto train = ca::embedstore::read_embeddings(a.train);
  const auto val = ca::embedstore::read_embeddings(a.val);
  const auto ks = ca::modelsel::k_range(a.kmin, a.kmax);
  const auto s = ca::modelsel::sweep(train.values, val.values, ks, a.seed, a.options);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "best k = " << s.best_k << "\n";
  ca::io::write_file(a.out, ca::modelsel::sweep_csv(s));
  const fs::path plot = a.plot.empty() ? fs::path(a.out).replace_extension(".plot.csv") : fs::path(a.plot);
  ca::io::write_file(plot, ca::modelsel::sweep_plot_csv(s));
  return 0;
}

int run_project(const ProjectArgs& a) {
  auto x = ca::embedstore::read_embeddings(a.in);
  if (x.rows() > a.max_points) {
    const auto keep = ca::sample_indices(x.rows(), a.max_points, a.config.seed);
    std::vector<std::string> ids;
    for (auto i : keep) ids.push_back(x.ids[i]);
    x = ca::embedstore::select(x, ids);
    std::cerr << "projecting a subsample of " << x.rows() << " rows\n";
  }
  std::vector<std::uint64_t> keys;
  for (const auto& id : x.ids) keys.push_back(ca::project::key_of(id));
  const auto y = ca::project::tsne(x.values, a.config, keys);

  std::unordered_map<std::string, int> cluster_of;
  if (!a.labels.empty()) {
    for (const auto& [id, c] : ca::cluster::read_labels_csv(a.labels)) cluster_of.emplace(id, c);
  }
  std::unordered_map<std::string, std::string> category_of;
  if (!a.corpus.empty()) {
    for (const auto& r : ca::corpus::load_atlas(a.corpus).records) category_of.emplace(r.id, r.categories.front());
  }
  std::string csv = "id,x,y";
  if (!a.labels.empty()) csv += ",cluster";
  if (!a.corpus.empty()) csv += ",category";
  csv += "\n";
  for (std::size_t i = 0; i < x.rows(); ++i) {
    csv += ca::io::csv_field(x.ids[i]) + "," + ca::io::format_real(y(i, 0)) + "," + ca::io::format_real(y(i, 1));
    if (!a.labels.empty()) {
      const auto it = cluster_of.find(x.ids[i]);
      csv += "," + (it == cluster_of.end() ? std::string() : std::to_string(it->second));
    }
    if (!a.corpus.empty()) {
      const auto it = category_of.find(x.ids[i]);
      csv += "," + (it == category_of.end() ? std::string() : ca::io::csv_field(it->second));
    }
    csv += "\n";
  }
  ca::io::write_file(a.out, csv);
  return 0;
}

int run_report(const ReportArgs& a) {
  const auto labels = ca::cluster::read_labels_csv(a.labels);
  const auto corpus = ca::corpus::load_atlas(a.corpus);
  const auto aliases = a.aliases.empty() ? ca::corpus::default_aliases() : ca::corpus::load_alias_file(a.aliases);
  const auto r = ca::report::build_report(labels, corpus, a.top, a.min_count, aliases);
  ca::report::emit_report(r, a.out);
  std::cout << ca::report::format_table(r);
  return 0;
}

int run_pipeline(const std::string& config_path) {
  const auto cfg = ca::pipeline::load_config(config_path);
  const auto outcome = ca::pipeline::run_pipeline(cfg, &std::cerr);
  for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << "\n";
  if (!outcome.ok) {
    std::cerr << "error in stage '" << outcome.failed_stage << "': " << outcome.error << "\n";
    return 1;
  }
  std::cerr << "selected " << outcome.selected_variant << " with k = " << outcome.best_k << "; manifest at "
            << outcome.manifest_path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Embed, reduce, cluster and report on a corpus of paper abstracts"};
  app.require_subcommand(1);
  std::function<int()> action;

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Filter raw JSONL records into a corpus file");
  c_ingest->add_option("--input", ingest.input, "JSONL records")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--min-words", ingest.policy.min_abstract_words, "Minimum abstract length in words")
      ->capture_default_str();
  c_ingest->add_option("--min-cat-count", ingest.policy.min_category_count, "Minimum papers per category")
      ->capture_default_str();
  c_ingest->add_option("--out", ingest.out, "Output corpus file")->required();
  c_ingest->callback([&] { action = [&] { return run_ingest(ingest); }; });

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Print descriptive statistics of a corpus");
  c_stats->add_option("corpus", stats.atlas, "Corpus file")->required()->check(CLI::ExistingFile);
  c_stats->add_option("--csv", stats.csv_dir, "Also write CSV tables into this directory");
  c_stats->callback([&] { action = [&] { return run_stats(stats); }; });

  SplitArgs split;
  auto* c_split = app.add_subcommand("split", "Split into train, validation and test sets");
  c_split->add_option("--corpus", split.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  c_split->add_option("--emb", split.emb, "Embeddings to partition alongside")->check(CLI::ExistingFile);
  c_split->add_option("--seed", split.seed, "Shuffle seed")->capture_default_str();
  c_split->add_option("--out-dir", split.out_dir, "Output directory")->required();
  c_split->callback([&] { action = [&] { return run_split(split); }; });

  ReduceArgs reduce;
  auto* c_reduce = app.add_subcommand("reduce", "Project embeddings onto leading principal components");
  c_reduce->add_option("--in", reduce.in, "Input embeddings")->required()->check(CLI::ExistingFile);
  c_reduce->add_option("--target", reduce.target, "Cumulative explained-variance target")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  c_reduce->add_option("--out", reduce.out, "Reduced embeddings")->required();
  c_reduce->add_option("--model", reduce.model, "Write the fitted PCA model here");
  c_reduce->add_option("--split", reduce.split, "split.json selecting the rows to fit on")->check(CLI::ExistingFile);
  c_reduce->add_option("--fit-on", reduce.fit_on, "Rows to fit on: train or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "all"}));
  c_reduce->callback([&] { action = [&] { return run_reduce(reduce); }; });

  ClusterArgs cluster;
  auto* c_cluster = app.add_subcommand("cluster", "Fit K-Means");
  c_cluster->add_option("--in", cluster.in, "Input embeddings")->required()->check(CLI::ExistingFile);
  c_cluster->add_option("--k", cluster.k, "Number of clusters")->required();
  c_cluster->add_option("--seed", cluster.seed, "Seed")->capture_default_str();
  c_cluster->add_option("--n-init", cluster.n_init, "Restarts")->capture_default_str();
  c_cluster->add_option("--max-iter", cluster.max_iter, "Iterations per restart")->capture_default_str();
  c_cluster->add_option("--out", cluster.out, "Model file")->required();
  c_cluster->add_option("--labels", cluster.labels, "Write id,cluster labels here");
  c_cluster->callback([&] { action = [&] { return run_cluster(cluster); }; });

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Choose k by validation silhouette");
  c_sweep->add_option("--train", sweep.train, "Training embeddings")->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--val", sweep.val, "Validation embeddings")->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--kmin", sweep.kmin, "Smallest k")->capture_default_str();
  c_sweep->add_option("--kmax", sweep.kmax, "Largest k")->capture_default_str();
  c_sweep->add_option("--seed", sweep.seed, "Seed")->capture_default_str();
  c_sweep->add_option("--n-init", sweep.options.n_init, "Restarts per k")->capture_default_str();
  c_sweep->add_option("--subsample-cap", sweep.options.subsample_cap, "Silhouette subsample size")
      ->capture_default_str();
  c_sweep->add_option("--out", sweep.out, "sweep.csv")->required();
  c_sweep->add_option("--plot", sweep.plot, "Plot data (default: --out with extension .plot.csv)");
  c_sweep->callback([&] { action = [&] { return run_sweep(sweep); }; });

  ProjectArgs project;
  auto* c_project = app.add_subcommand("project", "Two-dimensional t-SNE projection");
  c_project->add_option("--in", project.in, "Input embeddings")->required()->check(CLI::ExistingFile);
  c_project->add_option("--perplexity", project.config.perplexity, "Perplexity")->capture_default_str();
  c_project->add_option("--iterations", project.config.iterations, "Iterations")->capture_default_str();
  c_project->add_option("--seed", project.config.seed, "Seed")->capture_default_str();
  c_project->add_option("--max-points", project.max_points, "Subsample larger inputs to this size")
      ->capture_default_str();
  c_project->add_option("--out", project.out, "Output CSV")->required();
  c_project->add_option("--labels", project.labels, "Join cluster labels")->check(CLI::ExistingFile);
  c_project->add_option("--corpus", project.corpus, "Join primary categories")->check(CLI::ExistingFile);
  c_project->callback([&] { action = [&] { return run_project(project); }; });

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "Cross-tabulate clusters against categories");
  c_report->add_option("--labels", report.labels, "labels.csv")->required()->check(CLI::ExistingFile);
  c_report->add_option("--corpus", report.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  c_report->add_option("--min-count", report.min_count, "Minimum papers per listed category")
      ->capture_default_str();
  c_report->add_option("--top", report.top, "Categories listed per cluster")->capture_default_str();
  c_report->add_option("--aliases", report.aliases, "Macro-category alias file")->check(CLI::ExistingFile);
  c_report->add_option("--out", report.out, "Output directory")->required();
  c_report->callback([&] { action = [&] { return run_report(report); }; });

  std::string config_path;
  auto* c_run = app.add_subcommand("run", "Run the whole pipeline from a configuration file");
  c_run->add_option("--config", config_path, "Pipeline configuration (TOML)")->required()->check(CLI::ExistingFile);
  c_run->callback([&] { action = [&] { return run_pipeline(config_path); }; });

  CLI11_PARSE(app, argc, argv);
  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
