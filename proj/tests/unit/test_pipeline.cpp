#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "corpus_atlas/io.hpp"
#include "corpus_atlas/pipeline.hpp"
#include "helpers.hpp"

namespace pipeline = corpus_atlas::pipeline;
namespace io = corpus_atlas::io;
using testing_support::TempDir;

namespace {

const std::filesystem::path kFixture = CORPUS_ATLAS_FIXTURE_DIR;

pipeline::PipelineConfig fixture_config(const std::filesystem::path& out) {
  auto c = pipeline::load_config(kFixture / "pipeline.toml");
  c.output_dir = out;
  return c;
}

nlohmann::json manifest(const std::filesystem::path& dir) {
  return nlohmann::json::parse(io::read_file(dir / "manifest.json"));
}

}  // namespace

TEST(Pipeline, FixtureRunRecoversFiveTopics) {
  TempDir dir("pipe");
  std::ostringstream log;
  const auto r = pipeline::run_pipeline(fixture_config(dir.path()), &log);
  ASSERT_TRUE(r.ok) << r.failed_stage << ": " << r.error;
  EXPECT_EQ(r.best_k, 5u);
  EXPECT_GT(r.val_silhouette, 0.5);
  EXPECT_GT(r.test_silhouette, 0.5);
  EXPECT_EQ(r.selected_variant, "synthetic");
  EXPECT_NE(log.str().find("[sweep:synthetic] best k = 5"), std::string::npos) << log.str();

  std::vector<std::string> names;
  for (const auto& a : r.artifacts) names.push_back(a.name);
  EXPECT_EQ(names, (std::vector<std::string>{"corpus", "split", "pca:synthetic", "reduced:synthetic",
                                             "sweep:synthetic", "model", "labels", "report"}));
  for (const auto& a : r.artifacts) EXPECT_TRUE(std::filesystem::exists(dir.path() / a.path)) << a.path;

  const auto m = manifest(dir.path());
  EXPECT_EQ(m["format"], "corpus-atlas-manifest/1");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["summary"]["best_k"], 5);
  EXPECT_EQ(m["artifacts"].size(), 8u);
  for (const auto& a : m["artifacts"]) EXPECT_TRUE(a["complete"].get<bool>());
  EXPECT_EQ(m["config"]["filter"]["min_words"], 31);
  EXPECT_EQ(m["config"]["pca"]["target"], 0.95);
}

TEST(Pipeline, LabelsMatchPlantedTopicsClusterByCluster) {
  TempDir dir("pipe-labels");
  const auto r = pipeline::run_pipeline(fixture_config(dir.path()));
  ASSERT_TRUE(r.ok) << r.error;
  std::map<std::string, std::string> truth;
  const auto text = io::read_file(kFixture / "labels.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto f = io::split_csv_line(line);
    truth[f[0]] = f[1];
  }
  std::map<int, std::map<std::string, int>> per_cluster;
  for (const auto& [id, c] : corpus_atlas::cluster::read_labels_csv(dir / "labels.csv")) ++per_cluster[c][truth.at(id)];
  ASSERT_EQ(per_cluster.size(), 5u);
  std::set<std::string> dominant;
  for (const auto& [c, counts] : per_cluster) {
    const auto best = std::max_element(counts.begin(), counts.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    dominant.insert(best->first);
    int total = 0;
    for (const auto& [t, n] : counts) total += n;
    EXPECT_GE(best->second, 0.95 * total);
  }
  EXPECT_EQ(dominant.size(), 5u);
}

TEST(Pipeline, RepeatRunsAreByteIdentical) {
  TempDir a("pipe-a"), b("pipe-b");
  auto ca = fixture_config(a.path());
  auto cb = fixture_config(b.path());
  ca.project = cb.project = true;
  ca.tsne.iterations = cb.tsne.iterations = 300;
  const auto ra = pipeline::run_pipeline(ca);
  const auto rb = pipeline::run_pipeline(cb);
  ASSERT_TRUE(ra.ok && rb.ok) << ra.error << rb.error;
  ASSERT_EQ(ra.artifacts.size(), 9u);
  ASSERT_EQ(ra.artifacts.size(), rb.artifacts.size());
  for (std::size_t i = 0; i < ra.artifacts.size(); ++i) {
    EXPECT_EQ(ra.artifacts[i].sha256, rb.artifacts[i].sha256) << ra.artifacts[i].name;
  }
  EXPECT_EQ(io::read_file(a / "manifest.json"), io::read_file(b / "manifest.json"));
  EXPECT_EQ(io::read_file(a / "projection.csv").substr(0, 24), "id,x,y,cluster,category\n");
}

TEST(Pipeline, SeedChangesSplitButNotTheAnswer) {
  TempDir dir("pipe-seed");
  auto c = fixture_config(dir.path());
  c.split_seed = 7;
  const auto r = pipeline::run_pipeline(c);
  ASSERT_TRUE(r.ok) << r.error;
  EXPECT_EQ(r.best_k, 5u);
}

TEST(Pipeline, KBeyondTrainingRowsIsSkippedWithWarning) {
  TempDir first("pipe-kmax0"), dir("pipe-kmax");
  const auto probe = pipeline::run_pipeline(fixture_config(first.path()));
  ASSERT_TRUE(probe.ok) << probe.error;
  const std::size_t n = probe.records;
  const std::size_t train = n - (n * 10 + 99) / 100 - (n * 18 + 99) / 100;
  auto c = fixture_config(dir.path());
  c.kmin = train - 1;
  c.kmax = train + 2;
  c.sweep.n_init = 1;
  const auto r = pipeline::run_pipeline(c);
  ASSERT_TRUE(r.ok) << r.error;
  const auto skipped = std::count_if(r.warnings.begin(), r.warnings.end(),
                                     [](const std::string& w) { return w.find("exceeds training rows") != std::string::npos; });
  EXPECT_EQ(skipped, 2);
  EXPECT_LE(r.best_k, train);
}

TEST(Pipeline, FailureRecordsStageInManifest) {
  TempDir dir("pipe-fail");
  io::write_file(dir / "bad.emb1", "EMBV0001garbage");
  auto c = fixture_config(dir / "out");
  c.embedding_paths = {dir / "bad.emb1"};
  const auto r = pipeline::run_pipeline(c);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.failed_stage, "align");
  const auto m = manifest(dir / "out");
  EXPECT_EQ(m["status"], "failed");
  EXPECT_EQ(m["failed_stage"], "align");
  EXPECT_TRUE(m["partial"].get<bool>());
  ASSERT_EQ(m["artifacts"].size(), 1u);
  EXPECT_EQ(m["artifacts"][0]["name"], "corpus");
}

TEST(Pipeline, MissingInputFailsAtConfig) {
  TempDir dir("pipe-missing");
  auto c = fixture_config(dir / "out");
  c.corpus_path = dir / "absent.jsonl";
  const auto r = pipeline::run_pipeline(c);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.failed_stage, "config");
}

TEST(Pipeline, EmptyCorpusFailsAtIngest) {
  TempDir dir("pipe-strict");
  auto c = fixture_config(dir.path());
  c.filter.min_category_count = 100000;
  const auto r = pipeline::run_pipeline(c);
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.failed_stage, "ingest");
}
