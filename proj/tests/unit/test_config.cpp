#include <string>

#include <gtest/gtest.h>

#include "corpus_atlas/config.hpp"
#include "corpus_atlas/pipeline.hpp"
#include "helpers.hpp"

namespace config = corpus_atlas::config;
namespace pipeline = corpus_atlas::pipeline;
using testing_support::TempDir;

TEST(ConfigDocument, ScalarsArraysAndSections) {
  const auto doc = config::Document::parse(R"(
# leading comment
top = "root"
[a]
s = "x \"q\" y"   # trailing comment
lit = 'c:\path'
i = 1_000
neg = -4
r = 2.5e-1
b = true
list = ["p", 'q',]
empty = []
[b.c]
n = 0x10
)");
  EXPECT_EQ(doc.get_string("top", ""), "root");
  EXPECT_EQ(doc.get_string("a.s", ""), "x \"q\" y");
  EXPECT_EQ(doc.get_string("a.lit", ""), "c:\\path");
  EXPECT_EQ(doc.get_int("a.i", 0), 1000);
  EXPECT_EQ(doc.get_int("a.neg", 0), -4);
  EXPECT_DOUBLE_EQ(doc.get_real("a.r", 0), 0.25);
  EXPECT_DOUBLE_EQ(doc.get_real("a.i", 0), 1000.0);
  EXPECT_TRUE(doc.get_bool("a.b", false));
  EXPECT_EQ(doc.get_strings("a.list"), (std::vector<std::string>{"p", "q"}));
  EXPECT_TRUE(doc.get_strings("a.empty").empty());
  EXPECT_EQ(doc.get_strings("top"), (std::vector<std::string>{"root"}));
  EXPECT_EQ(doc.get_int("b.c.n", 0), 16);
  EXPECT_EQ(doc.get_int("missing", 7), 7);
  EXPECT_FALSE(doc.contains("missing"));
}

TEST(ConfigDocument, TypeErrors) {
  const auto doc = config::Document::parse("x = \"s\"\ny = -1\nz = 1.5\n");
  EXPECT_THROW(doc.get_int("x", 0), std::runtime_error);
  EXPECT_THROW(doc.get_bool("z", false), std::runtime_error);
  EXPECT_THROW(doc.get_count("y", 0), std::runtime_error);
  EXPECT_THROW(doc.get_int("z", 0), std::runtime_error);
}

TEST(ConfigDocument, SyntaxErrorsNameTheLine) {
  const char* bad[] = {"x 1", "x = ", "x = \"open", "[sec", "x = 1 2", "x = [1]", "x = nope", "x = 1\nx = 2",
                       "x = \"\\q\""};
  for (const char* text : bad) {
    EXPECT_THROW(config::Document::parse(text, "cfg.toml"), config::ParseError) << text;
  }
  try {
    config::Document::parse("a = 1\n\nb = ?\n", "cfg.toml");
    FAIL();
  } catch (const config::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.toml:3"), std::string::npos) << e.what();
  }
}

TEST(PipelineConfig, DefaultsFollowThePublishedSettings) {
  const auto c = pipeline::parse_config("[input]\ncorpus = \"c.jsonl\"\nembeddings = \"e.emb1\"\n", "/base");
  EXPECT_EQ(c.corpus_path, std::filesystem::path("/base/c.jsonl"));
  ASSERT_EQ(c.embedding_paths.size(), 1u);
  EXPECT_EQ(c.embedding_paths[0], std::filesystem::path("/base/e.emb1"));
  EXPECT_EQ(c.filter.min_abstract_words, 31u);
  EXPECT_EQ(c.filter.min_category_count, 250u);
  EXPECT_DOUBLE_EQ(c.pca_target, 0.95);
  EXPECT_EQ(c.kmin, 2u);
  EXPECT_EQ(c.kmax, 50u);
  EXPECT_EQ(c.report_top, 3u);
  EXPECT_EQ(c.report_min_count, 10u);
  EXPECT_FALSE(c.pca_fit_on_all);
  EXPECT_TRUE(c.report_on_test);
  EXPECT_FALSE(c.project);
  EXPECT_EQ(c.output_dir, std::filesystem::path("/base/atlas-out"));
}

TEST(PipelineConfig, OverridesAndAbsolutePaths) {
  const auto c = pipeline::parse_config(R"([input]
corpus = "/abs/c.jsonl"
embeddings = ["a.emb1", "b.emb1"]
aliases = "aliases.csv"
[filter]
min_words = 10
min_category_count = 5
[pca]
target = 0.8
fit_on = "all"
[sweep]
kmin = 3
kmax = 7
seed = 9
n_init = 4
[report]
on = "all"
[project]
enabled = true
perplexity = 15
[output]
dir = "/tmp/out"
)",
                                        "/base");
  EXPECT_EQ(c.corpus_path, std::filesystem::path("/abs/c.jsonl"));
  EXPECT_EQ(c.embedding_paths.size(), 2u);
  EXPECT_EQ(*c.alias_path, std::filesystem::path("/base/aliases.csv"));
  EXPECT_EQ(c.filter.min_abstract_words, 10u);
  EXPECT_TRUE(c.pca_fit_on_all);
  EXPECT_EQ(c.kmin, 3u);
  EXPECT_EQ(c.sweep.n_init, 4u);
  EXPECT_EQ(c.cluster_seed, 9u);
  EXPECT_FALSE(c.report_on_test);
  EXPECT_TRUE(c.project);
  EXPECT_DOUBLE_EQ(c.tsne.perplexity, 15.0);
  EXPECT_EQ(c.output_dir, std::filesystem::path("/tmp/out"));
}

TEST(PipelineConfig, RejectsUnknownKeysAndBadEnums) {
  const std::string base = "[input]\ncorpus = \"c\"\nembeddings = \"e\"\n";
  EXPECT_THROW(pipeline::parse_config(base + "[sweep]\nk_max = 5\n", "/"), std::runtime_error);
  EXPECT_THROW(pipeline::parse_config(base + "[pca]\nfit_on = \"val\"\n", "/"), std::runtime_error);
  EXPECT_THROW(pipeline::parse_config(base + "[report]\non = \"val\"\n", "/"), std::runtime_error);
  EXPECT_THROW(pipeline::parse_config("[input]\nembeddings = \"e\"\n", "/"), std::runtime_error);
  EXPECT_THROW(pipeline::parse_config("[input]\ncorpus = \"c\"\n", "/"), std::runtime_error);
}

TEST(PipelineConfig, ValidateChecksFilesAndRanges) {
  TempDir dir("cfg");
  corpus_atlas::io::write_file(dir / "c.jsonl", "");
  corpus_atlas::io::write_file(dir / "e.emb1", "");
  auto c = pipeline::parse_config("[input]\ncorpus = \"c.jsonl\"\nembeddings = \"e.emb1\"\n", dir.path());
  EXPECT_NO_THROW(pipeline::validate(c));
  auto bad = c;
  bad.kmin = 1;
  EXPECT_THROW(pipeline::validate(bad), std::runtime_error);
  bad = c;
  bad.kmax = 1;
  EXPECT_THROW(pipeline::validate(bad), std::runtime_error);
  bad = c;
  bad.pca_target = 0;
  EXPECT_THROW(pipeline::validate(bad), std::runtime_error);
  bad = c;
  bad.embedding_paths.push_back(dir / "missing.emb1");
  EXPECT_THROW(pipeline::validate(bad), std::runtime_error);
  bad = c;
  bad.filter.min_category_count = 0;
  EXPECT_THROW(pipeline::validate(bad), std::runtime_error);
}
