#include <algorithm>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "corpus_atlas/io.hpp"
#include "corpus_atlas/report.hpp"
#include "helpers.hpp"
#include "report_fixture.hpp"

namespace report = corpus_atlas::report;
namespace corpus = corpus_atlas::corpus;
using corpus_atlas::cluster::LabelTable;
using testing_support::TempDir;

namespace {

corpus::Corpus tiny(std::vector<std::pair<std::string, std::vector<std::string>>> papers) {
  corpus::Corpus c;
  for (auto& [id, cats] : papers) {
    corpus::PaperRecord r;
    r.id = id;
    r.categories = cats;
    for (const auto& cat : cats) ++c.category_counts[cat];
    c.records.push_back(std::move(r));
  }
  return c;
}

report::CrossTab table(std::vector<int> clusters, std::vector<std::string> categories,
                       std::vector<std::vector<std::size_t>> counts) {
  report::CrossTab t;
  t.clusters = std::move(clusters);
  t.categories = std::move(categories);
  t.counts = corpus_atlas::Matrix<std::size_t>(t.clusters.size(), t.categories.size(), 0);
  t.cluster_sizes.assign(t.clusters.size(), 0);
  for (std::size_t r = 0; r < counts.size(); ++r) {
    for (std::size_t c = 0; c < counts[r].size(); ++c) t.counts(r, c) = counts[r][c];
    t.cluster_sizes[r] = *std::max_element(counts[r].begin(), counts[r].end());
  }
  return t;
}

using Entries = std::vector<report::CategoryCount>;

}  // namespace

TEST(Crosstab, HandTrace) {
  const auto c = tiny({{"p1", {"A"}}, {"p2", {"A", "B"}}, {"p3", {"B"}}});
  const LabelTable labels{{"p1", 0}, {"p2", 0}, {"p3", 1}};
  const auto t = report::crosstab(labels, c);
  EXPECT_EQ(t.clusters, (std::vector<int>{0, 1}));
  EXPECT_EQ(t.categories, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(t.count(0, "A"), 2u);
  EXPECT_EQ(t.count(0, "B"), 1u);
  EXPECT_EQ(t.count(1, "A"), 0u);
  EXPECT_EQ(t.count(1, "B"), 1u);
  EXPECT_EQ(t.cluster_sizes, (std::vector<std::size_t>{2, 1}));
}

TEST(Crosstab, SinglePaper) {
  const auto t = report::crosstab({{"x", 4}}, tiny({{"x", {"hep-ph"}}}));
  EXPECT_EQ(t.counts.rows(), 1u);
  EXPECT_EQ(t.counts.cols(), 1u);
  EXPECT_EQ(t.count(4, "hep-ph"), 1u);
}

TEST(Crosstab, UnknownIdFails) {
  EXPECT_THROW(report::crosstab({{"missing", 0}}, tiny({{"x", {"A"}}})), std::invalid_argument);
}

TEST(Crosstab, RelabelingPermutesRows) {
  const auto c = report_fixture::corpus();
  auto labels = report_fixture::labels();
  const auto before = report::crosstab(labels, c);
  for (auto& [id, cl] : labels) cl = 1 - cl;
  const auto after = report::crosstab(labels, c);
  for (const auto& cat : before.categories) {
    EXPECT_EQ(after.count(0, cat), before.count(1, cat));
    EXPECT_EQ(after.count(1, cat), before.count(0, cat));
  }
}

TEST(Crosstab, ColumnSumsEqualCategoryCounts) {
  const auto c = report_fixture::corpus();
  const auto t = report::crosstab(report_fixture::labels(), c);
  for (std::size_t col = 0; col < t.categories.size(); ++col) {
    std::size_t sum = 0;
    for (std::size_t r = 0; r < t.clusters.size(); ++r) sum += t.counts(r, col);
    EXPECT_EQ(sum, c.category_counts.at(t.categories[col]));
  }
  for (std::size_t r = 0; r < t.clusters.size(); ++r) {
    std::size_t row = 0;
    for (std::size_t col = 0; col < t.categories.size(); ++col) row += t.counts(r, col);
    EXPECT_GE(row, t.cluster_sizes[r]);
  }
}

TEST(TopCategories, MinCountExclusion) {
  const auto t = table({0}, {"A", "B", "C"}, {{9, 12, 15}});
  const auto top = report::top_categories(t, 3, 10);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].entries, (Entries{{"C", 15}, {"B", 12}}));
}

TEST(TopCategories, AllBelowThresholdGivesEmptyList) {
  const auto top = report::top_categories(table({0}, {"A", "B"}, {{3, 9}}), 3, 10);
  EXPECT_TRUE(top[0].entries.empty());
}

TEST(TopCategories, TiesByCode) {
  const auto top = report::top_categories(table({0}, {"A", "B"}, {{20, 20}}), 3, 10);
  EXPECT_EQ(top[0].entries, (Entries{{"A", 20}, {"B", 20}}));
}

TEST(TopCategories, TruncatesAndOrdersClustersBySize) {
  const auto t = table({0, 1, 2}, {"A", "B", "C", "D"}, {{11, 12, 13, 14}, {50, 0, 0, 0}, {20, 30, 0, 0}});
  const auto top = report::top_categories(t, 3, 10);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].cluster, 1);
  EXPECT_EQ(top[1].cluster, 2);
  EXPECT_EQ(top[2].cluster, 0);
  EXPECT_EQ(top[2].entries, (Entries{{"D", 14}, {"C", 13}, {"B", 12}}));
}

TEST(TopCategories, InvariantUnderAddingRareCategories) {
  const auto t = table({0, 1}, {"A", "B"}, {{12, 30}, {15, 4}});
  const auto with_rare = table({0, 1}, {"A", "Arare", "B", "Zrare"}, {{12, 9, 30, 1}, {15, 2, 4, 9}});
  const auto a = report::top_categories(t, 3, 10);
  const auto b = report::top_categories(with_rare, 3, 10);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].entries, b[i].entries);
}

TEST(MacroPurity, SingleAstroCluster) {
  std::vector<report::ClusterTop> top{{0, 30, {{"astro-ph.GA", 20}, {"astro-ph", 15}, {"astro-ph.CO", 11}}}};
  const auto p = report::macro_purity(top, [](std::string_view c) { return corpus::macro_of(c); });
  EXPECT_EQ(p.macro_profile[0], (std::vector<std::string>{"astro-ph"}));
  EXPECT_DOUBLE_EQ(p.one, 1.0);
}

TEST(MacroPurity, StatAndMathAreTwoMacros) {
  std::vector<report::ClusterTop> top{{0, 30, {{"stat.TH", 20}, {"math.ST", 20}}}};
  const auto p = report::macro_purity(top, [](std::string_view c) { return corpus::macro_of(c); });
  EXPECT_EQ(p.macro_profile[0].size(), 2u);
  EXPECT_DOUBLE_EQ(p.two, 1.0);
}

TEST(MacroPurity, FractionsFromHandCount) {
  std::vector<report::ClusterTop> top{
      {0, 10, {{"hep-ph", 10}}},
      {1, 10, {{"math.ST", 10}, {"math.PR", 10}}},
      {2, 10, {{"cs.LG", 10}, {"stat.ML", 10}}},
      {3, 10, {}},
  };
  const auto p = report::macro_purity(top, [](std::string_view c) { return corpus::macro_of(c); });
  EXPECT_EQ(p.clusters_counted, 3u);
  EXPECT_DOUBLE_EQ(p.one, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(p.two, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(p.three_plus, 0.0);
  EXPECT_NEAR(p.one + p.two + p.three_plus, 1.0, 1e-15);

  std::reverse(top.begin(), top.end());
  const auto q = report::macro_purity(top, [](std::string_view c) { return corpus::macro_of(c); });
  EXPECT_DOUBLE_EQ(q.one, p.one);
  EXPECT_DOUBLE_EQ(q.two, p.two);
}

TEST(MacroPurity, NoSurvivingEntries) {
  std::vector<report::ClusterTop> top{{0, 5, {}}};
  const auto p = report::macro_purity(top, [](std::string_view c) { return corpus::macro_of(c); });
  EXPECT_EQ(p.clusters_counted, 0u);
  EXPECT_EQ(p.one + p.two + p.three_plus, 0.0);
}

TEST(Report, HandBuiltFixtureExactValues) {
  const auto r = report::build_report(report_fixture::labels(), report_fixture::corpus(), 3, 10,
                                      corpus::default_aliases(), report_fixture::known_clusters());
  const auto& t = r.crosstab;
  EXPECT_EQ(t.clusters, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(t.categories, (std::vector<std::string>{"cond-mat.stat-mech", "math-ph", "math.MP", "math.PR",
                                                    "math.ST", "stat.ML", "stat.TH"}));
  EXPECT_EQ(t.cluster_sizes, (std::vector<std::size_t>{10, 10, 0}));
  const std::vector<std::size_t> expected{0, 0, 0, 1, 10, 9, 10,  //
                                          9, 10, 10, 0, 0, 0, 0,  //
                                          0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(std::vector<std::size_t>(t.counts.values().begin(), t.counts.values().end()), expected);

  ASSERT_EQ(r.top.size(), 3u);
  EXPECT_EQ(r.top[0].cluster, 0);
  EXPECT_EQ(r.top[0].entries, (Entries{{"math.ST", 10}, {"stat.TH", 10}}));
  EXPECT_EQ(r.top[1].cluster, 1);
  EXPECT_EQ(r.top[1].entries, (Entries{{"math-ph", 10}, {"math.MP", 10}}));
  EXPECT_EQ(r.top[2].cluster, 2);
  EXPECT_TRUE(r.top[2].entries.empty());

  EXPECT_EQ(r.purity.clusters_counted, 2u);
  EXPECT_EQ(r.purity.one, 0.5);
  EXPECT_EQ(r.purity.two, 0.5);
  EXPECT_EQ(r.purity.three_plus, 0.0);
}

TEST(Report, HandBuiltFixtureWithoutThreshold) {
  const auto r = report::build_report(report_fixture::labels(), report_fixture::corpus(), 3, 1);
  ASSERT_EQ(r.top.size(), 2u);
  EXPECT_EQ(r.top[0].entries, (Entries{{"math.ST", 10}, {"stat.TH", 10}, {"stat.ML", 9}}));
  EXPECT_EQ(r.top[1].entries, (Entries{{"math-ph", 10}, {"math.MP", 10}, {"cond-mat.stat-mech", 9}}));
  EXPECT_EQ(r.purity.one, 0.0);
  EXPECT_EQ(r.purity.two, 1.0);
}

TEST(Report, TableUsesDashesForMissingEntries) {
  const auto r = report::build_report(report_fixture::labels(), report_fixture::corpus(), 3, 10,
                                      corpus::default_aliases(), report_fixture::known_clusters());
  const std::string expected =
      "Cluster  Size  1st most frequent  2nd most frequent  3rd most frequent\n"
      "----------------------------------------------------------------------\n"
      "      0    10  math.ST (10)       stat.TH (10)       -\n"
      "      1    10  math-ph (10)       math.MP (10)       -\n"
      "      2     0  -                  -                  -\n"
      "\n"
      "Categories with fewer than 10 papers in a cluster are excluded.\n"
      "Macro-categories among listed entries (2 clusters):\n"
      "  one:   50.0%\n"
      "  two:   50.0%\n"
      "  three+: 0.0%\n";
  EXPECT_EQ(report::format_table(r), expected);
}

TEST(Report, EmitWritesFilesAndCsvRoundTrips) {
  TempDir dir("report");
  const auto r = report::build_report(report_fixture::labels(), report_fixture::corpus(), 3, 10,
                                      corpus::default_aliases(), report_fixture::known_clusters());
  const auto written = report::emit_report(r, dir.path());
  std::vector<std::string> names;
  for (const auto& p : written) names.push_back(p.filename().string());
  EXPECT_EQ(names, (std::vector<std::string>{"table.txt", "crosstab.csv", "purity.csv", "bars_1_cluster0.csv",
                                             "bars_2_cluster1.csv", "bars_3_cluster2.csv"}));
  const auto parsed = report::parse_crosstab_csv(corpus_atlas::io::read_file(dir / "crosstab.csv"));
  EXPECT_EQ(parsed.clusters, r.crosstab.clusters);
  EXPECT_EQ(parsed.categories, r.crosstab.categories);
  EXPECT_EQ(parsed.counts, r.crosstab.counts);
  EXPECT_EQ(corpus_atlas::io::read_file(dir / "bars_1_cluster0.csv"),
            "category,count\nmath.ST,10\nstat.TH,10\nstat.ML,9\nmath.PR,1\n");
  EXPECT_EQ(corpus_atlas::io::read_file(dir / "bars_3_cluster2.csv"), "category,count\n");
  EXPECT_EQ(corpus_atlas::io::read_file(dir / "purity.csv"), "macro_categories,fraction\n1,0.5\n2,0.5\n3+,0\n");

  TempDir again("report2");
  report::emit_report(r, again.path());
  for (const auto& name : names) {
    EXPECT_EQ(corpus_atlas::io::read_file(dir / name), corpus_atlas::io::read_file(again / name)) << name;
  }
}

TEST(Report, AliasFileChangesPurity) {
  corpus::AliasMap aliases = corpus::default_aliases();
  aliases["stat.TH"] = "math";
  const auto r = report::build_report(report_fixture::labels(), report_fixture::corpus(), 3, 10, aliases);
  EXPECT_EQ(r.purity.one, 1.0);
}
