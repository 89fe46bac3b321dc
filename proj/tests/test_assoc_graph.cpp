#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>

#include "assoc_graph.hpp"
#include "util.hpp"

using namespace ebert;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("graph loading") {
  SUBCASE("symmetrized, deduplicated, self-loops dropped") {
    auto path = write_temp("ebert_edges1.tsv", "a\tb\nb\ta\na\ta\n");
    AssociationGraph::LoadStats stats;
    auto g = AssociationGraph::load(path, {"a", "b", "c"}, &stats);
    CHECK(g.edge_count() == 1);
    CHECK(g.node_count() == 3);
    CHECK(stats.dropped_self_loops == 1);
    CHECK(stats.dropped_duplicates == 1);
    CHECK(g.neighbors("a").count(1) == 1);  // b is index 1
    CHECK(g.neighbors("b").count(0) == 1);
  }
  SUBCASE("empty file gives an empty graph") {
    auto path = write_temp("ebert_edges2.tsv", "# only a comment\n\n");
    auto g = AssociationGraph::load(path, {"a"});
    CHECK(g.edge_count() == 0);
  }
  SUBCASE("edges naming unknown products are dropped and counted") {
    auto path = write_temp("ebert_edges3.tsv", "a\tz\na\tb\n");
    AssociationGraph::LoadStats stats;
    auto g = AssociationGraph::load(path, {"a", "b"}, &stats);
    CHECK(g.edge_count() == 1);
    CHECK(stats.dropped_unknown == 1);
  }
  SUBCASE("malformed line reports its number") {
    auto path = write_temp("ebert_edges4.tsv", "a\tb\nnot_an_edge\n");
    try {
      AssociationGraph::load(path, {"a", "b"});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
  }
}

TEST_CASE("pair sampling") {
  Rng rng(31);
  SUBCASE("single edge is forced") {
    auto path = write_temp("ebert_edges5.tsv", "a\tb\n");
    auto g = AssociationGraph::load(path, {"a", "b"});
    for (int i = 0; i < 20; ++i) {
      auto [x, y] = g.sample_pair(rng);
      CHECK(((x == "a" && y == "b") || (x == "b" && y == "a")));
    }
  }
  SUBCASE("two edges draw uniformly and orientation is randomized") {
    auto path = write_temp("ebert_edges6.tsv", "a\tb\nc\td\n");
    auto g = AssociationGraph::load(path, {"a", "b", "c", "d"});
    std::map<std::string, long> edge_hits;
    long ab_forward = 0, ab_total = 0;
    int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      auto [x, y] = g.sample_pair(rng);
      bool is_ab = (x == "a" || x == "b");
      edge_hits[is_ab ? "ab" : "cd"]++;
      if (is_ab) {
        ++ab_total;
        if (x == "a") ++ab_forward;
      }
    }
    CHECK(std::abs(double(edge_hits["ab"]) / draws - 0.5) < 0.01);
    CHECK(std::abs(double(ab_forward) / double(ab_total) - 0.5) < 0.01);
  }
  SUBCASE("empty graph is an error") {
    auto path = write_temp("ebert_edges7.tsv", "");
    auto g = AssociationGraph::load(path, {"a"});
    CHECK_THROWS_AS(g.sample_pair(rng), Error);
  }
}

TEST_CASE("negative sampling") {
  Rng rng(32);
  SUBCASE("three nodes, one edge: the negative is forced") {
    auto path = write_temp("ebert_edges8.tsv", "a\tb\n");
    auto g = AssociationGraph::load(path, {"a", "b", "c"});
    for (int i = 0; i < 50; ++i) CHECK(g.sample_negative("a", rng) == "c");
  }
  SUBCASE("negatives never come from the neighborhood") {
    auto path = write_temp("ebert_edges9.tsv", "a\tb\na\tc\nd\te\nf\tg\n");
    std::vector<std::string> ids = {"a", "b", "c", "d", "e", "f", "g"};
    auto g = AssociationGraph::load(path, ids);
    for (int i = 0; i < 100000; ++i) {
      std::string neg = g.sample_negative("a", rng);
      CHECK(neg != "a");
      CHECK(neg != "b");
      CHECK(neg != "c");
    }
  }
  SUBCASE("complete graph has no valid negative") {
    auto path = write_temp("ebert_edges10.tsv", "a\tb\na\tc\nb\tc\n");
    auto g = AssociationGraph::load(path, {"a", "b", "c"});
    CHECK_THROWS_AS(g.sample_negative("a", rng), Error);
  }
}

TEST_CASE("edge sampling is uniform: chi-square on a 10-edge graph") {
  std::string content;
  std::vector<std::string> ids;
  // star-free layout: 10 disjoint edges over 20 nodes
  for (int i = 0; i < 10; ++i) {
    std::string a = "n" + std::to_string(2 * i);
    std::string b = "n" + std::to_string(2 * i + 1);
    content += a + "\t" + b + "\n";
    ids.push_back(a);
    ids.push_back(b);
  }
  auto path = write_temp("ebert_edges_chi.tsv", content);
  auto g = AssociationGraph::load(path, ids);
  REQUIRE(g.edge_count() == 10);

  Rng rng(99);
  std::map<std::string, long> hits;
  int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    auto [x, y] = g.sample_pair(rng);
    hits[x < y ? x + y : y + x]++;
  }
  double expected = double(draws) / 10.0;
  double chi2 = 0.0;
  for (const auto& [edge, count] : hits) {
    (void)edge;
    double d = double(count) - expected;
    chi2 += d * d / expected;
  }
  // 9 degrees of freedom; p > 0.01 means chi2 below the 0.99 quantile 21.67
  CHECK(chi2 < 21.67);
}
