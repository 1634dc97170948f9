#include <doctest.h>

#include "helpers.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace gcl;
using namespace testutil;

namespace {

// Dense D^{-1/2} (A + I) D^{-1/2} written out entry by entry.
Mat dense_normalization(const Mat& adj) {
  const Index n = adj.rows();
  std::vector<double> deg(static_cast<std::size_t>(n), 1.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) deg[i] += adj(i, j);
  Mat out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double a = adj(i, j) + (i == j ? 1.0 : 0.0);
      out(i, j) = a / std::sqrt(deg[i] * deg[j]);
    }
  return out;
}

Mat adjacency(const Graph& g) {
  Mat a = Mat::Zero(static_cast<Index>(g.num_nodes()), static_cast<Index>(g.num_nodes()));
  for (auto [u, v] : g.edges()) a(u, v) = a(v, u) = 1.0;
  return a;
}

std::vector<std::vector<int>> floyd_warshall(const Graph& g) {
  const std::size_t n = g.num_nodes();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t v = 0; v < n; ++v) d[v][v] = 0;
  for (auto [u, v] : g.edges()) d[u][v] = d[v][u] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

}  // namespace

TEST_CASE("graph creation canonicalizes edges") {
  const Graph g = make_graph(4, {{1, 0}, {0, 1}, {2, 2}, {3, 2}});
  CHECK(g.num_edges() == 2);
  CHECK(g.edges()[0] == Edge{0, 1});
  CHECK(g.edges()[1] == Edge{2, 3});
  CHECK(g.has_edge(1, 0));
  CHECK_FALSE(g.has_edge(2, 2));
  CHECK(g.degree(2) == 1);
  CHECK(g.num_classes() == 2);
}

TEST_CASE("graph creation rejects bad input") {
  CHECK_THROWS_AS(make_graph(3, {{0, 3}}), RangeError);
  CHECK_THROWS_AS(make_graph(3, {{-1, 0}}), RangeError);
  CHECK_THROWS_AS(Graph::create(3, {}, Mat::Zero(2, 1), {0, 0, 0}, all_splits(3)), FormatError);
  CHECK_THROWS_AS(Graph::create(3, {}, Mat::Zero(3, 1), {0, 0}, all_splits(3)), FormatError);
  CHECK_THROWS_AS(Graph::create(3, {}, Mat::Zero(3, 1), {0, -1, 0}, all_splits(3)), RangeError);
  Splits dup = all_splits(3);
  dup.test.push_back(0);
  CHECK_THROWS_AS(Graph::create(3, {}, Mat::Zero(3, 1), {0, 0, 0}, dup), FormatError);
  Mat nan = Mat::Zero(3, 1);
  nan(1, 0) = std::nan("");
  CHECK_THROWS_AS(Graph::create(3, {}, nan, {0, 0, 0}, all_splits(3)), FormatError);
}

TEST_CASE("single isolated node") {
  const Graph g = make_graph(1, {});
  CHECK(g.num_nodes() == 1);
  CHECK(g.num_edges() == 0);
  CHECK(g.neighbors(0).empty());
}

TEST_CASE("normalize_adjacency small cases") {
  SUBCASE("one node") {
    const NormalizedAdj a = normalize_adjacency(Mat::Zero(1, 1));
    CHECK(a.values(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("one edge") {
    Mat adj(2, 2);
    adj << 0, 1, 1, 0;
    const NormalizedAdj a = normalize_adjacency(adj);
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j < 2; ++j) CHECK(a.values(i, j) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("path 0-1-2") {
    Mat adj = Mat::Zero(3, 3);
    adj(0, 1) = adj(1, 0) = adj(1, 2) = adj(2, 1) = 1;
    const NormalizedAdj a = normalize_adjacency(adj);
    CHECK(std::abs(a.values(0, 1) - 1.0 / std::sqrt(6.0)) < 1e-15);
    CHECK(std::abs(a.values(0, 1) - 0.40825) < 1e-5);
  }
  SUBCASE("bad input") {
    Mat asym = Mat::Zero(2, 2);
    asym(0, 1) = 1;
    CHECK_THROWS_AS(normalize_adjacency(asym), ContractViolation);
    Mat loop = Mat::Zero(2, 2);
    loop(0, 0) = 1;
    CHECK_THROWS_AS(normalize_adjacency(loop), ContractViolation);
  }
}

TEST_CASE("normalize_adjacency matches dense oracle, symmetric, spectrum in [-1,1]") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 2 + seed % 19;
    const Graph g = random_graph(n, 0.3, seed);
    const Mat adj = adjacency(g);
    const Mat got = normalize_adjacency(adj).values;
    CHECK((got - dense_normalization(adj)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got - got.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Mat> eig(got);
    CHECK(eig.eigenvalues().minCoeff() >= -1.0 - 1e-12);
    CHECK(eig.eigenvalues().maxCoeff() <= 1.0 + 1e-12);
  }
}

TEST_CASE("k_hop_neighbors") {
  const Graph path = path_graph(4);
  CHECK(k_hop_neighbors(path, 2, 0) == NodeSet{2});
  CHECK(k_hop_neighbors(path, 0, 2) == NodeSet{0, 1, 2});
  CHECK(k_hop_neighbors(path, 1, 1) == NodeSet{0, 1, 2});
  CHECK_THROWS_AS(k_hop_neighbors(path, 4, 1), ContractViolation);
  CHECK_THROWS_AS(k_hop_neighbors(path, 0, -1), ContractViolation);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = random_graph(12, 0.2, 100 + seed);
    const auto fw = floyd_warshall(g);
    for (int hops = 0; hops <= 3; ++hops)
      for (NodeId v = 0; v < 12; ++v) {
        NodeSet expected;
        for (NodeId j = 0; j < 12; ++j)
          if (fw[v][j] <= hops) expected.push_back(j);
        CHECK(k_hop_neighbors(g, v, hops) == expected);
      }
  }
}

TEST_CASE("induced_subgraph") {
  SUBCASE("single vertex") {
    const Graph g = path_graph(3);
    const NodeId v[] = {1};
    const SubgraphView s = induced_subgraph(g, v, 1);
    CHECK(s.size() == 1);
    CHECK(s.norm_adj.values(0, 0) == doctest::Approx(1.0));
    CHECK(s.features.row(0) == g.features().row(1));
  }
  SUBCASE("triangle keeps its three edges") {
    const Graph g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
    const NodeId v[] = {2, 0, 1, 0};
    const SubgraphView s = induced_subgraph(g, v, 2);
    CHECK(s.local_to_global == NodeSet{0, 1, 2});
    CHECK(s.anchor_local == 2);
    int local_edges = 0;
    for (Index i = 0; i < 3; ++i)
      for (Index j = i + 1; j < 3; ++j) local_edges += s.norm_adj.values(i, j) != 0.0;
    CHECK(local_edges == 3);
  }
  SUBCASE("anchor must be inside") {
    const Graph g = path_graph(3);
    const NodeId v[] = {0, 1};
    CHECK_THROWS_AS(induced_subgraph(g, v, 2), ContractViolation);
  }
  SUBCASE("edge set equals filtered global edge list") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Graph g = random_graph(10, 0.35, 500 + seed);
      Rng rng(seed);
      NodeSet all(10);
      for (NodeId i = 0; i < 10; ++i) all[i] = i;
      shuffle_range(all.begin(), all.end(), rng);
      NodeSet subset(all.begin(), all.begin() + 5);
      const SubgraphView s = induced_subgraph(g, subset, subset[0]);
      std::sort(subset.begin(), subset.end());

      std::set<Edge> oracle;
      for (auto [a, b] : g.edges())
        if (std::binary_search(subset.begin(), subset.end(), a) &&
            std::binary_search(subset.begin(), subset.end(), b))
          oracle.insert({a, b});
      std::set<Edge> local;
      for (Index i = 0; i < s.size(); ++i)
        for (Index j = i + 1; j < s.size(); ++j)
          if (s.norm_adj.values(i, j) != 0.0) local.insert({s.local_to_global[i], s.local_to_global[j]});
      CHECK(local == oracle);

      Mat sub_adj = Mat::Zero(5, 5);
      for (auto [a, b] : oracle) {
        const auto ia = std::lower_bound(subset.begin(), subset.end(), a) - subset.begin();
        const auto ib = std::lower_bound(subset.begin(), subset.end(), b) - subset.begin();
        sub_adj(ia, ib) = sub_adj(ib, ia) = 1.0;
      }
      CHECK((s.norm_adj.values - dense_normalization(sub_adj)).cwiseAbs().maxCoeff() < 1e-12);
      for (Index i = 0; i < 5; ++i) CHECK(s.features.row(i) == g.features().row(subset[i]));
    }
  }
}

TEST_CASE("generate_sbm") {
  SUBCASE("extreme probabilities force two cliques") {
    SbmParams p{{3, 3}, 1.0, 0.0, 8, 0.0};
    const Graph g = generate_sbm(p, 1);
    CHECK(g.labels() == std::vector<int>{0, 0, 0, 1, 1, 1});
    CHECK(g.num_edges() == 6);
    for (auto [a, b] : g.edges()) CHECK(g.labels()[a] == g.labels()[b]);
  }
  SUBCASE("zero probabilities give no edges") {
    SbmParams p{{4, 4}, 0.0, 0.0, 8, 1.0};
    CHECK(generate_sbm(p, 2).num_edges() == 0);
  }
  SUBCASE("complete graph") {
    SbmParams p{{3, 4}, 1.0, 1.0, 8, 1.0};
    CHECK(generate_sbm(p, 3).num_edges() == 7 * 6 / 2);
  }
  SUBCASE("deterministic in the seed") {
    SbmParams p{{50, 50}, 0.3, 0.02, 8, 1.0};
    const Graph a = generate_sbm(p, 9), b = generate_sbm(p, 9), c = generate_sbm(p, 10);
    CHECK(a.edges() == b.edges());
    CHECK(a.features() == b.features());
    CHECK(a.edges() != c.edges());
  }
  SUBCASE("block means are separation apart") {
    SbmParams p{{4000, 4000}, 0.0, 0.0, 8, 3.0};
    const Graph g = generate_sbm(p, 4);
    const RowVec m0 = g.features().topRows(4000).colwise().mean();
    const RowVec m1 = g.features().bottomRows(4000).colwise().mean();
    CHECK((m0 - m1).norm() == doctest::Approx(3.0).epsilon(0.03));
  }
  SUBCASE("splits partition the nodes 80/10/10") {
    SbmParams p{{50, 50}, 0.1, 0.01, 8, 1.0};
    const Graph g = generate_sbm(p, 5);
    CHECK(g.splits().train.size() == 80);
    CHECK(g.splits().val.size() == 10);
    CHECK(g.splits().test.size() == 10);
  }
  SUBCASE("invalid parameters") {
    CHECK_THROWS_AS(generate_sbm(SbmParams{{}, 0.1, 0.1, 8, 1.0}, 0), ContractViolation);
    CHECK_THROWS_AS(generate_sbm(SbmParams{{2, 2}, 1.5, 0.1, 8, 1.0}, 0), ContractViolation);
    CHECK_THROWS_AS(generate_sbm(SbmParams{{1, 1, 1}, 0.5, 0.1, 2, 1.0}, 0), ContractViolation);
  }
}
