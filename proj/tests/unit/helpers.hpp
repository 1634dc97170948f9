#pragma once

#include "gcl/graph.hpp"
#include "gcl/rng.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

namespace testutil {

using namespace gcl;

inline Mat random_mat(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline Vec random_vec(Index n, std::uint64_t seed, double scale = 1.0) {
  return random_mat(n, 1, seed, scale).col(0);
}

// Round-robin train/val/test assignment.
inline Splits all_splits(std::size_t n) {
  Splits s;
  for (std::size_t v = 0; v < n; ++v)
    (v % 3 == 0 ? s.train : v % 3 == 1 ? s.val : s.test).push_back(static_cast<NodeId>(v));
  return s;
}

inline Graph make_graph(std::size_t n, std::vector<Edge> edges, Index d = 3, std::uint64_t seed = 7) {
  std::vector<int> labels(n);
  for (std::size_t v = 0; v < n; ++v) labels[v] = static_cast<int>(v % 2);
  return Graph::create(n, std::move(edges), random_mat(static_cast<Index>(n), d, seed), labels,
                       all_splits(n));
}

inline Graph path_graph(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t v = 0; v + 1 < n; ++v) e.emplace_back(v, v + 1);
  return make_graph(n, e);
}

inline Graph random_graph(std::size_t n, double p, std::uint64_t seed, Index d = 3) {
  Rng rng(seed);
  std::vector<Edge> e;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (uniform01(rng) < p) e.emplace_back(a, b);
  return make_graph(n, e, d, seed + 1);
}

inline Graph two_cliques(std::size_t per_block, double separation, std::uint64_t seed) {
  SbmParams p;
  p.block_sizes = {per_block, per_block};
  p.p_in = 1.0;
  p.p_out = 0.0;
  p.feature_dim = 8;
  p.feature_separation = separation;
  return generate_sbm(p, seed);
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("gcl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil
