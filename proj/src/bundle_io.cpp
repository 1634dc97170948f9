#include "gcl/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace gcl {
namespace {

namespace fs = std::filesystem;

struct Line {
  std::size_t number;
  std::vector<std::string_view> fields;
};

/// Splits a text file into whitespace-separated fields, skipping blank lines
/// and `#` comments. Holds the buffer the string_views point into.
class TsvReader {
 public:
  explicit TsvReader(const fs::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    text_ = ss.str();
  }

  std::vector<Line> lines() const {
    std::vector<Line> out;
    std::size_t pos = 0, number = 0;
    const std::string_view text(text_);
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view raw = text.substr(pos, end - pos);
      pos = end + 1;
      ++number;
      if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
      Line line{number, {}};
      std::size_t i = 0;
      while (i < raw.size()) {
        while (i < raw.size() && (raw[i] == '\t' || raw[i] == ' ')) ++i;
        std::size_t j = i;
        while (j < raw.size() && raw[j] != '\t' && raw[j] != ' ') ++j;
        if (j > i) line.fields.push_back(raw.substr(i, j - i));
        i = j;
      }
      if (line.fields.empty() || line.fields.front().front() == '#') continue;
      out.push_back(std::move(line));
    }
    return out;
  }

  std::string where(std::size_t line) const { return path_.string() + ":" + std::to_string(line); }

 private:
  fs::path path_;
  std::string text_;
};

template <typename T>
T parse_int(std::string_view s, const TsvReader& r, std::size_t line) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(r.where(line) + ": expected an integer, got '" + std::string(s) + "'");
  return v;
}

double parse_real(std::string_view s, const TsvReader& r, std::size_t line) {
  // strtod over from_chars<double>: libstdc++ 11 lacks the floating overload.
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size())
    throw ParseError(r.where(line) + ": expected a real number, got '" + tmp + "'");
  return v;
}

void expect_fields(const Line& l, std::size_t n, const TsvReader& r, const char* what) {
  if (l.fields.size() != n)
    throw ParseError(r.where(l.number) + ": expected " + std::to_string(n) + " fields (" + what +
                     "), got " + std::to_string(l.fields.size()));
}

struct RawBundle {
  std::vector<NodeId> feature_ids;  // in file order
  Mat features;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<std::pair<NodeId, int>> labels;
  std::vector<std::pair<NodeId, std::string>> splits;
  std::vector<std::size_t> edge_lines, label_lines, split_lines;
  std::vector<std::string> warnings;
};

RawBundle read_raw(const fs::path& dir) {
  RawBundle raw;

  TsvReader feat(dir / "features.tsv");
  auto flines = feat.lines();
  Index dim = -1;
  std::unordered_map<NodeId, std::size_t> first_seen;
  for (const auto& l : flines) {
    if (l.fields.size() < 2)
      throw ParseError(feat.where(l.number) + ": expected a node id followed by feature values");
    if (dim < 0) dim = static_cast<Index>(l.fields.size() - 1);
    if (static_cast<Index>(l.fields.size() - 1) != dim)
      throw ParseError(feat.where(l.number) + ": expected " + std::to_string(dim) +
                       " feature values, got " + std::to_string(l.fields.size() - 1));
    const auto id = parse_int<NodeId>(l.fields[0], feat, l.number);
    if (!first_seen.emplace(id, l.number).second)
      throw FormatError(feat.where(l.number) + ": duplicate node id " + std::to_string(id) +
                        " in features");
    raw.feature_ids.push_back(id);
  }
  raw.features.resize(static_cast<Index>(flines.size()), std::max<Index>(dim, 0));
  for (std::size_t r = 0; r < flines.size(); ++r)
    for (Index c = 0; c < dim; ++c)
      raw.features(static_cast<Index>(r), c) =
          parse_real(flines[r].fields[static_cast<std::size_t>(c) + 1], feat, flines[r].number);

  TsvReader edges(dir / "edges.tsv");
  for (const auto& l : edges.lines()) {
    expect_fields(l, 2, edges, "src, dst");
    raw.edges.emplace_back(parse_int<NodeId>(l.fields[0], edges, l.number),
                           parse_int<NodeId>(l.fields[1], edges, l.number));
    raw.edge_lines.push_back(l.number);
  }

  TsvReader labels(dir / "labels.tsv");
  for (const auto& l : labels.lines()) {
    expect_fields(l, 2, labels, "id, class");
    raw.labels.emplace_back(parse_int<NodeId>(l.fields[0], labels, l.number),
                            parse_int<int>(l.fields[1], labels, l.number));
    raw.label_lines.push_back(l.number);
  }

  TsvReader splits(dir / "splits.tsv");
  for (const auto& l : splits.lines()) {
    expect_fields(l, 2, splits, "id, split-name");
    std::string name(l.fields[1]);
    if (name != "train" && name != "val" && name != "test")
      throw ParseError(splits.where(l.number) + ": unknown split '" + name +
                       "' (expected train, val or test)");
    raw.splits.emplace_back(parse_int<NodeId>(l.fields[0], splits, l.number), std::move(name));
    raw.split_lines.push_back(l.number);
  }
  return raw;
}

/// Builds the Graph once ids have been mapped onto [0, n).
template <typename MapId>
Graph assemble(const fs::path& dir, RawBundle& raw, MapId&& map_id) {
  const std::size_t n = raw.feature_ids.size();
  Mat features(static_cast<Index>(n), raw.features.cols());
  for (std::size_t r = 0; r < n; ++r) {
    auto id = map_id(raw.feature_ids[r]);
    features.row(*id) = raw.features.row(static_cast<Index>(r));
  }

  std::vector<Edge> edges;
  edges.reserve(raw.edges.size());
  for (std::size_t i = 0; i < raw.edges.size(); ++i) {
    auto a = map_id(raw.edges[i].first), b = map_id(raw.edges[i].second);
    if (!a || !b) {
      const NodeId bad = a ? raw.edges[i].second : raw.edges[i].first;
      throw RangeError((dir / "edges.tsv").string() + ":" + std::to_string(raw.edge_lines[i]) +
                       ": endpoint " + std::to_string(bad) + " is not a known node (N=" +
                       std::to_string(n) + ")");
    }
    edges.emplace_back(*a, *b);
  }

  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < raw.labels.size(); ++i) {
    auto id = map_id(raw.labels[i].first);
    const std::string where = (dir / "labels.tsv").string() + ":" + std::to_string(raw.label_lines[i]);
    if (!id) throw RangeError(where + ": node " + std::to_string(raw.labels[i].first) + " out of range");
    if (raw.labels[i].second < 0) throw RangeError(where + ": negative class id");
    if (labels[*id] != -1) throw FormatError(where + ": duplicate label for node " +
                                             std::to_string(raw.labels[i].first));
    labels[*id] = raw.labels[i].second;
  }
  for (std::size_t v = 0; v < n; ++v)
    if (labels[v] < 0)
      throw FormatError((dir / "labels.tsv").string() + ": no label for node " + std::to_string(v));

  Splits splits;
  for (std::size_t i = 0; i < raw.splits.size(); ++i) {
    auto id = map_id(raw.splits[i].first);
    if (!id)
      throw RangeError((dir / "splits.tsv").string() + ":" + std::to_string(raw.split_lines[i]) +
                       ": node " + std::to_string(raw.splits[i].first) + " out of range");
    const auto& name = raw.splits[i].second;
    (name == "train" ? splits.train : name == "val" ? splits.val : splits.test).push_back(*id);
  }
  return Graph::create(n, std::move(edges), std::move(features), std::move(labels),
                       std::move(splits));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Graph load_citation_bundle(const fs::path& dir) {
  RawBundle raw = read_raw(dir);
  const auto n = static_cast<NodeId>(raw.feature_ids.size());
  for (NodeId id : raw.feature_ids)
    if (id < 0 || id >= n)
      throw FormatError((dir / "features.tsv").string() + ": node ids must be contiguous from 0; found " +
                        std::to_string(id) + " with N=" + std::to_string(n));
  return assemble(dir, raw, [n](NodeId id) -> std::optional<NodeId> {
    if (id < 0 || id >= n) return std::nullopt;
    return id;
  });
}

IngestResult ingest_bundle(const fs::path& dir) {
  RawBundle raw = read_raw(dir);
  std::vector<NodeId> sorted = raw.feature_ids;
  std::sort(sorted.begin(), sorted.end());
  bool remapped = false;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i] != static_cast<NodeId>(i)) remapped = true;
  std::unordered_map<NodeId, NodeId> compact;
  for (std::size_t i = 0; i < sorted.size(); ++i) compact.emplace(sorted[i], static_cast<NodeId>(i));

  std::vector<std::string> warnings = std::move(raw.warnings);
  if (raw.edges.empty()) warnings.push_back("edges.tsv contains no edges");
  std::size_t loops = 0;
  for (auto [a, b] : raw.edges) loops += a == b;
  if (loops) warnings.push_back("dropped " + std::to_string(loops) + " self-loop(s)");

  Graph g = assemble(dir, raw, [&](NodeId id) -> std::optional<NodeId> {
    auto it = compact.find(id);
    if (it == compact.end()) return std::nullopt;
    return it->second;
  });
  const std::size_t non_loop = raw.edges.size() - loops;
  if (g.num_edges() < non_loop)
    warnings.push_back("collapsed " + std::to_string(non_loop - g.num_edges()) +
                       " duplicate undirected edge(s)");
  std::vector<std::string> names;
  names.reserve(sorted.size());
  for (NodeId id : sorted) names.push_back(std::to_string(id));
  return IngestResult{std::move(g), std::move(names), remapped, std::move(warnings)};
}

void write_citation_bundle(const Graph& graph, const fs::path& dir) {
  fs::create_directories(dir);
  std::string edges = "# src\tdst\n";
  for (auto [a, b] : graph.edges()) edges += std::to_string(a) + "\t" + std::to_string(b) + "\n";
  write_text(dir / "edges.tsv", edges);

  std::string feats;
  feats.reserve(static_cast<std::size_t>(graph.features().size()) * 4);
  for (Index r = 0; r < graph.features().rows(); ++r) {
    feats += std::to_string(r);
    for (Index c = 0; c < graph.features().cols(); ++c) {
      feats += '\t';
      feats += fmt17(graph.features()(r, c));
    }
    feats += '\n';
  }
  write_text(dir / "features.tsv", feats);

  std::string labels;
  for (std::size_t v = 0; v < graph.num_nodes(); ++v)
    labels += std::to_string(v) + "\t" + std::to_string(graph.labels()[v]) + "\n";
  write_text(dir / "labels.tsv", labels);

  std::string splits;
  auto emit = [&](const NodeSet& s, const char* name) {
    for (NodeId v : s) splits += std::to_string(v) + "\t" + name + "\n";
  };
  emit(graph.splits().train, "train");
  emit(graph.splits().val, "val");
  emit(graph.splits().test, "test");
  write_text(dir / "splits.tsv", splits);
}

IngestResult ingest_linqs(const fs::path& content, const fs::path& cites, std::uint64_t seed) {
  TsvReader content_reader(content);
  auto lines = content_reader.lines();
  std::unordered_map<std::string, NodeId> ids;
  std::vector<std::string> original;
  std::vector<std::string> class_names;
  std::vector<std::string> class_of;
  Index dim = -1;
  for (const auto& l : lines) {
    if (l.fields.size() < 3)
      throw ParseError(content_reader.where(l.number) + ": expected id, features, class");
    if (dim < 0) dim = static_cast<Index>(l.fields.size() - 2);
    if (static_cast<Index>(l.fields.size() - 2) != dim)
      throw ParseError(content_reader.where(l.number) + ": inconsistent feature count");
    std::string id(l.fields.front());
    if (!ids.emplace(id, static_cast<NodeId>(original.size())).second)
      throw FormatError(content_reader.where(l.number) + ": duplicate paper id " + id);
    original.push_back(id);
    class_of.emplace_back(l.fields.back());
  }
  class_names = class_of;
  std::sort(class_names.begin(), class_names.end());
  class_names.erase(std::unique(class_names.begin(), class_names.end()), class_names.end());

  const auto n = static_cast<Index>(original.size());
  Mat features(n, std::max<Index>(dim, 0));
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r) {
    const auto& l = lines[static_cast<std::size_t>(r)];
    for (Index c = 0; c < dim; ++c)
      features(r, c) = parse_real(l.fields[static_cast<std::size_t>(c) + 1], content_reader, l.number);
    labels[static_cast<std::size_t>(r)] = static_cast<int>(
        std::lower_bound(class_names.begin(), class_names.end(), class_of[static_cast<std::size_t>(r)]) -
        class_names.begin());
  }

  IngestResult result{Graph::create(0, {}, Mat(0, 0), {}, {}), {}, true, {}};
  TsvReader cites_reader(cites);
  std::vector<Edge> edges;
  std::size_t dangling = 0;
  for (const auto& l : cites_reader.lines()) {
    expect_fields(l, 2, cites_reader, "cited, citing");
    auto a = ids.find(std::string(l.fields[0]));
    auto b = ids.find(std::string(l.fields[1]));
    if (a == ids.end() || b == ids.end()) {
      ++dangling;
      continue;
    }
    edges.emplace_back(a->second, b->second);
  }
  if (dangling)
    result.warnings.push_back("skipped " + std::to_string(dangling) +
                              " citation(s) referencing unknown papers");

  // 20 per class for training, then 500 validation and 1000 test nodes.
  Rng rng = make_stream(seed, Phase::kSplit);
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  shuffle_range(order.begin(), order.end(), rng);
  Splits splits;
  std::vector<int> taken(class_names.size(), 0);
  std::vector<NodeId> rest;
  for (NodeId v : order) {
    int& t = taken[static_cast<std::size_t>(labels[static_cast<std::size_t>(v)])];
    if (t < 20) {
      ++t;
      splits.train.push_back(v);
    } else {
      rest.push_back(v);
    }
  }
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (i < 500) splits.val.push_back(rest[i]);
    else if (i < 1500) splits.test.push_back(rest[i]);
  }

  result.graph = Graph::create(static_cast<std::size_t>(n), std::move(edges), std::move(features),
                               std::move(labels), std::move(splits));
  result.original_ids = std::move(original);
  result.warnings.push_back("class ids assigned in alphabetical order of class names");
  return result;
}

}  // namespace gcl
