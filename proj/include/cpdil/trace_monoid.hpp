/*
 * This code is part of cpdil.
 *
 * (C) Copyright cpdil contributors 2026.
 *
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license in the LICENSE.txt file in the root directory
 * of this source tree or at http://www.apache.org/licenses/LICENSE-2.0.
 *
 * Any modifications or derivative works of this code must retain this
 * copyright notice, and modified files need to carry a notice indicating
 * that they have been altered from the originals.
 */

#ifndef CPDIL_TRACE_MONOID_HPP
#define CPDIL_TRACE_MONOID_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "cpdil/errors.hpp"

namespace cpdil {

//=========================================================================
// Commutation graphs
//=========================================================================

// A finite simple graph whose edges are commutation relations between
// letters. Vertices are kept sorted by identifier so that all derived
// orderings are independent of insertion order.
class CommutationGraph {
public:
  CommutationGraph() = default;

  CommutationGraph(std::vector<std::string> vertices,
                   const std::vector<std::pair<std::string, std::string>>& edges) {
    std::sort(vertices.begin(), vertices.end());
    for (size_t i = 0; i + 1 < vertices.size(); ++i)
      if (vertices[i] == vertices[i + 1])
        throw input_error("CommutationGraph: duplicate vertex '" + vertices[i] + "'");
    for (const auto& v : vertices)
      if (v.empty()) throw input_error("CommutationGraph: empty vertex identifier");
    vertices_ = std::move(vertices);
    for (const auto& [a, b] : edges) {
      int ia = index_of(a), ib = index_of(b);
      if (ia == ib) throw input_error("CommutationGraph: self-loop at '" + a + "'");
      edges_.insert({std::min(ia, ib), std::max(ia, ib)});
    }
  }

  int size() const { return static_cast<int>(vertices_.size()); }
  const std::vector<std::string>& vertices() const { return vertices_; }
  const std::set<std::pair<int, int>>& edges() const { return edges_; }
  const std::string& name(int v) const { return vertices_.at(static_cast<size_t>(v)); }

  int index_of(const std::string& v) const {
    auto it = std::lower_bound(vertices_.begin(), vertices_.end(), v);
    if (it == vertices_.end() || *it != v)
      throw input_error("CommutationGraph: unknown letter '" + v + "'");
    return static_cast<int>(it - vertices_.begin());
  }

  bool has_vertex(const std::string& v) const {
    return std::binary_search(vertices_.begin(), vertices_.end(), v);
  }

  // Letters commute iff they share an edge.
  bool adjacent(int u, int v) const {
    if (u == v) return false;
    return edges_.count({std::min(u, v), std::max(u, v)}) > 0;
  }

  int degree(int v) const {
    int d = 0;
    for (const auto& e : edges_)
      if (e.first == v || e.second == v) ++d;
    return d;
  }

  bool operator==(const CommutationGraph& o) const {
    return vertices_ == o.vertices_ && edges_ == o.edges_;
  }

private:
  std::vector<std::string> vertices_;
  std::set<std::pair<int, int>> edges_;
};

struct GraphProperties {
  bool is_acyclic = false;
  bool has_3cycle = false;
  std::optional<std::string> leaf;  // a vertex of degree <= 1, when acyclic
};

inline GraphProperties graph_properties(const CommutationGraph& g) {
  GraphProperties p;
  // Forest check by union-find.
  std::vector<int> parent(static_cast<size_t>(g.size()));
  for (int i = 0; i < g.size(); ++i) parent[static_cast<size_t>(i)] = i;
  auto find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  p.is_acyclic = true;
  for (const auto& [u, v] : g.edges()) {
    int ru = find(u), rv = find(v);
    if (ru == rv) {
      p.is_acyclic = false;
      break;
    }
    parent[static_cast<size_t>(ru)] = rv;
  }
  for (const auto& [u, v] : g.edges()) {
    for (int w = 0; w < g.size(); ++w)
      if (g.adjacent(u, w) && g.adjacent(v, w)) p.has_3cycle = true;
  }
  if (p.is_acyclic) {
    for (int v = 0; v < g.size(); ++v)
      if (g.degree(v) <= 1) {
        p.leaf = g.name(v);
        break;
      }
  }
  return p;
}

// A cycle of vertex names, when the graph has one (used in error reports).
inline std::vector<std::string> find_cycle(const CommutationGraph& g) {
  int n = g.size();
  std::vector<int> state(static_cast<size_t>(n), 0), from(static_cast<size_t>(n), -1);
  for (int s = 0; s < n; ++s) {
    if (state[static_cast<size_t>(s)] != 0) continue;
    std::vector<std::pair<int, int>> stack{{s, -1}};
    while (!stack.empty()) {
      auto [v, par] = stack.back();
      stack.pop_back();
      if (state[static_cast<size_t>(v)] == 1) continue;
      state[static_cast<size_t>(v)] = 1;
      from[static_cast<size_t>(v)] = par;
      for (int w = 0; w < n; ++w) {
        if (!g.adjacent(v, w) || w == par) continue;
        if (state[static_cast<size_t>(w)] == 1) {
          std::vector<std::string> cyc{g.name(w)};
          for (int x = v; x != w && x != -1; x = from[static_cast<size_t>(x)])
            cyc.push_back(g.name(x));
          return cyc;
        }
        stack.push_back({w, v});
      }
    }
  }
  return {};
}

//=========================================================================
// Words and normal forms
//=========================================================================

// A word is a sequence of vertex indices into its graph.
using Word = std::vector<int>;

inline void check_word(const Word& w, const CommutationGraph& g) {
  for (int v : w)
    if (v < 0 || v >= g.size()) throw input_error("word contains an unknown letter index");
}

// Words are printed with "." separators; the separators are dropped when
// every identifier is a single character.
inline std::string word_to_string(const Word& w, const CommutationGraph& g) {
  check_word(w, g);
  bool compact = true;
  for (const auto& v : g.vertices()) compact = compact && v.size() == 1;
  std::string out;
  for (size_t i = 0; i < w.size(); ++i) {
    if (!compact && i > 0) out += '.';
    out += g.name(w[i]);
  }
  return out;
}

inline Word parse_word(const std::string& s, const CommutationGraph& g) {
  Word w;
  if (s.empty()) return w;
  if (s.find('.') != std::string::npos) {
    size_t pos = 0;
    while (pos <= s.size()) {
      size_t dot = s.find('.', pos);
      std::string tok = s.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
      if (tok.empty()) throw input_error("parse_word: empty letter in '" + s + "'");
      w.push_back(g.index_of(tok));
      if (dot == std::string::npos) break;
      pos = dot + 1;
    }
    return w;
  }
  // No separators: try the whole string as one identifier, else per character.
  if (g.has_vertex(s)) return {g.index_of(s)};
  for (char c : s) w.push_back(g.index_of(std::string(1, c)));
  return w;
}

// Foata normal form: the word is decomposed into maximal blocks of pairwise
// commuting letters such that each letter is placed in the earliest block
// after its last dependency; letters inside a block are sorted. Two words
// are equivalent in S(G) iff their Foata forms coincide.
inline Word foata_normal_form(const Word& w, const CommutationGraph& g) {
  check_word(w, g);
  std::vector<std::vector<int>> blocks;
  for (int x : w) {
    // dependent = equal or non-adjacent
    int j = -1;
    for (int b = static_cast<int>(blocks.size()) - 1; b >= 0; --b) {
      bool dep = false;
      for (int y : blocks[static_cast<size_t>(b)])
        if (y == x || !g.adjacent(x, y)) {
          dep = true;
          break;
        }
      if (dep) {
        j = b;
        break;
      }
    }
    if (j + 1 == static_cast<int>(blocks.size())) blocks.emplace_back();
    blocks[static_cast<size_t>(j + 1)].push_back(x);
  }
  Word out;
  for (auto& b : blocks) {
    std::sort(b.begin(), b.end());  // vertex indices follow identifier order
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

inline bool equivalent(const Word& w1, const Word& w2, const CommutationGraph& g) {
  return foata_normal_form(w1, g) == foata_normal_form(w2, g);
}

//=========================================================================
// Trace elements
//=========================================================================

// An element of the free semigroup with relations in G, canonicalized by
// its Foata normal form. The empty word is the unit e.
struct TraceElement {
  const CommutationGraph* graph = nullptr;
  Word normal_form;

  size_t length() const { return normal_form.size(); }
  bool is_unit() const { return normal_form.empty(); }
  std::string str() const { return word_to_string(normal_form, *graph); }
  bool operator==(const TraceElement& o) const {
    return *graph == *o.graph && normal_form == o.normal_form;
  }
};

inline TraceElement trace(const Word& w, const CommutationGraph& g) {
  return TraceElement{&g, foata_normal_form(w, g)};
}

inline TraceElement trace(const std::string& s, const CommutationGraph& g) {
  return trace(parse_word(s, g), g);
}

inline TraceElement concat(const TraceElement& a, const TraceElement& b) {
  if (!(*a.graph == *b.graph)) throw input_error("concat: trace elements over different graphs");
  Word w = a.normal_form;
  w.insert(w.end(), b.normal_form.begin(), b.normal_form.end());
  return trace(w, *a.graph);
}

//=========================================================================
// Presentation graphs H(s)
//=========================================================================

struct PresentationEdge {
  int a = 0;      // node indices
  int b = 0;
  int pos = 0;    // nodes[a] and nodes[b] differ by the swap at (pos, pos+1)
};

// The graph H(s): nodes are all presentations of s, edges are single swaps
// of adjacent commuting letters. Built by BFS; connected by construction.
struct PresentationGraph {
  std::vector<Word> nodes;
  std::vector<PresentationEdge> edges;

  int node_index(const Word& w) const {
    for (size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == w) return static_cast<int>(i);
    return -1;
  }
};

inline PresentationGraph presentations(const TraceElement& s, size_t cap = 10000) {
  const CommutationGraph& g = *s.graph;
  PresentationGraph h;
  std::map<Word, int> seen;
  std::queue<int> queue;
  h.nodes.push_back(s.normal_form);
  seen[s.normal_form] = 0;
  queue.push(0);
  std::set<std::pair<int, int>> edge_set;
  while (!queue.empty()) {
    int cur = queue.front();
    queue.pop();
    Word w = h.nodes[static_cast<size_t>(cur)];
    for (size_t p = 0; p + 1 < w.size(); ++p) {
      if (!g.adjacent(w[p], w[p + 1])) continue;
      Word u = w;
      std::swap(u[p], u[p + 1]);
      auto it = seen.find(u);
      int other;
      if (it == seen.end()) {
        if (h.nodes.size() >= cap)
          throw resource_error("presentations: class size exceeds cap (" + std::to_string(cap) +
                               "), partial count " + std::to_string(h.nodes.size()));
        other = static_cast<int>(h.nodes.size());
        h.nodes.push_back(u);
        seen[u] = other;
        queue.push(other);
      } else {
        other = it->second;
      }
      auto key = std::minmax(cur, other);
      if (edge_set.insert({key.first, key.second}).second)
        h.edges.push_back({cur, other, static_cast<int>(p)});
    }
  }
  return h;
}

//=========================================================================
// Enumeration of trace classes
//=========================================================================

// One TraceElement per equivalence class of length <= max_len, each in
// normal form, sorted by (length, lexicographic on letter identifiers).
inline std::vector<TraceElement> enumerate_words(const CommutationGraph& g, size_t max_len) {
  std::vector<TraceElement> out;
  std::vector<Word> level{Word{}};
  out.push_back(TraceElement{&g, {}});
  for (size_t len = 1; len <= max_len; ++len) {
    std::set<Word> next;
    for (const auto& w : level)
      for (int v = 0; v < g.size(); ++v) {
        Word u = w;
        u.push_back(v);
        next.insert(foata_normal_form(u, g));
      }
    level.assign(next.begin(), next.end());
    // std::set<Word> sorts lexicographically on indices = identifier order.
    for (const auto& w : level) out.push_back(TraceElement{&g, w});
  }
  return out;
}

} // namespace cpdil

#endif
