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

#ifndef CPDIL_EMBEDDING_HPP
#define CPDIL_EMBEDDING_HPP

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cpdil/matrix_core.hpp"
#include "cpdil/subproduct.hpp"
#include "cpdil/trace_monoid.hpp"

namespace cpdil {

//=========================================================================
// Unitary flip systems on Y_a = (+)_t X_t
//=========================================================================

// All letter spaces of the ambient system coincide: Y_a = (+)_{t} X_t with
// one summand per letter of the alphabet. f_{s,t} : Y_s (x) Y_t -> Y_t (x) Y_s
// acts blockwise on the decomposition into summands X_u (x) X_v.
struct FlipSystem {
  CommutationGraph graph;
  int letter_space_dim = 0;            // m = sum of letter fiber dimensions
  std::vector<int> block_dims;         // dim X_t per letter
  std::vector<int> block_offsets;      // offset of X_t inside Y
  std::map<std::pair<int, int>, CMatrix> flips;  // ordered edge pair -> f_{s,t}

  const CMatrix& flip(int s, int t) const {
    auto it = flips.find({s, t});
    if (it == flips.end())
      throw input_error("FlipSystem: no flip for non-commuting pair (" + graph.name(s) + "," +
                        graph.name(t) + ")");
    return it->second;
  }
};

// The displayed block matrix: the (s,t) summand maps into the (t,s) summand
// by (U_{t,s})* U_{s,t} with defect couplings 1 - U*U, and every other
// summand X_u (x) X_v passes through to its counterpart unchanged.
inline FlipSystem build_flip_system(const SubproductSystem& x, const ToleranceProfile& tol = {}) {
  const CommutationGraph& g = x.graph();
  GraphProperties props = graph_properties(g);
  if (props.has_3cycle)
    throw precondition_error("build_flip_system: the commutation graph contains a 3-cycle");
  if (x.cutoff() < 2) throw precondition_error("build_flip_system: cutoff must be at least 2");
  {
    SystemReport v = validate_system(x, tol);
    if (!v.pass)
      throw domain_error("build_flip_system: system fails validation, co-isometry residual " +
                         std::to_string(v.max_coisometry_residual) + ", associativity residual " +
                         std::to_string(v.max_associativity_residual));
  }
  FlipSystem fs;
  fs.graph = g;
  for (int v = 0; v < g.size(); ++v) {
    fs.block_offsets.push_back(fs.letter_space_dim);
    fs.block_dims.push_back(x.letter_dim(v));
    fs.letter_space_dim += x.letter_dim(v);
  }
  const int m = fs.letter_space_dim;
  auto summand = [&](int u, int v) {
    // column range of X_u (x) X_v inside Y (x) Y
    return std::pair<int, int>{fs.block_offsets[static_cast<size_t>(u)] * m +
                                   fs.block_offsets[static_cast<size_t>(v)],
                               0};
  };
  (void)summand;
  for (const auto& [s, t] : g.edges()) {
    for (auto [a, b] : {std::pair<int, int>{s, t}, std::pair<int, int>{t, s}}) {
      // f_{a,b} : Y_a (x) Y_b -> Y_b (x) Y_a
      TraceElement la = trace(Word{a}, g), lb = trace(Word{b}, g);
      CMatrix uab = x.product(x.index_of(la), x.index_of(lb));
      CMatrix uba = x.product(x.index_of(lb), x.index_of(la));
      CMatrix f = CMatrix::Zero(m * m, m * m);
      auto put_block = [&](int u_src, int v_src, int u_dst, int v_dst, const CMatrix& blk) {
        // source summand X_{u_src} (x) X_{v_src}, destination X_{u_dst} (x) X_{v_dst}
        int du_s = fs.block_dims[static_cast<size_t>(u_src)];
        int dv_s = fs.block_dims[static_cast<size_t>(v_src)];
        int dv_d = fs.block_dims[static_cast<size_t>(v_dst)];
        for (int i = 0; i < du_s; ++i)
          for (int j = 0; j < dv_s; ++j)
            for (int k = 0; k < blk.rows(); ++k) {
              int ki = k / dv_d, kj = k % dv_d;
              int row = (fs.block_offsets[static_cast<size_t>(u_dst)] + ki) * m +
                        fs.block_offsets[static_cast<size_t>(v_dst)] + kj;
              int col = (fs.block_offsets[static_cast<size_t>(u_src)] + i) * m +
                        fs.block_offsets[static_cast<size_t>(v_src)] + j;
              f(row, col) = blk(k, i * dv_s + j);
            }
      };
      const int da = fs.block_dims[static_cast<size_t>(a)];
      const int db = fs.block_dims[static_cast<size_t>(b)];
      // (a,b) -> (b,a): (U_{b,a})* U_{a,b}
      put_block(a, b, b, a, CMatrix(uba.adjoint() * uab));
      // (b,a) -> (b,a): 1 - (U_{b,a})* U_{b,a}
      put_block(b, a, b, a, CMatrix(cidentity(db * da) - uba.adjoint() * uba));
      // (a,b) -> (a,b): 1 - (U_{a,b})* U_{a,b}
      put_block(a, b, a, b, CMatrix(cidentity(da * db) - uab.adjoint() * uab));
      // (b,a) -> (a,b): (U_{a,b})* U_{b,a}
      put_block(b, a, a, b, CMatrix(uab.adjoint() * uba));
      // remaining summands pass through unchanged
      for (int u = 0; u < g.size(); ++u)
        for (int v = 0; v < g.size(); ++v) {
          if ((u == a && v == b) || (u == b && v == a)) continue;
          put_block(u, v, u, v,
                    cidentity(fs.block_dims[static_cast<size_t>(u)] *
                              fs.block_dims[static_cast<size_t>(v)]));
        }
      fs.flips[{a, b}] = f;
    }
  }
  return fs;
}

//=========================================================================
// Rewriting-path maps
//=========================================================================

// (I_pre (x) f (x) I_post) M, with f acting on the middle tensor slot.
inline CMatrix apply_site_op(const CMatrix& M, const CMatrix& f, Eigen::Index pre,
                             Eigen::Index post) {
  Eigen::Index min = f.cols(), mout = f.rows();
  if (M.rows() != pre * min * post) throw input_error("apply_site_op: row count mismatch");
  CMatrix out(pre * mout * post, M.cols());
  const CMatrix ft = f.transpose();
  for (Eigen::Index c = 0; c < M.cols(); ++c)
    for (Eigen::Index a = 0; a < pre; ++a) {
      Eigen::Map<const CMatrix> in(M.data() + c * M.rows() + a * min * post, post, min);
      Eigen::Map<CMatrix> o(out.data() + c * out.rows() + a * mout * post, post, mout);
      o = in * ft;
    }
  return out;
}

namespace detail {
inline int swap_position(const Word& from, const Word& to, const CommutationGraph& g) {
  if (from.size() != to.size()) return -1;
  int pos = -1;
  for (size_t i = 0; i < from.size(); ++i)
    if (from[i] != to[i]) {
      if (i + 1 >= from.size()) return -1;
      if (from[i] != to[i + 1] || from[i + 1] != to[i]) return -1;
      if (!g.adjacent(from[i], from[i + 1])) return -1;
      pos = static_cast<int>(i);
      // all later letters must agree
      for (size_t j = i + 2; j < from.size(); ++j)
        if (from[j] != to[j]) return -1;
      break;
    }
  return pos;
}

inline Eigen::Index ipow(Eigen::Index b, int e) {
  Eigen::Index r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}
} // namespace detail

// Applies the composed flips along a rewriting path to the columns of M.
// The path is a sequence of presentations, consecutive ones differing by one
// swap of adjacent commuting letters.
inline CMatrix apply_flip_path(const FlipSystem& fs, const std::vector<Word>& path, CMatrix M) {
  if (path.size() <= 1) return M;
  const Eigen::Index m = fs.letter_space_dim;
  const int n = static_cast<int>(path.front().size());
  for (size_t step = 0; step + 1 < path.size(); ++step) {
    int pos = detail::swap_position(path[step], path[step + 1], fs.graph);
    if (pos < 0)
      throw input_error("flip path: step " + std::to_string(step) +
                        " is not a single commuting-adjacent swap");
    const CMatrix& f = fs.flip(path[step][static_cast<size_t>(pos)],
                               path[step][static_cast<size_t>(pos) + 1]);
    M = apply_site_op(M, f, detail::ipow(m, pos), detail::ipow(m, n - pos - 2));
  }
  return M;
}

// f_p as a dense matrix on m^n; the empty path gives the identity.
inline CMatrix flip_path_map(const FlipSystem& fs, const std::vector<Word>& path) {
  if (path.empty()) return cidentity(1);
  const Eigen::Index dim = detail::ipow(fs.letter_space_dim, static_cast<int>(path[0].size()));
  return apply_flip_path(fs, path, cidentity(dim));
}

//=========================================================================
// Confluence of cycles in H(s)
//=========================================================================

namespace detail {

// BFS tree of a presentation graph; returns parent node and parent edge ids.
struct BfsTree {
  std::vector<int> parent;
  std::vector<int> depth;
};

inline BfsTree bfs_tree(const PresentationGraph& h) {
  BfsTree t;
  t.parent.assign(h.nodes.size(), -1);
  t.depth.assign(h.nodes.size(), -1);
  std::deque<int> q{0};
  t.depth[0] = 0;
  std::vector<std::vector<int>> adj(h.nodes.size());
  for (const auto& e : h.edges) {
    adj[static_cast<size_t>(e.a)].push_back(e.b);
    adj[static_cast<size_t>(e.b)].push_back(e.a);
  }
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    for (int w : adj[static_cast<size_t>(v)])
      if (t.depth[static_cast<size_t>(w)] < 0) {
        t.depth[static_cast<size_t>(w)] = t.depth[static_cast<size_t>(v)] + 1;
        t.parent[static_cast<size_t>(w)] = v;
        q.push_back(w);
      }
  }
  return t;
}

inline std::vector<int> tree_path_to_root(const BfsTree& t, int v) {
  std::vector<int> p{v};
  while (t.parent[static_cast<size_t>(v)] >= 0) {
    v = t.parent[static_cast<size_t>(v)];
    p.push_back(v);
  }
  return p;
}

// Node cycle through a non-tree edge (a,b): a -> ... -> lca -> ... -> b -> a.
inline std::vector<int> fundamental_cycle(const BfsTree& t, int a, int b) {
  std::vector<int> pa = tree_path_to_root(t, a), pb = tree_path_to_root(t, b);
  // strip the common tail past the LCA
  while (pa.size() > 1 && pb.size() > 1 && pa[pa.size() - 2] == pb[pb.size() - 2]) {
    pa.pop_back();
    pb.pop_back();
  }
  std::vector<int> cyc = pa;
  for (int i = static_cast<int>(pb.size()) - 2; i >= 0; --i)
    cyc.push_back(pb[static_cast<size_t>(i)]);
  cyc.push_back(a);
  return cyc;
}

// Operator-norm estimate of f_c - I by power iteration on the normal matrix
// (f_c - I); matrix-free, deterministic from the seed.
inline double cycle_residual_power(const FlipSystem& fs, const std::vector<Word>& path,
                                   Eigen::Index dim, std::uint64_t seed, int iters) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  CMatrix v(dim, 1);
  for (Eigen::Index i = 0; i < dim; ++i) v(i, 0) = Complex(nd(rng), nd(rng));
  v /= v.norm();
  std::vector<Word> rpath(path.rbegin(), path.rend());
  double sigma = 0.0;
  for (int it = 0; it < iters; ++it) {
    CMatrix av = apply_flip_path(fs, path, v) - v;           // (f_c - I) v, v unit
    sigma = std::max(sigma, av.norm());
    CMatrix w = apply_flip_path(fs, rpath, av) - av;         // (f_c* - I) (f_c - I) v
    double nrm = w.norm();
    if (nrm < 1e-300) return sigma;
    v = w / nrm;
  }
  CMatrix av = apply_flip_path(fs, path, v) - v;
  return std::max(sigma, av.norm());
}

} // namespace detail

struct ConfluenceReport {
  int cycles_checked = 0;
  double max_residual = 0.0;
  bool pass = false;
};

// Evaluates f_c over a fundamental cycle basis of H(s). Small spaces use a
// dense operator norm; larger ones a seeded power-iteration estimate (the
// matrix f_c - I is normal, so the estimate converges geometrically).
inline ConfluenceReport check_confluence(const FlipSystem& fs, const TraceElement& s,
                                         size_t cycle_budget = 10000,
                                         const ToleranceProfile& tol = {},
                                         std::uint64_t seed = 0, int power_iters = 25,
                                         Eigen::Index dense_threshold = 256) {
  PresentationGraph h = presentations(s, cycle_budget);
  detail::BfsTree t = detail::bfs_tree(h);
  std::set<std::pair<int, int>> tree_edges;
  for (size_t i = 0; i < h.nodes.size(); ++i)
    if (t.parent[i] >= 0) {
      auto mm = std::minmax(static_cast<int>(i), t.parent[i]);
      tree_edges.insert({mm.first, mm.second});
    }
  ConfluenceReport rep;
  const Eigen::Index dim = detail::ipow(fs.letter_space_dim, static_cast<int>(s.length()));
  for (const auto& e : h.edges) {
    auto mm = std::minmax(e.a, e.b);
    if (tree_edges.count({mm.first, mm.second})) continue;
    std::vector<int> cyc = detail::fundamental_cycle(t, e.a, e.b);
    std::vector<Word> path;
    for (int v : cyc) path.push_back(h.nodes[static_cast<size_t>(v)]);
    double res;
    if (dim <= dense_threshold) {
      res = op_norm(flip_path_map(fs, path) - cidentity(dim));
    } else {
      res = detail::cycle_residual_power(fs, path, dim,
                                         seed + 0x9e3779b97f4a7c15ULL * (rep.cycles_checked + 1),
                                         power_iters);
    }
    rep.max_residual = std::max(rep.max_residual, res);
    ++rep.cycles_checked;
  }
  rep.pass = rep.max_residual <= tol.eq_tol;
  return rep;
}

//=========================================================================
// Embedding X into the ambient product system Y
//=========================================================================

struct EmbeddedSystem {
  std::shared_ptr<const SubproductSystem> source;   // X
  std::shared_ptr<const SubproductSystem> ambient;  // Y, a product system
  FlipSystem flips;
  std::map<std::string, CMatrix> morphism;          // V_s : Y_s -> X_s
  std::map<std::string, Word> fixed_presentations;  // normal forms
  double max_eq1_residual = 0.0;                    // V_{st} U^Y = U^X (V_s (x) V_t)
  double max_coisometry_residual = 0.0;
};

namespace detail {

// BFS path between two presentations inside H(s).
inline std::vector<Word> presentation_path(const PresentationGraph& h, const Word& from,
                                           const Word& to) {
  int a = h.node_index(from), b = h.node_index(to);
  if (a < 0 || b < 0) throw input_error("presentation_path: word is not a presentation");
  std::vector<std::vector<int>> adj(h.nodes.size());
  for (const auto& e : h.edges) {
    adj[static_cast<size_t>(e.a)].push_back(e.b);
    adj[static_cast<size_t>(e.b)].push_back(e.a);
  }
  std::vector<int> prev(h.nodes.size(), -2);
  std::deque<int> q{a};
  prev[static_cast<size_t>(a)] = -1;
  while (!q.empty()) {
    int v = q.front();
    q.pop_front();
    if (v == b) break;
    for (int w : adj[static_cast<size_t>(v)])
      if (prev[static_cast<size_t>(w)] == -2) {
        prev[static_cast<size_t>(w)] = v;
        q.push_back(w);
      }
  }
  std::vector<int> nodes;
  for (int v = b; v != -1; v = prev[static_cast<size_t>(v)]) nodes.push_back(v);
  std::reverse(nodes.begin(), nodes.end());
  std::vector<Word> path;
  for (int v : nodes) path.push_back(h.nodes[static_cast<size_t>(v)]);
  return path;
}

} // namespace detail

// U^Y_{s,t} as the unique rewriting-path map from NF(s).NF(t) to NF(st).
inline CMatrix ambient_product(const FlipSystem& fs, const TraceElement& s,
                               const TraceElement& t, size_t cap = 10000) {
  TraceElement st = concat(s, t);
  Word cat = s.normal_form;
  cat.insert(cat.end(), t.normal_form.begin(), t.normal_form.end());
  PresentationGraph h = presentations(st, cap);
  std::vector<Word> path = detail::presentation_path(h, cat, st.normal_form);
  return flip_path_map(fs, path);
}

// The projection chain p_{a_1} (x) ... (x) p_{a_n} : Y^{(x)n} -> X_{a_1} (x) ...
inline CMatrix projection_chain(const FlipSystem& fs, const SubproductSystem& x, const Word& w) {
  CMatrix p = cidentity(1);
  for (int v : w) {
    CMatrix pv = CMatrix::Zero(fs.block_dims[static_cast<size_t>(v)], fs.letter_space_dim);
    for (int i = 0; i < fs.block_dims[static_cast<size_t>(v)]; ++i)
      pv(i, fs.block_offsets[static_cast<size_t>(v)] + i) = 1.0;
    p = tensor(p, pv);
  }
  (void)x;
  return p;
}

inline EmbeddedSystem embed(const SubproductSystem& x, const ToleranceProfile& tol = {}) {
  EmbeddedSystem out;
  out.source = std::make_shared<SubproductSystem>(x);
  out.flips = build_flip_system(x, tol);
  const CommutationGraph& g = x.graph();
  const int L = x.cutoff();
  auto words = enumerate_words(g, static_cast<size_t>(L));

  // Ambient fibers m^{|s|} and products along rewriting paths.
  std::vector<int> ydims;
  for (const auto& w : words)
    ydims.push_back(static_cast<int>(detail::ipow(out.flips.letter_space_dim,
                                                  static_cast<int>(w.length()))));
  std::map<std::pair<int, int>, CMatrix> yprod;
  for (size_t si = 1; si < words.size(); ++si)
    for (size_t ti = 1; ti < words.size(); ++ti) {
      if (words[si].length() + words[ti].length() > static_cast<size_t>(L)) continue;
      yprod[{static_cast<int>(si), static_cast<int>(ti)}] =
          ambient_product(out.flips, words[si], words[ti]);
    }
  out.ambient = std::make_shared<SubproductSystem>(g, L, ydims, std::move(yprod));

  // Morphism V_s = U^X o (p (x) ... (x) p) over the fixed presentation NF(s).
  for (const auto& w : words) {
    out.fixed_presentations[w.str()] = w.normal_form;
    CMatrix v = iterated_product(x, w.normal_form) * projection_chain(out.flips, x, w.normal_form);
    out.morphism[w.str()] = v;
    out.max_coisometry_residual = std::max(
        out.max_coisometry_residual, rel_residual(v * v.adjoint(), cidentity(v.rows())));
  }

  MorphismReport mrep = validate_morphism(*out.ambient, x, out.morphism, tol);
  out.max_eq1_residual = mrep.max_intertwining_residual;
  return out;
}

// Residual of the rewriting-path diagram between two presentations of one
// word: projections after the path map agree with the path-free projections,
// both followed by U^X.
inline double diagram_residual(const FlipSystem& fs, const SubproductSystem& x, const Word& p,
                               const Word& q, size_t cap = 10000) {
  const CommutationGraph& g = x.graph();
  TraceElement s = trace(p, g);
  if (!(s == trace(q, g))) throw input_error("diagram_residual: inequivalent presentations");
  PresentationGraph h = presentations(s, cap);
  std::vector<Word> path = detail::presentation_path(h, p, q);
  std::vector<Word> rpath(path.rbegin(), path.rend());
  CMatrix lhs_side = iterated_product(x, q) * projection_chain(fs, x, q);  // after the path
  // (U^X_q P_q f)* = f* (U^X_q P_q)*, applied matrix-free
  CMatrix lhs_adj = apply_flip_path(fs, rpath, lhs_side.adjoint());
  CMatrix rhs_adj = (iterated_product(x, p) * projection_chain(fs, x, p)).adjoint();
  return rel_residual(lhs_adj, rhs_adj);
}

} // namespace cpdil

#endif
