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

#ifndef CPDIL_DILATION_HPP
#define CPDIL_DILATION_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cpdil/embedding.hpp"
#include "cpdil/matrix_core.hpp"
#include "cpdil/subproduct.hpp"
#include "cpdil/trace_monoid.hpp"

namespace cpdil {

//=========================================================================
// Minimal isometric dilation towers (single lift)
//=========================================================================

// Truncated tower K_N = H (+) D (+) (E (x) D) (+) ... (+) (E^{(x)N-1} (x) D)
// with D the closure of the defect range inside E (x) H. The lift writes the
// value and the defect coordinates, then shifts deeper levels; the top level
// is cut by the truncation. Isometric away from the boundary, and minimal.
struct DilationTower {
  int base_dim = 0;
  int fiber_dim = 0;
  int levels = 0;
  std::vector<Eigen::Index> level_dims;  // [h, r, d r, ..., d^{N-1} r]
  CMatrix isometry;                      // V~ : E (x) K -> K
  CMatrix embed;                         // K x h inclusion of H
  bool minimal = true;
};

inline DilationTower minimal_isometric_dilation(const CMatrix& ttilde, int fiber_dim, int levels,
                                                const ToleranceProfile& tol = {},
                                                const CMatrix& defect_rotation = CMatrix()) {
  const Eigen::Index h = ttilde.rows();
  if (ttilde.cols() != fiber_dim * h)
    throw input_error("minimal_isometric_dilation: lift must map E (x) H -> H");
  double nrm = op_norm(ttilde);
  if (nrm > 1.0 + tol.eq_tol)
    throw domain_error("minimal_isometric_dilation: not a contraction, norm " +
                       std::to_string(nrm));
  CMatrix d = defect(ttilde, tol);
  CMatrix range = range_basis(d, 1e-7);  // dh x r
  if (defect_rotation.size() > 0) {
    if (defect_rotation.rows() != range.cols() || defect_rotation.cols() != range.cols())
      throw input_error("minimal_isometric_dilation: defect rotation has wrong size");
    range = range * defect_rotation;
  }
  CMatrix coords = range.adjoint() * d;  // r x dh
  const Eigen::Index r = range.cols();

  DilationTower t;
  t.base_dim = static_cast<int>(h);
  t.fiber_dim = fiber_dim;
  t.levels = levels;
  t.level_dims.push_back(h);
  Eigen::Index lv = r;
  for (int j = 0; j < levels; ++j) {
    t.level_dims.push_back(lv);
    lv *= fiber_dim;
  }
  std::vector<Eigen::Index> off(t.level_dims.size() + 1, 0);
  for (size_t i = 0; i < t.level_dims.size(); ++i) off[i + 1] = off[i] + t.level_dims[i];
  const Eigen::Index K = off.back();

  t.embed = CMatrix::Zero(K, h);
  t.embed.topRows(h) = cidentity(h);
  t.isometry = CMatrix::Zero(K, fiber_dim * K);
  for (int i = 0; i < fiber_dim; ++i) {
    // value and defect coordinates of x_i (x) H
    t.isometry.block(0, i * K, h, h) = ttilde.middleCols(i * h, h);
    t.isometry.block(off[1], i * K, r, h) = coords.middleCols(i * h, h);
    // shifts: x_i (x) level_j -> slot i of level_{j+1}
    for (int j = 1; j < levels; ++j) {
      Eigen::Index dj = t.level_dims[static_cast<size_t>(j)];
      t.isometry.block(off[static_cast<size_t>(j + 1)] + i * dj, i * K + off[static_cast<size_t>(j)],
                       dj, dj) = cidentity(dj);
    }
  }
  return t;
}

// T~ o (I_E (x) S~) : E (x) F (x) H -> H, the lift of the product of two
// representations of correspondences over the same space.
inline CMatrix compose_reps(const CMatrix& ttilde_e, const CMatrix& ttilde_f, int dim_e) {
  const Eigen::Index h = ttilde_e.rows();
  if (ttilde_f.rows() != h) throw input_error("compose_reps: space dimension mismatch");
  if (ttilde_e.cols() % h != 0 || ttilde_e.cols() != dim_e * h)
    throw input_error("compose_reps: left lift shape mismatch");
  return ttilde_e * tensor(cidentity(dim_e), ttilde_f);
}

//=========================================================================
// Working representations given by generator lifts
//=========================================================================

namespace dil {

// A representation of (a letter-subset restriction of) a product system,
// stored through its generator lifts on a space K that contains the original
// H via embed0. Word lifts are assembled on demand.
struct GenRep {
  std::shared_ptr<const SubproductSystem> sys;
  std::vector<int> letters;
  Eigen::Index dim = 0;
  std::map<int, CMatrix> lift;  // letter -> K x (d_letter K)
  CMatrix embed0;               // K x h0

  int letter_fiber_dim(int v) const { return sys->letter_dim(v); }
  bool has_letter(int v) const { return lift.count(v) > 0; }
};

inline GenRep from_representation(const Representation& t) {
  GenRep r;
  r.sys = t.system_ptr();
  r.dim = t.space_dim();
  r.embed0 = cidentity(r.dim);
  const CommutationGraph& g = r.sys->graph();
  for (int v = 0; v < g.size(); ++v) {
    r.letters.push_back(v);
    r.lift[v] = t.tilde(trace(Word{v}, g));
  }
  return r;
}

inline GenRep restrict_letters(const GenRep& r, const std::vector<int>& letters) {
  GenRep out = r;
  out.letters = letters;
  out.lift.clear();
  for (int v : letters) out.lift[v] = r.lift.at(v);
  return out;
}

// V~_s = V~_{s_1} o (I (x) V~_{s_2}) o ... o (U*_{s_1...s_n} (x) I_K)
inline CMatrix word_lift(const GenRep& r, const Word& presentation) {
  if (presentation.empty()) return cidentity(r.dim);
  CMatrix m = r.lift.at(presentation.back());
  for (int i = static_cast<int>(presentation.size()) - 2; i >= 0; --i) {
    int v = presentation[static_cast<size_t>(i)];
    m = r.lift.at(v) * tensor(cidentity(r.letter_fiber_dim(v)), m);
  }
  CMatrix u = iterated_product(*r.sys, presentation);
  return m * tensor(u.adjoint(), cidentity(r.dim));
}

// V~_s applied to columns without materializing the word lift; M has
// dim(X_s) * K rows.
inline CMatrix word_lift_apply(const GenRep& r, const Word& pres, CMatrix M) {
  if (pres.empty()) return M;
  CMatrix u = iterated_product(*r.sys, pres);
  M = apply_site_op(M, CMatrix(u.adjoint()), 1, r.dim);
  for (int k = static_cast<int>(pres.size()) - 1; k >= 0; --k) {
    Eigen::Index pre = 1;
    for (int i = 0; i < k; ++i) pre *= r.letter_fiber_dim(pres[static_cast<size_t>(i)]);
    M = apply_site_op(M, r.lift.at(pres[static_cast<size_t>(k)]), pre, 1);
  }
  return M;
}

// V~_s* applied to columns; M has K rows, the result dim(X_s) * K.
inline CMatrix word_lift_adjoint_apply(const GenRep& r, const Word& pres, CMatrix M) {
  if (pres.empty()) return M;
  for (size_t k = 0; k < pres.size(); ++k) {
    Eigen::Index pre = 1;
    for (size_t i = 0; i < k; ++i) pre *= r.letter_fiber_dim(pres[i]);
    M = apply_site_op(M, CMatrix(r.lift.at(pres[k]).adjoint()), pre, 1);
  }
  CMatrix u = iterated_product(*r.sys, pres);
  return apply_site_op(M, u, 1, r.dim);
}

// Orthonormal basis of span{ V~_w (X_w (x) H_0) : |w| <= depth }, grown one
// letter application at a time.
inline CMatrix interior_basis(const GenRep& r, int depth) {
  CMatrix basis = r.embed0;
  CMatrix frontier = r.embed0;
  for (int step = 0; step < depth && frontier.cols() > 0; ++step) {
    Eigen::Index total = 0;
    for (int v : r.letters) total += r.letter_fiber_dim(v) * frontier.cols();
    CMatrix cand(r.dim, total);
    Eigen::Index c = 0;
    for (int v : r.letters) {
      const CMatrix& lv = r.lift.at(v);
      int d = r.letter_fiber_dim(v);
      for (int i = 0; i < d; ++i) {
        cand.middleCols(c, frontier.cols()) =
            lv.middleCols(i * r.dim, r.dim) * frontier;
        c += frontier.cols();
      }
    }
    Eigen::Index before = basis.cols();
    grow_orthonormal_basis(basis, cand);
    frontier = basis.rightCols(basis.cols() - before);
  }
  return basis;
}

// max_g || (V~_g (I (x) B))* (V~_g (I (x) B)) - I ||, the isometry defect of
// the generator lifts on the interior spanned by B.
inline double interior_isometry_residual(const GenRep& r, const CMatrix& basis) {
  double worst = 0.0;
  for (int v : r.letters) {
    CMatrix m = r.lift.at(v) * tensor(cidentity(r.letter_fiber_dim(v)), basis);
    worst = std::max(worst, rel_residual(m.adjoint() * m, cidentity(m.cols())));
  }
  return worst;
}

// Twisted commutation residual on the interior for one edge:
// V~_a (I (x) V~_b) = V~_b (I (x) V~_a) (f_{a,b} (x) I_K).
inline double edge_commutation_residual(const GenRep& r, int a, int b, const CMatrix& basis) {
  const CommutationGraph& g = r.sys->graph();
  TraceElement la = trace(Word{a}, g), lb = trace(Word{b}, g);
  CMatrix uab = r.sys->product(r.sys->index_of(la), r.sys->index_of(lb));
  CMatrix uba = r.sys->product(r.sys->index_of(lb), r.sys->index_of(la));
  CMatrix f = uba.adjoint() * uab;  // X_a (x) X_b -> X_b (x) X_a
  int da = r.letter_fiber_dim(a), db = r.letter_fiber_dim(b);
  CMatrix restrict = tensor(cidentity(da * db), basis);
  CMatrix lhs = r.lift.at(a) * tensor(cidentity(da), r.lift.at(b)) * restrict;
  CMatrix rhs = r.lift.at(b) * tensor(cidentity(db), r.lift.at(a)) * tensor(f, cidentity(r.dim)) *
                restrict;
  return rel_residual(lhs, rhs);
}

// Generator-level co-extension residual of `cur` against the original rep
// whose generator lifts are `orig` on H_0: V~_g* J = (I (x) J) T~_g*.
inline double coextension_residual(const GenRep& cur, const std::map<int, CMatrix>& orig,
                                   Eigen::Index h0) {
  double worst = 0.0;
  for (int v : cur.letters) {
    if (!orig.count(v)) continue;
    int d = cur.letter_fiber_dim(v);
    CMatrix lhs = cur.lift.at(v).adjoint() * cur.embed0;
    CMatrix rhs = tensor(cidentity(d), cur.embed0) * orig.at(v).adjoint();
    (void)h0;
    worst = std::max(worst, rel_residual(lhs, rhs));
  }
  return worst;
}

//=========================================================================
// Functional lifts on spaces too large to materialize
//=========================================================================

// Lift on a raw extension space, applied one fiber slot at a time:
// apply_slot(i, M) = V~(e_i (x) M-columns), M of height raw_dim.
struct BigLift {
  int fiber_dim = 0;
  Eigen::Index raw_dim = 0;
  std::function<CMatrix(int, const CMatrix&)> apply_slot;
};

struct BigRep {
  Eigen::Index raw_dim = 0;
  Eigen::Index base_dim = 0;  // the previous space sits in the leading coordinates
  std::map<int, BigLift> lift;
  CMatrix embed0;  // raw_dim x h0
};

// Reach-compressed representation: the leading base coordinates are kept in
// full, the extension keeps only the components met by words of length
// <= budget from H_0.
inline GenRep trim_to_reach(const BigRep& big, const GenRep& prev, int budget) {
  const Eigen::Index K = big.raw_dim, base = big.base_dim;
  CMatrix qbasis(K - base, 0);  // orthonormal extension components
  CMatrix frontier = big.embed0;
  for (int step = 0; step < budget && frontier.cols() > 0; ++step) {
    std::vector<CMatrix> images;
    Eigen::Index total = 0;
    for (const auto& [v, bl] : big.lift) {
      for (int i = 0; i < bl.fiber_dim; ++i) {
        images.push_back(bl.apply_slot(i, frontier));
        total += frontier.cols();
      }
    }
    CMatrix cand(K, total);
    Eigen::Index c = 0;
    for (const auto& im : images) {
      cand.middleCols(c, im.cols()) = im;
      c += im.cols();
    }
    // split: base components are retained by construction; only new
    // extension components enlarge the basis
    CMatrix ext = cand.bottomRows(K - base);
    grow_orthonormal_basis(qbasis, ext);
    frontier = cand;
    // re-orthonormalize the frontier cheaply to keep column counts bounded
    CMatrix fb(K, 0);
    grow_orthonormal_basis(fb, frontier);
    frontier = fb;
  }
  const Eigen::Index q = qbasis.cols();
  GenRep out;
  out.sys = prev.sys;
  out.letters = prev.letters;
  out.dim = base + q;
  // project: P v = [v_base ; Q* v_ext]
  auto project = [&](const CMatrix& m) {
    CMatrix r(base + q, m.cols());
    r.topRows(base) = m.topRows(base);
    if (q > 0) r.bottomRows(q) = qbasis.adjoint() * m.bottomRows(K - base);
    return r;
  };
  // embed trimmed basis vectors back into the raw space
  auto unproject_cols = [&]() {
    CMatrix b = CMatrix::Zero(K, base + q);
    b.topLeftCorner(base, base) = cidentity(base);
    if (q > 0) b.bottomRightCorner(K - base, q) = qbasis;
    return b;
  };
  CMatrix bfull = unproject_cols();
  for (const auto& [v, bl] : big.lift) {
    CMatrix l(base + q, static_cast<Eigen::Index>(bl.fiber_dim) * (base + q));
    for (int i = 0; i < bl.fiber_dim; ++i)
      l.middleCols(i * (base + q), base + q) = project(bl.apply_slot(i, bfull));
    out.lift[v] = std::move(l);
  }
  out.embed0 = project(big.embed0);
  return out;
}

//=========================================================================
// One dilation round: minimal tower over a single generator
//=========================================================================

// Dilates the lift of `g` by its truncated minimal tower; all other letters
// are extended by zero. The result is trimmed to the reach of H_0.
inline GenRep tower_round(const GenRep& cur, int g, int levels, int budget,
                          const ToleranceProfile& tol) {
  const Eigen::Index K = cur.dim;
  const int d = cur.letter_fiber_dim(g);
  const CMatrix& a = cur.lift.at(g);
  CMatrix dmat = defect(a, tol);
  CMatrix range = range_basis(dmat, 1e-7);
  CMatrix coords = range.adjoint() * dmat;  // r x dK
  const Eigen::Index r = range.cols();
  if (r == 0) return cur;  // already isometric

  std::vector<Eigen::Index> ldims{K};
  Eigen::Index lv = r;
  for (int j = 0; j < levels; ++j) {
    ldims.push_back(lv);
    lv *= d;
  }
  std::vector<Eigen::Index> off(ldims.size() + 1, 0);
  for (size_t i = 0; i < ldims.size(); ++i) off[i + 1] = off[i] + ldims[i];
  const Eigen::Index raw = off.back();

  BigRep big;
  big.raw_dim = raw;
  big.base_dim = K;
  big.embed0 = CMatrix::Zero(raw, cur.embed0.cols());
  big.embed0.topRows(K) = cur.embed0;

  for (int v : cur.letters) {
    BigLift bl;
    bl.fiber_dim = cur.letter_fiber_dim(v);
    bl.raw_dim = raw;
    if (v == g) {
      bl.apply_slot = [=, &cur](int i, const CMatrix& m) {
        CMatrix out = CMatrix::Zero(raw, m.cols());
        const CMatrix& av = cur.lift.at(g);
        out.topRows(K) = av.middleCols(i * K, K) * m.topRows(K);
        out.middleRows(off[1], r) += coords.middleCols(i * K, K) * m.topRows(K);
        for (int j = 1; j < levels; ++j) {
          Eigen::Index dj = ldims[static_cast<size_t>(j)];
          out.middleRows(off[static_cast<size_t>(j + 1)] + i * dj, dj) +=
              m.middleRows(off[static_cast<size_t>(j)], dj);
        }
        return out;
      };
    } else {
      bl.apply_slot = [=, &cur](int i, const CMatrix& m) {
        CMatrix out = CMatrix::Zero(raw, m.cols());
        const CMatrix& lv2 = cur.lift.at(v);
        out.topRows(K) = lv2.middleCols(i * K, K) * m.topRows(K);
        return out;
      };
    }
    big.lift[v] = std::move(bl);
  }
  return trim_to_reach(big, cur, budget);
}

//=========================================================================
// One-step joint co-extension of a commuting pair (grid construction)
//=========================================================================

// Joint isometric co-extension of an edge pair on the truncated grid
// K (+) sum_{i+j <= N} F^j (x) E^i (x) K, where the first generator writes its
// value and defect through the flip and the second prepends. Exact
// commutation relies on the lifts doubly commuting through the flip; the
// caller verifies the output and reports.
inline GenRep grid_pair_round(const GenRep& cur, int la, int lb, int levels, int budget,
                              const ToleranceProfile& tol) {
  const Eigen::Index K = cur.dim;
  const CommutationGraph& g = cur.sys->graph();
  const int da = cur.letter_fiber_dim(la), db = cur.letter_fiber_dim(lb);
  const CMatrix& a = cur.lift.at(la);
  const CMatrix& b = cur.lift.at(lb);
  TraceElement ta = trace(Word{la}, g), tb = trace(Word{lb}, g);
  CMatrix uab = cur.sys->product(cur.sys->index_of(ta), cur.sys->index_of(tb));
  CMatrix uba = cur.sys->product(cur.sys->index_of(tb), cur.sys->index_of(ta));
  const CMatrix fab = uba.adjoint() * uab;  // E (x) F -> F (x) E
  const CMatrix fba = uab.adjoint() * uba;  // F (x) E -> E (x) F
  const CMatrix da_mat = defect(a, tol);
  const CMatrix db_mat = defect(b, tol);

  // grid levels (i = E-count, j = F-count), i + j <= N, content F^j E^i K
  const int N = levels;
  std::vector<std::pair<int, int>> levels_ij;
  std::map<std::pair<int, int>, Eigen::Index> level_off;
  std::vector<Eigen::Index> level_dim;
  Eigen::Index raw = 0;
  auto dpow = [](int base, int e) {
    Eigen::Index r = 1;
    for (int k = 0; k < e; ++k) r *= base;
    return r;
  };
  for (int i = 0; i <= N; ++i)
    for (int j = 0; i + j <= N; ++j) {
      levels_ij.push_back({i, j});
      level_off[{i, j}] = raw;
      Eigen::Index dim = dpow(da, i) * dpow(db, j) * K;
      level_dim.push_back(dim);
      raw += dim;
    }

  BigRep big;
  big.raw_dim = raw;
  big.base_dim = K;  // level (0,0) leads
  big.embed0 = CMatrix::Zero(raw, cur.embed0.cols());
  big.embed0.topRows(K) = cur.embed0;

  // move an E factor rightwards past j F factors: E F^j (x) rest -> F^j E (x) rest
  auto move_e_right = [=](CMatrix m, int j, Eigen::Index rest) {
    for (int p = 0; p < j; ++p)
      m = apply_site_op(m, fab, dpow(db, p), dpow(db, j - p - 1) * rest);
    return m;
  };
  // move an F factor leftwards past i E factors: E^i F (x) rest -> F E^i (x) rest
  auto move_f_left = [=](CMatrix m, int i, Eigen::Index rest) {
    for (int p = i - 1; p >= 0; --p)
      m = apply_site_op(m, fab, dpow(da, p), dpow(da, i - p - 1) * rest);
    return m;
  };

  BigLift bla;
  bla.fiber_dim = da;
  bla.raw_dim = raw;
  bla.apply_slot = [=](int xi, const CMatrix& m) {
    CMatrix out = CMatrix::Zero(raw, m.cols());
    for (size_t li = 0; li < levels_ij.size(); ++li) {
      auto [i, j] = levels_ij[li];
      Eigen::Index offs = level_off.at({i, j});
      Eigen::Index dim = level_dim[li];
      CMatrix blk = m.middleRows(offs, dim);
      if (blk.isZero(0)) continue;
      if (i == 0) {
        // x (x) F^j K: move x past the F factors, then act and write defect
        CMatrix cur_m = CMatrix::Zero(da * dim, m.cols());
        cur_m.middleRows(xi * dim, dim) = blk;  // e_{xi} (x) blk
        cur_m = move_e_right(cur_m, j, K);      // F^j E K
        // value: (I (x) A)
        out.middleRows(offs, dim) += apply_site_op(cur_m, a, dpow(db, j), 1);
        // defect into level (1, j) if present
        if (i + 1 + j <= N) {
          CMatrix dpart = apply_site_op(cur_m, da_mat, dpow(db, j), 1);
          out.middleRows(level_off.at({1, j}), dpow(db, j) * da * K) += dpart;
        }
      } else if (i + 1 + j <= N) {
        // pure shift: insert x as the first E factor (after the F block)
        Eigen::Index sub = dpow(da, i) * K;           // E^i K chunk per F index
        Eigen::Index outsub = dpow(da, i + 1) * K;
        Eigen::Index fcount = dpow(db, j);
        Eigen::Index dsto = level_off.at({i + 1, j});
        for (Eigen::Index phi = 0; phi < fcount; ++phi)
          out.middleRows(dsto + phi * outsub + xi * sub, sub) +=
              blk.middleRows(phi * sub, sub);
      }
    }
    return out;
  };

  BigLift blb;
  blb.fiber_dim = db;
  blb.raw_dim = raw;
  blb.apply_slot = [=](int yi, const CMatrix& m) {
    CMatrix out = CMatrix::Zero(raw, m.cols());
    for (size_t li = 0; li < levels_ij.size(); ++li) {
      auto [i, j] = levels_ij[li];
      Eigen::Index offs = level_off.at({i, j});
      Eigen::Index dim = level_dim[li];
      CMatrix blk = m.middleRows(offs, dim);
      if (blk.isZero(0)) continue;
      if (j == 0) {
        // y (x) E^i K: move y past the E factors, act, and move the defect back
        CMatrix cur_m = CMatrix::Zero(db * dim, m.cols());
        cur_m.middleRows(yi * dim, dim) = blk;  // e_{yi} (x) E^i K
        // move F rightwards past E^i: F E^i K -> E^i F K (gates f_{b,a})
        for (int p = 0; p < i; ++p)
          cur_m = apply_site_op(cur_m, fba, dpow(da, p), dpow(da, i - p - 1) * K);
        // value: (I_{E^i} (x) B)
        out.middleRows(offs, dim) += apply_site_op(cur_m, b, dpow(da, i), 1);
        // defect into level (i, 1): move the F factor back to the front
        if (i + 1 <= N) {
          CMatrix dpart = apply_site_op(cur_m, db_mat, dpow(da, i), 1);  // E^i F K
          dpart = move_f_left(dpart, i, K);                              // F E^i K
          out.middleRows(level_off.at({i, 1}), db * dpow(da, i) * K) += dpart;
        }
      } else if (i + j + 1 <= N) {
        // pure shift: prepend y as the first F factor
        Eigen::Index dsto = level_off.at({i, j + 1});
        out.middleRows(dsto + yi * dim, dim) += blk;
      }
    }
    return out;
  };

  big.lift[la] = std::move(bla);
  big.lift[lb] = std::move(blb);
  // other active letters ride along zero-extended
  for (int v : cur.letters) {
    if (v == la || v == lb) continue;
    BigLift bl;
    bl.fiber_dim = cur.letter_fiber_dim(v);
    bl.raw_dim = raw;
    bl.apply_slot = [=, &cur](int xi, const CMatrix& m) {
      CMatrix out = CMatrix::Zero(raw, m.cols());
      out.topRows(K) = cur.lift.at(v).middleCols(xi * K, K) * m.topRows(K);
      return out;
    };
    big.lift[v] = std::move(bl);
  }
  return trim_to_reach(big, cur, budget);
}

//=========================================================================
// Dilation traces
//=========================================================================

struct DilationRound {
  std::string label;
  Eigen::Index dim = 0;
  double coextension_residual = 0.0;  // against the round-0 input
  double isometry_residual = 0.0;     // worst generator, on the interior
  double commutation_residual = 0.0;  // worst edge, on the interior
};

struct DilationTrace {
  std::vector<DilationRound> rounds;
  bool pass = false;
  double final_isometry_residual = 0.0;
  double final_commutation_residual = 0.0;
  double final_coextension_residual = 0.0;
};

namespace impl {

inline DilationRound measure_round(const GenRep& r, const std::map<int, CMatrix>& orig,
                                   Eigen::Index h0, int depth, const std::string& label) {
  DilationRound round;
  round.label = label;
  round.dim = r.dim;
  round.coextension_residual = coextension_residual(r, orig, h0);
  CMatrix basis = interior_basis(r, depth);
  round.isometry_residual = interior_isometry_residual(r, basis);
  double comm = 0.0;
  for (size_t ai = 0; ai < r.letters.size(); ++ai)
    for (size_t bi = ai + 1; bi < r.letters.size(); ++bi) {
      int u = r.letters[ai], v = r.letters[bi];
      if (!r.sys->graph().adjacent(u, v)) continue;
      comm = std::max(comm, edge_commutation_residual(r, u, v, basis));
    }
  round.commutation_residual = comm;
  return round;
}

} // namespace impl

//=========================================================================
// Alternating dilation of a free pair
//=========================================================================

// The alternating scheme: odd rounds dilate the first generator minimally
// and extend the second by zero, even rounds swap roles. Once a generator
// lift is already isometric on the reach its round is a no-op and recorded
// as such.
inline GenRep dilate_pair_free_gen(GenRep cur, int la, int lb, int rounds, int levels, int budget,
                                   const ToleranceProfile& tol, DilationTrace* trace,
                                   const std::map<int, CMatrix>& orig, Eigen::Index h0) {
  for (int r = 1; r <= rounds; ++r) {
    int g = (r % 2 == 1) ? la : lb;
    CMatrix basis = interior_basis(cur, budget > 0 ? budget - 1 : 0);
    CMatrix restricted =
        cur.lift.at(g) * tensor(cidentity(cur.letter_fiber_dim(g)), basis);
    bool already =
        rel_residual(restricted.adjoint() * restricted, cidentity(restricted.cols())) <=
        0.1 * tol.eq_tol;
    if (!already) cur = tower_round(cur, g, levels, budget, tol);
    if (trace)
      trace->rounds.push_back(impl::measure_round(
          cur, orig, h0, budget > 0 ? budget - 1 : 0,
          std::string(already ? "noop " : "dilate ") + cur.sys->graph().name(g)));
  }
  return cur;
}

//=========================================================================
// The inductive acyclic dilation
//=========================================================================

using DilFn = std::function<std::pair<GenRep, CMatrix>(const GenRep&)>;

// Lemma-style lifting: returns an isometric dilation V of `t` whose
// r-restriction dilates `wgiven`, together with the embedding of wgiven's
// space into V's space. `embed_tw` embeds t's space into wgiven's.
struct LiftingResult {
  GenRep v;
  CMatrix embed_w;  // K_V x K_W
  CMatrix embed_t;  // K_V x K_T
  double matching_residual = 0.0;  // unitary identification of minimal parts
};

inline LiftingResult lifting_step(const DilFn& dil, int rletter, const GenRep& t,
                                  const GenRep& wgiven, const CMatrix& embed_tw, int budget,
                                  const ToleranceProfile& tol) {
  const Eigen::Index kw = wgiven.dim, kt = t.dim;
  const int d = wgiven.letter_fiber_dim(rletter);

  // 1. minimal summand of wgiven over the image of t's space
  GenRep wr = restrict_letters(wgiven, {rletter});
  wr.embed0 = embed_tw;  // reach from K_T
  CMatrix bmin = interior_basis(wr, budget);
  CMatrix brest = orth_complement(bmin);

  // spanning columns of the minimal part, in a fixed order
  auto spanning = [&](const GenRep& rep, const CMatrix& start, int depth) {
    std::vector<CMatrix> cols{start};
    CMatrix frontier = start;
    const CMatrix& lv = rep.lift.at(rletter);
    for (int s = 0; s < depth; ++s) {
      CMatrix next(rep.dim, d * frontier.cols());
      for (int i = 0; i < d; ++i)
        next.middleCols(i * frontier.cols(), frontier.cols()) =
            lv.middleCols(i * rep.dim, rep.dim) * frontier;
      cols.push_back(next);
      frontier = next;
    }
    Eigen::Index total = 0;
    for (const auto& c : cols) total += c.cols();
    CMatrix m(rep.dim, total);
    Eigen::Index at = 0;
    for (const auto& c : cols) {
      m.middleCols(at, c.cols()) = c;
      at += c.cols();
    }
    return m;
  };
  CMatrix cw = bmin.adjoint() * spanning(wgiven, embed_tw, budget);

  // W1: the rest summand of the r-lift
  CMatrix w1 = brest.adjoint() * wgiven.lift.at(rletter) * tensor(cidentity(d), brest);

  // 2. an isometric dilation of t and its copy of the minimal part
  auto [q, embed_tq] = dil(t);
  CMatrix cq = spanning(q, embed_tq, budget);

  // 3. unitary identification u : span(bmin) -> K_Q with u cw = cq
  CMatrix u;
  {
    Eigen::JacobiSVD<CMatrix> svd(cw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > 1e-10) ++rank;
    CMatrix pinv = svd.matrixV().leftCols(rank) *
                   svd.singularValues().head(rank).cwiseInverse().asDiagonal() *
                   svd.matrixU().leftCols(rank).adjoint();
    u = cq * pinv;
  }
  double match = rel_residual(u.adjoint() * u, cidentity(u.cols()));

  // 4. pre-representation Q (+) zero-extended W1 on K_Q (+) K_rest
  const Eigen::Index kq = q.dim, krest = brest.cols();
  GenRep pre;
  pre.sys = t.sys;
  pre.letters = t.letters;
  pre.dim = kq + krest;
  pre.embed0 = CMatrix::Zero(pre.dim, q.embed0.cols());
  pre.embed0.topRows(kq) = q.embed0;
  for (int v : t.letters) {
    int dv = t.letter_fiber_dim(v);
    CMatrix l = CMatrix::Zero(pre.dim, dv * pre.dim);
    const CMatrix& ql = q.lift.at(v);
    for (int i = 0; i < dv; ++i) {
      l.block(0, i * pre.dim, kq, kq) = ql.middleCols(i * kq, kq);
      if (v == rletter && krest > 0)
        l.block(kq, i * pre.dim + kq, krest, krest) = w1.middleCols(i * krest, krest);
    }
    pre.lift[v] = std::move(l);
  }

  // 5. dilate the pre-representation
  auto [vfinal, embed_pre] = dil(pre);

  LiftingResult out;
  out.matching_residual = match;
  out.v = std::move(vfinal);
  CMatrix embed_w_pre = CMatrix::Zero(kq + krest, kw);
  embed_w_pre.topRows(kq) = u * bmin.adjoint();
  if (krest > 0) embed_w_pre.bottomRows(krest) = brest.adjoint();
  out.embed_w = embed_pre * embed_w_pre;
  CMatrix embed_t_pre = CMatrix::Zero(kq + krest, kt);
  embed_t_pre.topRows(kq) = embed_tq;
  out.embed_t = embed_pre * embed_t_pre;
  return out;
}

// Recursive construction: peel a leaf, dilate the rest, interleave the
// two-letter and the remainder dilations through the shared letter.
inline std::pair<GenRep, CMatrix> dilate_idp(const GenRep& t, const std::vector<int>& letters,
                                             int rounds, int levels, int budget,
                                             const ToleranceProfile& tol, DilationTrace* trace,
                                             const std::map<int, CMatrix>& orig, Eigen::Index h0);

inline std::pair<GenRep, CMatrix> dilate_two_letters(const GenRep& t, int la, int lb, int rounds,
                                                     int levels, int budget,
                                                     const ToleranceProfile& tol,
                                                     DilationTrace* trace,
                                                     const std::map<int, CMatrix>& orig,
                                                     Eigen::Index h0) {
  const Eigen::Index k0 = t.dim;
  GenRep cur = t;
  if (t.sys->graph().adjacent(la, lb)) {
    CMatrix basis = interior_basis(cur, budget > 0 ? budget - 1 : 0);
    if (interior_isometry_residual(cur, basis) > 0.1 * tol.eq_tol) {
      cur = grid_pair_round(cur, la, lb, levels, budget, tol);
      if (trace)
        trace->rounds.push_back(impl::measure_round(cur, orig, h0, budget > 0 ? budget - 1 : 0,
                                                    "joint co-extension " +
                                                        t.sys->graph().name(la) + "," +
                                                        t.sys->graph().name(lb)));
    }
  } else {
    cur = dilate_pair_free_gen(cur, la, lb, rounds, levels, budget, tol, trace, orig, h0);
  }
  CMatrix embed = CMatrix::Zero(cur.dim, k0);
  embed.topRows(k0) = cidentity(k0);
  return {cur, embed};
}

inline std::pair<GenRep, CMatrix> dilate_idp(const GenRep& t, const std::vector<int>& letters,
                                             int rounds, int levels, int budget,
                                             const ToleranceProfile& tol, DilationTrace* trace,
                                             const std::map<int, CMatrix>& orig, Eigen::Index h0) {
  const CommutationGraph& g = t.sys->graph();
  if (letters.empty()) return {t, cidentity(t.dim)};
  if (letters.size() == 1) {
    GenRep cur = restrict_letters(t, letters);
    Eigen::Index k0 = cur.dim;
    cur = tower_round(cur, letters[0], levels, budget, tol);
    if (trace)
      trace->rounds.push_back(impl::measure_round(cur, orig, h0, budget > 0 ? budget - 1 : 0,
                                                  "dilate " + g.name(letters[0])));
    CMatrix embed = CMatrix::Zero(cur.dim, k0);
    embed.topRows(k0) = cidentity(k0);
    return {cur, embed};
  }
  if (letters.size() == 2) {
    GenRep cur = restrict_letters(t, letters);
    return dilate_two_letters(cur, letters[0], letters[1], rounds, levels, budget, tol, trace,
                              orig, h0);
  }

  // peel a leaf of the induced subgraph
  auto induced_degree = [&](int v) {
    int deg = 0;
    for (int w : letters)
      if (w != v && g.adjacent(v, w)) ++deg;
    return deg;
  };
  int leaf = -1, nb = -1;
  for (int v : letters)
    if (induced_degree(v) <= 1) {
      leaf = v;
      break;
    }
  if (leaf < 0) throw precondition_error("dilate_idp: induced subgraph has no leaf (cycle)");
  for (int w : letters)
    if (w != leaf && g.adjacent(leaf, w)) nb = w;
  if (nb < 0)
    for (int w : letters)
      if (w != leaf) {
        nb = w;
        break;
      }

  std::vector<int> s1;
  for (int v : letters)
    if (v != leaf) s1.push_back(v);
  std::vector<int> s0{std::min(leaf, nb), std::max(leaf, nb)};

  DilFn dil0 = [&](const GenRep& rep) {
    return dilate_two_letters(rep, s0[0], s0[1], rounds, levels, budget, tol, trace, orig, h0);
  };
  DilFn dil1 = [&](const GenRep& rep) {
    return dilate_idp(rep, s1, rounds, levels, budget, tol, trace, orig, h0);
  };

  // W0: isometric dilation of the remainder
  auto [w, embed_tw] = dil1(restrict_letters(t, s1));
  GenRep v = restrict_letters(t, s0);
  CMatrix embed_vw = embed_tw;  // K_V (=K_T) -> K_W initially

  for (int r = 0; r < rounds; ++r) {
    // V-side: dilate the pair so that its shared-letter part dilates W's
    GenRep wb = restrict_letters(w, {nb});
    LiftingResult lv = lifting_step(dil0, nb, v, wb, embed_vw, budget, tol);
    // W-side: dilate the remainder so that its shared-letter part dilates V's
    GenRep vb = restrict_letters(lv.v, {nb});
    LiftingResult lw = lifting_step(dil1, nb, w, vb, lv.embed_w, budget, tol);
    bool stable = lv.v.dim == v.dim && lw.v.dim == w.dim;
    v = std::move(lv.v);
    w = std::move(lw.v);
    embed_vw = lw.embed_w;  // K_V -> K_W(current)
    if (stable) break;
  }

  // assemble: letters of s1 live on K_W; the leaf lift is transported from V
  GenRep out = w;
  out.letters = letters;
  std::sort(out.letters.begin(), out.letters.end());
  {
    int dlf = t.letter_fiber_dim(leaf);
    const CMatrix& vleaf = v.lift.at(leaf);
    CMatrix lifted = embed_vw * vleaf * tensor(cidentity(dlf), CMatrix(embed_vw.adjoint()));
    out.lift[leaf] = std::move(lifted);
  }
  // the original K_T sits at the leading coordinates of every step
  CMatrix embed = CMatrix::Zero(out.dim, t.dim);
  embed.topRows(t.dim) = cidentity(t.dim);
  if (trace)
    trace->rounds.push_back(impl::measure_round(out, orig, h0, budget > 0 ? budget - 1 : 0,
                                                "assemble " + g.name(leaf)));
  return {out, embed};
}

} // namespace dil

//=========================================================================
// Public entry points
//=========================================================================

// Word lifts of a generator representation covering the whole alphabet,
// materialized for every trace class within the cutoff.
inline Representation representation_from_gen(const dil::GenRep& r) {
  if (static_cast<int>(r.letters.size()) != r.sys->graph().size())
    throw structural_error("representation_from_gen: generator lifts must cover the alphabet");
  std::unordered_map<std::string, CMatrix> tildes;
  for (const auto& w : r.sys->words())
    tildes[w.str()] = dil::word_lift(r, w.normal_form);
  return Representation(r.sys, static_cast<int>(r.dim), std::move(tildes));
}

struct DilationResult {
  Representation representation;
  dil::GenRep gen;
  CMatrix embed;  // K x H inclusion of the input space
  DilationTrace trace;
};

namespace dil {

inline DilationTrace finish_trace(DilationTrace trace, const GenRep& out,
                                  const std::map<int, CMatrix>& orig, Eigen::Index h0,
                                  int depth, const ToleranceProfile& tol) {
  DilationRound fin = impl::measure_round(out, orig, h0, depth, "final");
  trace.rounds.push_back(fin);
  trace.final_isometry_residual = fin.isometry_residual;
  trace.final_commutation_residual = fin.commutation_residual;
  trace.final_coextension_residual = fin.coextension_residual;
  double gate = 10.0 * tol.eq_tol;
  trace.pass = fin.isometry_residual <= gate && fin.commutation_residual <= gate &&
               fin.coextension_residual <= gate;
  return trace;
}

} // namespace dil

// The alternating construction for the free semigroup on two generators.
inline DilationResult dilate_free_pair(const Representation& t, int rounds, int levels,
                                       const ToleranceProfile& tol = {}, int budget = -1) {
  const CommutationGraph& g = t.system().graph();
  if (g.size() != 2 || !g.edges().empty())
    throw precondition_error("dilate_free_pair: need the edgeless two-letter graph");
  if (budget < 0) budget = std::max(1, levels - 1);
  dil::GenRep start = dil::from_representation(t);
  std::map<int, CMatrix> orig = start.lift;
  DilationTrace trace;
  dil::GenRep out = dil::dilate_pair_free_gen(start, 0, 1, rounds, levels, budget, tol, &trace,
                                              orig, t.space_dim());
  DilationResult res;
  res.trace = dil::finish_trace(std::move(trace), out, orig, t.space_dim(),
                                std::max(0, budget - 1), tol);
  res.embed = CMatrix::Zero(out.dim, t.space_dim());
  res.embed.topRows(t.space_dim()) = cidentity(t.space_dim());
  res.representation = representation_from_gen(out);
  res.gen = std::move(out);
  return res;
}

// Inductive isometric dilation over an acyclic commutation graph.
inline DilationResult dilate_acyclic(const Representation& t, int rounds, int levels,
                                     const ToleranceProfile& tol = {}, int budget = -1) {
  const CommutationGraph& g = t.system().graph();
  GraphProperties props = graph_properties(g);
  if (!props.is_acyclic) {
    std::string cyc;
    for (const auto& v : find_cycle(g)) cyc += (cyc.empty() ? "" : "-") + v;
    throw precondition_error("dilate_acyclic: commutation graph has a cycle (" + cyc + ")");
  }
  if (budget < 0) budget = std::max(1, levels - 1);
  dil::GenRep start = dil::from_representation(t);
  std::map<int, CMatrix> orig = start.lift;
  DilationTrace trace;
  std::vector<int> letters;
  for (int v = 0; v < g.size(); ++v) letters.push_back(v);
  auto [out, embed] = dil::dilate_idp(start, letters, rounds, levels, budget, tol, &trace, orig,
                                      t.space_dim());
  DilationResult res;
  res.trace = dil::finish_trace(std::move(trace), out, orig, t.space_dim(),
                                std::max(0, budget - 1), tol);
  res.embed = std::move(embed);
  res.representation = representation_from_gen(out);
  res.gen = std::move(out);
  return res;
}

//=========================================================================
// Chains of co-extensions and dilations
//=========================================================================

enum class ChainMode { coextension, dilation };

struct ChainLimit {
  CMatrix op;              // the operator on the final space
  double max_residual = 0.0;
  double norm_bound = 0.0;
  bool all_isometric = false;
};

// Finite-chain analogue of the SOT limit lemmas: verifies the chain property
// through the embeddings, returns the operator on the largest space.
inline ChainLimit assemble_chain_limit(const std::vector<CMatrix>& ops,
                                       const std::vector<CMatrix>& embeds, ChainMode mode,
                                       int powers = 4, const ToleranceProfile& tol = {}) {
  if (ops.empty()) throw input_error("assemble_chain_limit: empty chain");
  if (embeds.size() + 1 != ops.size())
    throw input_error("assemble_chain_limit: need one embedding per consecutive pair");
  ChainLimit out;
  double c = 0.0;
  bool all_iso = true;
  for (const auto& t : ops) {
    c = std::max(c, op_norm(t));
    all_iso = all_iso && rel_residual(t.adjoint() * t, cidentity(t.cols())) <= tol.eq_tol;
  }
  for (size_t k = 0; k + 1 < ops.size(); ++k) {
    const CMatrix& e = embeds[k];
    if (e.rows() != ops[k + 1].rows() || e.cols() != ops[k].rows())
      throw input_error("assemble_chain_limit: embedding shape mismatch at step " +
                        std::to_string(k));
    if (rel_residual(e.adjoint() * e, cidentity(e.cols())) > tol.eq_tol)
      throw structural_error("assemble_chain_limit: embedding " + std::to_string(k) +
                             " is not an isometry");
    double res = 0.0;
    if (mode == ChainMode::coextension) {
      res = rel_residual(ops[k + 1].adjoint() * e, e * ops[k].adjoint());
    } else {
      CMatrix pk = ops[k], pk1 = cidentity(ops[k + 1].rows());
      for (int j = 1; j <= powers; ++j) {
        pk1 = (j == 1) ? ops[k + 1] : CMatrix(pk1 * ops[k + 1]);
        CMatrix lhs = e.adjoint() * pk1 * e;
        res = std::max(res, rel_residual(lhs, pk));
        pk = pk * ops[k];
      }
      pk = ops[k];
    }
    if (res > tol.eq_tol)
      throw structural_error("assemble_chain_limit: chain property fails at step " +
                             std::to_string(k) + ", residual " + std::to_string(res));
    out.max_residual = std::max(out.max_residual, res);
  }
  out.op = ops.back();
  out.norm_bound = c;
  double nrm = op_norm(out.op);
  if (nrm > c + tol.eq_tol)
    throw structural_error("assemble_chain_limit: norm bound violated, " + std::to_string(nrm));
  out.all_isometric = all_iso;
  return out;
}

//=========================================================================
// Zig-zag unitarization
//=========================================================================

struct ZigzagRound {
  std::string label;
  Eigen::Index dim = 0;
  double max_isometry_residual = 0.0;    // on the previous space
  double max_coisometry_residual = 0.0;  // on the previous space
  double max_commutation_residual = 0.0; // worst edge, on the previous space
  double compression_residual = 0.0;     // words up to `levels` against the input
};

struct ZigzagReport {
  std::vector<ZigzagRound> rounds;
  bool used_fallback = false;  // cyclic graph: simultaneous tower steps
  double final_commutation_residual = 0.0;
  double final_unitarity_residual = 0.0;
  bool closed = false;
};

namespace dil {

// Simultaneous tower co-extension: every generator writes its own defect
// branch into a shared tower. Does not preserve commutation; used when the
// graph is cyclic and no commuting co-extension is available.
inline std::map<int, CMatrix> simultaneous_tower(const std::map<int, CMatrix>& ts, int levels) {
  const Eigen::Index k = ts.begin()->second.rows();
  std::vector<int> keys;
  std::vector<CMatrix> coords;
  Eigen::Index e = 0;
  for (const auto& [v, t] : ts) {
    CMatrix d = defect(t);
    CMatrix range = range_basis(d, 1e-7);
    keys.push_back(v);
    coords.push_back(range.adjoint() * d);
    e += range.cols();
  }
  const Eigen::Index kk = k + levels * e;
  std::map<int, CMatrix> out;
  Eigen::Index branch = 0;
  for (size_t i = 0; i < keys.size(); ++i) {
    CMatrix m = CMatrix::Zero(kk, kk);
    m.topLeftCorner(k, k) = ts.at(keys[i]);
    m.block(k + branch, 0, coords[i].rows(), k) = coords[i];
    for (int j = 0; j + 1 < levels; ++j)
      m.block(k + (j + 1) * e, k + j * e, e, e) = cidentity(e);
    out[keys[i]] = std::move(m);
    branch += coords[i].rows();
  }
  return out;
}

} // namespace dil

// Alternates isometric co-extension of the tuple with co-isometric extension
// (the same construction on the adjoints). On acyclic graphs the joint
// co-extension preserves edge commutation and the interior residuals close;
// on cyclic graphs the simultaneous-tower fallback records which residual
// refuses to close. No non-existence claim is made either way.
inline ZigzagReport zigzag_unitary(const std::map<std::string, CMatrix>& ts,
                                   const CommutationGraph& g, int rounds, int levels,
                                   const ToleranceProfile& tol = {}) {
  if (ts.empty()) throw input_error("zigzag_unitary: empty tuple");
  std::map<int, CMatrix> cur;
  const Eigen::Index h0 = ts.begin()->second.rows();
  for (const auto& [name, t] : ts) {
    if (t.rows() != h0 || t.cols() != h0)
      throw input_error("zigzag_unitary: operators must be square and share one space");
    if (op_norm(t) > 1.0 + tol.eq_tol)
      throw domain_error("zigzag_unitary: '" + name + "' is not a contraction");
    cur[g.index_of(name)] = t;
  }
  for (const auto& [u, v] : g.edges())
    if (cur.count(u) && cur.count(v)) {
      double res = rel_residual(cur[u] * cur[v], cur[v] * cur[u]);
      if (res > 1e-6)
        throw domain_error("zigzag_unitary: edge pair (" + g.name(u) + "," + g.name(v) +
                           ") does not commute, residual " + std::to_string(res));
    }
  std::map<int, CMatrix> orig = cur;
  const bool acyclic = graph_properties(g).is_acyclic;

  auto sys = std::make_shared<SubproductSystem>(
      full_tensor_system(g, 2, std::vector<int>(static_cast<size_t>(g.size()), 1)));

  auto coext = [&](const std::map<int, CMatrix>& tuple) -> std::map<int, CMatrix> {
    if (!acyclic) return dil::simultaneous_tower(tuple, levels);
    dil::GenRep r;
    r.sys = sys;
    for (const auto& [v, t] : tuple) {
      r.letters.push_back(v);
      r.lift[v] = t;
    }
    r.dim = tuple.begin()->second.rows();
    r.embed0 = cidentity(r.dim);
    auto [out, embed] = dil::dilate_idp(r, r.letters, rounds, levels, 2, tol, nullptr, {}, r.dim);
    (void)embed;
    return out.lift;
  };

  ZigzagReport rep;
  rep.used_fallback = !acyclic;
  for (int round = 1; round <= rounds; ++round) {
    Eigen::Index kprev = cur.begin()->second.rows();
    bool odd = round % 2 == 1;
    if (odd) {
      cur = coext(cur);
    } else {
      std::map<int, CMatrix> adj;
      for (const auto& [v, t] : cur) adj[v] = t.adjoint();
      adj = coext(adj);
      for (auto& [v, t] : adj) t = t.adjoint().eval();
      cur = std::move(adj);
    }
    ZigzagRound zr;
    zr.label = odd ? "isometric co-extension" : "co-isometric extension";
    zr.dim = cur.begin()->second.rows();
    CMatrix inc = CMatrix::Zero(zr.dim, kprev);
    inc.topRows(kprev) = cidentity(kprev);
    for (const auto& [v, t] : cur) {
      CMatrix ri = t * inc;
      CMatrix rc = t.adjoint() * inc;
      zr.max_isometry_residual = std::max(
          zr.max_isometry_residual, rel_residual(ri.adjoint() * ri, cidentity(kprev)));
      zr.max_coisometry_residual = std::max(
          zr.max_coisometry_residual, rel_residual(rc.adjoint() * rc, cidentity(kprev)));
    }
    for (const auto& [u, v] : g.edges())
      if (cur.count(u) && cur.count(v))
        zr.max_commutation_residual =
            std::max(zr.max_commutation_residual,
                     rel_residual(cur[u] * cur[v] * inc, cur[v] * cur[u] * inc));
    // compression identity against the input, words up to `levels`
    {
      CMatrix j = CMatrix::Zero(zr.dim, h0);
      j.topRows(h0) = cidentity(h0);
      double worst = 0.0;
      std::function<void(CMatrix, CMatrix, int)> walk = [&](CMatrix big, CMatrix small,
                                                            int depth) {
        if (depth == 0) return;
        for (const auto& [v, t] : cur) {
          CMatrix nb = t * big;
          CMatrix ns = orig.at(v) * small;
          worst = std::max(worst, rel_residual(j.adjoint() * nb * j, ns));
          walk(nb, ns, depth - 1);
        }
      };
      walk(cidentity(zr.dim), cidentity(h0), std::min(levels, 3));
      zr.compression_residual = worst;
    }
    rep.rounds.push_back(zr);
  }
  if (!rep.rounds.empty()) {
    const ZigzagRound& last = rep.rounds.back();
    rep.final_commutation_residual = last.max_commutation_residual;
    rep.final_unitarity_residual =
        std::max(last.max_isometry_residual, last.max_coisometry_residual);
    rep.closed = rep.final_commutation_residual <= 10.0 * tol.eq_tol &&
                 rep.final_unitarity_residual <= 10.0 * tol.eq_tol;
  }
  return rep;
}

} // namespace cpdil

#endif
