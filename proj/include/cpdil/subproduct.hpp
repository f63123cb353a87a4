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

#ifndef CPDIL_SUBPRODUCT_HPP
#define CPDIL_SUBPRODUCT_HPP

#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpdil/matrix_core.hpp"
#include "cpdil/trace_monoid.hpp"

namespace cpdil {

//=========================================================================
// Subproduct systems of finite-dimensional Hilbert-space fibers
//=========================================================================

// Word-indexed fibers X_s (dim >= 0) with co-isometric product maps
// U_{s,t} : X_s (x) X_t -> X_{st}, truncated at word length `cutoff`.
// The unit fiber X_e is one-dimensional and U_{e,s}, U_{s,e} are scalar
// multiplication, so products are stored only for pairs of non-unit words.
class SubproductSystem {
public:
  SubproductSystem() = default;

  SubproductSystem(CommutationGraph graph, int cutoff, std::vector<int> fiber_dims,
                   std::map<std::pair<int, int>, CMatrix> products)
      : graph_(std::move(graph)),
        cutoff_(cutoff),
        words_(enumerate_words(graph_, static_cast<size_t>(cutoff))),
        dims_(std::move(fiber_dims)),
        products_(std::move(products)) {
    if (dims_.size() != words_.size())
      throw structural_error("SubproductSystem: fiber count " + std::to_string(dims_.size()) +
                             " does not match word count " + std::to_string(words_.size()));
    if (dims_[0] != 1) throw structural_error("SubproductSystem: dim(X_e) must be 1");
    for (size_t i = 0; i < words_.size(); ++i) {
      index_[key(words_[i])] = static_cast<int>(i);
      if (dims_[i] < 0) throw structural_error("SubproductSystem: negative fiber dimension");
    }
    // Every in-cutoff pair of non-unit words must carry a product map.
    for (size_t si = 1; si < words_.size(); ++si)
      for (size_t ti = 1; ti < words_.size(); ++ti) {
        if (words_[si].length() + words_[ti].length() > static_cast<size_t>(cutoff_)) continue;
        auto it = products_.find({static_cast<int>(si), static_cast<int>(ti)});
        if (it == products_.end())
          throw structural_error("SubproductSystem: missing product for (" + words_[si].str() +
                                 ", " + words_[ti].str() + ")");
        int sti = index_of(concat(words_[si], words_[ti]));
        const CMatrix& u = it->second;
        if (u.rows() != dims_[static_cast<size_t>(sti)] ||
            u.cols() != dims_[si] * dims_[ti])
          throw structural_error("SubproductSystem: product shape mismatch at (" +
                                 words_[si].str() + ", " + words_[ti].str() + ")");
      }
  }

  static std::string key(const TraceElement& w) { return w.str(); }

  const CommutationGraph& graph() const { return graph_; }
  int cutoff() const { return cutoff_; }
  const std::vector<TraceElement>& words() const { return words_; }

  int index_of(const TraceElement& w) const {
    auto it = index_.find(key(w));
    if (it == index_.end())
      throw range_error("SubproductSystem: word '" + w.str() + "' outside cutoff");
    return it->second;
  }
  int index_of(const std::string& k) const {
    auto it = index_.find(k);
    if (it == index_.end()) throw range_error("SubproductSystem: unknown word key '" + k + "'");
    return it->second;
  }

  const TraceElement& word(int i) const { return words_.at(static_cast<size_t>(i)); }
  int dim(int i) const { return dims_.at(static_cast<size_t>(i)); }
  int dim(const TraceElement& w) const { return dim(index_of(w)); }
  int letter_dim(int vertex) const {
    return dim(trace(Word{vertex}, graph_));
  }

  // U_{s,t} by word index; unit factors act by scalar multiplication.
  CMatrix product(int si, int ti) const {
    if (words_[static_cast<size_t>(si)].length() + words_[static_cast<size_t>(ti)].length() >
        static_cast<size_t>(cutoff_))
      throw range_error("SubproductSystem: product outside cutoff");
    if (words_[static_cast<size_t>(si)].is_unit()) return cidentity(dims_[static_cast<size_t>(ti)]);
    if (words_[static_cast<size_t>(ti)].is_unit()) return cidentity(dims_[static_cast<size_t>(si)]);
    return products_.at({si, ti});
  }
  CMatrix product(const TraceElement& s, const TraceElement& t) const {
    return product(index_of(s), index_of(t));
  }

  const std::map<std::pair<int, int>, CMatrix>& stored_products() const { return products_; }

private:
  CommutationGraph graph_;
  int cutoff_ = 0;
  std::vector<TraceElement> words_;
  std::vector<int> dims_;
  std::map<std::pair<int, int>, CMatrix> products_;
  std::unordered_map<std::string, int> index_;
};

// The full tensor system over G: X_s = (x)_letters-of-NF(s) C^{d_v} and every
// product map is the permutation sorting a concatenation into normal form.
// This is a product system (all U unitary). Declared here, defined after
// the permutation helper below.
inline SubproductSystem full_tensor_system(const CommutationGraph& g, int cutoff,
                                           const std::vector<int>& letter_dims);

//=========================================================================
// Per-letter tensor index permutations
//=========================================================================

// The unique permutation of positions taking the word `from` to the word
// `to` while preserving the relative order of equal letters. perm[i] is the
// position in `to` receiving factor i of `from`.
inline std::vector<int> sorting_permutation(const Word& from, const Word& to) {
  if (from.size() != to.size()) throw input_error("sorting_permutation: length mismatch");
  std::vector<int> perm(from.size());
  std::vector<size_t> next_occurrence;  // per call scan
  std::vector<bool> used(to.size(), false);
  for (size_t i = 0; i < from.size(); ++i) {
    bool found = false;
    for (size_t j = 0; j < to.size(); ++j) {
      if (!used[j] && to[j] == from[i]) {
        perm[i] = static_cast<int>(j);
        used[j] = true;
        found = true;
        break;
      }
    }
    if (!found) throw input_error("sorting_permutation: words are not anagrams");
  }
  return perm;
}

// Unitary permutation matrix on a tensor product with factor dimensions
// `dims`, moving factor i to position perm[i].
inline CMatrix tensor_permutation(const std::vector<int>& dims, const std::vector<int>& perm) {
  Eigen::Index total = 1;
  for (int d : dims) total *= d;
  std::vector<int> out_dims(dims.size());
  for (size_t i = 0; i < dims.size(); ++i) out_dims[static_cast<size_t>(perm[i])] = dims[i];
  std::vector<Eigen::Index> in_stride(dims.size(), 1), out_stride(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    in_stride[static_cast<size_t>(i)] =
        in_stride[static_cast<size_t>(i + 1)] * dims[static_cast<size_t>(i + 1)];
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i)
    out_stride[static_cast<size_t>(i)] =
        out_stride[static_cast<size_t>(i + 1)] * out_dims[static_cast<size_t>(i + 1)];
  CMatrix p = CMatrix::Zero(total, total);
  std::vector<int> idx(dims.size(), 0);
  for (Eigen::Index col = 0; col < total; ++col) {
    Eigen::Index row = 0;
    for (size_t i = 0; i < dims.size(); ++i)
      row += idx[i] * out_stride[static_cast<size_t>(perm[i])];
    p(row, col) = 1.0;
    for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
      if (++idx[static_cast<size_t>(i)] < dims[static_cast<size_t>(i)]) break;
      idx[static_cast<size_t>(i)] = 0;
    }
  }
  return p;
}

inline SubproductSystem full_tensor_system(const CommutationGraph& g, int cutoff,
                                           const std::vector<int>& letter_dims) {
  if (static_cast<int>(letter_dims.size()) != g.size())
    throw input_error("full_tensor_system: need one dimension per letter");
  auto words = enumerate_words(g, static_cast<size_t>(cutoff));
  auto word_dims = [&](const Word& w) {
    std::vector<int> d;
    for (int v : w) d.push_back(letter_dims[static_cast<size_t>(v)]);
    return d;
  };
  std::vector<int> dims;
  for (const auto& w : words) {
    int d = 1;
    for (int v : w.normal_form) d *= letter_dims[static_cast<size_t>(v)];
    dims.push_back(d);
  }
  std::map<std::pair<int, int>, CMatrix> products;
  for (size_t si = 1; si < words.size(); ++si)
    for (size_t ti = 1; ti < words.size(); ++ti) {
      if (words[si].length() + words[ti].length() > static_cast<size_t>(cutoff)) continue;
      Word cat = words[si].normal_form;
      cat.insert(cat.end(), words[ti].normal_form.begin(), words[ti].normal_form.end());
      Word nf = foata_normal_form(cat, g);
      products[{static_cast<int>(si), static_cast<int>(ti)}] =
          tensor_permutation(word_dims(cat), sorting_permutation(cat, nf));
    }
  return SubproductSystem(g, cutoff, dims, std::move(products));
}

//=========================================================================
// System validation
//=========================================================================

struct SystemReport {
  bool pass = false;
  bool is_product_system = false;
  double max_coisometry_residual = 0.0;
  double max_unitarity_residual = 0.0;
  double max_associativity_residual = 0.0;
  std::vector<std::pair<std::string, double>> coisometry;     // "s|t" -> residual
  std::vector<std::pair<std::string, double>> associativity;  // "r|s|t" -> residual
};

inline SystemReport validate_system(const SubproductSystem& x, const ToleranceProfile& tol = {}) {
  SystemReport rep;
  const auto& words = x.words();
  const size_t L = static_cast<size_t>(x.cutoff());
  for (size_t si = 1; si < words.size(); ++si)
    for (size_t ti = 1; ti < words.size(); ++ti) {
      if (words[si].length() + words[ti].length() > L) continue;
      CMatrix u = x.product(static_cast<int>(si), static_cast<int>(ti));
      double co = rel_residual(u * u.adjoint(), cidentity(u.rows()));
      double un = std::max(co, rel_residual(u.adjoint() * u, cidentity(u.cols())));
      rep.coisometry.push_back({words[si].str() + "|" + words[ti].str(), co});
      rep.max_coisometry_residual = std::max(rep.max_coisometry_residual, co);
      rep.max_unitarity_residual = std::max(rep.max_unitarity_residual, un);
    }
  for (size_t ri = 1; ri < words.size(); ++ri)
    for (size_t si = 1; si < words.size(); ++si)
      for (size_t ti = 1; ti < words.size(); ++ti) {
        if (words[ri].length() + words[si].length() + words[ti].length() > L) continue;
        TraceElement rs = concat(words[ri], words[si]);
        TraceElement st = concat(words[si], words[ti]);
        CMatrix lhs = x.product(x.index_of(rs), static_cast<int>(ti)) *
                      tensor(x.product(static_cast<int>(ri), static_cast<int>(si)),
                             cidentity(x.dim(static_cast<int>(ti))));
        CMatrix rhs = x.product(static_cast<int>(ri), x.index_of(st)) *
                      tensor(cidentity(x.dim(static_cast<int>(ri))),
                             x.product(static_cast<int>(si), static_cast<int>(ti)));
        double res = rel_residual(lhs, rhs);
        rep.associativity.push_back(
            {words[ri].str() + "|" + words[si].str() + "|" + words[ti].str(), res});
        rep.max_associativity_residual = std::max(rep.max_associativity_residual, res);
      }
  rep.pass = rep.max_coisometry_residual <= tol.eq_tol &&
             rep.max_associativity_residual <= tol.eq_tol;
  rep.is_product_system = rep.pass && rep.max_unitarity_residual <= tol.eq_tol;
  return rep;
}

inline bool is_product_system(const SubproductSystem& x, const ToleranceProfile& tol = {}) {
  return validate_system(x, tol).is_product_system;
}

// U_{s_1,...,s_n} : X_{s_1} (x) ... (x) X_{s_n} -> X_s by left-to-right
// composition. Order independence is Remark-level theory, re-checked in the
// property tests.
inline CMatrix iterated_product(const SubproductSystem& x, const Word& presentation) {
  if (presentation.size() > static_cast<size_t>(x.cutoff()))
    throw range_error("iterated_product: presentation longer than cutoff");
  check_word(presentation, x.graph());
  if (presentation.empty()) return cidentity(1);
  TraceElement cur = trace(Word{presentation[0]}, x.graph());
  CMatrix m = cidentity(x.dim(cur));
  for (size_t i = 1; i < presentation.size(); ++i) {
    TraceElement letter = trace(Word{presentation[i]}, x.graph());
    CMatrix step = x.product(x.index_of(cur), x.index_of(letter));
    m = step * tensor(m, cidentity(x.dim(letter)));
    cur = concat(cur, letter);
  }
  return m;
}

//=========================================================================
// Representations via the lifted maps T~_s : X_s (x) H -> H
//=========================================================================

class Representation {
public:
  Representation() = default;
  Representation(std::shared_ptr<const SubproductSystem> sys, int space_dim,
                 std::unordered_map<std::string, CMatrix> tildes)
      : sys_(std::move(sys)), space_dim_(space_dim), tildes_(std::move(tildes)) {
    tildes_[""] = cidentity(space_dim_);
    for (const auto& [k, t] : tildes_) {
      int wi = sys_->index_of(k);
      if (t.rows() != space_dim_ || t.cols() != sys_->dim(wi) * space_dim_)
        throw structural_error("Representation: lift shape mismatch at '" + k + "'");
    }
  }

  const SubproductSystem& system() const { return *sys_; }
  std::shared_ptr<const SubproductSystem> system_ptr() const { return sys_; }
  int space_dim() const { return space_dim_; }

  const CMatrix& tilde(const std::string& k) const {
    auto it = tildes_.find(k);
    if (it == tildes_.end())
      throw structural_error("Representation: missing lift for '" + k + "'");
    return it->second;
  }
  const CMatrix& tilde(const TraceElement& w) const { return tilde(SubproductSystem::key(w)); }
  const std::unordered_map<std::string, CMatrix>& tildes() const { return tildes_; }

  // T(x)h = T~(x (x) h)
  CMatrix evaluate(const TraceElement& w, const CVector& x) const {
    const CMatrix& t = tilde(w);
    int d = sys_->dim(sys_->index_of(w));
    if (x.size() != d) throw input_error("Representation::evaluate: fiber vector size mismatch");
    CMatrix out = CMatrix::Zero(space_dim_, space_dim_);
    for (int i = 0; i < d; ++i)
      out += x(i) * t.block(0, i * space_dim_, space_dim_, space_dim_);
    return out;
  }

private:
  std::shared_ptr<const SubproductSystem> sys_;
  int space_dim_ = 0;
  std::unordered_map<std::string, CMatrix> tildes_;
};

struct RepresentationReport {
  bool pass = false;
  bool is_isometric = false;
  double max_contraction_excess = 0.0;
  double max_semigroup_residual = 0.0;
  double max_isometry_residual = 0.0;
  std::vector<std::pair<std::string, double>> semigroup;  // "s|t" -> residual
};

// Checks the contraction bound of every lift and the semigroup identity
// T~_{st} (U_{s,t} (x) I) = T~_s (I (x) T~_t) for all in-cutoff pairs.
inline RepresentationReport validate_representation(const Representation& t,
                                                    const ToleranceProfile& tol = {}) {
  RepresentationReport rep;
  const SubproductSystem& x = t.system();
  const auto& words = x.words();
  const size_t L = static_cast<size_t>(x.cutoff());
  const Eigen::Index h = t.space_dim();
  for (const auto& w : words) {
    double ex = std::max(0.0, op_norm(t.tilde(w)) - 1.0);
    rep.max_contraction_excess = std::max(rep.max_contraction_excess, ex);
    const CMatrix& m = t.tilde(w);
    rep.max_isometry_residual =
        std::max(rep.max_isometry_residual, rel_residual(m.adjoint() * m, cidentity(m.cols())));
  }
  for (size_t si = 1; si < words.size(); ++si)
    for (size_t ti = 1; ti < words.size(); ++ti) {
      if (words[si].length() + words[ti].length() > L) continue;
      TraceElement st = concat(words[si], words[ti]);
      CMatrix lhs = t.tilde(st) * tensor(x.product(static_cast<int>(si), static_cast<int>(ti)),
                                         cidentity(h));
      CMatrix rhs = t.tilde(words[si]) *
                    tensor(cidentity(x.dim(static_cast<int>(si))), t.tilde(words[ti]));
      double res = rel_residual(lhs, rhs);
      rep.semigroup.push_back({words[si].str() + "|" + words[ti].str(), res});
      rep.max_semigroup_residual = std::max(rep.max_semigroup_residual, res);
    }
  rep.pass = rep.max_contraction_excess <= tol.eq_tol && rep.max_semigroup_residual <= tol.eq_tol;
  rep.is_isometric = rep.pass && rep.max_isometry_residual <= tol.eq_tol;
  return rep;
}

//=========================================================================
// The Fock representation
//=========================================================================

// H = (+)_{|t| <= L} X_t ordered as enumerate_words; T~_s sends X_s (x) X_t
// into X_{st} by U_{s,t} when |st| <= L and to zero past the cutoff.
inline Representation fock_representation(const SubproductSystem& x) {
  auto sys = std::make_shared<SubproductSystem>(x);
  const auto& words = x.words();
  std::vector<Eigen::Index> offsets(words.size() + 1, 0);
  for (size_t i = 0; i < words.size(); ++i)
    offsets[i + 1] = offsets[i] + x.dim(static_cast<int>(i));
  const Eigen::Index h = offsets.back();
  std::unordered_map<std::string, CMatrix> tildes;
  for (size_t si = 0; si < words.size(); ++si) {
    const Eigen::Index ds = x.dim(static_cast<int>(si));
    CMatrix t = CMatrix::Zero(h, ds * h);
    for (size_t ti = 0; ti < words.size(); ++ti) {
      if (words[si].length() + words[ti].length() > static_cast<size_t>(x.cutoff())) continue;
      int sti = x.index_of(concat(words[si], words[ti]));
      CMatrix u = x.product(static_cast<int>(si), static_cast<int>(ti));
      // column block (i, offset_t + j), row block offset_{st}
      for (Eigen::Index i = 0; i < ds; ++i)
        t.block(offsets[static_cast<size_t>(sti)], i * h + offsets[ti],
                x.dim(sti), x.dim(static_cast<int>(ti))) =
            u.middleCols(i * x.dim(static_cast<int>(ti)), x.dim(static_cast<int>(ti)));
    }
    tildes[words[si].str()] = t;
  }
  return Representation(sys, static_cast<int>(h), std::move(tildes));
}

//=========================================================================
// The CP-semigroup of a representation and dilation checks
//=========================================================================

// Theta_s(a) = T~_s (I (x) a) T~_s*
inline CMatrix sigma(const Representation& t, const TraceElement& s, const CMatrix& a) {
  if (a.rows() != t.space_dim() || a.cols() != t.space_dim())
    throw input_error("sigma: operator must act on the representation space");
  const CMatrix& ts = t.tilde(s);
  int d = t.system().dim(t.system().index_of(s));
  return ts * tensor(cidentity(d), a) * ts.adjoint();
}

struct DilationReport {
  bool pass = false;
  double max_residual = 0.0;
  std::vector<std::pair<std::string, double>> per_word;
};

// Co-extension check per fiber: R~_s* W = (J_s (x) W) T~_s*, where W embeds
// the small space into the big one and J_s embeds the small fiber into the
// big one (identity when both representations share a system).
inline DilationReport is_dilation(const Representation& big, const Representation& small,
                                  const CMatrix& embed,
                                  const std::map<std::string, CMatrix>& fiber_embeds = {},
                                  const ToleranceProfile& tol = {}) {
  if (embed.rows() != big.space_dim() || embed.cols() != small.space_dim())
    throw structural_error("is_dilation: embedding shape mismatch");
  if (rel_residual(embed.adjoint() * embed, cidentity(embed.cols())) > tol.eq_tol)
    throw structural_error("is_dilation: embed is not an isometry");
  DilationReport rep;
  for (const auto& w : small.system().words()) {
    if (w.is_unit()) continue;
    std::string k = w.str();
    int db = big.system().dim(big.system().index_of(k));
    int ds = small.system().dim(small.system().index_of(k));
    CMatrix j;
    auto it = fiber_embeds.find(k);
    if (it != fiber_embeds.end()) {
      j = it->second;
      if (j.rows() != db || j.cols() != ds)
        throw structural_error("is_dilation: fiber embedding shape mismatch at '" + k + "'");
    } else {
      if (db != ds)
        throw structural_error("is_dilation: incompatible fibers at '" + k +
                               "' (need explicit fiber embeddings)");
      j = cidentity(db);
    }
    CMatrix lhs = big.tilde(k).adjoint() * embed;
    CMatrix rhs = tensor(j, embed) * small.tilde(k).adjoint();
    double res = rel_residual(lhs, rhs);
    rep.per_word.push_back({k, res});
    rep.max_residual = std::max(rep.max_residual, res);
  }
  rep.pass = rep.max_residual <= tol.eq_tol;
  return rep;
}

//=========================================================================
// Morphisms and transported representations
//=========================================================================

struct MorphismReport {
  bool pass = false;
  double max_coisometry_residual = 0.0;
  double max_intertwining_residual = 0.0;
};

// V = {V_s : Y_s -> X_s} with U^X (V_s (x) V_t) = V_{st} U^Y.
inline MorphismReport validate_morphism(const SubproductSystem& y, const SubproductSystem& x,
                                        const std::map<std::string, CMatrix>& v,
                                        const ToleranceProfile& tol = {}) {
  MorphismReport rep;
  const auto& words = y.words();
  for (const auto& w : words) {
    const CMatrix& vs = v.at(w.str());
    rep.max_coisometry_residual = std::max(
        rep.max_coisometry_residual, rel_residual(vs * vs.adjoint(), cidentity(vs.rows())));
  }
  for (size_t si = 1; si < words.size(); ++si)
    for (size_t ti = 1; ti < words.size(); ++ti) {
      if (words[si].length() + words[ti].length() > static_cast<size_t>(y.cutoff())) continue;
      std::string ks = words[si].str(), kt = words[ti].str();
      std::string kst = concat(words[si], words[ti]).str();
      CMatrix lhs = v.at(kst) * y.product(static_cast<int>(si), static_cast<int>(ti));
      CMatrix rhs = x.product(x.index_of(ks), x.index_of(kt)) * tensor(v.at(ks), v.at(kt));
      rep.max_intertwining_residual = std::max(rep.max_intertwining_residual,
                                               rel_residual(lhs, rhs));
    }
  rep.pass = rep.max_coisometry_residual <= tol.eq_tol &&
             rep.max_intertwining_residual <= tol.eq_tol;
  return rep;
}

// s -> T_s o V_s, a representation of Y on the same space; it dilates T.
inline Representation transport_representation(const Representation& t,
                                               const std::map<std::string, CMatrix>& v,
                                               std::shared_ptr<const SubproductSystem> y) {
  std::unordered_map<std::string, CMatrix> tildes;
  for (const auto& w : y->words()) {
    std::string k = w.str();
    tildes[k] = t.tilde(k) * tensor(v.at(k), cidentity(t.space_dim()));
  }
  return Representation(std::move(y), t.space_dim(), std::move(tildes));
}

} // namespace cpdil

#endif
