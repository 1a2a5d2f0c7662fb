#pragma once

// Exterior superalgebra over named odd generators with a pluggable scalar
// ring: products, left derivatives, Berezin integration, linear substitution,
// nilpotent exponentials, Pfaffians.
//
// Monomial canonical order is ascending generator index (bitmask); every sign
// in the library derives from that single convention.  The Berezin integral
// over a listed group (g_1..g_k) extracts the coefficient of g_k...g_1
// (so integral of g_k...g_1 = 1), realized as iterated left derivatives with
// the last-listed generator differentiated first.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "superweyl/scalar.hpp"

namespace superweyl {

using Mask = std::uint32_t;

inline int popcount(Mask m) { return std::popcount(m); }

// parity of the permutation sorting (ascending I, ascending J) into ascending
inline int concat_sign(Mask I, Mask J) {
  int inv = 0;
  for (Mask j = J; j; j &= j - 1) {
    int b = std::countr_zero(j);
    inv += popcount(I >> (b + 1));
  }
  return (inv & 1) ? -1 : 1;
}

class GeneratorSet {
 public:
  explicit GeneratorSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.size() > 24) throw std::invalid_argument("GeneratorSet: too many generators");
    for (size_t i = 0; i < names_.size(); ++i)
      for (size_t j = i + 1; j < names_.size(); ++j)
        if (names_[i] == names_[j])
          throw std::invalid_argument("GeneratorSet: duplicate name " + names_[i]);
  }
  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  int index(const std::string& n) const {
    for (size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == n) return static_cast<int>(i);
    throw std::invalid_argument("GeneratorSet: unknown generator " + n);
  }
  bool same_as(const GeneratorSet& o) const { return this == &o || names_ == o.names_; }

 private:
  std::vector<std::string> names_;
};

using GenSetPtr = std::shared_ptr<const GeneratorSet>;

inline GenSetPtr make_generators(std::vector<std::string> names) {
  return std::make_shared<const GeneratorSet>(std::move(names));
}

// indexed family like xi1..xin
inline std::vector<std::string> indexed_names(const std::string& stem, int n, int from = 1) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(stem + std::to_string(from + i));
  return out;
}

template <class R>
class Multivector {
 public:
  using Term = std::pair<Mask, R>;

  Multivector() = default;
  explicit Multivector(GenSetPtr gs) : gs_(std::move(gs)) {}

  static Multivector scalar(GenSetPtr gs, R c) {
    Multivector out(std::move(gs));
    if (!ring<R>::is_zero(c)) out.terms_.push_back({0u, std::move(c)});
    return out;
  }
  static Multivector generator(const GenSetPtr& gs, int i) {
    return monomial(gs, Mask(1) << check_index(*gs, i), ring<R>::one());
  }
  static Multivector generator(const GenSetPtr& gs, const std::string& name) {
    return generator(gs, gs->index(name));
  }
  static Multivector monomial(GenSetPtr gs, Mask m, R c) {
    Multivector out(std::move(gs));
    if (!ring<R>::is_zero(c)) out.terms_.push_back({m, std::move(c)});
    return out;
  }

  const GenSetPtr& gens() const { return gs_; }
  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int num_terms() const { return static_cast<int>(terms_.size()); }

  R coeff(Mask m) const {
    auto it = std::lower_bound(terms_.begin(), terms_.end(), m,
                               [](const Term& t, Mask k) { return t.first < k; });
    if (it != terms_.end() && it->first == m) return it->second;
    return ring<R>::zero();
  }
  R scalar_part() const { return coeff(0); }

  // -1: zero, 0: even, 1: odd, 2: inhomogeneous
  int parity() const {
    if (terms_.empty()) return -1;
    int p = popcount(terms_.front().first) & 1;
    for (auto& [m, c] : terms_)
      if ((popcount(m) & 1) != p) return 2;
    return p;
  }
  int max_degree() const {
    int d = 0;
    for (auto& [m, c] : terms_) d = std::max(d, popcount(m));
    return d;
  }
  Multivector degree_part(int d) const {
    Multivector out(gs_);
    for (auto& [m, c] : terms_)
      if (popcount(m) == d) out.terms_.push_back({m, c});
    return out;
  }
  Multivector parity_part(int p) const {
    Multivector out(gs_);
    for (auto& [m, c] : terms_)
      if ((popcount(m) & 1) == p) out.terms_.push_back({m, c});
    return out;
  }

  friend Multivector operator+(const Multivector& a, const Multivector& b) {
    check_same(a, b);
    Multivector out(a.gs_ ? a.gs_ : b.gs_);
    out.terms_.reserve(a.terms_.size() + b.terms_.size());
    auto ia = a.terms_.begin(), ib = b.terms_.begin();
    while (ia != a.terms_.end() || ib != b.terms_.end()) {
      if (ib == b.terms_.end() || (ia != a.terms_.end() && ia->first < ib->first)) {
        out.terms_.push_back(*ia++);
      } else if (ia == a.terms_.end() || ib->first < ia->first) {
        out.terms_.push_back(*ib++);
      } else {
        R s = ia->second + ib->second;
        if (!ring<R>::is_zero(s)) out.terms_.push_back({ia->first, std::move(s)});
        ++ia; ++ib;
      }
    }
    return out;
  }
  friend Multivector operator-(const Multivector& a) {
    Multivector out(a.gs_);
    out.terms_.reserve(a.terms_.size());
    for (auto& [m, c] : a.terms_) out.terms_.push_back({m, -c});
    return out;
  }
  friend Multivector operator-(const Multivector& a, const Multivector& b) { return a + (-b); }

  Multivector scaled(const R& c) const {
    Multivector out(gs_);
    if (ring<R>::is_zero(c)) return out;
    out.terms_.reserve(terms_.size());
    for (auto& [m, v] : terms_) {
      R p = v * c;
      if (!ring<R>::is_zero(p)) out.terms_.push_back({m, std::move(p)});
    }
    return out;
  }

  friend Multivector operator*(const Multivector& a, const Multivector& b) {
    check_same(a, b);
    Multivector out(a.gs_ ? a.gs_ : b.gs_);
    if (a.terms_.empty() || b.terms_.empty()) return out;
    std::vector<Term> acc;
    acc.reserve(a.terms_.size() * b.terms_.size());
    for (auto& [ma, ca] : a.terms_)
      for (auto& [mb, cb] : b.terms_) {
        if (ma & mb) continue;
        R p = ca * cb;
        if (ring<R>::is_zero(p)) continue;
        if (concat_sign(ma, mb) < 0) p = -p;
        acc.push_back({ma | mb, std::move(p)});
      }
    std::sort(acc.begin(), acc.end(),
              [](const Term& x, const Term& y) { return x.first < y.first; });
    for (auto& t : acc) {
      if (!out.terms_.empty() && out.terms_.back().first == t.first) {
        out.terms_.back().second = out.terms_.back().second + t.second;
        if (ring<R>::is_zero(out.terms_.back().second)) out.terms_.pop_back();
      } else {
        out.terms_.push_back(std::move(t));
      }
    }
    return out;
  }

  friend bool operator==(const Multivector& a, const Multivector& b) {
    check_same(a, b);
    return a.terms_ == b.terms_;
  }
  friend bool operator!=(const Multivector& a, const Multivector& b) { return !(a == b); }

  // moves gen to the front collecting the sign, deletes it; zero if absent
  Multivector left_derivative(int g) const {
    check_index(*gs_, g);
    Multivector out(gs_);
    Mask bit = Mask(1) << g;
    for (auto& [m, c] : terms_) {
      if (!(m & bit)) continue;
      int below = popcount(m & (bit - 1));
      out.terms_.push_back({m & ~bit, (below & 1) ? -c : c});
    }
    std::sort(out.terms_.begin(), out.terms_.end(),
              [](const Term& x, const Term& y) { return x.first < y.first; });
    return out;
  }
  Multivector left_derivative(const std::string& g) const {
    return left_derivative(gs_->index(g));
  }

  // iterated left derivatives, last-listed generator first:
  // berezin({g1..gk}) (g_k...g_1) = 1
  Multivector berezin(std::span<const int> group) const {
    Multivector out = *this;
    for (auto it = group.rbegin(); it != group.rend(); ++it)
      out = out.left_derivative(*it);
    return out;
  }
  Multivector berezin(std::initializer_list<int> group) const {
    return berezin(std::span<const int>(group.begin(), group.size()));
  }
  Multivector berezin_names(const std::vector<std::string>& group) const {
    std::vector<int> idx;
    idx.reserve(group.size());
    for (auto& g : group) idx.push_back(gs_->index(g));
    return berezin(idx);
  }

  // algebra homomorphism from degree-1 images (possibly zero) in target set;
  // generators without an image map to their same-named target generator
  Multivector<R> substitute(const std::vector<std::pair<int, Multivector<R>>>& images,
                            const GenSetPtr& target) const {
    std::vector<const Multivector<R>*> img(gs_->size(), nullptr);
    for (auto& [g, mv] : images) {
      check_index(*gs_, g);
      if (mv.max_degree() > 1 || !ring<R>::is_zero(mv.scalar_part()))
        throw std::invalid_argument("substitute: image must be homogeneous of degree 1");
      img[g] = &mv;
    }
    Multivector<R> out(target);
    for (auto& [m, c] : terms_) {
      Multivector<R> term = Multivector<R>::scalar(target, c);
      for (Mask mm = m; mm; mm &= mm - 1) {
        int g = std::countr_zero(mm);
        if (img[g]) {
          term = term * *img[g];
        } else {
          term = term * Multivector<R>::generator(target, target->index(gs_->name(g)));
        }
        if (term.is_zero()) break;
      }
      out = out + term;
    }
    return out;
  }

  // finite exponential of an even nilpotent element (degree >= 2 terms only)
  Multivector exp_even_nilpotent() const {
    for (auto& [m, c] : terms_) {
      int d = popcount(m);
      if (d == 0 || (d & 1))
        throw std::invalid_argument("exp_even_nilpotent: element must have even degree >= 2");
    }
    Multivector out = Multivector::scalar(gs_, ring<R>::one());
    Multivector power = out;
    R fact = ring<R>::one();
    int limit = gs_ ? gs_->size() / 2 : 0;
    for (int k = 1; k <= limit; ++k) {
      power = power * *this;
      if (power.is_zero()) break;
      fact = fact * R(k);
      out = out + power.scaled_div(fact);
    }
    return out;
  }

  // debug serialization: "coeff * g_i g_j ..." in canonical order
  friend std::ostream& operator<<(std::ostream& os, const Multivector& mv) {
    if (mv.terms_.empty()) return os << "0";
    bool first = true;
    for (auto& [m, c] : mv.terms_) {
      if (!first) os << " + ";
      first = false;
      os << "(" << c << ")";
      for (Mask mm = m; mm; mm &= mm - 1)
        os << " " << mv.gs_->name(std::countr_zero(mm));
    }
    return os;
  }
  std::string str() const {
    std::ostringstream os;
    os << *this;
    return os.str();
  }

 private:
  Multivector scaled_div(const R& c) const;  // divide by a nonzero ring scalar

  static int check_index(const GeneratorSet& gs, int i) {
    if (i < 0 || i >= gs.size()) throw std::invalid_argument("generator index out of range");
    return i;
  }
  static void check_same(const Multivector& a, const Multivector& b) {
    if (a.gs_ && b.gs_ && !a.gs_->same_as(*b.gs_))
      throw std::invalid_argument("Multivector: mismatched generator sets");
  }

  GenSetPtr gs_;
  std::vector<Term> terms_;
};

// division by small integers (factorials) per ring
template <>
inline Multivector<ExactScalar> Multivector<ExactScalar>::scaled_div(const ExactScalar& c) const {
  return scaled(c.inverse());
}
template <>
inline Multivector<NumericScalar> Multivector<NumericScalar>::scaled_div(const NumericScalar& c) const {
  return scaled(c.inverse());
}
template <>
inline Multivector<std::complex<double>> Multivector<std::complex<double>>::scaled_div(
    const std::complex<double>& c) const {
  return scaled(std::complex<double>(1.0) / c);
}
template <>
inline Multivector<GaussRat> Multivector<GaussRat>::scaled_div(const GaussRat& c) const {
  return scaled(c.inverse());
}

// ---------------------------------------------------------------------------
// Pfaffian as a Berezin-Gaussian integral:
//   Pf(Q) = berezin exp(-1/2 Q^{ab} th_a th_b) over (th_1..th_k);
// 0 for odd k, error for non-antisymmetric input.
// ---------------------------------------------------------------------------
template <class R>
R pfaffian(const std::vector<std::vector<R>>& Q) {
  int k = static_cast<int>(Q.size());
  for (auto& row : Q)
    if (static_cast<int>(row.size()) != k)
      throw std::invalid_argument("pfaffian: matrix not square");
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      R s = Q[i][j] + Q[j][i];
      if constexpr (ring<R>::exact) {
        if (!ring<R>::is_zero(s)) throw std::invalid_argument("pfaffian: matrix not antisymmetric");
      } else {
        double mag = ring_mag(s);
        double scale = std::max(ring_mag(Q[i][j]), ring_mag(Q[j][i]));
        if (mag > 1e-12 * std::max(1.0, scale))
          throw std::invalid_argument("pfaffian: matrix not antisymmetric");
      }
    }
  if (k == 0) return ring<R>::one();
  auto gs = make_generators(indexed_names("theta", k));
  Multivector<R> a(gs);
  R half = ring<R>::one();  // build -1/2 Q^{ab} th_a th_b as -Q^{ab} (a<b)
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      if (ring<R>::is_zero(Q[i][j])) continue;
      a = a + Multivector<R>::monomial(gs, (Mask(1) << i) | (Mask(1) << j), -Q[i][j]);
    }
  (void)half;
  std::vector<int> group(k);
  for (int i = 0; i < k; ++i) group[i] = i;
  return a.exp_even_nilpotent().berezin(group).scalar_part();
}

// Leibniz-expansion determinant, fine for the k <= 6 sizes used here
template <class R>
R small_det(const std::vector<std::vector<R>>& M) {
  int k = static_cast<int>(M.size());
  std::vector<int> perm(k);
  for (int i = 0; i < k; ++i) perm[i] = i;
  R out = ring<R>::zero();
  do {
    int inv = 0;
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        if (perm[i] > perm[j]) ++inv;
    R p = ring<R>::one();
    for (int i = 0; i < k; ++i) p = p * M[i][perm[i]];
    out = (inv & 1) ? out - p : out + p;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace superweyl
