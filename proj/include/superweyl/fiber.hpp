#pragma once

// Quantization at a point: operators on Lambda(R^n), r-parameterized
// quantization and symbol maps, kernel calculus, symbol composition, Hodge
// star, graded traces.  Exact over ExactScalar.
//
// Convention notes (all pinned by the mutual-inverse theorem and the trace
// anchors, see tests):
//  * xi/eta/eps-type Berezin blocks use the anchor  int D(g) g_k...g_1 = 1;
//  * theta/tau-type blocks enter through the reversed listing, i.e.
//    int Dtheta theta_1...theta_n = 1;
//  * in D(eta,theta) the theta block is innermost;
//  * delta(xi - eta) is the descending product prod_{k=n..1}(xi^k - eta^k).

#include <array>
#include <chrono>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "superweyl/grassmann.hpp"
#include "superweyl/scalar.hpp"

namespace superweyl {

template <class S>
struct FiberContext {
  int n = 1;
  std::vector<std::vector<S>> g;  // metric g_{kl}, symmetric
  S sqrt_g = S(1);
  S r = S(0);          // ordering parameter in [0,1]
  S t = S(1);          // star parameter
  S C = S(1);          // star normalization, default t^{-m} for n = 2m
  GenSetPtr sym;       // xi1..n, theta1..n
  GenSetPtr xi;        // xi1..n

  FiberContext(int n_, S r_) : n(n_), r(std::move(r_)) {
    g.assign(n, std::vector<S>(n, S(0)));
    for (int i = 0; i < n; ++i) g[i][i] = S(1);
    auto names = indexed_names("xi", n);
    xi = make_generators(names);
    auto sn = names;
    for (auto& t2 : indexed_names("theta", n)) sn.push_back(t2);
    sym = make_generators(sn);
    if (n % 2 == 0) {
      C = S(1);
      for (int i = 0; i < n / 2; ++i) C = C * t.inverse();
    }
  }

  void set_metric(std::vector<std::vector<S>> m, S sqrt_det) {
    g = std::move(m);
    sqrt_g = std::move(sqrt_det);
  }
  void set_star(S t_, S C_) { t = std::move(t_); C = std::move(C_); }

  S one_minus_r() const { return S(1) - r; }
};

template <class S>
using FiberSymbol = Multivector<S>;  // over ctx.sym

template <class S>
using FiberKernel = Multivector<S>;  // over (xi1..n, eta1..n)

template <class S>
class FiberOperator {
 public:
  FiberOperator() = default;
  FiberOperator(GenSetPtr xi, int n) : xi_(std::move(xi)), n_(n) {
    col_.assign(size_t(1) << n, Multivector<S>(xi_));
  }
  static FiberOperator identity(const FiberContext<S>& ctx) {
    FiberOperator out(ctx.xi, ctx.n);
    for (Mask J = 0; J < out.dim(); ++J)
      out.col_[J] = Multivector<S>::monomial(ctx.xi, J, S(1));
    return out;
  }

  int n() const { return n_; }
  Mask dim() const { return Mask(1) << n_; }
  const GenSetPtr& gens() const { return xi_; }
  Multivector<S>& col(Mask J) { return col_[J]; }
  const Multivector<S>& col(Mask J) const { return col_[J]; }

  Multivector<S> apply(const Multivector<S>& u) const {
    Multivector<S> out(xi_);
    for (auto& [m, c] : u.terms()) out = out + col_[m].scaled(c);
    return out;
  }

  friend FiberOperator operator*(const FiberOperator& A, const FiberOperator& B) {
    FiberOperator out(A.xi_, A.n_);
    for (Mask J = 0; J < out.dim(); ++J) out.col_[J] = A.apply(B.col_[J]);
    return out;
  }
  friend FiberOperator operator+(const FiberOperator& A, const FiberOperator& B) {
    FiberOperator out(A.xi_, A.n_);
    for (Mask J = 0; J < out.dim(); ++J) out.col_[J] = A.col_[J] + B.col_[J];
    return out;
  }
  friend FiberOperator operator-(const FiberOperator& A, const FiberOperator& B) {
    FiberOperator out(A.xi_, A.n_);
    for (Mask J = 0; J < out.dim(); ++J) out.col_[J] = A.col_[J] - B.col_[J];
    return out;
  }
  FiberOperator scaled(const S& c) const {
    FiberOperator out(xi_, n_);
    for (Mask J = 0; J < dim(); ++J) out.col_[J] = col_[J].scaled(c);
    return out;
  }
  friend bool operator==(const FiberOperator& A, const FiberOperator& B) {
    if (A.n_ != B.n_) return false;
    for (Mask J = 0; J < A.dim(); ++J)
      if (!(A.col_[J] == B.col_[J])) return false;
    return true;
  }

  // -1 zero, 0 even, 1 odd, 2 mixed
  int parity() const {
    int p = -1;
    for (Mask J = 0; J < dim(); ++J)
      for (auto& [m, c] : col_[J].terms()) {
        int q = (popcount(m) - popcount(J)) & 1;
        if (p == -1) p = q;
        else if (p != q) return 2;
      }
    return p;
  }
  FiberOperator parity_part(int p) const {
    FiberOperator out(xi_, n_);
    for (Mask J = 0; J < dim(); ++J) {
      Multivector<S> kept(xi_);
      for (auto& [m, c] : col_[J].terms())
        if (((popcount(m) - popcount(J)) & 1) == p)
          kept = kept + Multivector<S>::monomial(xi_, m, c);
      out.col_[J] = kept;
    }
    return out;
  }

  S trace() const {
    S out(0);
    for (Mask J = 0; J < dim(); ++J) out += col_[J].coeff(J);
    return out;
  }
  S supertrace() const {
    S out(0);
    for (Mask J = 0; J < dim(); ++J) {
      S d = col_[J].coeff(J);
      out += (popcount(J) & 1) ? -d : d;
    }
    return out;
  }

 private:
  GenSetPtr xi_;
  int n_ = 0;
  std::vector<Multivector<S>> col_;
};

namespace detail {

inline std::vector<int> iota_vec(int from, int count) {
  std::vector<int> v(count);
  for (int i = 0; i < count; ++i) v[i] = from + i;
  return v;
}
inline std::vector<int> iota_rev(int from, int count) {
  std::vector<int> v(count);
  for (int i = 0; i < count; ++i) v[i] = from + count - 1 - i;
  return v;
}

template <class S>
S pow_scalar(S base, int k) {
  S out(1);
  for (int i = 0; i < k; ++i) out = out * base;
  return out;
}

// exp of (i/hbar) * sum_a coeff * u_{off1+a} v_{off2+a} built on a universe
template <class S>
Multivector<S> pairing_exp(const GenSetPtr& U, int n, int off1, int off2, const S& pref) {
  Multivector<S> arg(U);
  for (int a = 0; a < n; ++a) {
    arg = arg + Multivector<S>::monomial(
                    U, (Mask(1) << (off1 + a)) | (Mask(1) << (off2 + a)),
                    concat_sign(Mask(1) << (off1 + a), Mask(1) << (off2 + a)) < 0 ? -pref : pref);
  }
  return arg.exp_even_nilpotent();
}

}  // namespace detail

// multiplication operators xi^k and left-derivative operators d/dxi^k
template <class S>
std::pair<std::vector<FiberOperator<S>>, std::vector<FiberOperator<S>>> generator_operators(
    const FiberContext<S>& ctx) {
  std::vector<FiberOperator<S>> xs, ds;
  for (int k = 0; k < ctx.n; ++k) {
    FiberOperator<S> X(ctx.xi, ctx.n), D(ctx.xi, ctx.n);
    auto xik = Multivector<S>::generator(ctx.xi, k);
    for (Mask J = 0; J < X.dim(); ++J) {
      auto uJ = Multivector<S>::monomial(ctx.xi, J, S(1));
      X.col(J) = xik * uJ;
      D.col(J) = uJ.left_derivative(k);
    }
    xs.push_back(std::move(X));
    ds.push_back(std::move(D));
  }
  return {xs, ds};
}

// ---------------------------------------------------------------------------
// quantize / kernels / symbol
// ---------------------------------------------------------------------------

// universe builders
template <class S>
GenSetPtr quant_universe(const FiberContext<S>& ctx) {
  auto names = indexed_names("xi", ctx.n);
  for (auto& s : indexed_names("eta", ctx.n)) names.push_back(s);
  for (auto& s : indexed_names("theta", ctx.n)) names.push_back(s);
  return make_generators(names);
}
template <class S>
GenSetPtr kernel_universe(const FiberContext<S>& ctx) {
  auto names = indexed_names("xi", ctx.n);
  for (auto& s : indexed_names("eta", ctx.n)) names.push_back(s);
  return make_generators(names);
}
template <class S>
GenSetPtr symbol_universe(const FiberContext<S>& ctx) {
  auto names = indexed_names("xi", ctx.n);
  for (auto& s : indexed_names("eps", ctx.n)) names.push_back(s);
  for (auto& s : indexed_names("theta", ctx.n)) names.push_back(s);
  return make_generators(names);
}

// (f^ u)(xi) = (-i hbar)^n int D(eta,theta) e^{(i/h)(xi-eta)theta}
//              f((1-r)xi + r eta, theta) u(eta)
template <class S>
FiberOperator<S> quantize(const FiberSymbol<S>& f, const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto U = quant_universe(ctx);
  // f into the universe with xi_a -> (1-r) xi_a + r eta_a
  std::vector<std::pair<int, Multivector<S>>> images;
  for (int a = 0; a < n; ++a) {
    auto img = Multivector<S>::monomial(U, Mask(1) << a, ctx.one_minus_r()) +
               Multivector<S>::monomial(U, Mask(1) << (n + a), ctx.r);
    images.push_back({a, std::move(img)});
    images.push_back({n + a,
                      Multivector<S>::generator(U, 2 * n + a)});
  }
  auto f_u = f.substitute(images, U);
  auto E = detail::pairing_exp(U, n, 0, 2 * n, S::i_over_h()) *
           detail::pairing_exp(U, n, n, 2 * n, -S::i_over_h());
  auto Ef = E * f_u;
  S pref = detail::pow_scalar(S::neg_i_h(), n);
  auto theta_group = detail::iota_rev(2 * n, n);  // reversed: ascending extraction
  auto eta_group = detail::iota_vec(n, n);
  FiberOperator<S> out(ctx.xi, n);
  for (Mask J = 0; J < out.dim(); ++J) {
    Mask etaJ = 0;
    for (int a = 0; a < n; ++a)
      if (J >> a & 1) etaJ |= Mask(1) << (n + a);
    auto integrand = Ef * Multivector<S>::monomial(U, etaJ, S(1));
    auto T = integrand.berezin(theta_group).berezin(eta_group);
    Multivector<S> colv(ctx.xi);
    for (auto& [m, c] : T.terms()) colv = colv + Multivector<S>::monomial(ctx.xi, m, c * pref);
    out.col(J) = colv;
  }
  return out;
}

// k_A(xi,eta) = (-1)^n (A delta_eta)(xi), delta_eta = sqrt(g) prod_{k=n..1}(xi^k - eta^k)
template <class S>
FiberKernel<S> kernel_of(const FiberOperator<S>& A, const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto U = kernel_universe(ctx);
  auto delta = Multivector<S>::scalar(U, ctx.sqrt_g);
  for (int k = n - 1; k >= 0; --k)
    delta = delta * (Multivector<S>::generator(U, k) -
                     Multivector<S>::generator(U, n + k));
  Multivector<S> out(U);
  for (auto& [m, c] : delta.terms()) {
    Mask xiPart = m & ((Mask(1) << n) - 1);
    Mask etaPart = m & ~((Mask(1) << n) - 1);
    // A acts on the xi block; eta factors stay to the right
    const auto& img = A.col(xiPart);
    for (auto& [k2, v] : img.terms())
      out = out + Multivector<S>::monomial(U, k2 | etaPart, c * v);
  }
  if (n & 1) out = -out;
  return out;
}

// (A u)(xi) = (-1)^{n A~} int Deta / sqrt g  k(xi,eta) u(eta)
template <class S>
FiberOperator<S> op_from_kernel(const FiberKernel<S>& k, int parity, const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto U = k.gens();
  auto eta_group = detail::iota_vec(n, n);
  S pref = ctx.sqrt_g.inverse();
  if ((n * parity) & 1) pref = -pref;
  FiberOperator<S> out(ctx.xi, n);
  for (Mask J = 0; J < out.dim(); ++J) {
    Mask etaJ = 0;
    for (int a = 0; a < n; ++a)
      if (J >> a & 1) etaJ |= Mask(1) << (n + a);
    auto integrand = k * Multivector<S>::monomial(U, etaJ, S(1));
    auto T = integrand.berezin(eta_group);
    Multivector<S> colv(ctx.xi);
    for (auto& [m, c] : T.terms()) colv = colv + Multivector<S>::monomial(ctx.xi, m, c * pref);
    out.col(J) = colv;
  }
  return out;
}

// k_AB(xi,eta) = (-1)^{n A~} int Dxi'/sqrt g  k_A(xi,xi') k_B(xi',eta)
template <class S>
FiberKernel<S> kernel_compose(const FiberKernel<S>& kA, const FiberKernel<S>& kB, int parityA,
                              const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto names = indexed_names("xi", n);
  for (auto& s : indexed_names("xip", n)) names.push_back(s);
  for (auto& s : indexed_names("eta", n)) names.push_back(s);
  auto U = make_generators(names);
  // kA(xi, xi'): eta slot -> xip slot
  std::vector<std::pair<int, Multivector<S>>> imA, imB;
  for (int a = 0; a < n; ++a) {
    imA.push_back({n + a, Multivector<S>::generator(U, n + a)});
    imB.push_back({a, Multivector<S>::generator(U, n + a)});
    imB.push_back({n + a, Multivector<S>::generator(U, 2 * n + a)});
  }
  for (int a = 0; a < n; ++a) imA.push_back({a, Multivector<S>::generator(U, a)});
  auto kA3 = kA.substitute(imA, U);
  auto kB3 = kB.substitute(imB, U);
  auto T = (kA3 * kB3).berezin(detail::iota_vec(n, n));
  S pref = ctx.sqrt_g.inverse();
  if ((n * parityA) & 1) pref = -pref;
  // back to the (xi, eta) kernel universe
  auto KU = kernel_universe(ctx);
  Multivector<S> out(KU);
  for (auto& [m, c] : T.terms()) {
    Mask mm = 0;
    for (int a = 0; a < n; ++a) {
      if (m >> a & 1) mm |= Mask(1) << a;
      if (m >> (2 * n + a) & 1) mm |= Mask(1) << (n + a);
    }
    out = out + Multivector<S>::monomial(KU, mm, c * pref);
  }
  return out;
}

// (sigma A)(xi,theta) = (-1)^{n A~} int Deps/sqrt g e^{(i/h) eps theta}
//                       k(xi - r eps, xi + (1-r) eps)
template <class S>
FiberSymbol<S> symbol_of(const FiberOperator<S>& A, const FiberContext<S>& ctx) {
  const int n = ctx.n;
  int par = A.parity();
  if (par == -1) return Multivector<S>(ctx.sym);
  if (par == 2)
    return symbol_of(A.parity_part(0), ctx) + symbol_of(A.parity_part(1), ctx);
  auto k = kernel_of(A, ctx);
  auto U = symbol_universe(ctx);
  std::vector<std::pair<int, Multivector<S>>> images;
  for (int a = 0; a < n; ++a) {
    images.push_back({a, Multivector<S>::monomial(U, Mask(1) << a, S(1)) +
                             Multivector<S>::monomial(U, Mask(1) << (n + a), -ctx.r)});
    images.push_back({n + a, Multivector<S>::monomial(U, Mask(1) << a, S(1)) +
                                 Multivector<S>::monomial(U, Mask(1) << (n + a),
                                                          ctx.one_minus_r())});
  }
  auto ksub = k.substitute(images, U);
  auto E = detail::pairing_exp(U, n, n, 2 * n, S::i_over_h());
  auto integrand = E * ksub;
  auto T = integrand.berezin(detail::iota_vec(n, n));
  S pref = ctx.sqrt_g.inverse();
  if ((n * par) & 1) pref = -pref;
  Multivector<S> out(ctx.sym);
  for (auto& [m, c] : T.terms()) {
    Mask mm = 0;
    for (int a = 0; a < n; ++a) {
      if (m >> a & 1) mm |= Mask(1) << a;
      if (m >> (2 * n + a) & 1) mm |= Mask(1) << (n + a);
    }
    out = out + Multivector<S>::monomial(ctx.sym, mm, c * pref);
  }
  return out;
}

// ---------------------------------------------------------------------------
// composition
// ---------------------------------------------------------------------------

template <class S>
FiberSymbol<S> compose_symbols_brute(const FiberSymbol<S>& f, const FiberSymbol<S>& g,
                                     const FiberContext<S>& ctx) {
  return symbol_of(quantize(f, ctx) * quantize(g, ctx), ctx);
}

// exponential bidifferential fast path:
//   f o g = exp(-i hbar [(1-r) d_theta1 d_xi2 + r d_xi1 d_theta2]) f(1) g(2) |_diag
// (the left-written derivative acts first in each pair)
template <class S>
FiberSymbol<S> compose_symbols(const FiberSymbol<S>& f, const FiberSymbol<S>& g,
                               const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto names = indexed_names("xia", n);
  for (auto& s : indexed_names("tha", n)) names.push_back(s);
  for (auto& s : indexed_names("xib", n)) names.push_back(s);
  for (auto& s : indexed_names("thb", n)) names.push_back(s);
  auto U = make_generators(names);
  std::vector<std::pair<int, Multivector<S>>> imF, imG;
  for (int a = 0; a < n; ++a) {
    imF.push_back({a, Multivector<S>::generator(U, a)});
    imF.push_back({n + a, Multivector<S>::generator(U, n + a)});
    imG.push_back({a, Multivector<S>::generator(U, 2 * n + a)});
    imG.push_back({n + a, Multivector<S>::generator(U, 3 * n + a)});
  }
  auto F = f.substitute(imF, U) * g.substitute(imG, U);
  S neg_ih = S::neg_i_h();
  auto D_op = [&](const Multivector<S>& X) {
    Multivector<S> out(U);
    for (int a = 0; a < n; ++a) {
      auto A1 = X.left_derivative(n + a).left_derivative(2 * n + a);   // d_th1 then d_xi2
      auto A2 = X.left_derivative(a).left_derivative(3 * n + a);       // d_xi1 then d_th2
      out = out + A1.scaled(ctx.one_minus_r()) + A2.scaled(ctx.r);
    }
    return out.scaled(neg_ih);
  };
  auto acc = F;
  auto cur = F;
  S fact(1);
  for (int k = 1; k <= 4 * n + 1; ++k) {
    cur = D_op(cur);
    if (cur.is_zero()) break;
    fact = fact * S(k);
    acc = acc + cur.scaled(fact.inverse());
  }
  std::vector<std::pair<int, Multivector<S>>> diag;
  for (int a = 0; a < n; ++a) {
    diag.push_back({a, Multivector<S>::generator(ctx.sym, a)});
    diag.push_back({n + a, Multivector<S>::generator(ctx.sym, n + a)});
    diag.push_back({2 * n + a, Multivector<S>::generator(ctx.sym, a)});
    diag.push_back({3 * n + a, Multivector<S>::generator(ctx.sym, n + a)});
  }
  return acc.substitute(diag, ctx.sym);
}

// canonical odd Poisson bracket on symbols, graded-Leibniz extension of
// {theta_a, xi^b} = {xi^b, theta_a} = delta_a^b
template <class S>
FiberSymbol<S> poisson_bracket_fiber(const FiberSymbol<S>& f, const FiberSymbol<S>& g) {
  auto gs = f.gens();
  const int n = gs->size() / 2;
  Multivector<S> out(gs);
  for (auto& [mf, cf] : f.terms()) {
    auto fterm = Multivector<S>::monomial(gs, mf, cf);
    bool fodd = popcount(mf) & 1;
    S dec = fodd ? S(1) : S(-1);  // (-1)^{f~+1}
    for (int a = 0; a < n; ++a) {
      auto t1 = fterm.left_derivative(n + a) * g.left_derivative(a);
      auto t2 = fterm.left_derivative(a) * g.left_derivative(n + a);
      out = out + (t1 + t2).scaled(dec);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// star and traces
// ---------------------------------------------------------------------------

// * u(xi) = C int Deta/sqrt g  e^{-i t xi.eta} u(eta), xi.eta = g_ab xi^a eta^b
template <class S>
FiberOperator<S> hodge_star(const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto U = kernel_universe(ctx);
  Multivector<S> arg(U);
  S mit = -(S::i()) * ctx.t;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (ring<S>::is_zero(ctx.g[a][b])) continue;
      auto mono = Multivector<S>::generator(U, a) * Multivector<S>::generator(U, n + b);
      arg = arg + mono.scaled(mit * ctx.g[a][b]);
    }
  auto E = arg.exp_even_nilpotent();
  S pref = ctx.C * ctx.sqrt_g.inverse();
  auto eta_group = detail::iota_vec(n, n);
  FiberOperator<S> out(ctx.xi, n);
  for (Mask J = 0; J < out.dim(); ++J) {
    Mask etaJ = 0;
    for (int a = 0; a < n; ++a)
      if (J >> a & 1) etaJ |= Mask(1) << (n + a);
    auto T = (E * Multivector<S>::monomial(U, etaJ, S(1))).berezin(eta_group);
    Multivector<S> colv(ctx.xi);
    for (auto& [m, c] : T.terms()) colv = colv + Multivector<S>::monomial(ctx.xi, m, c * pref);
    out.col(J) = colv;
  }
  return out;
}

// tr_S A := tr(S A); requires S^2 = 1
template <class S>
S graded_trace(const FiberOperator<S>& A, const FiberOperator<S>& Sop,
               const FiberContext<S>& ctx) {
  if (!(Sop * Sop == FiberOperator<S>::identity(ctx)))
    throw std::invalid_argument("graded_trace: grading operator is not an involution");
  return (Sop * A).trace();
}

// str A = (-i hbar)^n int D(xi,theta) sigma A
template <class S>
S str_via_symbol(const FiberSymbol<S>& sigma, const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto T = sigma.berezin(detail::iota_rev(n, n)).berezin(detail::iota_vec(0, n));
  return T.scalar_part() * detail::pow_scalar(S::neg_i_h(), n);
}

// tr_1 A = (-i hbar)^n int D(xi,theta) e^{-(2i/h) xi theta} sigma A((2r-1) xi, theta)
template <class S>
S tr1_via_symbol(const FiberSymbol<S>& sigma, const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto gs = ctx.sym;
  S s = ctx.r * S(2) - S(1);
  std::vector<std::pair<int, Multivector<S>>> images;
  for (int a = 0; a < n; ++a)
    images.push_back({a, Multivector<S>::monomial(gs, Mask(1) << a, s)});
  auto ssub = sigma.substitute(images, gs);
  auto E = detail::pairing_exp(gs, n, 0, n, S(-2) * S::i_over_h());
  auto T = (E * ssub).berezin(detail::iota_rev(n, n)).berezin(detail::iota_vec(0, n));
  return T.scalar_part() * detail::pow_scalar(S::neg_i_h(), n);
}

// tr_* A = t^{-m} int Dxi/sqrt g  sigma A(xi, t hbar xi_#), xi_#a = g_ab xi^b; n = 2m
template <class S>
S trstar_via_symbol(const FiberSymbol<S>& sigma, const FiberContext<S>& ctx) {
  const int n = ctx.n;
  if (n % 2) throw std::invalid_argument("trstar_via_symbol: n must be even");
  auto gs = ctx.sym;
  S th = ctx.t * S::hbar(1);
  std::vector<std::pair<int, Multivector<S>>> images;
  for (int a = 0; a < n; ++a) {
    Multivector<S> img(gs);
    for (int b = 0; b < n; ++b) {
      if (ring<S>::is_zero(ctx.g[a][b])) continue;
      img = img + Multivector<S>::monomial(gs, Mask(1) << b, th * ctx.g[a][b]);
    }
    images.push_back({n + a, std::move(img)});
  }
  auto ssub = sigma.substitute(images, gs);
  auto T = ssub.berezin(detail::iota_vec(0, n));
  S pref = ctx.sqrt_g.inverse();
  for (int i = 0; i < n / 2; ++i) pref = pref * ctx.t.inverse();
  return T.scalar_part() * pref;
}

// parity operator (-1)^P
template <class S>
FiberOperator<S> parity_operator(const FiberContext<S>& ctx) {
  FiberOperator<S> out(ctx.xi, ctx.n);
  for (Mask J = 0; J < out.dim(); ++J)
    out.col(J) = Multivector<S>::monomial(ctx.xi, J, (popcount(J) & 1) ? S(-1) : S(1));
  return out;
}

// ---------------------------------------------------------------------------
// spin conjugation: (T* f)(xi,theta) = f(T xi, T^{-1} theta)
// ---------------------------------------------------------------------------

template <class S>
std::vector<std::vector<S>> small_inverse(const std::vector<std::vector<S>>& M) {
  int k = static_cast<int>(M.size());
  std::vector<std::vector<S>> a = M, inv(k, std::vector<S>(k, S(0)));
  for (int i = 0; i < k; ++i) inv[i][i] = S(1);
  for (int col = 0; col < k; ++col) {
    int piv = -1;
    for (int r2 = col; r2 < k; ++r2)
      if (!ring<S>::is_zero(a[r2][col])) { piv = r2; break; }
    if (piv < 0) throw std::invalid_argument("small_inverse: singular matrix");
    std::swap(a[piv], a[col]);
    std::swap(inv[piv], inv[col]);
    S d = a[col][col].inverse();
    for (int j = 0; j < k; ++j) { a[col][j] = a[col][j] * d; inv[col][j] = inv[col][j] * d; }
    for (int r2 = 0; r2 < k; ++r2) {
      if (r2 == col || ring<S>::is_zero(a[r2][col])) continue;
      S f = a[r2][col];
      for (int j = 0; j < k; ++j) {
        a[r2][j] = a[r2][j] - f * a[col][j];
        inv[r2][j] = inv[r2][j] - f * inv[col][j];
      }
    }
  }
  return inv;
}

template <class S>
FiberSymbol<S> spin_conjugate(const FiberSymbol<S>& f, const std::vector<std::vector<S>>& T,
                              const FiberContext<S>& ctx) {
  const int n = ctx.n;
  auto Ti = small_inverse(T);
  std::vector<std::pair<int, Multivector<S>>> images;
  for (int a = 0; a < n; ++a) {
    Multivector<S> ix(ctx.sym), it(ctx.sym);
    for (int b = 0; b < n; ++b) {
      if (!ring<S>::is_zero(T[a][b]))
        ix = ix + Multivector<S>::monomial(ctx.sym, Mask(1) << b, T[a][b]);
      // theta transforms contragrediently: theta_a -> (T^{-1})^t theta,
      // which keeps xi^a theta_a invariant
      if (!ring<S>::is_zero(Ti[b][a]))
        it = it + Multivector<S>::monomial(ctx.sym, Mask(1) << (n + b), Ti[b][a]);
    }
    images.push_back({a, std::move(ix)});
    images.push_back({n + a, std::move(it)});
  }
  return f.substitute(images, ctx.sym);
}

// pull-back operator on Lambda: (T* u)(xi) = u(T xi)
template <class S>
FiberOperator<S> pullback_operator(const std::vector<std::vector<S>>& T,
                                   const FiberContext<S>& ctx) {
  const int n = ctx.n;
  std::vector<std::pair<int, Multivector<S>>> images;
  for (int a = 0; a < n; ++a) {
    Multivector<S> ix(ctx.xi);
    for (int b = 0; b < n; ++b)
      if (!ring<S>::is_zero(T[a][b]))
        ix = ix + Multivector<S>::monomial(ctx.xi, Mask(1) << b, T[a][b]);
    images.push_back({a, std::move(ix)});
  }
  FiberOperator<S> out(ctx.xi, n);
  for (Mask J = 0; J < out.dim(); ++J)
    out.col(J) = Multivector<S>::monomial(ctx.xi, J, S(1)).substitute(images, ctx.xi);
  return out;
}

// ---------------------------------------------------------------------------
// self-test: the exactness suite, machine-readable (consumed by the CLI)
// ---------------------------------------------------------------------------

struct FiberCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct FiberSelfTest {
  std::vector<FiberCheck> checks;
  bool all_pass = true;
  double wall_seconds = 0;
  void add(std::string name, bool pass, std::string detail = "") {
    all_pass = all_pass && pass;
    checks.push_back({std::move(name), pass, std::move(detail)});
  }
};

namespace detail {

inline ExactScalar random_exact(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(-4, 4), den(1, 3);
  return exact_rat(num(rng), den(rng));
}

inline FiberOperator<ExactScalar> random_operator(const FiberContext<ExactScalar>& ctx,
                                                  std::mt19937_64& rng, int parity = -1) {
  FiberOperator<ExactScalar> A(ctx.xi, ctx.n);
  for (Mask J = 0; J < A.dim(); ++J) {
    Multivector<ExactScalar> col(ctx.xi);
    for (Mask K = 0; K < A.dim(); ++K) {
      if (parity >= 0 && ((popcount(K) - popcount(J)) & 1) != parity) continue;
      auto c = random_exact(rng);
      if (!c.is_zero()) col = col + Multivector<ExactScalar>::monomial(ctx.xi, K, c);
    }
    A.col(J) = col;
  }
  return A;
}

}  // namespace detail

// inject_sign_bug flips the (-1)^n in the kernel map, for the negative control
inline FiberSelfTest fiber_selftest(const std::vector<int>& ns,
                                    const std::vector<std::pair<long, long>>& rs,
                                    std::uint64_t seed = 1234, bool inject_sign_bug = false,
                                    int random_ops = 25) {
  using S = ExactScalar;
  auto t0 = std::chrono::steady_clock::now();
  FiberSelfTest rep;
  std::mt19937_64 rng(seed);
  for (int n : ns) {
    if (n < 1 || n > 3) throw std::invalid_argument("fiber_selftest: n must be in 1..3");
    for (auto [rp, rq] : rs) {
      FiberContext<S> ctx(n, exact_rat(rp, rq));
      std::string tag = "n=" + std::to_string(n) + " r=" + std::to_string(rp) + "/" +
                        std::to_string(rq);

      // roundtrip on all basis symbols
      bool rt = true;
      for (Mask m = 0; m < (Mask(1) << (2 * n)) && rt; ++m) {
        auto f = Multivector<S>::monomial(ctx.sym, m, S(1));
        auto A = quantize(f, ctx);
        auto back = symbol_of(A, ctx);
        if (inject_sign_bug) {
          auto k = kernel_of(A, ctx);
          back = symbol_of(op_from_kernel(-k, A.parity() % 2, ctx), ctx);
        }
        if (!(back == f)) rt = false;
      }
      rep.add("roundtrip sigma(quantize(f)) = f [" + tag + "]", rt);

      // composition: bidifferential vs brute force on random pairs
      bool comp = true;
      std::uniform_int_distribution<Mask> mask(0, (Mask(1) << (2 * n)) - 1);
      int pairs = n == 3 ? 12 : 30;
      for (int i = 0; i < pairs && comp; ++i) {
        auto f = Multivector<S>::monomial(ctx.sym, mask(rng), detail::random_exact(rng));
        auto g = Multivector<S>::monomial(ctx.sym, mask(rng), detail::random_exact(rng));
        if (!(compose_symbols(f, g, ctx) == compose_symbols_brute(f, g, ctx))) comp = false;
      }
      rep.add("compose fast path = brute-force oracle [" + tag + "]", comp);

      // trace paths vs matrix traces
      bool tr = true;
      for (int i = 0; i < random_ops && tr; ++i) {
        auto A = detail::random_operator(ctx, rng);
        auto sig = symbol_of(A, ctx);
        if (!(str_via_symbol(sig, ctx) == A.supertrace())) tr = false;
        if (!(tr1_via_symbol(sig, ctx) == A.trace())) tr = false;
        if (n % 2 == 0) {
          auto star = hodge_star(ctx);
          if (!(trstar_via_symbol(sig, ctx) == (star * A).trace())) tr = false;
        }
      }
      rep.add("trace formulas str/tr_1/tr_* match matrix traces [" + tag + "]", tr);
    }

    // star checks are r-independent
    FiberContext<S> ctx(n, exact_rat(0));
    if (n % 2 == 0) {
      auto star = hodge_star(ctx);
      rep.add("star^2 = 1 [n=" + std::to_string(n) + ", C=t^-m]",
              star * star == FiberOperator<S>::identity(ctx));
    }
    {
      FiberContext<S> c2(n, exact_rat(0));
      c2.set_star(exact_rat(2), exact_rat(5, 3));
      auto star = hodge_star(c2);
      // *^{-1} = C^{-2} (it)^{-n} (-1)^{n(n-1)/2} *
      S pref = (c2.C * c2.C).inverse();
      S it_inv = (S::i() * c2.t).inverse();
      for (int i = 0; i < n; ++i) pref = pref * it_inv;
      if ((n * (n - 1) / 2) % 2) pref = -pref;
      rep.add("star inverse formula [n=" + std::to_string(n) + "]",
              star * star.scaled(pref) == FiberOperator<S>::identity(c2));
    }
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace superweyl
