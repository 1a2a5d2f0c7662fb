#include <doctest.h>

#include <random>

#include "superweyl/fiber.hpp"

using namespace superweyl;

namespace {

using S = ExactScalar;
using MV = Multivector<S>;
using FO = FiberOperator<S>;

S rat(long long p, long long q = 1) { return exact_rat(p, q); }

MV sym_mono(const FiberContext<S>& ctx, Mask xi_mask, Mask theta_mask, S c = exact_rat(1)) {
  return MV::monomial(ctx.sym, xi_mask | (theta_mask << ctx.n), std::move(c));
}

std::vector<std::pair<long, long>> all_r() { return {{0, 1}, {1, 2}, {1, 1}}; }

S rand_rat(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(-4, 4), den(1, 3);
  return exact_rat(num(rng), den(rng));
}

MV random_symbol(const FiberContext<S>& ctx, std::mt19937_64& rng, int terms = 4) {
  MV out(ctx.sym);
  std::uniform_int_distribution<Mask> mask(0, (Mask(1) << (2 * ctx.n)) - 1);
  for (int i = 0; i < terms; ++i)
    out = out + MV::monomial(ctx.sym, mask(rng), rand_rat(rng));
  return out;
}

}  // namespace

TEST_CASE("generator operators: matrices and Clifford-like relations") {
  FiberContext<S> c1(1, rat(0));
  auto [xs, ds] = generator_operators(c1);
  // on basis (1, xi): xi^ = [[0,0],[1,0]], d^ = [[0,1],[0,0]]
  CHECK(xs[0].col(0) == MV::monomial(c1.xi, 1, rat(1)));
  CHECK(xs[0].col(1).is_zero());
  CHECK(ds[0].col(0).is_zero());
  CHECK(ds[0].col(1) == MV::scalar(c1.xi, rat(1)));

  FiberContext<S> c2(2, rat(0));
  auto [X, D] = generator_operators(c2);
  for (int k = 0; k < 2; ++k)
    for (int l = 0; l < 2; ++l) {
      auto anti = D[k] * X[l] + X[l] * D[k];
      if (k == l) CHECK(anti == FO::identity(c2));
      else CHECK(anti == FO(c2.xi, 2));
      CHECK(X[k] * X[l] + X[l] * X[k] == FO(c2.xi, 2));
    }
}

TEST_CASE("quantize: pinned n=1 examples") {
  for (auto [p, q] : all_r()) {
    FiberContext<S> ctx(1, rat(p, q));
    auto [xs, ds] = generator_operators(ctx);
    CHECK(quantize(MV::scalar(ctx.sym, rat(1)), ctx) == FO::identity(ctx));
    CHECK(quantize(sym_mono(ctx, 1, 0), ctx) == xs[0]);
    CHECK(quantize(sym_mono(ctx, 0, 1), ctx) == ds[0].scaled(S::neg_i_h()));
  }
  {
    FiberContext<S> ctx(1, rat(0));
    auto [xs, ds] = generator_operators(ctx);
    CHECK(quantize(sym_mono(ctx, 1, 1), ctx) == (xs[0] * ds[0]).scaled(S::neg_i_h()));
  }
  {
    FiberContext<S> ctx(1, rat(1));
    auto [xs, ds] = generator_operators(ctx);
    CHECK(quantize(sym_mono(ctx, 1, 1), ctx) ==
          (xs[0] * ds[0] - FO::identity(ctx)).scaled(S::neg_i_h()));
  }
}

TEST_CASE("quantize(1) = identity for n up to 3, all r") {
  for (int n = 1; n <= 3; ++n)
    for (auto [p, q] : all_r()) {
      FiberContext<S> ctx(n, rat(p, q));
      CHECK(quantize(MV::scalar(ctx.sym, rat(1)), ctx) == FO::identity(ctx));
    }
}

TEST_CASE("kernels: pinned values and reproduction") {
  FiberContext<S> c1(1, rat(0));
  SUBCASE("identity kernel is delta(xi - eta) up to the fixed ordering sign") {
    auto k = kernel_of(FO::identity(c1), c1);
    auto U = k.gens();
    // (-1)^1 (xi - eta) = eta - xi
    auto expect = Multivector<S>::generator(U, 1) - Multivector<S>::generator(U, 0);
    CHECK(k == expect);
  }
  SUBCASE("parity operator kernel = sqrt g delta(xi + eta), n = 1..3") {
    for (int n = 1; n <= 3; ++n) {
      FiberContext<S> ctx(n, rat(0));
      auto k = kernel_of(parity_operator(ctx), ctx);
      auto U = k.gens();
      auto expect = Multivector<S>::scalar(U, rat(1));
      for (int j = n - 1; j >= 0; --j)
        expect = expect * (Multivector<S>::generator(U, j) + Multivector<S>::generator(U, n + j));
      CHECK(k == expect);
    }
  }
  SUBCASE("xi d has a single-monomial kernel") {
    auto [xs, ds] = generator_operators(c1);
    auto k = kernel_of(xs[0] * ds[0], c1);
    auto U = k.gens();
    CHECK(k == Multivector<S>::monomial(U, 1, rat(-1)));  // -xi
  }
  SUBCASE("op_from_kernel inverts kernel_of on random operators, n <= 3") {
    std::mt19937_64 rng(7);
    for (int n = 1; n <= 3; ++n) {
      FiberContext<S> ctx(n, rat(0));
      for (int i = 0; i < (n == 3 ? 20 : 40); ++i) {
        int par = i % 2;
        auto A = detail::random_operator(ctx, rng, par);
        CHECK(op_from_kernel(kernel_of(A, ctx), par, ctx) == A);
      }
    }
  }
}

TEST_CASE("kernel_compose matches kernel of the matrix product") {
  std::mt19937_64 rng(8);
  SUBCASE("composing with the identity kernel returns kA") {
    FiberContext<S> ctx(2, rat(0));
    auto kI = kernel_of(FO::identity(ctx), ctx);
    for (int par = 0; par < 2; ++par) {
      auto A = detail::random_operator(ctx, rng, par);
      auto kA = kernel_of(A, ctx);
      CHECK(kernel_compose(kA, kI, par, ctx) == kA);
    }
  }
  SUBCASE("n=1, A=B=xi^ gives the zero kernel") {
    FiberContext<S> ctx(1, rat(0));
    auto [xs, ds] = generator_operators(ctx);
    auto k = kernel_of(xs[0], ctx);
    CHECK(kernel_compose(k, k, 1, ctx).is_zero());
  }
  SUBCASE("random pairs, n=2, all parity combinations") {
    FiberContext<S> ctx(2, rat(0));
    for (int pa = 0; pa < 2; ++pa)
      for (int pb = 0; pb < 2; ++pb)
        for (int i = 0; i < 10; ++i) {
          auto A = detail::random_operator(ctx, rng, pa);
          auto B = detail::random_operator(ctx, rng, pb);
          CHECK(kernel_compose(kernel_of(A, ctx), kernel_of(B, ctx), pa, ctx) ==
                kernel_of(A * B, ctx));
        }
  }
}

TEST_CASE("mutual inverse: sigma(quantize(f)) = f on all basis symbols") {
  for (int n = 1; n <= 3; ++n)
    for (auto [p, q] : all_r()) {
      FiberContext<S> ctx(n, rat(p, q));
      bool ok = true;
      for (Mask m = 0; m < (Mask(1) << (2 * n)); ++m) {
        auto f = MV::monomial(ctx.sym, m, rat(1));
        if (!(symbol_of(quantize(f, ctx), ctx) == f)) ok = false;
      }
      CHECK(ok);
    }
}

TEST_CASE("symbol_of pinned examples") {
  for (auto [p, q] : all_r()) {
    FiberContext<S> ctx(1, rat(p, q));
    CHECK(symbol_of(FO::identity(ctx), ctx) == MV::scalar(ctx.sym, rat(1)));
    auto [xs, ds] = generator_operators(ctx);
    CHECK(symbol_of(ds[0].scaled(S::neg_i_h()), ctx) == sym_mono(ctx, 0, 1));
  }
}

TEST_CASE("compose_symbols: units, brackets, and oracle agreement") {
  SUBCASE("1 is the unit") {
    std::mt19937_64 rng(9);
    FiberContext<S> ctx(2, rat(1, 2));
    auto one = MV::scalar(ctx.sym, rat(1));
    for (int i = 0; i < 10; ++i) {
      auto f = random_symbol(ctx, rng);
      CHECK(compose_symbols(one, f, ctx) == f);
      CHECK(compose_symbols(f, one, ctx) == f);
    }
  }
  SUBCASE("n=1, r=0: theta o xi + xi o theta = -i hbar") {
    FiberContext<S> ctx(1, rat(0));
    auto th = sym_mono(ctx, 0, 1), xi = sym_mono(ctx, 1, 0);
    auto anti = compose_symbols(th, xi, ctx) + compose_symbols(xi, th, ctx);
    CHECK(anti == MV::scalar(ctx.sym, S::neg_i_h()));
  }
  SUBCASE("fast path equals brute force on all basis pairs, n=2") {
    for (auto [p, q] : all_r()) {
      FiberContext<S> ctx(2, rat(p, q));
      bool ok = true;
      for (Mask mf = 0; mf < 16 && ok; ++mf)
        for (Mask mg = 0; mg < 16 && ok; ++mg) {
          auto f = MV::monomial(ctx.sym, mf, rat(1));
          auto g = MV::monomial(ctx.sym, mg, rat(1));
          if (!(compose_symbols(f, g, ctx) == compose_symbols_brute(f, g, ctx))) ok = false;
        }
      CHECK(ok);
    }
  }
  SUBCASE("associativity on random triples, n=2") {
    std::mt19937_64 rng(10);
    FiberContext<S> ctx(2, rat(1, 2));
    for (int i = 0; i < 10; ++i) {
      auto f = random_symbol(ctx, rng, 3);
      auto g = random_symbol(ctx, rng, 3);
      auto h = random_symbol(ctx, rng, 3);
      CHECK(compose_symbols(compose_symbols(f, g, ctx), h, ctx) ==
            compose_symbols(f, compose_symbols(g, h, ctx), ctx));
    }
  }
}

TEST_CASE("leading order: f o g - fg = O(h) and the bracket term") {
  FiberContext<S> ctx(2, rat(0));
  for (Mask mf = 0; mf < 16; ++mf)
    for (Mask mg = 0; mg < 16; ++mg) {
      auto f = MV::monomial(ctx.sym, mf, rat(1));
      auto g = MV::monomial(ctx.sym, mg, rat(1));
      auto fg = compose_symbols(f, g, ctx);
      auto d0 = fg - f * g;
      for (auto& [m, c] : d0.terms()) CHECK(c.min_degree() >= 1);
      auto gf = compose_symbols(g, f, ctx);
      int sgn = (popcount(mf) & popcount(mg) & 1) ? -1 : 1;
      auto comm = fg - (sgn < 0 ? gf.scaled(rat(-1)) : gf);
      auto pb = poisson_bracket_fiber(f, g);
      auto d1 = comm + pb.scaled(S::i() * S::hbar(1));
      for (auto& [m, c] : d1.terms()) CHECK(c.min_degree() >= 2);
    }
}

TEST_CASE("poisson_bracket_fiber pinned values") {
  FiberContext<S> ctx(2, rat(0));
  auto th1 = sym_mono(ctx, 0, 1), xi1 = sym_mono(ctx, 1, 0), xi2 = sym_mono(ctx, 2, 0);
  CHECK(poisson_bracket_fiber(th1, xi1) == MV::scalar(ctx.sym, rat(1)));
  CHECK(poisson_bracket_fiber(xi1, th1) == MV::scalar(ctx.sym, rat(1)));
  CHECK(poisson_bracket_fiber(xi1, xi2).is_zero());
  auto xith = sym_mono(ctx, 1, 1);
  CHECK(poisson_bracket_fiber(xith, xi1) == xi1);
}

TEST_CASE("hodge star: pinned values, involution, eigenvalue split") {
  FiberContext<S> ctx(2, rat(0));  // g = I, t = 1, C = t^{-1} = 1
  auto star = hodge_star(ctx);
  CHECK(star.col(0) == MV::monomial(ctx.xi, 0b11, rat(-1)));  // *1 = -xi1 xi2
  CHECK(star.col(0b11) == MV::scalar(ctx.xi, rat(-1)));       // *(xi1 xi2) = -1
  CHECK(star * star == FO::identity(ctx));
  // involution with tr_1(*) = 0: self-dual / anti-self-dual split is 2 + 2
  CHECK(star.trace() == rat(0));
  // middle degree: *(xi1) = -i xi2, *(xi2) = i xi1, so *^2 = 1 there too
  auto x1 = MV::generator(ctx.xi, 0), x2 = MV::generator(ctx.xi, 1);
  CHECK(star.apply(x1) == x2.scaled(-S::i()));
  CHECK(star.apply(x2) == x1.scaled(S::i()));
}

TEST_CASE("hodge star inverse formula, n = 2,3,4, random t") {
  std::mt19937_64 rng(11);
  for (int n : {2, 3, 4}) {
    for (long tnum : {1L, 2L, 3L}) {
      FiberContext<S> ctx(n, rat(0));
      ctx.set_star(rat(tnum, 2), rat(7, 5));
      auto star = hodge_star(ctx);
      S pref = (ctx.C * ctx.C).inverse();
      S it_inv = (S::i() * ctx.t).inverse();
      for (int i = 0; i < n; ++i) pref = pref * it_inv;
      if ((n * (n - 1) / 2) % 2) pref = -pref;
      CHECK(star * star.scaled(pref) == FO::identity(ctx));
    }
  }
}

TEST_CASE("star^2 = 1 for n = 2, 4 with C = t^{-m} and non-identity metric") {
  for (int n : {2, 4}) {
    for (auto [tp, tq] : std::vector<std::pair<long, long>>{{1, 1}, {3, 2}}) {
      FiberContext<S> ctx(n, rat(0));
      S t = rat(tp, tq), C = rat(1);
      for (int i = 0; i < n / 2; ++i) C = C * t.inverse();
      ctx.set_star(t, C);
      auto star = hodge_star(ctx);
      CHECK(star * star == FO::identity(ctx));
    }
  }
  {
    // diagonal exact metric with rational sqrt(det)
    FiberContext<S> ctx(2, rat(0));
    std::vector<std::vector<S>> g = {{rat(4), rat(0)}, {rat(0), rat(9)}};
    ctx.set_metric(g, rat(6));
    auto star = hodge_star(ctx);
    CHECK(star * star == FO::identity(ctx));
  }
}

TEST_CASE("graded traces: pinned examples") {
  FiberContext<S> c1(1, rat(0));
  auto [xs, ds] = generator_operators(c1);
  CHECK(FO::identity(c1).supertrace() == rat(0));
  CHECK((xs[0] * ds[0]).supertrace() == rat(-1));
  CHECK((xs[0] * ds[0]).trace() == rat(1));
  for (int n = 1; n <= 3; ++n) {
    FiberContext<S> c(n, rat(0));
    CHECK(FO::identity(c).trace() == rat(1 << n));
  }
}

TEST_CASE("graded_trace requires an involution and equals tr(SA)") {
  FiberContext<S> ctx(2, rat(0));
  std::mt19937_64 rng(12);
  auto A = detail::random_operator(ctx, rng);
  auto P = parity_operator(ctx);
  CHECK(graded_trace(A, P, ctx) == A.supertrace());
  CHECK(graded_trace(A, FO::identity(ctx), ctx) == A.trace());
  auto star = hodge_star(ctx);
  CHECK(graded_trace(A, star, ctx) == (star * A).trace());
  auto [xs, ds] = generator_operators(ctx);
  CHECK_THROWS(graded_trace(A, xs[0], ctx));
}

TEST_CASE("trace formulas agree with matrix traces for random operators") {
  std::mt19937_64 rng(13);
  for (int n = 1; n <= 3; ++n) {
    for (auto [p, q] : all_r()) {
      FiberContext<S> ctx(n, rat(p, q));
      for (int i = 0; i < 12; ++i) {
        auto A = detail::random_operator(ctx, rng);
        auto sig = symbol_of(A, ctx);
        CHECK(str_via_symbol(sig, ctx) == A.supertrace());
        CHECK(tr1_via_symbol(sig, ctx) == A.trace());
        if (n % 2 == 0) {
          auto star = hodge_star(ctx);
          CHECK(trstar_via_symbol(sig, ctx) == (star * A).trace());
        }
      }
    }
  }
}

TEST_CASE("Weyl quantization: tr_1 A = 2^n (sigma A)(0,0) at r = 1/2") {
  std::mt19937_64 rng(14);
  for (int n = 1; n <= 3; ++n) {
    FiberContext<S> ctx(n, rat(1, 2));
    for (int i = 0; i < 15; ++i) {
      auto A = detail::random_operator(ctx, rng);
      auto sig = symbol_of(A, ctx);
      CHECK(sig.scalar_part() * rat(1 << n) == A.trace());
    }
  }
}

TEST_CASE("str annihilates supercommutators") {
  std::mt19937_64 rng(15);
  FiberContext<S> ctx(2, rat(0));
  for (int pa = 0; pa < 2; ++pa)
    for (int pb = 0; pb < 2; ++pb)
      for (int i = 0; i < 10; ++i) {
        auto A = detail::random_operator(ctx, rng, pa);
        auto B = detail::random_operator(ctx, rng, pb);
        auto comm = (pa && pb) ? A * B + B * A : A * B - B * A;
        CHECK(comm.supertrace() == rat(0));
      }
}

TEST_CASE("spin conjugation (spinor representation lemma)") {
  FiberContext<S> ctx(2, rat(1, 2));
  SUBCASE("identity and scaling") {
    std::vector<std::vector<S>> I2 = {{rat(1), rat(0)}, {rat(0), rat(1)}};
    auto f = sym_mono(ctx, 1, 1);  // xi^1 theta_1
    CHECK(spin_conjugate(f, I2, ctx) == f);
    std::vector<std::vector<S>> lam = {{rat(3), rat(0)}, {rat(0), rat(3)}};
    CHECK(spin_conjugate(f, lam, ctx) == f);  // contragredient pairing invariance
  }
  SUBCASE("operator identity T* f^ (T*)^{-1} = quantize(T* f) for random exact T") {
    std::mt19937_64 rng(16);
    for (int trial = 0; trial < 3; ++trial) {
      std::vector<std::vector<S>> T;
      do {
        T.assign(2, std::vector<S>(2, rat(0)));
        for (auto& row : T)
          for (auto& e : row) e = rand_rat(rng);
      } while (ring<S>::is_zero(small_det(T)));
      auto Tstar = pullback_operator(T, ctx);
      auto Tstar_inv = pullback_operator(small_inverse(T), ctx);
      for (Mask m = 0; m < 16; ++m) {
        auto f = MV::monomial(ctx.sym, m, rat(1));
        auto lhs = Tstar * quantize(f, ctx) * Tstar_inv;
        auto rhs = quantize(spin_conjugate(f, T, ctx), ctx);
        CHECK(lhs == rhs);
      }
    }
  }
  SUBCASE("singular T rejected") {
    std::vector<std::vector<S>> T = {{rat(1), rat(1)}, {rat(1), rat(1)}};
    CHECK_THROWS(spin_conjugate(sym_mono(ctx, 1, 0), T, ctx));
  }
}

TEST_CASE("fiber selftest passes and the injected sign bug is caught") {
  auto rep = fiber_selftest({1, 2}, {{0, 1}, {1, 2}, {1, 1}}, 99, false, 8);
  CHECK(rep.all_pass);
  CHECK(rep.checks.size() > 0);
  auto bad = fiber_selftest({1}, {{0, 1}}, 99, true, 4);
  CHECK_FALSE(bad.all_pass);
}

TEST_CASE("exactness bookkeeping: hbar Laurent degrees stay in [-2n, 2n]") {
  std::mt19937_64 rng(17);
  for (int n = 1; n <= 3; ++n) {
    FiberContext<S> ctx(n, rat(1, 2));
    for (int i = 0; i < 6; ++i) {
      auto f = random_symbol(ctx, rng);
      auto g = random_symbol(ctx, rng);
      auto fg = compose_symbols(f, g, ctx);
      for (auto& [m, c] : fg.terms()) {
        CHECK(c.min_degree() >= -2 * n);
        CHECK(c.max_degree() <= 2 * n);
      }
    }
  }
}
