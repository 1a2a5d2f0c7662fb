#include <doctest.h>

#include <random>

#include "superweyl/grassmann.hpp"

using namespace superweyl;

namespace {

using MV = Multivector<ExactScalar>;

ExactScalar rat(long long p, long long q = 1) { return exact_rat(p, q); }

ExactScalar rand_rat(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> num(-4, 4), den(1, 3);
  return exact_rat(num(rng), den(rng));
}

MV random_mv(const GenSetPtr& gs, std::mt19937_64& rng, int max_terms = 6) {
  MV out(gs);
  std::uniform_int_distribution<Mask> mask(0, (Mask(1) << gs->size()) - 1);
  for (int i = 0; i < max_terms; ++i)
    out = out + MV::monomial(gs, mask(rng), rand_rat(rng));
  return out;
}

MV random_homogeneous(const GenSetPtr& gs, std::mt19937_64& rng, int parity) {
  MV out(gs);
  std::uniform_int_distribution<Mask> mask(0, (Mask(1) << gs->size()) - 1);
  for (int i = 0; i < 8; ++i) {
    Mask m = mask(rng);
    if ((popcount(m) & 1) != parity) continue;
    out = out + MV::monomial(gs, m, rand_rat(rng));
  }
  return out;
}

}  // namespace

TEST_CASE("generator sets reject duplicates and unknown names") {
  CHECK_THROWS(make_generators({"a", "b", "a"}));
  auto gs = make_generators({"xi1", "xi2"});
  CHECK(gs->index("xi2") == 1);
  CHECK_THROWS(gs->index("nope"));
}

TEST_CASE("multiply: anticommutativity and nilpotence") {
  auto gs = make_generators({"xi1", "xi2"});
  auto x1 = MV::generator(gs, 0), x2 = MV::generator(gs, 1);
  CHECK(x1 * x2 == MV::monomial(gs, 0b11, rat(1)));
  CHECK(x2 * x1 == MV::monomial(gs, 0b11, rat(-1)));
  auto one = MV::scalar(gs, rat(1));
  auto e = one + x1;
  CHECK(e * e == one + x1.scaled(rat(2)));  // xi1^2 = 0
}

TEST_CASE("multiply rejects mismatched generator sets") {
  auto a = MV::generator(make_generators({"a", "b"}), 0);
  auto b = MV::generator(make_generators({"c", "d"}), 0);
  CHECK_THROWS(a * b);
}

TEST_CASE("left_derivative basics") {
  auto gs = make_generators({"xi1", "xi2"});
  auto x1x2 = MV::monomial(gs, 0b11, rat(1));
  CHECK(x1x2.left_derivative("xi1") == MV::generator(gs, 1));
  CHECK(x1x2.left_derivative("xi2") == MV::generator(gs, 0).scaled(rat(-1)));
  CHECK(MV::scalar(gs, rat(1)).left_derivative("xi1").is_zero());
  CHECK_THROWS(x1x2.left_derivative("zeta"));
}

TEST_CASE("berezin: normalization anchor and low-degree vanishing") {
  auto gs = make_generators({"xi1", "xi2"});
  // int Dxi (xi2 xi1) = 1  (the paper's anchor)
  auto x21 = MV::generator(gs, 1) * MV::generator(gs, 0);
  CHECK(x21.berezin({0, 1}).scalar_part() == rat(1));
  auto x12 = MV::generator(gs, 0) * MV::generator(gs, 1);
  CHECK(x12.berezin({0, 1}).scalar_part() == rat(-1));
  auto g1 = make_generators({"xi1"});
  CHECK(Multivector<ExactScalar>::scalar(g1, rat(5)).berezin({0}).is_zero());
}

TEST_CASE("berezin: iterated left derivatives, remaining generators pass through") {
  auto gs = make_generators({"a", "b", "c"});
  // int D(a,b) of (c b a): move out the (b a) block
  auto cba = MV::generator(gs, 2) * MV::generator(gs, 1) * MV::generator(gs, 0);
  auto r = cba.berezin({0, 1});
  CHECK(r == MV::generator(gs, 2));
}

TEST_CASE("substitute_linear") {
  auto gs = make_generators({"xi1", "xi2"});
  auto x1x2 = MV::monomial(gs, 0b11, rat(1));
  SUBCASE("xi1 -> xi1 + xi2 fixes xi1xi2") {
    auto img = MV::generator(gs, 0) + MV::generator(gs, 1);
    CHECK(x1x2.substitute({{0, img}}, gs) == x1x2);
  }
  SUBCASE("identity substitution") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
      auto v = random_mv(gs, rng);
      CHECK(v.substitute({}, gs) == v);
    }
  }
  SUBCASE("swap xi1 <-> xi2 flips the top sign") {
    auto r = x1x2.substitute({{0, MV::generator(gs, 1)}, {1, MV::generator(gs, 0)}}, gs);
    CHECK(r == x1x2.scaled(rat(-1)));
  }
  SUBCASE("non-degree-1 images rejected") {
    CHECK_THROWS(x1x2.substitute({{0, MV::scalar(gs, rat(1))}}, gs));
    CHECK_THROWS(x1x2.substitute({{0, x1x2}}, gs));
  }
}

TEST_CASE("exp_even_nilpotent") {
  auto gs2 = make_generators({"xi1", "xi2"});
  CHECK(MV(gs2).exp_even_nilpotent() == MV::scalar(gs2, rat(1)));
  auto c = rat(3, 2);
  auto a = MV::monomial(gs2, 0b11, c);
  CHECK(a.exp_even_nilpotent() == MV::scalar(gs2, rat(1)) + a);
  auto gs4 = make_generators({"xi1", "xi2", "xi3", "xi4"});
  auto b = MV::monomial(gs4, 0b0011, rat(1)) + MV::monomial(gs4, 0b1100, rat(1));
  auto expb = b.exp_even_nilpotent();
  CHECK(expb == MV::scalar(gs4, rat(1)) + b + MV::monomial(gs4, 0b1111, rat(1)));
  // odd or degree-0 input rejected
  CHECK_THROWS(MV::generator(gs2, 0).exp_even_nilpotent());
  CHECK_THROWS(MV::scalar(gs2, rat(2)).exp_even_nilpotent());
}

TEST_CASE("pfaffian: pinned values") {
  using M = std::vector<std::vector<ExactScalar>>;
  auto a = rat(7, 3);
  M Q2 = {{rat(0), a}, {-a, rat(0)}};
  CHECK(pfaffian(Q2) == a);
  M Q3 = {{rat(0), rat(1), rat(2)}, {rat(-1), rat(0), rat(3)}, {rat(-2), rat(-3), rat(0)}};
  CHECK(pfaffian(Q3) == rat(0));
  // 4x4 with upper entries (a,b,c,d,e,f) -> af - be + cd
  ExactScalar A = rat(1), B = rat(2), C = rat(3), D = rat(5), E = rat(7), F = rat(11);
  M Q4 = {{rat(0), A, B, C}, {-A, rat(0), D, E}, {-B, -D, rat(0), F}, {-C, -E, -F, rat(0)}};
  CHECK(pfaffian(Q4) == A * F - B * E + C * D);
  M bad = {{rat(0), rat(1)}, {rat(1), rat(0)}};
  CHECK_THROWS(pfaffian(bad));
}

TEST_CASE("property: associativity and graded commutativity (500 random triples)") {
  std::mt19937_64 rng(42);
  for (int n = 2; n <= 6; ++n) {
    auto gs = make_generators(indexed_names("g", n));
    for (int i = 0; i < 100; ++i) {
      auto a = random_mv(gs, rng), b = random_mv(gs, rng), c = random_mv(gs, rng);
      CHECK((a * b) * c == a * (b * c));
      int pa = i % 2, pb = (i / 2) % 2;
      auto ha = random_homogeneous(gs, rng, pa);
      auto hb = random_homogeneous(gs, rng, pb);
      auto comm = ha * hb - ((pa & pb) ? (hb * ha).scaled(rat(-1)) : hb * ha);
      CHECK(comm.is_zero());
    }
  }
}

TEST_CASE("property: graded Leibniz rule for left_derivative") {
  std::mt19937_64 rng(43);
  auto gs = make_generators(indexed_names("g", 5));
  for (int i = 0; i < 200; ++i) {
    int par = i % 2;
    auto a = random_homogeneous(gs, rng, par);
    auto b = random_mv(gs, rng);
    int g = static_cast<int>(i % 5);
    auto lhs = (a * b).left_derivative(g);
    auto rhs = a.left_derivative(g) * b +
               (par ? (a * b.left_derivative(g)).scaled(rat(-1)) : a * b.left_derivative(g));
    CHECK(lhs == rhs);
  }
}

TEST_CASE("property: pfaffian squared equals determinant (k = 2,4,6)") {
  std::mt19937_64 rng(44);
  for (int k : {2, 4, 6}) {
    for (int trial = 0; trial < (k == 6 ? 30 : 80); ++trial) {
      std::vector<std::vector<ExactScalar>> Q(k, std::vector<ExactScalar>(k, rat(0)));
      for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
          auto v = rand_rat(rng);
          Q[i][j] = v;
          Q[j][i] = -v;
        }
      auto pf = pfaffian(Q);
      CHECK(pf * pf == small_det(Q));
    }
  }
}

TEST_CASE("property: Berezin change of variables int D (f o T) = det T int D f") {
  // equivalently int D f = det(T)^{-1} int D (f o T): the integral transforms
  // with det(T)^{-1} under substitute_linear
  std::mt19937_64 rng(45);
  for (int k : {2, 3, 4}) {
    auto gs = make_generators(indexed_names("xi", k));
    std::vector<int> group(k);
    for (int i = 0; i < k; ++i) group[i] = i;
    int done = 0;
    while (done < 40) {
      std::vector<std::vector<ExactScalar>> T(k, std::vector<ExactScalar>(k, rat(0)));
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) T[i][j] = rand_rat(rng);
      auto det = small_det(T);
      if (ring<ExactScalar>::is_zero(det)) continue;
      ++done;
      auto f = random_mv(gs, rng, 8);
      std::vector<std::pair<int, MV>> images;
      for (int i = 0; i < k; ++i) {
        MV img(gs);
        for (int j = 0; j < k; ++j)
          img = img + MV::monomial(gs, Mask(1) << j, T[i][j]);
        images.push_back({i, img});
      }
      auto lhs = f.substitute(images, gs).berezin(group).scalar_part();
      auto rhs = det * f.berezin(group).scalar_part();
      CHECK(lhs == rhs);
    }
  }
}

TEST_CASE("property: exp(a) exp(-a) = 1 for nilpotent even a") {
  std::mt19937_64 rng(46);
  auto gs = make_generators(indexed_names("g", 6));
  for (int i = 0; i < 100; ++i) {
    MV a(gs);
    std::uniform_int_distribution<Mask> mask(0, 63);
    for (int t = 0; t < 4; ++t) {
      Mask m = mask(rng);
      if (popcount(m) == 0 || (popcount(m) & 1)) continue;
      a = a + MV::monomial(gs, m, rand_rat(rng));
    }
    auto prod = a.exp_even_nilpotent() * (-a).exp_even_nilpotent();
    CHECK(prod == MV::scalar(gs, rat(1)));
  }
}

TEST_CASE("debug serialization") {
  auto gs = make_generators({"xi1", "xi2"});
  auto v = MV::monomial(gs, 0b11, ExactScalar::coeff(GaussRat(BigRat(1, 2), BigRat(3, 4)), -1));
  CHECK(v.str() == "((1/2 + 3/4 i) hbar^-1) xi1 xi2");
  CHECK(MV(gs).str() == "0");
}

TEST_CASE("Laurent degree stays bounded in fiber-scale products") {
  // values in fiber computations with n generators keep hbar-exponents
  // in [-2n, 2n]; spot-check the scalar ring bookkeeping
  auto h = ExactScalar::hbar(1);
  auto hinv = ExactScalar::i_over_h();
  auto x = h * h * hinv * hinv;
  CHECK(x.min_degree() == 0);
  CHECK(x.max_degree() == 0);
  CHECK(x == exact_rat(-1));
}
