#pragma once

// Chart-based Riemannian data: manifold spec ingestion, Christoffel symbols,
// Riemann/Ricci/scalar curvature as expression tensors, curvature-identity
// verification, and tensor-product Gauss-Legendre quadrature.
//
// Index conventions: the first two Riemann slots are the commutator pair,
//   R_abk^l = d_a Gam^l_bk - d_b Gam^l_ak + Gam^l_am Gam^m_bk - Gam^l_bm Gam^m_ak,
// which satisfies [nabla_a, nabla_b] = -R_abk^l xi^k d/dxi^l for the form
// covariant derivative nabla_a = d_a - Gam_ak^l xi^k d/dxi^l.  On this tensor
// the contraction R_ka^kb is minus the standard Ricci; ricci() returns the
// standard one (unit sphere -> +delta), weitz_ricci the paper contraction
// used by the Weitzenboeck RHS and the Hodge-Laplacian symbol.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "superweyl/expr.hpp"
#include "superweyl/grassmann.hpp"

namespace superweyl {

struct SpecError : std::runtime_error {
  explicit SpecError(const std::string& m) : std::runtime_error(m) {}
};

struct MetricChart {
  std::vector<std::string> coords;
  std::vector<std::pair<double, double>> ranges;
  std::vector<std::vector<Expr>> g;
  double trim = 1e-4;
  std::string label;

  int dim() const { return static_cast<int>(coords.size()); }

  std::map<std::string, double> bind(std::span<const double> x) const {
    std::map<std::string, double> env;
    for (int i = 0; i < dim(); ++i) env[coords[i]] = x[i];
    return env;
  }
  std::vector<double> random_interior_point(std::mt19937_64& rng, double margin = 0.1) const {
    std::vector<double> x(dim());
    for (int i = 0; i < dim(); ++i) {
      double lo = ranges[i].first, hi = ranges[i].second;
      double w = hi - lo;
      std::uniform_real_distribution<double> d(lo + margin * w, hi - margin * w);
      x[i] = d(rng);
    }
    return x;
  }
};

struct CurvatureData {
  int n = 0;
  std::vector<std::vector<Expr>> ginv;            // g^{ab} via adjugate/det
  Expr det_g;
  Expr sqrt_det_g;
  std::vector<std::vector<std::vector<Expr>>> Gamma;        // [c][a][b]
  std::vector<std::vector<std::vector<std::vector<Expr>>>> R;    // R_abk^l
  std::vector<std::vector<std::vector<std::vector<Expr>>>> Rup;  // R_ab^{kl} = g^{km} R_abm^l
  std::vector<std::vector<Expr>> ricci;        // standard: unit S2 -> +delta
  std::vector<std::vector<Expr>> weitz_ricci;  // paper contraction R_ka^kb = -ricci
  Expr scalar;        // ricci trace
  Expr weitz_scalar;  // weitz_ricci trace
};

namespace detail {

inline Expr expr_det(const std::vector<std::vector<Expr>>& M) {
  int k = static_cast<int>(M.size());
  if (k == 1) return M[0][0];
  Expr out = Expr::number(0);
  for (int j = 0; j < k; ++j) {
    std::vector<std::vector<Expr>> minor_;
    for (int r = 1; r < k; ++r) {
      std::vector<Expr> row;
      for (int c = 0; c < k; ++c)
        if (c != j) row.push_back(M[r][c]);
      minor_.push_back(std::move(row));
    }
    Expr term = M[0][j] * expr_det(minor_);
    out = (j % 2 == 0) ? out + term : out - term;
  }
  return out.simplify();
}

inline std::vector<std::vector<Expr>> expr_inverse(const std::vector<std::vector<Expr>>& M,
                                                   const Expr& det) {
  int k = static_cast<int>(M.size());
  std::vector<std::vector<Expr>> inv(k, std::vector<Expr>(k));
  if (k == 1) {
    inv[0][0] = (Expr::number(1) / det).simplify();
    return inv;
  }
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      std::vector<std::vector<Expr>> minor_;
      for (int r = 0; r < k; ++r) {
        if (r == i) continue;
        std::vector<Expr> row;
        for (int c = 0; c < k; ++c)
          if (c != j) row.push_back(M[r][c]);
        minor_.push_back(std::move(row));
      }
      Expr cof = expr_det(minor_);
      if ((i + j) % 2) cof = -cof;
      inv[j][i] = (cof / det).simplify();  // adjugate transpose
    }
  return inv;
}

}  // namespace detail

inline CurvatureData christoffel(const MetricChart& chart) {
  const int n = chart.dim();
  if (n > 4) throw SpecError("christoffel: symbolic metric inverse limited to dim <= 4");
  CurvatureData cd;
  cd.n = n;
  cd.det_g = detail::expr_det(chart.g);
  cd.sqrt_det_g = Expr::apply(Fn::sqrt, cd.det_g);
  cd.ginv = detail::expr_inverse(chart.g, cd.det_g);
  cd.Gamma.assign(n, std::vector<std::vector<Expr>>(n, std::vector<Expr>(n, Expr::number(0))));
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        Expr s = Expr::number(0);
        for (int d = 0; d < n; ++d) {
          Expr t = chart.g[b][d].differentiate(chart.coords[a]) +
                   chart.g[a][d].differentiate(chart.coords[b]) -
                   chart.g[a][b].differentiate(chart.coords[d]);
          s = s + cd.ginv[c][d] * t;
        }
        s = (Expr::number(0.5) * s).simplify();
        cd.Gamma[c][a][b] = s;
        cd.Gamma[c][b][a] = s;
      }
  return cd;
}

inline void riemann(const MetricChart& chart, CurvatureData& cd) {
  const int n = cd.n;
  using T4 = std::vector<std::vector<std::vector<std::vector<Expr>>>>;
  cd.R = T4(n, std::vector<std::vector<std::vector<Expr>>>(
                   n, std::vector<std::vector<Expr>>(n, std::vector<Expr>(n, Expr::number(0)))));
  cd.Rup = cd.R;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          Expr s = cd.Gamma[l][b][k].differentiate(chart.coords[a]) -
                   cd.Gamma[l][a][k].differentiate(chart.coords[b]);
          for (int m = 0; m < n; ++m)
            s = s + cd.Gamma[l][a][m] * cd.Gamma[m][b][k] -
                cd.Gamma[l][b][m] * cd.Gamma[m][a][k];
          s = s.simplify();
          cd.R[a][b][k][l] = s;
          cd.R[b][a][k][l] = (-s).simplify();
        }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          Expr s = Expr::number(0);
          for (int m = 0; m < n; ++m) s = s + cd.ginv[k][m] * cd.R[a][b][m][l];
          cd.Rup[a][b][k][l] = s.simplify();
        }
}

inline void ricci_and_scalar(CurvatureData& cd) {
  const int n = cd.n;
  cd.weitz_ricci.assign(n, std::vector<Expr>(n, Expr::number(0)));
  cd.ricci = cd.weitz_ricci;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Expr s = Expr::number(0);
      for (int k = 0; k < n; ++k) s = s + cd.Rup[k][a][k][b];
      s = s.simplify();
      cd.weitz_ricci[a][b] = s;
      cd.ricci[a][b] = (-s).simplify();
    }
  Expr sc = Expr::number(0);
  for (int a = 0; a < n; ++a) sc = sc + cd.ricci[a][a];
  cd.scalar = sc.simplify();
  cd.weitz_scalar = (-cd.scalar).simplify();
}

inline CurvatureData curvature(const MetricChart& chart) {
  CurvatureData cd = christoffel(chart);
  riemann(chart, cd);
  ricci_and_scalar(cd);
  return cd;
}

// ---------------------------------------------------------------------------
// identity verification
// ---------------------------------------------------------------------------

struct IdentityCheck {
  std::string name;
  double max_residual = 0;
  double tol = 0;
  bool pass = false;
  std::string where;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  bool pass = true;
  void add(IdentityCheck c) {
    pass = pass && c.pass;
    checks.push_back(std::move(c));
  }
};

namespace detail {

inline bool within(double resid, double scale, double tol) {
  return resid <= std::max(1e-12, tol * std::max(1.0, scale));
}

// nabla_a on a form field (multivector over xi with Expr coefficients)
inline Multivector<Expr> nabla_form(int a, const Multivector<Expr>& u, const MetricChart& chart,
                                    const CurvatureData& cd) {
  const int n = chart.dim();
  auto gs = u.gens();
  Multivector<Expr> out(gs);
  for (auto& [m, c] : u.terms())
    out = out + Multivector<Expr>::monomial(gs, m, c.differentiate(chart.coords[a]));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      if (ring<Expr>::is_zero(cd.Gamma[l][a][k])) continue;
      auto t = Multivector<Expr>::generator(gs, k) * u.left_derivative(l);
      out = out + t.scaled(-cd.Gamma[l][a][k]);
    }
  return out;
}

}  // namespace detail

inline IdentityReport verify_curvature_identities(const MetricChart& chart,
                                                  const CurvatureData& cd, int npoints = 20,
                                                  double tol = 1e-8, std::uint64_t seed = 12345) {
  const int n = chart.dim();
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < npoints; ++i) pts.push_back(chart.random_interior_point(rng));

  IdentityReport rep;
  auto eval_at = [&](const Expr& e, const std::vector<double>& x) {
    return e.evaluate(chart.bind(x));
  };

  {
    IdentityCheck c{"antisymmetry R_abk^l in (a,b)", 0, tol, true, ""};
    for (auto& x : pts)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              double v = eval_at(cd.R[a][b][k][l], x) + eval_at(cd.R[b][a][k][l], x);
              c.max_residual = std::max(c.max_residual, std::abs(v));
            }
    c.pass = c.max_residual <= std::max(1e-12, tol);
    rep.add(c);
  }
  {
    IdentityCheck c{"antisymmetry R_ab^{kl} in (k,l)", 0, tol, true, ""};
    for (auto& x : pts)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              double v = eval_at(cd.Rup[a][b][k][l], x) + eval_at(cd.Rup[a][b][l][k], x);
              c.max_residual = std::max(c.max_residual, std::abs(v));
            }
    c.pass = c.max_residual <= std::max(1e-12, tol);
    rep.add(c);
  }
  {
    IdentityCheck c{"first Bianchi identity", 0, tol, true, ""};
    for (auto& x : pts)
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              double v = eval_at(cd.R[a][b][k][l], x) + eval_at(cd.R[b][k][a][l], x) +
                         eval_at(cd.R[k][a][b][l], x);
              if (std::abs(v) > c.max_residual) {
                c.max_residual = std::abs(v);
                if (!detail::within(std::abs(v), 1.0, tol)) {
                  std::ostringstream os;
                  os << "(a,b,k,l)=(" << a << "," << b << "," << k << "," << l << ")";
                  c.where = os.str();
                }
              }
            }
    c.pass = c.max_residual <= std::max(1e-12, tol);
    rep.add(c);
  }
  {
    // [nabla_a, nabla_b] u = -R_abk^l xi^k d_l u on basis 1-forms with random
    // smooth coefficient fields
    IdentityCheck c{"commutator defining relation", 0, tol, true, ""};
    auto gs = make_generators(indexed_names("xi", n));
    std::uniform_real_distribution<double> amp(-2, 2);
    for (int k0 = 0; k0 < n; ++k0) {
      Expr f = Expr::number(amp(rng));
      for (int i = 0; i < n; ++i) {
        f = f + Expr::number(amp(rng)) * Expr::var(chart.coords[i]) +
            Expr::number(amp(rng)) * Expr::apply(Fn::sin, Expr::var(chart.coords[i]));
      }
      auto u = Multivector<Expr>::monomial(gs, Mask(1) << k0, f);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          auto lhs = detail::nabla_form(a, detail::nabla_form(b, u, chart, cd), chart, cd) -
                     detail::nabla_form(b, detail::nabla_form(a, u, chart, cd), chart, cd);
          Multivector<Expr> rhs(gs);
          for (int k = 0; k < n; ++k)
            for (int l = 0; l < n; ++l) {
              if (ring<Expr>::is_zero(cd.R[a][b][k][l])) continue;
              auto t = Multivector<Expr>::generator(gs, k) * u.left_derivative(l);
              rhs = rhs + t.scaled(-cd.R[a][b][k][l]);
            }
          auto diff = lhs - rhs;
          for (auto& x : pts) {
            auto env = chart.bind(x);
            for (auto& [m, ce] : diff.terms())
              c.max_residual = std::max(c.max_residual, std::abs(ce.evaluate(env)));
          }
        }
    }
    c.pass = c.max_residual <= std::max(1e-12, tol);
    rep.add(c);
  }
  {
    IdentityCheck c{"metric compatibility nabla g = 0", 0, tol, true, ""};
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int k = 0; k < n; ++k) {
          Expr e = chart.g[b][k].differentiate(chart.coords[a]);
          for (int d = 0; d < n; ++d)
            e = e - cd.Gamma[d][a][b] * chart.g[d][k] - cd.Gamma[d][a][k] * chart.g[b][d];
          for (auto& x : pts)
            c.max_residual = std::max(c.max_residual, std::abs(eval_at(e, x)));
        }
    c.pass = c.max_residual <= std::max(1e-12, tol);
    rep.add(c);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature
// ---------------------------------------------------------------------------

// nodes/weights on [-1,1]; Newton on P_n
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1);
      }
      pp = n * (z * p0 - p1) / (z * z - 1.0);
      double z1 = z;
      z = z1 - p0 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
}

inline int thread_budget() {
  if (const char* env = std::getenv("SUPERWEYL_THREADS")) {
    int v = std::atoi(env);
    if (v <= 1) return 1;
    return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(std::min(hc, 8u));
}

// tensor-product quadrature over the (trimmed) chart box; deterministic
// summation order independent of thread count
inline double integrate_box(const std::vector<std::pair<double, double>>& ranges, double trim,
                            int nodes_per_dim,
                            const std::function<double(std::span<const double>)>& f) {
  const int d = static_cast<int>(ranges.size());
  std::vector<double> xs, ws;
  gauss_legendre(nodes_per_dim, xs, ws);
  std::vector<double> lo(d), width(d);
  for (int i = 0; i < d; ++i) {
    double a = ranges[i].first + trim, b = ranges[i].second - trim;
    if (b <= a) throw SpecError("integrate_box: empty trimmed range");
    lo[i] = a;
    width[i] = b - a;
  }
  long long total = 1;
  for (int i = 0; i < d; ++i) total *= nodes_per_dim;

  const int nthreads = std::max(1, thread_budget());
  const long long chunk =
      std::max(1LL, (total + nthreads * 8 - 1) / (nthreads * 8));
  const long long nchunks = (total + chunk - 1) / chunk;

  std::vector<double> partial(nchunks, 0.0);
  auto run_chunk = [&](long long ci) {
    long long begin = ci * chunk, end = std::min(total, begin + chunk);
    std::vector<double> pt(d);
    double acc = 0;
    for (long long idx = begin; idx < end; ++idx) {
      long long rem = idx;
      double wt = 1;
      for (int i = d - 1; i >= 0; --i) {
        int k = static_cast<int>(rem % nodes_per_dim);
        rem /= nodes_per_dim;
        pt[i] = lo[i] + width[i] * 0.5 * (xs[k] + 1.0);
        wt *= ws[k] * width[i] * 0.5;
      }
      acc += wt * f(pt);
    }
    partial[ci] = acc;
  };
  if (nthreads == 1 || nchunks == 1) {
    for (long long ci = 0; ci < nchunks; ++ci) run_chunk(ci);
  } else {
    std::vector<std::thread> pool;
    std::atomic<long long> next{0};
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (;;) {
          long long ci = next.fetch_add(1);
          if (ci >= nchunks) return;
          run_chunk(ci);
        }
      });
    for (auto& th : pool) th.join();
  }
  double out = 0;
  for (long long ci = 0; ci < nchunks; ++ci) out += partial[ci];
  return out;
}

inline double integrate_chart(const MetricChart& chart, const Expr& density, int nodes_per_dim) {
  if (nodes_per_dim < 2) throw SpecError("integrate_chart: need >= 2 nodes per dim");
  auto compiled = density.compile(chart.coords);
  return integrate_box(chart.ranges, chart.trim, nodes_per_dim,
                       [&](std::span<const double> x) { return compiled.eval(x); });
}

// ---------------------------------------------------------------------------
// manifold spec files
// ---------------------------------------------------------------------------

struct ManifoldSpec {
  std::string name;
  int dim = 0;
  std::vector<std::string> coords;
  std::vector<MetricChart> charts;
  std::optional<int> expected_euler;
  double orientation = 1.0;
};

inline ManifoldSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open manifold spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SpecError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  ManifoldSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    spec.dim = j.at("dim").get<int>();
    spec.coords = j.at("coordinates").get<std::vector<std::string>>();
    if (static_cast<int>(spec.coords.size()) != spec.dim)
      throw SpecError("coordinates length does not match dim");
    if (j.contains("expected_euler")) spec.expected_euler = j["expected_euler"].get<int>();
    if (j.contains("orientation")) {
      std::string o = j["orientation"].get<std::string>();
      if (o == "+1") spec.orientation = 1.0;
      else if (o == "-1") spec.orientation = -1.0;
      else throw SpecError("orientation must be \"+1\" or \"-1\"");
    }
    int chart_idx = 0;
    for (auto& jc : j.at("charts")) {
      MetricChart c;
      c.coords = spec.coords;
      c.label = spec.name + "#" + std::to_string(chart_idx++);
      for (auto& rr : jc.at("ranges")) {
        if (!rr.is_array() || rr.size() != 2) throw SpecError("range must be [lo, hi]");
        c.ranges.push_back({rr[0].get<double>(), rr[1].get<double>()});
      }
      if (static_cast<int>(c.ranges.size()) != spec.dim)
        throw SpecError("ranges length does not match dim");
      if (jc.contains("trim")) c.trim = jc["trim"].get<double>();
      auto& jm = jc.at("metric");
      if (static_cast<int>(jm.size()) != spec.dim) throw SpecError("metric must be dim x dim");
      c.g.assign(spec.dim, std::vector<Expr>(spec.dim));
      for (int a = 0; a < spec.dim; ++a) {
        if (static_cast<int>(jm[a].size()) != spec.dim)
          throw SpecError("metric must be dim x dim");
        for (int b = 0; b < spec.dim; ++b) {
          std::string src = jm[a][b].get<std::string>();
          try {
            c.g[a][b] = Expr::parse(src);
          } catch (const ParseError& e) {
            throw SpecError("metric[" + std::to_string(a) + "][" + std::to_string(b) +
                            "] = \"" + src + "\": " + e.what());
          }
        }
      }
      // symmetry check, numeric at interior samples
      std::mt19937_64 rng(99);
      for (int s = 0; s < 5; ++s) {
        auto x = c.random_interior_point(rng);
        auto env = c.bind(x);
        for (int a = 0; a < spec.dim; ++a)
          for (int b = a + 1; b < spec.dim; ++b) {
            double va = c.g[a][b].evaluate(env), vb = c.g[b][a].evaluate(env);
            if (std::abs(va - vb) > 1e-9 * std::max({1.0, std::abs(va), std::abs(vb)}))
              throw SpecError("metric is not symmetric: g[" + std::to_string(a) + "][" +
                              std::to_string(b) + "] != g[" + std::to_string(b) + "][" +
                              std::to_string(a) + "]");
          }
        // positive definiteness via leading principal minors
        for (int k = 1; k <= spec.dim; ++k) {
          std::vector<std::vector<Expr>> sub(k, std::vector<Expr>(k));
          for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) sub[a][b] = c.g[a][b];
          if (detail::expr_det(sub).evaluate(env) <= 0)
            throw SpecError("metric is not positive definite inside chart " + c.label);
        }
      }
      spec.charts.push_back(std::move(c));
    }
    if (spec.charts.empty()) throw SpecError("manifold spec has no charts");
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("manifold spec schema violation: ") + e.what());
  }
  return spec;
}

}  // namespace superweyl
