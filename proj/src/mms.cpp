#include "hrtmdg/mms.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "hrtmdg/analysis.hpp"

namespace hrtmdg {

namespace {

constexpr Real kPi = std::numbers::pi;

void require_positive_kappa(Real kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw ConfigError("kappa", "must be a positive finite number, got " + std::to_string(kappa));
  }
}

// Fills sigma, div sigma, boundary data and source from u and its derivatives.
void complete(ManufacturedCase& c) {
  const Real kappa = c.kappa;
  const auto grad = c.grad_u;
  const auto lap = c.laplacian_u;
  const auto u = c.u;
  c.sigma = [grad, kappa](const Point& x) -> CVec2 { return grad(x) * (kI / kappa); };
  c.div_sigma = [lap, kappa](const Point& x) { return lap(x) * (kI / kappa); };
  c.boundary = u;
  c.source = [u, lap, kappa](const Point& x) { return lap(x) + kappa * kappa * u(x); };
}

Real ipow(Real x, int p) { return p <= 0 ? 1.0 : std::pow(x, p); }

}  // namespace

ManufacturedCase plane_wave(Real kappa, Real theta) {
  require_positive_kappa(kappa);
  ManufacturedCase c;
  c.name = "plane_wave";
  c.kappa = kappa;
  const Point d(std::cos(theta), std::sin(theta));
  c.u = [d, kappa](const Point& x) { return std::exp(kI * (kappa * d.dot(x))); };
  c.grad_u = [d, kappa](const Point& x) -> CVec2 {
    const Complex v = kI * kappa * std::exp(kI * (kappa * d.dot(x)));
    return CVec2(v * d.x(), v * d.y());
  };
  c.laplacian_u = [d, kappa](const Point& x) { return -kappa * kappa * std::exp(kI * (kappa * d.dot(x))); };
  complete(c);
  c.source = [](const Point&) { return Complex(0.0, 0.0); };
  return c;
}

ManufacturedCase sine_product(Real kappa) {
  require_positive_kappa(kappa);
  check_resonance_guard(kappa);
  ManufacturedCase c;
  c.name = "sine_product";
  c.kappa = kappa;
  c.u = [](const Point& x) { return Complex(std::sin(kPi * x.x()) * std::sin(kPi * x.y()), 0.0); };
  c.grad_u = [](const Point& x) -> CVec2 {
    return CVec2(kPi * std::cos(kPi * x.x()) * std::sin(kPi * x.y()),
                 kPi * std::sin(kPi * x.x()) * std::cos(kPi * x.y()));
  };
  c.laplacian_u = [](const Point& x) {
    return Complex(-2.0 * kPi * kPi * std::sin(kPi * x.x()) * std::sin(kPi * x.y()), 0.0);
  };
  complete(c);
  // Exactly zero on the boundary rather than sin(pi) ~ 1e-16.
  c.boundary = [](const Point&) { return Complex(0.0, 0.0); };
  return c;
}

ManufacturedCase polynomial_case(int p, Real kappa) {
  if (p < 0) {
    throw ConfigError("polynomial_degree", "must be non-negative, got " + std::to_string(p));
  }
  require_positive_kappa(kappa);
  ManufacturedCase c;
  c.name = "polynomial" + std::to_string(p);
  c.kappa = kappa;
  if (p == 0) {
    c.u = [](const Point&) { return Complex(1.0, 0.0); };
    c.grad_u = [](const Point&) -> CVec2 { return CVec2::Zero(); };
    c.laplacian_u = [](const Point&) { return Complex(0.0, 0.0); };
  } else if (p == 1) {
    c.u = [](const Point& x) { return Complex(x.x(), 0.0); };
    c.grad_u = [](const Point&) -> CVec2 { return CVec2(1.0, 0.0); };
    c.laplacian_u = [](const Point&) { return Complex(0.0, 0.0); };
  } else {
    c.u = [p](const Point& x) {
      return Complex(ipow(x.x(), p) + ipow(x.x(), p - 1) * x.y() + ipow(x.y(), p), 0.0);
    };
    c.grad_u = [p](const Point& x) -> CVec2 {
      const Real dx = p * ipow(x.x(), p - 1) + (p - 1) * ipow(x.x(), p - 2) * x.y();
      const Real dy = ipow(x.x(), p - 1) + p * ipow(x.y(), p - 1);
      return CVec2(dx, dy);
    };
    c.laplacian_u = [p](const Point& x) {
      Real v = p * (p - 1) * (ipow(x.x(), p - 2) + ipow(x.y(), p - 2));
      if (p >= 3) {
        v += (p - 1) * (p - 2) * ipow(x.x(), p - 3) * x.y();
      }
      return Complex(v, 0.0);
    };
  }
  complete(c);
  return c;
}

ManufacturedCase make_case(const CaseSpec& spec, Real kappa) {
  if (spec.name == "plane_wave") {
    return plane_wave(kappa, spec.theta);
  }
  if (spec.name == "sine_product") {
    return sine_product(kappa);
  }
  if (spec.name == "polynomial") {
    return polynomial_case(spec.polynomial_degree, kappa);
  }
  throw ConfigError("case", "unknown case '" + spec.name + "' (expected plane_wave, sine_product or polynomial)");
}

NearestEigenvalue nearest_dirichlet_eigenvalue(Real kappa) {
  const Real k2 = kappa * kappa;
  const int limit = static_cast<int>(std::ceil(kappa / kPi)) + 2;
  NearestEigenvalue best;
  best.gap = std::numeric_limits<Real>::infinity();
  for (int m = 1; m <= limit; ++m) {
    for (int n = m; n <= limit; ++n) {
      const Real value = kPi * kPi * (m * m + n * n);
      if (std::abs(k2 - value) < best.gap) {
        best = {m, n, value, std::abs(k2 - value)};
      }
    }
  }
  return best;
}

void check_resonance_guard(Real kappa, Real min_gap) {
  require_positive_kappa(kappa);
  const NearestEigenvalue e = nearest_dirichlet_eigenvalue(kappa);
  if (e.gap < min_gap) {
    throw ConfigError("kappa", "kappa^2 = " + std::to_string(kappa * kappa) + " is within " + std::to_string(e.gap) +
                                   " of the Dirichlet eigenvalue pi^2(" + std::to_string(e.m) + "^2+" +
                                   std::to_string(e.n) + "^2) = " + std::to_string(e.value) + " (minimum gap " +
                                   std::to_string(min_gap) + ")");
  }
}

CaseCheck self_check(const ManufacturedCase& c, std::uint64_t seed, int samples) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> unit(0.05, 0.95);
  const Real kappa = c.kappa;
  // Fourth-order stencils (Richardson over steps h and 2h); the step keeps
  // truncation near (step kappa)^4 and roundoff near eps / step^2.
  const Real step = 2e-3 / std::max(1.0, kappa);
  auto laplacian = [&](const Point& x, Real d) {
    const Point dx(d, 0.0), dy(0.0, d);
    return (c.u(x + dx) + c.u(x - dx) + c.u(x + dy) + c.u(x - dy) - 4.0 * c.u(x)) / (d * d);
  };
  auto gradient = [&](const Point& x, Real d) {
    const Point dx(d, 0.0), dy(0.0, d);
    return CVec2((c.u(x + dx) - c.u(x - dx)) / (2.0 * d), (c.u(x + dy) - c.u(x - dy)) / (2.0 * d));
  };
  CaseCheck out;
  for (int s = 0; s < samples; ++s) {
    const Point x(unit(rng), unit(rng));
    const Complex u0 = c.u(x);
    const Complex lap = (4.0 * laplacian(x, step) - laplacian(x, 2.0 * step)) / 3.0;
    const Complex f = c.source(x);
    const Real scale = kappa * kappa * std::abs(u0) + std::abs(f) + std::abs(c.laplacian_u(x)) + 1e-300;
    out.pde_residual = std::max(out.pde_residual, std::abs(lap + kappa * kappa * u0 - f) / scale);

    const CVec2 g = c.grad_u(x);
    const CVec2 expected = g * (kI / kappa);
    const Real sscale = std::max(expected.norm(), 1e-300);
    out.sigma_residual = std::max(out.sigma_residual, (c.sigma(x) - expected).norm() / sscale);

    // Finite differences of u against the analytic gradient, same relative budget as the PDE check.
    const CVec2 fd = (4.0 * gradient(x, step) - gradient(x, 2.0 * step)) / 3.0;
    out.pde_residual = std::max(out.pde_residual, (fd - g).norm() / (kappa * std::abs(u0) + g.norm() + 1e-300));

    const Real t = unit(rng);
    const std::array<Point, 4> boundary = {Point(t, 0.0), Point(1.0, t), Point(t, 1.0), Point(0.0, t)};
    for (const Point& b : boundary) {
      const Complex ub = c.u(b);
      out.boundary_residual =
          std::max(out.boundary_residual, std::abs(c.boundary(b) - ub) / std::max(1.0, std::abs(ub)));
    }
  }
  return out;
}

void require_valid_case(const ManufacturedCase& c) {
  const CaseCheck check = self_check(c);
  if (!check.passed()) {
    throw ConfigError("case", c.name + " fails its self-check (pde " + std::to_string(check.pde_residual) +
                                  ", sigma " + std::to_string(check.sigma_residual) + ", boundary " +
                                  std::to_string(check.boundary_residual) + ")");
  }
}

std::vector<std::optional<Real>> compute_rate(std::span<const Real> errors, std::span<const Real> hs) {
  if (errors.size() != hs.size()) {
    throw ConfigError("errors", "length " + std::to_string(errors.size()) + " does not match hs length " +
                                    std::to_string(hs.size()));
  }
  if (errors.size() < 2) {
    throw ConfigError("errors", "at least two levels are needed for a rate");
  }
  for (std::size_t i = 0; i < hs.size(); ++i) {
    if (!(hs[i] > 0.0)) {
      throw ConfigError("hs", "mesh sizes must be positive");
    }
    if (errors[i] < 0.0 || !std::isfinite(errors[i])) {
      throw ConfigError("errors", "errors must be finite and non-negative");
    }
  }
  std::vector<std::optional<Real>> rates;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    if (errors[i] <= kExactErrorThreshold || errors[i + 1] <= kExactErrorThreshold) {
      rates.emplace_back();
    } else {
      rates.emplace_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
    }
  }
  return rates;
}

void run_convergence(const CaseFactory& factory, int k, std::span<const int> levels, std::span<const Real> kappas,
                     ConvergenceTable& table, const SolveOptions& options) {
  if (levels.empty()) {
    throw ConfigError("mesh_n", "no levels requested");
  }
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1 || (i > 0 && levels[i] <= levels[i - 1])) {
      throw ConfigError("mesh_n", "levels must be positive and strictly increasing");
    }
  }
  if (kappas.empty()) {
    throw ConfigError("kappa", "no wavenumbers requested");
  }
  for (Real kappa : kappas) {
    check_resonance_guard(kappa);
  }
  const ReferenceElement ref(k);
  for (Real kappa : kappas) {
    const ManufacturedCase c = factory(kappa);
    require_valid_case(c);
    const std::size_t first = table.rows.size();
    for (int n : levels) {
      const Mesh mesh = generate_structured(n);
      const FieldSolution fields = solve(mesh, ref, kappa, c.data(), options);
      ConvergenceRow row;
      row.case_name = c.name;
      row.k = k;
      row.kappa = kappa;
      row.n = n;
      row.h = mesh.h();
      row.err_u = broken_l2_norm_u(mesh, ref, fields.u, c.u);
      row.err_sigma = broken_l2_norm_sigma(mesh, ref, fields.sigma, c.sigma);
      row.err_energy = check_projected_error_bound(c, mesh, ref, fields).energy_error;
      row.const_norm = row.err_sigma / std::pow(row.h * kappa, k + 1);
      if (table.rows.size() > first) {
        const ConvergenceRow& prev = table.rows.back();
        const std::array<Real, 2> hs{prev.h, row.h};
        const std::array<Real, 2> eu{prev.err_u, row.err_u};
        const std::array<Real, 2> es{prev.err_sigma, row.err_sigma};
        row.rate_u = compute_rate(eu, hs)[0];
        row.rate_sigma = compute_rate(es, hs)[0];
      }
      table.rows.push_back(std::move(row));
    }
  }
}

ConvergenceTable run_convergence(const CaseFactory& factory, int k, std::span<const int> levels,
                                 std::span<const Real> kappas, const SolveOptions& options) {
  ConvergenceTable table;
  run_convergence(factory, k, levels, kappas, table, options);
  return table;
}

std::string format_real(Real value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.15e", value);
  return buffer;
}

void write_csv(std::ostream& out, const ConvergenceTable& table) {
  out << kConvergenceCsvHeader << '\n';
  auto optional = [](const std::optional<Real>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : table.rows) {
    out << r.case_name << ',' << r.k << ',' << format_real(r.kappa) << ',' << r.n << ',' << format_real(r.h) << ','
        << format_real(r.err_u) << ',' << format_real(r.err_sigma) << ',' << format_real(r.err_energy) << ','
        << optional(r.rate_u) << ',' << optional(r.rate_sigma) << ',' << format_real(r.const_norm) << '\n';
  }
}

}  // namespace hrtmdg
