#include "hrtmdg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "hrtmdg/rates.hpp"

namespace hrtmdg {

namespace {

CMatrix cplx(const RMatrix& m) { return m.cast<Complex>(); }

CVector sample(const std::vector<Point>& points, const ScalarField& f) {
  CVector out = CVector::Zero(static_cast<Index>(points.size()));
  if (f) {
    for (std::size_t q = 0; q < points.size(); ++q) {
      out(static_cast<Index>(q)) = f(points[q]);
    }
  }
  return out;
}

struct VectorSamples {
  CVector x, y;
};

VectorSamples sample(const std::vector<Point>& points, const VectorField& f) {
  const auto n = static_cast<Index>(points.size());
  VectorSamples out{CVector::Zero(n), CVector::Zero(n)};
  if (f) {
    for (Index q = 0; q < n; ++q) {
      const CVec2 v = f(points[q]);
      out.x(q) = v(0);
      out.y(q) = v(1);
    }
  }
  return out;
}

// Weighted sum of w * a * conj(b) with real weights.
Complex wdot(const RVector& w, const CVector& a, const CVector& b) {
  return (w.cast<Complex>().array() * a.array() * b.conjugate().array()).sum();
}

Real wnorm2(const RVector& w, const CVector& a) { return (w.array() * a.array().abs2()).sum(); }

int resolve_degree(const ReferenceElement& ref, int quad_degree) {
  return quad_degree < 0 ? probe_quad_degree(ref) : quad_degree;
}

CVector project_pk_on(const ElementValues& ev, const ScalarField& u) {
  const CVector values = sample(ev.interior.points, u);
  return cplx(ev.interior.pk) * (ev.interior.weights.cast<Complex>().array() * values.array()).matrix();
}

CVector project_edge_on(const Mesh& mesh, Index edge, const ReferenceTables& tables, const ScalarField& lambda) {
  const Edge& e = mesh.edges()[edge];
  const Point a = mesh.vertices()[e.vertices[0]];
  const Point b = mesh.vertices()[e.vertices[1]];
  const auto& rule = tables.edge_rule();
  const RMatrix& basis = tables.edge_basis(false);
  CVector out = CVector::Zero(basis.rows());
  const Real scale = std::sqrt(e.length);
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const Point x = a + rule.points[q] * (b - a);
    out += (rule.weights[q] * scale * lambda(x)) * basis.col(static_cast<Index>(q)).cast<Complex>();
  }
  return out;
}

// Degrees of freedom of sigma on the physical cell. Edge moments use the
// cell-local edge parameter, interior moments the reference P_{k-1} basis
// against the pulled-back field, matching the reference duality.
CVector project_rt_on(const ElementValues& ev, const ReferenceTables& tables, const VectorField& sigma) {
  const ReferenceElement& ref = tables.element();
  const int ne = ref.dim_pk_edge();
  const int nl = ref.dim_pk_lower();
  CVector dofs = CVector::Zero(ref.dim_rt());
  const RMatrix& edge_basis = tables.edge_basis(false);
  for (int l = 0; l < 3; ++l) {
    const auto& f = ev.faces[l];
    const VectorSamples s = sample(f.points, sigma);
    const CVector flux = f.normal.x() * s.x + f.normal.y() * s.y;
    dofs.segment(l * ne, ne) =
        cplx(edge_basis) * (f.weights.cast<Complex>().array() * flux.array()).matrix();
  }
  if (nl > 0) {
    const Eigen::Matrix2d binv = ev.geometry.inverse_transpose.transpose();
    const VectorSamples s = sample(ev.interior.points, sigma);
    const CVector px = binv(0, 0) * s.x + binv(0, 1) * s.y;
    const CVector py = binv(1, 0) * s.x + binv(1, 1) * s.y;
    const CMatrix lower = cplx(tables.cell().pk.topRows(nl));
    const CVector w = ev.interior.weights.cast<Complex>();
    dofs.segment(3 * ne, nl) = lower * (w.array() * px.array()).matrix();
    dofs.segment(3 * ne + nl, nl) = lower * (w.array() * py.array()).matrix();
  }
  return dofs;
}

// Values of a triple on one cell, at the interior and face points of the
// ElementValues used to build it.
struct CellTriple {
  CVector sx, sy, u, gx, gy;
  std::array<CVector, 3> flux, trace, lambda;
};

CellTriple discrete_triple(const ElementValues& ev, const CVector& sigma, const CVector& u,
                           const std::array<CVector, 3>& lambda) {
  CellTriple t;
  t.sx = cplx(ev.interior.rt_x.transpose()) * sigma;
  t.sy = cplx(ev.interior.rt_y.transpose()) * sigma;
  t.u = cplx(ev.interior.pk.transpose()) * u;
  t.gx = cplx(ev.interior.pk_dx.transpose()) * u;
  t.gy = cplx(ev.interior.pk_dy.transpose()) * u;
  for (int l = 0; l < 3; ++l) {
    const auto& f = ev.faces[l];
    t.flux[l] = cplx(f.rt_normal.transpose()) * sigma;
    t.trace[l] = cplx(f.pk.transpose()) * u;
    t.lambda[l] = f.boundary ? CVector::Zero(f.weights.size()) : CVector(cplx(f.multiplier.transpose()) * lambda[l]);
  }
  return t;
}

std::array<CVector, 3> face_lambda(const Mesh& mesh, Index cell, const FieldSolution& fields, int modes) {
  std::array<CVector, 3> out;
  for (int l = 0; l < 3; ++l) {
    const Index e = mesh.cell_edges(cell)[l].edge;
    out[l] = mesh.edges()[e].boundary ? CVector::Zero(modes) : fields.lambda[e];
  }
  return out;
}

CellTriple exact_triple(const ElementValues& ev, const ManufacturedCase& exact, bool interior_lambda) {
  CellTriple t;
  const VectorSamples s = sample(ev.interior.points, exact.sigma);
  const VectorSamples g = sample(ev.interior.points, exact.grad_u);
  t.sx = s.x;
  t.sy = s.y;
  t.gx = g.x;
  t.gy = g.y;
  t.u = sample(ev.interior.points, exact.u);
  for (int l = 0; l < 3; ++l) {
    const auto& f = ev.faces[l];
    const VectorSamples fs = sample(f.points, exact.sigma);
    t.flux[l] = f.normal.x() * fs.x + f.normal.y() * fs.y;
    t.trace[l] = sample(f.points, exact.u);
    t.lambda[l] = (f.boundary || !interior_lambda) ? CVector::Zero(f.weights.size()) : t.trace[l];
  }
  return t;
}

CellTriple subtract(const CellTriple& a, const CellTriple& b) {
  CellTriple t;
  t.sx = a.sx - b.sx;
  t.sy = a.sy - b.sy;
  t.u = a.u - b.u;
  t.gx = a.gx - b.gx;
  t.gy = a.gy - b.gy;
  for (int l = 0; l < 3; ++l) {
    t.flux[l] = a.flux[l] - b.flux[l];
    t.trace[l] = a.trace[l] - b.trace[l];
    t.lambda[l] = a.lambda[l] - b.lambda[l];
  }
  return t;
}

// The six terms of A(x; y) for x = triple and y running over the cell's basis
// functions. Bases are real, so no conjugation of the test side is needed.
struct FormTerms {
  CVector tau_mass, tau_grad, tau_edge;  // (i k sigma, tau), (grad u, tau), <lambda - u, tau.n>
  CVector v_mass, v_grad, v_edge;        // -(i k u, v), (sigma, grad v), -<sigma.n, v>
  std::array<CVector, 3> mu;             // <sigma.n, mu> per face (interior faces only)
};

FormTerms form_terms(const ElementValues& ev, const CellTriple& t, Real kappa) {
  const auto& in = ev.interior;
  const CVector w = in.weights.cast<Complex>();
  const Complex ik(0.0, kappa);
  const CVector wsx = (w.array() * t.sx.array()).matrix();
  const CVector wsy = (w.array() * t.sy.array()).matrix();
  FormTerms r;
  r.tau_mass = ik * (cplx(in.rt_x) * wsx + cplx(in.rt_y) * wsy);
  r.tau_grad = cplx(in.rt_x) * (w.array() * t.gx.array()).matrix() + cplx(in.rt_y) * (w.array() * t.gy.array()).matrix();
  r.v_mass = -ik * (cplx(in.pk) * (w.array() * t.u.array()).matrix());
  r.v_grad = cplx(in.pk_dx) * wsx + cplx(in.pk_dy) * wsy;
  r.tau_edge = CVector::Zero(in.rt_x.rows());
  r.v_edge = CVector::Zero(in.pk.rows());
  for (int l = 0; l < 3; ++l) {
    const auto& f = ev.faces[l];
    const CVector fw = f.weights.cast<Complex>();
    const CVector jump = (fw.array() * (t.lambda[l] - t.trace[l]).array()).matrix();
    const CVector wflux = (fw.array() * t.flux[l].array()).matrix();
    r.tau_edge += cplx(f.rt_normal) * jump;
    r.v_edge -= cplx(f.pk) * wflux;
    r.mu[l] = f.boundary ? CVector() : CVector(cplx(f.multiplier) * wflux);
  }
  return r;
}

Real max_abs(const CVector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

int probe_quad_degree(const ReferenceElement& ref) {
  return std::min(2 * ref.degree() + 18, kMaxQuadratureDegree);
}

CVector project_pk(const ScalarField& u, const Mesh& mesh, Index cell, const ReferenceElement& ref,
                   int quad_degree) {
  const ReferenceTables tables(ref, resolve_degree(ref, quad_degree));
  return project_pk_on(ElementValues(mesh, cell, tables), u);
}

CVector project_edge(const ScalarField& lambda, const Mesh& mesh, Index edge, const ReferenceElement& ref,
                     int quad_degree) {
  const ReferenceTables tables(ref, resolve_degree(ref, quad_degree));
  return project_edge_on(mesh, edge, tables, lambda);
}

CVector project_rt(const VectorField& sigma, const Mesh& mesh, Index cell, const ReferenceElement& ref,
                   int quad_degree) {
  const ReferenceTables tables(ref, resolve_degree(ref, quad_degree));
  return project_rt_on(ElementValues(mesh, cell, tables), tables, sigma);
}

FieldSolution project_solution(const Mesh& mesh, const ReferenceElement& ref, const ManufacturedCase& exact,
                               int quad_degree) {
  const ReferenceTables tables(ref, resolve_degree(ref, quad_degree));
  FieldSolution out;
  out.degree = ref.degree();
  out.kappa = exact.kappa;
  out.sigma.resize(mesh.num_cells());
  out.u.resize(mesh.num_cells());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    out.sigma[c] = project_rt_on(ev, tables, exact.sigma);
    out.u[c] = project_pk_on(ev, exact.u);
  }
  out.lambda.assign(mesh.num_edges(), CVector::Zero(ref.dim_pk_edge()));
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    if (!mesh.edges()[e].boundary) {
      out.lambda[e] = project_edge_on(mesh, e, tables, exact.u);
    }
  }
  return out;
}

Complex evaluate_u(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields, Index cell,
                   const Point& x) {
  const CellGeometry geo = cell_geometry(mesh, cell);
  const RVector psi = ref.pk(geo.pull_back(x)) / std::sqrt(geo.det);
  return (psi.cast<Complex>().transpose() * fields.u[cell])(0);
}

CVec2 evaluate_sigma(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields, Index cell,
                     const Point& x) {
  const CellGeometry geo = cell_geometry(mesh, cell);
  const VectorTable phi = piola_map(geo, ref.rt(geo.pull_back(x)));
  return CVec2((phi.col(0).cast<Complex>().transpose() * fields.sigma[cell])(0),
               (phi.col(1).cast<Complex>().transpose() * fields.sigma[cell])(0));
}

Complex evaluate_lambda(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields, Index edge,
                        const Point& x) {
  const Edge& e = mesh.edges()[edge];
  if (e.boundary) {
    return {0.0, 0.0};
  }
  const Point a = mesh.vertices()[e.vertices[0]];
  const Real s = (x - a).dot(mesh.vertices()[e.vertices[1]] - a) / (e.length * e.length);
  const RVector chi = ref.pk_edge(s) / std::sqrt(e.length);
  return (chi.cast<Complex>().transpose() * fields.lambda[edge])(0);
}

Real broken_l2_norm_u(const Mesh& mesh, const ReferenceElement& ref, std::span<const CVector> u,
                      const ScalarField& exact, int quad_degree) {
  const ReferenceTables tables(ref, resolve_degree(ref, quad_degree));
  Real total = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const CVector diff = cplx(ev.interior.pk.transpose()) * u[c] - sample(ev.interior.points, exact);
    total += wnorm2(ev.interior.weights, diff);
  }
  return std::sqrt(total);
}

Real broken_l2_norm_sigma(const Mesh& mesh, const ReferenceElement& ref, std::span<const CVector> sigma,
                          const VectorField& exact, int quad_degree) {
  const ReferenceTables tables(ref, resolve_degree(ref, quad_degree));
  Real total = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const VectorSamples s = sample(ev.interior.points, exact);
    total += wnorm2(ev.interior.weights, cplx(ev.interior.rt_x.transpose()) * sigma[c] - s.x);
    total += wnorm2(ev.interior.weights, cplx(ev.interior.rt_y.transpose()) * sigma[c] - s.y);
  }
  return std::sqrt(total);
}

Eigen::SparseMatrix<Real> energy_gram(const Mesh& mesh, const ReferenceElement& ref, Real kappa, Real h) {
  const GlobalLayout layout(mesh, ref);
  const ReferenceTables tables(ref, ref.quad_degree());
  const int nrt = layout.dim_rt, np = layout.dim_pk, ne = layout.modes;
  const Real jump_weight = 1.0 / (kappa * h);
  std::vector<Eigen::Triplet<Real>> triplets;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const auto& in = ev.interior;
    const auto W = in.weights.asDiagonal();
    const RMatrix ss = kappa * (in.rt_x * W * in.rt_x.transpose() + in.rt_y * W * in.rt_y.transpose());
    RMatrix uu = kappa * (in.pk * W * in.pk.transpose()) +
                 (in.pk_dx * W * in.pk_dx.transpose() + in.pk_dy * W * in.pk_dy.transpose()) / kappa;
    for (int i = 0; i < nrt; ++i) {
      for (int j = 0; j < nrt; ++j) {
        triplets.emplace_back(layout.sigma(c, i), layout.sigma(c, j), ss(i, j));
      }
    }
    for (const auto& f : ev.faces) {
      const auto fw = f.weights.asDiagonal();
      uu += jump_weight * (f.pk * fw * f.pk.transpose());
      if (f.boundary) {
        continue;
      }
      const RMatrix ul = -jump_weight * (f.pk * fw * f.multiplier.transpose());
      const RMatrix ll = jump_weight * (f.multiplier * fw * f.multiplier.transpose());
      const Index base = layout.lambda(multiplier_index(mesh.interior_index(f.edge), 0, ref.degree()));
      for (int m = 0; m < ne; ++m) {
        for (int j = 0; j < np; ++j) {
          triplets.emplace_back(layout.u(c, j), base + m, ul(j, m));
          triplets.emplace_back(base + m, layout.u(c, j), ul(j, m));
        }
        for (int n = 0; n < ne; ++n) {
          triplets.emplace_back(base + m, base + n, ll(m, n));
        }
      }
    }
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) {
        triplets.emplace_back(layout.u(c, i), layout.u(c, j), uu(i, j));
      }
    }
  }
  Eigen::SparseMatrix<Real> g(layout.size(), layout.size());
  g.setFromTriplets(triplets.begin(), triplets.end());
  return g;
}

Real energy_norm(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& x, Real kappa, Real h) {
  const GlobalLayout layout(mesh, ref);
  const CVector v = pack(mesh, layout, x);
  const Eigen::SparseMatrix<Real> g = energy_gram(mesh, ref, kappa, h);
  const CVector gv = g.cast<Complex>() * v;
  return std::sqrt(std::max(0.0, v.dot(gv).real()));
}

Complex evaluate_form_A(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& x,
                        const FieldSolution& y, Real kappa) {
  const ReferenceTables tables(ref, ref.quad_degree());
  const int modes = ref.dim_pk_edge();
  const Complex ik(0.0, kappa);
  Complex total = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const CellTriple a = discrete_triple(ev, x.sigma[c], x.u[c], face_lambda(mesh, c, x, modes));
    const CellTriple b = discrete_triple(ev, y.sigma[c], y.u[c], face_lambda(mesh, c, y, modes));
    const RVector& w = ev.interior.weights;
    total += ik * (wdot(w, a.sx, b.sx) + wdot(w, a.sy, b.sy));
    total -= ik * wdot(w, a.u, b.u);
    total += wdot(w, a.sx, b.gx) + wdot(w, a.sy, b.gy);
    total += wdot(w, a.gx, b.sx) + wdot(w, a.gy, b.sy);
    for (int l = 0; l < 3; ++l) {
      const RVector& fw = ev.faces[l].weights;
      total += wdot(fw, a.lambda[l] - a.trace[l], b.flux[l]);
      total += wdot(fw, a.flux[l], b.lambda[l] - b.trace[l]);
    }
  }
  return total;
}

bool ConsistencyReport::passed(Real tol) const {
  constexpr Real floor = 1e-13;
  return exact_residual <= std::max(tol * exact_scale, floor) && v_residual <= std::max(tol * scale, floor) &&
         mu_residual <= std::max(tol * scale, floor) && tau_residual <= std::max(tol * tau_scale, floor);
}

ConsistencyReport check_consistency(const ManufacturedCase& exact, const Mesh& mesh, const ReferenceElement& ref) {
  const ReferenceTables tables(ref, probe_quad_degree(ref));
  const FieldSolution proj = project_solution(mesh, ref, exact);
  const int modes = ref.dim_pk_edge();
  const Real kappa = exact.kappa;
  ConsistencyReport report;
  CVector mu_error = CVector::Zero(mesh.num_interior_edges() * modes);
  CVector mu_exact = CVector::Zero(mesh.num_interior_edges() * modes);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const CellTriple ex = exact_triple(ev, exact, true);
    const CellTriple pr = discrete_triple(ev, proj.sigma[c], proj.u[c], face_lambda(mesh, c, proj, modes));
    // Pi^e u - u on interior edges, zero on boundary edges.
    const CellTriple err = subtract(pr, ex);

    // Consistency of the exact solution: A(x; y) = F(y).
    const FormTerms te = form_terms(ev, ex, kappa);
    CVector f1 = CVector::Zero(ref.dim_rt());
    for (const auto& f : ev.faces) {
      if (f.boundary) {
        const CVector g = sample(f.points, exact.boundary);
        f1 -= cplx(f.rt_normal) * (f.weights.cast<Complex>().array() * g.array()).matrix();
      }
    }
    const CVector fsrc = sample(ev.interior.points, exact.source) * (kI / kappa);
    const CVector f2 = -(cplx(ev.interior.pk) * (ev.interior.weights.cast<Complex>().array() * fsrc.array()).matrix());
    report.exact_residual =
        std::max({report.exact_residual, max_abs(te.tau_mass + te.tau_grad + te.tau_edge - f1),
                  max_abs(te.v_mass + te.v_grad + te.v_edge - f2)});
    report.exact_scale = std::max({report.exact_scale, max_abs(te.tau_mass), max_abs(te.tau_grad),
                                   max_abs(te.tau_edge), max_abs(te.v_mass), max_abs(te.v_grad),
                                   max_abs(te.v_edge), max_abs(f1), max_abs(f2)});

    const FormTerms tr = form_terms(ev, err, kappa);
    report.v_residual = std::max(report.v_residual, max_abs(tr.v_mass + tr.v_grad + tr.v_edge));
    report.scale = std::max({report.scale, max_abs(tr.v_mass), max_abs(tr.v_grad), max_abs(tr.v_edge)});
    report.tau_residual = std::max(report.tau_residual, max_abs(tr.tau_grad + tr.tau_edge));
    report.tau_scale = std::max(report.tau_scale, max_abs(tr.tau_mass));
    for (int l = 0; l < 3; ++l) {
      const auto& f = ev.faces[l];
      if (f.boundary) {
        continue;
      }
      const Index base = multiplier_index(mesh.interior_index(f.edge), 0, ref.degree());
      mu_error.segment(base, modes) += tr.mu[l];
      mu_exact.segment(base, modes) += te.mu[l];
      report.scale = std::max(report.scale, max_abs(tr.mu[l]));
      report.exact_scale = std::max(report.exact_scale, max_abs(te.mu[l]));
    }
  }
  report.mu_residual = max_abs(mu_error);
  report.exact_residual = std::max(report.exact_residual, max_abs(mu_exact));
  // For low k the error-slot terms can all vanish individually, so they are
  // measured against the size of the same terms for the exact solution.
  report.scale = std::max(report.scale, report.exact_scale);
  report.tau_scale = std::max(report.tau_scale, report.exact_scale);
  return report;
}

bool ConservationReport::passed(Real tol) const {
  constexpr Real floor = 1e-13;
  return max_local <= std::max(tol * local_scale, floor) && global_residual <= std::max(tol * global_scale, floor) &&
         jump <= std::max(tol * jump_scale, floor);
}

ConservationReport check_conservation(const Mesh& mesh, const ReferenceElement& ref, const FieldSolution& fields,
                                      const ScalarField& source) {
  const ReferenceTables tables(ref, ref.rhs_quad_degree());
  const int modes = ref.dim_pk_edge();
  const Complex ik(0.0, fields.kappa);
  ConservationReport report;
  report.residuals.resize(mesh.num_cells());
  Complex global = 0.0;
  std::vector<CVector> moments(mesh.num_edges(), CVector::Zero(modes));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const RVector& w = ev.interior.weights;
    const CVector uh = cplx(ev.interior.pk.transpose()) * fields.u[c];
    const CVector f = sample(ev.interior.points, source) * (kI / fields.kappa);
    const Complex source_term = (w.cast<Complex>().array() * f.array()).sum();
    const Complex mass_term = ik * (w.cast<Complex>().array() * uh.array()).sum();
    Complex flux_term = 0.0;
    Real flux_abs = 0.0;
    for (const auto& face : ev.faces) {
      const CVector flux = cplx(face.rt_normal.transpose()) * fields.sigma[c];
      const Complex total_flux = (face.weights.cast<Complex>().array() * flux.array()).sum();
      flux_term += total_flux;
      flux_abs += std::abs(total_flux);
      if (face.boundary) {
        global -= total_flux;
      } else {
        const CVector side = cplx(face.multiplier) * (face.weights.cast<Complex>().array() * flux.array()).matrix();
        moments[face.edge] += side;
        report.jump_scale = std::max(report.jump_scale, max_abs(side));
      }
    }
    const Complex r = -mass_term - flux_term + source_term;
    report.residuals[c] = r;
    report.max_local = std::max(report.max_local, std::abs(r));
    const Real cell_scale = std::abs(source_term) + std::abs(mass_term) + flux_abs;
    report.local_scale = std::max(report.local_scale, cell_scale);
    report.global_scale += cell_scale;
    global += source_term - mass_term;
  }
  Complex sum = 0.0;
  for (const Complex& r : report.residuals) {
    sum += r;
  }
  report.sum_abs = std::abs(sum);
  report.global_residual = std::abs(global);
  for (const auto& m : moments) {
    report.jump = std::max(report.jump, max_abs(m));
  }
  return report;
}

LiftingProbeResult lifting_probe(const Mesh& mesh, const ReferenceElement& ref, const LiftingSample& sample_in,
                                 Real h) {
  const ReferenceTables tables(ref, ref.quad_degree());
  const int nrt = ref.dim_rt(), ne = ref.dim_pk_edge(), nl = ref.dim_pk_lower();
  LiftingProbeResult result;
  result.tau_tilde.resize(mesh.num_cells());
  Real tau2 = 0.0, grad2 = 0.0, mu2 = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const auto& in = ev.interior;
    const auto W = in.weights.asDiagonal();
    RMatrix system(nrt, nrt);
    CVector target(nrt);
    for (int l = 0; l < 3; ++l) {
      const auto& f = ev.faces[l];
      system.middleRows(l * ne, ne) = f.multiplier * f.weights.asDiagonal() * f.rt_normal.transpose();
      target.segment(l * ne, ne) = sample_in.mu[c][l];
      mu2 += sample_in.mu[c][l].squaredNorm();
    }
    if (nl > 0) {
      const RMatrix lower = in.pk.topRows(nl);
      system.middleRows(3 * ne, nl) = lower * W * in.rt_x.transpose();
      system.middleRows(3 * ne + nl, nl) = lower * W * in.rt_y.transpose();
      target.segment(3 * ne, nl) = cplx(lower * W * in.pk_dx.transpose()) * sample_in.v[c];
      target.segment(3 * ne + nl, nl) = cplx(lower * W * in.pk_dy.transpose()) * sample_in.v[c];
    }
    const Eigen::FullPivLU<RMatrix> lu(system);
    if (!lu.isInvertible()) {
      throw Error("cell " + std::to_string(c) + ": lifting system is singular");
    }
    const CVector tau = lu.solve(target.real()).cast<Complex>() + kI * lu.solve(target.imag()).cast<Complex>();
    const Real scale = std::max(target.norm(), 1e-300);
    result.moment_residual = std::max(result.moment_residual, (cplx(system) * tau - target).norm() / scale);

    const RMatrix mass = in.rt_x * W * in.rt_x.transpose() + in.rt_y * W * in.rt_y.transpose();
    const RMatrix stiff = in.pk_dx * W * in.pk_dx.transpose() + in.pk_dy * W * in.pk_dy.transpose();
    tau2 += tau.dot(cplx(mass) * tau).real();
    grad2 += sample_in.v[c].dot(cplx(stiff) * sample_in.v[c]).real();
    result.tau_tilde[c] = tau;
  }
  result.tau_norm = std::sqrt(std::max(0.0, tau2));
  result.grad_v_norm = std::sqrt(std::max(0.0, grad2));
  result.mu_norm = std::sqrt(mu2);
  const Real denom = std::sqrt(grad2 + h * mu2);
  result.ratio = denom > 0.0 ? result.tau_norm / denom : 0.0;
  return result;
}

LiftingSample lifting_sample(const Mesh& mesh, const ReferenceElement& ref, std::span<const CVector> v,
                             std::span<const CVector> mu) {
  LiftingSample s;
  s.v.assign(v.begin(), v.end());
  s.mu.resize(mesh.num_cells());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (int l = 0; l < 3; ++l) {
      const Index e = mesh.cell_edges(c)[l].edge;
      s.mu[c][l] = mesh.edges()[e].boundary ? CVector::Zero(ref.dim_pk_edge()) : mu[e];
    }
  }
  return s;
}

LiftingSample lifting_sample_from_solution(const Mesh& mesh, const ReferenceElement& ref,
                                           const FieldSolution& fields, Real h) {
  const ReferenceTables tables(ref, ref.quad_degree());
  const Real kappa = fields.kappa;
  LiftingSample s;
  s.v.resize(mesh.num_cells());
  s.mu.resize(mesh.num_cells());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    s.v[c] = fields.u[c] / kappa;
    for (int l = 0; l < 3; ++l) {
      const auto& f = ev.faces[l];
      // The trace of u_h lies in P_k(e), so its coefficients are exact moments.
      const CVector trace = cplx(f.multiplier * f.weights.asDiagonal() * f.pk.transpose()) * fields.u[c];
      const CVector lambda = f.boundary ? CVector::Zero(ref.dim_pk_edge()) : fields.lambda[f.edge];
      s.mu[c][l] = (lambda - trace) / (kappa * h);
    }
  }
  return s;
}

LiftingSample random_lifting_sample(const Mesh& mesh, const ReferenceElement& ref, Real h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal;
  auto draw = [&](Index n, Real scale) {
    CVector out(n);
    for (Index i = 0; i < n; ++i) {
      out(i) = scale * Complex(normal(rng), normal(rng));
    }
    return out;
  };
  std::vector<CVector> v(mesh.num_cells());
  for (auto& x : v) {
    x = draw(ref.dim_pk(), h);
  }
  std::vector<CVector> mu(mesh.num_edges());
  for (auto& x : mu) {
    x = draw(ref.dim_pk_edge(), 1.0 / std::sqrt(h));
  }
  return lifting_sample(mesh, ref, v, mu);
}

LiftingEstimate estimate_lifting_constant(const Mesh& mesh, const ReferenceElement& ref, int samples,
                                          std::uint64_t seed, std::span<const LiftingSample> extra) {
  LiftingEstimate est;
  const Real h = mesh.h();
  auto add = [&](const LiftingSample& sample) {
    const LiftingProbeResult r = lifting_probe(mesh, ref, sample, h);
    est.c_I = std::max(est.c_I, r.ratio);
    est.max_moment_residual = std::max(est.max_moment_residual, r.moment_residual);
    ++est.samples;
    return r.ratio;
  };
  for (int s = 0; s < samples; ++s) {
    add(random_lifting_sample(mesh, ref, h, seed + s));
  }
  for (const auto& sample : extra) {
    est.extra_ratios.push_back(add(sample));
  }
  return est;
}

SpectrumSummary summarize_spectrum(const SparseMatrix& s_sparse) {
  const CMatrix s(s_sparse);
  SpectrumSummary out;
  out.size = s.rows();
  if (s.rows() == 0) {
    return out;
  }
  const Real norm = s.norm();
  out.symmetry_residual = (s - s.transpose()).norm() / norm;
  out.hermitian_residual = (s - s.adjoint()).norm() / norm;
  const RVector sv = Eigen::BDCSVD<CMatrix>(s).singularValues();
  out.sigma_max = sv.maxCoeff();
  out.sigma_min = sv.minCoeff();
  const CMatrix herm = 0.5 * (s + s.adjoint());
  const CMatrix skew = (s - s.adjoint()) / Complex(0.0, 2.0);
  const RVector he = Eigen::SelfAdjointEigenSolver<CMatrix>(herm, Eigen::EigenvaluesOnly).eigenvalues();
  const RVector se = Eigen::SelfAdjointEigenSolver<CMatrix>(skew, Eigen::EigenvaluesOnly).eigenvalues();
  out.hermitian_part_min = he.minCoeff();
  out.hermitian_part_max = he.maxCoeff();
  out.skew_part_min = se.minCoeff();
  out.skew_part_max = se.maxCoeff();
  return out;
}

StabilityProbeResult stability_probe(const Mesh& mesh, const ReferenceElement& ref, Real kappa, int samples,
                                     std::uint64_t seed, Index unknown_cap) {
  const GlobalLayout layout(mesh, ref);
  if (layout.size() > unknown_cap) {
    throw ConfigError("mesh", "stability probe limited to " + std::to_string(unknown_cap) + " unknowns, got " +
                                  std::to_string(layout.size()));
  }
  const Real h = mesh.h();
  StabilityProbeResult result;
  result.unknowns = layout.size();

  const Discretization disc = discretize(mesh, ref, kappa, {});
  const CMatrix k(assemble_monolithic(mesh, ref, disc.blocks));
  const RMatrix g(energy_gram(mesh, ref, kappa, h));
  const Eigen::LLT<RMatrix> llt(g);
  if (llt.info() != Eigen::Success) {
    throw Error("energy Gram matrix is not positive definite");
  }
  const CMatrix l = cplx(llt.matrixL());
  // W = L^{-1} K L^{-T}; its singular values are the inf-sup and continuity
  // constants of A in the energy norm.
  const CMatrix left = l.triangularView<Eigen::Lower>().solve(k);
  const CMatrix w = l.triangularView<Eigen::Lower>().solve(CMatrix(left.adjoint())).adjoint();
  const RVector sv = Eigen::BDCSVD<CMatrix>(w).singularValues();
  result.c_A_estimate = sv.minCoeff();
  result.C_A_estimate = sv.maxCoeff();

  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> normal;
  auto draw = [&]() {
    CVector x(layout.size());
    for (Index i = 0; i < x.size(); ++i) {
      x(i) = Complex(normal(rng), normal(rng));
    }
    return x;
  };
  const CMatrix gc = cplx(g);
  for (int s = 0; s < samples; ++s) {
    const CVector x = draw(), y = draw();
    const Real nx = std::sqrt(x.dot(gc * x).real());
    const Real ny = std::sqrt(y.dot(gc * y).real());
    result.C_A_sampled = std::max(result.C_A_sampled, std::abs(y.dot(k * x)) / (nx * ny));
  }
  result.schur = summarize_spectrum(disc.system.matrix);
  return result;
}

ProjectedErrorBound check_projected_error_bound(const ManufacturedCase& exact, const Mesh& mesh,
                                                const ReferenceElement& ref, const FieldSolution& fields) {
  const FieldSolution proj = project_solution(mesh, ref, exact);
  FieldSolution diff = proj;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    diff.sigma[c] -= fields.sigma[c];
    diff.u[c] -= fields.u[c];
  }
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    diff.lambda[e] -= fields.lambda[e];
  }
  ProjectedErrorBound out;
  out.energy_error = energy_norm(mesh, ref, diff, exact.kappa, mesh.h());
  out.projection_error = std::sqrt(exact.kappa) * broken_l2_norm_sigma(mesh, ref, proj.sigma, exact.sigma);
  constexpr Real exact_level = 1e-11;
  if (out.energy_error > exact_level || out.projection_error > exact_level) {
    out.ratio = out.energy_error / out.projection_error;
  }
  return out;
}

ProjectionLevel projection_errors(const ManufacturedCase& exact, const Mesh& mesh, const ReferenceElement& ref) {
  const ReferenceTables tables(ref, probe_quad_degree(ref));
  Real u2 = 0.0, g2 = 0.0, s2 = 0.0, d2 = 0.0, t2 = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const ElementValues ev(mesh, c, tables);
    const auto& in = ev.interior;
    const CVector pu = project_pk_on(ev, exact.u);
    const CVector ps = project_rt_on(ev, tables, exact.sigma);
    const VectorSamples grad = sample(in.points, exact.grad_u);
    const VectorSamples sig = sample(in.points, exact.sigma);
    u2 += wnorm2(in.weights, cplx(in.pk.transpose()) * pu - sample(in.points, exact.u));
    g2 += wnorm2(in.weights, cplx(in.pk_dx.transpose()) * pu - grad.x);
    g2 += wnorm2(in.weights, cplx(in.pk_dy.transpose()) * pu - grad.y);
    s2 += wnorm2(in.weights, cplx(in.rt_x.transpose()) * ps - sig.x);
    s2 += wnorm2(in.weights, cplx(in.rt_y.transpose()) * ps - sig.y);
    d2 += wnorm2(in.weights, cplx(in.rt_div.transpose()) * ps - sample(in.points, exact.div_sigma));
  }
  const auto& rule = tables.edge_rule();
  const RMatrix& basis = tables.edge_basis(false);
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edges()[e];
    const CVector pe = project_edge_on(mesh, e, tables, exact.u);
    const Point a = mesh.vertices()[edge.vertices[0]];
    const Point b = mesh.vertices()[edge.vertices[1]];
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Point x = a + rule.points[q] * (b - a);
      const Complex ph = (basis.col(static_cast<Index>(q)).cast<Complex>().transpose() * pe)(0) /
                         std::sqrt(edge.length);
      t2 += rule.weights[q] * edge.length * std::norm(ph - exact.u(x));
    }
  }
  ProjectionLevel level;
  level.h = mesh.h();
  level.u_error = std::sqrt(u2);
  level.grad_u_error = std::sqrt(g2);
  level.trace_error = std::sqrt(t2);
  level.sigma_error = std::sqrt(s2);
  level.div_sigma_error = std::sqrt(d2);
  return level;
}

ProjectionReport projection_study(const ManufacturedCase& exact, int k, std::span<const int> levels) {
  ProjectionReport report;
  report.k = k;
  report.kappa = exact.kappa;
  const ReferenceElement ref(k);
  for (int n : levels) {
    ProjectionLevel level = projection_errors(exact, generate_structured(n), ref);
    level.n = n;
    report.levels.push_back(level);
    const Real scale = std::pow(level.h * exact.kappa, k + 1);
    report.constant_estimates.push_back({level.u_error / scale, level.sigma_error / scale});
  }
  if (report.levels.size() >= 2) {
    std::vector<Real> hs;
    std::array<std::vector<Real>, 5> errors;
    for (const auto& l : report.levels) {
      hs.push_back(l.h);
      errors[0].push_back(l.u_error);
      errors[1].push_back(l.grad_u_error);
      errors[2].push_back(l.trace_error);
      errors[3].push_back(l.sigma_error);
      errors[4].push_back(l.div_sigma_error);
    }
    report.rates.resize(report.levels.size() - 1);
    for (int f = 0; f < 5; ++f) {
      const auto r = compute_rate(errors[f], hs);
      for (std::size_t i = 0; i < r.size(); ++i) {
        report.rates[i][f] = r[i];
      }
    }
  }
  return report;
}

}  // namespace hrtmdg
