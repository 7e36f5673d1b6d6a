#include "hrtmdg/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace hrtmdg {

namespace {

Real signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

// Outward unit normal of the directed edge p -> q of a counterclockwise cell.
Point outward_normal(const Point& p, const Point& q) {
  const Point d = q - p;
  return Point(d.y(), -d.x()) / d.norm();
}

}  // namespace

Mesh Mesh::from_cells(std::vector<Point> vertices, std::vector<std::array<Index, 3>> cells) {
  Mesh mesh;
  const auto nv = static_cast<Index>(vertices.size());
  if (cells.empty()) {
    throw TopologyError("mesh has no cells");
  }

  std::vector<bool> used(vertices.size(), false);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    auto& cell = cells[c];
    for (Index v : cell) {
      if (v < 0 || v >= nv) {
        throw TopologyError("cell " + std::to_string(c) + " references vertex " + std::to_string(v) +
                            " outside [0, " + std::to_string(nv) + ")");
      }
      used[v] = true;
    }
    if (cell[0] == cell[1] || cell[1] == cell[2] || cell[0] == cell[2]) {
      throw TopologyError("cell " + std::to_string(c) + " repeats a vertex");
    }
    const Real area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
    const Real scale = std::max({(vertices[cell[1]] - vertices[cell[0]]).squaredNorm(),
                                 (vertices[cell[2]] - vertices[cell[1]]).squaredNorm(),
                                 (vertices[cell[0]] - vertices[cell[2]]).squaredNorm()});
    if (!(std::abs(area) > 1e-14 * scale)) {
      throw TopologyError("cell " + std::to_string(c) + " is degenerate (zero area)");
    }
    if (area < 0) {
      std::swap(cell[1], cell[2]);
      ++mesh.reoriented_;
    }
  }
  for (Index v = 0; v < nv; ++v) {
    if (!used[v]) {
      throw TopologyError("dangling vertex " + std::to_string(v) + " is not used by any cell");
    }
  }

  mesh.vertices_ = std::move(vertices);
  mesh.cells_ = std::move(cells);

  // Edges are numbered in order of first appearance while scanning cells.
  std::map<std::pair<Index, Index>, Index> lookup;
  mesh.cell_edges_.resize(mesh.cells_.size());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (int l = 0; l < 3; ++l) {
      const Index a = mesh.cells_[c][l];
      const Index b = mesh.cells_[c][(l + 1) % 3];
      const auto key = std::minmax(a, b);
      auto [it, inserted] = lookup.try_emplace({key.first, key.second}, mesh.num_edges());
      if (inserted) {
        Edge e;
        e.vertices = {key.first, key.second};
        e.cells = {c, kNoCell};
        e.length = (mesh.vertices_[b] - mesh.vertices_[a]).norm();
        e.normal = outward_normal(mesh.vertices_[a], mesh.vertices_[b]);
        mesh.edges_.push_back(e);
      } else {
        Edge& e = mesh.edges_[it->second];
        if (e.cells[1] != kNoCell) {
          throw TopologyError("edge (" + std::to_string(key.first) + ", " + std::to_string(key.second) +
                              ") is shared by more than two cells");
        }
        if (e.cells[0] == c) {
          throw TopologyError("cell " + std::to_string(c) + " uses an edge twice");
        }
        e.cells[1] = c;
      }
      mesh.cell_edges_[c][l].edge = it->second;
    }
  }

  mesh.interior_index_.assign(mesh.edges_.size(), -1);
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    Edge& edge = mesh.edges_[e];
    edge.boundary = edge.cells[1] == kNoCell;
    if (!edge.boundary) {
      // Cells are scanned in ascending order, so cells[0] < cells[1] already.
      mesh.interior_index_[e] = static_cast<Index>(mesh.interior_edges_.size());
      mesh.interior_edges_.push_back(e);
    }
  }
  mesh.num_interior_edges_ = static_cast<Index>(mesh.interior_edges_.size());

  // The normal set at insertion time is already outward for cells[0].
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (int l = 0; l < 3; ++l) {
      CellEdge& ce = mesh.cell_edges_[c][l];
      ce.sign = (c == mesh.edges_[ce.edge].cells[0]) ? 1 : -1;
    }
  }

  for (Index c = 0; c < mesh.num_cells(); ++c) {
    mesh.h_ = std::max(mesh.h_, mesh.cell_diameter(c));
  }
  return mesh;
}

Real Mesh::cell_area(Index cell) const {
  return signed_area(vertex(cell, 0), vertex(cell, 1), vertex(cell, 2));
}

Real Mesh::cell_diameter(Index cell) const {
  const Point a = vertex(cell, 0), b = vertex(cell, 1), c = vertex(cell, 2);
  return std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
}

Real mesh_size(const Mesh& mesh) { return mesh.h(); }

Mesh generate_structured(int n) {
  if (n < 1) {
    throw ConfigError("n", "structured mesh needs n >= 1");
  }
  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      vertices.emplace_back(static_cast<Real>(i) / n, static_cast<Real>(j) / n);
    }
  }
  auto id = [n](int i, int j) { return static_cast<Index>(j * (n + 1) + i); };
  std::vector<std::array<Index, 3>> cells;
  cells.reserve(static_cast<std::size_t>(2 * n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return Mesh::from_cells(std::move(vertices), std::move(cells));
}

namespace {

class MeshParser {
 public:
  explicit MeshParser(std::string_view text) : text_(text) {}

  Mesh parse() {
    const auto nv = expect_header("vertices");
    std::vector<Point> vertices;
    vertices.reserve(nv);
    for (std::size_t i = 0; i < nv; ++i) {
      next_content_line("vertex coordinates");
      const Real x = read_real();
      const Real y = read_real();
      expect_line_end();
      vertices.emplace_back(x, y);
    }
    const auto nc = expect_header("cells");
    std::vector<std::array<Index, 3>> cells;
    cells.reserve(nc);
    for (std::size_t i = 0; i < nc; ++i) {
      next_content_line("cell vertex indices");
      std::array<Index, 3> cell{};
      for (auto& v : cell) {
        v = read_index();
      }
      expect_line_end();
      cells.push_back(cell);
    }
    while (advance_line()) {
      skip_space();
      if (!at_line_end()) {
        fail("unexpected content after the cell block");
      }
    }
    return Mesh::from_cells(std::move(vertices), std::move(cells));
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what, line_no_, static_cast<int>(col_) + 1);
  }

  bool advance_line() {
    if (pos_ >= text_.size()) {
      return false;
    }
    const auto end = text_.find('\n', pos_);
    line_ = text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
    if (!line_.empty() && line_.back() == '\r') {
      line_.remove_suffix(1);
    }
    const auto hash = line_.find('#');
    if (hash != std::string_view::npos) {
      line_ = line_.substr(0, hash);
    }
    pos_ = end == std::string_view::npos ? text_.size() : end + 1;
    ++line_no_;
    col_ = 0;
    return true;
  }

  void next_content_line(const char* expecting) {
    while (advance_line()) {
      skip_space();
      if (!at_line_end()) {
        return;
      }
    }
    col_ = 0;
    fail(std::string("unexpected end of input, expected ") + expecting);
  }

  void skip_space() {
    while (col_ < line_.size() && (line_[col_] == ' ' || line_[col_] == '\t')) {
      ++col_;
    }
  }

  bool at_line_end() const { return col_ >= line_.size(); }

  std::string_view token() {
    skip_space();
    const auto start = col_;
    while (col_ < line_.size() && line_[col_] != ' ' && line_[col_] != '\t') {
      ++col_;
    }
    return line_.substr(start, col_ - start);
  }

  Real read_real() {
    skip_space();
    const auto start = col_;
    const auto tok = token();
    if (tok.empty()) {
      col_ = start;
      fail("expected a number");
    }
    Real value = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
      col_ = start;
      fail("invalid number '" + std::string(tok) + "'");
    }
    return value;
  }

  Index read_index() {
    skip_space();
    const auto start = col_;
    const auto tok = token();
    if (tok.empty()) {
      col_ = start;
      fail("expected a vertex index");
    }
    Index value = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || value < 0) {
      col_ = start;
      fail("invalid vertex index '" + std::string(tok) + "'");
    }
    return value;
  }

  void expect_line_end() {
    skip_space();
    if (!at_line_end()) {
      fail("unexpected trailing content");
    }
  }

  std::size_t expect_header(const char* keyword) {
    next_content_line(keyword);
    const auto start = col_;
    if (token() != keyword) {
      col_ = start;
      fail(std::string("expected '") + keyword + " <count>'");
    }
    const auto count = read_index();
    expect_line_end();
    return static_cast<std::size_t>(count);
  }

  std::string_view text_;
  std::string_view line_;
  std::size_t pos_ = 0;
  std::size_t col_ = 0;
  int line_no_ = 0;
};

}  // namespace

Mesh import_mesh(std::string_view text) { return MeshParser(text).parse(); }

Mesh read_mesh_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("mesh-file", "cannot open '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return import_mesh(buffer.str());
}

std::string export_mesh(const Mesh& mesh) {
  std::string out = "vertices " + std::to_string(mesh.num_vertices()) + "\n";
  char buf[64];
  for (const auto& p : mesh.vertices()) {
    for (Real x : {p.x(), p.y()}) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), x);
      out.append(buf, res.ptr);
      out.push_back(' ');
    }
    out.back() = '\n';
  }
  out += "cells " + std::to_string(mesh.num_cells()) + "\n";
  for (const auto& c : mesh.cells()) {
    out += std::to_string(c[0]) + " " + std::to_string(c[1]) + " " + std::to_string(c[2]) + "\n";
  }
  return out;
}

}  // namespace hrtmdg
