#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hrtmdg/types.hpp"

namespace hrtmdg {

inline constexpr Index kNoCell = -1;

struct Edge {
  // Sorted so that vertices[0] < vertices[1]; the multiplier basis is
  // parameterized from vertices[0] to vertices[1].
  std::array<Index, 2> vertices{};
  // cells[0] < cells[1]; cells[1] == kNoCell on the boundary.
  std::array<Index, 2> cells{kNoCell, kNoCell};
  // Outward for cells[0].
  Point normal = Point::Zero();
  Real length = 0.0;
  bool boundary = true;
};

struct CellEdge {
  Index edge = -1;
  // +1 when the edge's global normal is outward for this cell.
  int sign = 1;
};

/// Conforming triangulation with counterclockwise cells. Local edge l of a
/// cell joins its vertices l and (l + 1) % 3. Immutable once built.
class Mesh {
 public:
  Mesh() = default;

  /// Derives the edge set and adjacency from the cell list. Clockwise cells
  /// are reoriented; degenerate cells, non-manifold edges and unreferenced
  /// vertices raise TopologyError.
  static Mesh from_cells(std::vector<Point> vertices, std::vector<std::array<Index, 3>> cells);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::array<Index, 3>>& cells() const { return cells_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::array<CellEdge, 3>& cell_edges(Index cell) const { return cell_edges_[cell]; }

  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index num_interior_edges() const { return num_interior_edges_; }
  Index num_boundary_edges() const { return num_edges() - num_interior_edges_; }

  /// Position of an edge among the interior edges (ascending edge index), or
  /// -1 for boundary edges.
  Index interior_index(Index edge) const { return interior_index_[edge]; }
  Index interior_edge(Index interior) const { return interior_edges_[interior]; }

  Point vertex(Index cell, int local) const { return vertices_[cells_[cell][local]]; }
  Real cell_area(Index cell) const;
  Real cell_diameter(Index cell) const;

  /// Global mesh size: the largest cell diameter.
  Real h() const { return h_; }

  /// Number of cells that were listed clockwise and reoriented on import.
  Index reoriented_cells() const { return reoriented_; }

 private:
  std::vector<Point> vertices_;
  std::vector<std::array<Index, 3>> cells_;
  std::vector<Edge> edges_;
  std::vector<std::array<CellEdge, 3>> cell_edges_;
  std::vector<Index> interior_index_;
  std::vector<Index> interior_edges_;
  Index num_interior_edges_ = 0;
  Index reoriented_ = 0;
  Real h_ = 0.0;
};

/// Uniform triangulation of the unit square: n x n squares, each split
/// along its (0,0)-(1,1) diagonal.
Mesh generate_structured(int n);

/// Parses the ASCII mesh format:
///   vertices <V>
///   x y            (V lines)
///   cells <C>
///   i j k          (C lines, 0-based)
/// '#' starts a comment. Raises ParseError (with line/column) or TopologyError.
Mesh import_mesh(std::string_view text);
Mesh read_mesh_file(const std::filesystem::path& path);

std::string export_mesh(const Mesh& mesh);

Real mesh_size(const Mesh& mesh);

}  // namespace hrtmdg
