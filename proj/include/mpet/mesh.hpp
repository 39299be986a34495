#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpet/errors.hpp"
#include "mpet/linalg.hpp"

namespace mpet {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Geometric boundary labels. Gamma1..Gamma4 are the unit-square sides
/// (right, bottom, left, top); GammaS/GammaV are the outer (skull) and
/// inner (ventricle) loops of the annulus.
enum class BoundaryTag : std::uint8_t {
    gamma1,
    gamma2,
    gamma3,
    gamma4,
    gamma_skull,
    gamma_ventricle,
};

std::string to_string(BoundaryTag tag);
BoundaryTag boundary_tag_from_string(const std::string& name);

/// Boundary edge, oriented so the owning triangle lies on its left; the
/// outward unit normal is then rot(-90 deg) of the edge direction.
struct BoundaryEdge {
    Index v0 = 0;
    Index v1 = 0;
    BoundaryTag tag = BoundaryTag::gamma1;
};

/// Conforming triangulation with counterclockwise triangles and tagged
/// boundary edges. Immutable after construction.
class Mesh {
public:
    Mesh() = default;
    Mesh(std::vector<Vec2> vertices, std::vector<std::array<Index, 3>> triangles,
         std::vector<BoundaryEdge> boundary_edges);

    Index n_vertices() const { return static_cast<Index>(vertices_.size()); }
    Index n_triangles() const { return static_cast<Index>(triangles_.size()); }

    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<std::array<Index, 3>>& triangles() const { return triangles_; }
    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }

    const Vec2& vertex(Index v) const { return vertices_[static_cast<std::size_t>(v)]; }
    const std::array<Index, 3>& triangle(Index t) const {
        return triangles_[static_cast<std::size_t>(t)];
    }

    double triangle_area(Index t) const;
    double total_area() const;
    double min_angle_deg() const;
    double max_edge_length() const;

private:
    std::vector<Vec2> vertices_;
    std::vector<std::array<Index, 3>> triangles_;
    std::vector<BoundaryEdge> boundary_edges_;
};

/// Uniform n x n grid of the unit square, each cell split along the
/// bottom-left to top-right diagonal. Sides tagged Gamma1..Gamma4.
Mesh unit_square_mesh(int n);

/// Midpoint subdivision: every triangle into 4 congruent children,
/// boundary tags inherited, h halves exactly.
Mesh refine_uniform(const Mesh& mesh);

/// Structured polar-grid triangulation of the annulus r_inner < r < r_outer.
/// Inner loop tagged GammaV, outer loop GammaS.
Mesh annulus_mesh(double r_inner, double r_outer, int n_radial, int n_angular);

std::vector<BoundaryEdge> boundary_edges_with_tag(const Mesh& mesh, BoundaryTag tag);

/// Plain-text export: "v x y" / "t i j k" / "b i j tag" lines.
void write_mesh_text(const Mesh& mesh, std::ostream& out);

/// Throws ArgumentError when a conformity invariant fails: non-positive
/// triangle area, an edge shared by more than two triangles, or a tagged
/// boundary that does not match the mesh's topological boundary.
void check_mesh(const Mesh& mesh);

/// Deterministic enumeration of unique undirected edges (first-seen order
/// scanning triangles); basis for P2 midpoint dofs and refinement.
class EdgeTable {
public:
    explicit EdgeTable(const Mesh& mesh);

    Index n_edges() const { return static_cast<Index>(edges_.size()); }
    const std::vector<std::array<Index, 2>>& edges() const { return edges_; }
    const std::array<Index, 3>& triangle_edges(Index t) const {
        return triangle_edges_[static_cast<std::size_t>(t)];
    }
    /// Edge id for an (unordered) vertex pair; throws if absent.
    Index edge_id(Index a, Index b) const;

private:
    std::vector<std::array<Index, 2>> edges_;
    std::vector<std::array<Index, 3>> triangle_edges_;
    std::unordered_map<std::uint64_t, Index> index_;
};

} // namespace mpet
