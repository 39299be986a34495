#include "mpet/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>

namespace mpet {

namespace {

std::uint64_t edge_key(Index a, Index b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (lo << 32) | hi;
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

} // namespace

std::string to_string(BoundaryTag tag) {
    switch (tag) {
    case BoundaryTag::gamma1: return "Gamma1";
    case BoundaryTag::gamma2: return "Gamma2";
    case BoundaryTag::gamma3: return "Gamma3";
    case BoundaryTag::gamma4: return "Gamma4";
    case BoundaryTag::gamma_skull: return "GammaS";
    case BoundaryTag::gamma_ventricle: return "GammaV";
    }
    throw ArgumentError("to_string: unknown boundary tag");
}

BoundaryTag boundary_tag_from_string(const std::string& name) {
    if (name == "Gamma1") return BoundaryTag::gamma1;
    if (name == "Gamma2") return BoundaryTag::gamma2;
    if (name == "Gamma3") return BoundaryTag::gamma3;
    if (name == "Gamma4") return BoundaryTag::gamma4;
    if (name == "GammaS") return BoundaryTag::gamma_skull;
    if (name == "GammaV") return BoundaryTag::gamma_ventricle;
    throw ArgumentError("unknown boundary tag '" + name + "'");
}

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<Index, 3>> triangles,
           std::vector<BoundaryEdge> boundary_edges)
    : vertices_(std::move(vertices)),
      triangles_(std::move(triangles)),
      boundary_edges_(std::move(boundary_edges)) {}

double Mesh::triangle_area(Index t) const {
    const auto& tri = triangle(t);
    return signed_area(vertex(tri[0]), vertex(tri[1]), vertex(tri[2]));
}

double Mesh::total_area() const {
    double area = 0.0;
    for (Index t = 0; t < n_triangles(); ++t) {
        area += triangle_area(t);
    }
    return area;
}

double Mesh::min_angle_deg() const {
    double min_angle = std::numeric_limits<double>::max();
    for (const auto& tri : triangles_) {
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = vertex(tri[static_cast<std::size_t>(k)]);
            const Vec2& b = vertex(tri[static_cast<std::size_t>((k + 1) % 3)]);
            const Vec2& c = vertex(tri[static_cast<std::size_t>((k + 2) % 3)]);
            const double ux = b.x - a.x, uy = b.y - a.y;
            const double vx = c.x - a.x, vy = c.y - a.y;
            const double dot = ux * vx + uy * vy;
            const double cross = ux * vy - uy * vx;
            min_angle = std::min(min_angle, std::atan2(std::abs(cross), dot));
        }
    }
    return min_angle * 180.0 / std::numbers::pi;
}

double Mesh::max_edge_length() const {
    double h = 0.0;
    for (const auto& tri : triangles_) {
        for (int k = 0; k < 3; ++k) {
            const Vec2& a = vertex(tri[static_cast<std::size_t>(k)]);
            const Vec2& b = vertex(tri[static_cast<std::size_t>((k + 1) % 3)]);
            h = std::max(h, std::hypot(b.x - a.x, b.y - a.y));
        }
    }
    return h;
}

Mesh unit_square_mesh(int n) {
    if (n < 1) {
        throw ArgumentError("unit_square_mesh: n must be >= 1");
    }
    const Index stride = n + 1;
    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<std::size_t>(stride) * stride);
    for (Index j = 0; j <= n; ++j) {
        for (Index i = 0; i <= n; ++i) {
            vertices.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
        }
    }
    std::vector<std::array<Index, 3>> triangles;
    triangles.reserve(2 * static_cast<std::size_t>(n) * n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < n; ++i) {
            const Index v00 = j * stride + i;
            const Index v10 = v00 + 1;
            const Index v01 = v00 + stride;
            const Index v11 = v01 + 1;
            triangles.push_back({v00, v10, v11});
            triangles.push_back({v00, v11, v01});
        }
    }
    std::vector<BoundaryEdge> boundary;
    boundary.reserve(4 * static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        boundary.push_back({i, i + 1, BoundaryTag::gamma2}); // y = 0
    }
    for (Index j = 0; j < n; ++j) {
        boundary.push_back({j * stride + n, (j + 1) * stride + n, BoundaryTag::gamma1}); // x = 1
    }
    for (Index i = n; i > 0; --i) {
        boundary.push_back({n * stride + i, n * stride + i - 1, BoundaryTag::gamma4}); // y = 1
    }
    for (Index j = n; j > 0; --j) {
        boundary.push_back({j * stride, (j - 1) * stride, BoundaryTag::gamma3}); // x = 0
    }
    Mesh mesh(std::move(vertices), std::move(triangles), std::move(boundary));
    check_mesh(mesh);
    return mesh;
}

Mesh refine_uniform(const Mesh& mesh) {
    const EdgeTable edges(mesh);
    const Index n_old = mesh.n_vertices();

    std::vector<Vec2> vertices = mesh.vertices();
    vertices.resize(static_cast<std::size_t>(n_old) + static_cast<std::size_t>(edges.n_edges()));
    for (Index e = 0; e < edges.n_edges(); ++e) {
        const auto& [a, b] = edges.edges()[static_cast<std::size_t>(e)];
        vertices[static_cast<std::size_t>(n_old + e)] = {
            0.5 * (mesh.vertex(a).x + mesh.vertex(b).x),
            0.5 * (mesh.vertex(a).y + mesh.vertex(b).y)};
    }

    std::vector<std::array<Index, 3>> triangles;
    triangles.reserve(4 * static_cast<std::size_t>(mesh.n_triangles()));
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const auto& [v0, v1, v2] = mesh.triangle(t);
        const auto& te = edges.triangle_edges(t);
        const Index m01 = n_old + te[0];
        const Index m12 = n_old + te[1];
        const Index m20 = n_old + te[2];
        triangles.push_back({v0, m01, m20});
        triangles.push_back({v1, m12, m01});
        triangles.push_back({v2, m20, m12});
        triangles.push_back({m01, m12, m20});
    }

    std::vector<BoundaryEdge> boundary;
    boundary.reserve(2 * mesh.boundary_edges().size());
    for (const BoundaryEdge& e : mesh.boundary_edges()) {
        const Index mid = n_old + edges.edge_id(e.v0, e.v1);
        boundary.push_back({e.v0, mid, e.tag});
        boundary.push_back({mid, e.v1, e.tag});
    }
    return Mesh(std::move(vertices), std::move(triangles), std::move(boundary));
}

Mesh annulus_mesh(double r_inner, double r_outer, int n_radial, int n_angular) {
    if (!(0.0 < r_inner && r_inner < r_outer)) {
        throw ArgumentError("annulus_mesh: require 0 < r_inner < r_outer");
    }
    if (n_radial < 1 || n_angular < 8) {
        throw ArgumentError("annulus_mesh: require n_radial >= 1 and n_angular >= 8");
    }
    const Index na = n_angular;
    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<std::size_t>(n_radial + 1) * na);
    for (Index k = 0; k <= n_radial; ++k) {
        const double r = r_inner + (r_outer - r_inner) * k / n_radial;
        for (Index j = 0; j < na; ++j) {
            const double theta = 2.0 * std::numbers::pi * j / na;
            vertices.push_back({r * std::cos(theta), r * std::sin(theta)});
        }
    }
    const auto vid = [na](Index k, Index j) { return k * na + (j % na); };

    std::vector<std::array<Index, 3>> triangles;
    triangles.reserve(2 * static_cast<std::size_t>(n_radial) * na);
    std::vector<BoundaryEdge> boundary;
    boundary.reserve(2 * static_cast<std::size_t>(na));
    for (Index k = 0; k < n_radial; ++k) {
        for (Index j = 0; j < na; ++j) {
            const Index a = vid(k, j);
            const Index b = vid(k, j + 1);
            const Index c = vid(k + 1, j + 1);
            const Index d = vid(k + 1, j);
            triangles.push_back({a, d, c});
            triangles.push_back({a, c, b});
            if (k == 0) {
                boundary.push_back({b, a, BoundaryTag::gamma_ventricle});
            }
            if (k == n_radial - 1) {
                boundary.push_back({d, c, BoundaryTag::gamma_skull});
            }
        }
    }
    Mesh mesh(std::move(vertices), std::move(triangles), std::move(boundary));
    check_mesh(mesh);
    return mesh;
}

std::vector<BoundaryEdge> boundary_edges_with_tag(const Mesh& mesh, BoundaryTag tag) {
    switch (tag) {
    case BoundaryTag::gamma1:
    case BoundaryTag::gamma2:
    case BoundaryTag::gamma3:
    case BoundaryTag::gamma4:
    case BoundaryTag::gamma_skull:
    case BoundaryTag::gamma_ventricle:
        break;
    default:
        throw ArgumentError("boundary_edges_with_tag: unknown tag");
    }
    std::vector<BoundaryEdge> edges;
    for (const BoundaryEdge& e : mesh.boundary_edges()) {
        if (e.tag == tag) {
            edges.push_back(e);
        }
    }
    return edges;
}

void write_mesh_text(const Mesh& mesh, std::ostream& out) {
    out.precision(17);
    for (const Vec2& v : mesh.vertices()) {
        out << "v " << v.x << " " << v.y << "\n";
    }
    for (const auto& t : mesh.triangles()) {
        out << "t " << t[0] << " " << t[1] << " " << t[2] << "\n";
    }
    for (const BoundaryEdge& e : mesh.boundary_edges()) {
        out << "b " << e.v0 << " " << e.v1 << " " << to_string(e.tag) << "\n";
    }
}

void check_mesh(const Mesh& mesh) {
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        if (!(mesh.triangle_area(t) > 0.0)) {
            throw ArgumentError("check_mesh: triangle " + std::to_string(t) +
                                " has non-positive area");
        }
    }
    // Edge sharing counts: interior exactly 2, boundary exactly 1.
    std::map<std::uint64_t, int> counts;
    for (const auto& tri : mesh.triangles()) {
        for (int k = 0; k < 3; ++k) {
            ++counts[edge_key(tri[static_cast<std::size_t>(k)],
                              tri[static_cast<std::size_t>((k + 1) % 3)])];
        }
    }
    std::size_t n_boundary_topological = 0;
    for (const auto& [key, count] : counts) {
        if (count > 2) {
            throw ArgumentError("check_mesh: an edge is shared by more than two triangles");
        }
        if (count == 1) {
            ++n_boundary_topological;
        }
    }
    if (n_boundary_topological != mesh.boundary_edges().size()) {
        throw ArgumentError("check_mesh: tagged boundary (" +
                            std::to_string(mesh.boundary_edges().size()) +
                            " edges) does not match topological boundary (" +
                            std::to_string(n_boundary_topological) + " edges)");
    }
    // Every tagged edge must be a topological boundary edge, and the tagged
    // edges must close up: each boundary vertex has exactly one out-edge
    // and one in-edge.
    std::map<Index, int> out_degree;
    std::map<Index, int> in_degree;
    for (const BoundaryEdge& e : mesh.boundary_edges()) {
        const auto it = counts.find(edge_key(e.v0, e.v1));
        if (it == counts.end() || it->second != 1) {
            throw ArgumentError("check_mesh: tagged edge is not on the boundary");
        }
        ++out_degree[e.v0];
        ++in_degree[e.v1];
    }
    for (const auto& [v, d] : out_degree) {
        if (d != 1 || in_degree[v] != 1) {
            throw ArgumentError("check_mesh: boundary edges do not form closed loops");
        }
    }
}

EdgeTable::EdgeTable(const Mesh& mesh) {
    triangle_edges_.resize(static_cast<std::size_t>(mesh.n_triangles()));
    for (Index t = 0; t < mesh.n_triangles(); ++t) {
        const auto& tri = mesh.triangle(t);
        for (int k = 0; k < 3; ++k) {
            const Index a = tri[static_cast<std::size_t>(k)];
            const Index b = tri[static_cast<std::size_t>((k + 1) % 3)];
            const std::uint64_t key = edge_key(a, b);
            auto [it, inserted] = index_.try_emplace(key, n_edges());
            if (inserted) {
                edges_.push_back({std::min(a, b), std::max(a, b)});
            }
            triangle_edges_[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] =
                it->second;
        }
    }
}

Index EdgeTable::edge_id(Index a, Index b) const {
    const auto it = index_.find(edge_key(a, b));
    if (it == index_.end()) {
        throw ArgumentError("EdgeTable: edge (" + std::to_string(a) + ", " +
                            std::to_string(b) + ") not in mesh");
    }
    return it->second;
}

} // namespace mpet
