#pragma once

#include "ieti/spline.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ieti {

using Point = Eigen::Vector2d;

inline constexpr double kRegularityFloor = 1e-8;

// Local sides of [0,1]^2.
enum class Side { Left, Right, Bottom, Top };  // xi1 = 0, xi1 = 1, xi2 = 0, xi2 = 1

std::string to_string(Side side);
Side side_from_string(const std::string& name);

// One of the 8 symmetries of the unit square, mapping view coordinates (eta1, eta2)
// to patch coordinates: swap first, then reflect.
struct SquareSymmetry {
    bool swap = false, flip1 = false, flip2 = false;

    std::array<double, 2> to_patch(double eta1, double eta2) const;
    // view coefficient (a, b) -> patch flat index in an n x n grid
    int patch_index(int a, int b, int n) const;
    // reverses the eta2 direction
    SquareSymmetry along_flipped() const;
    // view with eta1 = 0 on the given side, eta2 along it (reversed if requested)
    static SquareSymmetry for_side(Side side, bool reversed);
};

class GeometryMap {
public:
    GeometryMap() = default;
    GeometryMap(UnivariateSpace space, std::vector<Point> control);

    const TensorSpace& space() const { return space_; }
    const std::vector<Point>& control() const { return control_; }
    int degree() const { return space_.factor().degree(); }
    bool is_bilinear() const { return degree() == 1 && space_.factor().interior_knots() == 0; }

    Point operator()(double xi1, double xi2) const;
    // partial derivatives d1^a d2^b G for a+b <= order, indexed by multi_index(a, b)
    std::vector<Point> jet(double xi1, double xi2, int order) const;
    Eigen::Matrix2d jacobian(double xi1, double xi2) const;
    double det_jacobian(double xi1, double xi2) const { return jacobian(xi1, xi2).determinant(); }

    GeometryMap viewed(const SquareSymmetry& sym) const;

private:
    TensorSpace space_;
    std::vector<Point> control_;
};

GeometryMap bilinear_patch(const Point& p00, const Point& p10, const Point& p11, const Point& p01);

struct LinearFunction {
    double at0 = 0.0, at1 = 0.0;
    double operator()(double xi) const { return (1.0 - xi) * at0 + xi * at1; }
    double slope() const { return at1 - at0; }
    LinearFunction reversed() const { return {at1, at0}; }
    LinearFunction negated() const { return {-at0, -at1}; }
};

// alpha/beta for the two sides of an inner edge, in the edge's canonical parameter.
struct GluingData {
    std::array<LinearFunction, 2> alpha, beta;

    // gluing seen with the edge parameter reversed
    GluingData reversed() const;
};

struct EdgeAdjacency {
    int patch = -1;
    Side side = Side::Left;
    bool reversed = false;  // patch side parameter runs against the edge parameter

    SquareSymmetry view() const { return SquareSymmetry::for_side(side, reversed); }
};

struct InnerEdge {
    std::array<EdgeAdjacency, 2> sides;
    std::array<int, 2> vertices{};  // canonical direction vertices[0] -> vertices[1], vertices[0] < vertices[1]
    GluingData gluing;
};

struct BoundaryEdge {
    EdgeAdjacency side;
    std::array<int, 2> vertices{};
};

struct Vertex {
    Point position;
    std::vector<int> patches;  // counterclockwise
    bool on_boundary = false;
    int valency() const { return static_cast<int>(patches.size()); }
};

class MultiPatchDomain {
public:
    MultiPatchDomain() = default;
    MultiPatchDomain(int s, std::vector<GeometryMap> patches, std::vector<InnerEdge> inner,
                     std::vector<BoundaryEdge> boundary, std::vector<Vertex> vertices);

    int smoothness() const { return s_; }
    int patch_count() const { return static_cast<int>(patches_.size()); }
    const GeometryMap& patch(int i) const { return patches_[i]; }
    const std::vector<GeometryMap>& patches() const { return patches_; }
    const std::vector<InnerEdge>& inner_edges() const { return inner_; }
    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_; }
    const std::vector<Vertex>& vertices() const { return vertices_; }

    // sides of patch i lying on the domain boundary, indexed by Side
    std::array<bool, 4> boundary_sides(int i) const { return boundary_sides_[i]; }
    bool touches_boundary(int i) const;
    // corner of patch i located at vertex v, as a parametric point
    std::array<double, 2> corner_of(int patch, int vertex) const;
    // inner edges incident to a vertex, sorted by index
    std::vector<int> incident_inner_edges(int vertex) const;
    std::vector<int> inner_vertices() const;
    // boundary vertices with valency >= 2
    std::vector<int> boundary_coupling_vertices() const;

    // throws ValidationError / InconsistentOrientation naming the violated invariant
    void validate() const;

    void set_gluing(int edge, const GluingData& g) { inner_[edge].gluing = g; }

private:
    int s_ = 0;
    std::vector<GeometryMap> patches_;
    std::vector<InnerEdge> inner_;
    std::vector<BoundaryEdge> boundary_;
    std::vector<Vertex> vertices_;
    std::vector<std::array<bool, 4>> boundary_sides_;
};

// Reindexing of flat coefficients realising the standard view of one side of an inner edge:
// result[view_flat] = patch_flat.
std::vector<int> standard_edge_view(const MultiPatchDomain& domain, int edge, int side, int n);

GluingData derive_bilinear_gluing(const MultiPatchDomain& domain, int edge);

// max |G1^(i0) - G1^(i1)| over samples, the l = 1 bilinear-like condition
double gluing_identity_defect(const MultiPatchDomain& domain, int edge, int samples = 20);

struct QuadMesh {
    std::vector<Point> vertices;
    std::vector<std::array<int, 4>> quads;  // counterclockwise
};

MultiPatchDomain build_bilinear_domain(const QuadMesh& mesh, int s);

MultiPatchDomain load_domain(const std::string& path);
MultiPatchDomain parse_domain(const std::string& json_text);
std::string domain_to_json(const MultiPatchDomain& domain);

// built-in test domains: square1, strip2, corner3L, corner3, star5
QuadMesh builtin_mesh(const std::string& name);
std::vector<std::string> builtin_domain_names();

}  // namespace ieti
