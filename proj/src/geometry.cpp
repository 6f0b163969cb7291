#include "ieti/geometry.hpp"

#include "ieti/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace ieti {

std::string to_string(Side side)
{
    switch (side) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    case Side::Bottom: return "bottom";
    case Side::Top: return "top";
    }
    return "?";
}

Side side_from_string(const std::string& name)
{
    if (name == "left") return Side::Left;
    if (name == "right") return Side::Right;
    if (name == "bottom") return Side::Bottom;
    if (name == "top") return Side::Top;
    throw Error(ErrorKind::ParseError, "unknown side '" + name + "'");
}

std::array<double, 2> SquareSymmetry::to_patch(double eta1, double eta2) const
{
    double a = swap ? eta2 : eta1;
    double b = swap ? eta1 : eta2;
    return {flip1 ? 1.0 - a : a, flip2 ? 1.0 - b : b};
}

int SquareSymmetry::patch_index(int a, int b, int n) const
{
    int i = swap ? b : a;
    int j = swap ? a : b;
    if (flip1) i = n - 1 - i;
    if (flip2) j = n - 1 - j;
    return i * n + j;
}

SquareSymmetry SquareSymmetry::along_flipped() const
{
    SquareSymmetry s = *this;
    if (swap)
        s.flip1 = !s.flip1;
    else
        s.flip2 = !s.flip2;
    return s;
}

SquareSymmetry SquareSymmetry::for_side(Side side, bool reversed)
{
    switch (side) {
    case Side::Left: return {false, false, reversed};
    case Side::Right: return {false, true, reversed};
    case Side::Bottom: return {true, reversed, false};
    case Side::Top: return {true, reversed, true};
    }
    return {};
}

GeometryMap::GeometryMap(UnivariateSpace space, std::vector<Point> control)
    : space_(std::move(space)), control_(std::move(control))
{
    if (static_cast<int>(control_.size()) != space_.dim())
        throw Error(ErrorKind::ValidationError, "control point count does not match the geometry space");
}

Point GeometryMap::operator()(double xi1, double xi2) const
{
    return jet(xi1, xi2, 0)[0];
}

std::vector<Point> GeometryMap::jet(double xi1, double xi2, int order) const
{
    auto loc = space_.eval(xi1, xi2, order);
    const int p = degree();
    std::vector<Point> out(multi_index_count(order), Point::Zero());
    for (int i1 = 0; i1 <= p; ++i1)
        for (int i2 = 0; i2 <= p; ++i2) {
            const Point& c = control_[space_.flat(loc.first[0] + i1, loc.first[1] + i2)];
            for (int a = 0; a <= order; ++a)
                for (int b = 0; a + b <= order; ++b)
                    out[multi_index(a, b)] += loc.partial(a, b, i1, i2) * c;
        }
    return out;
}

Eigen::Matrix2d GeometryMap::jacobian(double xi1, double xi2) const
{
    auto j = jet(xi1, xi2, 1);
    Eigen::Matrix2d m;
    m.col(0) = j[multi_index(1, 0)];
    m.col(1) = j[multi_index(0, 1)];
    return m;
}

GeometryMap GeometryMap::viewed(const SquareSymmetry& sym) const
{
    const int n = space_.n();
    std::vector<Point> c(control_.size());
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            c[a * n + b] = control_[sym.patch_index(a, b, n)];
    return GeometryMap(space_.factor(), std::move(c));
}

GeometryMap bilinear_patch(const Point& p00, const Point& p10, const Point& p11, const Point& p01)
{
    return GeometryMap(UnivariateSpace(1, 0, 0), {p00, p01, p10, p11});
}

GluingData GluingData::reversed() const
{
    GluingData g;
    for (int t = 0; t < 2; ++t) {
        g.alpha[t] = alpha[t].reversed();
        g.beta[t] = beta[t].reversed().negated();
    }
    return g;
}

MultiPatchDomain::MultiPatchDomain(int s, std::vector<GeometryMap> patches, std::vector<InnerEdge> inner,
                                   std::vector<BoundaryEdge> boundary, std::vector<Vertex> vertices)
    : s_(s), patches_(std::move(patches)), inner_(std::move(inner)), boundary_(std::move(boundary)),
      vertices_(std::move(vertices))
{
    boundary_sides_.assign(patches_.size(), {false, false, false, false});
    for (const auto& e : boundary_)
        boundary_sides_.at(e.side.patch)[static_cast<int>(e.side.side)] = true;
}

bool MultiPatchDomain::touches_boundary(int i) const
{
    const auto& b = boundary_sides_[i];
    return b[0] || b[1] || b[2] || b[3];
}

std::array<double, 2> MultiPatchDomain::corner_of(int patch, int vertex) const
{
    const Point& v = vertices_.at(vertex).position;
    const GeometryMap& g = patches_.at(patch);
    double best = std::numeric_limits<double>::infinity();
    std::array<double, 2> arg{};
    for (double a : {0.0, 1.0})
        for (double b : {0.0, 1.0}) {
            const double d = (g(a, b) - v).norm();
            if (d < best) {
                best = d;
                arg = {a, b};
            }
        }
    if (best > 1e-9)
        throw Error(ErrorKind::ValidationError, "vertex " + std::to_string(vertex) + " is not a corner of patch " +
                                                    std::to_string(patch));
    return arg;
}

std::vector<int> MultiPatchDomain::incident_inner_edges(int vertex) const
{
    std::vector<int> out;
    for (int e = 0; e < static_cast<int>(inner_.size()); ++e)
        if (inner_[e].vertices[0] == vertex || inner_[e].vertices[1] == vertex)
            out.push_back(e);
    return out;
}

std::vector<int> MultiPatchDomain::inner_vertices() const
{
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(vertices_.size()); ++v)
        if (!vertices_[v].on_boundary)
            out.push_back(v);
    return out;
}

std::vector<int> MultiPatchDomain::boundary_coupling_vertices() const
{
    std::vector<int> out;
    for (int v = 0; v < static_cast<int>(vertices_.size()); ++v)
        if (vertices_[v].on_boundary && vertices_[v].valency() >= 2)
            out.push_back(v);
    return out;
}

std::vector<int> standard_edge_view(const MultiPatchDomain& domain, int edge, int side, int n)
{
    const auto sym = domain.inner_edges().at(edge).sides.at(side).view();
    std::vector<int> map(n * n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            map[a * n + b] = sym.patch_index(a, b, n);
    return map;
}

namespace {

struct EdgeViews {
    GeometryMap g[2];
};

EdgeViews edge_views(const MultiPatchDomain& domain, int edge)
{
    const auto& e = domain.inner_edges().at(edge);
    EdgeViews v;
    for (int t = 0; t < 2; ++t)
        v.g[t] = domain.patch(e.sides[t].patch).viewed(e.sides[t].view());
    return v;
}

}  // namespace

GluingData derive_bilinear_gluing(const MultiPatchDomain& domain, int edge)
{
    const auto& e = domain.inner_edges().at(edge);
    for (int t = 0; t < 2; ++t)
        if (!domain.patch(e.sides[t].patch).is_bilinear())
            throw Error(ErrorKind::NotBilinear, "edge " + std::to_string(edge) + " has a non-bilinear patch");
    EdgeViews v = edge_views(domain, edge);

    auto alpha_at = [&](int t, double xi) {
        auto j = v.g[t].jet(0.0, xi, 1);
        auto j0 = v.g[0].jet(0.0, xi, 1);
        Eigen::Matrix2d m;
        m.col(0) = j[multi_index(1, 0)];
        m.col(1) = j0[multi_index(0, 1)];
        return m.determinant();
    };
    for (double xi : {0.0, 0.5, 1.0})
        if (v.g[0].jet(0.0, xi, 1)[multi_index(0, 1)].norm() < 1e-12)
            throw Error(ErrorKind::DegenerateEdge, "edge " + std::to_string(edge) + " has zero tangent");

    GluingData g;
    for (int t = 0; t < 2; ++t)
        g.alpha[t] = {alpha_at(t, 0.0), alpha_at(t, 1.0)};

    // alpha1*beta0 - alpha0*beta1 = betabar at xi = 0, 1/2, 1
    Eigen::Matrix<double, 3, 4> a;
    Eigen::Vector3d rhs;
    const double xs[3] = {0.0, 0.5, 1.0};
    for (int q = 0; q < 3; ++q) {
        const double xi = xs[q];
        const double a0 = g.alpha[0](xi), a1 = g.alpha[1](xi);
        const Point d0 = v.g[0].jet(0.0, xi, 1)[multi_index(1, 0)];
        const Point d1 = v.g[1].jet(0.0, xi, 1)[multi_index(1, 0)];
        const Point tang = v.g[0].jet(0.0, xi, 1)[multi_index(0, 1)];
        rhs(q) = (a1 * d0 - a0 * d1).dot(tang) / tang.squaredNorm();
        a.row(q) << a1 * (1 - xi), a1 * xi, -a0 * (1 - xi), -a0 * xi;
    }
    Eigen::Vector4d b = a.completeOrthogonalDecomposition().solve(rhs);
    g.beta[0] = {b(0), b(1)};
    g.beta[1] = {b(2), b(3)};
    return g;
}

double gluing_identity_defect(const MultiPatchDomain& domain, int edge, int samples)
{
    const auto& e = domain.inner_edges().at(edge);
    EdgeViews v = edge_views(domain, edge);
    double worst = 0.0;
    for (int q = 0; q < samples; ++q) {
        const double xi = (q + 0.5) / samples;
        const Point tang = v.g[0].jet(0.0, xi, 1)[multi_index(0, 1)];
        Point g1[2];
        for (int t = 0; t < 2; ++t) {
            const double al = e.gluing.alpha[t](xi), be = e.gluing.beta[t](xi);
            g1[t] = v.g[t].jet(0.0, xi, 1)[multi_index(1, 0)] / al - (be / al) * tang;
        }
        worst = std::max(worst, (g1[0] - g1[1]).norm());
    }
    return worst;
}

namespace {

std::vector<Point> boundary_polygon(const GeometryMap& g, int per_side)
{
    std::vector<Point> poly;
    for (int q = 0; q < per_side; ++q) poly.push_back(g(double(q) / per_side, 0.0));
    for (int q = 0; q < per_side; ++q) poly.push_back(g(1.0, double(q) / per_side));
    for (int q = 0; q < per_side; ++q) poly.push_back(g(1.0 - double(q) / per_side, 1.0));
    for (int q = 0; q < per_side; ++q) poly.push_back(g(0.0, 1.0 - double(q) / per_side));
    return poly;
}

bool inside_polygon(const std::vector<Point>& poly, const Point& x)
{
    bool in = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = poly[i];
        const Point& b = poly[j];
        if ((a.y() > x.y()) != (b.y() > x.y())) {
            const double xc = a.x() + (x.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (x.x() < xc)
                in = !in;
        }
    }
    return in;
}

double domain_diameter(const std::vector<GeometryMap>& patches)
{
    double lo[2] = {1e300, 1e300}, hi[2] = {-1e300, -1e300};
    for (const auto& g : patches)
        for (const auto& c : g.control())
            for (int d = 0; d < 2; ++d) {
                lo[d] = std::min(lo[d], c(d));
                hi[d] = std::max(hi[d], c(d));
            }
    return std::max(1.0, std::hypot(hi[0] - lo[0], hi[1] - lo[1]));
}

[[noreturn]] void invalid(const std::string& what)
{
    throw Error(ErrorKind::ValidationError, what);
}

}  // namespace

void MultiPatchDomain::validate() const
{
    const double diam = domain_diameter(patches_);
    const int np = patch_count();
    if (np == 0)
        invalid("domain has no patches");

    // regularity: constant-sign Jacobian bounded away from zero on a sample grid
    for (int i = 0; i < np; ++i) {
        const int sub = 8, q = 4;
        double sign = 0.0;
        for (int a = 0; a < sub * q; ++a)
            for (int b = 0; b < sub * q; ++b) {
                const double x1 = (a + 0.5) / (sub * q), x2 = (b + 0.5) / (sub * q);
                const double d = patches_[i].det_jacobian(x1, x2);
                if (std::abs(d) < kRegularityFloor)
                    invalid("patch " + std::to_string(i) + " is not regular (|det J| below floor)");
                if (sign == 0.0)
                    sign = d;
                else if (sign * d < 0)
                    invalid("patch " + std::to_string(i) + " has a Jacobian sign change");
            }
        if (sign < 0)
            invalid("patch " + std::to_string(i) + " is negatively oriented");
    }

    // every side is exactly one inner-edge side or one boundary edge
    std::vector<std::array<int, 4>> use(np, {0, 0, 0, 0});
    for (const auto& e : inner_)
        for (const auto& s : e.sides) {
            if (s.patch < 0 || s.patch >= np)
                invalid("inner edge references a missing patch");
            use[s.patch][static_cast<int>(s.side)]++;
        }
    for (const auto& e : boundary_) {
        if (e.side.patch < 0 || e.side.patch >= np)
            invalid("boundary edge references a missing patch");
        use[e.side.patch][static_cast<int>(e.side.side)]++;
    }
    for (int i = 0; i < np; ++i)
        for (int s = 0; s < 4; ++s)
            if (use[i][s] != 1)
                invalid("side " + to_string(static_cast<Side>(s)) + " of patch " + std::to_string(i) +
                        " is referenced " + std::to_string(use[i][s]) + " times");

    // traces and gluing
    for (int e = 0; e < static_cast<int>(inner_.size()); ++e) {
        const auto& edge = inner_[e];
        if (edge.sides[0].patch == edge.sides[1].patch)
            invalid("inner edge " + std::to_string(e) + " joins a patch to itself");
        EdgeViews v = edge_views(*this, e);
        for (int q = 0; q < 50; ++q) {
            const double xi = q / 49.0;
            if ((v.g[0](0.0, xi) - v.g[1](0.0, xi)).norm() > 1e-10 * diam)
                throw Error(ErrorKind::InconsistentOrientation,
                            "standard views of inner edge " + std::to_string(e) + " disagree");
        }
        const Point start = v.g[0](0.0, 0.0), end = v.g[0](0.0, 1.0);
        if ((start - vertices_.at(edge.vertices[0]).position).norm() > 1e-9 * diam ||
            (end - vertices_.at(edge.vertices[1]).position).norm() > 1e-9 * diam)
            throw Error(ErrorKind::InconsistentOrientation,
                        "inner edge " + std::to_string(e) + " does not run between its vertices");
        const auto& g = edge.gluing;
        for (int t = 0; t < 2; ++t)
            if (!(g.alpha[t].at0 * g.alpha[t].at1 > 0.0) || std::abs(g.alpha[t].at0) < 1e-12 ||
                std::abs(g.alpha[t].at1) < 1e-12)
                invalid("gluing alpha of inner edge " + std::to_string(e) + " vanishes or changes sign");
        if (!(g.alpha[0].at0 * g.alpha[1].at0 < 0.0))
            invalid("gluing alphas of inner edge " + std::to_string(e) + " have equal signs");
        if (gluing_identity_defect(*this, e) > 1e-9 * diam)
            invalid("gluing data of inner edge " + std::to_string(e) + " violates the G1 identity");
    }

    // vertex cycles
    for (int vi = 0; vi < static_cast<int>(vertices_.size()); ++vi) {
        const auto& v = vertices_[vi];
        if (v.patches.empty())
            invalid("vertex " + std::to_string(vi) + " has no patches");
        for (int p : v.patches)
            corner_of(p, vi);
        const int nu = v.valency();
        auto joined = [&](int a, int b) {
            for (const auto& e : inner_)
                if ((e.vertices[0] == vi || e.vertices[1] == vi) &&
                    ((e.sides[0].patch == a && e.sides[1].patch == b) ||
                     (e.sides[0].patch == b && e.sides[1].patch == a)))
                    return true;
            return false;
        };
        const int links = v.on_boundary ? nu - 1 : nu;
        if (!v.on_boundary && nu < 3)
            invalid("inner vertex " + std::to_string(vi) + " has valency below 3");
        for (int l = 0; l < links; ++l)
            if (!joined(v.patches[l], v.patches[(l + 1) % nu]))
                invalid("patch cycle of vertex " + std::to_string(vi) + " is inconsistent with edge adjacency");
        if (static_cast<int>(incident_inner_edges(vi).size()) != links)
            invalid("vertex " + std::to_string(vi) + " valency does not match its inner edges");
    }

    // overlap
    std::vector<std::vector<Point>> polys;
    for (const auto& g : patches_)
        polys.push_back(boundary_polygon(g, 16));
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < np; ++j) {
            if (i == j)
                continue;
            for (int a = 0; a < 5; ++a)
                for (int b = 0; b < 5; ++b)
                    if (inside_polygon(polys[j], patches_[i]((a + 0.5) / 5, (b + 0.5) / 5)))
                        invalid("patches " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
        }
}

// --- quad mesh builder ---

MultiPatchDomain build_bilinear_domain(const QuadMesh& mesh, int s)
{
    const int nq = static_cast<int>(mesh.quads.size());
    std::vector<GeometryMap> patches;
    for (int q = 0; q < nq; ++q) {
        const auto& v = mesh.quads[q];
        for (int c = 0; c < 4; ++c) {
            if (v[c] < 0 || v[c] >= static_cast<int>(mesh.vertices.size()))
                throw Error(ErrorKind::DegenerateQuad, "quad " + std::to_string(q) + " references a missing vertex");
            const Point e1 = mesh.vertices[v[(c + 1) % 4]] - mesh.vertices[v[c]];
            const Point e2 = mesh.vertices[v[(c + 2) % 4]] - mesh.vertices[v[(c + 1) % 4]];
            if (!(e1.x() * e2.y() - e1.y() * e2.x() > 1e-12))
                throw Error(ErrorKind::DegenerateQuad, "quad " + std::to_string(q) + " is degenerate or not convex");
        }
        patches.push_back(bilinear_patch(mesh.vertices[v[0]], mesh.vertices[v[1]], mesh.vertices[v[2]],
                                         mesh.vertices[v[3]]));
    }

    // renumber referenced vertices in mesh order
    std::vector<int> vid(mesh.vertices.size(), -1);
    for (const auto& q : mesh.quads)
        for (int c : q)
            vid[c] = 0;
    int nv = 0;
    for (auto& x : vid)
        if (x == 0)
            x = nv++;
    std::vector<Vertex> vertices(nv);
    for (std::size_t i = 0; i < vid.size(); ++i)
        if (vid[i] >= 0)
            vertices[vid[i]].position = mesh.vertices[i];

    struct SideRec {
        int patch;
        Side side;
        int start;
    };
    std::map<std::pair<int, int>, std::vector<SideRec>> edges;
    for (int q = 0; q < nq; ++q) {
        const auto& v = mesh.quads[q];
        const int a = vid[v[0]], b = vid[v[1]], c = vid[v[2]], d = vid[v[3]];
        const std::array<std::tuple<int, int, Side, int>, 4> sides = {
            std::tuple{a, b, Side::Bottom, a}, std::tuple{b, c, Side::Right, b},
            std::tuple{c, d, Side::Top, d}, std::tuple{d, a, Side::Left, a}};
        for (const auto& [x, y, side, start] : sides)
            edges[{std::min(x, y), std::max(x, y)}].push_back({q, side, start});
    }

    std::vector<InnerEdge> inner;
    std::vector<BoundaryEdge> boundary;
    for (const auto& [key, recs] : edges) {
        if (recs.size() > 2)
            throw Error(ErrorKind::NonManifold, "edge shared by more than two quads");
        if (recs.size() == 2) {
            InnerEdge e;
            e.vertices = {key.first, key.second};
            for (int t = 0; t < 2; ++t)
                e.sides[t] = {recs[t].patch, recs[t].side, recs[t].start != key.first};
            inner.push_back(e);
        } else {
            BoundaryEdge e;
            e.vertices = {key.first, key.second};
            e.side = {recs[0].patch, recs[0].side, recs[0].start != key.first};
            boundary.push_back(e);
            vertices[key.first].on_boundary = true;
            vertices[key.second].on_boundary = true;
        }
    }

    // counterclockwise patch cycles
    for (int vi = 0; vi < nv; ++vi) {
        auto& v = vertices[vi];
        std::vector<std::pair<double, int>> around;
        for (int q = 0; q < nq; ++q)
            for (int c : mesh.quads[q])
                if (vid[c] == vi) {
                    Point centroid = Point::Zero();
                    for (int w : mesh.quads[q])
                        centroid += 0.25 * mesh.vertices[w];
                    const Point d = centroid - v.position;
                    around.push_back({std::atan2(d.y(), d.x()), q});
                }
        std::sort(around.begin(), around.end());
        for (const auto& a : around)
            v.patches.push_back(a.second);
        if (v.on_boundary && v.patches.size() >= 2) {
            auto joined = [&](int a, int b) {
                for (const auto& e : inner)
                    if ((e.vertices[0] == vi || e.vertices[1] == vi) &&
                        ((e.sides[0].patch == a && e.sides[1].patch == b) ||
                         (e.sides[0].patch == b && e.sides[1].patch == a)))
                        return true;
                return false;
            };
            const int nu = static_cast<int>(v.patches.size());
            for (int l = 0; l < nu; ++l)
                if (!joined(v.patches[(l + nu - 1) % nu], v.patches[l])) {
                    std::rotate(v.patches.begin(), v.patches.begin() + l, v.patches.end());
                    break;
                }
        }
    }

    MultiPatchDomain domain(s, std::move(patches), std::move(inner), std::move(boundary), std::move(vertices));
    for (int e = 0; e < static_cast<int>(domain.inner_edges().size()); ++e)
        domain.set_gluing(e, derive_bilinear_gluing(domain, e));
    domain.validate();
    return domain;
}

QuadMesh builtin_mesh(const std::string& name)
{
    QuadMesh m;
    if (name == "square1") {
        m.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        m.quads = {{0, 1, 2, 3}};
    } else if (name == "strip2") {
        m.vertices = {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}};
        m.quads = {{0, 1, 4, 3}, {1, 2, 5, 4}};
    } else if (name == "corner3L") {
        // L-shape around a reflex boundary corner of valency 3
        m.vertices = {{0, 0}, {1, 0}, {1, 1}, {0.15, 1}, {-1, 1}, {-1, 0.1}, {-1, -1}, {0, -1}};
        m.quads = {{0, 1, 2, 3}, {5, 0, 3, 4}, {6, 7, 0, 5}};
    } else if (name == "corner3" || name == "star5") {
        // patches around one inner vertex
        const int nu = name == "corner3" ? 3 : 5;
        const double outer = name == "corner3" ? 1.2 : 1.1;
        const double pi = std::acos(-1.0);
        m.vertices.push_back({0.05, 0.02});
        for (int l = 0; l < nu; ++l) {
            const double t = pi / 2 + 2 * pi * l / nu;
            const double tm = t + pi / nu;
            const double rs = 1.0 + 0.05 * (l % 2);
            m.vertices.push_back({rs * std::cos(t), rs * std::sin(t)});
            m.vertices.push_back({outer * std::cos(tm), outer * std::sin(tm)});
        }
        for (int l = 0; l < nu; ++l) {
            const int spoke = 1 + 2 * l, out = 2 + 2 * l, next = 1 + 2 * ((l + 1) % nu);
            m.quads.push_back({0, spoke, out, next});
        }
    } else {
        throw Error(ErrorKind::ConfigError, "unknown built-in domain '" + name + "'");
    }
    return m;
}

std::vector<std::string> builtin_domain_names() { return {"square1", "strip2", "corner3L", "corner3", "star5"}; }

}  // namespace ieti
