#include "ieti/error.hpp"
#include "ieti/geometry.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace ieti {

using nlohmann::json;

namespace {

// start point of a side in the side's own parameter direction
Point side_point(const GeometryMap& g, Side side, double t)
{
    switch (side) {
    case Side::Left: return g(0.0, t);
    case Side::Right: return g(1.0, t);
    case Side::Bottom: return g(t, 0.0);
    case Side::Top: return g(t, 1.0);
    }
    return Point::Zero();
}

int find_vertex(const std::vector<Vertex>& vertices, const Point& x, double tol)
{
    for (int v = 0; v < static_cast<int>(vertices.size()); ++v)
        if ((vertices[v].position - x).norm() <= tol)
            return v;
    throw Error(ErrorKind::ValidationError, "edge endpoint does not coincide with any listed vertex");
}

// vertices of a side, and whether the side runs against the canonical (low -> high) direction
std::pair<std::array<int, 2>, bool> side_vertices(const std::vector<Vertex>& vertices, const GeometryMap& g,
                                                  Side side, double tol)
{
    const int a = find_vertex(vertices, side_point(g, side, 0.0), tol);
    const int b = find_vertex(vertices, side_point(g, side, 1.0), tol);
    if (a == b)
        throw Error(ErrorKind::ValidationError, "edge with coincident endpoints");
    return {{std::min(a, b), std::max(a, b)}, a > b};
}

template <class T>
T field(const json& j, const char* key)
{
    if (!j.contains(key))
        throw Error(ErrorKind::ParseError, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("bad field '") + key + "': " + e.what());
    }
}

bool parse_orientation(const json& rec, bool derived)
{
    if (!rec.contains("orientation"))
        return derived;
    const auto o = field<std::string>(rec, "orientation");
    if (o != "forward" && o != "reversed")
        throw Error(ErrorKind::ParseError, "orientation must be 'forward' or 'reversed'");
    if ((o == "reversed") != derived)
        throw Error(ErrorKind::ValidationError, "orientation flag contradicts geometry");
    return derived;
}

}  // namespace

MultiPatchDomain parse_domain(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
    const int s = field<int>(j, "s");
    if (s < 0)
        throw Error(ErrorKind::ValidationError, "smoothness s must be nonnegative");

    std::vector<GeometryMap> patches;
    for (const auto& pj : field<json>(j, "patches")) {
        UnivariateSpace space(field<int>(pj, "degree"), field<int>(pj, "regularity"), field<int>(pj, "interior_knots"));
        std::vector<Point> cps;
        for (const auto& c : field<json>(pj, "control_points")) {
            if (!c.is_array() || c.size() != 2)
                throw Error(ErrorKind::ParseError, "control point must be [x, y]");
            cps.emplace_back(c[0].get<double>(), c[1].get<double>());
        }
        patches.emplace_back(space, std::move(cps));
    }

    std::vector<Vertex> vertices;
    for (const auto& vj : field<json>(j, "vertices")) {
        Vertex v;
        const auto pos = field<std::vector<double>>(vj, "position");
        if (pos.size() != 2)
            throw Error(ErrorKind::ParseError, "vertex position must be [x, y]");
        v.position = {pos[0], pos[1]};
        v.patches = field<std::vector<int>>(vj, "patches");
        for (int p : v.patches)
            if (p < 0 || p >= static_cast<int>(patches.size()))
                throw Error(ErrorKind::ValidationError, "vertex references a missing patch");
        vertices.push_back(v);
    }

    auto check_patch = [&](int p) {
        if (p < 0 || p >= static_cast<int>(patches.size()))
            throw Error(ErrorKind::ValidationError, "edge references a missing patch");
    };
    const double tol = 1e-9;
    std::vector<BoundaryEdge> boundary;
    for (const auto& bj : field<json>(j, "boundary_edges")) {
        BoundaryEdge e;
        e.side.patch = field<int>(bj, "patch");
        check_patch(e.side.patch);
        e.side.side = side_from_string(field<std::string>(bj, "side"));
        auto [vs, rev] = side_vertices(vertices, patches[e.side.patch], e.side.side, tol);
        e.vertices = vs;
        e.side.reversed = parse_orientation(bj, rev);
        vertices[vs[0]].on_boundary = vertices[vs[1]].on_boundary = true;
        boundary.push_back(e);
    }

    std::vector<InnerEdge> inner;
    std::vector<bool> has_gluing;
    for (const auto& ej : field<json>(j, "inner_edges")) {
        InnerEdge e;
        const auto sides = field<json>(ej, "sides");
        if (!sides.is_array() || sides.size() != 2)
            throw Error(ErrorKind::ValidationError, "inner edge needs exactly two adjacent patches");
        for (int t = 0; t < 2; ++t) {
            e.sides[t].patch = field<int>(sides[t], "patch");
            check_patch(e.sides[t].patch);
            e.sides[t].side = side_from_string(field<std::string>(sides[t], "side"));
            auto [vs, rev] = side_vertices(vertices, patches[e.sides[t].patch], e.sides[t].side, tol);
            if (t == 1 && vs != e.vertices)
                throw Error(ErrorKind::ValidationError, "inner edge sides do not share their endpoints");
            e.vertices = vs;
            e.sides[t].reversed = parse_orientation(sides[t], rev);
        }
        has_gluing.push_back(ej.contains("gluing"));
        if (ej.contains("gluing")) {
            const auto& g = ej.at("gluing");
            const auto al = field<std::vector<std::vector<double>>>(g, "alpha");
            const auto be = field<std::vector<std::vector<double>>>(g, "beta");
            if (al.size() != 2 || be.size() != 2)
                throw Error(ErrorKind::ParseError, "gluing needs two alpha and two beta entries");
            for (int t = 0; t < 2; ++t) {
                if (al[t].size() != 2 || be[t].size() != 2)
                    throw Error(ErrorKind::ParseError, "gluing functions are given by two endpoint values");
                e.gluing.alpha[t] = {al[t][0], al[t][1]};
                e.gluing.beta[t] = {be[t][0], be[t][1]};
            }
        }
        inner.push_back(e);
    }

    MultiPatchDomain domain(s, std::move(patches), std::move(inner), std::move(boundary), std::move(vertices));
    for (int e = 0; e < static_cast<int>(has_gluing.size()); ++e)
        if (!has_gluing[e]) {
            try {
                domain.set_gluing(e, derive_bilinear_gluing(domain, e));
            } catch (const Error& err) {
                throw Error(ErrorKind::ValidationError,
                            "inner edge " + std::to_string(e) + " lacks gluing data: " + err.detail());
            }
        }
    domain.validate();
    return domain;
}

MultiPatchDomain load_domain(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::IoError, "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_domain(ss.str());
}

std::string domain_to_json(const MultiPatchDomain& domain)
{
    json j;
    j["s"] = domain.smoothness();
    j["patches"] = json::array();
    for (const auto& g : domain.patches()) {
        json pj;
        pj["degree"] = g.space().factor().degree();
        pj["regularity"] = g.space().factor().regularity();
        pj["interior_knots"] = g.space().factor().interior_knots();
        pj["control_points"] = json::array();
        for (const auto& c : g.control())
            pj["control_points"].push_back({c.x(), c.y()});
        j["patches"].push_back(pj);
    }
    auto side_json = [](const EdgeAdjacency& a) {
        return json{{"patch", a.patch}, {"side", to_string(a.side)}, {"orientation", a.reversed ? "reversed" : "forward"}};
    };
    j["inner_edges"] = json::array();
    for (const auto& e : domain.inner_edges()) {
        json ej;
        ej["sides"] = {side_json(e.sides[0]), side_json(e.sides[1])};
        ej["gluing"]["alpha"] = {{e.gluing.alpha[0].at0, e.gluing.alpha[0].at1},
                                 {e.gluing.alpha[1].at0, e.gluing.alpha[1].at1}};
        ej["gluing"]["beta"] = {{e.gluing.beta[0].at0, e.gluing.beta[0].at1},
                                {e.gluing.beta[1].at0, e.gluing.beta[1].at1}};
        j["inner_edges"].push_back(ej);
    }
    j["boundary_edges"] = json::array();
    for (const auto& e : domain.boundary_edges())
        j["boundary_edges"].push_back(side_json(e.side));
    j["vertices"] = json::array();
    for (const auto& v : domain.vertices())
        j["vertices"].push_back({{"position", {v.position.x(), v.position.y()}}, {"patches", v.patches}});
    return j.dump(2);
}

}  // namespace ieti
