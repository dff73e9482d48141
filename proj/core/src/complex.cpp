#include "hsdop/complex.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <tuple>

namespace hsdop {

namespace {

using Key = std::array<std::int32_t, 4>;

Key pad_key(std::span<const std::int32_t> v) {
    Key k{-1, -1, -1, -1};
    std::copy(v.begin(), v.end(), k.begin());
    return k;
}

} // namespace

std::int64_t OrientedSimplicialComplex::count(int k) const {
    if (k < 0 || k > dim()) return 0;
    return static_cast<std::int64_t>(simplices[k].size());
}

std::span<const std::int32_t> OrientedSimplicialComplex::simplex(
    int k, std::int64_t i) const {
    if (k < 0 || k > dim() || i < 0 || i >= count(k))
        throw IndexOutOfRange("simplex(" + std::to_string(k) + ", " +
                              std::to_string(i) + ")");
    return {simplices[k][static_cast<std::size_t>(i)].data(),
            static_cast<std::size_t>(k + 1)};
}

const SpMatI& OrientedSimplicialComplex::boundary(int k) const {
    if (k < 1 || k > dim())
        throw IndexOutOfRange("boundary(" + std::to_string(k) + ")");
    return boundaries_[static_cast<std::size_t>(k - 1)];
}

std::int64_t OrientedSimplicialComplex::find_simplex(
    int k, std::span<const std::int32_t> verts) const {
    if (k < 0 || k > dim() || verts.size() != static_cast<std::size_t>(k + 1))
        return -1;
    Key key = pad_key(verts);
    const auto& order = lookup_[static_cast<std::size_t>(k)];
    auto it = std::lower_bound(
        order.begin(), order.end(), key, [&](std::int64_t idx, const Key& q) {
            return simplices[static_cast<std::size_t>(k)]
                       [static_cast<std::size_t>(idx)] < q;
        });
    if (it == order.end()) return -1;
    if (simplices[static_cast<std::size_t>(k)][static_cast<std::size_t>(*it)] !=
        key)
        return -1;
    return *it;
}

std::int64_t OrientedSimplicialComplex::euler_characteristic() const {
    std::int64_t chi = 0;
    for (int k = 0; k <= dim(); ++k) chi += (k % 2 == 0) ? count(k) : -count(k);
    return chi;
}

void OrientedSimplicialComplex::finalize() {
    const int n = dim();
    lookup_.assign(simplices.size(), {});
    for (int k = 0; k <= n; ++k) {
        auto& order = lookup_[static_cast<std::size_t>(k)];
        order.resize(simplices[static_cast<std::size_t>(k)].size());
        for (std::size_t i = 0; i < order.size(); ++i)
            order[i] = static_cast<std::int64_t>(i);
        std::sort(order.begin(), order.end(),
                  [&](std::int64_t a, std::int64_t b) {
                      return simplices[static_cast<std::size_t>(k)]
                                 [static_cast<std::size_t>(a)] <
                             simplices[static_cast<std::size_t>(k)]
                                 [static_cast<std::size_t>(b)];
                  });
    }

    boundaries_.clear();
    for (int k = 1; k <= n; ++k) {
        std::vector<Eigen::Triplet<std::int64_t>> trip;
        const auto& list = simplices[static_cast<std::size_t>(k)];
        trip.reserve(list.size() * static_cast<std::size_t>(k + 1));
        for (std::size_t j = 0; j < list.size(); ++j) {
            std::array<std::int32_t, 4> face{-1, -1, -1, -1};
            for (int omit = 0; omit <= k; ++omit) {
                int w = 0;
                for (int i = 0; i <= k; ++i)
                    if (i != omit) face[static_cast<std::size_t>(w++)] = list[j][static_cast<std::size_t>(i)];
                std::int64_t row = find_simplex(
                    k - 1, {face.data(), static_cast<std::size_t>(k)});
                if (row < 0)
                    throw IndexOutOfRange("boundary face missing from complex");
                trip.emplace_back(static_cast<int>(row), static_cast<int>(j),
                                  (omit % 2 == 0) ? 1 : -1);
            }
        }
        SpMatI B(static_cast<int>(count(k - 1)), static_cast<int>(count(k)));
        B.setFromTriplets(trip.begin(), trip.end());
        B.makeCompressed();
        boundaries_.push_back(std::move(B));
    }
    hash_ = 0;
}

std::uint64_t OrientedSimplicialComplex::content_hash() const {
    if (hash_ != 0) return hash_;
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    };
    std::int64_t d = dim();
    mix(&d, sizeof d);
    for (int k = 0; k <= dim(); ++k) {
        std::int64_t c = count(k);
        mix(&c, sizeof c);
        for (const auto& s : simplices[static_cast<std::size_t>(k)])
            mix(s.data(), sizeof(std::int32_t) * static_cast<std::size_t>(k + 1));
    }
    std::int64_t v = coords.rows();
    mix(&v, sizeof v);
    for (Eigen::Index i = 0; i < coords.rows(); ++i)
        for (int j = 0; j < 3; ++j) {
            double x = coords(i, j);
            mix(&x, sizeof x);
        }
    hash_ = (h == 0) ? 1 : h;
    return hash_;
}

MeshGeometry compute_geometry(const OrientedSimplicialComplex& c,
                              double vol_eps) {
    MeshGeometry g;
    const int n = c.dim();
    g.volumes.resize(static_cast<std::size_t>(n) + 1);
    g.barycenters.resize(static_cast<std::size_t>(n) + 1);
    if (c.coords.rows() == 0) throw DegenerateSimplex("complex has no vertices");

    g.bbox_min = c.coords.colwise().minCoeff().transpose();
    g.bbox_max = c.coords.colwise().maxCoeff().transpose();

    for (int k = 0; k <= n; ++k) {
        const std::int64_t nk = c.count(k);
        g.volumes[static_cast<std::size_t>(k)].resize(nk);
        g.barycenters[static_cast<std::size_t>(k)].resize(nk, 3);
        for (std::int64_t i = 0; i < nk; ++i) {
            auto s = c.simplex(k, i);
            Eigen::Vector3d bary = Eigen::Vector3d::Zero();
            for (auto vid : s) bary += c.coords.row(vid).transpose();
            bary /= static_cast<double>(k + 1);
            g.barycenters[static_cast<std::size_t>(k)].row(i) = bary.transpose();

            double vol = 1.0;
            if (k == 1) {
                vol = (c.coords.row(s[1]) - c.coords.row(s[0])).norm();
            } else if (k == 2) {
                Eigen::Vector3d e1 =
                    (c.coords.row(s[1]) - c.coords.row(s[0])).transpose();
                Eigen::Vector3d e2 =
                    (c.coords.row(s[2]) - c.coords.row(s[0])).transpose();
                vol = 0.5 * e1.cross(e2).norm();
            } else if (k == 3) {
                Eigen::Vector3d e1 =
                    (c.coords.row(s[1]) - c.coords.row(s[0])).transpose();
                Eigen::Vector3d e2 =
                    (c.coords.row(s[2]) - c.coords.row(s[0])).transpose();
                Eigen::Vector3d e3 =
                    (c.coords.row(s[3]) - c.coords.row(s[0])).transpose();
                vol = std::abs(e1.cross(e2).dot(e3)) / 6.0;
            }
            if (k > 0 && vol <= vol_eps)
                throw DegenerateSimplex("degenerate " + std::to_string(k) +
                                        "-simplex at index " +
                                        std::to_string(i));
            g.volumes[static_cast<std::size_t>(k)](i) = vol;
        }
    }
    return g;
}

namespace {

/// Shared builder: given top-dimensional cells, induce all lower simplices.
template <std::size_t K>
OrientedSimplicialComplex build_from_cells(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& verts,
    const std::vector<std::array<std::int32_t, K>>& cells) {
    constexpr int topdim = static_cast<int>(K) - 1;
    const auto nv = static_cast<std::int32_t>(verts.rows());

    OrientedSimplicialComplex c;
    c.coords = verts;
    c.simplices.resize(static_cast<std::size_t>(topdim) + 1);

    for (const auto& cell : cells) {
        std::array<std::int32_t, K> s = cell;
        for (auto v : s) {
            if (v < 0 || v >= nv)
                throw IndexOutOfRange("cell vertex index " + std::to_string(v) +
                                      " outside [0, " + std::to_string(nv) + ")");
        }
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end())
            throw DegenerateSimplex("cell with repeated vertex index");
        Key key{-1, -1, -1, -1};
        std::copy(s.begin(), s.end(), key.begin());
        c.simplices[static_cast<std::size_t>(topdim)].push_back(key);
    }

    // Dedupe top cells.
    auto& top = c.simplices[static_cast<std::size_t>(topdim)];
    std::sort(top.begin(), top.end());
    top.erase(std::unique(top.begin(), top.end()), top.end());

    // Induce lower-dimensional simplices from the set of top cells.
    for (int k = topdim - 1; k >= 1; --k) {
        std::vector<Key> sub;
        for (const auto& s : c.simplices[static_cast<std::size_t>(k + 1)]) {
            for (int omit = 0; omit <= k + 1; ++omit) {
                Key f{-1, -1, -1, -1};
                int w = 0;
                for (int i = 0; i <= k + 1; ++i)
                    if (i != omit) f[static_cast<std::size_t>(w++)] = s[static_cast<std::size_t>(i)];
                sub.push_back(f);
            }
        }
        std::sort(sub.begin(), sub.end());
        sub.erase(std::unique(sub.begin(), sub.end()), sub.end());
        c.simplices[static_cast<std::size_t>(k)] = std::move(sub);
    }

    c.simplices[0].clear();
    for (std::int32_t v = 0; v < nv; ++v)
        c.simplices[0].push_back(Key{v, -1, -1, -1});

    c.finalize();
    return c;
}

} // namespace

OrientedSimplicialComplex build_from_triangle_mesh(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& verts,
    const std::vector<std::array<std::int32_t, 3>>& faces) {
    return build_from_cells<3>(verts, faces);
}

OrientedSimplicialComplex build_from_tet_mesh(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& verts,
    const std::vector<std::array<std::int32_t, 4>>& tets) {
    return build_from_cells<4>(verts, tets);
}

OrientedSimplicialComplex make_cycle(int n) {
    if (n < 3) throw InvalidParameter("cycle(n) needs n >= 3");
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(n, 3);
    for (int i = 0; i < n; ++i) {
        double t = 2.0 * std::numbers::pi * i / n;
        verts.row(i) << std::cos(t), std::sin(t), 0.0;
    }
    OrientedSimplicialComplex c;
    c.coords = verts;
    c.simplices.resize(2);
    for (std::int32_t v = 0; v < n; ++v)
        c.simplices[0].push_back(Key{v, -1, -1, -1});
    for (std::int32_t i = 0; i < n; ++i) {
        std::int32_t a = i, b = static_cast<std::int32_t>((i + 1) % n);
        if (a > b) std::swap(a, b);
        c.simplices[1].push_back(Key{a, b, -1, -1});
    }
    std::sort(c.simplices[1].begin(), c.simplices[1].end());
    c.finalize();
    return c;
}

OrientedSimplicialComplex make_icosphere(int subdiv) {
    if (subdiv < 0) throw InvalidParameter("icosphere(subdiv) needs subdiv >= 0");
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> pts = {
        {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0},
        {0, -1, phi}, {0, 1, phi},   {0, -1, -phi}, {0, 1, -phi},
        {phi, 0, -1}, {phi, 0, 1},   {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& p : pts) p.normalize();
    std::vector<std::array<std::int32_t, 3>> faces = {
        {0, 11, 5},  {0, 5, 1},   {0, 1, 7},   {0, 7, 10},  {0, 10, 11},
        {1, 5, 9},   {5, 11, 4},  {11, 10, 2}, {10, 7, 6},  {7, 1, 8},
        {3, 9, 4},   {3, 4, 2},   {3, 2, 6},   {3, 6, 8},   {3, 8, 9},
        {4, 9, 5},   {2, 4, 11},  {6, 2, 10},  {8, 6, 7},   {9, 8, 1}};

    for (int level = 0; level < subdiv; ++level) {
        std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> midpoint;
        auto mid = [&](std::int32_t a, std::int32_t b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Eigen::Vector3d p = (pts[static_cast<std::size_t>(a)] +
                                 pts[static_cast<std::size_t>(b)])
                                    .normalized();
            pts.push_back(p);
            auto id = static_cast<std::int32_t>(pts.size() - 1);
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<std::int32_t, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            std::int32_t ab = mid(f[0], f[1]);
            std::int32_t bc = mid(f[1], f[2]);
            std::int32_t ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(
        static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i)
        verts.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    return build_from_triangle_mesh(verts, faces);
}

OrientedSimplicialComplex make_torus_grid(int n, int m) {
    if (n < 3 || m < 3)
        throw InvalidParameter("torus_grid(n, m) needs n, m >= 3");
    const double R = 1.0, r = 0.35;
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(
        static_cast<Eigen::Index>(n) * m, 3);
    auto vid = [&](int i, int j) {
        return static_cast<std::int32_t>(((i % n + n) % n) * m +
                                         ((j % m + m) % m));
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double th = 2.0 * std::numbers::pi * i / n;
            double ph = 2.0 * std::numbers::pi * j / m;
            verts.row(vid(i, j)) << (R + r * std::cos(ph)) * std::cos(th),
                (R + r * std::cos(ph)) * std::sin(th), r * std::sin(ph);
        }
    std::vector<std::array<std::int32_t, 3>> faces;
    faces.reserve(static_cast<std::size_t>(2) * n * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            faces.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
            faces.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    return build_from_triangle_mesh(verts, faces);
}

OrientedSimplicialComplex make_triangle() {
    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(3, 3);
    verts << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    return build_from_triangle_mesh(verts, {{0, 1, 2}});
}

OrientedSimplicialComplex disjoint_union(const OrientedSimplicialComplex& a,
                                         const OrientedSimplicialComplex& b) {
    const auto va = static_cast<std::int32_t>(a.coords.rows());
    double diag_a = (a.coords.colwise().maxCoeff() -
                     a.coords.colwise().minCoeff()).norm();
    double diag_b = (b.coords.colwise().maxCoeff() -
                     b.coords.colwise().minCoeff()).norm();
    double shift = a.coords.col(0).maxCoeff() - b.coords.col(0).minCoeff() +
                   1.0 + 0.25 * (diag_a + diag_b);

    OrientedSimplicialComplex c;
    c.coords.resize(a.coords.rows() + b.coords.rows(), 3);
    c.coords.topRows(a.coords.rows()) = a.coords;
    c.coords.bottomRows(b.coords.rows()) = b.coords;
    c.coords.bottomRows(b.coords.rows()).col(0).array() += shift;

    const int dim = std::max(a.dim(), b.dim());
    c.simplices.resize(static_cast<std::size_t>(dim) + 1);
    for (int k = 0; k <= dim; ++k) {
        if (k <= a.dim())
            c.simplices[static_cast<std::size_t>(k)] =
                a.simplices[static_cast<std::size_t>(k)];
        if (k <= b.dim())
            for (auto s : b.simplices[static_cast<std::size_t>(k)]) {
                for (int i = 0; i <= k; ++i) s[static_cast<std::size_t>(i)] += va;
                c.simplices[static_cast<std::size_t>(k)].push_back(s);
            }
        std::sort(c.simplices[static_cast<std::size_t>(k)].begin(),
                  c.simplices[static_cast<std::size_t>(k)].end());
    }
    c.finalize();
    return c;
}

namespace {

std::string take_ident(const std::string& s, std::size_t& pos) {
    std::size_t start = pos;
    while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                              s[pos] == '_'))
        ++pos;
    if (pos == start) throw ParseError("generator spec: identifier expected at position " +
                                       std::to_string(start) + " in '" + s + "'");
    return s.substr(start, pos - start);
}

OrientedSimplicialComplex parse_spec(const std::string& s, std::size_t& pos);

std::vector<long> parse_int_args(const std::string& s, std::size_t& pos) {
    std::vector<long> args;
    if (pos >= s.size() || s[pos] != '(') return args;
    ++pos;
    while (true) {
        std::size_t next = 0;
        args.push_back(std::stol(s.substr(pos), &next));
        pos += next;
        if (pos < s.size() && s[pos] == ',') { ++pos; continue; }
        break;
    }
    if (pos >= s.size() || s[pos] != ')')
        throw ParseError("generator spec: ')' expected in '" + s + "'");
    ++pos;
    return args;
}

OrientedSimplicialComplex parse_spec(const std::string& s, std::size_t& pos) {
    std::string name = take_ident(s, pos);
    if (name == "triangle") return make_triangle();
    if (name == "cycle") {
        auto a = parse_int_args(s, pos);
        if (a.size() != 1) throw ParseError("cycle expects one argument");
        return make_cycle(static_cast<int>(a[0]));
    }
    if (name == "icosphere") {
        auto a = parse_int_args(s, pos);
        if (a.size() != 1) throw ParseError("icosphere expects one argument");
        return make_icosphere(static_cast<int>(a[0]));
    }
    if (name == "torus_grid") {
        auto a = parse_int_args(s, pos);
        if (a.size() != 2) throw ParseError("torus_grid expects two arguments");
        return make_torus_grid(static_cast<int>(a[0]), static_cast<int>(a[1]));
    }
    if (name == "disjoint_union") {
        if (pos >= s.size() || s[pos] != '(')
            throw ParseError("disjoint_union expects two sub-specs");
        ++pos;
        auto a = parse_spec(s, pos);
        if (pos >= s.size() || s[pos] != ',')
            throw ParseError("disjoint_union: ',' expected");
        ++pos;
        auto b = parse_spec(s, pos);
        if (pos >= s.size() || s[pos] != ')')
            throw ParseError("disjoint_union: ')' expected");
        ++pos;
        return disjoint_union(a, b);
    }
    throw ParseError("unknown generator '" + name + "'");
}

} // namespace

OrientedSimplicialComplex generate(const std::string& spec) {
    std::string s;
    for (char ch : spec)
        if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
    std::size_t pos = 0;
    auto c = parse_spec(s, pos);
    if (pos != s.size())
        throw ParseError("generator spec: trailing characters in '" + spec + "'");
    return c;
}

} // namespace hsdop
