#include "hsdop/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace hsdop {

namespace {

using json = nlohmann::json;

struct LineReader {
    std::ifstream in;
    std::string path;
    long line_no = 0;

    explicit LineReader(const std::string& p) : in(p), path(p) {
        if (!in) throw IoError("cannot open '" + p + "'");
    }

    /// Next line that is neither blank nor a '#' comment.
    bool next(std::string& out) {
        std::string raw;
        while (std::getline(in, raw)) {
            ++line_no;
            auto hash = raw.find('#');
            if (hash != std::string::npos) raw.erase(hash);
            auto begin = raw.find_first_not_of(" \t\r\n");
            if (begin == std::string::npos) continue;
            out = raw.substr(begin);
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(path + ":" + std::to_string(line_no) + ": " + msg);
    }
};

} // namespace

OrientedSimplicialComplex load_off(const std::string& path) {
    LineReader r(path);
    std::string line;
    if (!r.next(line)) r.fail("empty file");
    {
        std::istringstream ss(line);
        std::string magic;
        ss >> magic;
        if (magic != "OFF") r.fail("expected OFF header, got '" + magic + "'");
        // Counts may share the header line.
        long nv = -1, nf = -1, ne = -1;
        if (ss >> nv >> nf >> ne) {
            line.clear();
        } else {
            if (!r.next(line)) r.fail("missing counts line");
            std::istringstream cs(line);
            if (!(cs >> nv >> nf >> ne)) r.fail("malformed counts line");
        }
        if (nv < 0 || nf < 0) r.fail("negative counts");

        Eigen::Matrix<double, Eigen::Dynamic, 3> verts(nv, 3);
        for (long i = 0; i < nv; ++i) {
            if (!r.next(line)) r.fail("unexpected end of file in vertex list");
            std::istringstream vs(line);
            double x, y, z;
            if (!(vs >> x >> y >> z)) r.fail("malformed vertex line");
            verts.row(i) << x, y, z;
        }
        std::vector<std::array<std::int32_t, 3>> faces;
        faces.reserve(static_cast<std::size_t>(nf));
        for (long i = 0; i < nf; ++i) {
            if (!r.next(line)) r.fail("unexpected end of file in face list");
            std::istringstream fs(line);
            long arity, a, b, c;
            if (!(fs >> arity >> a >> b >> c)) r.fail("malformed face line");
            if (arity != 3) r.fail("only triangular faces are supported");
            faces.push_back({static_cast<std::int32_t>(a),
                             static_cast<std::int32_t>(b),
                             static_cast<std::int32_t>(c)});
        }
        try {
            return build_from_triangle_mesh(verts, faces);
        } catch (const Error& e) {
            throw ParseError(path + ": " + e.what());
        }
    }
}

void write_off(const OrientedSimplicialComplex& c, const std::string& path) {
    if (c.dim() < 2) throw InvalidParameter("write_off needs a 2-complex");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "OFF\n" << c.coords.rows() << " " << c.count(2) << " 0\n";
    char buf[96];
    for (Eigen::Index i = 0; i < c.coords.rows(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", c.coords(i, 0),
                      c.coords(i, 1), c.coords(i, 2));
        out << buf;
    }
    for (std::int64_t i = 0; i < c.count(2); ++i) {
        auto s = c.simplex(2, i);
        out << "3 " << s[0] << " " << s[1] << " " << s[2] << "\n";
    }
}

OrientedSimplicialComplex load_node_ele(const std::string& node_path,
                                        const std::string& ele_path) {
    std::vector<Eigen::Vector3d> pts;
    std::vector<long> ids;
    {
        LineReader r(node_path);
        std::string line;
        if (!r.next(line)) r.fail("empty .node file");
        std::istringstream hs(line);
        long n = 0, dim = 0;
        if (!(hs >> n >> dim)) r.fail("malformed .node header");
        if (dim != 3) r.fail(".node dimension must be 3");
        for (long i = 0; i < n; ++i) {
            if (!r.next(line)) r.fail("unexpected end of .node file");
            std::istringstream ls(line);
            long id;
            double x, y, z;
            if (!(ls >> id >> x >> y >> z)) r.fail("malformed node line");
            ids.push_back(id);
            pts.emplace_back(x, y, z);
        }
    }
    long base = ids.empty() ? 0 : *std::min_element(ids.begin(), ids.end());
    if (base != 0 && base != 1)
        throw ParseError(node_path + ": node indices must be 0- or 1-based");
    std::vector<long> pos(pts.size(), -1);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        long slot = ids[i] - base;
        if (slot < 0 || slot >= static_cast<long>(pts.size()))
            throw ParseError(node_path + ": non-contiguous node ids");
        pos[static_cast<std::size_t>(slot)] = static_cast<long>(i);
    }

    Eigen::Matrix<double, Eigen::Dynamic, 3> verts(
        static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pos[i] < 0) throw ParseError(node_path + ": non-contiguous node ids");
        verts.row(static_cast<Eigen::Index>(i)) =
            pts[static_cast<std::size_t>(pos[i])].transpose();
    }

    std::vector<std::array<std::int32_t, 4>> tets;
    {
        LineReader r(ele_path);
        std::string line;
        if (!r.next(line)) r.fail("empty .ele file");
        std::istringstream hs(line);
        long n = 0, per = 0;
        if (!(hs >> n >> per)) r.fail("malformed .ele header");
        if (per != 4) r.fail(".ele must list 4 nodes per tet");
        for (long i = 0; i < n; ++i) {
            if (!r.next(line)) r.fail("unexpected end of .ele file");
            std::istringstream ls(line);
            long id, a, b, c, d;
            if (!(ls >> id >> a >> b >> c >> d)) r.fail("malformed ele line");
            tets.push_back({static_cast<std::int32_t>(a - base),
                            static_cast<std::int32_t>(b - base),
                            static_cast<std::int32_t>(c - base),
                            static_cast<std::int32_t>(d - base)});
        }
    }
    try {
        return build_from_tet_mesh(verts, tets);
    } catch (const Error& e) {
        throw ParseError(ele_path + ": " + e.what());
    }
}

std::string hash_string(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

Cochain load_cochain(const std::string& path,
                     const OrientedSimplicialComplex& c) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!j.contains("degree") || !j.contains("complex_hash") ||
        !j.contains("values"))
        throw ParseError(path + ": cochain file needs degree, complex_hash, values");
    std::string want = j["complex_hash"].get<std::string>();
    std::string have = hash_string(c.content_hash());
    if (want != have)
        throw HashMismatch(path + ": cochain was written for complex " + want +
                           " but the supplied complex hashes to " + have);
    Cochain w;
    w.degree = j["degree"].get<int>();
    const auto& vals = j["values"];
    w.values.resize(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i)
        w.values(static_cast<Eigen::Index>(i)) = vals[i].get<double>();
    check_degree(c, w, "load_cochain");
    return w;
}

void write_cochain(const Cochain& w, const OrientedSimplicialComplex& c,
                   const std::string& path) {
    check_degree(c, w, "write_cochain");
    json j;
    j["degree"] = w.degree;
    j["complex_hash"] = hash_string(c.content_hash());
    j["values"] = std::vector<double>(w.values.data(),
                                      w.values.data() + w.values.size());
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
}

} // namespace hsdop
