#include "hsdop/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "hsdop/io.hpp"
#include "hsdop/rng.hpp"

namespace hsdop {

namespace {

// splitmix64 step, for decorrelated per-sample seeds.
std::uint64_t sample_seed(std::uint64_t base, int i) {
    std::uint64_t z =
        base + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(i) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

int bounded(std::mt19937_64& rng, int n) {
    int j = static_cast<int>(uniform01(rng) * n);
    return std::min(j, n - 1);
}

void assign_splits(Dataset& ds, std::uint64_t seed) {
    const int n = static_cast<int>(ds.samples.size());
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed ^ 0x5eedd5eedd5eedull);
    for (int i = n - 1; i > 0; --i) {
        const int k = bounded(rng, i + 1);
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(k)]);
    }
    // Integer arithmetic keeps the floors exact: floor(0.68 n), floor(0.12 n).
    const int n_train = (68 * n) / 100;
    const int n_val = (12 * n) / 100;
    ds.train_idx.assign(idx.begin(), idx.begin() + n_train);
    ds.val_idx.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    ds.test_idx.assign(idx.begin() + n_train + n_val, idx.end());
    std::sort(ds.train_idx.begin(), ds.train_idx.end());
    std::sort(ds.val_idx.begin(), ds.val_idx.end());
    std::sort(ds.test_idx.begin(), ds.test_idx.end());
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(
                    parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
};

int component_count(const OrientedSimplicialComplex& c) {
    UnionFind uf(static_cast<int>(c.count(0)));
    for (std::int64_t e = 0; e < c.count(1); ++e) {
        auto v = c.simplex(1, e);
        uf.unite(v[0], v[1]);
    }
    int roots = 0;
    for (int i = 0; i < static_cast<int>(c.count(0)); ++i)
        if (uf.find(i) == i) ++roots;
    return roots;
}

Dataset start_dataset(const TaskConfig& cfg, ComplexPtr complex,
                      int input_degree, int target_degree) {
    Dataset ds;
    ds.kind = cfg.kind;
    ds.config = cfg;
    ds.complex = std::move(complex);
    ds.complex_id = hash_string(ds.complex->content_hash());
    ds.input_degree = input_degree;
    ds.target_degree = target_degree;
    ds.samples.reserve(static_cast<std::size_t>(cfg.n_samples));
    return ds;
}

void check_common(const TaskConfig& cfg) {
    if (cfg.nx < 3 || cfg.ny < 3)
        throw InvalidParameter("task: torus grid needs nx, ny >= 3");
    if (cfg.n_samples < 1)
        throw InvalidParameter("task: n_samples must be positive");
}

DecOperators torus_ops(const TaskConfig& cfg) {
    auto ptr = std::make_shared<const OrientedSimplicialComplex>(
        make_torus_grid(cfg.nx, cfg.ny));
    return assemble_dec(std::move(ptr), StarMode::barycentric);
}

/// Random mixture of the first `modes` columns with 1/(j+1) decay.
Vec low_mode_mix(std::mt19937_64& rng, const Mat& basis, int modes) {
    const int m = std::min<int>(modes, static_cast<int>(basis.cols()));
    Vec out = Vec::Zero(basis.rows());
    for (int j = 0; j < m; ++j)
        out += (normal01(rng) / (j + 1.0)) * basis.col(j);
    return out;
}

} // namespace

std::string task_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::toroidal_transport: return "toroidal_transport";
        case TaskKind::poisson_field: return "poisson_field";
        case TaskKind::harmonic_recovery: return "harmonic_recovery";
    }
    throw InvalidParameter("unknown task kind");
}

TaskKind task_from(const std::string& name) {
    if (name == "toroidal_transport") return TaskKind::toroidal_transport;
    if (name == "poisson_field") return TaskKind::poisson_field;
    if (name == "harmonic_recovery") return TaskKind::harmonic_recovery;
    throw ConfigError("unknown task: " + name);
}

bool is_vector_task(TaskKind kind) {
    return kind != TaskKind::toroidal_transport;
}

Vec transport_reference(const DecOperators& ops, const Vec& u0,
                        const Vec& velocity, double nu, double horizon,
                        int steps) {
    const auto& c = *ops.complex;
    const auto n0 = c.count(0);
    const auto n1 = c.count(1);
    if (u0.size() != n0 || velocity.size() != n1)
        throw DimensionMismatch("transport: u0 must live on vertices and "
                                "velocity on edges");
    if (steps < 1 || horizon <= 0.0 || nu < 0.0)
        throw InvalidParameter("transport: needs steps >= 1, horizon > 0, "
                               "nu >= 0");

    MeshGeometry geom = compute_geometry(c);
    const Vec& len = geom.volumes[1];
    const double dt = horizon / steps;
    const double h_min = len.minCoeff();
    const double speed = (velocity.cwiseAbs().cwiseQuotient(len)).maxCoeff();
    if (speed * dt / h_min >= 0.5)
        throw CflViolation("transport: CFL number " +
                           std::to_string(speed * dt / h_min) +
                           " exceeds 0.5; raise steps or lower the speed");

    const Vec& mass = ops.stars[0].diag;               // *_0
    const Vec flux_q = ops.stars[1].diag.cwiseProduct(velocity);  // *_1 v

    std::vector<std::int32_t> tail(static_cast<std::size_t>(n1));
    std::vector<std::int32_t> head(static_cast<std::size_t>(n1));
    for (std::int64_t e = 0; e < n1; ++e) {
        auto v = c.simplex(1, e);
        tail[static_cast<std::size_t>(e)] = v[0];
        head[static_cast<std::size_t>(e)] = v[1];
    }

    Eigen::SimplicialLDLT<SpMat> diffusion;
    if (nu > 0.0) {
        // (*_0 + nu dt B_1 *_1 B_1^T) u = *_0 u_adv, kept symmetric positive
        // definite; B_1^T = d_0.
        SpMat dt0 = ops.d[0].transpose();
        SpMat a = dt0 * ops.stars[1].diag.asDiagonal();
        a = a * ops.d[0];
        a *= nu * dt;
        SpMat m(n0, n0);
        m.setIdentity();
        m = mass.asDiagonal() * m;
        a += m;
        diffusion.compute(a);
        if (diffusion.info() != Eigen::Success)
            throw SolverFailure("transport: diffusion factorization failed");
    }

    Vec u = u0;
    Vec gain = Vec::Zero(n0);
    for (int s = 0; s < steps; ++s) {
        gain.setZero();
        for (std::int64_t e = 0; e < n1; ++e) {
            const auto t = tail[static_cast<std::size_t>(e)];
            const auto h = head[static_cast<std::size_t>(e)];
            const double q = flux_q(e);
            const double f = q * (q >= 0.0 ? u(t) : u(h));
            gain(t) -= f;
            gain(h) += f;
        }
        u += dt * gain.cwiseQuotient(mass);
        if (nu > 0.0) {
            const Vec rhs = mass.cwiseProduct(u);
            u = diffusion.solve(rhs);
            if (diffusion.info() != Eigen::Success)
                throw SolverFailure("transport: diffusion solve failed");
        }
    }
    return u;
}

Vec rotational_velocity(const DecOperators& ops, double v_max) {
    if (v_max < 0.0)
        throw InvalidParameter("rotational velocity: v_max must be >= 0");
    const auto n1 = ops.complex->count(1);
    if (v_max == 0.0) return Vec::Zero(n1);

    auto spec = eigensolve(ops, 1, std::min<int>(6, static_cast<int>(n1)));
    if (spec.betti() < 1)
        throw InvalidParameter(
            "rotational velocity: the complex has no harmonic 1-forms");
    Vec v = spec.basis.col(spec.harmonic_indices[0]);
    if (spec.betti() > 1)
        v += 0.5 * spec.basis.col(spec.harmonic_indices[1]);

    MeshGeometry geom = compute_geometry(*ops.complex);
    const double speed =
        (v.cwiseAbs().cwiseQuotient(geom.volumes[1])).maxCoeff();
    return (v_max / speed) * v;
}

Vec poisson_potential(const DecOperators& ops, const Vec& rho) {
    const auto& c = *ops.complex;
    const auto n0 = c.count(0);
    if (rho.size() != n0)
        throw DimensionMismatch("poisson: source must be a 0-cochain");
    if (component_count(c) != 1)
        throw NonConnected("poisson: the complex must be connected");

    const Vec& mass = ops.stars[0].diag;
    const double total = mass.sum();
    Vec rho0 = (rho.array() - mass.dot(rho) / total).matrix();

    // A phi = *_0 rho with A = B_1 *_1 B_1^T, grounded at vertex 0 (the
    // dropped row is implied by the compatible right-hand side).
    SpMat dt0 = ops.d[0].transpose();
    SpMat a = dt0 * ops.stars[1].diag.asDiagonal();
    a = a * ops.d[0];
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(a.nonZeros()));
    for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it)
            if (it.row() > 0 && it.col() > 0)
                trips.emplace_back(static_cast<int>(it.row()) - 1,
                                   static_cast<int>(it.col()) - 1, it.value());
    SpMat an(n0 - 1, n0 - 1);
    an.setFromTriplets(trips.begin(), trips.end());

    Eigen::SimplicialLDLT<SpMat> solver(an);
    if (solver.info() != Eigen::Success)
        throw SingularSystem("poisson: factorization failed");
    Vec b = mass.cwiseProduct(rho0);
    Vec phi = Vec::Zero(n0);
    phi.tail(n0 - 1) = solver.solve(Vec(b.tail(n0 - 1)));
    if (solver.info() != Eigen::Success)
        throw SingularSystem("poisson: solve failed");

    const double rel = (Vec(ops.lap[0] * phi) - rho0).norm() /
                       std::max(rho0.norm(), 1e-300);
    if (rel >= 1e-9)
        throw SingularSystem("poisson: residual " + std::to_string(rel) +
                             " exceeds 1e-9");
    phi.array() -= mass.dot(phi) / total;
    return phi;
}

Dataset gen_toroidal_transport(const TaskConfig& cfg) {
    check_common(cfg);
    DecOperators ops = torus_ops(cfg);
    Dataset ds = start_dataset(cfg, ops.complex, 0, 0);

    const auto n0 = ops.complex->count(0);
    auto spec0 = eigensolve(ops, 0,
                            std::min<int>(cfg.low_modes + 1,
                                          static_cast<int>(n0)));
    Vec v = rotational_velocity(ops, cfg.v_max);
    const auto& coords = ops.complex->coords;

    for (int i = 0; i < cfg.n_samples; ++i) {
        const std::uint64_t s = sample_seed(cfg.seed, i);
        std::mt19937_64 rng(s);
        Vec u0 = low_mode_mix(rng, spec0.basis, cfg.low_modes + 1);
        const int bumps = 1 + bounded(rng, 3);
        for (int b = 0; b < bumps; ++b) {
            const int center = bounded(rng, static_cast<int>(n0));
            const double sigma = uniform_in(rng, 0.15, 0.35);
            const double amp =
                uniform_in(rng, 0.5, 1.5) * (uniform01(rng) < 0.5 ? -1 : 1);
            const Eigen::RowVector3d ctr = coords.row(center);
            Vec d2 = (coords.rowwise() - ctr).rowwise().squaredNorm();
            u0 += amp * (-d2 / (2.0 * sigma * sigma)).array().exp().matrix();
        }
        Vec ut = transport_reference(ops, u0, v, cfg.nu, cfg.horizon,
                                     cfg.steps);
        ds.samples.push_back(
            Sample{Cochain{0, std::move(u0)}, Cochain{0, std::move(ut)}, s});
    }
    assign_splits(ds, cfg.seed);
    return ds;
}

Dataset gen_poisson_field(const TaskConfig& cfg) {
    check_common(cfg);
    DecOperators ops = torus_ops(cfg);
    Dataset ds = start_dataset(cfg, ops.complex, 0, 1);

    const auto n0 = ops.complex->count(0);
    auto spec0 = eigensolve(ops, 0,
                            std::min<int>(cfg.low_modes + 1,
                                          static_cast<int>(n0)));
    HodgeSpectrum spec1;
    if (cfg.with_harmonic)
        spec1 = eigensolve(ops, 1, 6);

    const Vec& mass = ops.stars[0].diag;
    const double total = mass.sum();

    for (int i = 0; i < cfg.n_samples; ++i) {
        const std::uint64_t s = sample_seed(cfg.seed, i);
        std::mt19937_64 rng(s);
        Vec rho = low_mode_mix(rng, spec0.basis, cfg.low_modes + 1);
        rho += 0.2 * gaussian_vec(rng, n0, 1.0);
        rho.array() -= mass.dot(rho) / total;

        Vec phi = poisson_potential(ops, rho);
        Vec field = -(ops.d[0] * phi);
        if (cfg.with_harmonic && spec1.betti() > 0)
            for (int h : spec1.harmonic_indices)
                field += normal01(rng) * spec1.basis.col(h);

        ds.samples.push_back(Sample{Cochain{0, std::move(rho)},
                                    Cochain{1, std::move(field)}, s});
    }
    assign_splits(ds, cfg.seed);
    return ds;
}

Dataset gen_harmonic_recovery(const TaskConfig& cfg) {
    check_common(cfg);
    if (cfg.noise_scale < 0.0)
        throw InvalidParameter("harmonic recovery: noise_scale must be >= 0");
    DecOperators ops = torus_ops(cfg);
    Dataset ds = start_dataset(cfg, ops.complex, 1, 1);

    auto spec1 = eigensolve(ops, 1, 6);
    if (spec1.betti() < 1)
        throw InvalidParameter("harmonic recovery: needs b_1 >= 1");
    auto spec0 = eigensolve(ops, 0,
                            std::min<int>(cfg.low_modes + 1,
                                          static_cast<int>(ops.complex->count(0))));
    auto spec2 = eigensolve(ops, 2,
                            std::min<int>(cfg.low_modes,
                                          static_cast<int>(ops.complex->count(2))));
    const Vec& star1 = ops.stars[1].diag;
    auto norm1 = [&](const Vec& w) {
        return std::sqrt(w.dot(star1.cwiseProduct(w)));
    };

    for (int i = 0; i < cfg.n_samples; ++i) {
        const std::uint64_t s = sample_seed(cfg.seed, i);
        std::mt19937_64 rng(s);

        Vec h = Vec::Zero(ops.complex->count(1));
        do {
            h.setZero();
            for (int k : spec1.harmonic_indices)
                h += normal01(rng) * spec1.basis.col(k);
        } while (norm1(h) < 1e-3);

        Vec exact = ops.d[0] * low_mode_mix(rng, spec0.basis, cfg.low_modes + 1);
        Vec coexact = ops.apply_delta(
            Cochain{2, low_mode_mix(rng, spec2.basis, cfg.low_modes)}).values;
        Vec noise = exact + coexact;
        const double n_norm = norm1(noise);
        if (n_norm > 0.0)
            noise *= cfg.noise_scale * norm1(h) / n_norm;

        ds.samples.push_back(
            Sample{Cochain{1, h + noise}, Cochain{1, h}, s});
    }
    assign_splits(ds, cfg.seed);
    return ds;
}

Dataset generate_dataset(const TaskConfig& cfg) {
    switch (cfg.kind) {
        case TaskKind::toroidal_transport: return gen_toroidal_transport(cfg);
        case TaskKind::poisson_field: return gen_poisson_field(cfg);
        case TaskKind::harmonic_recovery: return gen_harmonic_recovery(cfg);
    }
    throw InvalidParameter("unknown task kind");
}

Dataset refine_and_transfer(const TaskConfig& cfg, double factor) {
    if (factor <= 0.0)
        throw InvalidParameter("refine: factor must be positive");
    TaskConfig fine = cfg;
    fine.nx = static_cast<int>(std::lround(cfg.nx * factor));
    fine.ny = static_cast<int>(std::lround(cfg.ny * factor));
    return generate_dataset(fine);
}

namespace {

nlohmann::json cochain_json(const Cochain& w) {
    nlohmann::json j;
    j["degree"] = w.degree;
    j["values"] = std::vector<double>(w.values.data(),
                                      w.values.data() + w.values.size());
    return j;
}

Cochain cochain_from(const nlohmann::json& j) {
    Cochain w;
    w.degree = j.at("degree").get<int>();
    auto vals = j.at("values").get<std::vector<double>>();
    w.values = Eigen::Map<const Vec>(vals.data(),
                                     static_cast<Eigen::Index>(vals.size()));
    return w;
}

void write_split(const Dataset& ds, const std::vector<int>& idx,
                 const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path + ": cannot open for writing");
    for (int i : idx) {
        const Sample& s = ds.samples[static_cast<std::size_t>(i)];
        nlohmann::json j;
        j["seed"] = s.seed;
        j["input"] = cochain_json(s.input);
        j["target"] = cochain_json(s.target);
        out << j.dump() << "\n";
    }
    if (!out) throw IoError(path + ": write failed");
}

std::vector<Sample> read_split(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path + ": cannot open");
    std::vector<Sample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ParseError(path + ": malformed JSON line " +
                             std::to_string(out.size() + 1));
        Sample s;
        s.seed = j.at("seed").get<std::uint64_t>();
        s.input = cochain_from(j.at("input"));
        s.target = cochain_from(j.at("target"));
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_off(*ds.complex, dir + "/complex.off");

    nlohmann::json j;
    j["version"] = 1;
    j["kind"] = task_name(ds.kind);
    j["complex_hash"] = ds.complex_id;
    j["complex_file"] = "complex.off";
    j["input_degree"] = ds.input_degree;
    j["target_degree"] = ds.target_degree;
    j["splits"] = {{"train", ds.train_idx.size()},
                   {"val", ds.val_idx.size()},
                   {"test", ds.test_idx.size()}};
    const TaskConfig& c = ds.config;
    j["config"] = {{"kind", task_name(c.kind)},
                   {"nx", c.nx},
                   {"ny", c.ny},
                   {"n_samples", c.n_samples},
                   {"seed", c.seed},
                   {"nu", c.nu},
                   {"horizon", c.horizon},
                   {"steps", c.steps},
                   {"v_max", c.v_max},
                   {"with_harmonic", c.with_harmonic},
                   {"noise_scale", c.noise_scale},
                   {"low_modes", c.low_modes}};

    std::ofstream out(dir + "/dataset.json");
    if (!out) throw IoError(dir + "/dataset.json: cannot open for writing");
    out << j.dump(2) << "\n";
    if (!out) throw IoError(dir + "/dataset.json: write failed");

    write_split(ds, ds.train_idx, dir + "/train.jsonl");
    write_split(ds, ds.val_idx, dir + "/val.jsonl");
    write_split(ds, ds.test_idx, dir + "/test.jsonl");
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream in(dir + "/dataset.json");
    if (!in) throw IoError(dir + "/dataset.json: cannot open");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw ParseError(dir + "/dataset.json: malformed JSON");
    if (!j.contains("version") || j["version"].get<int>() != 1)
        throw ParseError(dir + "/dataset.json: unsupported version");

    Dataset ds;
    ds.kind = task_from(j.at("kind").get<std::string>());
    ds.input_degree = j.at("input_degree").get<int>();
    ds.target_degree = j.at("target_degree").get<int>();

    const auto& c = j.at("config");
    ds.config.kind = task_from(c.at("kind").get<std::string>());
    ds.config.nx = c.at("nx").get<int>();
    ds.config.ny = c.at("ny").get<int>();
    ds.config.n_samples = c.at("n_samples").get<int>();
    ds.config.seed = c.at("seed").get<std::uint64_t>();
    ds.config.nu = c.at("nu").get<double>();
    ds.config.horizon = c.at("horizon").get<double>();
    ds.config.steps = c.at("steps").get<int>();
    ds.config.v_max = c.at("v_max").get<double>();
    ds.config.with_harmonic = c.at("with_harmonic").get<bool>();
    ds.config.noise_scale = c.at("noise_scale").get<double>();
    ds.config.low_modes = c.at("low_modes").get<int>();

    ds.complex = std::make_shared<const OrientedSimplicialComplex>(
        load_off(dir + "/" + j.at("complex_file").get<std::string>()));
    ds.complex_id = hash_string(ds.complex->content_hash());
    if (ds.complex_id != j.at("complex_hash").get<std::string>())
        throw HashMismatch(dir + ": stored complex hashes to " +
                           ds.complex_id + " but the manifest says " +
                           j.at("complex_hash").get<std::string>());

    auto train = read_split(dir + "/train.jsonl");
    auto val = read_split(dir + "/val.jsonl");
    auto test = read_split(dir + "/test.jsonl");
    if (train.size() != j.at("splits").at("train").get<std::size_t>() ||
        val.size() != j.at("splits").at("val").get<std::size_t>() ||
        test.size() != j.at("splits").at("test").get<std::size_t>())
        throw ParseError(dir + ": split sizes disagree with the manifest");

    // Samples are re-packed in train | val | test order.
    auto append = [&](std::vector<Sample>& src, std::vector<int>& idx) {
        for (auto& s : src) {
            check_degree(*ds.complex, s.input, "dataset input");
            check_degree(*ds.complex, s.target, "dataset target");
            if (s.input.degree != ds.input_degree ||
                s.target.degree != ds.target_degree)
                throw ParseError(dir + ": sample degrees disagree with the "
                                 "manifest");
            idx.push_back(static_cast<int>(ds.samples.size()));
            ds.samples.push_back(std::move(s));
        }
    };
    append(train, ds.train_idx);
    append(val, ds.val_idx);
    append(test, ds.test_idx);
    return ds;
}

} // namespace hsdop
