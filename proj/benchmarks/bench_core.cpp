#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "hsdop/ambient.hpp"
#include "hsdop/dec.hpp"
#include "hsdop/model.hpp"
#include "hsdop/rng.hpp"
#include "hsdop/spectrum.hpp"

namespace {

using namespace hsdop;

ComplexPtr torus(int n) {
    return std::make_shared<const OrientedSimplicialComplex>(
        make_torus_grid(n, n));
}

void BM_AssembleDec(benchmark::State& state) {
    auto c = torus(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        auto ops = assemble_dec(c);
        benchmark::DoNotOptimize(ops.lap[1].nonZeros());
    }
}
BENCHMARK(BM_AssembleDec)->Arg(8)->Arg(16)->Arg(32);

void BM_Laplacian1Apply(benchmark::State& state) {
    auto c = torus(static_cast<int>(state.range(0)));
    auto ops = assemble_dec(c);
    Vec w = Vec::Random(c->count(1));
    for (auto _ : state) {
        Vec out = ops.lap[1] * w;
        benchmark::DoNotOptimize(out.sum());
    }
}
BENCHMARK(BM_Laplacian1Apply)->Arg(8)->Arg(16)->Arg(32);

void BM_Eigensolve1(benchmark::State& state) {
    auto c = torus(static_cast<int>(state.range(0)));
    auto ops = assemble_dec(c);
    for (auto _ : state) {
        auto spec = eigensolve(ops, 1, 48);
        benchmark::DoNotOptimize(spec.eigenvalues.sum());
    }
}
BENCHMARK(BM_Eigensolve1)->Arg(8)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

struct ModelFixture {
    ComplexPtr c;
    DecOperators ops;
    SpectralSubspace sub;
    std::unique_ptr<HsdModel> model;
    Cochain w0;
    Cochain cond;

    explicit ModelFixture(int n)
        : c(torus(n)), ops(assemble_dec(c)) {
        auto s1 = eigensolve(ops, 1, 48);
        auto s2 = eigensolve(ops, 2, 48);
        auto s0 = eigensolve(ops, 0, 48);
        sub = build_subspace(ops, s1, &s2, &s0);
        ModelConfig mc;
        mc.degree = 1;
        mc.cond_degree = 1;
        mc.layers = 2;
        mc.base_hidden = 24;
        mc.fiber_depth = 2;
        mc.fiber_hidden = 8;
        mc.corrector_hidden = 16;
        mc.grid_res = Eigen::Vector3i::Constant(12);
        mc.modes = Eigen::Vector3i::Constant(3);
        model = std::make_unique<HsdModel>(&ops, &sub, mc, 1);
        std::mt19937_64 rng(2);
        w0 = Cochain{1, gaussian_vec(rng, c->count(1), 1.0)};
        cond = Cochain{1, gaussian_vec(rng, c->count(1), 1.0)};
    }
};

void BM_ModelForward(benchmark::State& state) {
    ModelFixture f(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        Cochain out = f.model->forward(f.w0, &f.cond);
        benchmark::DoNotOptimize(out.values.sum());
    }
}
BENCHMARK(BM_ModelForward)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ModelBackward(benchmark::State& state) {
    ModelFixture f(static_cast<int>(state.range(0)));
    const Vec star = f.ops.star(1);
    for (auto _ : state) {
        ad::Tape tape;
        std::vector<ad::Var> pvars;
        ad::Var out = f.model->forward_traced(tape, f.w0, &f.cond, &pvars);
        ad::Var loss = tape.sumsq_weighted(star, out);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.grad(pvars[0]).sum());
    }
}
BENCHMARK(BM_ModelBackward)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_SpectralConv(benchmark::State& state) {
    const int r = static_cast<int>(state.range(0));
    const Eigen::Vector3i res = Eigen::Vector3i::Constant(r);
    FftPlan3d plan(res);
    SpectralKernel k;
    k.modes = Eigen::Vector3i::Constant(4);
    k.cin = k.cout = 3;
    std::mt19937_64 rng(3);
    k.weights = CMat::Zero(k.num_modes(), 9);
    for (Eigen::Index t = 0; t < k.weights.rows(); ++t)
        for (Eigen::Index j = 0; j < 9; ++j)
            k.weights(t, j) = std::complex<double>(
                gaussian_vec(rng, 1, 1.0)(0), gaussian_vec(rng, 1, 1.0)(0));
    Mat field(res.prod(), 3);
    for (int ch = 0; ch < 3; ++ch)
        field.col(ch) = gaussian_vec(rng, res.prod(), 1.0);
    for (auto _ : state) {
        Mat out = spectral_conv(plan, k, field);
        benchmark::DoNotOptimize(out.sum());
    }
}
BENCHMARK(BM_SpectralConv)->Arg(12)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
