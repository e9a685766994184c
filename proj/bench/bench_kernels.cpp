// Serial reference kernels against their OpenMP versions. Thread count comes
// from OMP_NUM_THREADS.

#include "elmer/auxiliary.hpp"
#include "elmer/kernels.hpp"
#include "elmer/moments.hpp"
#include "elmer/simulation.hpp"

#include <benchmark/benchmark.h>

#include <map>

using namespace elmer;

namespace {

struct Fixture {
    LinearMoments m;
    Eigen::VectorXd beta;
    Eigen::VectorXd lambda;
    RowMatrix g;
};

const Fixture& fixture(int n) {
    static std::map<int, Fixture> cache;
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    const auto sc = preset_scenario("C3", n);
    const auto ds = generate_dataset(sc, 1);
    const WorkingCovariance w{CovStructure::exchangeable, 1.0, 0.5};
    Fixture f;
    f.m = build_moments(ds, reduce_basis(ds, sc.beta_true, w), w);
    f.beta = sc.beta_true;
    f.lambda = Eigen::VectorXd::Constant(f.m.q, 0.01);
    kernels::serial::evaluate(f.m, f.beta, f.g);
    return cache.emplace(n, std::move(f)).first->second;
}

template <auto Fn>
void dual(benchmark::State& st) {
    const auto& f = fixture(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(Fn(f.g, f.lambda, 1.0 / f.m.n));
}

template <auto Fn>
void envelope(benchmark::State& st) {
    const auto& f = fixture(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(Fn(f.m, f.g, f.lambda));
}

template <auto Fn>
void evaluate(benchmark::State& st) {
    const auto& f = fixture(static_cast<int>(st.range(0)));
    RowMatrix g;
    for (auto _ : st) {
        Fn(f.m, f.beta, g);
        benchmark::DoNotOptimize(g.data());
    }
}

template <auto Fn>
void gram(benchmark::State& st) {
    const auto& f = fixture(static_cast<int>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(Fn(f.g));
}

}  // namespace

BENCHMARK(dual<kernels::serial::dual_terms>)->Name("dual_terms/serial")->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(dual<kernels::parallel::dual_terms>)->Name("dual_terms/parallel")->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(envelope<kernels::serial::envelope_terms>)->Name("envelope_terms/serial")->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(envelope<kernels::parallel::envelope_terms>)->Name("envelope_terms/parallel")->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(evaluate<kernels::serial::evaluate>)->Name("evaluate/serial")->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(evaluate<kernels::parallel::evaluate>)->Name("evaluate/parallel")->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(gram<kernels::serial::gram>)->Name("gram/serial")->Arg(500)->Arg(5000)->Arg(50000);
BENCHMARK(gram<kernels::parallel::gram>)->Name("gram/parallel")->Arg(500)->Arg(5000)->Arg(50000);

BENCHMARK_MAIN();
