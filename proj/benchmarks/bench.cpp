#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "unifiedfl/clustering.hpp"
#include "unifiedfl/engine.hpp"
#include "unifiedfl/model_graph.hpp"
#include "unifiedfl/theta.hpp"

using namespace ufl;

namespace {

struct Fixture {
    ModelGraph graph;
    ThetaVector theta;
    Batch batch;
};

Fixture make_fixture(const std::string& arch) {
    const bool conv = arch.rfind("CNN", 0) == 0;
    const InputShape shape = conv ? InputShape{1, 8, 8} : InputShape{1, 1, 64};
    Fixture f;
    f.graph = build_model_graph(make_backbone(arch, shape, 4), 7);
    assign_groups(f.graph, 4, 4);
    f.theta = init_theta(4, 4);
    f.batch.n = 32;
    f.batch.dim = 64;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    f.batch.features.resize(f.batch.n * f.batch.dim);
    for (double& v : f.batch.features) v = u(rng);
    f.batch.labels.resize(f.batch.n);
    for (int& l : f.batch.labels) l = static_cast<int>(rng() % 4);
    return f;
}

void bench_forward(benchmark::State& state, const std::string& arch) {
    Fixture f = make_fixture(arch);
    for (auto _ : state) {
        const std::vector<double> logits =
            forward(f.graph, f.theta, f.batch.features, f.batch.n);
        benchmark::DoNotOptimize(logits.data());
    }
}

void bench_backward(benchmark::State& state, const std::string& arch) {
    Fixture f = make_fixture(arch);
    for (auto _ : state) {
        const GradientBundle g = backward(f.graph, f.theta, f.batch);
        benchmark::DoNotOptimize(g.d_weights.data());
    }
}

void bench_ward(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(18));
    for (auto& p : pts)
        for (double& c : p) c = u(rng);
    const DistanceMatrix d = pairwise_distances(pts);
    for (auto _ : state) {
        const LinkageTree t = ward_agglomerate(d);
        benchmark::DoNotOptimize(t.merges.data());
    }
}

void bench_silhouette_cut(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> pts(n, std::vector<double>(18));
    for (auto& p : pts)
        for (double& c : p) c = u(rng);
    const DistanceMatrix d = pairwise_distances(pts);
    for (auto _ : state) {
        const Partition p = cut_by_silhouette(ward_agglomerate(d), d, 6);
        benchmark::DoNotOptimize(p.assignment.data());
    }
}

}  // namespace

BENCHMARK_CAPTURE(bench_forward, mlp_a, std::string("MLP_a"));
BENCHMARK_CAPTURE(bench_forward, cnn_a, std::string("CNN_a"));
BENCHMARK_CAPTURE(bench_backward, mlp_a, std::string("MLP_a"));
BENCHMARK_CAPTURE(bench_backward, cnn_a, std::string("CNN_a"));
BENCHMARK(bench_ward)->Arg(16)->Arg(64);
BENCHMARK(bench_silhouette_cut)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
