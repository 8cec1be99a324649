#include <benchmark/benchmark.h>

#include "polariscope/reconstruction.hpp"

using namespace polariscope;

namespace {

TwoModeState test_state(int two_s) {
    const HalfInt S = HalfInt::from_twice(two_s);
    return single_layer(random_layer_state(S, S.multiplicity(), 42));
}

IntensityMomentSet moments_at(const TwoModeState& state, HalfInt K, const Direction& dir) {
    IntensityMomentSet set;
    set.K = K;
    set.direction = dir;
    set.values.resize(K.multiplicity());
    for (int a = 0; a < K.multiplicity(); ++a) {
        const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
        set.values[a] = intensity_moment_direct(state, TensorIndex(K, q),
                                                EulerAngles{dir.phi, dir.theta, 0.0});
    }
    set.std_errors.assign(K.multiplicity(), 0.0);
    return set;
}

} // namespace

static void IntensitySweep(benchmark::State& bench) {
    const int two_s = static_cast<int>(bench.range(0));
    const TwoModeState state = test_state(two_s);
    const HalfInt K = HalfInt::from_twice(two_s);
    int i = 0;
    for (auto _ : bench) {
        const Direction dir{0.1 + 0.01 * (i++ % 100), 0.7};
        benchmark::DoNotOptimize(moments_at(state, K, dir));
    }
}
BENCHMARK(IntensitySweep)->Arg(2)->Arg(4)->Arg(6);

static void ExactReconstruction(benchmark::State& bench) {
    const int two_k = static_cast<int>(bench.range(0));
    const TwoModeState state = test_state(two_k);
    const HalfInt K = HalfInt::from_twice(two_k);

    std::vector<MeasurementRecord> records;
    for (int L = 0; L <= K.twice; ++L) {
        const DirectionSet set = design_directions(L, 100 + L);
        for (const auto& dir : set.directions) records.push_back(moments_at(state, K, dir));
    }
    for (auto _ : bench) {
        benchmark::DoNotOptimize(reconstruct_correlations(records, K));
    }
}
BENCHMARK(ExactReconstruction)->Arg(1)->Arg(2)->Arg(4);

static void CorrelationMatrixBuild(benchmark::State& bench) {
    const int two_s = static_cast<int>(bench.range(0));
    const TwoModeState state = test_state(two_s);
    const HalfInt K = HalfInt::from_twice(std::max(1, two_s / 2));
    for (auto _ : bench) {
        benchmark::DoNotOptimize(correlation_matrix(state, K));
    }
}
BENCHMARK(CorrelationMatrixBuild)->Arg(2)->Arg(6)->Arg(10);

BENCHMARK_MAIN();
