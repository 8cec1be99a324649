#include <benchmark/benchmark.h>

#include <random>

#include "polariscope/angular.hpp"

using namespace polariscope;

static void CgCachedLookup(benchmark::State& state) {
    const HalfInt K = HalfInt::from_twice(static_cast<int>(state.range(0)));
    // warm the cache once, then measure steady-state lookups
    for (int L = 0; L <= K.twice; ++L)
        for (int twoq = -K.twice; twoq <= K.twice; twoq += 2)
            clebsch_gordan(K, HalfInt::from_twice(twoq), K, HalfInt::from_twice(-twoq),
                           HalfInt::whole(L), HalfInt::whole(0));
    for (auto _ : state) {
        double acc = 0.0;
        for (int L = 0; L <= K.twice; ++L)
            for (int twoq = -K.twice; twoq <= K.twice; twoq += 2)
                acc += clebsch_gordan(K, HalfInt::from_twice(twoq), K,
                                      HalfInt::from_twice(-twoq), HalfInt::whole(L),
                                      HalfInt::whole(0));
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(CgCachedLookup)->Arg(2)->Arg(4)->Arg(6);

static void WignerDMatrix(benchmark::State& state) {
    const HalfInt j = HalfInt::from_twice(static_cast<int>(state.range(0)));
    const EulerAngles g{0.7, 1.2, 2.1};
    for (auto _ : state) {
        benchmark::DoNotOptimize(wigner_D_matrix(j, g));
    }
}
BENCHMARK(WignerDMatrix)->Arg(1)->Arg(4)->Arg(8);

static void SphericalHarmonicBand(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    const Direction dir{u(rng), u(rng)};
    for (auto _ : state) {
        Complex acc(0.0, 0.0);
        for (int m = -L; m <= L; ++m) acc += spherical_harmonic(L, m, dir);
        benchmark::DoNotOptimize(acc);
    }
}
BENCHMARK(SphericalHarmonicBand)->Arg(2)->Arg(6);

BENCHMARK_MAIN();
