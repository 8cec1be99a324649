#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "polariscope/forward.hpp"

using namespace polariscope;

namespace {

const HalfInt h0 = HalfInt::whole(0);
const HalfInt h1 = HalfInt::whole(1);
const HalfInt half = HalfInt::from_twice(1);

EulerAngles random_angles(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uphi(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> uct(-1.0, 1.0);
    return EulerAngles{uphi(rng), std::acos(uct(rng)), uphi(rng)};
}

ModeUnitary haar_su2(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Vector4d x;
    for (int i = 0; i < 4; ++i) x(i) = gauss(rng);
    x.normalize();
    Eigen::Matrix2cd u;
    u << Complex(x(0), x(1)), Complex(x(2), x(3)), Complex(-x(2), x(3)), Complex(x(0), -x(1));
    return ModeUnitary{u};
}

TwoModeState single_photon_h() {
    Eigen::VectorXcd amps(2);
    amps << 1.0, 0.0;
    return single_layer(pure_layer_state(half, amps));
}

TwoModeState random_mixture(int two_s_max, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uw(0.2, 0.8);
    TwoModeState state;
    const HalfInt s1 = HalfInt::from_twice(1 + static_cast<int>(seed % two_s_max));
    const HalfInt s2 = HalfInt::from_twice(two_s_max);
    LayerState l1 = random_layer_state(s1, 1 + static_cast<int>(seed % s1.multiplicity()),
                                       seed * 13 + 1);
    LayerState l2 = random_layer_state(s2, s2.multiplicity(), seed * 17 + 2);
    if (s1 == s2) {
        state.layers = {l2};
        return state;
    }
    const double w = uw(rng);
    l1.weight = w;
    l2.weight = 1.0 - w;
    state.layers = {l1, l2};
    return state;
}

} // namespace

TEST_CASE("plate_unitary basics") {
    const ModeUnitary q0 = plate_unitary(PlateSetting::quarter(0.0));
    CHECK(std::abs(q0.u(0, 1)) < 1e-15);
    CHECK(std::abs(q0.u(1, 0)) < 1e-15);
    CHECK(q0.unitarity_defect() < 1e-14);

    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> uang(0.0, kPi);
    for (int rep = 0; rep < 20; ++rep) {
        const double a = uang(rng);
        const ModeUnitary q = plate_unitary(PlateSetting::quarter(a));
        const ModeUnitary h = plate_unitary(PlateSetting::half(a));
        CHECK(q.unitarity_defect() < 1e-14);
        CHECK(h.unitarity_defect() < 1e-14);
        // two quarter plates at the same axis compose to a half plate
        CHECK(ModeUnitary{q.u * q.u}.distance_up_to_phase(h) < 1e-13);
        // det = +1 after normalization
        const Complex det = q.u.determinant();
        CHECK(std::abs(det - Complex(1, 0)) < 1e-13);
    }
}

TEST_CASE("gadget_unitary composition") {
    CHECK_THROWS_AS(gadget_unitary(PlateSetting::half(0), PlateSetting::half(0),
                                   PlateSetting::quarter(0)),
                    std::invalid_argument);

    const ModeUnitary g =
        gadget_unitary(PlateSetting::quarter(0), PlateSetting::half(0), PlateSetting::quarter(0));
    CHECK(std::abs(g.u(0, 1)) < 1e-15); // all axes at zero: diagonal phase element
    CHECK(std::abs(g.u(1, 0)) < 1e-15);
    CHECK(std::abs(g.u.determinant() - Complex(1, 0)) < 1e-13);
}

TEST_CASE("gadget_decompose is universal") {
    // identity target
    const GadgetSettings id = gadget_decompose(ModeUnitary{Eigen::Matrix2cd::Identity()});
    CHECK(gadget_unitary(id.q1, id.h, id.q2)
              .distance_up_to_phase(ModeUnitary{Eigen::Matrix2cd::Identity()}) < 1e-9);

    // a plate already in the gadget family
    const ModeUnitary hp = plate_unitary(PlateSetting::half(kPi / 8.0));
    const GadgetSettings hs = gadget_decompose(hp);
    CHECK(gadget_unitary(hs.q1, hs.h, hs.q2).distance_up_to_phase(hp) < 1e-10);

    // 100 Haar-random SU(2) targets
    std::mt19937_64 rng(32);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const ModeUnitary target = haar_su2(rng);
        const GadgetSettings s = gadget_decompose(target);
        CHECK(s.q1.angle >= 0.0);
        CHECK(s.q1.angle < kPi);
        worst = std::max(worst,
                         gadget_unitary(s.q1, s.h, s.q2).distance_up_to_phase(target));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("su2_to_euler round trips") {
    CHECK(su2_to_euler(ModeUnitary{Eigen::Matrix2cd::Identity()}).theta == 0.0);

    const EulerAngles g{0.3, 1.1, -0.7};
    const ModeUnitary u{wigner_D_matrix(half, g)};
    const EulerAngles back = su2_to_euler(u);
    CHECK(back.phi == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(back.theta == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(back.psi == doctest::Approx(2.0 * kPi - 0.7).epsilon(1e-12));

    // gimbal-degenerate input: psi fixed to zero by convention
    const EulerAngles pole{1.0, 0.0, 0.0};
    const EulerAngles pb = su2_to_euler(ModeUnitary{wigner_D_matrix(half, EulerAngles{0.4, 0.0, 0.6})});
    (void)pole;
    CHECK(pb.psi == 0.0);
    CHECK(pb.phi == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(33);
    for (int rep = 0; rep < 50; ++rep) {
        const ModeUnitary target = haar_su2(rng);
        const EulerAngles angles = su2_to_euler(target);
        const Eigen::Matrix2cd rebuilt = wigner_D_matrix(half, angles);
        const double direct = (rebuilt - target.u).cwiseAbs().maxCoeff();
        const double flipped = (rebuilt + target.u).cwiseAbs().maxCoeff();
        CHECK(std::min(direct, flipped) < 1e-12); // double cover
        CHECK(angles.theta >= 0.0);
        CHECK(angles.theta <= kPi);
    }

    Eigen::Matrix2cd notsu2 = 2.0 * Eigen::Matrix2cd::Identity();
    CHECK_THROWS_AS(su2_to_euler(ModeUnitary{notsu2}), std::invalid_argument);
}

TEST_CASE("rotate_state") {
    const TwoModeState state = random_mixture(4, 77);
    const TwoModeState same = rotate_state(state, EulerAngles{});
    for (size_t i = 0; i < state.layers.size(); ++i)
        CHECK((state.layers[i].rho - same.layers[i].rho).cwiseAbs().maxCoeff() < 1e-15);

    std::mt19937_64 rng(34);
    for (int rep = 0; rep < 5; ++rep) {
        const TwoModeState rotated = rotate_state(state, random_angles(rng));
        for (size_t i = 0; i < state.layers.size(); ++i) {
            CHECK(rotated.layers[i].weight == state.layers[i].weight);
            CHECK(std::abs(rotated.layers[i].rho.trace().real() - 1.0) < 1e-12);
        }
        // per-layer photon totals are preserved
        double before = 0.0, after = 0.0;
        for (const auto& [count, p] : photon_number_distribution(state))
            before += p * (count.n_h + count.n_v);
        for (const auto& [count, p] : photon_number_distribution(rotated))
            after += p * (count.n_h + count.n_v);
        CHECK(before == doctest::Approx(after).epsilon(1e-12));
    }

    // |1,0> rotated by theta about y
    for (double theta : {0.3, 1.2, 2.5}) {
        const TwoModeState rotated =
            rotate_state(single_photon_h(), EulerAngles{0.0, theta, 0.0});
        for (const auto& [count, p] : photon_number_distribution(rotated)) {
            if (count == PhotonCount{1, 0})
                CHECK(p == doctest::Approx(std::cos(0.5 * theta) * std::cos(0.5 * theta))
                               .epsilon(1e-12));
        }
    }
}

TEST_CASE("intensity_moment_direct") {
    // identity rotation reads off the diagonal of G^K
    const TwoModeState state = random_mixture(3, 55);
    for (int twoK = 1; twoK <= 3; ++twoK) {
        const HalfInt K = HalfInt::from_twice(twoK);
        const CorrelationMatrix G = correlation_matrix(state, K);
        for (int a = 0; a < K.multiplicity(); ++a) {
            const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
            CHECK(intensity_moment_direct(state, TensorIndex(K, q), EulerAngles{}) ==
                  doctest::Approx(G.g(a, a).real()).epsilon(1e-12));
        }
    }

    // single photon: cos^2(theta/2)
    for (double theta : {0.2, 0.9, 1.7, 2.9}) {
        const double v = intensity_moment_direct(single_photon_h(), TensorIndex(half, half),
                                                 EulerAngles{0.0, theta, 0.0});
        CHECK(v == doctest::Approx(std::cos(0.5 * theta) * std::cos(0.5 * theta)).epsilon(1e-12));
    }

    // psi-invariance at fixed (theta, phi)
    std::mt19937_64 rng(35);
    const EulerAngles base = random_angles(rng);
    const double reference =
        intensity_moment_direct(state, TensorIndex(h1, h0), base);
    for (double psi = 0.0; psi < 2.0 * kPi; psi += 0.37) {
        const double v = intensity_moment_direct(
            state, TensorIndex(h1, h0), EulerAngles{base.phi, base.theta, psi});
        CHECK(std::abs(v - reference) < 1e-12);
    }
}

TEST_CASE("intensity moments: direct expectation equals multipole expansion") {
    // zero matrix -> zero everywhere
    const CorrelationMatrix zero{h1, Eigen::MatrixXcd::Zero(3, 3)};
    CHECK(intensity_moment_multipole(zero, h0, Direction{1.0, 2.0}) == 0.0);

    std::mt19937_64 rng(36);
    std::uniform_real_distribution<double> uphi(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> uct(-1.0, 1.0);

    // |1,0> at K = q = 1/2 via the multipole path
    const CorrelationMatrix g_half = correlation_matrix(single_photon_h(), half);
    for (double theta : {0.4, 1.3, 2.2}) {
        const double v = intensity_moment_multipole(g_half, half, Direction{theta, 0.8});
        CHECK(v == doctest::Approx(std::cos(0.5 * theta) * std::cos(0.5 * theta)).epsilon(1e-10));
    }

    // random states, all K and q, many directions; this one property pins
    // every sign and phase convention in the chain.
    double worst = 0.0;
    for (uint64_t seed = 0; seed < 12; ++seed) {
        const TwoModeState state = random_mixture(1 + static_cast<int>(seed % 6), 900 + seed);
        const int two_s_max = state.max_spin().twice;
        for (int twoK = 1; twoK <= two_s_max; ++twoK) {
            const HalfInt K = HalfInt::from_twice(twoK);
            const CorrelationMatrix G = correlation_matrix(state, K);
            for (int a = 0; a < K.multiplicity(); ++a) {
                const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
                for (int d = 0; d < 20; ++d) {
                    const double theta = std::acos(uct(rng));
                    const double phi = uphi(rng);
                    const double direct = intensity_moment_direct(
                        state, TensorIndex(K, q), EulerAngles{phi, theta, uphi(rng)});
                    const double multipole =
                        intensity_moment_multipole(G, q, Direction{theta, phi});
                    worst = std::max(worst, std::abs(direct - multipole));
                    CHECK(direct >= -1e-12); // noiseless positivity
                }
            }
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("sample_counts") {
    // vacuum draws are all (0,0)
    LayerState vac;
    vac.spin = h0;
    vac.weight = 1.0;
    vac.rho = Eigen::MatrixXcd::Ones(1, 1);
    const auto zeros = sample_counts(single_layer(vac), EulerAngles{}, 100, 1);
    for (const auto& c : zeros) CHECK(c == PhotonCount{0, 0});

    // |1,0> at theta = pi/2: half the draws land in (1,0)
    const long long shots = 10000;
    const auto draws =
        sample_counts(single_photon_h(), EulerAngles{0.0, kPi / 2.0, 0.0}, shots, 2);
    long long ones = 0;
    for (const auto& c : draws) ones += (c == PhotonCount{1, 0});
    const double frac = static_cast<double>(ones) / shots;
    const double sigma = 0.5 / std::sqrt(static_cast<double>(shots));
    CHECK(std::abs(frac - 0.5) < 5.0 * sigma);

    // determinism
    const auto again =
        sample_counts(single_photon_h(), EulerAngles{0.0, kPi / 2.0, 0.0}, shots, 2);
    CHECK(draws == again);

    CHECK_THROWS_AS(sample_counts(single_photon_h(), EulerAngles{}, 0, 1),
                    std::invalid_argument);
}

TEST_CASE("estimate_intensity") {
    const std::vector<PhotonCount> zeros(50, PhotonCount{0, 0});
    const auto [z_est, z_err] = estimate_intensity(zeros, TensorIndex(h1, h0));
    CHECK(z_est == 0.0);
    CHECK(z_err == 0.0);

    const std::vector<PhotonCount> pairs(20, PhotonCount{2, 0});
    const auto [p_est, p_err] = estimate_intensity(pairs, TensorIndex(h1, h1));
    CHECK(p_est == 1.0); // C(2,2) C(0,0)
    CHECK(p_err == 0.0);

    CHECK_THROWS_AS(estimate_intensity({}, TensorIndex(h1, h0)), std::invalid_argument);

    // Monte Carlo estimate converges to the direct value: sampling at the
    // inverse angles is what realizes Tr[rho R T T^dag R^dag] at the detectors.
    std::mt19937_64 rng(37);
    const TwoModeState state = random_mixture(2, 38);
    const EulerAngles g = random_angles(rng);
    const auto draws = sample_counts(state, euler_inverse(g), 100000, 3);
    for (int a = 0; a < 3; ++a) {
        const HalfInt q = HalfInt::from_twice(2 - 2 * a);
        const TensorIndex idx(h1, q);
        const auto [est, err] = estimate_intensity(draws, idx);
        const double truth = intensity_moment_direct(state, idx, g);
        if (err > 0.0)
            CHECK(std::abs(est - truth) < 5.0 * err);
        else
            CHECK(est == doctest::Approx(truth).epsilon(1e-12));
    }
}

TEST_CASE("estimator is unbiased across repetitions") {
    const TwoModeState state = random_mixture(2, 39);
    std::mt19937_64 rng(40);
    const EulerAngles g = random_angles(rng);
    const EulerAngles sample_at = euler_inverse(g);
    for (int twoK : {1, 2}) {
        const HalfInt K = HalfInt::from_twice(twoK);
        for (int a = 0; a < K.multiplicity(); ++a) {
            const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
            const TensorIndex idx(K, q);
            const double truth = intensity_moment_direct(state, idx, g);
            const int reps = 100;
            const long long shots = 2000;
            double mean = 0.0;
            double pooled_var = 0.0;
            for (int r = 0; r < reps; ++r) {
                const auto draws = sample_counts(state, sample_at, shots, 1000 + r);
                const auto [est, err] = estimate_intensity(draws, idx);
                mean += est;
                pooled_var += err * err;
            }
            mean /= reps;
            const double sigma_mean = std::sqrt(pooled_var) / reps;
            if (sigma_mean > 0.0)
                CHECK(std::abs(mean - truth) < 5.0 * sigma_mean);
            else
                CHECK(mean == doctest::Approx(truth).epsilon(1e-12));
        }
    }
}
