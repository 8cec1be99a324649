#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "polariscope/angular.hpp"
#include "polariscope/forward.hpp"
#include "support/oracles.hpp"

using namespace polariscope;

namespace {

const HalfInt h0 = HalfInt::whole(0);
const HalfInt h1 = HalfInt::whole(1);
const HalfInt half = HalfInt::from_twice(1);

std::mt19937_64 rng_for(uint64_t seed) { return std::mt19937_64(seed); }

EulerAngles random_angles(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uphi(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> uct(-1.0, 1.0);
    return EulerAngles{uphi(rng), std::acos(uct(rng)), uphi(rng)};
}

Direction random_direction(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uphi(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> uct(-1.0, 1.0);
    return Direction{std::acos(uct(rng)), uphi(rng)};
}

} // namespace

TEST_CASE("half-integer labels") {
    CHECK(HalfInt::from_value(0.5).twice == 1);
    CHECK(HalfInt::from_value(2.0).twice == 4);
    CHECK_THROWS_AS(HalfInt::from_value(0.3), std::invalid_argument);
    CHECK(half.is_integer() == false);
    CHECK(h1.is_integer() == true);
    CHECK((half + half) == h1);
    CHECK(valid_jm(h1, HalfInt::whole(-1)));
    CHECK(!valid_jm(h1, half));          // parity mismatch
    CHECK(!valid_jm(half, HalfInt::from_twice(3))); // |m| > j
    CHECK(half.str() == "1/2");
    CHECK(HalfInt::from_twice(-3).str() == "-3/2");
}

TEST_CASE("ln_factorial against exact and lgamma references") {
    CHECK(ln_factorial(0) == 0.0);
    CHECK(ln_factorial(1) == 0.0);
    CHECK(ln_factorial(10) == doctest::Approx(std::log(3628800.0)).epsilon(1e-15));
    for (int n = 2; n <= 200; ++n) {
        const double reference = static_cast<double>(std::lgammal(n + 1.0L));
        CHECK(std::abs(ln_factorial(n) - reference) / reference < 1e-14);
    }
    // Stirling branch
    for (int n : {201, 250, 400}) {
        const double reference = static_cast<double>(std::lgammal(n + 1.0L));
        CHECK(std::abs(ln_factorial(n) - reference) / reference < 1e-13);
    }
    CHECK_THROWS_AS(ln_factorial(-1), std::invalid_argument);
}

TEST_CASE("binomial coefficients") {
    CHECK(binomial(0, 0) == 1.0);
    CHECK(binomial(5, 2) == 10.0);
    CHECK(binomial(13, 5) == 1287.0);
    CHECK(binomial(3, 5) == 0.0);
    CHECK(binomial(3, -1) == 0.0);
}

TEST_CASE("clebsch_gordan reference values") {
    CHECK(clebsch_gordan(half, half, half, -half, h1, h0) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(clebsch_gordan(half, half, half, half, h1, h0) == 0.0); // M != m1 + m2
    CHECK(clebsch_gordan(h1, h0, h1, h0, h1, h0) == 0.0);         // antisymmetric J=1
    CHECK(clebsch_gordan(half, -half, half, half, h0, h0) ==
          doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(clebsch_gordan(half, h1, half, -half, h1, h0), std::invalid_argument);
}

TEST_CASE("clebsch_gordan against the coupled-basis oracle") {
    for (int twoj1 = 0; twoj1 <= 4; ++twoj1) {
        for (int twoj2 = 0; twoj2 <= 4; ++twoj2) {
            const HalfInt j1 = HalfInt::from_twice(twoj1);
            const HalfInt j2 = HalfInt::from_twice(twoj2);
            oracle::CoupledBasisCg reference(j1, j2);
            for (int twoJ = std::abs(twoj1 - twoj2); twoJ <= twoj1 + twoj2; twoJ += 2) {
                for (int twoM = -twoJ; twoM <= twoJ; twoM += 2) {
                    for (int twom1 = -twoj1; twom1 <= twoj1; twom1 += 2) {
                        const int twom2 = twoM - twom1;
                        if (std::abs(twom2) > twoj2) continue;
                        const HalfInt J = HalfInt::from_twice(twoJ);
                        const HalfInt M = HalfInt::from_twice(twoM);
                        const HalfInt m1 = HalfInt::from_twice(twom1);
                        const HalfInt m2 = HalfInt::from_twice(twom2);
                        const double mine = clebsch_gordan(j1, m1, j2, m2, J, M);
                        const double ref = reference.coefficient(J, M, m1, m2);
                        CHECK(mine == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
                    }
                }
            }
        }
    }
}

TEST_CASE("clebsch_gordan orthogonality of the stretched-pair rows") {
    // sum_q C^{S0}_{Kq,K-q} C^{L0}_{Kq,K-q} = delta_SL
    for (int twoK = 1; twoK <= 6; ++twoK) {
        const HalfInt K = HalfInt::from_twice(twoK);
        for (int S = 0; S <= twoK; ++S) {
            for (int L = 0; L <= twoK; ++L) {
                double sum = 0.0;
                for (int twoq = -twoK; twoq <= twoK; twoq += 2) {
                    const HalfInt q = HalfInt::from_twice(twoq);
                    sum += clebsch_gordan(K, q, K, -q, HalfInt::whole(S), h0) *
                           clebsch_gordan(K, q, K, -q, HalfInt::whole(L), h0);
                }
                CHECK(sum == doctest::Approx(S == L ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
            }
        }
    }
}

TEST_CASE("clebsch_gordan full orthonormality for j1, j2 <= 2") {
    for (int twoj1 : {1, 2, 3, 4}) {
        for (int twoj2 : {1, 2, 4}) {
            const HalfInt j1 = HalfInt::from_twice(twoj1);
            const HalfInt j2 = HalfInt::from_twice(twoj2);
            // rows (J, M) vs columns (m1, m2): check row orthonormality
            for (int twoJ = std::abs(twoj1 - twoj2); twoJ <= twoj1 + twoj2; twoJ += 2) {
                for (int twoJp = std::abs(twoj1 - twoj2); twoJp <= twoj1 + twoj2; twoJp += 2) {
                    for (int twoM = -std::min(twoJ, twoJp); twoM <= std::min(twoJ, twoJp);
                         twoM += 2) {
                        double sum = 0.0;
                        for (int twom1 = -twoj1; twom1 <= twoj1; twom1 += 2) {
                            const int twom2 = twoM - twom1;
                            if (std::abs(twom2) > twoj2) continue;
                            sum += clebsch_gordan(j1, HalfInt::from_twice(twom1), j2,
                                                  HalfInt::from_twice(twom2),
                                                  HalfInt::from_twice(twoJ),
                                                  HalfInt::from_twice(twoM)) *
                                   clebsch_gordan(j1, HalfInt::from_twice(twom1), j2,
                                                  HalfInt::from_twice(twom2),
                                                  HalfInt::from_twice(twoJp),
                                                  HalfInt::from_twice(twoM));
                        }
                        CHECK(sum ==
                              doctest::Approx(twoJ == twoJp ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
                    }
                }
            }
        }
    }
}

TEST_CASE("wigner_small_d identities") {
    // zero rotation is the identity
    for (int twoj : {1, 2, 3, 4}) {
        const HalfInt j = HalfInt::from_twice(twoj);
        const Eigen::MatrixXd d = wigner_d_matrix(j, 0.0);
        CHECK((d - Eigen::MatrixXd::Identity(d.rows(), d.cols())).cwiseAbs().maxCoeff() < 1e-15);
    }
    // spin-1/2 corner entry
    auto rng = rng_for(11);
    std::uniform_real_distribution<double> uth(0.0, kPi);
    for (int i = 0; i < 20; ++i) {
        const double theta = uth(rng);
        CHECK(wigner_small_d(half, half, half, theta) ==
              doctest::Approx(std::cos(0.5 * theta)).epsilon(1e-14));
    }
    // row norms are 1 for j <= 4
    for (int twoj = 1; twoj <= 8; ++twoj) {
        const HalfInt j = HalfInt::from_twice(twoj);
        const Eigen::MatrixXd d = wigner_d_matrix(j, uth(rng));
        for (int r = 0; r < d.rows(); ++r)
            CHECK(d.row(r).norm() == doctest::Approx(1.0).epsilon(1e-13));
    }
}

TEST_CASE("wigner_small_d against the matrix-exponential oracle") {
    auto rng = rng_for(12);
    std::uniform_real_distribution<double> uth(0.0, kPi);
    for (int twoj = 0; twoj <= 8; ++twoj) {
        const HalfInt j = HalfInt::from_twice(twoj);
        for (int rep = 0; rep < 4; ++rep) {
            const double theta = uth(rng);
            const Eigen::MatrixXd mine = wigner_d_matrix(j, theta);
            const Eigen::MatrixXd ref = oracle::wigner_d_expm(j, theta);
            CHECK((mine - ref).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("wigner_small_d composes over theta") {
    auto rng = rng_for(13);
    std::uniform_real_distribution<double> uth(0.0, 0.5 * kPi);
    for (int twoj = 1; twoj <= 6; ++twoj) {
        const HalfInt j = HalfInt::from_twice(twoj);
        const double t1 = uth(rng), t2 = uth(rng);
        const Eigen::MatrixXd lhs = wigner_d_matrix(j, t1) * wigner_d_matrix(j, t2);
        const Eigen::MatrixXd rhs = wigner_d_matrix(j, t1 + t2);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-11);
    }
}

TEST_CASE("wigner_D identity, unitarity, and the harmonic identity") {
    const EulerAngles id{};
    CHECK(std::abs(wigner_D(h1, h0, h0, id) - Complex(1, 0)) < 1e-15);
    CHECK(std::abs(wigner_D(h1, h1, h0, id)) < 1e-15);

    auto rng = rng_for(14);
    for (int twoj = 1; twoj <= 6; ++twoj) {
        const HalfInt j = HalfInt::from_twice(twoj);
        const EulerAngles g = random_angles(rng);
        const Eigen::MatrixXcd D = wigner_D_matrix(j, g);
        CHECK((D * D.adjoint() - Eigen::MatrixXcd::Identity(D.rows(), D.cols()))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }

    // D^L_{m0}(phi, theta, psi) = sqrt(4 pi / (2L+1)) conj(Y_Lm(theta, phi))
    for (int L = 0; L <= 4; ++L) {
        for (int rep = 0; rep < 5; ++rep) {
            const EulerAngles g = random_angles(rng);
            for (int m = -L; m <= L; ++m) {
                const Complex lhs = wigner_D(HalfInt::whole(L), HalfInt::whole(m), h0, g);
                const Complex rhs = std::sqrt(4.0 * kPi / (2.0 * L + 1.0)) *
                                    std::conj(spherical_harmonic(L, m, Direction{g.theta, g.phi}));
                CHECK(std::abs(lhs - rhs) < 1e-12);
            }
        }
    }
}

TEST_CASE("wigner_D composition through the 2x2 representation") {
    auto rng = rng_for(15);
    for (int rep = 0; rep < 6; ++rep) {
        const EulerAngles g1 = random_angles(rng);
        const EulerAngles g2 = random_angles(rng);
        const Eigen::Matrix2cd u =
            wigner_D_matrix(half, g1) * wigner_D_matrix(half, g2);
        const EulerAngles g12 = su2_to_euler(ModeUnitary{u});
        for (int twoj : {1, 2, 3, 4}) {
            const HalfInt j = HalfInt::from_twice(twoj);
            const Eigen::MatrixXcd lhs = wigner_D_matrix(j, g1) * wigner_D_matrix(j, g2);
            const Eigen::MatrixXcd rhs = wigner_D_matrix(j, g12);
            const double direct = (lhs - rhs).cwiseAbs().maxCoeff();
            const double flipped = (lhs + rhs).cwiseAbs().maxCoeff();
            if (twoj % 2 == 0) {
                CHECK(direct < 1e-11); // integer spins are blind to the SU(2) sign
            } else {
                CHECK(std::min(direct, flipped) < 1e-11);
            }
        }
    }
}

TEST_CASE("euler_inverse undoes a rotation") {
    auto rng = rng_for(16);
    for (int rep = 0; rep < 8; ++rep) {
        const EulerAngles g = random_angles(rng);
        const EulerAngles gi = euler_inverse(g);
        for (int twoj : {2, 4}) {
            const HalfInt j = HalfInt::from_twice(twoj);
            const Eigen::MatrixXcd prod = wigner_D_matrix(j, g) * wigner_D_matrix(j, gi);
            CHECK((prod - Eigen::MatrixXcd::Identity(prod.rows(), prod.cols()))
                      .cwiseAbs()
                      .maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("spherical harmonics") {
    auto rng = rng_for(17);
    const Direction any = random_direction(rng);
    CHECK(std::abs(spherical_harmonic(0, 0, any) - Complex(1.0 / std::sqrt(4.0 * kPi), 0.0)) <
          1e-15);

    for (int rep = 0; rep < 10; ++rep) {
        const Direction d = random_direction(rng);
        CHECK(std::abs(spherical_harmonic(1, 0, d) -
                       Complex(std::sqrt(3.0 / (4.0 * kPi)) * std::cos(d.theta), 0.0)) < 1e-14);
        // conjugation symmetry
        for (int L = 1; L <= 4; ++L)
            for (int m = -L; m <= L; ++m)
                CHECK(std::abs(std::conj(spherical_harmonic(L, m, d)) -
                               (m % 2 == 0 ? 1.0 : -1.0) * spherical_harmonic(L, -m, d)) < 1e-14);
        // Rodrigues oracle
        for (int L = 0; L <= 6; ++L)
            for (int m = -L; m <= L; ++m)
                CHECK(std::abs(spherical_harmonic(L, m, d) -
                               oracle::spherical_harmonic_rodrigues(L, m, d)) < 1e-12);
    }
    CHECK_THROWS_AS(spherical_harmonic(1, 2, any), std::invalid_argument);
}

TEST_CASE("legendre polynomials") {
    auto rng = rng_for(18);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        const double x = ux(rng);
        CHECK(legendre_P(0, x) == 1.0);
        CHECK(legendre_P(1, x) == x);
        CHECK(legendre_P(2, x) == doctest::Approx(0.5 * (3.0 * x * x - 1.0)).epsilon(1e-14));
    }
    for (int L = 0; L <= 10; ++L) CHECK(legendre_P(L, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_NOTHROW(legendre_P(3, 1.0 + 0.5e-12)); // within slack
    CHECK_THROWS_AS(legendre_P(3, 1.1), std::domain_error);
}
