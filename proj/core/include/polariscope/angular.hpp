#ifndef POLARISCOPE_ANGULAR_HPP
#define POLARISCOPE_ANGULAR_HPP

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "polariscope/half_int.hpp"

namespace polariscope {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// z-y-z active rotation angles.  All angular functions in this module use the
/// Condon-Shortley phase convention throughout; the D_{m0} <-> Y* identity is
/// what pins the convention, and the test suite checks it rather than assuming it.
struct EulerAngles {
    double phi = 0.0;
    double theta = 0.0;
    double psi = 0.0;

    /// phi, psi wrapped to [0, 2*pi); theta is expected in [0, pi] already.
    EulerAngles normalized() const;
};

/// A point on the unit sphere.
struct Direction {
    double theta = 0.0;
    double phi = 0.0;

    Direction normalized() const;

    double x() const { return std::sin(theta) * std::cos(phi); }
    double y() const { return std::sin(theta) * std::sin(phi); }
    double z() const { return std::cos(theta); }

    static Direction from_unit_vector(double x, double y, double z);
};

/// Euler angles of the inverse rotation, canonical branch (theta in [0, pi]).
/// Exact as an SO(3) inverse; for half-integer spins the corresponding SU(2)
/// element may differ by a global sign, which cancels in every conjugation.
EulerAngles euler_inverse(const EulerAngles& g);

/// ln(n!), table-backed up to n = 200, Stirling series beyond.
double ln_factorial(int n);

/// Binomial coefficient C(n, k) as a double; 0 outside the Pascal triangle.
double binomial(int n, int k);

/// Clebsch-Gordan coefficient C^{JM}_{j1 m1, j2 m2} in the Condon-Shortley
/// convention, computed by the Racah closed form in log space and cached.
/// Returns 0 when M != m1+m2 or the triangle inequality fails.
double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M);

/// Wigner small-d matrix element d^j_{mp m}(theta).
double wigner_small_d(HalfInt j, HalfInt mp, HalfInt m, double theta);

/// Wigner D-matrix element D^j_{mp m}(phi, theta, psi)
///   = exp(-i mp phi) d^j_{mp m}(theta) exp(-i m psi).
Complex wigner_D(HalfInt j, HalfInt mp, HalfInt m, const EulerAngles& g);

/// Full (2j+1) x (2j+1) small-d matrix; row/column index 0 is m = j (descending m).
Eigen::MatrixXd wigner_d_matrix(HalfInt j, double theta);

/// Full complex D-matrix with the same descending-m index convention.
Eigen::MatrixXcd wigner_D_matrix(HalfInt j, const EulerAngles& g);

/// Orthonormal spherical harmonic Y_{Lm}(theta, phi), Condon-Shortley phase.
Complex spherical_harmonic(int L, int m, const Direction& dir);

/// Legendre polynomial P_L(x) by the three-term recurrence.  x may exceed
/// [-1, 1] by at most 1e-12 (clamped); beyond that a std::domain_error is thrown.
double legendre_P(int L, double x);

} // namespace polariscope

#endif
