#include "polariscope/angular.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

namespace polariscope {

namespace {

double wrap_two_pi(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    if (a >= 2.0 * kPi) a = 0.0;
    return a;
}

constexpr int kFactorialTableSize = 201;

const std::array<double, kFactorialTableSize>& ln_factorial_table() {
    static const auto table = [] {
        std::array<double, kFactorialTableSize> t{};
        long double acc = 0.0L;
        t[0] = 0.0;
        for (int n = 1; n < kFactorialTableSize; ++n) {
            acc += std::log(static_cast<long double>(n));
            t[n] = static_cast<double>(acc);
        }
        return t;
    }();
    return table;
}

double ln_factorial_stirling(int n) {
    const double x = n + 1.0;
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // ln Gamma(x) asymptotic series; for x > 200 the truncation error is far
    // below double rounding.
    double series = inv / 12.0 - inv * inv2 / 360.0 + inv * inv2 * inv2 / 1260.0;
    return (x - 0.5) * std::log(x) - x + 0.5 * std::log(2.0 * kPi) + series;
}

struct CgKey {
    int j1, m1, j2, m2, J, M;
    bool operator==(const CgKey&) const = default;
};

struct CgKeyHash {
    size_t operator()(const CgKey& k) const noexcept {
        // FNV-1a over the six small ints.
        uint64_t h = 1469598103934665603ull;
        for (int v : {k.j1, k.m1, k.j2, k.m2, k.J, k.M}) {
            h ^= static_cast<uint64_t>(static_cast<uint32_t>(v));
            h *= 1099511628211ull;
        }
        return static_cast<size_t>(h);
    }
};

double clebsch_gordan_uncached(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2,
                               HalfInt J, HalfInt M) {
    // Selection rules: projection conservation, triangle inequality, and the
    // requirement that j1 + j2 + J is an integer.
    if ((m1 + m2) != M) return 0.0;
    if ((j1 + j2 + J).twice % 2 != 0) return 0.0;
    if (J.twice > (j1 + j2).twice || J.twice < std::abs(j1.twice - j2.twice)) return 0.0;

    // All of the following are guaranteed integers here (doubled values even).
    const auto as_int = [](HalfInt h) { return h.twice / 2; };
    const int a = as_int(j1 + j2 - J);
    const int b = as_int(j1 - j2 + J);
    const int c = as_int(-j1 + j2 + J);
    const int d = as_int(j1 + j2 + J) + 1;
    const int jpm1 = as_int(j1 + m1), jmm1 = as_int(j1 - m1);
    const int jpm2 = as_int(j2 + m2), jmm2 = as_int(j2 - m2);
    const int JpM = as_int(J + M), JmM = as_int(J - M);

    const double ln_pref = 0.5 * (std::log(static_cast<double>(J.multiplicity())) +
                                  ln_factorial(a) + ln_factorial(b) + ln_factorial(c) -
                                  ln_factorial(d) + ln_factorial(JpM) + ln_factorial(JmM) +
                                  ln_factorial(jmm1) + ln_factorial(jpm1) +
                                  ln_factorial(jmm2) + ln_factorial(jpm2));

    const int t1 = as_int(j2 - J - m1); // k >= j2 - J - m1
    const int t2 = as_int(j1 - J + m2); // k >= j1 - J + m2
    const int k_min = std::max({0, t1, t2});
    const int k_max = std::min({a, jmm1, jpm2});
    if (k_min > k_max) return 0.0;

    // Racah sum with the common prefactor folded into each exponent; desk-scale
    // j never makes the terms overflow, and log-space keeps them accurate.
    double sum = 0.0;
    for (int k = k_min; k <= k_max; ++k) {
        const double denom = ln_factorial(k) + ln_factorial(a - k) + ln_factorial(jmm1 - k) +
                             ln_factorial(jpm2 - k) + ln_factorial(as_int(J - j2 + m1) + k) +
                             ln_factorial(as_int(J - j1 - m2) + k);
        const double term = std::exp(ln_pref - denom);
        sum += (k % 2 == 0) ? term : -term;
    }
    return sum;
}

} // namespace

EulerAngles EulerAngles::normalized() const {
    return EulerAngles{wrap_two_pi(phi), theta, wrap_two_pi(psi)};
}

Direction Direction::normalized() const { return Direction{theta, wrap_two_pi(phi)}; }

Direction Direction::from_unit_vector(double x, double y, double z) {
    const double r = std::sqrt(x * x + y * y + z * z);
    if (r == 0.0) throw std::invalid_argument("Direction::from_unit_vector: zero vector");
    const double t = std::acos(std::clamp(z / r, -1.0, 1.0));
    const double p = std::atan2(y, x);
    return Direction{t, p}.normalized();
}

EulerAngles euler_inverse(const EulerAngles& g) {
    // R(phi, theta, psi)^-1 = R(pi - psi, theta, pi - phi) as an SO(3) element.
    return EulerAngles{kPi - g.psi, g.theta, kPi - g.phi}.normalized();
}

double ln_factorial(int n) {
    if (n < 0) throw std::invalid_argument("ln_factorial: negative argument");
    if (n < kFactorialTableSize) return ln_factorial_table()[n];
    return ln_factorial_stirling(n);
}

double binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0.0;
    if (k == 0 || k == n) return 1.0;
    return std::round(std::exp(ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)));
}

double clebsch_gordan(HalfInt j1, HalfInt m1, HalfInt j2, HalfInt m2, HalfInt J, HalfInt M) {
    if (!valid_jm(j1, m1) || !valid_jm(j2, m2) || !valid_jm(J, M))
        throw std::invalid_argument("clebsch_gordan: invalid (j, m) pair");

    static std::unordered_map<CgKey, double, CgKeyHash> cache;
    static std::shared_mutex mutex;

    const CgKey key{j1.twice, m1.twice, j2.twice, m2.twice, J.twice, M.twice};
    {
        std::shared_lock lock(mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    const double value = clebsch_gordan_uncached(j1, m1, j2, m2, J, M);
    {
        std::unique_lock lock(mutex);
        cache.emplace(key, value);
    }
    return value;
}

double wigner_small_d(HalfInt j, HalfInt mp, HalfInt m, double theta) {
    if (!valid_jm(j, mp) || !valid_jm(j, m))
        throw std::invalid_argument("wigner_small_d: invalid (j, m) pair");

    const int jpm = (j + m).twice / 2;
    const int jmm = (j - m).twice / 2;
    const int jpmp = (j + mp).twice / 2;
    const int jmmp = (j - mp).twice / 2;
    const int dm = (mp - m).twice / 2; // mp - m, always an integer

    const int s_min = std::max(0, -dm);
    const int s_max = std::min(jpm, jmmp);
    if (s_min > s_max) return 0.0;

    const double ch = std::cos(0.5 * theta);
    const double sh = std::sin(0.5 * theta);
    const double ln_pref =
        0.5 * (ln_factorial(jpmp) + ln_factorial(jmmp) + ln_factorial(jpm) + ln_factorial(jmm));

    double sum = 0.0;
    for (int s = s_min; s <= s_max; ++s) {
        const double ln_den = ln_factorial(jpm - s) + ln_factorial(s) +
                              ln_factorial(dm + s) + ln_factorial(jmmp - s);
        const int pc = jpm + jmmp - 2 * s; // cos exponent: 2j + m - mp - 2s
        const int ps = dm + 2 * s;         // sin exponent
        double term = std::exp(ln_pref - ln_den);
        term *= std::pow(ch, pc) * std::pow(sh, ps);
        const int sign = dm + s; // (-1)^{mp - m + s}
        sum += (sign % 2 == 0) ? term : -term;
    }
    return sum;
}

Complex wigner_D(HalfInt j, HalfInt mp, HalfInt m, const EulerAngles& g) {
    const double d = wigner_small_d(j, mp, m, g.theta);
    const double phase = -(mp.value() * g.phi + m.value() * g.psi);
    return std::polar(d, phase);
}

Eigen::MatrixXd wigner_d_matrix(HalfInt j, double theta) {
    const int dim = j.multiplicity();
    Eigen::MatrixXd d(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const HalfInt mp = HalfInt::from_twice(j.twice - 2 * i);
        for (int k = 0; k < dim; ++k) {
            const HalfInt m = HalfInt::from_twice(j.twice - 2 * k);
            d(i, k) = wigner_small_d(j, mp, m, theta);
        }
    }
    return d;
}

Eigen::MatrixXcd wigner_D_matrix(HalfInt j, const EulerAngles& g) {
    const int dim = j.multiplicity();
    const Eigen::MatrixXd d = wigner_d_matrix(j, g.theta);
    Eigen::MatrixXcd D(dim, dim);
    for (int i = 0; i < dim; ++i) {
        const double mp = 0.5 * (j.twice - 2 * i);
        for (int k = 0; k < dim; ++k) {
            const double m = 0.5 * (j.twice - 2 * k);
            D(i, k) = std::polar(d(i, k), -(mp * g.phi + m * g.psi));
        }
    }
    return D;
}

namespace {

/// Associated Legendre P_L^m(cos theta) without the Condon-Shortley phase,
/// with sin(theta) supplied directly for stability near the poles.
double assoc_legendre_plain(int L, int m, double ct, double st) {
    double pmm = 1.0;
    for (int k = 1; k <= m; ++k) pmm *= (2.0 * k - 1.0) * st;
    if (L == m) return pmm;
    double pm1 = ct * (2.0 * m + 1.0) * pmm;
    if (L == m + 1) return pm1;
    double p = 0.0;
    for (int l = m + 2; l <= L; ++l) {
        p = ((2.0 * l - 1.0) * ct * pm1 - (l + m - 1.0) * pmm) / (l - m);
        pmm = pm1;
        pm1 = p;
    }
    return p;
}

} // namespace

Complex spherical_harmonic(int L, int m, const Direction& dir) {
    if (L < 0 || std::abs(m) > L)
        throw std::invalid_argument("spherical_harmonic: |m| must not exceed L");
    const int am = std::abs(m);
    const double ct = std::cos(dir.theta);
    const double st = std::sin(dir.theta);
    const double norm = std::sqrt((2.0 * L + 1.0) / (4.0 * kPi) *
                                  std::exp(ln_factorial(L - am) - ln_factorial(L + am)));
    const double p = assoc_legendre_plain(L, am, ct, st);
    double amp = norm * p;
    if (m >= 0 && m % 2 != 0) amp = -amp; // Condon-Shortley phase on positive m
    return std::polar(amp, m * dir.phi);
}

double legendre_P(int L, double x) {
    if (L < 0) throw std::invalid_argument("legendre_P: negative order");
    if (std::abs(x) > 1.0 + 1e-12)
        throw std::domain_error("legendre_P: argument outside [-1, 1]");
    x = std::clamp(x, -1.0, 1.0);
    if (L == 0) return 1.0;
    double pm1 = 1.0;
    double p = x;
    for (int l = 2; l <= L; ++l) {
        const double next = ((2.0 * l - 1.0) * x * p - (l - 1.0) * pm1) / l;
        pm1 = p;
        p = next;
    }
    return p;
}

} // namespace polariscope
