#include "polariscope/forward.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace polariscope {

namespace {

double wrap_pi(double a) {
    a = std::fmod(a, kPi);
    if (a < 0.0) a += kPi;
    if (a >= kPi) a = 0.0;
    return a;
}

Eigen::Matrix2cd axis_rotation(double angle) {
    Eigen::Matrix2cd r;
    const double c = std::cos(angle), s = std::sin(angle);
    r << c, -s, s, c;
    return r;
}

} // namespace

PlateSetting PlateSetting::quarter(double angle) {
    return PlateSetting{Kind::Quarter, wrap_pi(angle)};
}

PlateSetting PlateSetting::half(double angle) { return PlateSetting{Kind::Half, wrap_pi(angle)}; }

ModeUnitary ModeUnitary::su2_normalized() const {
    const Complex det = u(0, 0) * u(1, 1) - u(0, 1) * u(1, 0);
    return ModeUnitary{u / std::sqrt(det)};
}

double ModeUnitary::unitarity_defect() const {
    return (u.adjoint() * u - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
}

double ModeUnitary::distance_up_to_phase(const ModeUnitary& other) const {
    // The minimizing global phase of ||u - e^{i phi} v||_F is the phase of
    // tr(v^dag u); subtracting with it applied avoids the cancellation that a
    // direct 4 - 2|tr| evaluation would suffer near zero distance.
    const Complex tr = (other.u.adjoint() * u).trace();
    const Complex phase = (std::abs(tr) > 0.0) ? tr / std::abs(tr) : Complex(1.0, 0.0);
    return (u - phase * other.u).norm();
}

ModeUnitary plate_unitary(const PlateSetting& p) {
    Eigen::Matrix2cd retarder = Eigen::Matrix2cd::Zero();
    retarder(0, 0) = 1.0;
    retarder(1, 1) = (p.kind == PlateSetting::Kind::Quarter) ? Complex(0.0, 1.0) : Complex(-1.0, 0.0);
    const Eigen::Matrix2cd r = axis_rotation(p.angle);
    return ModeUnitary{r * retarder * r.transpose()}.su2_normalized();
}

ModeUnitary gadget_unitary(const PlateSetting& q1, const PlateSetting& h, const PlateSetting& q2) {
    if (q1.kind != PlateSetting::Kind::Quarter || q2.kind != PlateSetting::Kind::Quarter ||
        h.kind != PlateSetting::Kind::Half)
        throw std::invalid_argument("gadget_unitary: expects (quarter, half, quarter) plates");
    return ModeUnitary{plate_unitary(q2).u * plate_unitary(h).u * plate_unitary(q1).u}
        .su2_normalized();
}

namespace {

/// y-x-y Euler angles of an SU(2) element:
///   u = +- exp(-i alpha sigma_y) exp(-i beta sigma_x) exp(-i gamma sigma_y)
/// with beta in [0, pi/2] and the degenerate angles set to zero.
void su2_yxy_angles(const Eigen::Matrix2cd& u, double& alpha, double& beta, double& gamma) {
    const Complex t00 = u(0, 0);
    const Complex t01 = u(0, 1);
    const double rho1 = std::hypot(t00.real(), t01.real());
    const double rho2 = std::hypot(t00.imag(), t01.imag());
    beta = std::atan2(rho2, rho1);
    const double sum = (rho1 > 1e-15) ? std::atan2(-t01.real(), t00.real()) : 0.0;  // alpha + gamma
    const double diff = (rho2 > 1e-15) ? std::atan2(t00.imag(), -t01.imag()) : 0.0; // alpha - gamma
    alpha = 0.5 * (sum + diff);
    gamma = 0.5 * (sum - diff);
}

double gadget_residual(const GadgetSettings& s, const ModeUnitary& target) {
    return gadget_unitary(s.q1, s.h, s.q2).distance_up_to_phase(target);
}

} // namespace

GadgetSettings gadget_decompose(const ModeUnitary& target) {
    const ModeUnitary t = target.su2_normalized();

    // The gadget product Q(a) H(b) Q(c) (plate c first) collapses to
    // -R_y(a) exp(i g sigma_x) R_y(-c) with g = 2b - a - c, so a y-x-y
    // decomposition of the target yields the plate angles directly.
    double alpha, beta, gamma;
    su2_yxy_angles(t.u, alpha, beta, gamma);
    const double a = alpha;
    const double c = -gamma;
    const double b = 0.5 * (alpha - beta - gamma);

    GadgetSettings best{PlateSetting::quarter(c), PlateSetting::half(b), PlateSetting::quarter(a)};
    double best_res = gadget_residual(best, t);
    if (best_res < 1e-12) return best;

    // Bounded multi-start polish by coordinate descent over the three angles.
    std::mt19937_64 rng(0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> uni(0.0, kPi);
    for (int restart = 0; restart < 16 && best_res > 1e-10; ++restart) {
        double ang[3];
        if (restart == 0) {
            ang[0] = best.q1.angle;
            ang[1] = best.h.angle;
            ang[2] = best.q2.angle;
        } else {
            for (double& v : ang) v = uni(rng);
        }
        double step = 0.3;
        auto eval = [&](const double* v) {
            return gadget_residual({PlateSetting::quarter(v[0]), PlateSetting::half(v[1]),
                                    PlateSetting::quarter(v[2])},
                                   t);
        };
        double cur = eval(ang);
        for (int iter = 0; iter < 400 && cur > 1e-12; ++iter) {
            bool improved = false;
            for (int k = 0; k < 3; ++k) {
                for (double dir : {+1.0, -1.0}) {
                    double trial[3] = {ang[0], ang[1], ang[2]};
                    trial[k] += dir * step;
                    const double r = eval(trial);
                    if (r < cur) {
                        cur = r;
                        ang[k] = trial[k];
                        improved = true;
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        if (cur < best_res) {
            best_res = cur;
            best = {PlateSetting::quarter(ang[0]), PlateSetting::half(ang[1]),
                    PlateSetting::quarter(ang[2])};
        }
    }
    if (best_res > 1e-9)
        throw SolverError("gadget_decompose: residual bound not met", best_res);
    return best;
}

EulerAngles su2_to_euler(const ModeUnitary& u) {
    const Complex det = u.u(0, 0) * u.u(1, 1) - u.u(0, 1) * u.u(1, 0);
    if (std::abs(det - Complex(1.0, 0.0)) > 1e-10)
        throw std::invalid_argument("su2_to_euler: determinant must be +1");

    const Complex u00 = u.u(0, 0);
    const Complex u10 = u.u(1, 0);
    const double theta = 2.0 * std::atan2(std::abs(u10), std::abs(u00));

    double phi = 0.0, psi = 0.0;
    if (std::abs(u10) < 1e-12) {
        phi = -2.0 * std::arg(u00); // theta = 0: only phi + psi is defined
    } else if (std::abs(u00) < 1e-12) {
        phi = 2.0 * std::arg(u10); // theta = pi: only phi - psi is defined
    } else {
        phi = std::arg(u10) - std::arg(u00);
        psi = -std::arg(u10) - std::arg(u00);
    }
    return EulerAngles{phi, theta, psi}.normalized();
}

namespace {

TwoModeState conjugate_layers(const TwoModeState& state, const EulerAngles& g, bool adjoint) {
    TwoModeState out;
    out.layers.reserve(state.layers.size());
    std::map<int, Eigen::MatrixXcd> d_cache;
    auto d_for = [&](HalfInt spin) -> const Eigen::MatrixXcd& {
        auto it = d_cache.find(spin.twice);
        if (it == d_cache.end())
            it = d_cache.emplace(spin.twice, wigner_D_matrix(spin, g)).first;
        return it->second;
    };
    for (const auto& layer : state.layers) {
        const Eigen::MatrixXcd& d = d_for(layer.spin);
        LayerState rotated = layer;
        if (adjoint)
            rotated.rho = d.adjoint() * layer.rho * d;
        else
            rotated.rho = d * layer.rho * d.adjoint();
        out.layers.push_back(std::move(rotated));
    }
    for (const auto& [key, block] : state.coherences) {
        const Eigen::MatrixXcd& d_lo = d_for(HalfInt::from_twice(key.first));
        const Eigen::MatrixXcd& d_hi = d_for(HalfInt::from_twice(key.second));
        if (adjoint)
            out.coherences[key] = d_lo.adjoint() * block * d_hi;
        else
            out.coherences[key] = d_lo * block * d_hi.adjoint();
    }
    return out;
}

} // namespace

TwoModeState rotate_state(const TwoModeState& state, const EulerAngles& g) {
    return conjugate_layers(state, g, /*adjoint=*/false);
}

double intensity_moment_direct(const TwoModeState& state, const TensorIndex& idx,
                               const EulerAngles& g) {
    const int ph = (idx.K + idx.q).twice / 2;
    const int pv = (idx.K - idx.q).twice / 2;
    double total = 0.0;
    for (const auto& layer : state.layers) {
        if (layer.spin.twice < idx.K.twice) continue;
        // Only the rotated diagonal is needed: diag_i(D^dag rho D) = col_i(D)^dag rho col_i(D).
        const Eigen::MatrixXcd d = wigner_D_matrix(layer.spin, g);
        const Eigen::MatrixXcd m = layer.rho * d;
        for (int i = 0; i < layer.dim(); ++i) {
            const double p = (d.col(i).adjoint() * m.col(i))(0, 0).real();
            const HalfInt mq = layer.m_of(i);
            const int n_h = (layer.spin + mq).twice / 2;
            const int n_v = (layer.spin - mq).twice / 2;
            total += layer.weight * p * binomial(n_h, ph) * binomial(n_v, pv);
        }
    }
    return total;
}

double intensity_moment_multipole(const CorrelationMatrix& G, HalfInt q, const Direction& dir) {
    const HalfInt K = G.K;
    if (!valid_jm(K, q))
        throw std::invalid_argument("intensity_moment_multipole: |q| must not exceed K");
    const int dim = K.multiplicity();
    Complex total(0.0, 0.0);
    for (int twoL = 0; twoL <= 2 * K.twice; twoL += 2) {
        const int L = twoL / 2;
        const HalfInt hL = HalfInt::whole(L);
        const double cL = clebsch_gordan(K, q, K, -q, hL, HalfInt::whole(0));
        if (cL == 0.0) continue;
        const double scale = std::sqrt(4.0 * kPi / (2.0 * L + 1.0)) * cL;
        for (int a = 0; a < dim; ++a) {
            const HalfInt qpp = HalfInt::from_twice(K.twice - 2 * a); // q''
            for (int b = 0; b < dim; ++b) {
                const HalfInt qp = HalfInt::from_twice(K.twice - 2 * b); // q'
                const HalfInt m = qpp - qp;
                if (std::abs(m.twice) > 2 * L) continue;
                const double cg = clebsch_gordan(K, qpp, K, -qp, hL, m);
                if (cg == 0.0) continue;
                const int phase_exp = (q - qp).twice / 2; // (-1)^{q - q'}
                const double sign = (phase_exp % 2 == 0) ? 1.0 : -1.0;
                const Complex ystar = std::conj(spherical_harmonic(L, m.twice / 2, dir));
                total += scale * sign * cg * G.g(a, b) * ystar;
            }
        }
    }
    return total.real();
}

std::vector<PhotonCount> sample_counts(const TwoModeState& state, const EulerAngles& g,
                                       long long shots, uint64_t seed) {
    if (shots < 1) throw std::invalid_argument("sample_counts: shots must be >= 1");
    const TwoModeState rotated = rotate_state(state, g);
    auto table = photon_number_distribution(rotated);

    std::vector<double> cdf(table.size());
    double acc = 0.0;
    for (size_t i = 0; i < table.size(); ++i) {
        acc += std::max(0.0, table[i].second);
        cdf[i] = acc;
    }
    if (acc <= 0.0) throw std::invalid_argument("sample_counts: degenerate distribution");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, acc);
    std::vector<PhotonCount> draws;
    draws.reserve(static_cast<size_t>(shots));
    for (long long s = 0; s < shots; ++s) {
        const double x = uni(rng);
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), x);
        const size_t i = std::min(static_cast<size_t>(it - cdf.begin()), table.size() - 1);
        draws.push_back(table[i].first);
    }
    return draws;
}

std::pair<double, double> estimate_intensity(const std::vector<PhotonCount>& counts,
                                             const TensorIndex& idx) {
    if (counts.empty()) throw std::invalid_argument("estimate_intensity: empty counts");
    const int ph = (idx.K + idx.q).twice / 2;
    const int pv = (idx.K - idx.q).twice / 2;
    const double n = static_cast<double>(counts.size());
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& c : counts) {
        const double x = binomial(c.n_h, ph) * binomial(c.n_v, pv);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    if (counts.size() == 1) return {mean, 0.0};
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {mean, std::sqrt(var / n)};
}

} // namespace polariscope
