#include "polariscope/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace polariscope {

namespace {

int parity_sign(HalfInt h) {
    // (-1)^h for an integer-valued half-int difference.
    if (h.twice % 2 != 0) throw std::logic_error("parity_sign: non-integer exponent");
    return (h.twice / 2) % 2 == 0 ? 1 : -1;
}

Eigen::Vector3d unit_vector(const Direction& d) {
    return Eigen::Vector3d(d.x(), d.y(), d.z());
}

} // namespace

double MultipoleVector::norm() const {
    double s = 0.0;
    for (const auto& c : components) s += std::norm(c);
    return std::sqrt(s);
}

double QuadratureGrid::total_weight() const {
    double s = 0.0;
    for (const auto& n : nodes) s += n.weight;
    return s;
}

namespace {

/// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration on P_n.
void gauss_legendre_rule(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double xi = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            const double p = legendre_P(n, xi);
            const double pm1 = (n > 0) ? legendre_P(n - 1, xi) : 0.0;
            dp = n * (xi * p - pm1) / (xi * xi - 1.0);
            const double dx = p / dp;
            xi -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        x[i] = xi;
        w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
}

} // namespace

QuadratureGrid QuadratureGrid::gauss_legendre(int max_degree) {
    if (max_degree < 0) throw std::invalid_argument("QuadratureGrid: negative degree");
    const int n_theta = max_degree / 2 + 1;
    const int n_phi = max_degree + 2;
    std::vector<double> x, w;
    gauss_legendre_rule(n_theta, x, w);

    QuadratureGrid grid;
    grid.nodes.reserve(static_cast<size_t>(n_theta) * n_phi);
    const double phi_weight = 2.0 * kPi / n_phi;
    for (int i = 0; i < n_theta; ++i) {
        const double theta = std::acos(std::clamp(x[i], -1.0, 1.0));
        for (int k = 0; k < n_phi; ++k) {
            const double phi = 2.0 * kPi * k / n_phi;
            grid.nodes.push_back({Direction{theta, phi}, w[i] * phi_weight});
        }
    }
    return grid;
}

double schur_transform_I(const IntensityMomentSet& values, int L) {
    const HalfInt K = values.K;
    if (L < 0 || L > K.twice)
        throw std::invalid_argument("schur_transform_I: require 0 <= L <= 2K");
    if (static_cast<int>(values.values.size()) != K.multiplicity())
        throw std::invalid_argument("schur_transform_I: value count must be 2K+1");
    const HalfInt hL = HalfInt::whole(L);
    double sum = 0.0;
    for (int a = 0; a < K.multiplicity(); ++a) {
        const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
        const double cg = clebsch_gordan(K, q, K, -q, hL, HalfInt::whole(0));
        sum += parity_sign(K - q) * cg * values.values[a];
    }
    return sum;
}

Complex schur_transform_G(const CorrelationMatrix& G, int L, int m) {
    const HalfInt K = G.K;
    if (L < 0 || L > K.twice)
        throw std::invalid_argument("schur_transform_G: require 0 <= L <= 2K");
    if (std::abs(m) > L) throw std::invalid_argument("schur_transform_G: |m| must not exceed L");
    const HalfInt hL = HalfInt::whole(L);
    const HalfInt hm = HalfInt::whole(m);
    Complex sum(0.0, 0.0);
    for (int b = 0; b < K.multiplicity(); ++b) {
        const HalfInt qp = HalfInt::from_twice(K.twice - 2 * b); // q'
        const HalfInt qpp = qp + hm;                             // q'' = q' + m
        if (!valid_jm(K, qpp)) continue;
        const double cg = clebsch_gordan(K, qpp, K, -qp, hL, hm);
        if (cg == 0.0) continue;
        sum += static_cast<double>(parity_sign(K - qp)) * cg * G.entry(qpp, qp);
    }
    return sum;
}

MultipoleVector multipole_of(const CorrelationMatrix& G, int L) {
    MultipoleVector out = MultipoleVector::zero(L);
    for (int m = -L; m <= L; ++m) out.at_m(m) = schur_transform_G(G, L, m);
    return out;
}

double schur_intensity_forward(const MultipoleVector& gt, const Direction& dir) {
    const double scale = std::sqrt(4.0 * kPi / (2.0 * gt.L + 1.0));
    Complex sum(0.0, 0.0);
    for (int m = -gt.L; m <= gt.L; ++m)
        sum += std::conj(spherical_harmonic(gt.L, m, dir)) * gt.at_m(m);
    return scale * sum.real();
}

CorrelationMatrix inverse_schur_G(const std::vector<MultipoleVector>& multipoles) {
    if (multipoles.empty()) throw std::invalid_argument("inverse_schur_G: empty multipole set");
    int l_max = 0;
    for (const auto& mv : multipoles) l_max = std::max(l_max, mv.L);

    std::vector<const MultipoleVector*> by_L(l_max + 1, nullptr);
    for (const auto& mv : multipoles) {
        if (mv.L < 0 || static_cast<int>(mv.components.size()) != 2 * mv.L + 1)
            throw std::invalid_argument("inverse_schur_G: malformed multipole vector");
        by_L[mv.L] = &mv;
    }
    std::string missing;
    for (int L = 0; L <= l_max; ++L)
        if (!by_L[L]) missing += (missing.empty() ? "" : ", ") + std::to_string(L);
    if (!missing.empty())
        throw std::invalid_argument("inverse_schur_G: missing multipole orders L = " + missing);

    const HalfInt K = HalfInt::from_twice(l_max); // 2K = L_max
    const int dim = K.multiplicity();
    CorrelationMatrix out{K, Eigen::MatrixXcd::Zero(dim, dim)};
    for (int a = 0; a < dim; ++a) {
        const HalfInt qpp = HalfInt::from_twice(K.twice - 2 * a);
        for (int b = 0; b < dim; ++b) {
            const HalfInt qp = HalfInt::from_twice(K.twice - 2 * b);
            const HalfInt hm = qpp - qp;
            const int m = hm.twice / 2;
            Complex acc(0.0, 0.0);
            for (int L = std::abs(m); L <= l_max; ++L) {
                const double cg = clebsch_gordan(K, qpp, K, -qp, HalfInt::whole(L), hm);
                if (cg == 0.0) continue;
                acc += cg * by_L[L]->at_m(m);
            }
            out.g(a, b) = static_cast<double>(parity_sign(K - qp)) * acc;
        }
    }
    return out;
}

CorrelationMatrix continuous_inversion(
    const std::function<IntensityMomentSet(const Direction&)>& sampler, HalfInt K, HalfInt q,
    const QuadratureGrid& grid) {
    if (!valid_jm(K, q)) throw std::invalid_argument("continuous_inversion: invalid (K, q)");

    const int l_max = K.twice; // 2K
    std::vector<double> c_L(l_max + 1, 0.0);
    for (int L = 0; L <= l_max; ++L) {
        c_L[L] = clebsch_gordan(K, q, K, -q, HalfInt::whole(L), HalfInt::whole(0));
        if (std::abs(c_L[L]) < 1e-12)
            throw std::invalid_argument(
                "continuous_inversion: C^{L0}_{Kq,K-q} vanishes for L = " + std::to_string(L) +
                " at q = " + q.str() + "; choose a different q (q = K always works)");
    }

    // One sampler call per node, reused for every (L, m).
    std::vector<double> intensity(grid.nodes.size());
    for (size_t i = 0; i < grid.nodes.size(); ++i)
        intensity[i] = sampler(grid.nodes[i].dir).value(q);

    const int dim = K.multiplicity();
    CorrelationMatrix out{K, Eigen::MatrixXcd::Zero(dim, dim)};
    for (int L = 0; L <= l_max; ++L) {
        const double scale = std::sqrt((2.0 * L + 1.0) / (4.0 * kPi)) / c_L[L];
        for (int m = -L; m <= L; ++m) {
            Complex J(0.0, 0.0);
            for (size_t i = 0; i < grid.nodes.size(); ++i)
                J += grid.nodes[i].weight * intensity[i] *
                     spherical_harmonic(L, m, grid.nodes[i].dir);
            if (std::abs(J) == 0.0) continue;
            for (int a = 0; a < dim; ++a) {
                const HalfInt qpp = HalfInt::from_twice(K.twice - 2 * a);
                const HalfInt qp = qpp - HalfInt::whole(m);
                if (!valid_jm(K, qp)) continue;
                const double cg = clebsch_gordan(K, qpp, K, -qp, HalfInt::whole(L),
                                                 HalfInt::whole(m));
                if (cg == 0.0) continue;
                const int b = (K - qp).twice / 2;
                out.g(a, b) += static_cast<double>(parity_sign(q - qp)) * scale * cg * J;
            }
        }
    }
    return out;
}

MultipoleVector first_order_inversion(double i_x, double i_y, double i_z) {
    const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
    MultipoleVector out = MultipoleVector::zero(1);
    out.at_m(1) = inv_sqrt3 * Complex(-i_x, i_y);
    out.at_m(0) = inv_sqrt3 * std::sqrt(2.0) * i_z;
    out.at_m(-1) = inv_sqrt3 * Complex(i_x, i_y);
    return out;
}

MultipoleVector first_order_to_canonical(const MultipoleVector& closed_form) {
    if (closed_form.L != 1)
        throw std::invalid_argument("first_order_to_canonical: expects L = 1");
    MultipoleVector out = MultipoleVector::zero(1);
    const double scale = std::sqrt(1.5);
    for (int m = -1; m <= 1; ++m) {
        const double sign = (m % 2 == 0) ? 1.0 : -1.0;
        out.at_m(m) = sign * scale * closed_form.at_m(-m);
    }
    return out;
}

namespace {

double min_line_angle_of(const std::vector<Eigen::Vector3d>& pts) {
    if (pts.size() < 2) return kPi;
    double best = kPi;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j) {
            const double c = std::min(1.0, std::abs(pts[i].dot(pts[j])));
            best = std::min(best, std::acos(c));
        }
    return best;
}

std::vector<Eigen::Vector3d> canonical_lines(int count) {
    if (count == 3) {
        return {Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()};
    }
    if (count == 5) {
        // Five of the six icosahedral lines; every pair subtends acos(1/sqrt(5)).
        const double g = 0.5 * (1.0 + std::sqrt(5.0));
        const double n = std::sqrt(1.0 + g * g);
        return {Eigen::Vector3d(0, 1, g) / n, Eigen::Vector3d(0, 1, -g) / n,
                Eigen::Vector3d(1, g, 0) / n, Eigen::Vector3d(1, -g, 0) / n,
                Eigen::Vector3d(g, 0, 1) / n};
    }
    return {};
}

Eigen::MatrixXd legendre_gram(int L, const std::vector<Eigen::Vector3d>& pts) {
    const int n = static_cast<int>(pts.size());
    Eigen::MatrixXd p(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            p(j, k) = legendre_P(L, std::clamp(pts[j].dot(pts[k]), -1.0, 1.0));
    return p;
}

double condition_of(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double smin = svd.singularValues().minCoeff();
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return svd.singularValues().maxCoeff() / smin;
}

double condition_of(const Eigen::MatrixXcd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const double smin = svd.singularValues().minCoeff();
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return svd.singularValues().maxCoeff() / smin;
}

Eigen::MatrixXcd harmonic_matrix(int L, const std::vector<Direction>& dirs) {
    const int n = static_cast<int>(dirs.size());
    Eigen::MatrixXcd y(n, 2 * L + 1);
    for (int j = 0; j < n; ++j)
        for (int m = -L; m <= L; ++m) y(j, m + L) = spherical_harmonic(L, m, dirs[j]);
    return y;
}

// The minimax line packings for 2L+1 >= 7 lines can sit arbitrarily close to
// configurations that are degenerate for pure degree-L interpolation, so the
// ascent keeps the widest configuration whose P_L stays below this bound.
constexpr double kDesignCondLimit = 60.0;

struct DesignBest {
    std::vector<Eigen::Vector3d> pts;
    double angle = -1.0;
    double cond = std::numeric_limits<double>::infinity();
};

void consider_candidate(int L, const std::vector<Eigen::Vector3d>& pts, DesignBest& feasible,
                        DesignBest& fallback) {
    const double angle = min_line_angle_of(pts);
    if (angle <= feasible.angle && angle <= 0.0) return;
    const double cond = condition_of(legendre_gram(L, pts));
    if (cond < kDesignCondLimit && angle > feasible.angle) {
        feasible = {pts, angle, cond};
    }
    if (cond < fallback.cond) fallback = {pts, angle, cond};
}

void repulsion_ascent(int L, std::vector<Eigen::Vector3d>& pts, DesignBest& feasible,
                      DesignBest& fallback) {
    const int iters = 1200;
    for (int phase = 0; phase < 3; ++phase) {
        const double p = std::pow(4.0, phase + 1); // sharpening exponent 4, 16, 64
        double eta = 0.2 / p;
        for (int it = 0; it < iters; ++it) {
            std::vector<Eigen::Vector3d> grad(pts.size(), Eigen::Vector3d::Zero());
            for (size_t i = 0; i < pts.size(); ++i) {
                for (size_t j = 0; j < pts.size(); ++j) {
                    if (i == j) continue;
                    const double c = pts[i].dot(pts[j]);
                    // d/du_i of (u_i . u_j)^(2p); the odd power keeps the sign,
                    // which is what identifies antipodal points.
                    grad[i] += std::pow(std::abs(c), 2.0 * p - 2.0) * c * pts[j];
                }
            }
            for (size_t i = 0; i < pts.size(); ++i) {
                Eigen::Vector3d step = grad[i] - grad[i].dot(pts[i]) * pts[i];
                pts[i] = (pts[i] - eta * step).normalized();
            }
            eta *= 0.999;
            if (it % 4 == 0 || it == iters - 1) consider_candidate(L, pts, feasible, fallback);
        }
    }
}

} // namespace

DirectionSet design_directions(int L, uint64_t seed) {
    if (L < 0) throw std::invalid_argument("design_directions: negative order");
    DirectionSet out;
    out.L = L;
    if (L == 0) {
        out.directions = {Direction{0.0, 0.0}};
        out.cond_P = 1.0;
        out.cond_Y = 1.0;
        out.min_line_angle = kPi;
        return out;
    }

    const int n = 2 * L + 1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uz(-1.0, 1.0);
    std::uniform_real_distribution<double> uphi(0.0, 2.0 * kPi);
    auto random_point = [&] {
        const double z = uz(rng);
        const double phi = uphi(rng);
        const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
        return Eigen::Vector3d(s * std::cos(phi), s * std::sin(phi), z);
    };

    DesignBest feasible;
    DesignBest fallback;

    const auto canonical = canonical_lines(n);
    if (!canonical.empty()) consider_candidate(L, canonical, feasible, fallback);

    // A pool of plain random configurations guarantees a well-conditioned
    // baseline before the ascent starts pushing toward extremal packings.
    for (int draw = 0; draw < 200; ++draw) {
        std::vector<Eigen::Vector3d> pts;
        pts.reserve(n);
        for (int i = 0; i < n; ++i) pts.push_back(random_point());
        consider_candidate(L, pts, feasible, fallback);
    }

    for (int restart = 0; restart < 16; ++restart) {
        std::vector<Eigen::Vector3d> pts;
        if (restart == 0 && !canonical.empty()) {
            pts = canonical;
        } else {
            pts.reserve(n);
            for (int i = 0; i < n; ++i) pts.push_back(random_point());
            consider_candidate(L, pts, feasible, fallback);
        }
        repulsion_ascent(L, pts, feasible, fallback);
    }

    const DesignBest& chosen = (feasible.angle > 0.0) ? feasible : fallback;
    out.min_line_angle = chosen.angle;
    out.directions.reserve(n);
    for (const auto& v : chosen.pts)
        out.directions.push_back(Direction::from_unit_vector(v(0), v(1), v(2)));
    out.cond_P = chosen.cond;
    out.cond_Y = condition_of(harmonic_matrix(L, out.directions));
    return out;
}

MultipoleVector discrete_inversion(const std::vector<double>& values, const DirectionSet& dirs,
                                   double cond_error_threshold, double* cond_out) {
    const int L = dirs.L;
    const int n = 2 * L + 1;
    if (static_cast<int>(values.size()) != n || static_cast<int>(dirs.directions.size()) != n)
        throw std::invalid_argument("discrete_inversion: need exactly 2L+1 values and directions");

    std::vector<Eigen::Vector3d> pts;
    pts.reserve(n);
    for (const auto& d : dirs.directions) pts.push_back(unit_vector(d));

    const Eigen::MatrixXd p = legendre_gram(L, pts);
    const double cond = condition_of(p);
    if (cond_out) *cond_out = cond;
    if (!(cond < cond_error_threshold))
        throw ConditioningError("discrete_inversion: P_" + std::to_string(L) +
                                    " is singular or ill-conditioned (cond = " +
                                    std::to_string(cond) + ")",
                                L, cond);

    Eigen::VectorXd rhs(n);
    for (int j = 0; j < n; ++j) rhs(j) = values[j];
    const Eigen::VectorXd x = p.colPivHouseholderQr().solve(rhs);

    const Eigen::MatrixXcd y = harmonic_matrix(L, dirs.directions);
    const Eigen::VectorXcd gt = std::sqrt(4.0 * kPi / (2.0 * L + 1.0)) *
                                (y.transpose() * x.cast<Complex>());

    MultipoleVector out = MultipoleVector::zero(L);
    for (int m = -L; m <= L; ++m) out.at_m(m) = gt(m + L);
    return out;
}

Eigen::VectorXd hermitian_to_params(const Eigen::MatrixXcd& g) {
    const int dim = static_cast<int>(g.rows());
    Eigen::VectorXd params(dim * dim);
    int idx = 0;
    for (int i = 0; i < dim; ++i) params(idx++) = g(i, i).real();
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) {
            params(idx++) = g(i, j).real();
            params(idx++) = g(i, j).imag();
        }
    return params;
}

Eigen::MatrixXcd params_to_hermitian(const Eigen::VectorXd& params, int dim) {
    if (params.size() != dim * dim)
        throw std::invalid_argument("params_to_hermitian: wrong parameter count");
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(dim, dim);
    int idx = 0;
    for (int i = 0; i < dim; ++i) g(i, i) = params(idx++);
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) {
            const double re = params(idx++);
            const double im = params(idx++);
            g(i, j) = Complex(re, im);
            g(j, i) = Complex(re, -im);
        }
    return g;
}

CorrelationMatrix psd_projected(const CorrelationMatrix& G) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G.g);
    Eigen::VectorXd eigs = es.eigenvalues().cwiseMax(0.0);
    CorrelationMatrix out{G.K, es.eigenvectors() * eigs.asDiagonal() * es.eigenvectors().adjoint()};
    return out;
}

namespace {

/// Complex coefficient matrix A with I_{Kq}(dir) = sum_{ij} A_{ij} G_{ij}
/// (i = q'' index, j = q' index), assembled from the multipole expansion.
Eigen::MatrixXcd intensity_design_coeffs(HalfInt K, HalfInt q, const Direction& dir) {
    const int dim = K.multiplicity();
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
    for (int L = 0; L <= K.twice; ++L) {
        const HalfInt hL = HalfInt::whole(L);
        const double cL = clebsch_gordan(K, q, K, -q, hL, HalfInt::whole(0));
        if (cL == 0.0) continue;
        const double scale = std::sqrt(4.0 * kPi / (2.0 * L + 1.0)) * cL;
        for (int i = 0; i < dim; ++i) {
            const HalfInt qpp = HalfInt::from_twice(K.twice - 2 * i);
            for (int j = 0; j < dim; ++j) {
                const HalfInt qp = HalfInt::from_twice(K.twice - 2 * j);
                const HalfInt hm = qpp - qp;
                if (std::abs(hm.twice) > 2 * L) continue;
                const double cg = clebsch_gordan(K, qpp, K, -qp, hL, hm);
                if (cg == 0.0) continue;
                const double sign = parity_sign(q - qp);
                a(i, j) += scale * sign * cg *
                           std::conj(spherical_harmonic(L, hm.twice / 2, dir));
            }
        }
    }
    return a;
}

std::pair<CorrelationMatrix, ReconstructionDiagnostics> reconstruct_exact(
    const std::vector<MeasurementRecord>& records, HalfInt K, const ReconstructionOptions& opts) {
    ReconstructionDiagnostics diag;
    diag.K = K;
    diag.mode = "exact";

    const int dim = K.multiplicity();
    const int expected = dim * dim;
    if (static_cast<int>(records.size()) != expected) {
        std::string missing;
        int have = static_cast<int>(records.size());
        for (int L = 0; L <= K.twice; ++L) {
            have -= 2 * L + 1;
            if (have < 0) missing += (missing.empty() ? "" : ", ") + std::to_string(L);
        }
        throw std::invalid_argument(
            "reconstruct_correlations: exact mode needs " + std::to_string(expected) +
            " records in L-blocks, got " + std::to_string(records.size()) +
            (missing.empty() ? "" : "; incomplete orders L = " + missing));
    }

    std::vector<MultipoleVector> multipoles;
    std::vector<DirectionSet> sets;
    std::vector<std::vector<double>> tilde_values;
    size_t offset = 0;
    for (int L = 0; L <= K.twice; ++L) {
        const int n = 2 * L + 1;
        DirectionSet set;
        set.L = L;
        std::vector<double> tilde(n);
        for (int j = 0; j < n; ++j) {
            const MeasurementRecord& rec = records[offset + j];
            if (rec.K != K)
                throw std::invalid_argument("reconstruct_correlations: record K mismatch");
            set.directions.push_back(rec.direction);
            tilde[j] = schur_transform_I(rec, L);
        }
        offset += n;
        double cond = 1.0;
        multipoles.push_back(
            discrete_inversion(tilde, set, opts.cond_error_threshold, &cond));
        diag.cond_P[L] = cond;
        if (cond > opts.cond_warn_threshold)
            diag.warnings.push_back("cond(P_" + std::to_string(L) + ") = " +
                                    std::to_string(cond) + " exceeds the warning threshold");
        sets.push_back(std::move(set));
        tilde_values.push_back(std::move(tilde));
    }

    CorrelationMatrix g = inverse_schur_G(multipoles);

    // Consistency defect: re-derive each I~_L from the reconstructed matrix.
    double residual = 0.0;
    for (int L = 0; L <= K.twice; ++L) {
        const MultipoleVector model = multipole_of(g, L);
        for (size_t j = 0; j < sets[L].directions.size(); ++j) {
            const double forward = schur_intensity_forward(model, sets[L].directions[j]);
            residual = std::max(residual, std::abs(forward - tilde_values[L][j]));
        }
    }
    diag.residual = residual;

    if (opts.psd_project) {
        g = psd_projected(g);
        diag.psd_projected = true;
    }
    return {std::move(g), std::move(diag)};
}

std::pair<CorrelationMatrix, ReconstructionDiagnostics> reconstruct_least_squares(
    const std::vector<MeasurementRecord>& records, HalfInt K, const ReconstructionOptions& opts) {
    ReconstructionDiagnostics diag;
    diag.K = K;
    diag.mode = "lsq";

    const int dim = K.multiplicity();
    const int n_params = dim * dim;

    std::vector<std::pair<long, long>> keys;
    for (const auto& rec : records) {
        if (rec.K != K) throw std::invalid_argument("reconstruct_correlations: record K mismatch");
        keys.push_back({std::lround(rec.direction.theta * 1e9),
                        std::lround(rec.direction.normalized().phi * 1e9)});
    }
    std::sort(keys.begin(), keys.end());
    const int distinct =
        static_cast<int>(std::unique(keys.begin(), keys.end()) - keys.begin());
    if (distinct < n_params)
        throw std::invalid_argument("reconstruct_correlations: insufficient directions (" +
                                    std::to_string(distinct) + " distinct, need >= " +
                                    std::to_string(n_params) + ")");

    const int n_rows = static_cast<int>(records.size()) * dim;
    Eigen::MatrixXd a(n_rows, n_params);
    Eigen::VectorXd b(n_rows);
    Eigen::VectorXd sigma(n_rows);

    // Exactly deterministic rows (zero reported error) get a floor tied to the
    // median noise level so their weight stays large but finite; with no noisy
    // rows at all the fit degrades to plain unweighted least squares.
    std::vector<double> positive_sigmas;
    for (const auto& rec : records)
        for (double s : rec.std_errors)
            if (s > 0.0) positive_sigmas.push_back(s);
    double sigma_floor = 1.0;
    if (!positive_sigmas.empty()) {
        std::sort(positive_sigmas.begin(), positive_sigmas.end());
        sigma_floor = std::max(1e-12, 1e-2 * positive_sigmas[positive_sigmas.size() / 2]);
    }

    int row = 0;

    for (const auto& rec : records) {
        for (int qi = 0; qi < dim; ++qi) {
            const HalfInt q = HalfInt::from_twice(K.twice - 2 * qi);
            const Eigen::MatrixXcd coeffs = intensity_design_coeffs(K, q, rec.direction);
            int col = 0;
            for (int i = 0; i < dim; ++i) a(row, col++) = coeffs(i, i).real();
            for (int i = 0; i < dim; ++i)
                for (int j = i + 1; j < dim; ++j) {
                    a(row, col++) = 2.0 * coeffs(i, j).real();
                    a(row, col++) = -2.0 * coeffs(i, j).imag();
                }
            b(row) = rec.values[qi];
            const double s = (qi < static_cast<int>(rec.std_errors.size()))
                                 ? rec.std_errors[qi]
                                 : 0.0;
            sigma(row) = std::max(s, sigma_floor);
            ++row;
        }
    }

    const Eigen::VectorXd w = sigma.cwiseInverse();
    const Eigen::MatrixXd aw = w.asDiagonal() * a;
    const Eigen::VectorXd bw = w.asDiagonal() * b;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(aw);
    const double s_max = svd.singularValues().maxCoeff();
    const double rank_tol = s_max * 1e-12 * std::max(n_rows, n_params);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()(i) > rank_tol) ++rank;
    if (rank < n_params)
        throw ConditioningError("reconstruct_correlations: rank-deficient design matrix (rank " +
                                    std::to_string(rank) + " of " + std::to_string(n_params) + ")",
                                -1, std::numeric_limits<double>::infinity());
    diag.cond_design = s_max / svd.singularValues().minCoeff();

    const Eigen::MatrixXd h =
        aw.transpose() * aw + opts.lambda * Eigen::MatrixXd::Identity(n_params, n_params);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    const Eigen::VectorXd x = ldlt.solve(aw.transpose() * bw);

    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(n_params, n_params));
    diag.param_std_errors.resize(n_params);
    for (int i = 0; i < n_params; ++i)
        diag.param_std_errors[i] = std::sqrt(std::max(0.0, cov(i, i)));

    diag.residual = (aw * x - bw).squaredNorm(); // chi^2

    CorrelationMatrix g{K, params_to_hermitian(x, dim)};
    if (opts.psd_project) {
        g = psd_projected(g);
        diag.psd_projected = true;
    }
    return {std::move(g), std::move(diag)};
}

} // namespace

std::pair<CorrelationMatrix, ReconstructionDiagnostics> reconstruct_correlations(
    const std::vector<MeasurementRecord>& records, HalfInt K, const ReconstructionOptions& opts) {
    if (K.twice < 0) throw std::invalid_argument("reconstruct_correlations: K must be >= 0");
    if (opts.mode == ReconstructionOptions::Mode::Exact)
        return reconstruct_exact(records, K, opts);
    return reconstruct_least_squares(records, K, opts);
}

} // namespace polariscope
