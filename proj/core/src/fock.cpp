#include "polariscope/fock.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace polariscope {

namespace {

void require_spin(HalfInt S) {
    if (S.twice < 0) throw std::invalid_argument("layer spin must be non-negative");
}

} // namespace

void LayerState::validate(double herm_tol, double trace_tol, double eig_floor) const {
    require_spin(spin);
    if (rho.rows() != dim() || rho.cols() != dim())
        throw std::invalid_argument("LayerState: rho dimension does not match spin");
    if (weight < -trace_tol || weight > 1.0 + trace_tol)
        throw std::invalid_argument("LayerState: weight outside [0, 1]");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > herm_tol)
        throw std::invalid_argument("LayerState: rho not Hermitian");
    if (std::abs(rho.trace().real() - 1.0) > trace_tol || std::abs(rho.trace().imag()) > trace_tol)
        throw std::invalid_argument("LayerState: trace(rho) != 1");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < eig_floor)
        throw std::invalid_argument("LayerState: rho has a negative eigenvalue");
}

const LayerState* TwoModeState::find_layer(HalfInt spin) const {
    for (const auto& layer : layers)
        if (layer.spin == spin) return &layer;
    return nullptr;
}

HalfInt TwoModeState::max_spin() const {
    HalfInt s = HalfInt::from_twice(-1);
    for (const auto& layer : layers) s = std::max(s, layer.spin);
    return s;
}

double TwoModeState::total_weight() const {
    double w = 0.0;
    for (const auto& layer : layers) w += layer.weight;
    return w;
}

void TwoModeState::validate(double tol) const {
    for (const auto& layer : layers) layer.validate();
    if (std::abs(total_weight() - 1.0) > 1e-12)
        throw std::invalid_argument("TwoModeState: layer weights do not sum to 1");
    if (coherences.empty()) return;

    // Assemble the global matrix over the layers present and check it is PSD.
    std::map<int, int> offset;
    int total = 0;
    for (const auto& layer : layers) {
        offset[layer.spin.twice] = total;
        total += layer.dim();
    }
    Eigen::MatrixXcd full = Eigen::MatrixXcd::Zero(total, total);
    for (const auto& layer : layers) {
        const int o = offset.at(layer.spin.twice);
        full.block(o, o, layer.dim(), layer.dim()) = layer.weight * layer.rho;
    }
    for (const auto& [key, block] : coherences) {
        const auto [lo, hi] = key;
        if (lo >= hi) throw std::invalid_argument("TwoModeState: coherence key must have S < S'");
        auto it_lo = offset.find(lo);
        auto it_hi = offset.find(hi);
        if (it_lo == offset.end() || it_hi == offset.end())
            throw std::invalid_argument("TwoModeState: coherence block references missing layer");
        if (block.rows() != lo + 1 || block.cols() != hi + 1)
            throw std::invalid_argument("TwoModeState: coherence block has wrong shape");
        full.block(it_lo->second, it_hi->second, block.rows(), block.cols()) = block;
        full.block(it_hi->second, it_lo->second, block.cols(), block.rows()) = block.adjoint();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(full, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol)
        throw std::invalid_argument("TwoModeState: assembled state is not positive semidefinite");
}

LayerState pure_layer_state(HalfInt S, const Eigen::VectorXcd& amplitudes) {
    require_spin(S);
    if (amplitudes.size() != S.multiplicity())
        throw std::invalid_argument("pure_layer_state: amplitude count must be 2S+1");
    const double norm = amplitudes.norm();
    if (norm == 0.0) throw std::invalid_argument("pure_layer_state: zero amplitude vector");
    Eigen::VectorXcd psi = amplitudes / norm;
    LayerState layer;
    layer.spin = S;
    layer.weight = 1.0;
    layer.rho = psi * psi.adjoint();
    return layer;
}

LayerState random_layer_state(HalfInt S, int rank, uint64_t seed) {
    require_spin(S);
    const int dim = S.multiplicity();
    if (rank < 1 || rank > dim)
        throw std::invalid_argument("random_layer_state: rank out of range");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Haar unitary from the QR decomposition of a complex Ginibre matrix.
    Eigen::MatrixXcd ginibre(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) ginibre(i, j) = Complex(gauss(rng), gauss(rng));
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(ginibre);
    Eigen::MatrixXcd q = qr.householderQ();
    Eigen::MatrixXcd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j) {
        const Complex d = r(j, j);
        if (std::abs(d) > 0) q.col(j) *= d / std::abs(d);
    }

    std::exponential_distribution<double> expo(1.0);
    Eigen::VectorXd eigs = Eigen::VectorXd::Zero(dim);
    double sum = 0.0;
    for (int i = 0; i < rank; ++i) {
        eigs(i) = expo(rng);
        sum += eigs(i);
    }
    eigs /= sum;

    LayerState layer;
    layer.spin = S;
    layer.weight = 1.0;
    layer.rho = q * eigs.asDiagonal() * q.adjoint();
    layer.rho = 0.5 * (layer.rho + layer.rho.adjoint().eval());
    return layer;
}

TwoModeState single_layer(LayerState layer) {
    layer.weight = 1.0;
    TwoModeState state;
    state.layers.push_back(std::move(layer));
    return state;
}

double tensor_coefficient(const TensorIndex& idx, HalfInt S, HalfInt m) {
    if (!valid_jm(S, m)) return 0.0;
    const int n_h = (S + m).twice / 2;
    const int n_v = (S - m).twice / 2;
    const int ph = (idx.K + idx.q).twice / 2;
    const int pv = (idx.K - idx.q).twice / 2;
    return std::sqrt(binomial(n_h + ph, ph) * binomial(n_v + pv, pv));
}

Eigen::VectorXcd apply_tensor(const TensorIndex& idx, HalfInt S, const Eigen::VectorXcd& vec) {
    require_spin(S);
    if (vec.size() != S.multiplicity())
        throw std::invalid_argument("apply_tensor: vector dimension must be 2S+1");
    const HalfInt S_out = S + idx.K;
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(S_out.multiplicity());
    for (int i = 0; i < vec.size(); ++i) {
        const HalfInt m = HalfInt::from_twice(S.twice - 2 * i);
        const HalfInt m_out = m + idx.q;
        const int i_out = (S_out - m_out).twice / 2;
        out(i_out) += tensor_coefficient(idx, S, m) * vec(i);
    }
    return out;
}

CorrelationMatrix correlation_matrix(const TwoModeState& state, HalfInt K) {
    if (K.twice < 0) throw std::invalid_argument("correlation_matrix: K must be >= 0");
    const int dim = K.multiplicity();
    CorrelationMatrix out{K, Eigen::MatrixXcd::Zero(dim, dim)};

    // Per layer S: Tr(rho T_Kq T^dag_Kq') = sum_mu c_q(mu) c_q'(mu) <S,mu+q'|rho|S,mu+q>
    // with mu ranging over the lower layer S - K.
    for (const auto& layer : state.layers) {
        if (layer.spin.twice < K.twice) continue;
        const HalfInt S_low = layer.spin - K;
        for (int a = 0; a < dim; ++a) {
            const HalfInt q = HalfInt::from_twice(K.twice - 2 * a);
            const TensorIndex tq(K, q);
            for (int b = 0; b < dim; ++b) {
                const HalfInt qp = HalfInt::from_twice(K.twice - 2 * b);
                const TensorIndex tqp(K, qp);
                Complex acc(0.0, 0.0);
                for (int u = 0; u < S_low.multiplicity(); ++u) {
                    const HalfInt mu = HalfInt::from_twice(S_low.twice - 2 * u);
                    const double cq = tensor_coefficient(tq, S_low, mu);
                    const double cqp = tensor_coefficient(tqp, S_low, mu);
                    acc += cq * cqp * layer.element(mu + qp, mu + q);
                }
                out.g(a, b) += layer.weight * acc;
            }
        }
    }
    return out;
}

Complex interlayer_correlation(const TwoModeState& state, HalfInt K, HalfInt K2,
                               HalfInt q, HalfInt q2) {
    if (!valid_jm(K, q) || !valid_jm(K2, q2))
        throw std::invalid_argument("interlayer_correlation: invalid (K, q) pair");
    const HalfInt dK = K - K2;
    const HalfInt dq = q - q2;

    Complex total(0.0, 0.0);
    // Tr(rho T_Kq T^dag_{K2 q2}) = sum over layers S1 and projections m1 of
    // c(T_{K2 q2}: S1-K2 -> S1) * c(T_Kq: S1-K2 -> S1+dK) * <S1,m1| rho |S1+dK, m1+dq>.
    for (const auto& layer : state.layers) {
        const HalfInt S1 = layer.spin;
        if ((S1 - K2).twice < 0) continue;
        const HalfInt S2 = S1 + dK;
        if (S2.twice < 0) continue;

        const bool diagonal = (dK.twice == 0);
        const LayerState* bra_layer = &layer;
        const Eigen::MatrixXcd* block = nullptr;
        bool conjugate_block = false;
        if (!diagonal) {
            const int lo = std::min(S1.twice, S2.twice);
            const int hi = std::max(S1.twice, S2.twice);
            auto it = state.coherences.find({lo, hi});
            if (it == state.coherences.end()) continue; // no coherence, contributes 0
            block = &it->second;
            conjugate_block = (S1.twice > S2.twice);
        }

        for (int i = 0; i < S1.multiplicity(); ++i) {
            const HalfInt m1 = bra_layer->m_of(i);
            const HalfInt m2 = m1 + dq;
            if (!valid_jm(S2, m2)) continue;
            const HalfInt mu = m1 - q2; // projection in the intermediate layer S1 - K2
            const double c2 = tensor_coefficient(TensorIndex(K2, q2), S1 - K2, mu);
            const double c1 = tensor_coefficient(TensorIndex(K, q), S1 - K2, mu);
            if (c1 == 0.0 || c2 == 0.0) continue;

            Complex rho_el;
            if (diagonal) {
                rho_el = layer.weight * layer.element(m1, m2);
            } else if (!conjugate_block) {
                rho_el = (*block)((S1 - m1).twice / 2, (S2 - m2).twice / 2);
            } else {
                rho_el = std::conj((*block)((S2 - m2).twice / 2, (S1 - m1).twice / 2));
            }
            total += c1 * c2 * rho_el;
        }
    }
    return total;
}

double tensor_norm_sum(HalfInt S, HalfInt K, HalfInt q) {
    require_spin(S);
    const TensorIndex idx(K, q);
    double sum = 0.0;
    for (int i = 0; i < S.multiplicity(); ++i) {
        const HalfInt m = HalfInt::from_twice(S.twice - 2 * i);
        const double c = tensor_coefficient(idx, S, m);
        sum += c * c;
    }
    return sum;
}

std::vector<std::pair<PhotonCount, double>> photon_number_distribution(const TwoModeState& state) {
    std::vector<std::pair<PhotonCount, double>> table;
    for (const auto& layer : state.layers) {
        for (int i = 0; i < layer.dim(); ++i) {
            const HalfInt m = layer.m_of(i);
            const int n_h = (layer.spin + m).twice / 2;
            const int n_v = (layer.spin - m).twice / 2;
            const double p = layer.weight * layer.rho(i, i).real();
            table.push_back({PhotonCount{n_h, n_v}, p});
        }
    }
    return table;
}

} // namespace polariscope
