#ifndef POLARISCOPE_FOCK_HPP
#define POLARISCOPE_FOCK_HPP

#include <map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "polariscope/angular.hpp"
#include "polariscope/half_int.hpp"

namespace polariscope {

/// Density operator restricted to one Fock layer of spin S, in the basis
/// |S, m> with m descending: row/column index i corresponds to m = S - i,
/// so index 0 is m = S (occupations n_H = 2S, n_V = 0).
struct LayerState {
    HalfInt spin;
    double weight = 1.0;
    Eigen::MatrixXcd rho;

    int dim() const { return spin.multiplicity(); }
    int index_of(HalfInt m) const { return (spin - m).twice / 2; }
    HalfInt m_of(int index) const { return HalfInt::from_twice(spin.twice - 2 * index); }

    /// <S, m_row | rho | S, m_col>
    Complex element(HalfInt m_row, HalfInt m_col) const {
        return rho(index_of(m_row), index_of(m_col));
    }

    /// Throws if rho is not Hermitian/unit-trace/PSD within the stated tolerances.
    void validate(double herm_tol = 1e-12, double trace_tol = 1e-12,
                  double eig_floor = -1e-10) const;
};

/// Block-diagonal two-mode state as a weighted collection of Fock layers,
/// with optional inter-layer coherence blocks used only by forward operations.
///
/// A coherence block keyed (2S, 2S') with S < S' holds <S, m| rho |S', m'>
/// (rows m descending, columns m' descending) of the assembled global state.
struct TwoModeState {
    std::vector<LayerState> layers;
    std::map<std::pair<int, int>, Eigen::MatrixXcd> coherences;

    const LayerState* find_layer(HalfInt spin) const;
    HalfInt max_spin() const;
    double total_weight() const;

    /// Checks layer invariants, weight normalization, and (when coherences are
    /// present) positive semidefiniteness of the assembled global matrix.
    void validate(double tol = 1e-10) const;
};

/// Index (K, q) of a tensor operator, -K <= q <= K.
struct TensorIndex {
    HalfInt K;
    HalfInt q;

    TensorIndex(HalfInt K_, HalfInt q_) : K(K_), q(q_) {
        if (!valid_jm(K, q)) throw std::invalid_argument("TensorIndex: require -K <= q <= K");
    }
};

/// The (2K+1) x (2K+1) matrix G^K_{q q'} of Glauber-ordered field correlations,
/// rows q descending, columns q' descending (index 0 is q = K).
struct CorrelationMatrix {
    HalfInt K;
    Eigen::MatrixXcd g;

    int dim() const { return K.multiplicity(); }
    int index_of(HalfInt q) const { return (K - q).twice / 2; }
    Complex entry(HalfInt q, HalfInt qp) const { return g(index_of(q), index_of(qp)); }
};

/// Normalized rank-1 layer state from amplitudes ordered m = S ... -S.
LayerState pure_layer_state(HalfInt S, const Eigen::VectorXcd& amplitudes);

/// Reproducible random density matrix of the given rank: Haar eigenvectors,
/// simplex-distributed eigenvalues.
LayerState random_layer_state(HalfInt S, int rank, uint64_t seed);

TwoModeState single_layer(LayerState layer);

/// Image of an amplitude vector in layer S under T_{Kq}; the result lives in
/// layer S + K.  Component (n_H, n_V) maps to (n_H + K + q, n_V + K - q) with
/// coefficient sqrt(C(n_H + K + q, K + q) * C(n_V + K - q, K - q)).
Eigen::VectorXcd apply_tensor(const TensorIndex& idx, HalfInt S, const Eigen::VectorXcd& vec);

/// Coefficient <S+K, m+q| T_{Kq} |S, m>; zero when either ket is out of range.
double tensor_coefficient(const TensorIndex& idx, HalfInt S, HalfInt m);

/// G^K_{qq'} = sum_S w_S Tr(rho_S T_{Kq} T^dag_{Kq'}).  Layers with S < K
/// contribute nothing; if no layer reaches K the result is the zero matrix.
CorrelationMatrix correlation_matrix(const TwoModeState& state, HalfInt K);

/// Tr(rho T_{Kq} T^dag_{K2 q2}) including inter-layer coherence contributions;
/// equals the correlation_matrix entry when K == K2.
Complex interlayer_correlation(const TwoModeState& state, HalfInt K, HalfInt K2,
                               HalfInt q, HalfInt q2);

/// sum_m || T_{Kq} |S, m> ||^2, which equals C(2S + 2K + 1, 2K + 1) for every q.
double tensor_norm_sum(HalfInt S, HalfInt K, HalfInt q);

struct PhotonCount {
    int n_h = 0;
    int n_v = 0;
    auto operator<=>(const PhotonCount&) const = default;
};

/// Joint photon-number distribution p(n_H, n_V) read off the layer diagonals.
std::vector<std::pair<PhotonCount, double>> photon_number_distribution(const TwoModeState& state);

} // namespace polariscope

#endif
