#ifndef POLARISCOPE_FORWARD_HPP
#define POLARISCOPE_FORWARD_HPP

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "polariscope/fock.hpp"

namespace polariscope {

/// One wave plate of the quarter-half-quarter gadget: retarder kind plus axis angle.
struct PlateSetting {
    enum class Kind { Quarter, Half };
    Kind kind = Kind::Quarter;
    double angle = 0.0; // axis angle, normalized to [0, pi)

    static PlateSetting quarter(double angle);
    static PlateSetting half(double angle);
};

/// 2x2 SU(2) matrix acting on the mode amplitudes (a_H, a_V).
struct ModeUnitary {
    Eigen::Matrix2cd u;

    /// Rescales to det = +1 (principal square root of the determinant).
    ModeUnitary su2_normalized() const;

    double unitarity_defect() const;

    /// Frobenius distance to other, minimized over a global phase.
    double distance_up_to_phase(const ModeUnitary& other) const;
};

/// Intensity moments I_{Kq} at one measurement direction, q ordered K ... -K.
/// Doubles as the measurement record exchanged with the CLI: std_errors and
/// shots are populated by the shot-noise path and empty/absent for noiseless data.
struct IntensityMomentSet {
    HalfInt K;
    Direction direction;
    std::optional<double> psi;
    std::vector<double> values;
    std::vector<double> std_errors;
    std::optional<long long> shots;

    int index_of(HalfInt q) const { return (K - q).twice / 2; }
    double value(HalfInt q) const { return values.at(index_of(q)); }
};

using MeasurementRecord = IntensityMomentSet;

/// Jones unitary of a single plate: R(angle) diag(1, i) R(-angle) for a quarter
/// plate and R(angle) diag(1, -1) R(-angle) for a half plate, SU(2)-normalized.
ModeUnitary plate_unitary(const PlateSetting& p);

/// Composition of quarter-half-quarter plates; q1 is the plate the beam meets first.
ModeUnitary gadget_unitary(const PlateSetting& q1, const PlateSetting& h, const PlateSetting& q2);

struct GadgetSettings {
    PlateSetting q1, h, q2;
};

/// Plate angles whose gadget reproduces the target up to a global phase.
/// Closed-form y-x-y decomposition with a bounded numerical polish; throws a
/// SolverError carrying the best residual if the bound cannot be met.
GadgetSettings gadget_decompose(const ModeUnitary& target);

struct SolverError : std::runtime_error {
    double best_residual;
    SolverError(const std::string& what, double residual)
        : std::runtime_error(what), best_residual(residual) {}
};

/// Euler angles such that D^{1/2}(angles) equals u up to sign (double cover),
/// canonical branch theta in [0, pi], psi = 0 at the gimbal-degenerate poles.
EulerAngles su2_to_euler(const ModeUnitary& u);

/// rho_S -> D^S(g) rho_S D^S(g)^dag on every layer; weights unchanged.
/// Coherence blocks are rotated covariantly as well.
TwoModeState rotate_state(const TwoModeState& state, const EulerAngles& g);

/// I_{Kq}(g) = Tr[rho R(g) T_{Kq} T^dag_{Kq} R^dag(g)], evaluated by counter
/// rotating the state and reading binomial moments off the layer diagonals.
/// Independent of g.psi.
double intensity_moment_direct(const TwoModeState& state, const TensorIndex& idx,
                               const EulerAngles& g);

/// The same moment assembled from the multipole expansion of G^K over
/// spherical harmonics; must agree with intensity_moment_direct.
double intensity_moment_multipole(const CorrelationMatrix& G, HalfInt q, const Direction& dir);

/// Photon-count draws from the state rotated by g (i.i.d., seeded).  To
/// estimate I_{Kq}(g) of the unrotated state, sample at euler_inverse(g).
std::vector<PhotonCount> sample_counts(const TwoModeState& state, const EulerAngles& g,
                                       long long shots, uint64_t seed);

/// Sample mean and standard error of C(n_H, K+q) C(n_V, K-q) over the draws.
std::pair<double, double> estimate_intensity(const std::vector<PhotonCount>& counts,
                                             const TensorIndex& idx);

} // namespace polariscope

#endif
