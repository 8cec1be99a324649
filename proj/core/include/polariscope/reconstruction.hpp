#ifndef POLARISCOPE_RECONSTRUCTION_HPP
#define POLARISCOPE_RECONSTRUCTION_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "polariscope/forward.hpp"

namespace polariscope {

/// Multipole components G~_L^(m), indexed m = -L ... L (components[m + L]).
///
/// Convention: the transforms below are normalized so that
///   I~_L(theta, phi) = sqrt(4 pi / (2L+1)) sum_m conj(Y_{Lm}) G~_L^(m)
/// holds exactly against the forward model; Hermitian-consistent data obeys
/// G~_L^(-m) = (-1)^m conj(G~_L^(m)).
struct MultipoleVector {
    int L = 0;
    std::vector<Complex> components;

    static MultipoleVector zero(int L) {
        return MultipoleVector{L, std::vector<Complex>(2 * L + 1, Complex(0, 0))};
    }
    Complex& at_m(int m) { return components.at(m + L); }
    const Complex& at_m(int m) const { return components.at(m + L); }
    double norm() const;
};

/// 2L+1 measurement directions for the order-L inversion, with diagnostics.
struct DirectionSet {
    int L = 0;
    std::vector<Direction> directions;
    double cond_P = 1.0;
    double cond_Y = 1.0;
    double min_line_angle = 0.0; // radians, over antipodally identified pairs
};

/// Positive spherical quadrature; the default grid integrates every product of
/// spherical harmonics up to the requested degree exactly.
struct QuadratureGrid {
    struct Node {
        Direction dir;
        double weight;
    };
    std::vector<Node> nodes;

    /// Gauss-Legendre in cos(theta) crossed with equispaced phi, exact for all
    /// spherical-harmonic integrands of combined degree <= max_degree.
    static QuadratureGrid gauss_legendre(int max_degree);

    double total_weight() const;
};

struct ConditioningError : std::runtime_error {
    int L;
    double condition_number;
    ConditioningError(const std::string& what, int L_, double cond)
        : std::runtime_error(what), L(L_), condition_number(cond) {}
};

/// Schur (Clebsch-Gordan) transform of a set of intensity moments:
///   I~_L = sum_q (-1)^(K-q) C^{L0}_{Kq,K-q} I_{Kq}.
/// The (-1)^(K-q) weight resolves the printed phase ambiguity; it is the unique
/// choice under which I~_L is a pure order-L spherical function of the direction.
double schur_transform_I(const IntensityMomentSet& values, int L);

/// Schur transform of a correlation matrix:
///   G~_L^(m) = sum_{q'} (-1)^(K-q') C^{Lm}_{K q'+m, K -q'} G_{q'+m, q'}.
Complex schur_transform_G(const CorrelationMatrix& G, int L, int m);

/// All components of order L at once.
MultipoleVector multipole_of(const CorrelationMatrix& G, int L);

/// Forward evaluation of the compact Schur form:
///   I~_L(dir) = sqrt(4 pi / (2L+1)) sum_m conj(Y_{Lm}(dir)) G~_L^(m).
double schur_intensity_forward(const MultipoleVector& gt, const Direction& dir);

/// Reassembles G^K from the complete multipole set L = 0 ... 2K; throws
/// std::invalid_argument naming any missing order.
CorrelationMatrix inverse_schur_G(const std::vector<MultipoleVector>& multipoles);

/// Continuous-angle inversion: quadrature of I_{Kq} Y_{Lm} over the sphere,
/// rescaled by the inverse stretched coefficients and recombined through
/// Clebsch-Gordan sums.  Any q with C^{L0}_{Kq,K-q} != 0 for every L <= 2K is
/// admissible; a vanishing coefficient raises std::invalid_argument telling the
/// caller to pick a different q (q = +-K always works).
CorrelationMatrix continuous_inversion(
    const std::function<IntensityMomentSet(const Direction&)>& sampler, HalfInt K, HalfInt q,
    const QuadratureGrid& grid);

/// First-order closed form: applies the verbatim 3x3 matrix
///   (1/sqrt(3)) [ -1  i  0 ; 0 0 sqrt(2) ; 1  i  0 ]
/// to (I~_1(x), I~_1(y), I~_1(z)); the result is returned in that matrix's own
/// normalization, ordered (m = -1, 0, +1).  Use first_order_to_canonical to map
/// it into the convention shared by the rest of the pipeline.
MultipoleVector first_order_inversion(double i_x, double i_y, double i_z);

/// Conversion between the first-order closed form's normalization and the
/// pipeline convention: canonical^(m) = (-1)^m sqrt(3/2) closed_form^(-m).
MultipoleVector first_order_to_canonical(const MultipoleVector& closed_form);

/// 2L+1 directions spreading lines over the sphere: seeded multi-start
/// repulsion ascent with antipodal identification, keeping the best
/// configuration seen (canonical axis/icosahedral starts included).
DirectionSet design_directions(int L, uint64_t seed);

/// Per-L discrete inversion: G~_L = sqrt(4 pi/(2L+1)) Y_L^T P_L^{-1} I~_L with
/// [Y_L]_{jm} = Y_{Lm}(theta_j, phi_j) and [P_L]_{jk} = P_L(cos chi_jk), the
/// inter-direction angle taken from the spherical law of cosines.  Throws
/// ConditioningError when cond(P_L) exceeds cond_error_threshold.
MultipoleVector discrete_inversion(const std::vector<double>& values, const DirectionSet& dirs,
                                   double cond_error_threshold = 1e6,
                                   double* cond_out = nullptr);

struct ReconstructionOptions {
    enum class Mode { Exact, LeastSquares };
    Mode mode = Mode::Exact;
    double lambda = 0.0;      // Tikhonov strength (least-squares mode)
    bool psd_project = false; // clip negative eigenvalues of the estimate
    double cond_error_threshold = 1e6;
    double cond_warn_threshold = 1e3;
};

struct ReconstructionDiagnostics {
    HalfInt K;
    std::string mode;
    double residual = 0.0; // exact: max Schur-consistency defect; lsq: chi^2
    std::map<int, double> cond_P;
    bool psd_projected = false;
    double cond_design = 0.0;                // least-squares only
    std::vector<double> param_std_errors;    // least-squares only, see layout below
    std::vector<std::string> warnings;
};

/// Hermitian matrix <-> real parameter vector, ordered: the 2K+1 diagonal
/// entries (q descending), then for each upper pair (i < j, row-major) the real
/// and imaginary parts of G_{ij}.
Eigen::VectorXd hermitian_to_params(const Eigen::MatrixXcd& g);
Eigen::MatrixXcd params_to_hermitian(const Eigen::VectorXd& params, int dim);

/// Full inversion of measured intensity moments into G^K.
///
/// Exact mode consumes exactly (2K+1)^2 records ordered in L-blocks
/// (2L+1 records for L = 0, 1, ..., 2K in that order) and chains
/// schur_transform_I -> discrete_inversion -> inverse_schur_G.
/// Least-squares mode solves the multipole forward model for all records
/// jointly, weighted by the reported standard errors, with optional Tikhonov
/// regularization; Hermiticity holds by construction.
std::pair<CorrelationMatrix, ReconstructionDiagnostics> reconstruct_correlations(
    const std::vector<MeasurementRecord>& records, HalfInt K,
    const ReconstructionOptions& opts = {});

/// Eigenvalue clipping onto the PSD cone.
CorrelationMatrix psd_projected(const CorrelationMatrix& G);

} // namespace polariscope

#endif
