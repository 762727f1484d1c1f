#ifndef BEAMKIT_DESIGN_HPP
#define BEAMKIT_DESIGN_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "beamkit/spatial.hpp"
#include "beamkit/steering.hpp"

namespace beamkit {

// One broadband beamformer design problem: fit a frequency-independent
// desired response over a direction grid, per frequency, under a white-noise
// gain floor and a distortionless look-direction constraint.
struct DesignSpec {
    FrequencyGrid grid;
    std::vector<Direction> directions; // M design directions
    Eigen::VectorXd desired;           // length M, entries in [0,1], 1 at the look direction
    Direction look;
    double gamma_db = -10.0;           // WNG lower bound, dB
    int fir_length = 1024;             // L >= 2
    SteeringModel model;

    double gamma_linear() const;
    void validate(const ArrayGeometry& geom) const;

    // desired = 1 at the grid direction matching `look`, 0 elsewhere.
    static Eigen::VectorXd delta_desired(const std::vector<Direction>& directions,
                                         const Direction& look);
};

struct NarrowbandWeights {
    double freq_hz = 0.0;
    Eigen::VectorXcd w;        // length N
    double lambda = 0.0;       // ridge multiplier of the active norm constraint
    double residual = 0.0;     // squared LS objective at the solution
    double wng_linear = 0.0;   // |w^T d|^2 / (w^H w)
};

struct FirBeamformer {
    Eigen::MatrixXd taps;             // N x L, real
    double sample_rate_hz = 0.0;
    double group_delay_samples = 0.0; // (L-1)/2
    // group delay minus any bulk delay already inverted by the design backend;
    // the net lag of the output relative to the acoustic channel signals.
    double response_delay_samples = 0.0;
    double fit_error_db = -300.0;     // worst in-band realization error
    std::string spec_digest;

    int channels() const { return static_cast<int>(taps.rows()); }
    int length() const { return static_cast<int>(taps.cols()); }

    static FirBeamformer load(const std::string& path);
    void save(const std::string& path) const;
    void save_wav(const std::string& path) const;
};

// Minimize ||G w - desired||^2 subject to d^T w = 1 and ||w||^2 <= 1/gamma.
// The equality constraint is eliminated through the minimum-norm particular
// solution conj(d)/||d||^2 plus an orthonormal basis of {v : d^T v = 0};
// the remaining norm-ball problem is solved by bisection on the ridge
// parameter of the normal equations.
NarrowbandWeights solve_narrowband(const SteeringMatrix& steering,
                                   const Eigen::VectorXd& desired,
                                   double gamma_linear);

// Independent per-frequency solves across the design grid.
std::vector<NarrowbandWeights> design_broadband(const DesignSpec& spec,
                                                const ArrayGeometry& geom);

// Least-squares fit of length-L causal FIR filters to the narrowband weights,
// target W_n(w) * exp(-j*w*(L-1)/2), weight 1 in the pass-band and 0.01
// outside. When L exceeds twice the number of grid points the fit is
// restricted to a support that the grid can determine, centered where the
// target energy actually sits: weights that invert a stored-set backend carry
// a bulk-delay advance, which `target_advance_samples` accounts for.
FirBeamformer fir_approximation(const std::vector<NarrowbandWeights>& weights,
                                int fir_length, const FrequencyGrid& grid,
                                double target_advance_samples = 0.0);

// FIR approximation of already-solved weights plus provenance metadata.
FirBeamformer realize_fir(const DesignSpec& spec,
                          const std::vector<NarrowbandWeights>& weights);

// design_broadband + realize_fir.
FirBeamformer design_fir(const DesignSpec& spec, const ArrayGeometry& geom);

} // namespace beamkit

#endif
