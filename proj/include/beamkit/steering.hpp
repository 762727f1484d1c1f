#ifndef BEAMKIT_STEERING_HPP
#define BEAMKIT_STEERING_HPP

#include <complex>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "beamkit/spatial.hpp"

namespace beamkit {

// ---------------------------------------------------------------------------
// Stored impulse-response sets
// ---------------------------------------------------------------------------

// A set of head-related impulse responses measured or synthesized for one
// source distance. Valid only at that distance. Immutable after load.
struct HrtfSet {
    double sample_rate_hz = 0.0;
    double source_distance_m = 0.0;
    double bulk_delay_samples = 0.0; // common causal delay baked into every HRIR
    int mic_count = 0;
    std::vector<Direction> directions;
    // hrirs[direction][mic] is a real impulse response; all share one length.
    std::vector<std::vector<std::vector<double>>> hrirs;

    int taps() const;
    void validate() const;

    // Index of the stored direction within tol_deg of `dir` (nearest if
    // several), or -1 if none qualifies.
    int find_direction(const Direction& dir, double tol_deg = 0.5) const;

    static HrtfSet load(const std::string& path);
    void save(const std::string& path) const;
};

// ---------------------------------------------------------------------------
// Rigid-sphere scattering
// ---------------------------------------------------------------------------

struct SphereEval {
    std::complex<double> value{0.0, 0.0};
    bool converged = false;
    int terms_used = 0;
};

// Radial part of the point-source/rigid-sphere series for one frequency,
// reusable across surface angles. Pressure on a rigid sphere of radius a due
// to a point source at range r, normalized to unit free-field pressure at the
// sphere center. Phase convention matches the free-field steering vectors:
// positive phase for propagation advance toward the source.
class SphereSeries {
public:
    SphereSeries(double radius_m, double source_distance_m, double freq_hz,
                 int max_order, double speed_of_sound = kSpeedOfSound);

    // mic_angle_rad: great-circle angle between the mic surface normal and the
    // source direction. The series is truncated once the running term drops
    // below 1e-10 of the partial sum; `converged` reports whether that
    // happened within max_order.
    SphereEval evaluate(double mic_angle_rad) const;

private:
    std::vector<std::complex<double>> mode_gain_; // (2m+1) * radial factor, prefactor folded in
    bool dc_ = false;
    bool tail_negligible_ = false; // constructor truncated on a uniform bound
};

SphereEval sphere_response(double radius_m, const SourcePosition& source,
                           double mic_angle_rad, double freq_hz, int max_order,
                           double speed_of_sound = kSpeedOfSound);

// ---------------------------------------------------------------------------
// Steering backends
// ---------------------------------------------------------------------------

struct FreeFieldModel {
    double speed_of_sound = kSpeedOfSound;
};

struct RigidSphereModel {
    double radius_m = 0.06;
    double source_distance_m = 1.1;
    int max_order = 60;
    double speed_of_sound = kSpeedOfSound;
};

struct HrtfModel {
    std::shared_ptr<const HrtfSet> set;
    double direction_tolerance_deg = 0.5;
};

using SteeringModel = std::variant<FreeFieldModel, RigidSphereModel, HrtfModel>;

// Per-frequency sensor responses toward one direction, length N.
Eigen::VectorXcd freefield_response(const ArrayGeometry& geom, const Direction& dir,
                                    double freq_hz, double speed_of_sound = kSpeedOfSound);

// DTFT of the stored HRIRs for the nearest direction (no interpolation).
Eigen::VectorXcd hrtf_response(const HrtfSet& set, const Direction& dir,
                               double freq_hz, double tol_deg = 0.5);

Eigen::VectorXcd model_response(const SteeringModel& model, const ArrayGeometry& geom,
                                const Direction& dir, double freq_hz);

// Common causal delay embedded in responses of this backend (nonzero only for
// stored sets). Needed to time-align beamformer outputs with acoustic paths.
double model_bulk_delay_samples(const SteeringModel& model);

std::string model_label(const SteeringModel& model);

struct SteeringMatrix {
    double freq_hz = 0.0;
    Eigen::MatrixXcd response;    // M x N, [m][n] = g_n toward direction m
    Eigen::VectorXcd look_vector; // length N, same backend, look direction
};

SteeringMatrix steering_matrix(const SteeringModel& model, const ArrayGeometry& geom,
                               const std::vector<Direction>& directions,
                               const Direction& look, double freq_hz);

// ---------------------------------------------------------------------------
// Set synthesis
// ---------------------------------------------------------------------------

// Sample the sphere transfer on a DFT grid, apply a causal bulk delay of
// taps/4 samples, inverse transform and taper the tails. Microphones are
// projected onto the sphere surface. `taps` must be a power of two.
HrtfSet synthesize_sphere_hrtf_set(const ArrayGeometry& geom, double radius_m,
                                   double source_distance_m,
                                   const std::vector<Direction>& directions,
                                   double sample_rate_hz, int taps, int max_order,
                                   double speed_of_sound = kSpeedOfSound);

// Free-field counterpart (pure inter-channel delays), same bulk delay layout.
HrtfSet synthesize_freefield_hrtf_set(const ArrayGeometry& geom, double source_distance_m,
                                      const std::vector<Direction>& directions,
                                      double sample_rate_hz, int taps,
                                      double speed_of_sound = kSpeedOfSound);

} // namespace beamkit

#endif
