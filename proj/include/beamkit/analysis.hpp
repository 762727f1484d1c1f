#ifndef BEAMKIT_ANALYSIS_HPP
#define BEAMKIT_ANALYSIS_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "beamkit/design.hpp"
#include "beamkit/spatial.hpp"
#include "beamkit/steering.hpp"

namespace beamkit {

inline constexpr double kBeampatternFloorDb = -80.0;

struct Beampattern {
    std::vector<double> freqs_hz;      // F
    std::vector<Direction> directions; // M
    Eigen::MatrixXcd values;           // F x M
};

struct WngCurve {
    std::vector<double> freqs_hz;
    std::vector<double> wng_db;
};

// Realized per-channel responses W_n(w) of an FIR beamformer at one frequency.
Eigen::VectorXcd fir_response(const FirBeamformer& bf, double freq_hz);

Beampattern beampattern(const FirBeamformer& bf, const SteeringModel& model,
                        const ArrayGeometry& geom,
                        const std::vector<Direction>& directions,
                        const std::vector<double>& freqs_hz);

Beampattern beampattern(const std::vector<NarrowbandWeights>& weights,
                        const SteeringModel& model, const ArrayGeometry& geom,
                        const std::vector<Direction>& directions);

// 10*log10(|B|^2), floored at kBeampatternFloorDb.
Eigen::MatrixXd bp_db(const Beampattern& bp);

WngCurve wng_curve(const FirBeamformer& bf, const SteeringModel& model,
                   const ArrayGeometry& geom, const Direction& look,
                   const std::vector<double>& freqs_hz);

WngCurve wng_curve(const std::vector<NarrowbandWeights>& weights,
                   const SteeringModel& model, const ArrayGeometry& geom,
                   const Direction& look);

// CSV layouts: beampattern has a header row of azimuths and a leading
// frequency column; WNG is freq_hz,wng_db.
void write_beampattern_csv(const std::string& path, const Beampattern& bp);
void write_wng_csv(const std::string& path, const WngCurve& curve);

} // namespace beamkit

#endif
