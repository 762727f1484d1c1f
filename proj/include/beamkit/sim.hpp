#ifndef BEAMKIT_SIM_HPP
#define BEAMKIT_SIM_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "beamkit/design.hpp"
#include "beamkit/spatial.hpp"
#include "beamkit/steering.hpp"

namespace beamkit {

// Deterministic broadband test signal: seeded white noise shaped by a fixed
// second-order spectral tilt.
std::vector<double> speech_shaped_noise(std::size_t samples, std::uint64_t seed);

struct Scenario {
    SourcePosition target;
    SourcePosition interferer;
    std::vector<double> target_signal;
    std::vector<double> interferer_signal;
    double sample_rate_hz = 16000.0;
    double sir_in_db = 0.0; // target-to-interferer ratio at the reference mic
    std::uint64_t seed = 0;
    double duration_s = 0.0;

    void validate() const;

    // {target:{az,el,dist}, interferer:{...}, sir_in_db, seed, duration_s};
    // signals are synthesized from the seed.
    static Scenario load(const std::string& path, double sample_rate_hz);
    static Scenario make(const SourcePosition& target, const SourcePosition& interferer,
                         double sir_in_db, std::uint64_t seed, double duration_s,
                         double sample_rate_hz);
};

// channel n = signal (*) hrir_n for the stored direction nearest src; output
// length = len(signal) + taps - 1. The set must match the source distance.
std::vector<std::vector<double>> render_source(const HrtfSet& set, const SourcePosition& src,
                                               std::span<const double> signal);

// Filter-and-sum engine: y = sum_n taps_n (*) x_n (FFT-based).
std::vector<double> fsb_process(const FirBeamformer& bf,
                                const std::vector<std::vector<double>>& channels);

struct ShadowOutputs {
    std::vector<double> target;     // beamformer output of the target-only mixture
    std::vector<double> interferer; // beamformer output of the interferer-only mixture
};

// Mixture rendering with exact source accounting. The rendered interferer is
// scaled so the reference-mic SIR equals scenario.sir_in_db.
struct RenderedScenario {
    std::vector<std::vector<double>> target_channels;
    std::vector<std::vector<double>> interferer_channels; // scaled
    int reference_mic = 0;
};

RenderedScenario render_scenario(const HrtfSet& acoustics, const Scenario& scenario,
                                 const ArrayGeometry& geom);

ShadowOutputs shadow_decompose(const FirBeamformer& bf, const RenderedScenario& rendered);

// Frequency-weighted segmental SNR in dB: 25 ms frames, 10 ms hop, 25
// mel-spaced bands over [50, fs/2], band weight = reference magnitude^0.2,
// per-frame SNR clamped to [-10, 35] dB before averaging.
double fwsegsnr(std::span<const double> reference, std::span<const double> test,
                double sample_rate_hz);

// In-band relative error energy (dB) between a processed signal and a
// reference, after compensating the processing delay.
double passband_error_db(std::span<const double> reference, std::span<const double> test,
                         double delay_samples, double sample_rate_hz,
                         double band_low_hz, double band_high_hz);

struct ScenarioMetrics {
    double sir_in_db = 0.0;
    double sir_out_db = 0.0;
    double sir_gain_db = 0.0;
    double fwsegsnr_in_db = 0.0;
    double fwsegsnr_out_db = 0.0;
    double distortion_db = 0.0;
};

ScenarioMetrics evaluate_scenario(const FirBeamformer& bf, const HrtfSet& acoustics,
                                  const Scenario& scenario, const ArrayGeometry& geom);

struct SweepRow {
    double sweep_value = 0.0; // steering azimuth (DOA mode) or distance (distance mode)
    std::string error_label;
    double sir_gain_db = 0.0;
    double fwsegsnr_in_db = 0.0;
    double fwsegsnr_out_db = 0.0;
    double distortion_db = 0.0;
};

struct SweepReport {
    std::string mode;
    std::uint64_t seed = 0;
    std::vector<SweepRow> rows;

    void save_csv(const std::string& path) const;
    void save_json(const std::string& path) const;
};

// One design + evaluation per steering error: rendering uses the true source
// positions, the design is steered to target azimuth + error.
SweepReport doa_error_sweep(const DesignSpec& spec, const ArrayGeometry& geom,
                            const HrtfSet& acoustics, const Scenario& scenario,
                            const std::vector<double>& errors_deg = {-10, -5, 0, 5, 10});

// Distance mismatch: designs fixed to the near set (stored-set backend) and to
// free field, both evaluated on near and far acoustics. scenario_far carries
// the true far-distance source positions.
SweepReport distance_error_sweep(const DesignSpec& hrtf_spec, const ArrayGeometry& geom,
                                 const HrtfSet& near_set, const HrtfSet& far_set,
                                 const Scenario& scenario_near, const Scenario& scenario_far);

} // namespace beamkit

#endif
