#include "beamkit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "beamkit/dsp.hpp"
#include "beamkit/error.hpp"
#include "beamkit/parallel.hpp"

namespace beamkit {

namespace {
using cd = std::complex<double>;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// default experiment pass-band for the distortion metric
constexpr double kPassbandLowHz = 300.0;
constexpr double kPassbandHighHz = 5000.0;
} // namespace

// ---------------------------------------------------------------------------
// Signals and scenarios
// ---------------------------------------------------------------------------

std::vector<double> speech_shaped_noise(std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> x(samples);
    // fixed tilt: two real poles shape white noise toward a speech-like slope
    const double a1 = 0.86, a2 = 0.94;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double w = gauss(rng);
        s1 = w + a1 * s1;
        s2 = s1 + a2 * s2;
        x[i] = 0.05 * s2;
    }
    return x;
}

void Scenario::validate() const {
    beamkit::validate(target);
    beamkit::validate(interferer);
    if (target_signal.empty() || interferer_signal.empty())
        throw_config("scenario signals must be non-empty");
    if (!(sample_rate_hz > 0.0))
        throw_config("scenario sample rate must be positive");
}

Scenario Scenario::make(const SourcePosition& target, const SourcePosition& interferer,
                        double sir_in_db, std::uint64_t seed, double duration_s,
                        double sample_rate_hz) {
    Scenario sc;
    sc.target = target;
    sc.interferer = interferer;
    sc.sir_in_db = sir_in_db;
    sc.seed = seed;
    sc.duration_s = duration_s;
    sc.sample_rate_hz = sample_rate_hz;
    const auto samples = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    if (samples == 0)
        throw_config("scenario duration too short");
    sc.target_signal = speech_shaped_noise(samples, seed);
    sc.interferer_signal = speech_shaped_noise(samples, seed + 1);
    sc.validate();
    return sc;
}

Scenario Scenario::load(const std::string& path, double sample_rate_hz) {
    std::ifstream in(path);
    if (!in)
        throw_io("cannot open scenario file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw_io("scenario parse error in " + path + ": " + e.what());
    }
    try {
        const auto parse_pos = [](const nlohmann::json& node) {
            return SourcePosition{Direction{node.at("azimuth_deg").get<double>(),
                                            node.at("elevation_polar_deg").get<double>()},
                                  node.at("distance_m").get<double>()};
        };
        return Scenario::make(parse_pos(j.at("target")), parse_pos(j.at("interferer")),
                              j.value("sir_in_db", 0.0), j.value("seed", std::uint64_t{1}),
                              j.value("duration_s", 5.0), sample_rate_hz);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw_config("invalid scenario file " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Rendering and the filter-and-sum engine
// ---------------------------------------------------------------------------

std::vector<std::vector<double>> render_source(const HrtfSet& set, const SourcePosition& src,
                                               std::span<const double> signal) {
    if (signal.empty())
        throw_config("render_source needs a non-empty signal");
    if (std::abs(src.distance_m - set.source_distance_m) > 1e-3)
        throw_config("source distance " + std::to_string(src.distance_m) +
                     " m does not match the set distance " +
                     std::to_string(set.source_distance_m) + " m");
    const int idx = set.find_direction(src.direction);
    if (idx < 0)
        throw_config("no stored direction for azimuth " +
                     std::to_string(src.direction.azimuth_deg) + ", polar " +
                     std::to_string(src.direction.elevation_polar_deg));
    std::vector<std::vector<double>> channels(static_cast<std::size_t>(set.mic_count));
    for (int n = 0; n < set.mic_count; ++n)
        channels[static_cast<std::size_t>(n)] =
            dsp::convolve(signal, set.hrirs[static_cast<std::size_t>(idx)]
                                            [static_cast<std::size_t>(n)]);
    return channels;
}

std::vector<double> fsb_process(const FirBeamformer& bf,
                                const std::vector<std::vector<double>>& channels) {
    if (static_cast<int>(channels.size()) != bf.channels())
        throw_config("channel count " + std::to_string(channels.size()) +
                     " does not match the beamformer (" + std::to_string(bf.channels()) + ")");
    const std::size_t in_len = channels.front().size();
    for (const auto& ch : channels)
        if (ch.size() != in_len)
            throw_config("input channels must share one length");
    const std::size_t out_len = in_len + static_cast<std::size_t>(bf.length()) - 1;
    std::vector<double> y(out_len, 0.0);
    for (int n = 0; n < bf.channels(); ++n) {
        std::vector<double> taps(static_cast<std::size_t>(bf.length()));
        for (int l = 0; l < bf.length(); ++l)
            taps[static_cast<std::size_t>(l)] = bf.taps(n, l);
        const auto part = dsp::convolve(channels[static_cast<std::size_t>(n)], taps);
        for (std::size_t i = 0; i < out_len; ++i)
            y[i] += part[i];
    }
    return y;
}

RenderedScenario render_scenario(const HrtfSet& acoustics, const Scenario& scenario,
                                 const ArrayGeometry& geom) {
    scenario.validate();
    if (acoustics.mic_count != geom.mic_count())
        throw_config("acoustic set mic count does not match the geometry");
    RenderedScenario out;
    out.reference_mic = geom.reference_mic();
    out.target_channels = render_source(acoustics, scenario.target, scenario.target_signal);
    out.interferer_channels =
        render_source(acoustics, scenario.interferer, scenario.interferer_signal);
    // scale the interferer for the requested SIR at the reference mic
    const auto ref = static_cast<std::size_t>(out.reference_mic);
    const double et = dsp::energy(out.target_channels[ref]);
    const double ei = dsp::energy(out.interferer_channels[ref]);
    if (ei <= 0.0)
        throw_numeric("interferer has no energy at the reference mic");
    const double scale = std::sqrt(et / ei * std::pow(10.0, -scenario.sir_in_db / 10.0));
    for (auto& ch : out.interferer_channels)
        for (double& v : ch)
            v *= scale;
    return out;
}

ShadowOutputs shadow_decompose(const FirBeamformer& bf, const RenderedScenario& rendered) {
    ShadowOutputs out;
    out.target = fsb_process(bf, rendered.target_channels);
    out.interferer = fsb_process(bf, rendered.interferer_channels);
    return out;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

// triangular mel filterbank magnitudes per frame
struct MelBank {
    std::vector<std::vector<double>> filters; // [band][bin]

    MelBank(int bands, std::size_t nfft, double fs, double f_low, double f_high) {
        const auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
        const auto imel = [](double m) {
            return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0);
        };
        const std::size_t bins = nfft / 2 + 1;
        std::vector<double> edges(static_cast<std::size_t>(bands) + 2);
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const double m = mel(f_low) + (mel(f_high) - mel(f_low)) * static_cast<double>(i) /
                                              static_cast<double>(bands + 1);
            edges[i] = imel(m);
        }
        filters.assign(static_cast<std::size_t>(bands), std::vector<double>(bins, 0.0));
        for (int b = 0; b < bands; ++b) {
            const double lo = edges[static_cast<std::size_t>(b)];
            const double mid = edges[static_cast<std::size_t>(b) + 1];
            const double hi = edges[static_cast<std::size_t>(b) + 2];
            for (std::size_t k = 0; k < bins; ++k) {
                const double f = static_cast<double>(k) * fs / static_cast<double>(nfft);
                double g = 0.0;
                if (f >= lo && f <= mid && mid > lo)
                    g = (f - lo) / (mid - lo);
                else if (f > mid && f <= hi && hi > mid)
                    g = (hi - f) / (hi - mid);
                filters[static_cast<std::size_t>(b)][k] = g;
            }
        }
    }

    std::vector<double> band_magnitudes(const std::vector<cd>& spectrum) const {
        std::vector<double> mags(filters.size());
        for (std::size_t b = 0; b < filters.size(); ++b) {
            double e = 0.0;
            for (std::size_t k = 0; k < filters[b].size(); ++k)
                e += filters[b][k] * std::norm(spectrum[k]);
            mags[b] = std::sqrt(e);
        }
        return mags;
    }
};

} // namespace

double fwsegsnr(std::span<const double> reference, std::span<const double> test,
                double sample_rate_hz) {
    if (reference.size() != test.size())
        throw_config("fwsegsnr needs equal-length signals");
    if (dsp::energy(reference) <= 0.0)
        throw_config("fwsegsnr reference is all zero");
    const auto frame = static_cast<std::size_t>(std::llround(0.025 * sample_rate_hz));
    const auto hop = static_cast<std::size_t>(std::llround(0.010 * sample_rate_hz));
    if (reference.size() < frame)
        throw_config("fwsegsnr needs at least one full frame");
    const std::size_t nfft = dsp::next_pow2(frame);
    const MelBank bank(25, nfft, sample_rate_hz, 50.0, sample_rate_hz / 2.0);
    const auto window = dsp::hann_window(frame);

    double snr_sum = 0.0;
    std::size_t frames = 0;
    std::vector<double> buf_ref(frame), buf_test(frame);
    for (std::size_t start = 0; start + frame <= reference.size(); start += hop) {
        double ref_energy = 0.0;
        for (std::size_t i = 0; i < frame; ++i) {
            buf_ref[i] = reference[start + i] * window[i];
            buf_test[i] = test[start + i] * window[i];
            ref_energy += buf_ref[i] * buf_ref[i];
        }
        if (ref_energy <= 0.0)
            continue; // nothing to weight in a silent reference frame
        const auto ref_mag = bank.band_magnitudes(dsp::rfft(buf_ref, nfft));
        const auto test_mag = bank.band_magnitudes(dsp::rfft(buf_test, nfft));
        double num = 0.0, den = 0.0;
        for (std::size_t b = 0; b < ref_mag.size(); ++b) {
            if (ref_mag[b] <= 0.0)
                continue;
            const double weight = std::pow(ref_mag[b], 0.2);
            const double err = ref_mag[b] - test_mag[b];
            const double band_snr =
                10.0 * std::log10(ref_mag[b] * ref_mag[b] / std::max(err * err, 1e-300));
            num += weight * band_snr;
            den += weight;
        }
        if (den <= 0.0)
            continue;
        snr_sum += std::clamp(num / den, -10.0, 35.0);
        ++frames;
    }
    if (frames == 0)
        throw_config("fwsegsnr found no usable frames");
    return snr_sum / static_cast<double>(frames);
}

double passband_error_db(std::span<const double> reference, std::span<const double> test,
                         double delay_samples, double sample_rate_hz, double band_low_hz,
                         double band_high_hz) {
    if (reference.empty() || test.empty())
        throw_config("passband_error_db needs non-empty signals");
    // compensate the processing delay, then compare spectra over the band
    const std::vector<double> aligned = dsp::fractional_shift(test, -delay_samples);
    const std::size_t n = std::min(reference.size(), aligned.size());
    const std::size_t guard = std::min<std::size_t>(n / 8, 2048);
    const std::size_t nfft = dsp::next_pow2(n);
    auto fr = dsp::rfft(std::span<const double>(reference.data() + guard, n - 2 * guard), nfft);
    auto ft = dsp::rfft(std::span<const double>(aligned.data() + guard, n - 2 * guard), nfft);
    double err = 0.0, ref = 0.0;
    for (std::size_t k = 0; k <= nfft / 2; ++k) {
        const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(nfft);
        if (f < band_low_hz || f > band_high_hz)
            continue;
        err += std::norm(fr[k] - ft[k]);
        ref += std::norm(fr[k]);
    }
    if (ref <= 0.0)
        throw_config("passband_error_db reference has no in-band energy");
    return 10.0 * std::log10(std::max(err, 1e-300) / ref);
}

ScenarioMetrics evaluate_scenario(const FirBeamformer& bf, const HrtfSet& acoustics,
                                  const Scenario& scenario, const ArrayGeometry& geom) {
    const RenderedScenario rendered = render_scenario(acoustics, scenario, geom);
    const ShadowOutputs shadow = shadow_decompose(bf, rendered);
    const auto ref = static_cast<std::size_t>(rendered.reference_mic);

    ScenarioMetrics m;
    const double et_in = dsp::energy(rendered.target_channels[ref]);
    const double ei_in = dsp::energy(rendered.interferer_channels[ref]);
    const double et_out = dsp::energy(shadow.target);
    const double ei_out = dsp::energy(shadow.interferer);
    if (ei_out <= 0.0 || ei_in <= 0.0)
        throw_numeric("interferer energy vanished");
    m.sir_in_db = 10.0 * std::log10(et_in / ei_in);
    m.sir_out_db = 10.0 * std::log10(et_out / ei_out);
    m.sir_gain_db = m.sir_out_db - m.sir_in_db;

    // input: mixture vs target, both observed at the reference mic
    std::vector<double> mix_in(rendered.target_channels[ref].size());
    for (std::size_t i = 0; i < mix_in.size(); ++i)
        mix_in[i] = rendered.target_channels[ref][i] + rendered.interferer_channels[ref][i];
    m.fwsegsnr_in_db = fwsegsnr(rendered.target_channels[ref], mix_in, scenario.sample_rate_hz);

    // output: mixture output vs its own target component
    std::vector<double> mix_out(shadow.target.size());
    for (std::size_t i = 0; i < mix_out.size(); ++i)
        mix_out[i] = shadow.target[i] + shadow.interferer[i];
    m.fwsegsnr_out_db = fwsegsnr(shadow.target, mix_out, scenario.sample_rate_hz);

    // target-path distortion: processed target vs the delayed dry signal.
    // Net lag of the target component = response delay + acoustic bulk delay.
    m.distortion_db = passband_error_db(
        scenario.target_signal, shadow.target,
        bf.response_delay_samples + acoustics.bulk_delay_samples, scenario.sample_rate_hz,
        kPassbandLowHz, kPassbandHighHz);
    return m;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

SweepReport doa_error_sweep(const DesignSpec& spec, const ArrayGeometry& geom,
                            const HrtfSet& acoustics, const Scenario& scenario,
                            const std::vector<double>& errors_deg) {
    spec.validate(geom);
    scenario.validate();
    SweepReport report;
    report.mode = "doa";
    report.seed = scenario.seed;
    report.rows.resize(errors_deg.size());
    parallel_for(errors_deg.size(), [&](std::size_t i) {
        const double err = errors_deg[i];
        DesignSpec steered = spec;
        double az = scenario.target.direction.azimuth_deg + err;
        az = std::fmod(std::fmod(az, 360.0) + 360.0, 360.0);
        steered.look.azimuth_deg = az;
        steered.desired = DesignSpec::delta_desired(steered.directions, steered.look);
        const FirBeamformer bf = design_fir(steered, geom);
        const ScenarioMetrics m = evaluate_scenario(bf, acoustics, scenario, geom);
        SweepRow row;
        row.sweep_value = steered.look.azimuth_deg;
        char label[32];
        std::snprintf(label, sizeof(label), "%+gdeg", err);
        row.error_label = label;
        row.sir_gain_db = m.sir_gain_db;
        row.fwsegsnr_in_db = m.fwsegsnr_in_db;
        row.fwsegsnr_out_db = m.fwsegsnr_out_db;
        row.distortion_db = m.distortion_db;
        report.rows[i] = row;
    });
    return report;
}

SweepReport distance_error_sweep(const DesignSpec& hrtf_spec, const ArrayGeometry& geom,
                                 const HrtfSet& near_set, const HrtfSet& far_set,
                                 const Scenario& scenario_near, const Scenario& scenario_far) {
    hrtf_spec.validate(geom);
    scenario_near.validate();
    scenario_far.validate();
    if (!std::holds_alternative<HrtfModel>(hrtf_spec.model))
        throw_config("distance sweep expects a stored-set design model");

    DesignSpec ff_spec = hrtf_spec;
    ff_spec.model = FreeFieldModel{};

    const FirBeamformer bf_hrtf = design_fir(hrtf_spec, geom);
    const FirBeamformer bf_ff = design_fir(ff_spec, geom);

    SweepReport report;
    report.mode = "distance";
    report.seed = scenario_near.seed;
    struct Case {
        const FirBeamformer* bf;
        const HrtfSet* set;
        const Scenario* scenario;
        const char* label;
    };
    const Case cases[] = {
        {&bf_hrtf, &near_set, &scenario_near, "hrtf/matched"},
        {&bf_hrtf, &far_set, &scenario_far, "hrtf/mismatched"},
        {&bf_ff, &near_set, &scenario_near, "freefield/matched"},
        {&bf_ff, &far_set, &scenario_far, "freefield/mismatched"},
    };
    report.rows.resize(4);
    parallel_for(4, [&](std::size_t i) {
        const Case& c = cases[i];
        const ScenarioMetrics m = evaluate_scenario(*c.bf, *c.set, *c.scenario, geom);
        SweepRow row;
        row.sweep_value = c.scenario->target.distance_m;
        row.error_label = c.label;
        row.sir_gain_db = m.sir_gain_db;
        row.fwsegsnr_in_db = m.fwsegsnr_in_db;
        row.fwsegsnr_out_db = m.fwsegsnr_out_db;
        row.distortion_db = m.distortion_db;
        report.rows[i] = row;
    });
    return report;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

void SweepReport::save_csv(const std::string& path) const {
    std::string out = "sweep_value,error_label,sir_gain_db,fwsegsnr_in_db,fwsegsnr_out_db,"
                      "distortion_db\n";
    for (const auto& row : rows) {
        out += format_double(row.sweep_value);
        out += ',' + row.error_label + ',';
        out += format_double(row.sir_gain_db);
        out += ',';
        out += format_double(row.fwsegsnr_in_db);
        out += ',';
        out += format_double(row.fwsegsnr_out_db);
        out += ',';
        out += format_double(row.distortion_db);
        out += '\n';
    }
    std::ofstream file(path);
    if (!file)
        throw_io("cannot write sweep CSV: " + path);
    file << out;
}

void SweepReport::save_json(const std::string& path) const {
    nlohmann::json j;
    j["mode"] = mode;
    j["seed"] = seed;
    auto& arr = j["rows"] = nlohmann::json::array();
    for (const auto& row : rows)
        arr.push_back({{"sweep_value", row.sweep_value},
                       {"error_label", row.error_label},
                       {"sir_gain_db", row.sir_gain_db},
                       {"fwsegsnr_in_db", row.fwsegsnr_in_db},
                       {"fwsegsnr_out_db", row.fwsegsnr_out_db},
                       {"distortion_db", row.distortion_db}});
    std::ofstream file(path);
    if (!file)
        throw_io("cannot write sweep JSON: " + path);
    file << j.dump(2) << '\n';
}

} // namespace beamkit
