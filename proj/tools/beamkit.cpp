// beamkit command line: design robust filter-and-sum beamformers, analyze
// them, synthesize sphere-model HRTF sets, and run localization-error sweeps.
// Logs go to stderr; data goes to files. Exit codes: 0 success, 1 internal
// error, 2 user/config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "beamkit/analysis.hpp"
#include "beamkit/design.hpp"
#include "beamkit/error.hpp"
#include "beamkit/sim.hpp"
#include "beamkit/spatial.hpp"
#include "beamkit/steering.hpp"

namespace {

using namespace beamkit;

struct CommonOpts {
    std::string geometry_path;
    std::string model = "freefield"; // freefield | sphere | hrtf
    std::string hrtf_path;
    double sphere_radius = 0.06;
    double sphere_distance = 1.1;
    int sphere_max_order = 60;
    double speed_of_sound = kSpeedOfSound;
};

SteeringModel make_model(const CommonOpts& opts, std::shared_ptr<const HrtfSet>* keep_alive) {
    if (opts.model == "freefield")
        return FreeFieldModel{opts.speed_of_sound};
    if (opts.model == "sphere")
        return RigidSphereModel{opts.sphere_radius, opts.sphere_distance, opts.sphere_max_order,
                                opts.speed_of_sound};
    if (opts.model == "hrtf") {
        if (opts.hrtf_path.empty())
            throw_config("--model hrtf needs --hrtf <set.json>");
        auto set = std::make_shared<const HrtfSet>(HrtfSet::load(opts.hrtf_path));
        if (keep_alive)
            *keep_alive = set;
        return HrtfModel{set};
    }
    throw_config("unknown steering model: " + opts.model);
}

// --config <file> supplies defaults for any flag not given on the command line
void apply_config_defaults(CLI::App* cmd, const std::string& config_path) {
    if (config_path.empty())
        return;
    std::ifstream in(config_path);
    if (!in)
        throw_io("cannot open config file: " + config_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw_io("config parse error in " + config_path + ": " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || opt->count() > 0)
            continue;
        if (value.is_array()) {
            for (const auto& v : value)
                opt->add_result(v.is_string() ? v.get<std::string>() : v.dump());
        } else {
            opt->add_result(value.is_string() ? value.get<std::string>() : value.dump());
        }
        opt->run_callback();
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw_config(what + " not found: " + path);
}

std::vector<double> analysis_freqs(double f_lo, double f_hi, int count) {
    std::vector<double> freqs(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        freqs[static_cast<std::size_t>(i)] =
            f_lo + (f_hi - f_lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return freqs;
}

DesignSpec build_spec(const CommonOpts& common, double fs, int grid_points, double band_lo,
                      double band_hi, double az_step, double look_az, double look_polar,
                      double gamma_db, int fir_length,
                      std::shared_ptr<const HrtfSet>* keep_alive) {
    DesignSpec spec;
    spec.grid = FrequencyGrid::uniform(fs, grid_points, band_lo, band_hi);
    spec.directions = direction_grid(az_step, look_polar);
    spec.look = Direction{look_az, look_polar};
    spec.desired = DesignSpec::delta_desired(spec.directions, spec.look);
    spec.gamma_db = gamma_db;
    spec.fir_length = fir_length;
    spec.model = make_model(common, keep_alive);
    return spec;
}

int run(int argc, char** argv) {
    CLI::App app{"robust least-squares frequency-invariant beamformer toolkit"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string config_path;
    double fs = 16000.0;
    int grid_points = 129;
    double band_lo = 300.0, band_hi = 5000.0;
    double az_step = 5.0;
    double look_az = 90.0, look_polar = 90.0;
    double gamma_db = -10.0;
    int fir_length = 1024;

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON file supplying defaults for flags");
        cmd->add_option("--geometry", common.geometry_path, "array geometry JSON");
        cmd->add_option("--model", common.model, "steering model: freefield|sphere|hrtf");
        cmd->add_option("--hrtf", common.hrtf_path, "stored HRTF set (model=hrtf)");
        cmd->add_option("--radius", common.sphere_radius, "sphere radius in m");
        cmd->add_option("--distance", common.sphere_distance, "sphere source distance in m");
        cmd->add_option("--max-order", common.sphere_max_order, "sphere series order cap");
        cmd->add_option("--speed-of-sound", common.speed_of_sound, "speed of sound in m/s");
    };
    const auto add_design = [&](CLI::App* cmd) {
        cmd->add_option("--fs", fs, "sample rate in Hz");
        cmd->add_option("--grid-points", grid_points, "design frequency count");
        cmd->add_option("--band-low", band_lo, "pass-band lower edge in Hz");
        cmd->add_option("--band-high", band_hi, "pass-band upper edge in Hz");
        cmd->add_option("--az-step", az_step, "design grid azimuth step in deg");
        cmd->add_option("--look-az", look_az, "look azimuth in deg");
        cmd->add_option("--look-polar", look_polar, "look polar angle in deg");
        cmd->add_option("--gamma-db", gamma_db, "WNG lower bound in dB");
        cmd->add_option("--fir-length", fir_length, "FIR taps per channel");
    };

    // design -------------------------------------------------------------
    auto* cmd_design = app.add_subcommand("design", "solve the broadband design, write FIR");
    std::string out_path = "beamformer.json";
    std::string wav_path;
    add_common(cmd_design);
    add_design(cmd_design);
    cmd_design->add_option("--out", out_path, "output beamformer JSON");
    cmd_design->add_option("--wav", wav_path, "also export taps as N-channel WAV");
    cmd_design->callback([&] {
        apply_config_defaults(cmd_design, config_path);
        require_file(common.geometry_path, "geometry");
        const ArrayGeometry geom = ArrayGeometry::load(common.geometry_path);
        std::shared_ptr<const HrtfSet> keep;
        const DesignSpec spec = build_spec(common, fs, grid_points, band_lo, band_hi, az_step,
                                           look_az, look_polar, gamma_db, fir_length, &keep);
        const auto weights = design_broadband(spec, geom);
        std::fprintf(stderr, "# freq_hz residual lambda wng_db\n");
        for (const auto& nb : weights)
            std::fprintf(stderr, "%10.2f %12.6e %12.6e %8.3f\n", nb.freq_hz, nb.residual,
                         nb.lambda, 10.0 * std::log10(nb.wng_linear));
        const FirBeamformer bf = realize_fir(spec, weights);
        bf.save(out_path);
        if (!wav_path.empty())
            bf.save_wav(wav_path);
        std::fprintf(stderr, "wrote %s (fit error %.2f dB)\n", out_path.c_str(),
                     bf.fit_error_db);
    });

    // beampattern ----------------------------------------------------------
    auto* cmd_bp = app.add_subcommand("beampattern", "evaluate BP_dB over a freq/azimuth grid");
    std::string bf_path = "beamformer.json";
    std::string csv_path = "beampattern.csv";
    double bp_flo = 300.0, bp_fhi = 5000.0;
    int bp_nfreq = 512;
    double bp_az_step = 1.0, bp_az_lo = 0.0, bp_az_hi = 180.0, bp_polar = 90.0;
    add_common(cmd_bp);
    cmd_bp->add_option("--beamformer", bf_path, "beamformer JSON");
    cmd_bp->add_option("--out", csv_path, "output CSV");
    cmd_bp->add_option("--f-low", bp_flo, "lowest analysis frequency");
    cmd_bp->add_option("--f-high", bp_fhi, "highest analysis frequency");
    cmd_bp->add_option("--n-freq", bp_nfreq, "analysis frequency count");
    cmd_bp->add_option("--az-step", bp_az_step, "azimuth step in deg");
    cmd_bp->add_option("--az-low", bp_az_lo, "first azimuth in deg");
    cmd_bp->add_option("--az-high", bp_az_hi, "last azimuth in deg");
    cmd_bp->add_option("--polar", bp_polar, "polar angle of the scan");
    cmd_bp->callback([&] {
        apply_config_defaults(cmd_bp, config_path);
        require_file(bf_path, "beamformer");
        require_file(common.geometry_path, "geometry");
        const ArrayGeometry geom = ArrayGeometry::load(common.geometry_path);
        const FirBeamformer bf = FirBeamformer::load(bf_path);
        std::shared_ptr<const HrtfSet> keep;
        const SteeringModel model = make_model(common, &keep);
        const auto dirs = direction_grid(bp_az_step, bp_polar, bp_az_lo, bp_az_hi);
        const Beampattern bp =
            beampattern(bf, model, geom, dirs, analysis_freqs(bp_flo, bp_fhi, bp_nfreq));
        write_beampattern_csv(csv_path, bp);
        std::fprintf(stderr, "wrote %s (%zu freqs x %zu azimuths)\n", csv_path.c_str(),
                     bp.freqs_hz.size(), bp.directions.size());
    });

    // wng -------------------------------------------------------------------
    auto* cmd_wng = app.add_subcommand("wng", "realized white-noise gain over frequency");
    add_common(cmd_wng);
    std::string wng_bf_path = "beamformer.json";
    std::string wng_csv = "wng.csv";
    double wng_flo = 300.0, wng_fhi = 5000.0;
    int wng_nfreq = 512;
    double wng_look_az = 90.0, wng_look_polar = 90.0;
    cmd_wng->add_option("--beamformer", wng_bf_path, "beamformer JSON");
    cmd_wng->add_option("--out", wng_csv, "output CSV");
    cmd_wng->add_option("--f-low", wng_flo, "lowest analysis frequency");
    cmd_wng->add_option("--f-high", wng_fhi, "highest analysis frequency");
    cmd_wng->add_option("--n-freq", wng_nfreq, "analysis frequency count");
    cmd_wng->add_option("--look-az", wng_look_az, "look azimuth in deg");
    cmd_wng->add_option("--look-polar", wng_look_polar, "look polar angle in deg");
    cmd_wng->callback([&] {
        apply_config_defaults(cmd_wng, config_path);
        require_file(wng_bf_path, "beamformer");
        require_file(common.geometry_path, "geometry");
        const ArrayGeometry geom = ArrayGeometry::load(common.geometry_path);
        const FirBeamformer bf = FirBeamformer::load(wng_bf_path);
        std::shared_ptr<const HrtfSet> keep;
        const SteeringModel model = make_model(common, &keep);
        const WngCurve curve = wng_curve(bf, model, geom, Direction{wng_look_az, wng_look_polar},
                                         analysis_freqs(wng_flo, wng_fhi, wng_nfreq));
        write_wng_csv(wng_csv, curve);
        std::fprintf(stderr, "wrote %s\n", wng_csv.c_str());
    });

    // synth-hrtf -------------------------------------------------------------
    auto* cmd_synth = app.add_subcommand("synth-hrtf", "synthesize sphere-model HRTF sets");
    std::vector<double> synth_distances{1.1};
    std::string synth_out = "hrtf";
    double synth_fs = 16000.0;
    int synth_taps = 512;
    double synth_az_step = 5.0, synth_az_lo = 0.0, synth_az_hi = 355.0;
    std::vector<double> synth_polars{90.0};
    add_common(cmd_synth);
    cmd_synth->add_option("--out", synth_out, "output path prefix");
    cmd_synth->add_option("--fs", synth_fs, "sample rate in Hz");
    cmd_synth->add_option("--taps", synth_taps, "HRIR length (power of two)");
    cmd_synth->add_option("--az-step", synth_az_step, "azimuth step in deg");
    cmd_synth->add_option("--az-low", synth_az_lo, "first azimuth in deg");
    cmd_synth->add_option("--az-high", synth_az_hi, "last azimuth in deg");
    cmd_synth->add_option("--polar", synth_polars, "polar angle(s) of the direction rings")
        ->expected(-1);
    cmd_synth->add_option("--set-distance", synth_distances,
                          "source distance(s), one output file each")
        ->expected(-1);
    cmd_synth->callback([&] {
        apply_config_defaults(cmd_synth, config_path);
        require_file(common.geometry_path, "geometry");
        const ArrayGeometry geom = ArrayGeometry::load(common.geometry_path);
        for (double dist : synth_distances) {
            std::vector<Direction> dirs;
            for (double polar : synth_polars) {
                const auto ring = direction_grid(synth_az_step, polar, synth_az_lo, synth_az_hi);
                dirs.insert(dirs.end(), ring.begin(), ring.end());
            }
            const HrtfSet set =
                synthesize_sphere_hrtf_set(geom, common.sphere_radius, dist, dirs, synth_fs,
                                           synth_taps, common.sphere_max_order,
                                           common.speed_of_sound);
            char name[512];
            std::snprintf(name, sizeof(name), "%s_d%g.json", synth_out.c_str(), dist);
            set.save(name);
            std::fprintf(stderr, "wrote %s (%zu directions, %d taps)\n", name, dirs.size(),
                         synth_taps);
        }
    });

    // simulate ----------------------------------------------------------------
    auto* cmd_sim = app.add_subcommand("simulate", "run one two-speaker scenario");
    std::string sim_scenario, sim_acoustics, sim_bf = "beamformer.json";
    std::string sim_out = "metrics.json";
    double sim_fs = 16000.0;
    add_common(cmd_sim);
    cmd_sim->add_option("--scenario", sim_scenario, "scenario JSON");
    cmd_sim->add_option("--acoustics", sim_acoustics, "HRTF set used for rendering");
    cmd_sim->add_option("--beamformer", sim_bf, "beamformer JSON");
    cmd_sim->add_option("--fs", sim_fs, "sample rate in Hz");
    cmd_sim->add_option("--out", sim_out, "output metrics JSON");
    cmd_sim->callback([&] {
        apply_config_defaults(cmd_sim, config_path);
        if (sim_scenario.empty())
            throw_config("simulate needs --scenario");
        if (sim_acoustics.empty())
            throw_config("simulate needs --acoustics");
        require_file(common.geometry_path, "geometry");
        require_file(sim_scenario, "scenario");
        require_file(sim_acoustics, "acoustic set");
        require_file(sim_bf, "beamformer");
        const ArrayGeometry geom = ArrayGeometry::load(common.geometry_path);
        const HrtfSet acoustics = HrtfSet::load(sim_acoustics);
        const Scenario scenario = Scenario::load(sim_scenario, sim_fs);
        const FirBeamformer bf = FirBeamformer::load(sim_bf);
        const ScenarioMetrics m = evaluate_scenario(bf, acoustics, scenario, geom);
        nlohmann::json j{{"sir_in_db", m.sir_in_db},
                         {"sir_out_db", m.sir_out_db},
                         {"sir_gain_db", m.sir_gain_db},
                         {"fwsegsnr_in_db", m.fwsegsnr_in_db},
                         {"fwsegsnr_out_db", m.fwsegsnr_out_db},
                         {"distortion_db", m.distortion_db},
                         {"seed", scenario.seed}};
        std::ofstream out(sim_out);
        if (!out)
            throw_io("cannot write metrics: " + sim_out);
        out << j.dump(2) << '\n';
        std::fprintf(stderr, "sir_gain %.2f dB, fwsegsnr %.2f -> %.2f dB\n", m.sir_gain_db,
                     m.fwsegsnr_in_db, m.fwsegsnr_out_db);
    });

    // sweep ---------------------------------------------------------------------
    auto* cmd_sweep = app.add_subcommand("sweep", "localization-error sweeps");
    std::string sweep_mode = "doa";
    std::string sweep_scenario;
    std::string sweep_acoustics, sweep_acoustics_far;
    std::string sweep_out = "sweep";
    bool sweep_average = false;
    double sweep_fs = 16000.0;
    double sweep_duration = 5.0;
    add_common(cmd_sweep);
    add_design(cmd_sweep);
    cmd_sweep->add_option("--mode", sweep_mode, "doa | distance");
    cmd_sweep->add_option("--scenario", sweep_scenario, "scenario JSON (omit with --average)");
    cmd_sweep->add_option("--acoustics", sweep_acoustics, "rendering HRTF set");
    cmd_sweep->add_option("--acoustics-far", sweep_acoustics_far,
                          "far-distance rendering set (mode=distance)");
    cmd_sweep->add_option("--sweep-fs", sweep_fs, "scenario sample rate in Hz");
    cmd_sweep->add_option("--duration", sweep_duration,
                          "signal duration in s for --average scenarios");
    cmd_sweep->add_option("--out", sweep_out, "output path prefix (.csv/.json)");
    cmd_sweep->add_flag("--average", sweep_average,
                        "average the eight-interferer protocol instead of one scenario");
    cmd_sweep->callback([&] {
        apply_config_defaults(cmd_sweep, config_path);
        if (sweep_acoustics.empty())
            throw_config("sweep needs --acoustics");
        require_file(common.geometry_path, "geometry");
        require_file(sweep_acoustics, "acoustic set");
        const ArrayGeometry geom = ArrayGeometry::load(common.geometry_path);
        const auto acoustics = std::make_shared<const HrtfSet>(HrtfSet::load(sweep_acoustics));
        std::shared_ptr<const HrtfSet> keep;
        DesignSpec spec = build_spec(common, sweep_fs, grid_points, band_lo, band_hi, az_step,
                                     look_az, look_polar, gamma_db, fir_length, &keep);

        SweepReport report;
        if (sweep_mode == "doa") {
            std::vector<Scenario> scenarios;
            if (sweep_average) {
                int idx = 0;
                for (double az : {10.0, 30.0, 50.0, 70.0, 110.0, 130.0, 150.0, 170.0}) {
                    const SourcePosition target{Direction{90.0, look_polar},
                                                acoustics->source_distance_m};
                    const SourcePosition interferer{Direction{az, look_polar},
                                                    acoustics->source_distance_m};
                    scenarios.push_back(Scenario::make(target, interferer, 0.0,
                                                       1000 + 10 * idx++, sweep_duration,
                                                       sweep_fs));
                }
            } else {
                if (sweep_scenario.empty())
                    throw_config("sweep --mode doa needs --scenario or --average");
                require_file(sweep_scenario, "scenario");
                scenarios.push_back(Scenario::load(sweep_scenario, sweep_fs));
            }
            std::vector<SweepReport> parts;
            for (const auto& sc : scenarios)
                parts.push_back(doa_error_sweep(spec, geom, *acoustics, sc));
            report = parts.front();
            for (std::size_t r = 0; r < report.rows.size(); ++r) {
                for (std::size_t p = 1; p < parts.size(); ++p) {
                    report.rows[r].sir_gain_db += parts[p].rows[r].sir_gain_db;
                    report.rows[r].fwsegsnr_in_db += parts[p].rows[r].fwsegsnr_in_db;
                    report.rows[r].fwsegsnr_out_db += parts[p].rows[r].fwsegsnr_out_db;
                    report.rows[r].distortion_db += parts[p].rows[r].distortion_db;
                }
                const double k = static_cast<double>(parts.size());
                report.rows[r].sir_gain_db /= k;
                report.rows[r].fwsegsnr_in_db /= k;
                report.rows[r].fwsegsnr_out_db /= k;
                report.rows[r].distortion_db /= k;
            }
        } else if (sweep_mode == "distance") {
            if (sweep_acoustics_far.empty())
                throw_config("sweep --mode distance needs --acoustics-far");
            require_file(sweep_acoustics_far, "far acoustic set");
            if (sweep_scenario.empty())
                throw_config("sweep --mode distance needs --scenario");
            require_file(sweep_scenario, "scenario");
            const auto far = std::make_shared<const HrtfSet>(HrtfSet::load(sweep_acoustics_far));
            const Scenario near_sc = Scenario::load(sweep_scenario, sweep_fs);
            // far scenario: same azimuths, the far set's distance and polar ring
            const double far_polar = far->directions.front().elevation_polar_deg;
            const Scenario far_sc = Scenario::make(
                SourcePosition{Direction{near_sc.target.direction.azimuth_deg, far_polar},
                               far->source_distance_m},
                SourcePosition{Direction{near_sc.interferer.direction.azimuth_deg, far_polar},
                               far->source_distance_m},
                near_sc.sir_in_db, near_sc.seed, near_sc.duration_s, sweep_fs);
            report = distance_error_sweep(spec, geom, *acoustics, *far, near_sc, far_sc);
        } else {
            throw_config("unknown sweep mode: " + sweep_mode);
        }
        report.save_csv(sweep_out + ".csv");
        report.save_json(sweep_out + ".json");
        std::fprintf(stderr, "%-12s %-18s %10s %10s %10s %10s\n", "sweep_value", "error",
                     "sir_gain", "fwseg_in", "fwseg_out", "distortion");
        for (const auto& row : report.rows)
            std::fprintf(stderr, "%-12g %-18s %10.3f %10.3f %10.3f %10.3f\n", row.sweep_value,
                         row.error_label.c_str(), row.sir_gain_db, row.fwsegsnr_in_db,
                         row.fwsegsnr_out_db, row.distortion_db);
        std::fprintf(stderr, "wrote %s.csv and %s.json\n", sweep_out.c_str(), sweep_out.c_str());
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const beamkit::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == beamkit::ErrorKind::numeric ? 1 : 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
}
