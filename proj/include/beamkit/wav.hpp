#ifndef BEAMKIT_WAV_HPP
#define BEAMKIT_WAV_HPP

#include <string>
#include <vector>

namespace beamkit {

// Minimal RIFF/WAVE I/O, 64-bit float samples, interleaved channels.
void write_wav64(const std::string& path, const std::vector<std::vector<double>>& channels,
                 double sample_rate_hz);

struct Wav64 {
    std::vector<std::vector<double>> channels;
    double sample_rate_hz = 0.0;
};

Wav64 read_wav64(const std::string& path);

} // namespace beamkit

#endif
