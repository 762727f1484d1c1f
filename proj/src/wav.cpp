#include "beamkit/wav.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "beamkit/error.hpp"

namespace beamkit {

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

std::uint16_t get_u16(const char* p) {
    std::uint16_t v;
    std::memcpy(&v, p, 2);
    return v;
}

constexpr std::uint16_t kFormatIeeeFloat = 3;

} // namespace

void write_wav64(const std::string& path, const std::vector<std::vector<double>>& channels,
                 double sample_rate_hz) {
    if (channels.empty())
        throw_config("WAV writer needs at least one channel");
    const std::size_t frames = channels.front().size();
    for (const auto& ch : channels)
        if (ch.size() != frames)
            throw_config("WAV channels must share one length");
    const auto n_ch = static_cast<std::uint16_t>(channels.size());
    const std::uint32_t rate = static_cast<std::uint32_t>(sample_rate_hz);
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * n_ch * 8);

    std::string s;
    s.reserve(44 + data_bytes);
    s += "RIFF";
    put_u32(s, 36 + data_bytes);
    s += "WAVEfmt ";
    put_u32(s, 16);
    put_u16(s, kFormatIeeeFloat);
    put_u16(s, n_ch);
    put_u32(s, rate);
    put_u32(s, rate * n_ch * 8);
    put_u16(s, static_cast<std::uint16_t>(n_ch * 8));
    put_u16(s, 64);
    s += "data";
    put_u32(s, data_bytes);
    for (std::size_t i = 0; i < frames; ++i) {
        for (const auto& ch : channels) {
            char buf[8];
            std::memcpy(buf, &ch[i], 8);
            s.append(buf, 8);
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw_io("cannot write WAV file: " + path);
    out << s;
}

Wav64 read_wav64(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw_io("cannot open WAV file: " + path);
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (s.size() < 44 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0)
        throw_io("not a RIFF/WAVE file: " + path);
    std::size_t pos = 12;
    Wav64 wav;
    std::uint16_t n_ch = 0, bits = 0, format = 0;
    bool have_fmt = false;
    while (pos + 8 <= s.size()) {
        const std::string id = s.substr(pos, 4);
        const std::uint32_t len = get_u32(s.data() + pos + 4);
        pos += 8;
        if (id == "fmt ") {
            if (len < 16 || pos + 16 > s.size())
                throw_io("truncated fmt chunk: " + path);
            format = get_u16(s.data() + pos);
            n_ch = get_u16(s.data() + pos + 2);
            wav.sample_rate_hz = get_u32(s.data() + pos + 4);
            bits = get_u16(s.data() + pos + 14);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt)
                throw_io("data chunk before fmt: " + path);
            if (format != kFormatIeeeFloat || bits != 64)
                throw_io("expected 64-bit float WAV: " + path);
            if (pos + len > s.size())
                throw_io("truncated data chunk: " + path);
            const std::size_t frames = len / (8 * n_ch);
            wav.channels.assign(n_ch, std::vector<double>(frames));
            for (std::size_t i = 0; i < frames; ++i)
                for (std::uint16_t c = 0; c < n_ch; ++c)
                    std::memcpy(&wav.channels[c][i], s.data() + pos + (i * n_ch + c) * 8, 8);
            return wav;
        }
        pos += len + (len & 1);
    }
    throw_io("no data chunk found: " + path);
}

} // namespace beamkit
