#include "anclab/eval/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "anclab/error.hpp"

namespace anclab::eval {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t le32(const std::string& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + i])) << (8 * i);
  return v;
}

std::uint16_t le16(const std::string& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    static_cast<unsigned char>(b[at + 1]) << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

dsp::Signal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string b = ss.str();
  const std::string where = path.string() + ": ";
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw Error(where + "not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_at = 0, data_len = 0;
  bool have_data = false;
  for (std::size_t pos = 12; pos + 8 <= b.size();) {
    const std::string id = b.substr(pos, 4);
    const std::size_t len = le32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > b.size()) {
      if (id == "data") {
        throw Error(where + "truncated data chunk");
      }
      throw Error(where + "truncated chunk '" + id + "'");
    }
    if (id == "fmt ") {
      if (len < 16) throw Error(where + "short fmt chunk");
      format = le16(b, body);
      channels = le16(b, body + 2);
      rate = le32(b, body + 4);
      bits = le16(b, body + 14);
      if (format == kFormatExtensible) {
        if (len < 26) throw Error(where + "short extensible fmt chunk");
        format = le16(b, body + 24);
      }
      have_fmt = true;
    } else if (id == "data") {
      data_at = body;
      data_len = len;
      have_data = true;
    }
    pos = body + len + (len & 1);
  }
  if (!have_fmt || !have_data) throw Error(where + "missing fmt or data chunk");
  if (channels != 1) throw Error(where + std::to_string(channels) + " channels; only mono is supported");
  if (rate != static_cast<std::uint32_t>(kWavSampleRate)) {
    throw Error(where + "sample rate " + std::to_string(rate) + " Hz; resample externally to 13000 Hz");
  }

  std::vector<double> samples;
  if (format == kFormatPcm && bits == 16) {
    samples.resize(data_len / 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      samples[i] = static_cast<double>(static_cast<std::int16_t>(le16(b, data_at + 2 * i))) / 32768.0;
    }
  } else if (format == kFormatFloat && bits == 32) {
    samples.resize(data_len / 4);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      samples[i] = static_cast<double>(std::bit_cast<float>(le32(b, data_at + 4 * i)));
    }
  } else {
    throw Error(where + "unsupported encoding (format " + std::to_string(format) + ", " +
                std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
  }
  return dsp::Signal(std::move(samples), kWavSampleRate);
}

void write_wav(const dsp::Signal& signal, const std::filesystem::path& path, WavFormat format) {
  if (signal.sample_rate_hz() != kWavSampleRate) {
    throw Error("WAV output is 13000 Hz only; resample externally");
  }
  const bool pcm = format == WavFormat::kPcm16;
  const std::uint16_t bytes_per_sample = pcm ? 2 : 4;
  const std::uint32_t data_len = static_cast<std::uint32_t>(signal.size() * bytes_per_sample);
  std::string out;
  out.reserve(44 + data_len);
  out += "RIFF";
  put32(out, 36 + data_len);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, pcm ? kFormatPcm : kFormatFloat);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(kWavSampleRate));
  put32(out, static_cast<std::uint32_t>(kWavSampleRate) * bytes_per_sample);
  put16(out, bytes_per_sample);
  put16(out, static_cast<std::uint16_t>(bytes_per_sample * 8));
  out += "data";
  put32(out, data_len);
  for (double v : signal.samples()) {
    if (pcm) {
      const double q = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("write failed: " + path.string());
}

}  // namespace anclab::eval
