#include "sernas/audio/wav.hpp"

#include <cstdint>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sernas::audio {

namespace {

uint32_t rd_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t rd_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void wr_u32(std::ostream& os, uint32_t v) {
  char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8),
               static_cast<char>(v >> 16), static_cast<char>(v >> 24)};
  os.write(b, 4);
}

void wr_u16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

}  // namespace

Utterance load_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw std::runtime_error(path + ": malformed WAV header");

  int channels = 0, sample_rate = 0, bits = 0;
  size_t data_off = 0, data_len = 0;
  size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::string tag(reinterpret_cast<const char*>(buf.data() + off), 4);
    const uint32_t len = rd_u32(buf.data() + off + 4);
    if (off + 8 + len > buf.size())
      throw std::runtime_error(path + ": truncated chunk " + tag);
    if (tag == "fmt ") {
      if (len < 16) throw std::runtime_error(path + ": short fmt chunk");
      const uint16_t fmt = rd_u16(buf.data() + off + 8);
      channels = rd_u16(buf.data() + off + 10);
      sample_rate = static_cast<int>(rd_u32(buf.data() + off + 12));
      bits = rd_u16(buf.data() + off + 22);
      if (fmt != 1)
        throw std::runtime_error(path + ": unsupported encoding (PCM only)");
    } else if (tag == "data") {
      data_off = off + 8;
      data_len = len;
    }
    off += 8 + len + (len & 1);
  }
  if (channels == 0 || data_off == 0)
    throw std::runtime_error(path + ": missing fmt or data chunk");
  if (bits != 16)
    throw std::runtime_error(path + ": unsupported encoding (" +
                             std::to_string(bits) + "-bit; 16-bit PCM only)");
  if (channels != 1 && channels != 2)
    throw std::runtime_error(path + ": unsupported channel count " +
                             std::to_string(channels));

  const size_t n_samples = data_len / 2 / channels;
  Utterance u;
  u.sample_rate = sample_rate;
  u.samples.resize(n_samples);
  const unsigned char* d = buf.data() + data_off;
  for (size_t i = 0; i < n_samples; ++i) {
    float acc = 0;
    for (int c = 0; c < channels; ++c) {
      const int16_t s = static_cast<int16_t>(
          rd_u16(d + (i * channels + c) * 2));
      acc += static_cast<float>(s) / 32768.0f;
    }
    u.samples[i] = acc / static_cast<float>(channels);
  }
  u.id = std::filesystem::path(path).stem().string();
  return u;
}

void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const uint32_t data_len = static_cast<uint32_t>(samples.size() * 2);
  f.write("RIFF", 4);
  wr_u32(f, 36 + data_len);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  wr_u32(f, 16);
  wr_u16(f, 1);  // PCM
  wr_u16(f, 1);  // mono
  wr_u32(f, static_cast<uint32_t>(sample_rate));
  wr_u32(f, static_cast<uint32_t>(sample_rate * 2));
  wr_u16(f, 2);
  wr_u16(f, 16);
  f.write("data", 4);
  wr_u32(f, data_len);
  for (float s : samples) {
    long v = std::lrint(static_cast<double>(s) * 32768.0);
    if (v > 32767) v = 32767;
    if (v < -32768) v = -32768;
    wr_u16(f, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }
}

std::vector<Utterance> load_manifest(const std::string& manifest_path) {
  std::ifstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot open manifest " + manifest_path);
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  std::string line;
  if (!std::getline(f, line) || line != "path,label,speaker,session")
    throw std::runtime_error(manifest_path +
                             ": expected header path,label,speaker,session");
  std::vector<Utterance> utts;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string path, label, speaker, session;
    if (!std::getline(ls, path, ',') || !std::getline(ls, label, ',') ||
        !std::getline(ls, speaker, ',') || !std::getline(ls, session))
      throw std::runtime_error(manifest_path + ": malformed record: " + line);
    auto full = std::filesystem::path(path).is_absolute()
                    ? std::filesystem::path(path)
                    : dir / path;
    Utterance u = load_wav(full.string());
    u.label = emotion_index(label);
    u.speaker = std::stoi(speaker);
    u.session = std::stoi(session);
    u.validate();
    utts.push_back(std::move(u));
  }
  return utts;
}

void write_manifest(const std::string& manifest_path,
                    const std::vector<std::string>& paths,
                    const std::vector<Utterance>& utts) {
  if (paths.size() != utts.size())
    throw std::invalid_argument("write_manifest: size mismatch");
  std::ofstream f(manifest_path);
  if (!f) throw std::runtime_error("cannot write " + manifest_path);
  f << "path,label,speaker,session\n";
  for (size_t i = 0; i < utts.size(); ++i)
    f << paths[i] << ',' << emotion_names()[utts[i].label] << ','
      << utts[i].speaker << ',' << utts[i].session << "\n";
}

}  // namespace sernas::audio
