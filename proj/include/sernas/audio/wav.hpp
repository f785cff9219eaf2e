#pragma once

#include <string>
#include <vector>

#include "sernas/audio/types.hpp"

namespace sernas::audio {

// 16-bit PCM reader; mono or stereo (stereo is downmixed by averaging).
// Samples are scaled to [-1, 1]. Label metadata comes from the manifest, not
// the file.
Utterance load_wav(const std::string& path);

// 16-bit PCM mono writer.
void write_wav(const std::string& path, const std::vector<float>& samples,
               int sample_rate);

// Manifest: CSV with header "path,label,speaker,session", one utterance per
// record. Relative paths resolve against the manifest's directory.
std::vector<Utterance> load_manifest(const std::string& manifest_path);

void write_manifest(const std::string& manifest_path,
                    const std::vector<std::string>& paths,
                    const std::vector<Utterance>& utts);

}  // namespace sernas::audio
