#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nlvc/enhancer.hpp"
#include "nlvc/tensor.hpp"

namespace nlvc {

// JSON document describing a sequence of headerless planar 8-bit raw frames:
//   { "width": W, "height": H, "channels": C, "bit_depth": 8,
//     "frames": ["f0.raw", ...], "ground_truth": ["g0.raw", ...] }
// Frame paths are relative to the manifest's directory; ground_truth is
// optional but must pair 1:1 with frames when present.
struct SequenceManifest {
    int width = 0;
    int height = 0;
    int channels = 1;
    int bit_depth = 8;
    std::vector<std::string> frames;
    std::vector<std::string> ground_truth;
    std::filesystem::path base_dir;

    std::size_t frame_bytes() const {
        return static_cast<std::size_t>(width) * height * channels;
    }
    void validate() const;
};

// Parses and validates the manifest, including that every referenced file
// exists with exactly width*height*channels bytes.
SequenceManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const SequenceManifest& manifest);

// Raw planar frames: one 8-bit plane per channel, rows in order. Bytes map
// linearly to [0, 1] on load; saving rounds to the nearest intensity level.
Tensor load_raw_frame(const std::filesystem::path& path, int channels, int height, int width);
void save_raw_frame(const std::filesystem::path& path, const Tensor& frame);

std::vector<Tensor> load_frames(const SequenceManifest& manifest);
std::vector<Tensor> load_ground_truth(const SequenceManifest& manifest);

// Loads the manifest's frames as a center-targeted sequence (length must be
// odd, as the enhancer contract requires).
FrameSequence load_sequence(const std::string& manifest_path);

}  // namespace nlvc
