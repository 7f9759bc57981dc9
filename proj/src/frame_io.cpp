#include "nlvc/frame_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "nlvc/common.hpp"

namespace nlvc {

namespace fs = std::filesystem;
using nlohmann::json;

void SequenceManifest::validate() const {
    check(width >= 1 && height >= 1 && channels >= 1, "manifest: invalid frame dimensions");
    check(bit_depth == 8, "manifest: only 8-bit frames are supported");
    check(!frames.empty(), "manifest: no frames listed");
    check(ground_truth.empty() || ground_truth.size() == frames.size(),
          "manifest: ground_truth must pair 1:1 with frames");
}

namespace {

void require_file_size(const fs::path& path, std::size_t expected) {
    std::error_code ec;
    const auto size = fs::file_size(path, ec);
    if (ec) {
        throw std::runtime_error("manifest: missing frame file " + path.string() +
                                 " (expected " + std::to_string(expected) + " bytes)");
    }
    if (size != expected) {
        throw std::runtime_error("manifest: frame file " + path.string() + " has " +
                                 std::to_string(size) + " bytes, expected " +
                                 std::to_string(expected));
    }
}

}  // namespace

SequenceManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error("manifest: " + path + " is not valid JSON: " + e.what());
    }

    SequenceManifest m;
    try {
        m.width = doc.at("width").get<int>();
        m.height = doc.at("height").get<int>();
        m.channels = doc.value("channels", 1);
        m.bit_depth = doc.value("bit_depth", 8);
        m.frames = doc.at("frames").get<std::vector<std::string>>();
        if (doc.contains("ground_truth")) {
            m.ground_truth = doc.at("ground_truth").get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        throw std::runtime_error("manifest: " + path + " has a bad field: " + e.what());
    }
    m.base_dir = fs::path(path).parent_path();
    m.validate();

    for (const std::string& rel : m.frames) {
        require_file_size(m.base_dir / rel, m.frame_bytes());
    }
    for (const std::string& rel : m.ground_truth) {
        require_file_size(m.base_dir / rel, m.frame_bytes());
    }
    return m;
}

void save_manifest(const std::string& path, const SequenceManifest& manifest) {
    manifest.validate();
    json doc;
    doc["width"] = manifest.width;
    doc["height"] = manifest.height;
    doc["channels"] = manifest.channels;
    doc["bit_depth"] = manifest.bit_depth;
    doc["frames"] = manifest.frames;
    if (!manifest.ground_truth.empty()) {
        doc["ground_truth"] = manifest.ground_truth;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot open " + path + " for writing");
    out << doc.dump(2) << '\n';
}

Tensor load_raw_frame(const fs::path& path, int channels, int height, int width) {
    const std::size_t expected = static_cast<std::size_t>(channels) * height * width;
    require_file_size(path, expected);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("frame: cannot open " + path.string());
    std::vector<unsigned char> bytes(expected);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(expected));
    if (!in) throw std::runtime_error("frame: short read on " + path.string());

    Tensor t(channels, height, width);
    for (std::size_t i = 0; i < expected; ++i) {
        t.data[i] = bytes[i] / 255.0;
    }
    return t;
}

void save_raw_frame(const fs::path& path, const Tensor& frame) {
    require_finite(frame, "save_raw_frame");
    std::vector<unsigned char> bytes(frame.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::clamp(frame.data[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("frame: cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("frame: write to " + path.string() + " failed");
}

std::vector<Tensor> load_frames(const SequenceManifest& manifest) {
    std::vector<Tensor> frames;
    frames.reserve(manifest.frames.size());
    for (const std::string& rel : manifest.frames) {
        frames.push_back(load_raw_frame(manifest.base_dir / rel, manifest.channels,
                                        manifest.height, manifest.width));
    }
    return frames;
}

std::vector<Tensor> load_ground_truth(const SequenceManifest& manifest) {
    std::vector<Tensor> frames;
    frames.reserve(manifest.ground_truth.size());
    for (const std::string& rel : manifest.ground_truth) {
        frames.push_back(load_raw_frame(manifest.base_dir / rel, manifest.channels,
                                        manifest.height, manifest.width));
    }
    return frames;
}

FrameSequence load_sequence(const std::string& manifest_path) {
    const SequenceManifest manifest = load_manifest(manifest_path);
    return FrameSequence::centered(load_frames(manifest));
}

}  // namespace nlvc
