#include "nlvc/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace nlvc {

namespace {

constexpr char kMagic[8] = {'N', 'L', 'V', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void require_little_endian() {
    if constexpr (std::endian::native != std::endian::little) {
        throw std::runtime_error("checkpoint: only little-endian hosts are supported");
    }
}

template <typename T>
void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error(std::string("checkpoint: truncated file reading ") + what);
    return value;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto len = read_pod<std::uint32_t>(in, "string length");
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw std::runtime_error("checkpoint: truncated file reading string");
    return s;
}

void write_tensor(std::ostream& out, const Tensor& t) {
    write_pod<std::int32_t>(out, t.channels);
    write_pod<std::int32_t>(out, t.height);
    write_pod<std::int32_t>(out, t.width);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& in) {
    const auto c = read_pod<std::int32_t>(in, "tensor channels");
    const auto h = read_pod<std::int32_t>(in, "tensor height");
    const auto w = read_pod<std::int32_t>(in, "tensor width");
    check(c >= 0 && h >= 0 && w >= 0, "checkpoint: negative tensor dimension");
    Tensor t(c, h, w);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated file reading tensor data");
    return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const NonLocalConfig& nl, const AdamState* adam) {
    require_little_endian();
    params.validate();
    nl.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");

    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kVersion);
    const ModelConfig& mc = params.config;
    for (int field : {mc.c_in, mc.c_f, mc.c_h, mc.temporal_radius, mc.encoder_layers,
                      mc.decoder_hidden_layers, mc.kernel_size}) {
        write_pod<std::int32_t>(out, field);
    }
    write_pod<std::int32_t>(out, nl.k);
    write_pod<std::int32_t>(out, nl.p);
    write_pod<double>(out, nl.beta);

    std::uint32_t count = 0;
    for_each_param(params, [&](const std::string&, const Tensor&) { ++count; });
    write_pod<std::uint32_t>(out, count);
    for_each_param(params, [&](const std::string& name, const Tensor& t) {
        write_string(out, name);
        write_tensor(out, t);
    });

    write_pod<std::uint8_t>(out, adam != nullptr ? 1 : 0);
    if (adam != nullptr) {
        check(adam->m.size() == count && adam->v.size() == count,
              "checkpoint: optimizer moments do not match the parameter count");
        write_pod<double>(out, adam->config.lr);
        write_pod<double>(out, adam->config.beta1);
        write_pod<double>(out, adam->config.beta2);
        write_pod<double>(out, adam->config.epsilon);
        write_pod<std::int64_t>(out, adam->step);
        for (const Tensor& t : adam->m) write_tensor(out, t);
        for (const Tensor& t : adam->v) write_tensor(out, t);
    }
    if (!out) throw std::runtime_error("checkpoint: write to " + path + " failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    require_little_endian();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || !std::equal(magic, magic + 8, kMagic)) {
        throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
    }
    const auto version = read_pod<std::uint32_t>(in, "version");
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }

    ModelConfig mc;
    mc.c_in = read_pod<std::int32_t>(in, "c_in");
    mc.c_f = read_pod<std::int32_t>(in, "c_f");
    mc.c_h = read_pod<std::int32_t>(in, "c_h");
    mc.temporal_radius = read_pod<std::int32_t>(in, "temporal_radius");
    mc.encoder_layers = read_pod<std::int32_t>(in, "encoder_layers");
    mc.decoder_hidden_layers = read_pod<std::int32_t>(in, "decoder_hidden_layers");
    mc.kernel_size = read_pod<std::int32_t>(in, "kernel_size");

    Checkpoint ckpt;
    ckpt.nl.k = read_pod<std::int32_t>(in, "k");
    ckpt.nl.p = read_pod<std::int32_t>(in, "p");
    ckpt.nl.beta = read_pod<double>(in, "beta");
    ckpt.params = zero_network_params(mc);

    const auto count = read_pod<std::uint32_t>(in, "parameter count");
    std::uint32_t expected = 0;
    for_each_param(ckpt.params, [&](const std::string&, const Tensor&) { ++expected; });
    if (count != expected) {
        throw std::runtime_error("checkpoint: parameter count " + std::to_string(count) +
                                 " does not match the configuration (" +
                                 std::to_string(expected) + ")");
    }
    for_each_param(ckpt.params, [&](const std::string& name, Tensor& t) {
        const std::string stored = read_string(in);
        if (stored != name) {
            throw std::runtime_error("checkpoint: parameter order mismatch, expected " + name +
                                     ", found " + stored);
        }
        Tensor loaded = read_tensor(in);
        if (!loaded.same_shape(t)) {
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        }
        t = std::move(loaded);
    });

    const auto has_adam = read_pod<std::uint8_t>(in, "optimizer flag");
    if (has_adam == 1) {
        AdamState state;
        state.config.lr = read_pod<double>(in, "lr");
        state.config.beta1 = read_pod<double>(in, "beta1");
        state.config.beta2 = read_pod<double>(in, "beta2");
        state.config.epsilon = read_pod<double>(in, "epsilon");
        state.step = read_pod<std::int64_t>(in, "step");
        for (std::uint32_t i = 0; i < count; ++i) state.m.push_back(read_tensor(in));
        for (std::uint32_t i = 0; i < count; ++i) state.v.push_back(read_tensor(in));
        ckpt.adam = std::move(state);
    } else if (has_adam != 0) {
        throw std::runtime_error("checkpoint: corrupt optimizer flag");
    }
    return ckpt;
}

}  // namespace nlvc
