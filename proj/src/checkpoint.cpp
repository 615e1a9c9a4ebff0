#include "atlab/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include <nlohmann/json.hpp>

namespace atlab {

namespace {

constexpr char kMagic[8] = {'A', 'T', 'L', 'B', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("checkpoint: truncated while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(b, 8);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw IoError("checkpoint: truncated while reading parameters");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::string& path, const Mlp& model) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("checkpoint: cannot open for writing: " + path);

    nlohmann::json header;
    header["input_dim"] = model.spec().input_dim;
    header["hidden"] = model.spec().hidden;
    header["classes"] = model.spec().classes;
    header["param_count"] = model.param_count();
    const std::string hs = header.dump();

    os.write(kMagic, 8);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(hs.size()));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (double v : model.params().values) put_f64(os, v);
    if (!os) throw IoError("checkpoint: write failed: " + path);
}

Mlp load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open for reading: " + path);

    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) {
        throw FormatError("checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = get_u32(is);
    if (version != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t header_len = get_u32(is);
    std::string hs(header_len, '\0');
    is.read(hs.data(), header_len);
    if (!is) throw IoError("checkpoint: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: invalid header JSON: ") + e.what());
    }

    MlpSpec spec;
    spec.input_dim = header.at("input_dim").get<std::size_t>();
    spec.hidden = header.at("hidden").get<std::vector<std::size_t>>();
    spec.classes = header.at("classes").get<std::size_t>();
    const std::size_t count = header.at("param_count").get<std::size_t>();

    Mlp model = Mlp::build(spec, 0);
    if (count != model.param_count()) {
        throw FormatError("checkpoint: param_count " + std::to_string(count) +
                          " does not match layer spec (expects " + std::to_string(model.param_count()) +
                          ")");
    }
    ParamVector p;
    p.layout = model.layout();
    p.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) p.values[i] = get_f64(is);
    model.set_params(p);
    return model;
}

}  // namespace atlab
