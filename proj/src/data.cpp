#include "atlab/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "atlab/rng.hpp"

namespace atlab {

void validate_dataset(const Dataset& d) {
    require_rank2(d.inputs, "dataset");
    if (d.labels.size() != d.inputs.rows()) {
        throw ConfigError("dataset: " + std::to_string(d.labels.size()) + " labels for " +
                          std::to_string(d.inputs.rows()) + " inputs");
    }
    if (d.classes < 2) throw ConfigError("dataset: needs at least 2 classes");
    for (double v : d.inputs.data) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ConfigError("dataset: input coordinate outside [0,1]: " + std::to_string(v));
        }
    }
    for (int y : d.labels) {
        if (y < 0 || y >= d.classes) {
            throw ConfigError("dataset: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(d.classes) + ")");
        }
    }
}

namespace {
double clip01(double v) { return std::min(1.0, std::max(0.0, v)); }
}  // namespace

Dataset make_two_moons(std::size_t n, double noise_sd, std::uint64_t seed) {
    if (n < 2) throw ConfigError("two_moons: n must be >= 2");
    if (n % 2 != 0) throw ConfigError("two_moons: n must be even");
    if (noise_sd < 0.0) throw ConfigError("two_moons: noise_sd must be >= 0");

    const std::size_t half = n / 2;
    constexpr double kPi = 3.14159265358979323846;
    Rng rng(derive_seed(seed, stream::kData));

    Dataset d;
    d.classes = 2;
    d.inputs = Tensor::zeros({n, 2});
    d.labels.assign(n, 0);

    // Arc coordinates before rescaling: outer moon (cos t, sin t), inner moon
    // (1 - cos t, 0.5 - sin t), t uniform over [0, pi]. The fixed affine map
    // X = (x+1)/3, Y = (y+0.5)/1.5 places both noiseless arcs inside [0,1]^2.
    for (std::size_t i = 0; i < n; ++i) {
        const bool inner = i >= half;
        const std::size_t k = inner ? i - half : i;
        const double t = half > 1 ? kPi * static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
        double x = inner ? 1.0 - std::cos(t) : std::cos(t);
        double y = inner ? 0.5 - std::sin(t) : std::sin(t);
        x += noise_sd * rng.gaussian();
        y += noise_sd * rng.gaussian();
        d.inputs.data[i * 2] = clip01((x + 1.0) / 3.0);
        d.inputs.data[i * 2 + 1] = clip01((y + 0.5) / 1.5);
        d.labels[i] = inner ? 1 : 0;
    }
    validate_dataset(d);
    return d;
}

Dataset make_blobs(std::size_t n, const std::vector<std::vector<double>>& centers, double spread_sd,
                   std::uint64_t seed) {
    if (centers.size() < 2) throw ConfigError("blobs: needs at least 2 centers");
    if (spread_sd < 0.0) throw ConfigError("blobs: spread_sd must be >= 0");
    if (n < 1) throw ConfigError("blobs: n must be >= 1");
    const std::size_t dim = centers[0].size();
    if (dim == 0) throw ConfigError("blobs: centers must have at least one coordinate");
    for (std::size_t c = 0; c < centers.size(); ++c) {
        if (centers[c].size() != dim) throw ConfigError("blobs: centers have inconsistent dimensions");
        for (double v : centers[c]) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ConfigError("blobs: center " + std::to_string(c) + " outside the unit box");
            }
        }
    }

    Rng rng(derive_seed(seed, stream::kData));
    Dataset d;
    d.classes = static_cast<int>(centers.size());
    d.inputs = Tensor::zeros({n, dim});
    d.labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % centers.size();
        for (std::size_t j = 0; j < dim; ++j) {
            d.inputs.data[i * dim + j] = clip01(centers[c][j] + spread_sd * rng.gaussian());
        }
        d.labels[i] = static_cast<int>(c);
    }
    validate_dataset(d);
    return d;
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("idx: truncated file: " + path);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace

IdxHeader read_idx_header(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("idx: cannot open: " + path);
    IdxHeader h;
    h.magic = read_be_u32(is, path);
    if (h.magic == kImagesMagic) {
        h.count = read_be_u32(is, path);
        h.rows = read_be_u32(is, path);
        h.cols = read_be_u32(is, path);
    } else if (h.magic == kLabelsMagic) {
        h.count = read_be_u32(is, path);
    } else {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "0x%08x", h.magic);
        throw FormatError("idx: bad magic " + std::string(buf) + " in " + path);
    }
    return h;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, std::size_t limit) {
    const IdxHeader ih = read_idx_header(images_path);
    if (ih.magic != kImagesMagic) {
        throw FormatError("idx: " + images_path + " is not a 3-D ubyte image file");
    }
    const IdxHeader lh = read_idx_header(labels_path);
    if (lh.magic != kLabelsMagic) {
        throw FormatError("idx: " + labels_path + " is not a 1-D ubyte label file");
    }
    if (ih.count != lh.count) {
        throw ConfigError("idx: image count " + std::to_string(ih.count) + " != label count " +
                          std::to_string(lh.count));
    }

    const std::size_t n = std::min(limit, ih.count);
    if (n == 0) throw ConfigError("idx: no examples to load (limit 0 or empty files)");
    const std::size_t pixels = ih.rows * ih.cols;

    std::ifstream img(images_path, std::ios::binary);
    std::ifstream lab(labels_path, std::ios::binary);
    img.seekg(16);
    lab.seekg(8);

    Dataset d;
    d.inputs = Tensor::zeros({n, pixels});
    d.labels.assign(n, 0);

    std::vector<unsigned char> row(pixels);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        img.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(pixels));
        if (!img) throw IoError("idx: truncated image data in " + images_path);
        for (std::size_t j = 0; j < pixels; ++j) {
            d.inputs.data[i * pixels + j] = static_cast<double>(row[j]) / 255.0;
        }
        char lb;
        lab.read(&lb, 1);
        if (!lab) throw IoError("idx: truncated label data in " + labels_path);
        d.labels[i] = static_cast<int>(static_cast<unsigned char>(lb));
        max_label = std::max(max_label, d.labels[i]);
    }
    d.classes = std::max(2, max_label + 1);
    validate_dataset(d);
    return d;
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("csv: cannot open for writing: " + path);
    const std::size_t dim = d.dim();
    for (std::size_t j = 0; j < dim; ++j) os << "x" << j << ",";
    os << "label\n";
    char buf[32];
    for (std::size_t i = 0; i < d.size(); ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", d.inputs.data[i * dim + j]);
            os << buf << ",";
        }
        os << d.labels[i] << "\n";
    }
    if (!os) throw IoError("csv: write failed: " + path);
}

}  // namespace atlab
