#include "goldspot/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "goldspot/error.hpp"

namespace goldspot {

const char* to_string(Label label) noexcept {
    return label == Label::particle ? "particle" : "background";
}

namespace {

void check_dims(std::size_t width, std::size_t height) {
    if (width == 0 || height == 0)
        throw InvalidArgument("image dimensions must be at least 1x1, got " +
                              std::to_string(width) + "x" + std::to_string(height));
}

// Skips whitespace and '#' comments between PNM header tokens.
void skip_header_space(std::istream& in) {
    for (;;) {
        const int c = in.peek();
        if (c == '#') {
            std::string ignored;
            std::getline(in, ignored);
        } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            in.get();
        } else {
            return;
        }
    }
}

long read_header_int(std::istream& in, const std::filesystem::path& path, const char* what) {
    skip_header_space(in);
    long value = -1;
    if (!(in >> value) || value < 0)
        throw FormatError(path.string() + ": malformed header (bad " + what + ")");
    return value;
}

}  // namespace

GrayImage::GrayImage(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height) {
    check_dims(width, height);
    if (!(fill >= 0.0 && fill <= 255.0)) throw InvalidArgument("fill intensity outside [0, 255]");
    data_.assign(width * height, fill);
}

GrayImage::GrayImage(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dims(width, height);
    if (data_.size() != width * height)
        throw DimensionError("image data has " + std::to_string(data_.size()) +
                             " values, expected " + std::to_string(width * height));
    for (double v : data_)
        if (!(v >= 0.0 && v <= 255.0)) throw InvalidArgument("image intensity outside [0, 255]");
}

double GrayImage::clamped(long x, long y) const noexcept {
    const long cx = std::clamp(x, 0L, static_cast<long>(width_) - 1);
    const long cy = std::clamp(y, 0L, static_cast<long>(height_) - 1);
    return data_[static_cast<std::size_t>(cy) * width_ + static_cast<std::size_t>(cx)];
}

GrayImage load_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open file");

    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5')
        throw FormatError(path.string() + ": malformed header (expected P5 magic)");

    const long width = read_header_int(in, path, "width");
    const long height = read_header_int(in, path, "height");
    const long maxval = read_header_int(in, path, "maxval");
    if (width == 0 || height == 0)
        throw FormatError(path.string() + ": malformed header (zero dimension)");
    if (maxval == 0 || maxval > 65535)
        throw FormatError(path.string() + ": malformed header (bad maxval)");
    if (maxval > 255) throw FormatError(path.string() + ": unsupported bit depth (maxval " +
                                        std::to_string(maxval) + ")");
    // Exactly one whitespace byte separates the header from the raster.
    in.get();

    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw FormatError(path.string() + ": truncated raster data");

    std::vector<double> data(raw.begin(), raw.end());
    return GrayImage(static_cast<std::size_t>(width), static_cast<std::size_t>(height),
                     std::move(data));
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open file for writing");
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    std::vector<unsigned char> raw(img.size());
    std::transform(img.data().begin(), img.data().end(), raw.begin(), [](double v) {
        return static_cast<unsigned char>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    });
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

GrayImage downscale_half(const GrayImage& img) {
    if (img.width() < 2 || img.height() < 2)
        throw InvalidArgument("downscale_half needs an image of at least 2x2, got " +
                              std::to_string(img.width()) + "x" + std::to_string(img.height()));
    const std::size_t w = img.width() / 2;
    const std::size_t h = img.height() / 2;
    std::vector<double> out(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double sum = img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) +
                               img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1);
            out[y * w + x] = std::floor(sum / 4.0 + 0.5);
        }
    }
    return GrayImage(w, h, std::move(out));
}

Patch extract_patch(const GrayImage& img, double cx, double cy, std::size_t side) {
    if (side == 0) throw InvalidArgument("patch side must be positive");
    Patch patch;
    patch.side = side;
    patch.center_x = cx;
    patch.center_y = cy;
    patch.values.resize(side * side);

    const long half = static_cast<long>(side / 2);
    const long x0 = static_cast<long>(std::floor(cx + 0.5)) - half;
    const long y0 = static_cast<long>(std::floor(cy + 0.5)) - half;
    for (std::size_t j = 0; j < side; ++j)
        for (std::size_t i = 0; i < side; ++i)
            patch.values[j * side + i] =
                img.clamped(x0 + static_cast<long>(i), y0 + static_cast<long>(j)) / 255.0;
    return patch;
}

}  // namespace goldspot
