#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace goldspot {

enum class Label { background = 0, particle = 1 };

const char* to_string(Label label) noexcept;

/// Grayscale image with intensities on the native 0..255 scale.
///
/// Values are held as doubles so filtered or scaled images can reuse the
/// type, but every value must stay inside [0, 255].
class GrayImage {
public:
    GrayImage(std::size_t width, std::size_t height, double fill = 0.0);
    GrayImage(std::size_t width, std::size_t height, std::vector<double> data);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }

    double at(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

    /// Edge-replicating access; coordinates outside the image clamp to the border.
    double clamped(long x, long y) const noexcept;

    std::span<const double> data() const noexcept { return data_; }

    bool operator==(const GrayImage&) const = default;

private:
    std::size_t width_;
    std::size_t height_;
    std::vector<double> data_;
};

/// Square window of normalized intensities fed to the classifier.
struct Patch {
    std::size_t side = 20;
    std::vector<double> values;  // side * side, row-major, each in [0, 1]
    double center_x = 0.0;
    double center_y = 0.0;
    std::optional<Label> label;
};

/// Read a binary PGM (P5, maxval <= 255).
GrayImage load_image(const std::filesystem::path& path);

/// Write a binary PGM (P5, maxval 255). Values are rounded half-up to bytes.
void save_image(const GrayImage& img, const std::filesystem::path& path);

/// Halve both dimensions with a 2x2 box mean, rounded half-up.
GrayImage downscale_half(const GrayImage& img);

/// Crop a side x side window around (cx, cy) with edge replication and
/// scale into [0, 1]. For even sides the center pixel lands at index side/2.
Patch extract_patch(const GrayImage& img, double cx, double cy, std::size_t side = 20);

}  // namespace goldspot
