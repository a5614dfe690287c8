#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "goldspot/image.hpp"

namespace goldspot {

/// Real-valued image-sized plane (smoothed image or filter response).
/// Unlike GrayImage it carries no range restriction.
struct Plane {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> values;

    Plane() = default;
    Plane(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), values(w * h, fill) {}

    double& at(std::size_t x, std::size_t y) { return values[y * width + x]; }
    double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }

    static Plane from_image(const GrayImage& img);
};

/// Radii probed by the detector and their scales t = r / 1.5.
struct ScaleBank {
    std::vector<double> radii;
    std::vector<double> scales;
    double delta = 1.0;

    std::size_t size() const noexcept { return scales.size(); }
};

/// Smallest radius a bank may probe.
inline constexpr double kMinBankRadius = 2.0;

/// Radii {r - delta, ..., r + delta} in unit steps.
ScaleBank build_bank(double nominal_radius, double delta = 1.0);

/// Bank over an explicit radius list (must be strictly increasing, each >= 2).
ScaleBank bank_from_radii(std::vector<double> radii);

/// Normalized 1D Gaussian taps with standard deviation sigma, truncated at
/// ceil(4 sigma). Tap i corresponds to offset i - radius.
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian smoothing (sigma = t) with edge replication.
Plane gaussian_smooth(const Plane& img, double t);
Plane gaussian_smooth(const GrayImage& img, double t);

/// Scale-normalized Laplacian of Gaussian, t^2 (Lxx + Lyy). A dark blob of
/// matching size sits in an intensity minimum and gives a positive peak.
Plane log_response(const Plane& img, double t);
Plane log_response(const GrayImage& img, double t);

struct ResponseStack {
    std::vector<Plane> planes;
    std::vector<double> scales;
    std::vector<double> radii;  // 1.5 * scale, kept exact from the bank
};

/// One response plane per bank scale. Planes are computed in parallel when
/// more than one worker is available; results do not depend on scheduling.
ResponseStack response_stack(const GrayImage& img, const ScaleBank& bank);

struct Detection {
    double x = 0.0;
    double y = 0.0;
    double radius = 0.0;
    double response = 0.0;

    bool operator==(const Detection&) const = default;
};

/// Space-scale maxima of the stack with response >= threshold.
///
/// A voxel qualifies when it is >= every existing neighbor of its 3x3x3
/// neighborhood and > at least one of them. Among equal-valued qualifying
/// neighbors only the one first in (y, x, scale) order is kept. Output is
/// sorted by (y, x, scale).
std::vector<Detection> detect(const ResponseStack& stack, double threshold);

std::vector<Detection> detect(const GrayImage& img, const ScaleBank& bank, double threshold);

}  // namespace goldspot
