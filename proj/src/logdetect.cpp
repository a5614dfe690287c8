#include "goldspot/logdetect.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "goldspot/error.hpp"
#include "parallel.hpp"

namespace goldspot {

namespace {

void check_scale(double t) {
    if (!(t > 0.0) || !std::isfinite(t))
        throw InvalidArgument("scale t must be positive and finite, got " + std::to_string(t));
}

inline std::size_t clamp_index(long i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp(i, 0L, static_cast<long>(n) - 1));
}

}  // namespace

Plane Plane::from_image(const GrayImage& img) {
    Plane p;
    p.width = img.width();
    p.height = img.height();
    p.values.assign(img.data().begin(), img.data().end());
    return p;
}

ScaleBank bank_from_radii(std::vector<double> radii) {
    if (radii.empty()) throw InvalidArgument("scale bank needs at least one radius");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] >= kMinBankRadius))
            throw InvalidArgument("radius " + std::to_string(radii[i]) + " is below the minimum of " +
                                  std::to_string(kMinBankRadius));
        if (i > 0 && !(radii[i] > radii[i - 1]))
            throw InvalidArgument("bank radii must be strictly increasing");
    }
    ScaleBank bank;
    bank.scales.reserve(radii.size());
    for (double r : radii) bank.scales.push_back(r / 1.5);
    bank.radii = std::move(radii);
    bank.delta = 0.0;
    return bank;
}

ScaleBank build_bank(double nominal_radius, double delta) {
    if (!(delta >= 0.0)) throw InvalidArgument("delta must be >= 0");
    if (!(nominal_radius - delta >= kMinBankRadius))
        throw InvalidArgument("radius too small: nominal radius " + std::to_string(nominal_radius) +
                              " minus delta " + std::to_string(delta) + " is below " +
                              std::to_string(kMinBankRadius));
    std::vector<double> radii;
    const auto steps = static_cast<long>(std::floor(2.0 * delta + 1e-9));
    for (long k = 0; k <= steps; ++k) radii.push_back(nominal_radius - delta + static_cast<double>(k));
    ScaleBank bank = bank_from_radii(std::move(radii));
    bank.delta = delta;
    return bank;
}

std::vector<double> gaussian_kernel(double sigma) {
    check_scale(sigma);
    const auto radius = static_cast<long>(std::ceil(4.0 * sigma));
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (long i = -radius; i <= radius; ++i) {
        const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
        taps[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : taps) v /= sum;
    return taps;
}

Plane gaussian_smooth(const Plane& img, double t) {
    const std::vector<double> k = gaussian_kernel(t);
    const long radius = static_cast<long>(k.size() / 2);
    const std::size_t w = img.width;
    const std::size_t h = img.height;

    Plane tmp(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        const double* row = &img.values[y * w];
        for (std::size_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (long i = -radius; i <= radius; ++i)
                acc += k[static_cast<std::size_t>(i + radius)] *
                       row[clamp_index(static_cast<long>(x) + i, w)];
            tmp.values[y * w + x] = acc;
        }
    }

    Plane out(w, h);
    std::vector<double> acc(w);
    for (std::size_t y = 0; y < h; ++y) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (long i = -radius; i <= radius; ++i) {
            const double kv = k[static_cast<std::size_t>(i + radius)];
            const double* src = &tmp.values[clamp_index(static_cast<long>(y) + i, h) * w];
            for (std::size_t x = 0; x < w; ++x) acc[x] += kv * src[x];
        }
        std::copy(acc.begin(), acc.end(), out.values.begin() + static_cast<long>(y * w));
    }
    return out;
}

Plane gaussian_smooth(const GrayImage& img, double t) { return gaussian_smooth(Plane::from_image(img), t); }

Plane log_response(const Plane& img, double t) {
    const Plane smooth = gaussian_smooth(img, t);
    const std::size_t w = img.width;
    const std::size_t h = img.height;
    const double norm = t * t;
    Plane out(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        const std::size_t ym = clamp_index(static_cast<long>(y) - 1, h);
        const std::size_t yp = clamp_index(static_cast<long>(y) + 1, h);
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t xm = clamp_index(static_cast<long>(x) - 1, w);
            const std::size_t xp = clamp_index(static_cast<long>(x) + 1, w);
            const double c = smooth.at(x, y);
            const double lxx = smooth.at(xm, y) - 2.0 * c + smooth.at(xp, y);
            const double lyy = smooth.at(x, ym) - 2.0 * c + smooth.at(x, yp);
            out.at(x, y) = norm * (lxx + lyy);
        }
    }
    return out;
}

Plane log_response(const GrayImage& img, double t) { return log_response(Plane::from_image(img), t); }

ResponseStack response_stack(const GrayImage& img, const ScaleBank& bank) {
    if (bank.size() == 0) throw InvalidArgument("scale bank is empty");
    const Plane source = Plane::from_image(img);
    ResponseStack stack;
    stack.scales = bank.scales;
    stack.radii = bank.radii;
    stack.planes.resize(bank.size());
    detail::parallel_for(bank.size(), [&](std::size_t s) {
        stack.planes[s] = log_response(source, bank.scales[s]);
    });
    return stack;
}

std::vector<Detection> detect(const ResponseStack& stack, double threshold) {
    const std::size_t ns = stack.planes.size();
    if (ns == 0) throw InvalidArgument("response stack is empty");
    const std::size_t w = stack.planes.front().width;
    const std::size_t h = stack.planes.front().height;
    for (const Plane& p : stack.planes)
        if (p.width != w || p.height != h) throw DimensionError("response planes differ in size");

    auto value = [&](std::size_t s, std::size_t x, std::size_t y) { return stack.planes[s].values[y * w + x]; };

    // Pass 1: local maxima over the existing 3x3x3 neighborhood.
    std::vector<char> qualifies(ns * w * h, 0);
    auto slot = [&](std::size_t s, std::size_t x, std::size_t y) { return (y * w + x) * ns + s; };
    for (std::size_t s = 0; s < ns; ++s) {
        const std::size_t s0 = s == 0 ? 0 : s - 1;
        const std::size_t s1 = std::min(ns - 1, s + 1);
        for (std::size_t y = 0; y < h; ++y) {
            const std::size_t y0 = y == 0 ? 0 : y - 1;
            const std::size_t y1 = std::min(h - 1, y + 1);
            for (std::size_t x = 0; x < w; ++x) {
                const double v = value(s, x, y);
                if (!(v >= threshold)) continue;
                const std::size_t x0 = x == 0 ? 0 : x - 1;
                const std::size_t x1 = std::min(w - 1, x + 1);
                bool is_max = true;
                bool strictly_above_one = false;
                for (std::size_t ss = s0; ss <= s1 && is_max; ++ss)
                    for (std::size_t yy = y0; yy <= y1 && is_max; ++yy)
                        for (std::size_t xx = x0; xx <= x1; ++xx) {
                            if (ss == s && yy == y && xx == x) continue;
                            const double n = value(ss, xx, yy);
                            if (n > v) {
                                is_max = false;
                                break;
                            }
                            if (n < v) strictly_above_one = true;
                        }
                if (is_max && strictly_above_one) qualifies[slot(s, x, y)] = 1;
            }
        }
    }

    // Pass 2: plateau tie-break, emitted in (y, x, scale) order.
    std::vector<Detection> out;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t s = 0; s < ns; ++s) {
                if (!qualifies[slot(s, x, y)]) continue;
                const double v = value(s, x, y);
                bool shadowed = false;
                for (std::size_t yy = y == 0 ? 0 : y - 1; yy <= y && !shadowed; ++yy) {
                    const std::size_t xs = x == 0 ? 0 : x - 1;
                    const std::size_t xe = std::min(w - 1, x + 1);
                    for (std::size_t xx = xs; xx <= xe && !shadowed; ++xx) {
                        for (std::size_t ss = s == 0 ? 0 : s - 1; ss <= std::min(ns - 1, s + 1); ++ss) {
                            const bool earlier = yy < y || xx < x || (xx == x && ss < s);
                            if (!earlier || (yy == y && xx > x)) continue;
                            if (qualifies[slot(ss, xx, yy)] && value(ss, xx, yy) == v) {
                                shadowed = true;
                                break;
                            }
                        }
                    }
                }
                if (shadowed) continue;
                const double radius = s < stack.radii.size() ? stack.radii[s] : 1.5 * stack.scales[s];
                out.push_back({static_cast<double>(x), static_cast<double>(y), radius, v});
            }
        }
    }
    return out;
}

std::vector<Detection> detect(const GrayImage& img, const ScaleBank& bank, double threshold) {
    return detect(response_stack(img, bank), threshold);
}

}  // namespace goldspot
