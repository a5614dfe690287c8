#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "goldspot/error.hpp"
#include "goldspot/logdetect.hpp"
#include "goldspot/synth.hpp"
#include "helpers.hpp"

using namespace goldspot;

namespace {

// Direct 2D convolution with an outer-product kernel built from scratch.
Plane brute_smooth(const Plane& img, double sigma) {
    const long r = static_cast<long>(std::ceil(4.0 * sigma));
    std::vector<double> g;
    double total = 0.0;
    for (long i = -r; i <= r; ++i) {
        g.push_back(std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma)));
        total += g.back();
    }
    const long w = static_cast<long>(img.width), h = static_cast<long>(img.height);
    Plane out(img.width, img.height);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
            double acc = 0.0;
            for (long j = -r; j <= r; ++j)
                for (long i = -r; i <= r; ++i) {
                    const long sx = std::clamp(x + i, 0L, w - 1), sy = std::clamp(y + j, 0L, h - 1);
                    acc += g[i + r] * g[j + r] / (total * total) * img.at(sx, sy);
                }
            out.at(x, y) = acc;
        }
    return out;
}

Plane brute_log(const Plane& img, double t) {
    const Plane s = brute_smooth(img, t);
    const long w = static_cast<long>(img.width), h = static_cast<long>(img.height);
    auto at = [&](long x, long y) { return s.at(std::clamp(x, 0L, w - 1), std::clamp(y, 0L, h - 1)); };
    Plane out(img.width, img.height);
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            out.at(x, y) = t * t * (at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4.0 * at(x, y));
    return out;
}

GrayImage disk_image(std::size_t w, std::size_t h, double cx, double cy, double r, double fg = 20.0,
                     double bg = 200.0) {
    std::vector<double> d(w * h, bg);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if (std::hypot(x - cx, y - cy) <= r) d[y * w + x] = fg;
    return GrayImage(w, h, std::move(d));
}

double max_abs_diff(const Plane& a, const Plane& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

}  // namespace

TEST_SUITE("logdetect") {

TEST_CASE("gaussian kernel is normalized, symmetric and truncated at 4 sigma") {
    for (double sigma : {0.5, 1.0, 2.0, 2.5, 10.0 / 3.0}) {
        const auto k = gaussian_kernel(sigma);
        CHECK(k.size() == 2 * static_cast<std::size_t>(std::ceil(4.0 * sigma)) + 1);
        double sum = 0.0;
        for (double v : k) sum += v;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
        for (std::size_t i = 0; i < k.size() / 2; ++i) CHECK(k[i] == k[k.size() - 1 - i]);
        CHECK(*std::max_element(k.begin(), k.end()) == k[k.size() / 2]);
    }
    CHECK(gaussian_kernel(2.0).size() == 17);
    CHECK_THROWS_AS(gaussian_kernel(0.0), InvalidArgument);
    CHECK_THROWS_AS(gaussian_kernel(-1.0), InvalidArgument);
}

TEST_CASE("smoothing an impulse reproduces the kernel outer product") {
    Plane p(41, 41, 0.0);
    p.at(20, 20) = 1.0;
    const double t = 2.0;
    const auto k = gaussian_kernel(t);
    const Plane s = gaussian_smooth(p, t);
    const std::size_t r = k.size() / 2;
    CHECK(s.at(20, 20) == doctest::Approx(k[r] * k[r]).epsilon(1e-14));
    CHECK(s.at(23, 18) == doctest::Approx(k[r + 3] * k[r - 2]).epsilon(1e-14));
    CHECK(s.at(0, 0) == 0.0);
}

TEST_CASE("separable smoothing matches a direct 2D convolution") {
    const GrayImage img = testing::random_image(37, 29, 11);
    const Plane p = Plane::from_image(img);
    for (double t : {1.0, 2.0, 10.0 / 3.0}) {
        CHECK(max_abs_diff(gaussian_smooth(p, t), brute_smooth(p, t)) < 1e-9);
        CHECK(max_abs_diff(log_response(p, t), brute_log(p, t)) < 1e-9);
    }
}

TEST_CASE("response of a constant image is zero") {
    const Plane r = log_response(GrayImage(30, 20, 123.0), 2.5);
    for (double v : r.values) REQUIRE(std::abs(v) < 1e-9);
}

TEST_CASE("response is linear and flips sign under inversion") {
    const GrayImage a = testing::random_image(32, 32, 1);
    std::vector<double> inv(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) inv[i] = 255.0 - a.data()[i];
    const Plane ra = log_response(a, 2.0);
    const Plane ri = log_response(GrayImage(32, 32, inv), 2.0);
    for (std::size_t i = 0; i < ra.values.size(); ++i) REQUIRE(ri.values[i] == doctest::Approx(-ra.values[i]).epsilon(1e-9));

    Plane p = Plane::from_image(a);
    Plane q = Plane::from_image(testing::random_image(32, 32, 2));
    Plane mix(32, 32);
    for (std::size_t i = 0; i < mix.values.size(); ++i) mix.values[i] = 2.0 * p.values[i] - 0.5 * q.values[i];
    const Plane rp = log_response(p, 2.0), rq = log_response(q, 2.0), rm = log_response(mix, 2.0);
    for (std::size_t i = 0; i < rm.values.size(); ++i)
        REQUIRE(rm.values[i] == doctest::Approx(2.0 * rp.values[i] - 0.5 * rq.values[i]).epsilon(1e-9));
}

TEST_CASE("response shifts with the image") {
    const GrayImage a = disk_image(80, 80, 30, 35, 5);
    const GrayImage b = disk_image(80, 80, 37, 31, 5);
    const Plane ra = log_response(a, 10.0 / 3.0), rb = log_response(b, 10.0 / 3.0);
    for (std::size_t y = 10; y < 60; ++y)
        for (std::size_t x = 10; x < 60; ++x) REQUIRE(rb.at(x + 7, y - 4) == doctest::Approx(ra.at(x, y)).epsilon(1e-9));
}

TEST_CASE("a dark disk peaks positively at its center") {
    const GrayImage img = disk_image(64, 64, 32, 32, 5);
    const Plane r = log_response(img, 5.0 / 1.5);
    const auto it = std::max_element(r.values.begin(), r.values.end());
    const auto idx = static_cast<std::size_t>(it - r.values.begin());
    CHECK(idx % 64 == 32);
    CHECK(idx / 64 == 32);
    CHECK(*it > 0.0);
}

TEST_CASE("scale banks") {
    const ScaleBank b = build_bank(4.0, 1.0);
    CHECK(b.radii == std::vector<double>{3.0, 4.0, 5.0});
    REQUIRE(b.size() == 3);
    CHECK(b.scales[0] == doctest::Approx(2.0));
    CHECK(b.scales[2] == doctest::Approx(10.0 / 3.0));
    CHECK(b.delta == 1.0);

    CHECK(build_bank(3.0, 1.0).radii == std::vector<double>{2.0, 3.0, 4.0});
    CHECK(build_bank(5.0, 0.0).radii == std::vector<double>{5.0});
    CHECK(build_bank(9.0, 2.0).size() == 5);
    CHECK_THROWS_AS(build_bank(2.5, 1.0), InvalidArgument);
    CHECK_THROWS_AS(build_bank(5.0, -1.0), InvalidArgument);

    CHECK(bank_from_radii({3, 5, 7, 9}).scales[3] == doctest::Approx(6.0));
    CHECK_THROWS_AS(bank_from_radii({}), InvalidArgument);
    CHECK_THROWS_AS(bank_from_radii({3, 3}), InvalidArgument);
    CHECK_THROWS_AS(bank_from_radii({1.5, 3}), InvalidArgument);
}

TEST_CASE("nothing is detected in a constant image") {
    CHECK(detect(GrayImage(64, 64, 90.0), build_bank(4.0), 1.0).empty());
}

TEST_CASE("a single disk gives a single detection at its center") {
    const GrayImage img = disk_image(64, 64, 32, 32, 5);
    const auto dets = detect(img, build_bank(5.0), 10.0);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].x == 32.0);
    CHECK(dets[0].y == 32.0);
    CHECK(std::abs(dets[0].radius - 5.0) <= 1.0);
    CHECK(dets[0].response >= 10.0);
}

TEST_CASE("the detector finds nearly every particle of a default synthetic image") {
    SynthSpec spec;
    spec.seed = 77;
    const SynthImage s = generate(spec);
    const auto dets = detect(s.image, build_bank(4.0), 10.0);
    std::size_t found = 0;
    for (const auto& a : s.annotations) {
        bool hit = false;
        for (const auto& d : dets)
            if (std::hypot(d.x - a.x, d.y - a.y) <= 4.0) hit = true;
        found += hit;
    }
    CHECK(static_cast<double>(found) / s.annotations.size() >= 0.95);
}

TEST_CASE("raising the threshold only removes detections") {
    SynthSpec spec;
    spec.width = spec.height = 200;
    spec.n_particles = 15;
    spec.n_distractors = 5;
    spec.seed = 5;
    const ResponseStack st = response_stack(generate(spec).image, build_bank(4.0));
    const auto lo = detect(st, 5.0);
    const auto hi = detect(st, 30.0);
    CHECK(hi.size() <= lo.size());
    for (const auto& d : hi) CHECK(std::find(lo.begin(), lo.end(), d) != lo.end());
}

TEST_CASE("a plateau keeps only its first voxel") {
    ResponseStack st;
    st.planes.assign(1, Plane(5, 5, 0.0));
    st.scales = {2.0};
    st.radii = {3.0};
    st.planes[0].at(1, 2) = 1.0;
    st.planes[0].at(2, 2) = 1.0;
    const auto dets = detect(st, 0.5);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0] == Detection{1.0, 2.0, 3.0, 1.0});
}

TEST_CASE("maxima agree with a brute-force neighborhood scan") {
    Rng rng(3);
    ResponseStack st;
    const std::size_t w = 23, h = 17;
    for (int s = 0; s < 3; ++s) {
        Plane p(w, h);
        for (double& v : p.values) v = rng.uniform(-1.0, 1.0);
        st.planes.push_back(std::move(p));
        st.scales.push_back(2.0 + s);
        st.radii.push_back(3.0 + 1.5 * s);
    }
    std::vector<Detection> expect;
    for (long y = 0; y < static_cast<long>(h); ++y)
        for (long x = 0; x < static_cast<long>(w); ++x)
            for (long s = 0; s < 3; ++s) {
                const double v = st.planes[s].at(x, y);
                if (v < 0.2) continue;
                bool is_max = true;
                for (long ds = -1; ds <= 1; ++ds)
                    for (long dy = -1; dy <= 1; ++dy)
                        for (long dx = -1; dx <= 1; ++dx) {
                            const long xs = x + dx, ys = y + dy, ss = s + ds;
                            if ((dx | dy | ds) == 0 || xs < 0 || ys < 0 || ss < 0 || xs >= static_cast<long>(w) ||
                                ys >= static_cast<long>(h) || ss >= 3)
                                continue;
                            if (st.planes[ss].at(xs, ys) >= v) is_max = false;
                        }
                if (is_max) expect.push_back({static_cast<double>(x), static_cast<double>(y), st.radii[s], v});
            }
    CHECK(detect(st, 0.2) == expect);
    CHECK_FALSE(expect.empty());
}

TEST_CASE("stack planes must agree in size") {
    ResponseStack st;
    st.planes = {Plane(4, 4), Plane(5, 4)};
    st.scales = {2.0, 3.0};
    st.radii = {3.0, 4.5};
    CHECK_THROWS_AS(detect(st, 0.0), DimensionError);
    CHECK_THROWS_AS(detect(ResponseStack{}, 0.0), InvalidArgument);
}

}
