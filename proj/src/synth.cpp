#include "goldspot/synth.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <variant>

#include "goldspot/error.hpp"
#include "goldspot/random.hpp"

namespace goldspot {

namespace {

struct Point {
    double x;
    double y;
};

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Disk {
    Point c;
    double radius;
};

struct Ring {
    Point c;
    double radius;
    double half_width;
};

struct Bar {
    Point a;
    Point b;
    double half_width;
};

using Shape = std::variant<Disk, Ring, Bar>;

double segment_distance(Point p, Point a, Point b) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return dist(p, {a.x + t * dx, a.y + t * dy});
}

// Signed distance from p to the shape boundary, negative inside.
double signed_distance(const Shape& shape, Point p) {
    struct Visitor {
        Point p;
        double operator()(const Disk& d) const { return dist(p, d.c) - d.radius; }
        double operator()(const Ring& r) const {
            return std::abs(dist(p, r.c) - r.radius) - r.half_width;
        }
        double operator()(const Bar& b) const {
            return segment_distance(p, b.a, b.b) - b.half_width;
        }
    };
    return std::visit(Visitor{p}, shape);
}

double shape_distance(const Shape& shape, Point p) {
    return std::max(0.0, signed_distance(shape, p));
}

// Pixel coverage with a one-pixel linear ramp at the boundary.
double coverage(const Shape& shape, Point pixel_center) {
    return std::clamp(0.5 - signed_distance(shape, pixel_center), 0.0, 1.0);
}

struct Box {
    long x0, y0, x1, y1;
};

Box bounds(const Shape& shape) {
    struct Visitor {
        Box operator()(const Disk& d) const { return around(d.c, d.radius + 1.0); }
        Box operator()(const Ring& r) const { return around(r.c, r.radius + r.half_width + 1.0); }
        Box operator()(const Bar& b) const {
            const double pad = b.half_width + 1.0;
            return {static_cast<long>(std::floor(std::min(b.a.x, b.b.x) - pad)),
                    static_cast<long>(std::floor(std::min(b.a.y, b.b.y) - pad)),
                    static_cast<long>(std::ceil(std::max(b.a.x, b.b.x) + pad)),
                    static_cast<long>(std::ceil(std::max(b.a.y, b.b.y) + pad))};
        }
        static Box around(Point c, double r) {
            return {static_cast<long>(std::floor(c.x - r)), static_cast<long>(std::floor(c.y - r)),
                    static_cast<long>(std::ceil(c.x + r)), static_cast<long>(std::ceil(c.y + r))};
        }
    };
    return std::visit(Visitor{}, shape);
}

void paint(std::vector<double>& canvas, std::size_t width, std::size_t height, const Shape& shape,
           double intensity) {
    const Box box = bounds(shape);
    const long x0 = std::max(0L, box.x0);
    const long y0 = std::max(0L, box.y0);
    const long x1 = std::min(static_cast<long>(width) - 1, box.x1);
    const long y1 = std::min(static_cast<long>(height) - 1, box.y1);
    for (long y = y0; y <= y1; ++y) {
        for (long x = x0; x <= x1; ++x) {
            const double a =
                coverage(shape, {static_cast<double>(x), static_cast<double>(y)});
            if (a <= 0.0) continue;
            double& v = canvas[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)];
            v = (1.0 - a) * v + a * intensity;
        }
    }
}

Shape random_distractor(Rng& rng, const SynthSpec& spec) {
    const double r = spec.particle_radius;
    const Point c{rng.uniform(0.0, static_cast<double>(spec.width - 1)),
                  rng.uniform(0.0, static_cast<double>(spec.height - 1))};
    switch (rng.below(3)) {
        case 0:
            return Ring{c, rng.uniform(2.0 * r, 3.5 * r), rng.uniform(0.5, 1.0)};
        case 1: {
            const double length = rng.uniform(5.0 * r, 10.0 * r);
            const double angle = rng.uniform(0.0, std::numbers::pi);
            const double hx = 0.5 * length * std::cos(angle);
            const double hy = 0.5 * length * std::sin(angle);
            return Bar{{c.x - hx, c.y - hy}, {c.x + hx, c.y + hy}, rng.uniform(0.4 * r, 0.8 * r)};
        }
        default:
            return Disk{c, rng.uniform(2.5 * r, 4.0 * r)};
    }
}

}  // namespace

void SynthSpec::validate() const {
    if (width == 0 || height == 0) throw InvalidArgument("synth: image dimensions must be >= 1");
    if (!(particle_radius >= 2.0)) throw InvalidArgument("synth: particle_radius must be >= 2");
    if (particle_intensity < 0.0 || background_intensity > 255.0)
        throw InvalidArgument("synth: intensities must lie in [0, 255]");
    if (!(particle_intensity < background_intensity))
        throw InvalidArgument("synth: particle_intensity must be below background_intensity");
    if (noise_sigma < 0.0) throw InvalidArgument("synth: noise_sigma must be >= 0");
    if (separation() < 2.0 * particle_radius)
        throw InvalidArgument("synth: min_separation must be >= 2 * particle_radius");
    const double margin = particle_radius;
    if (n_particles > 0 &&
        (static_cast<double>(width) - 1.0 < 2.0 * margin ||
         static_cast<double>(height) - 1.0 < 2.0 * margin))
        throw InvalidArgument("synth: image too small for the particle radius");
}

SynthImage generate(const SynthSpec& spec) {
    spec.validate();
    Rng rng(derive_seed(spec.seed, "synth"));

    const double r = spec.particle_radius;
    const double sep = spec.separation();
    std::vector<Annotation> annotations;
    annotations.reserve(spec.n_particles);
    for (std::size_t i = 0; i < spec.n_particles; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementBudget && !placed; ++attempt) {
            const Point c{rng.uniform(r, static_cast<double>(spec.width - 1) - r),
                          rng.uniform(r, static_cast<double>(spec.height - 1) - r)};
            placed = std::none_of(annotations.begin(), annotations.end(), [&](const Annotation& a) {
                return dist(c, {a.x, a.y}) < sep;
            });
            if (placed) annotations.push_back({c.x, c.y, r});
        }
        if (!placed)
            throw InvalidArgument("synth: could not place particle " + std::to_string(i + 1) +
                                  " of " + std::to_string(spec.n_particles) +
                                  " (spec overcrowded)");
    }

    // Clutter keeps clear of every particle so the ground truth stays visible.
    const double clearance = r + 4.0;
    std::vector<std::pair<Shape, double>> distractors;
    for (std::size_t i = 0; i < spec.n_distractors; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kPlacementBudget && !placed; ++attempt) {
            Shape shape = random_distractor(rng, spec);
            const double ink = rng.uniform(spec.particle_intensity,
                                           0.5 * (spec.particle_intensity + spec.background_intensity));
            placed = std::all_of(annotations.begin(), annotations.end(), [&](const Annotation& a) {
                return shape_distance(shape, {a.x, a.y}) >= clearance;
            });
            if (placed) distractors.emplace_back(shape, ink);
        }
        if (!placed)
            throw InvalidArgument("synth: could not place distractor " + std::to_string(i + 1) +
                                  " (spec overcrowded)");
    }

    std::vector<double> canvas(spec.width * spec.height, spec.background_intensity);
    for (const auto& [shape, ink] : distractors) paint(canvas, spec.width, spec.height, shape, ink);
    for (const auto& a : annotations)
        paint(canvas, spec.width, spec.height, Disk{{a.x, a.y}, r}, spec.particle_intensity);

    for (double& v : canvas) {
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
        v = std::clamp(std::floor(v + 0.5), 0.0, 255.0);
    }
    return {GrayImage(spec.width, spec.height, std::move(canvas)), std::move(annotations)};
}

std::vector<SynthImage> generate_corpus(const SynthSpec& spec, std::size_t count) {
    std::vector<SynthImage> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        SynthSpec s = spec;
        s.seed = derive_seed(spec.seed, "corpus", i);
        out.push_back(generate(s));
    }
    return out;
}

std::string to_json(const SynthSpec& spec) {
    nlohmann::ordered_json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["n_particles"] = spec.n_particles;
    j["particle_radius"] = spec.particle_radius;
    j["particle_intensity"] = spec.particle_intensity;
    j["background_intensity"] = spec.background_intensity;
    j["noise_sigma"] = spec.noise_sigma;
    j["n_distractors"] = spec.n_distractors;
    j["min_separation"] = spec.separation();
    j["seed"] = spec.seed;
    return j.dump(2);
}

}  // namespace goldspot
