#include <doctest.h>

#include <cmath>

#include "goldspot/error.hpp"
#include "goldspot/synth.hpp"

using namespace goldspot;

TEST_SUITE("synth") {

TEST_CASE("no particles and no noise gives a constant background") {
    SynthSpec spec;
    spec.width = 64;
    spec.height = 48;
    spec.n_particles = 0;
    spec.noise_sigma = 0;
    const SynthImage s = generate(spec);
    CHECK(s.annotations.empty());
    for (double v : s.image.data()) REQUIRE(v == spec.background_intensity);
}

TEST_CASE("a fixed seed reproduces the image bit for bit") {
    SynthSpec spec;
    spec.width = spec.height = 128;
    spec.n_particles = 10;
    spec.n_distractors = 5;
    spec.seed = 17;
    const SynthImage a = generate(spec);
    const SynthImage b = generate(spec);
    CHECK(a.image == b.image);
    CHECK(a.annotations == b.annotations);
    spec.seed = 18;
    CHECK_FALSE(generate(spec).image == a.image);
}

TEST_CASE("particles are darker than the background by a wide margin") {
    SynthSpec spec;  // 512 x 512, 50 disks
    spec.seed = 3;
    const SynthImage s = generate(spec);
    REQUIRE(s.annotations.size() == 50);
    double in_sum = 0.0, out_sum = 0.0;
    std::size_t in_n = 0, out_n = 0;
    for (std::size_t y = 0; y < spec.height; ++y)
        for (std::size_t x = 0; x < spec.width; ++x) {
            bool inside = false;
            for (const auto& a : s.annotations)
                if (std::hypot(x - a.x, y - a.y) <= spec.particle_radius) inside = true;
            (inside ? in_sum : out_sum) += s.image.at(x, y);
            ++(inside ? in_n : out_n);
        }
    CHECK(out_sum / out_n - in_sum / in_n >= 50.0);
}

TEST_CASE("placement respects borders and separation") {
    SynthSpec spec;
    spec.width = 300;
    spec.height = 200;
    spec.n_particles = 40;
    spec.particle_radius = 5;
    spec.min_separation = 14;
    spec.n_distractors = 8;
    spec.seed = 99;
    const SynthImage s = generate(spec);
    REQUIRE(s.annotations.size() == 40);
    for (std::size_t i = 0; i < s.annotations.size(); ++i) {
        const auto& a = s.annotations[i];
        CHECK(a.x >= 5.0);
        CHECK(a.y >= 5.0);
        CHECK(a.x <= 300.0 - 1.0 - 5.0);
        CHECK(a.y <= 200.0 - 1.0 - 5.0);
        for (std::size_t j = 0; j < i; ++j)
            CHECK(std::hypot(a.x - s.annotations[j].x, a.y - s.annotations[j].y) >= 14.0);
    }
    for (double v : s.image.data()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 255.0);
        REQUIRE(v == std::round(v));
    }
}

TEST_CASE("distractors are drawn but never annotated") {
    SynthSpec spec;
    spec.width = spec.height = 256;
    spec.n_particles = 0;
    spec.noise_sigma = 0;
    spec.n_distractors = 10;
    spec.seed = 4;
    const SynthImage s = generate(spec);
    CHECK(s.annotations.empty());
    double lo = 255.0;
    for (double v : s.image.data()) lo = std::min(lo, v);
    CHECK(lo < spec.background_intensity - 30.0);
}

TEST_CASE("invalid specs are rejected") {
    SynthSpec bright;
    bright.particle_intensity = 200;
    CHECK_THROWS_AS(generate(bright), InvalidArgument);

    SynthSpec close;
    close.min_separation = 5;  // below 2 r = 8
    CHECK_THROWS_AS(generate(close), InvalidArgument);

    SynthSpec tiny;
    tiny.particle_radius = 1.5;
    CHECK_THROWS_AS(generate(tiny), InvalidArgument);
}

TEST_CASE("an overcrowded layout fails instead of silently dropping particles") {
    SynthSpec spec;
    spec.width = spec.height = 40;
    spec.n_particles = 30;
    CHECK_THROWS_AS(generate(spec), InvalidArgument);
}

TEST_CASE("corpus images are distinct and reproducible") {
    SynthSpec spec;
    spec.width = spec.height = 96;
    spec.n_particles = 5;
    spec.seed = 8;
    const auto a = generate_corpus(spec, 3);
    const auto b = generate_corpus(spec, 3);
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].image == b[i].image);
    CHECK_FALSE(a[0].image == a[1].image);
}

TEST_CASE("parameters echo as JSON with every field") {
    SynthSpec spec;
    spec.seed = 12;
    const std::string j = to_json(spec);
    for (const char* key : {"width", "height", "n_particles", "particle_radius", "particle_intensity",
                            "background_intensity", "noise_sigma", "n_distractors", "min_separation", "seed"})
        CHECK(j.find(key) != std::string::npos);
}

}
