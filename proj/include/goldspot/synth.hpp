#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "goldspot/annotation.hpp"
#include "goldspot/image.hpp"

namespace goldspot {

/// Parameters of a synthetic micrograph: dark disks on a noisy background,
/// optionally with dark non-particle clutter (rings, bars, oversized blobs).
struct SynthSpec {
    std::size_t width = 512;
    std::size_t height = 512;
    std::size_t n_particles = 50;
    double particle_radius = 4.0;
    double particle_intensity = 30.0;
    double background_intensity = 180.0;
    double noise_sigma = 10.0;
    std::size_t n_distractors = 0;
    /// Minimum distance between particle centers; 3 * radius when unset.
    std::optional<double> min_separation;
    std::uint64_t seed = 0;

    double separation() const { return min_separation.value_or(3.0 * particle_radius); }

    /// Throws InvalidArgument when the spec breaks an invariant.
    void validate() const;
};

struct SynthImage {
    GrayImage image;
    std::vector<Annotation> annotations;
};

/// Placement attempts allowed per particle or distractor.
inline constexpr int kPlacementBudget = 10000;

/// Render one image. Deterministic in spec (including seed).
SynthImage generate(const SynthSpec& spec);

/// Render `count` images; image i uses a seed derived from (spec.seed, i).
std::vector<SynthImage> generate_corpus(const SynthSpec& spec, std::size_t count);

std::string to_json(const SynthSpec& spec);

}  // namespace goldspot
