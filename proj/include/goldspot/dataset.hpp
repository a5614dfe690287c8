#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "goldspot/annotation.hpp"
#include "goldspot/error.hpp"
#include "goldspot/image.hpp"

namespace goldspot {

/// A micrograph with its ground-truth particle centers.
struct AnnotatedImage {
    std::string id;
    GrayImage image;
    std::vector<Annotation> annotations;
};

struct ImageBounds {
    std::size_t width;
    std::size_t height;
};

/// Parse a CSV with header `x,y` or `x,y,radius`. When bounds are given,
/// annotations outside the image are rejected.
std::vector<Annotation> load_annotations(const std::filesystem::path& path,
                                         std::optional<ImageBounds> bounds = std::nullopt);
void save_annotations(std::span<const Annotation> annotations, const std::filesystem::path& path);

/// Particle iff some annotation lies strictly closer than `threshold`.
Label label_patch(double x, double y, std::span<const Annotation> annotations, double threshold);

struct BalanceOptions {
    std::size_t patch_side = 20;
    /// Labeling threshold; defaults to the patch side.
    double label_radius = 20.0;
    /// Cap on patches per class; all annotations are used when unset.
    std::optional<std::size_t> n_per_class;
    std::uint64_t seed = 0;
};

/// Patches with labels and the image each one came from.
struct LabeledSet {
    std::vector<Patch> patches;
    std::vector<std::size_t> image_index;
    std::vector<std::string> image_ids;

    std::size_t size() const noexcept { return patches.size(); }
    std::size_t count(Label label) const;
    /// Patches whose image_index is in `images`, in original order.
    LabeledSet select_images(std::span<const std::size_t> images) const;
    void append(const LabeledSet& other);
};

/// Negative placement attempts allowed per needed patch.
inline constexpr int kNegativeBudget = 10000;

/// One positive patch per annotation and an equal number of negatives at
/// uniformly drawn centers at least label_radius away from every annotation.
/// image_index refers to positions in `images`.
LabeledSet build_balanced(std::span<const AnnotatedImage> images, const BalanceOptions& options);

/// Same, restricted to images[subset[0]], images[subset[1]], ...; image_index
/// still refers to positions in `images`.
LabeledSet build_balanced(std::span<const AnnotatedImage> images, std::span<const std::size_t> subset,
                          const BalanceOptions& options);

struct Partition {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded image-level split of indices 0..n-1. Fractions must sum to 1.
Partition split(std::size_t n_items, double train_fraction, double test_fraction, std::uint64_t seed);

/// k image-level folds with sizes differing by at most one.
std::vector<std::vector<std::size_t>> cv_folds(std::span<const std::size_t> items, std::size_t k, std::uint64_t seed);

/// Run experiment(seed) for seeds base_seed, base_seed + 1, ... and collect
/// the results in order.
template <typename Experiment>
auto repetitions(std::size_t n, std::uint64_t base_seed, Experiment&& experiment) {
    if (n == 0) throw InvalidArgument("repetitions needs n >= 1");
    using Result = decltype(experiment(base_seed));
    std::vector<Result> results;
    results.reserve(n);
    for (std::size_t i = 0; i < n; ++i) results.push_back(experiment(base_seed + i));
    return results;
}

/// Corpus directory: one `<stem>.pgm` per image with an optional
/// `<stem>.csv` of annotations next to it. Images are read in name order.
std::vector<AnnotatedImage> load_corpus(const std::filesystem::path& dir);
void save_corpus(std::span<const AnnotatedImage> images, const std::filesystem::path& dir);

/// Patch dataset directory: one PGM per patch plus labels.csv with header
/// `file,label,center_x,center_y` (label 1 = particle, 0 = background).
void save_patch_set(const LabeledSet& set, const std::filesystem::path& dir);
LabeledSet load_patch_set(const std::filesystem::path& dir);

}  // namespace goldspot
