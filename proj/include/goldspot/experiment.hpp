#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "goldspot/dataset.hpp"
#include "goldspot/eval.hpp"
#include "goldspot/logdetect.hpp"
#include "goldspot/sda.hpp"

namespace goldspot {

/// Everything a run needs. Defaults follow the db1 preset.
struct RunConfig {
    std::string magnification = "db1";
    std::vector<double> radius_set{3, 4, 5};
    double radius = 4.0;
    double delta = 1.0;
    std::vector<double> thresholds{10, 15, 20, 25};
    double match_radius = 4.0;

    std::size_t patch_side = 20;
    double label_radius = 20.0;

    std::vector<std::size_t> layer_sizes{1000, 1000, 1000};
    double corruption = 0.10;
    std::size_t pretrain_epochs = 1000;
    std::size_t finetune_epochs = 3000;
    std::size_t batch_size = 1000;
    double pretrain_lr = 0.01;
    double finetune_lr = 0.1;
    std::vector<double> pretrain_lr_grid{0.01, 0.001};
    std::vector<double> finetune_lr_grid{0.1, 0.01};
    bool grid = false;
    bool tune_radius = false;

    double train_fraction = 0.6;
    std::size_t folds = 3;
    std::size_t reps = 20;
    std::uint64_t seed = 0;

    /// Defaults for db1..db4 (radius and threshold sets, batch size).
    static RunConfig preset(std::string_view magnification);

    /// Override fields from a JSON object; unknown keys are rejected.
    void apply_json(const std::string& text);
    std::string to_json() const;

    void validate() const;

    TrainConfig pretrain_config(std::uint64_t seed_override) const;
    TrainConfig finetune_config(std::uint64_t seed_override) const;
    ScaleBank bank() const { return build_bank(radius, delta); }
};

struct GridCell {
    double pretrain_lr;
    double finetune_lr;
    double accuracy;  // mean validation accuracy over folds
};

struct GridResult {
    double pretrain_lr = 0.0;
    double finetune_lr = 0.0;
    double accuracy = 0.0;
    std::vector<GridCell> cells;
};

/// Learning-rate grid search with image-level k-fold cross-validation on the
/// training patches. Ties go to the smaller fine-tune rate, then the smaller
/// pre-train rate.
GridResult grid_search(const LabeledSet& train, const RunConfig& config, std::uint64_t seed);

/// Nominal radius from config.radius_set with the best mean validation F over
/// image-level folds of the training images.
double select_radius(std::span<const AnnotatedImage> images, const RunConfig& config, std::uint64_t seed);

struct PipelineRun {
    std::uint64_t seed = 0;
    double radius = 0.0;
    double pretrain_lr = 0.0;
    double finetune_lr = 0.0;
    EvalReport detector;
    EvalReport combined;
    SdaModel model;
};

/// Replaces the default training step of run_pipeline, e.g. with transfer
/// from a source model. Receives the balanced training patches and the seed.
using Trainer = std::function<SdaModel(const LabeledSet& train, std::uint64_t seed)>;

/// One repetition: split images, build balanced training patches, train the
/// SDA, then score LoG and LoG+SDA on the test images. Test-set patch accuracy
/// is stored in combined.accuracy. A supplied model skips training; a trainer
/// replaces the default pre-train + fine-tune step.
PipelineRun run_pipeline(std::span<const AnnotatedImage> corpus, const RunConfig& config, std::uint64_t seed,
                         const SdaModel* pretrained = nullptr, const Trainer& trainer = {});

/// Balanced labeled patches drawn from the selected images.
LabeledSet patches_for(std::span<const AnnotatedImage> corpus, std::span<const std::size_t> images,
                       const RunConfig& config, std::uint64_t seed);

}  // namespace goldspot
