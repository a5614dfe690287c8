#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "goldspot/image.hpp"
#include "goldspot/nncore.hpp"

namespace goldspot {

/// Loss curves recorded while training.
struct TrainingHistory {
    /// pretrain_loss[k][e]: mean clean reconstruction loss of layer k before
    /// epoch e + 1 (entry 0 is the untrained layer).
    std::vector<std::vector<double>> pretrain_loss;
    /// Mean training negative log-likelihood per fine-tune epoch.
    std::vector<double> finetune_loss;
};

struct SdaMetadata {
    std::string magnification;
    std::uint64_t seed = 0;
    TrainingHistory history;
};

inline constexpr std::size_t kNumClasses = 2;

/// Stack of tied-weight encoders with a two-class softmax on top.
/// Class 0 is background, class 1 is particle.
struct SdaModel {
    std::size_t patch_side = 20;
    std::vector<LayerParams> hidden;
    LogisticLayer output;
    SdaMetadata metadata;

    std::size_t input_dim() const noexcept { return patch_side * patch_side; }
    std::vector<std::size_t> layer_sizes() const;

    /// Seeded initialization: every weight matrix (output layer included) is
    /// Glorot-uniform, every bias zero.
    static SdaModel initialize(std::size_t patch_side, std::span<const std::size_t> layer_sizes,
                               std::uint64_t seed);

    /// Throws DimensionError when consecutive layers do not chain.
    void validate() const;

    /// Parameter equality, bit for bit. Metadata is ignored.
    bool same_parameters(const SdaModel& other) const;
};

/// Fresh output layer for a model whose last hidden layer has `inputs` units.
LogisticLayer initial_output_layer(std::size_t inputs, std::uint64_t seed);

struct CorruptionSpec {
    double level = 0.10;
    std::uint64_t seed = 0;
};

/// Zero each component independently with probability `level`.
Vector corrupt(const Vector& x, double level, Rng& rng);
void corrupt_in_place(Matrix& x, double level, Rng& rng);

/// Greedy layer-wise denoising pre-training. Layer k is trained on the clean
/// codes of layer k-1, corrupting only its own input. The output layer is
/// initialized but not trained.
SdaModel pretrain(std::span<const Patch> patches, const TrainConfig& config, const CorruptionSpec& corruption,
                  std::span<const std::size_t> layer_sizes);

/// Supervised fine-tuning of the whole stack on softmax NLL. Updates are
/// applied only to hidden layers whose mask entry is true and to the output
/// layer when train_output is set; every other parameter is untouched.
SdaModel fine_tune(SdaModel model, std::span<const Patch> patches, const TrainConfig& config,
                   const std::vector<bool>& trainable_mask, bool train_output = true);

/// Pre-train then fine-tune every layer.
SdaModel train_sda(std::span<const Patch> patches, const TrainConfig& pretrain_config,
                   const TrainConfig& finetune_config, const CorruptionSpec& corruption,
                   std::span<const std::size_t> layer_sizes);

struct Prediction {
    Label label = Label::background;
    double p_particle = 0.5;
    double p_background = 0.5;
};

Prediction predict(const SdaModel& model, const Patch& patch);

/// Batched prediction; order of results matches the input.
std::vector<Prediction> predict_batch(const SdaModel& model, std::span<const Patch> patches);

/// Hidden code of the top layer for each patch, one column per patch.
Matrix top_codes(const SdaModel& model, std::span<const Patch> patches);

inline constexpr int kModelFormatVersion = 1;

std::string to_json(const SdaModel& model);
SdaModel model_from_json(const std::string& text);

void save_model(const SdaModel& model, const std::filesystem::path& path);
SdaModel load_model(const std::filesystem::path& path);

/// Pack patches as columns of a (side^2 x n) matrix.
Matrix patch_matrix(std::span<const Patch> patches);

}  // namespace goldspot
