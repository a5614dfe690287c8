#include "goldspot/sda.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "goldspot/error.hpp"
#include "parallel.hpp"

namespace goldspot {

using json = nlohmann::ordered_json;

std::vector<std::size_t> SdaModel::layer_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(hidden.size());
    for (const auto& l : hidden) sizes.push_back(l.hidden());
    return sizes;
}

LogisticLayer initial_output_layer(std::size_t inputs, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "output"));
    return LogisticLayer::glorot(inputs, kNumClasses, rng);
}

SdaModel SdaModel::initialize(std::size_t patch_side, std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
    if (patch_side == 0) throw InvalidArgument("patch_side must be positive");
    if (layer_sizes.empty()) throw InvalidArgument("an SDA needs at least one hidden layer");
    SdaModel m;
    m.patch_side = patch_side;
    m.metadata.seed = seed;
    std::size_t inputs = patch_side * patch_side;
    for (std::size_t k = 0; k < layer_sizes.size(); ++k) {
        Rng rng(derive_seed(seed, "init", k));
        m.hidden.push_back(LayerParams::glorot(inputs, layer_sizes[k], rng));
        inputs = layer_sizes[k];
    }
    m.output = initial_output_layer(inputs, seed);
    return m;
}

void SdaModel::validate() const {
    if (hidden.empty()) throw DimensionError("model has no hidden layers");
    std::size_t inputs = input_dim();
    for (std::size_t k = 0; k < hidden.size(); ++k) {
        hidden[k].validate();
        if (hidden[k].inputs() != inputs)
            throw DimensionError("hidden layer " + std::to_string(k) + " expects " +
                                 std::to_string(hidden[k].inputs()) + " inputs, previous layer gives " +
                                 std::to_string(inputs));
        inputs = hidden[k].hidden();
    }
    output.validate();
    if (output.inputs() != inputs)
        throw DimensionError("output layer expects " + std::to_string(output.inputs()) + " inputs, last hidden has " +
                             std::to_string(inputs));
    if (output.classes() != kNumClasses) throw DimensionError("output layer must have 2 classes");
}

bool SdaModel::same_parameters(const SdaModel& other) const {
    return patch_side == other.patch_side && hidden == other.hidden && output == other.output;
}

Vector corrupt(const Vector& x, double level, Rng& rng) {
    if (!(level >= 0.0 && level <= 1.0)) throw InvalidArgument("corruption level must lie in [0, 1]");
    Vector out = x;
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (rng.bernoulli(level)) out[i] = 0.0;
    return out;
}

void corrupt_in_place(Matrix& x, double level, Rng& rng) {
    if (!(level >= 0.0 && level <= 1.0)) throw InvalidArgument("corruption level must lie in [0, 1]");
    // Column by column, so the mask stream follows sample order.
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            if (rng.bernoulli(level)) x(i, j) = 0.0;
}

Matrix patch_matrix(std::span<const Patch> patches) {
    if (patches.empty()) return Matrix();
    const std::size_t dim = patches.front().side * patches.front().side;
    Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(patches.size()));
    for (std::size_t j = 0; j < patches.size(); ++j) {
        const Patch& p = patches[j];
        if (p.side != patches.front().side || p.values.size() != dim)
            throw DimensionError("patches must all have side " + std::to_string(patches.front().side));
        m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Vector>(p.values.data(), static_cast<Eigen::Index>(dim));
    }
    return m;
}

namespace {

Matrix gather_columns(const Matrix& data, std::span<const std::size_t> order, std::size_t begin, std::size_t end) {
    Matrix out(data.rows(), static_cast<Eigen::Index>(end - begin));
    for (std::size_t j = begin; j < end; ++j)
        out.col(static_cast<Eigen::Index>(j - begin)) = data.col(static_cast<Eigen::Index>(order[j]));
    return out;
}

double mean_reconstruction_loss(const LayerParams& layer, const Matrix& data) {
    const Matrix recon = decode_batch(layer, encode_batch(layer, data));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < data.cols(); ++j) sum += reconstruction_loss(data.col(j), recon.col(j));
    return sum / static_cast<double>(data.cols());
}

void train_dae_layer(LayerParams& layer, const Matrix& data, const TrainConfig& config, double level,
                     std::uint64_t corruption_seed, std::size_t k, std::vector<double>& history) {
    const auto n = static_cast<std::size_t>(data.cols());
    Rng order_rng(derive_seed(config.seed, "pretrain-order", k));
    Rng mask_rng(derive_seed(corruption_seed, "corrupt", k));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    history.push_back(mean_reconstruction_loss(layer, data));
    DaeGradients grads;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t end = std::min(n, begin + config.batch_size);
            const Matrix clean = gather_columns(data, order, begin, end);
            Matrix noisy = clean;
            corrupt_in_place(noisy, level, mask_rng);
            dae_objective(layer, clean, noisy, &grads);
            sgd_step(layer.W, grads.W, config.learning_rate);
            sgd_step(layer.b, grads.b, config.learning_rate);
            sgd_step(layer.c, grads.c, config.learning_rate);
        }
        if (!layer.all_finite())
            throw Error("pre-training diverged: layer " + std::to_string(k) + " has non-finite parameters after epoch " +
                        std::to_string(epoch + 1));
        history.push_back(mean_reconstruction_loss(layer, data));
    }
}

int class_index(const Patch& p) {
    if (!p.label) throw InvalidArgument("fine-tuning needs labeled patches");
    return static_cast<int>(*p.label);
}

}  // namespace

SdaModel pretrain(std::span<const Patch> patches, const TrainConfig& config, const CorruptionSpec& corruption,
                  std::span<const std::size_t> layer_sizes) {
    if (patches.empty()) throw InvalidArgument("pre-training needs at least one patch");
    config.validate();
    const std::size_t side = patches.front().side;
    SdaModel model = SdaModel::initialize(side, layer_sizes, config.seed);

    Matrix data = patch_matrix(patches);
    model.metadata.history.pretrain_loss.assign(layer_sizes.size(), {});
    for (std::size_t k = 0; k < model.hidden.size(); ++k) {
        train_dae_layer(model.hidden[k], data, config, corruption.level, corruption.seed, k,
                        model.metadata.history.pretrain_loss[k]);
        if (k + 1 < model.hidden.size()) data = encode_batch(model.hidden[k], data);
    }
    return model;
}

SdaModel fine_tune(SdaModel model, std::span<const Patch> patches, const TrainConfig& config,
                   const std::vector<bool>& trainable_mask, bool train_output) {
    model.validate();
    config.validate();
    if (trainable_mask.size() != model.hidden.size())
        throw InvalidArgument("trainable mask has " + std::to_string(trainable_mask.size()) + " entries, model has " +
                              std::to_string(model.hidden.size()) + " hidden layers");
    if (patches.empty()) throw InvalidArgument("fine-tuning needs at least one patch");
    std::vector<int> labels;
    labels.reserve(patches.size());
    for (const auto& p : patches) {
        if (p.side != model.patch_side) throw DimensionError("patch side does not match model");
        labels.push_back(class_index(p));
    }
    const Matrix data = patch_matrix(patches);
    const std::size_t n = patches.size();

    Rng order_rng(derive_seed(config.seed, "finetune-order"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<int> batch_labels;
    NetworkGradients grads;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        order_rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
            const std::size_t end = std::min(n, begin + config.batch_size);
            const Matrix x = gather_columns(data, order, begin, end);
            batch_labels.clear();
            for (std::size_t j = begin; j < end; ++j) batch_labels.push_back(labels[order[j]]);
            const double loss = classification_objective(model.hidden, model.output, x, batch_labels, &grads);
            loss_sum += loss * static_cast<double>(end - begin);
            for (std::size_t l = 0; l < model.hidden.size(); ++l) {
                if (!trainable_mask[l]) continue;
                sgd_step(model.hidden[l].W, grads.W[l], config.learning_rate);
                sgd_step(model.hidden[l].b, grads.b[l], config.learning_rate);
            }
            if (train_output) {
                sgd_step(model.output.V, grads.V, config.learning_rate);
                sgd_step(model.output.d, grads.d, config.learning_rate);
            }
        }
        for (const auto& l : model.hidden)
            if (!l.all_finite())
                throw Error("fine-tuning diverged after epoch " + std::to_string(epoch + 1));
        if (!model.output.all_finite()) throw Error("fine-tuning diverged after epoch " + std::to_string(epoch + 1));
        model.metadata.history.finetune_loss.push_back(loss_sum / static_cast<double>(n));
    }
    return model;
}

SdaModel train_sda(std::span<const Patch> patches, const TrainConfig& pretrain_config,
                   const TrainConfig& finetune_config, const CorruptionSpec& corruption,
                   std::span<const std::size_t> layer_sizes) {
    SdaModel model = pretrain(patches, pretrain_config, corruption, layer_sizes);
    const std::vector<bool> all(model.hidden.size(), true);
    return fine_tune(std::move(model), patches, finetune_config, all, true);
}

Matrix top_codes(const SdaModel& model, std::span<const Patch> patches) {
    for (const auto& p : patches)
        if (p.side != model.patch_side)
            throw DimensionError("patch side " + std::to_string(p.side) + " does not match model side " +
                                 std::to_string(model.patch_side));
    Matrix a = patch_matrix(patches);
    for (const auto& l : model.hidden) a = encode_batch(l, a);
    return a;
}

namespace {

Prediction from_logits(const Vector& logits) {
    const Vector p = softmax(logits);
    Prediction out;
    out.p_background = p[0];
    out.p_particle = p[1];
    out.label = p[1] > p[0] ? Label::particle : Label::background;
    return out;
}

}  // namespace

Prediction predict(const SdaModel& model, const Patch& patch) {
    if (patch.side != model.patch_side || patch.values.size() != model.input_dim())
        throw DimensionError("patch side " + std::to_string(patch.side) + " does not match model side " +
                             std::to_string(model.patch_side));
    Vector a = Eigen::Map<const Vector>(patch.values.data(), static_cast<Eigen::Index>(patch.values.size()));
    for (const auto& l : model.hidden) a = encode(l, a);
    return from_logits(model.output.V * a + model.output.d);
}

std::vector<Prediction> predict_batch(const SdaModel& model, std::span<const Patch> patches) {
    constexpr std::size_t chunk = 256;
    std::vector<Prediction> out(patches.size());
    const std::size_t chunks = (patches.size() + chunk - 1) / chunk;
    detail::parallel_for(chunks, [&](std::size_t c) {
        const std::size_t begin = c * chunk;
        const std::size_t end = std::min(patches.size(), begin + chunk);
        const Matrix codes = top_codes(model, patches.subspan(begin, end - begin));
        Matrix logits = model.output.V * codes;
        logits.colwise() += model.output.d;
        for (std::size_t j = begin; j < end; ++j) out[j] = from_logits(logits.col(static_cast<Eigen::Index>(j - begin)));
    });
    return out;
}

namespace {

json matrix_rows(const Matrix& m) {
    json flat = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    return flat;
}

json vector_json(const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Matrix read_matrix(const json& flat, std::size_t rows, std::size_t cols, const char* what) {
    if (!flat.is_array() || flat.size() != rows * cols)
        throw FormatError(std::string("model: ") + what + " should hold " + std::to_string(rows * cols) + " values");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[i++].get<double>();
    return m;
}

Vector read_vector(const json& arr, std::size_t n, const char* what) {
    if (!arr.is_array() || arr.size() != n)
        throw FormatError(std::string("model: ") + what + " should hold " + std::to_string(n) + " values");
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    return v;
}

}  // namespace

std::string to_json(const SdaModel& model) {
    model.validate();
    json j;
    j["format_version"] = kModelFormatVersion;
    j["patch_side"] = model.patch_side;
    j["layer_sizes"] = model.layer_sizes();
    json layers = json::array();
    for (const auto& l : model.hidden)
        layers.push_back({{"W", matrix_rows(l.W)}, {"b", vector_json(l.b)}, {"c", vector_json(l.c)}});
    j["layers"] = std::move(layers);
    j["output"] = {{"V", matrix_rows(model.output.V)}, {"d", vector_json(model.output.d)}};
    j["metadata"] = {{"magnification", model.metadata.magnification},
                     {"seed", model.metadata.seed},
                     {"history",
                      {{"pretrain_loss", model.metadata.history.pretrain_loss},
                       {"finetune_loss", model.metadata.history.finetune_loss}}}};
    return j.dump();
}

SdaModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("model: not valid JSON (truncated file?): ") + e.what());
    }
    try {
        if (!j.contains("format_version")) throw FormatError("model: missing format_version");
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw FormatError("model: unsupported format_version " + std::to_string(version) + " (expected " +
                              std::to_string(kModelFormatVersion) + ")");
        SdaModel m;
        m.patch_side = j.at("patch_side").get<std::size_t>();
        const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        const json& layers = j.at("layers");
        if (!layers.is_array() || layers.size() != sizes.size())
            throw FormatError("model: layer count does not match layer_sizes");
        std::size_t inputs = m.patch_side * m.patch_side;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            LayerParams l;
            l.W = read_matrix(layers[k].at("W"), sizes[k], inputs, "W");
            l.b = read_vector(layers[k].at("b"), sizes[k], "b");
            l.c = read_vector(layers[k].at("c"), inputs, "c");
            m.hidden.push_back(std::move(l));
            inputs = sizes[k];
        }
        const json& out = j.at("output");
        m.output.V = read_matrix(out.at("V"), kNumClasses, inputs, "V");
        m.output.d = read_vector(out.at("d"), kNumClasses, "d");
        if (j.contains("metadata")) {
            const json& meta = j["metadata"];
            m.metadata.magnification = meta.value("magnification", std::string{});
            m.metadata.seed = meta.value("seed", std::uint64_t{0});
            if (meta.contains("history")) {
                const json& h = meta["history"];
                m.metadata.history.pretrain_loss =
                    h.value("pretrain_loss", std::vector<std::vector<double>>{});
                m.metadata.history.finetune_loss = h.value("finetune_loss", std::vector<double>{});
            }
        }
        m.validate();
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("model: malformed document: ") + e.what());
    }
}

void save_model(const SdaModel& model, const std::filesystem::path& path) {
    const std::string text = to_json(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open file for writing");
    out << text << '\n';
    if (!out) throw IoError(path.string(), "write failed");
}

SdaModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return model_from_json(buf.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace goldspot
