#include "goldspot/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <set>

#include "goldspot/error.hpp"
#include "goldspot/random.hpp"

namespace goldspot {

using json = nlohmann::ordered_json;

namespace {

std::vector<double> steps(double from, double to, double step) {
    std::vector<double> out;
    for (double v = from; v <= to + 1e-9; v += step) out.push_back(v);
    return out;
}

}  // namespace

RunConfig RunConfig::preset(std::string_view magnification) {
    RunConfig c;
    c.magnification = std::string(magnification);
    if (magnification == "db1") {
        c.radius_set = {3, 4, 5};
        c.thresholds = {10, 15, 20, 25};
        c.batch_size = 1000;
    } else if (magnification == "db2") {
        c.radius_set = {3, 5, 7, 9};
        c.thresholds = {10, 15, 20, 25};
        c.batch_size = 100;
    } else if (magnification == "db3") {
        c.radius_set = {5, 7, 9, 11};
        c.thresholds = steps(5, 45, 5);
        c.batch_size = 100;
    } else if (magnification == "db4") {
        c.radius_set = {9, 11, 13};
        c.thresholds = steps(5, 55, 5);
        c.batch_size = 100;
    } else {
        throw InvalidArgument("unknown magnification '" + std::string(magnification) + "' (expected db1..db4)");
    }
    c.radius = c.radius_set[c.radius_set.size() / 2];
    c.match_radius = c.radius;
    return c;
}

void RunConfig::apply_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("config must be a JSON object");

    // A magnification key resets the preset before the other keys apply.
    if (j.contains("magnification")) *this = preset(j.at("magnification").get<std::string>());

    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "magnification") continue;
            else if (key == "radius_set") radius_set = v.get<std::vector<double>>();
            else if (key == "radius") radius = v.get<double>();
            else if (key == "delta") delta = v.get<double>();
            else if (key == "thresholds") thresholds = v.get<std::vector<double>>();
            else if (key == "match_radius") match_radius = v.get<double>();
            else if (key == "patch_side") patch_side = v.get<std::size_t>();
            else if (key == "label_radius") label_radius = v.get<double>();
            else if (key == "layer_sizes") layer_sizes = v.get<std::vector<std::size_t>>();
            else if (key == "corruption") corruption = v.get<double>();
            else if (key == "pretrain_epochs") pretrain_epochs = v.get<std::size_t>();
            else if (key == "finetune_epochs") finetune_epochs = v.get<std::size_t>();
            else if (key == "batch_size") batch_size = v.get<std::size_t>();
            else if (key == "pretrain_lr") pretrain_lr = v.get<double>();
            else if (key == "finetune_lr") finetune_lr = v.get<double>();
            else if (key == "pretrain_lr_grid") pretrain_lr_grid = v.get<std::vector<double>>();
            else if (key == "finetune_lr_grid") finetune_lr_grid = v.get<std::vector<double>>();
            else if (key == "grid") grid = v.get<bool>();
            else if (key == "tune_radius") tune_radius = v.get<bool>();
            else if (key == "train_fraction") train_fraction = v.get<double>();
            else if (key == "folds") folds = v.get<std::size_t>();
            else if (key == "reps") reps = v.get<std::size_t>();
            else if (key == "seed") seed = v.get<std::uint64_t>();
            else throw FormatError("unknown config key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("config value has the wrong type: ") + e.what());
    }
}

std::string RunConfig::to_json() const {
    json j;
    j["magnification"] = magnification;
    j["radius_set"] = radius_set;
    j["radius"] = radius;
    j["delta"] = delta;
    j["thresholds"] = thresholds;
    j["match_radius"] = match_radius;
    j["patch_side"] = patch_side;
    j["label_radius"] = label_radius;
    j["layer_sizes"] = layer_sizes;
    j["corruption"] = corruption;
    j["pretrain_epochs"] = pretrain_epochs;
    j["finetune_epochs"] = finetune_epochs;
    j["batch_size"] = batch_size;
    j["pretrain_lr"] = pretrain_lr;
    j["finetune_lr"] = finetune_lr;
    j["pretrain_lr_grid"] = pretrain_lr_grid;
    j["finetune_lr_grid"] = finetune_lr_grid;
    j["grid"] = grid;
    j["tune_radius"] = tune_radius;
    j["train_fraction"] = train_fraction;
    j["folds"] = folds;
    j["reps"] = reps;
    j["seed"] = seed;
    return j.dump(2);
}

void RunConfig::validate() const {
    if (!(radius - delta >= kMinBankRadius)) throw InvalidArgument("radius - delta must be at least 2");
    if (delta < 0 || delta != std::floor(delta)) throw InvalidArgument("delta must be a non-negative integer");
    if (thresholds.empty()) throw InvalidArgument("threshold set is empty");
    if (!(match_radius > 0)) throw InvalidArgument("match_radius must be positive");
    if (patch_side == 0) throw InvalidArgument("patch_side must be positive");
    if (!(label_radius > 0)) throw InvalidArgument("label_radius must be positive");
    if (layer_sizes.empty() || std::count(layer_sizes.begin(), layer_sizes.end(), 0u) > 0)
        throw InvalidArgument("layer_sizes must be a non-empty list of positive sizes");
    if (!(corruption >= 0 && corruption < 1)) throw InvalidArgument("corruption must lie in [0, 1)");
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
    if (!(pretrain_lr > 0) || !(finetune_lr > 0)) throw InvalidArgument("learning rates must be positive");
    if (grid && (pretrain_lr_grid.empty() || finetune_lr_grid.empty()))
        throw InvalidArgument("learning-rate grids are empty");
    if (tune_radius && radius_set.empty()) throw InvalidArgument("radius_set is empty");
    if (!(train_fraction > 0 && train_fraction < 1)) throw InvalidArgument("train_fraction must lie in (0, 1)");
    if (folds == 0) throw InvalidArgument("folds must be at least 1");
    if (reps == 0) throw InvalidArgument("reps must be at least 1");
}

TrainConfig RunConfig::pretrain_config(std::uint64_t s) const {
    return {pretrain_lr, pretrain_epochs, batch_size, s};
}

TrainConfig RunConfig::finetune_config(std::uint64_t s) const {
    return {finetune_lr, finetune_epochs, batch_size, s};
}

namespace {

std::vector<std::size_t> images_of(const LabeledSet& set) {
    const std::set<std::size_t> unique(set.image_index.begin(), set.image_index.end());
    return {unique.begin(), unique.end()};
}

SdaModel train_with(const LabeledSet& train, const RunConfig& config, double plr, double flr, std::uint64_t seed) {
    TrainConfig pre = config.pretrain_config(seed);
    TrainConfig fine = config.finetune_config(seed);
    pre.learning_rate = plr;
    fine.learning_rate = flr;
    return train_sda(train.patches, pre, fine, {config.corruption, derive_seed(seed, "corruption")},
                     config.layer_sizes);
}

}  // namespace

GridResult grid_search(const LabeledSet& train, const RunConfig& config, std::uint64_t seed) {
    if (config.pretrain_lr_grid.empty() || config.finetune_lr_grid.empty())
        throw InvalidArgument("learning-rate grids are empty");
    const auto images = images_of(train);
    const auto folds = cv_folds(images, config.folds, derive_seed(seed, "grid-folds"));

    GridResult result;
    bool first = true;
    for (double plr : config.pretrain_lr_grid) {
        for (double flr : config.finetune_lr_grid) {
            double sum = 0.0;
            for (std::size_t f = 0; f < folds.size(); ++f) {
                LabeledSet fit;
                LabeledSet held = train.select_images(folds[f]);
                if (folds.size() == 1) {
                    fit = held;
                } else {
                    std::vector<std::size_t> rest;
                    for (std::size_t g = 0; g < folds.size(); ++g)
                        if (g != f) rest.insert(rest.end(), folds[g].begin(), folds[g].end());
                    fit = train.select_images(rest);
                }
                const SdaModel model = train_with(fit, config, plr, flr, derive_seed(seed, "grid", f));
                sum += classification_accuracy(model, held.patches);
            }
            const double acc = sum / static_cast<double>(folds.size());
            result.cells.push_back({plr, flr, acc});
            const bool better = first || acc > result.accuracy ||
                                (acc == result.accuracy &&
                                 (flr < result.finetune_lr || (flr == result.finetune_lr && plr < result.pretrain_lr)));
            if (better) {
                result.pretrain_lr = plr;
                result.finetune_lr = flr;
                result.accuracy = acc;
                first = false;
            }
        }
    }
    return result;
}

double select_radius(std::span<const AnnotatedImage> images, const RunConfig& config, std::uint64_t seed) {
    if (config.radius_set.empty()) throw InvalidArgument("radius_set is empty");
    std::vector<std::size_t> all(images.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto folds = cv_folds(all, config.folds, derive_seed(seed, "radius-folds"));

    double best_r = config.radius_set.front();
    double best_score = -1.0;
    for (double r : config.radius_set) {
        if (r - config.delta < kMinBankRadius) continue;
        const ScaleBank bank = build_bank(r, config.delta);
        SweepOptions opt;
        opt.match_radius = config.match_radius;
        opt.patch_side = config.patch_side;
        double sum = 0.0;
        for (const auto& fold : folds) sum += best_f(pr_sweep(images, fold, bank, config.thresholds, opt)).f_measure;
        const double score = sum / static_cast<double>(folds.size());
        if (score > best_score) {
            best_score = score;
            best_r = r;
        }
    }
    if (best_score < 0.0) throw InvalidArgument("no radius in radius_set is usable with this delta");
    return best_r;
}

LabeledSet patches_for(std::span<const AnnotatedImage> corpus, std::span<const std::size_t> images,
                       const RunConfig& config, std::uint64_t seed) {
    BalanceOptions opt;
    opt.patch_side = config.patch_side;
    opt.label_radius = config.label_radius;
    opt.seed = seed;
    return build_balanced(corpus, images, opt);
}

PipelineRun run_pipeline(std::span<const AnnotatedImage> corpus, const RunConfig& config, std::uint64_t seed,
                         const SdaModel* pretrained, const Trainer& trainer) {
    config.validate();
    if (pretrained && pretrained->patch_side != config.patch_side)
        throw DimensionError("model patch side does not match the configured patch side");

    const Partition part = split(corpus.size(), config.train_fraction, 1.0 - config.train_fraction,
                                 derive_seed(seed, "split"));
    if (part.train.empty() || part.test.empty()) throw InvalidArgument("corpus too small to split");

    PipelineRun run;
    run.seed = seed;
    run.radius = config.radius;
    if (config.tune_radius) {
        std::vector<AnnotatedImage> train_images;
        for (std::size_t i : part.train) train_images.push_back(corpus[i]);
        run.radius = select_radius(train_images, config, seed);
    }

    if (pretrained) {
        run.model = *pretrained;
    } else {
        const LabeledSet train = patches_for(corpus, part.train, config, derive_seed(seed, "train-patches"));
        run.pretrain_lr = config.pretrain_lr;
        run.finetune_lr = config.finetune_lr;
        if (trainer) {
            run.model = trainer(train, seed);
        } else {
            if (config.grid) {
                const GridResult g = grid_search(train, config, seed);
                run.pretrain_lr = g.pretrain_lr;
                run.finetune_lr = g.finetune_lr;
            }
            run.model = train_with(train, config, run.pretrain_lr, run.finetune_lr, seed);
        }
        run.model.metadata.magnification = config.magnification;
    }

    const LabeledSet test = patches_for(corpus, part.test, config, derive_seed(seed, "test-patches"));
    const ScaleBank bank = build_bank(run.radius, config.delta);
    PairedSweep sweep = pr_sweep_paired(corpus, part.test, bank, config.thresholds, run.model,
                                        config.match_radius, config.patch_side);
    run.detector = report_from_curve(std::move(sweep.detector));
    run.combined = report_from_curve(std::move(sweep.filtered));
    if (test.size() > 0) run.combined.accuracy = classification_accuracy(run.model, test.patches);
    return run;
}

}  // namespace goldspot
