// goldspot command-line front end.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "goldspot/dataset.hpp"
#include "goldspot/error.hpp"
#include "goldspot/eval.hpp"
#include "goldspot/experiment.hpp"
#include "goldspot/logdetect.hpp"
#include "goldspot/nncore.hpp"
#include "goldspot/sda.hpp"
#include "goldspot/synth.hpp"
#include "goldspot/transfer.hpp"

namespace fs = std::filesystem;
using namespace goldspot;

namespace {

std::string g6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(path.string(), "cannot open file for writing");
    out << text;
    if (!out) throw IoError(path.string(), "write failed");
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string(), "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to a file, or to stdout when no path is given.
class Sink {
public:
    explicit Sink(const std::string& path) : path_(path) {}
    std::ostream& stream() { return buf_; }
    void close() {
        if (path_.empty())
            std::cout << buf_.str();
        else
            write_text(path_, buf_.str());
    }

private:
    std::string path_;
    std::ostringstream buf_;
};

// Plain log kept in the run directory and echoed to stderr.
class RunLog {
public:
    explicit RunLog(fs::path dir) : path_(std::move(dir) / "run.log") {}
    void operator()(const std::string& line) {
        std::cerr << line << '\n';
        text_ += line + '\n';
        write_text(path_, text_);
    }

private:
    fs::path path_;
    std::string text_;
};

fs::path run_dir(const std::string& out, const std::string& name) {
    if (!out.empty()) return out;
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    localtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
    return fs::path("runs") / (std::string(stamp) + "-" + name);
}

// Options shared by the commands that take a RunConfig.
struct ConfigFlags {
    std::string mag;
    std::string config;
    std::optional<double> radius;
    std::optional<double> delta;
    std::vector<double> thresholds;
    std::optional<std::size_t> patch_side;
    std::optional<double> label_radius;
    std::optional<std::size_t> reps;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App* app, bool many_thresholds) {
        app->add_option("--mag", mag, "Magnification preset (db1..db4)")->check(CLI::IsMember({"db1", "db2", "db3", "db4"}));
        app->add_option("--config", config, "JSON file overriding configuration defaults")->check(CLI::ExistingFile);
        app->add_option("--radius", radius, "Nominal particle radius in pixels");
        app->add_option("--delta", delta, "Radius band half-width");
        auto* t = app->add_option("--threshold", thresholds,
                                  many_thresholds ? "LoG response thresholds (comma separated)" : "LoG response threshold");
        if (many_thresholds)
            t->delimiter(',');
        else
            t->expected(1);
        app->add_option("--patch-side", patch_side, "Patch side in pixels");
        app->add_option("--label-radius", label_radius, "Labeling distance threshold in pixels");
        app->add_option("--reps", reps, "Repetitions");
        app->add_option("--seed", seed, "Random seed");
    }

    RunConfig resolve() const {
        RunConfig c = RunConfig::preset(mag.empty() ? "db1" : mag);
        if (!config.empty()) c.apply_json(read_text(config));
        if (!mag.empty() && c.magnification != mag)
            throw InvalidArgument("--mag " + mag + " conflicts with magnification '" + c.magnification + "' in " + config);
        if (radius) c.radius = c.match_radius = *radius;
        if (delta) c.delta = *delta;
        if (!thresholds.empty()) c.thresholds = thresholds;
        if (patch_side) c.patch_side = *patch_side;
        if (label_radius) c.label_radius = *label_radius;
        if (reps) c.reps = *reps;
        if (seed) c.seed = *seed;
        c.validate();
        return c;
    }
};

void write_detections(std::ostream& out, const std::vector<Detection>& dets) {
    out << "x,y,radius,response\n";
    for (const auto& d : dets) out << g6(d.x) << ',' << g6(d.y) << ',' << g6(d.radius) << ',' << g6(d.response) << '\n';
}

std::vector<Detection> read_detections(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::string line;
    if (!std::getline(in, line) || line.rfind("x,y,radius,response", 0) != 0)
        throw FormatError(path.string() + ": expected header 'x,y,radius,response'");
    std::vector<Detection> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Detection d{};
        char tail = 0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf%c", &d.x, &d.y, &d.radius, &d.response, &tail) < 4)
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
        out.push_back(d);
    }
    return out;
}

std::string history_csv(const TrainingHistory& h) {
    std::ostringstream out;
    out << "phase,layer,epoch,loss\n";
    for (std::size_t k = 0; k < h.pretrain_loss.size(); ++k)
        for (std::size_t e = 0; e < h.pretrain_loss[k].size(); ++e)
            out << "pretrain," << k + 1 << ',' << e << ',' << g6(h.pretrain_loss[k][e]) << '\n';
    for (std::size_t e = 0; e < h.finetune_loss.size(); ++e)
        out << "finetune,," << e + 1 << ',' << g6(h.finetune_loss[e]) << '\n';
    return out.str();
}

std::string pr_csv(std::span<const PrPoint> curve) {
    std::ostringstream out;
    write_pr_csv(out, curve);
    return out.str();
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t count = 1;
    SynthSpec spec;
    std::optional<double> min_separation;
};

int cmd_synth(const SynthArgs& a) {
    SynthSpec spec = a.spec;
    spec.min_separation = a.min_separation;
    spec.validate();
    const fs::path dir = run_dir(a.out, "synth");
    fs::create_directories(dir);
    const auto images = generate_corpus(spec, a.count);
    for (std::size_t i = 0; i < images.size(); ++i) {
        char stem[32];
        std::snprintf(stem, sizeof stem, "synth_%03zu", i);
        save_image(images[i].image, dir / (std::string(stem) + ".pgm"));
        save_annotations(images[i].annotations, dir / (std::string(stem) + ".csv"));
    }
    write_text(dir / "spec.json", to_json(spec) + "\n");
    std::cerr << "wrote " << images.size() << " image(s) to " << dir.string() << '\n';
    return 0;
}

struct DetectArgs {
    std::string image;
    std::string out;
    ConfigFlags cfg;
};

int cmd_detect(const DetectArgs& a) {
    const RunConfig c = a.cfg.resolve();
    const GrayImage img = load_image(a.image);
    const double threshold = c.thresholds.front();
    const auto dets = detect(img, c.bank(), threshold);
    Sink sink(a.out);
    write_detections(sink.stream(), dets);
    sink.close();
    std::cerr << dets.size() << " detection(s) at threshold " << g6(threshold) << '\n';
    return 0;
}

struct ExtractArgs {
    std::string corpus;
    std::string out;
    std::optional<std::size_t> per_class;
    bool half = false;
    ConfigFlags cfg;
};

int cmd_extract(const ExtractArgs& a) {
    const RunConfig c = a.cfg.resolve();
    auto images = load_corpus(a.corpus);
    if (a.half) {
        // Source-problem preparation: halve the image, keep the patch size.
        for (auto& img : images) {
            img.image = downscale_half(img.image);
            for (auto& ann : img.annotations) {
                ann.x /= 2.0;
                ann.y /= 2.0;
                if (ann.radius) *ann.radius /= 2.0;
            }
        }
    }
    BalanceOptions opt;
    opt.patch_side = c.patch_side;
    opt.label_radius = c.label_radius;
    opt.n_per_class = a.per_class;
    opt.seed = c.seed;
    const LabeledSet set = build_balanced(images, opt);
    const fs::path dir = run_dir(a.out, "extract");
    save_patch_set(set, dir);
    std::cerr << set.size() << " patches (" << set.count(Label::particle) << " particle, "
              << set.count(Label::background) << " background) written to " << dir.string() << '\n';
    return 0;
}

// Patch directories carry no image provenance, so every patch is its own
// group for cross-validation.
LabeledSet load_patches_for_training(const std::string& dir) {
    LabeledSet set = load_patch_set(dir);
    if (set.size() == 0) throw InvalidArgument("patch directory '" + dir + "' holds no patches");
    for (std::size_t i = 0; i < set.size(); ++i) set.image_index[i] = i;
    return set;
}

struct TrainArgs {
    std::string patches;
    std::string out;
    bool grid = false;
    ConfigFlags cfg;
};

int cmd_train(const TrainArgs& a) {
    RunConfig c = a.cfg.resolve();
    if (a.grid) c.grid = true;
    const LabeledSet set = load_patches_for_training(a.patches);
    if (set.patches.front().side != c.patch_side)
        throw DimensionError("patches are " + std::to_string(set.patches.front().side) + " px, --patch-side is " +
                             std::to_string(c.patch_side));
    const fs::path dir = run_dir(a.out, "train");
    fs::create_directories(dir);
    write_text(dir / "config.json", c.to_json() + "\n");
    RunLog log(dir);
    log("train: " + std::to_string(set.size()) + " patches, seed " + std::to_string(c.seed));

    double plr = c.pretrain_lr, flr = c.finetune_lr;
    if (c.grid) {
        const GridResult g = grid_search(set, c, c.seed);
        std::ostringstream grid;
        grid << "pretrain_lr,finetune_lr,accuracy\n";
        for (const auto& cell : g.cells)
            grid << g6(cell.pretrain_lr) << ',' << g6(cell.finetune_lr) << ',' << g6(cell.accuracy) << '\n';
        write_text(dir / "grid.csv", grid.str());
        plr = g.pretrain_lr;
        flr = g.finetune_lr;
        log("grid: selected pretrain lr " + g6(plr) + ", finetune lr " + g6(flr) + " (cv accuracy " +
            g6(g.accuracy) + ")");
    }
    TrainConfig pre = c.pretrain_config(c.seed);
    TrainConfig fine = c.finetune_config(c.seed);
    pre.learning_rate = plr;
    fine.learning_rate = flr;
    SdaModel model = train_sda(set.patches, pre, fine, {c.corruption, derive_seed(c.seed, "corruption")}, c.layer_sizes);
    model.metadata.magnification = c.magnification;
    save_model(model, dir / "model.json");
    write_text(dir / "history.csv", history_csv(model.metadata.history));
    log("training accuracy " + g6(classification_accuracy(model, set.patches)));
    return 0;
}

struct TransferArgs {
    std::string source;
    std::string patches;
    std::string setting;
    std::string out;
    bool freeze_output = false;
    ConfigFlags cfg;
};

int cmd_transfer(const TransferArgs& a) {
    const RunConfig c = a.cfg.resolve();
    const SdaModel source = load_model(a.source);
    const TlSetting setting = TlSetting::parse(a.setting);
    const LabeledSet set = load_patches_for_training(a.patches);
    const fs::path dir = run_dir(a.out, "transfer");
    fs::create_directories(dir);
    write_text(dir / "config.json", c.to_json() + "\n");
    RunLog log(dir);
    log("transfer: setting " + setting.to_string() + ", " + std::to_string(set.size()) + " target patches");
    SdaModel model = transfer(source, set.patches, setting, c.finetune_config(c.seed), {a.freeze_output});
    model.metadata.magnification = c.magnification;
    save_model(model, dir / "model.json");
    write_text(dir / "history.csv", history_csv(model.metadata.history));
    log("training accuracy " + g6(classification_accuracy(model, set.patches)));
    return 0;
}

struct ClassifyArgs {
    std::string model;
    std::string image;
    std::string detections;
    std::string patches;
    std::string out;
};

int cmd_classify(const ClassifyArgs& a) {
    const SdaModel model = load_model(a.model);
    Sink sink(a.out);
    auto& out = sink.stream();
    if (!a.patches.empty()) {
        const LabeledSet set = load_patch_set(a.patches);
        const auto preds = predict_batch(model, set.patches);
        out << "file,label,p_particle\n";
        std::size_t correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            out << set.image_ids[i] << ',' << static_cast<int>(preds[i].label) << ',' << g6(preds[i].p_particle) << '\n';
            correct += set.patches[i].label == preds[i].label;
        }
        sink.close();
        if (!preds.empty())
            std::cerr << "accuracy " << g6(static_cast<double>(correct) / static_cast<double>(preds.size())) << '\n';
        return 0;
    }
    if (a.image.empty() || a.detections.empty())
        throw InvalidArgument("classify needs --patches, or --image together with --detections");
    const GrayImage img = load_image(a.image);
    const auto dets = read_detections(a.detections);
    std::vector<Patch> patches;
    for (const auto& d : dets) patches.push_back(extract_patch(img, d.x, d.y, model.patch_side));
    const auto preds = predict_batch(model, patches);
    out << "x,y,radius,response,label,p_particle\n";
    for (std::size_t i = 0; i < dets.size(); ++i)
        out << g6(dets[i].x) << ',' << g6(dets[i].y) << ',' << g6(dets[i].radius) << ',' << g6(dets[i].response) << ','
            << static_cast<int>(preds[i].label) << ',' << g6(preds[i].p_particle) << '\n';
    sink.close();
    return 0;
}

struct EvalArgs {
    std::string corpus;
    std::string model;
    std::string out;
    ConfigFlags cfg;
};

int cmd_eval(const EvalArgs& a) {
    const RunConfig c = a.cfg.resolve();
    const auto corpus = load_corpus(a.corpus);
    const fs::path dir = run_dir(a.out, "eval");
    fs::create_directories(dir);
    write_text(dir / "config.json", c.to_json() + "\n");
    RunLog log(dir);

    std::ostringstream report;
    if (a.model.empty()) {
        SweepOptions opt;
        opt.match_radius = c.match_radius;
        opt.patch_side = c.patch_side;
        const EvalReport r = report_from_curve(pr_sweep(corpus, c.bank(), c.thresholds, opt));
        write_text(dir / "pr_log.csv", pr_csv(r.pr_curve));
        write_text(dir / "report.json", "{\"log\": " + to_json(r) + "}\n");
        log("LoG best F " + g6(r.f_measure) + " (P " + g6(r.precision) + ", R " + g6(r.recall) + ")");
        return 0;
    }
    const SdaModel model = load_model(a.model);
    const auto sweep = pr_sweep_paired(corpus, c.bank(), c.thresholds, model, c.match_radius, c.patch_side);
    const EvalReport det = report_from_curve(sweep.detector);
    EvalReport comb = report_from_curve(sweep.filtered);
    BalanceOptions opt;
    opt.patch_side = model.patch_side;
    opt.label_radius = c.label_radius;
    opt.seed = c.seed;
    const LabeledSet patches = build_balanced(corpus, opt);
    if (patches.size() > 0) comb.accuracy = classification_accuracy(model, patches.patches);
    write_text(dir / "pr_log.csv", pr_csv(det.pr_curve));
    write_text(dir / "pr_sda.csv", pr_csv(comb.pr_curve));
    write_text(dir / "report.json", "{\"log\": " + to_json(det) + ",\n\"log_sda\": " + to_json(comb) + "}\n");
    log("LoG best F " + g6(det.f_measure) + ", LoG+SDA best F " + g6(comb.f_measure));
    return 0;
}

struct PipelineArgs {
    std::string corpus;
    std::string model;
    std::string source;
    std::string setting;
    std::string out;
    bool grid = false;
    bool tune_radius = false;
    ConfigFlags cfg;
};

std::string summary_csv(const AggregateReport& log, const AggregateReport& sda) {
    std::ostringstream out;
    out << "method,runs,precision_mean,precision_std,recall_mean,recall_std,f_mean,f_std,accuracy_mean,accuracy_std\n";
    auto row = [&](const char* name, const AggregateReport& r) {
        out << name << ',' << r.runs << ',' << g6(r.precision.mean) << ',' << g6(r.precision.std) << ','
            << g6(r.recall.mean) << ',' << g6(r.recall.std) << ',' << g6(r.f_measure.mean) << ','
            << g6(r.f_measure.std) << ',';
        if (r.accuracy)
            out << g6(r.accuracy->mean) << ',' << g6(r.accuracy->std);
        else
            out << ',';
        out << '\n';
    };
    row("log", log);
    row("log_sda", sda);
    return out.str();
}

int cmd_pipeline(const PipelineArgs& a) {
    RunConfig c = a.cfg.resolve();
    if (a.grid) c.grid = true;
    if (a.tune_radius) c.tune_radius = true;
    c.validate();
    if (!a.source.empty() && !a.model.empty()) throw InvalidArgument("--source and --model are mutually exclusive");
    if (!a.source.empty() && a.setting.empty()) throw InvalidArgument("--source needs --setting");

    const auto corpus = load_corpus(a.corpus);
    const fs::path dir = run_dir(a.out, "pipeline");
    fs::create_directories(dir);
    write_text(dir / "config.json", c.to_json() + "\n");
    RunLog log(dir);
    log("pipeline: " + std::to_string(corpus.size()) + " images, " + std::to_string(c.reps) + " repetition(s)");

    std::optional<SdaModel> fixed;
    if (!a.model.empty()) fixed = load_model(a.model);
    Trainer trainer;
    std::optional<SdaModel> source;
    if (!a.source.empty()) {
        source = load_model(a.source);
        const TlSetting setting = TlSetting::parse(a.setting);
        trainer = [&, setting](const LabeledSet& train, std::uint64_t seed) {
            return transfer(*source, train.patches, setting, c.finetune_config(seed));
        };
    }

    std::vector<EvalReport> det_reports, sda_reports;
    for (std::size_t i = 0; i < c.reps; ++i) {
        const std::uint64_t seed = c.seed + i;
        const PipelineRun run = run_pipeline(corpus, c, seed, fixed ? &*fixed : nullptr, trainer);
        char sub[16];
        std::snprintf(sub, sizeof sub, "rep_%02zu", i);
        const fs::path rd = dir / sub;
        write_text(rd / "pr_log.csv", pr_csv(run.detector.pr_curve));
        write_text(rd / "pr_sda.csv", pr_csv(run.combined.pr_curve));
        write_text(rd / "report.json",
                   "{\"seed\": " + std::to_string(seed) + ",\n\"radius\": " + g6(run.radius) +
                       ",\n\"log\": " + to_json(run.detector) + ",\n\"log_sda\": " + to_json(run.combined) + "}\n");
        if (!fixed) save_model(run.model, rd / "model.json");
        log("rep " + std::to_string(i) + " seed " + std::to_string(seed) + ": LoG F " + g6(run.detector.f_measure) +
            ", LoG+SDA F " + g6(run.combined.f_measure) +
            (run.combined.accuracy ? ", accuracy " + g6(*run.combined.accuracy) : std::string()));
        det_reports.push_back(run.detector);
        sda_reports.push_back(run.combined);
    }
    const AggregateReport det = aggregate(det_reports);
    const AggregateReport sda = aggregate(sda_reports);
    write_text(dir / "summary.json", "{\"log\": " + to_json(det) + ",\n\"log_sda\": " + to_json(sda) + "}\n");
    write_text(dir / "summary.csv", summary_csv(det, sda));
    log("LoG F " + g6(det.f_measure.mean) + " +- " + g6(det.f_measure.std) + ", LoG+SDA F " + g6(sda.f_measure.mean) +
        " +- " + g6(sda.f_measure.std));
    return 0;
}

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::size_t coordinates = 400;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    const std::vector<std::size_t> sizes{50, 50, 50};
    SdaModel model = SdaModel::initialize(20, sizes, a.seed);
    Rng rng(derive_seed(a.seed, "gradcheck-data"));
    for (auto& l : model.hidden) {
        for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = rng.uniform(-0.5, 0.5);
        for (Eigen::Index i = 0; i < l.c.size(); ++i) l.c[i] = rng.uniform(-0.5, 0.5);
    }
    const Eigen::Index batch = 8;
    Matrix x(400, batch);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = rng.uniform();
    std::vector<int> labels;
    for (Eigen::Index j = 0; j < batch; ++j) labels.push_back(static_cast<int>(j % 2));
    Matrix noisy = x;
    corrupt_in_place(noisy, 0.1, rng);

    DaeGradients dg;
    dae_objective(model.hidden[0], x, noisy, &dg);
    const auto r_dae = grad_check(
        [&](std::span<const double> th) {
            LayerParams l = model.hidden[0];
            unflatten(th, l);
            return dae_objective_extended(l, x, noisy);
        },
        flatten(model.hidden[0]), flatten(dg), a.coordinates, a.seed);

    NetworkGradients ng;
    classification_objective(model.hidden, model.output, x, labels, &ng);
    const auto r_net = grad_check(
        [&](std::span<const double> th) {
            std::vector<LayerParams> layers = model.hidden;
            LogisticLayer out = model.output;
            unflatten(th, layers, out);
            return classification_objective_extended(layers, out, x, labels);
        },
        flatten(model.hidden, model.output), flatten(ng), a.coordinates, a.seed + 1);

    const double worst = std::max(r_dae.max_rel_error, r_net.max_rel_error);
    std::printf("dae objective: max relative error %.3e over %zu coordinates\n", r_dae.max_rel_error,
                r_dae.coordinates);
    std::printf("classification objective: max relative error %.3e over %zu coordinates\n", r_net.max_rel_error,
                r_net.coordinates);
    std::printf("max relative error: %.3e (%s, tolerance 1e-05)\n", worst, worst < 1e-5 ? "ok" : "FAILED");
    return worst < 1e-5 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"goldspot: LoG particle detection with a stacked denoising autoencoder filter"};
    app.require_subcommand(1);
    app.failure_message([](const CLI::App*, const CLI::Error& err) {
        return "goldspot: error: " + std::string(err.what()) + "\n";
    });
    app.set_version_flag("--version", "goldspot 0.1.0");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate synthetic micrographs with ground truth");
    s->add_option("--out", synth.out, "Output directory");
    s->add_option("--count", synth.count, "Number of images")->check(CLI::PositiveNumber);
    s->add_option("--width", synth.spec.width, "Image width");
    s->add_option("--height", synth.spec.height, "Image height");
    s->add_option("--particles", synth.spec.n_particles, "Particles per image");
    s->add_option("--radius", synth.spec.particle_radius, "Particle radius");
    s->add_option("--particle-intensity", synth.spec.particle_intensity, "Particle gray level");
    s->add_option("--background-intensity", synth.spec.background_intensity, "Background gray level");
    s->add_option("--noise", synth.spec.noise_sigma, "Gaussian noise sigma");
    s->add_option("--distractors", synth.spec.n_distractors, "Non-particle artifacts per image");
    s->add_option("--min-separation", synth.min_separation, "Minimum particle center distance");
    s->add_option("--seed", synth.spec.seed, "Random seed");

    DetectArgs det;
    auto* d = app.add_subcommand("detect", "Detect particle candidates with the LoG filter");
    d->add_option("--image", det.image, "Input PGM image")->required()->check(CLI::ExistingFile);
    d->add_option("--out", det.out, "Detections CSV (stdout when omitted)");
    det.cfg.add_to(d, false);

    ExtractArgs ext;
    auto* e = app.add_subcommand("extract", "Build a balanced labeled patch set from an annotated corpus");
    e->add_option("--corpus", ext.corpus, "Corpus directory")->required();
    e->add_option("--out", ext.out, "Output patch directory");
    e->add_option("--per-class", ext.per_class, "Cap on patches per class");
    e->add_flag("--half", ext.half, "Halve images before patching (source-problem preparation)");
    ext.cfg.add_to(e, true);

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Pre-train and fine-tune an SDA on a patch set");
    t->add_option("--patches", tr.patches, "Patch directory")->required();
    t->add_option("--out", tr.out, "Run directory");
    t->add_flag("--grid", tr.grid, "Select learning rates by cross-validated grid search");
    tr.cfg.add_to(t, true);

    TransferArgs tl;
    auto* x = app.add_subcommand("transfer", "Fine-tune a copy of a source model on target patches");
    x->add_option("--source", tl.source, "Source model JSON")->required()->check(CLI::ExistingFile);
    x->add_option("--patches", tl.patches, "Target patch directory")->required();
    x->add_option("--setting", tl.setting, "Per-layer code, e.g. 011")->required();
    x->add_option("--out", tl.out, "Run directory");
    x->add_flag("--freeze-output", tl.freeze_output, "Keep the source output layer frozen");
    tl.cfg.add_to(x, true);

    ClassifyArgs cl;
    auto* c = app.add_subcommand("classify", "Classify detections or patches with a trained model");
    c->add_option("--model", cl.model, "Model JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--image", cl.image, "Image the detections belong to")->check(CLI::ExistingFile);
    c->add_option("--detections", cl.detections, "Detections CSV")->check(CLI::ExistingFile);
    c->add_option("--patches", cl.patches, "Patch directory");
    c->add_option("--out", cl.out, "Output CSV (stdout when omitted)");

    EvalArgs ev;
    auto* v = app.add_subcommand("eval", "Precision/recall sweep of LoG, and LoG+SDA when a model is given");
    v->add_option("--corpus", ev.corpus, "Corpus directory")->required();
    v->add_option("--model", ev.model, "Model JSON")->check(CLI::ExistingFile);
    v->add_option("--out", ev.out, "Run directory");
    ev.cfg.add_to(v, true);

    PipelineArgs pl;
    auto* p = app.add_subcommand("pipeline", "Repeated split / train / detect / classify / evaluate runs");
    p->add_option("--corpus", pl.corpus, "Corpus directory")->required();
    p->add_option("--model", pl.model, "Use this model instead of training")->check(CLI::ExistingFile);
    p->add_option("--source", pl.source, "Source model for transfer learning")->check(CLI::ExistingFile);
    p->add_option("--setting", pl.setting, "Transfer setting code, e.g. 011");
    p->add_option("--out", pl.out, "Run directory");
    p->add_flag("--grid", pl.grid, "Grid-search learning rates in every repetition");
    p->add_flag("--tune-radius", pl.tune_radius, "Pick the nominal radius from the preset set by cross-validation");
    pl.cfg.add_to(p, true);

    GradcheckArgs gc;
    auto* g = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
    g->add_option("--seed", gc.seed, "Random seed");
    g->add_option("--coords", gc.coordinates, "Coordinates sampled per objective")->check(CLI::Range(200, 1000000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err);
    }

    try {
        if (*s) return cmd_synth(synth);
        if (*d) return cmd_detect(det);
        if (*e) return cmd_extract(ext);
        if (*t) return cmd_train(tr);
        if (*x) return cmd_transfer(tl);
        if (*c) return cmd_classify(cl);
        if (*v) return cmd_eval(ev);
        if (*p) return cmd_pipeline(pl);
        if (*g) return cmd_gradcheck(gc);
    } catch (const std::exception& err) {
        std::cerr << "goldspot: error: " << err.what() << '\n';
        return 1;
    }
    return 1;
}
