#include "goldspot/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

#include "csv.hpp"
#include "goldspot/random.hpp"

namespace goldspot {

namespace fs = std::filesystem;

std::vector<Annotation> load_annotations(const fs::path& path, std::optional<ImageBounds> bounds) {
    std::ifstream in(path);
    if (!in) throw IoError(path.string(), "cannot open annotation file");

    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    bool has_radius = false;
    std::vector<Annotation> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto fields = detail::split_fields(line);
        if (!have_header) {
            if (fields.size() < 2 || fields[0] != "x" || fields[1] != "y" ||
                (fields.size() == 3 && fields[2] != "radius") || fields.size() > 3)
                throw FormatError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected header 'x,y' or 'x,y,radius'");
            has_radius = fields.size() == 3;
            have_header = true;
            continue;
        }
        const std::size_t expected = has_radius ? 3 : 2;
        Annotation a;
        double r = 0.0;
        const bool ok = (fields.size() == expected || (has_radius && fields.size() == 2)) &&
                        detail::parse_double(fields[0], a.x) && detail::parse_double(fields[1], a.y) &&
                        (fields.size() < 3 || fields[2].empty() || detail::parse_double(fields[2], r));
        if (!ok || !std::isfinite(a.x) || !std::isfinite(a.y))
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
        if (fields.size() == 3 && !fields[2].empty()) {
            if (!(r > 0.0)) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": radius must be positive");
            a.radius = r;
        }
        if (bounds && (a.x < 0.0 || a.y < 0.0 || a.x > static_cast<double>(bounds->width) - 1.0 ||
                       a.y > static_cast<double>(bounds->height) - 1.0))
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": annotation (" +
                              detail::format_exact(a.x) + ", " + detail::format_exact(a.y) +
                              ") outside the image");
        out.push_back(a);
    }
    if (!have_header) throw FormatError(path.string() + ": missing header 'x,y'");
    return out;
}

void save_annotations(std::span<const Annotation> annotations, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(path.string(), "cannot open file for writing");
    const bool with_radius = std::any_of(annotations.begin(), annotations.end(), [](const Annotation& a) { return a.radius.has_value(); });
    out << (with_radius ? "x,y,radius\n" : "x,y\n");
    for (const auto& a : annotations) {
        out << detail::format_exact(a.x) << ',' << detail::format_exact(a.y);
        if (with_radius) {
            out << ',';
            if (a.radius) out << detail::format_exact(*a.radius);
        }
        out << '\n';
    }
    if (!out) throw IoError(path.string(), "write failed");
}

Label label_patch(double x, double y, std::span<const Annotation> annotations, double threshold) {
    for (const auto& a : annotations)
        if (std::hypot(a.x - x, a.y - y) < threshold) return Label::particle;
    return Label::background;
}

std::size_t LabeledSet::count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(patches.begin(), patches.end(), [&](const Patch& p) { return p.label == label; }));
}

LabeledSet LabeledSet::select_images(std::span<const std::size_t> images) const {
    const std::set<std::size_t> keep(images.begin(), images.end());
    LabeledSet out;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (!keep.contains(image_index[i])) continue;
        out.patches.push_back(patches[i]);
        out.image_index.push_back(image_index[i]);
        out.image_ids.push_back(image_ids[i]);
    }
    return out;
}

void LabeledSet::append(const LabeledSet& other) {
    patches.insert(patches.end(), other.patches.begin(), other.patches.end());
    image_index.insert(image_index.end(), other.image_index.begin(), other.image_index.end());
    image_ids.insert(image_ids.end(), other.image_ids.begin(), other.image_ids.end());
}

LabeledSet build_balanced(std::span<const AnnotatedImage> images, const BalanceOptions& options) {
    std::vector<std::size_t> all(images.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return build_balanced(images, all, options);
}

LabeledSet build_balanced(std::span<const AnnotatedImage> images, std::span<const std::size_t> subset,
                          const BalanceOptions& options) {
    if (options.patch_side == 0) throw InvalidArgument("patch_side must be positive");
    if (!(options.label_radius > 0.0)) throw InvalidArgument("label_radius must be positive");
    for (std::size_t i : subset)
        if (i >= images.size()) throw InvalidArgument("build_balanced: image index out of range");

    // Positive slots (position in subset, annotation), optionally capped to
    // n_per_class with a seeded draw.
    std::vector<std::pair<std::size_t, std::size_t>> positives;
    for (std::size_t s = 0; s < subset.size(); ++s)
        for (std::size_t a = 0; a < images[subset[s]].annotations.size(); ++a) positives.emplace_back(s, a);
    if (options.n_per_class && *options.n_per_class < positives.size()) {
        Rng rng(derive_seed(options.seed, "positives"));
        rng.shuffle(positives.begin(), positives.end());
        positives.resize(*options.n_per_class);
        std::sort(positives.begin(), positives.end());
    }

    std::vector<std::size_t> per_image(subset.size(), 0);
    for (const auto& [s, a] : positives) ++per_image[s];

    LabeledSet out;
    auto push = [&](Patch p, Label label, std::size_t i) {
        p.label = label;
        out.patches.push_back(std::move(p));
        out.image_index.push_back(i);
        out.image_ids.push_back(images[i].id);
    };
    std::size_t next = 0;
    for (std::size_t s = 0; s < subset.size(); ++s) {
        const std::size_t i = subset[s];
        const AnnotatedImage& img = images[i];
        for (; next < positives.size() && positives[next].first == s; ++next) {
            const Annotation& a = img.annotations[positives[next].second];
            push(extract_patch(img.image, a.x, a.y, options.patch_side), Label::particle, i);
        }
        Rng rng(derive_seed(options.seed, "negatives", i));
        for (std::size_t n = 0; n < per_image[s]; ++n) {
            bool placed = false;
            for (int attempt = 0; attempt < kNegativeBudget && !placed; ++attempt) {
                const auto x = static_cast<double>(rng.below(img.image.width()));
                const auto y = static_cast<double>(rng.below(img.image.height()));
                if (label_patch(x, y, img.annotations, options.label_radius) == Label::particle) continue;
                push(extract_patch(img.image, x, y, options.patch_side), Label::background, i);
                placed = true;
            }
            if (!placed)
                throw InvalidArgument("cannot place enough background patches in image '" + img.id +
                                      "' (no free area beyond the labeling radius)");
        }
    }
    return out;
}

Partition split(std::size_t n_items, double train_fraction, double test_fraction, std::uint64_t seed) {
    if (train_fraction < 0.0 || test_fraction < 0.0 || std::abs(train_fraction + test_fraction - 1.0) > 1e-9)
        throw InvalidArgument("split fractions must be non-negative and sum to 1");
    if (n_items == 0) throw InvalidArgument("split: too few images (0)");
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n_items) + 0.5));
    if ((train_fraction > 0.0 && n_train == 0) || (test_fraction > 0.0 && n_train == n_items))
        throw InvalidArgument("split: too few images (" + std::to_string(n_items) + ") for the requested fractions");

    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order.begin(), order.end());
    Partition p;
    p.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
    p.test.assign(order.begin() + static_cast<long>(n_train), order.end());
    std::sort(p.train.begin(), p.train.end());
    std::sort(p.test.begin(), p.test.end());
    return p;
}

std::vector<std::vector<std::size_t>> cv_folds(std::span<const std::size_t> items, std::size_t k, std::uint64_t seed) {
    if (k == 0) throw InvalidArgument("cv_folds: k must be >= 1");
    if (k > items.size())
        throw InvalidArgument("cv_folds: k = " + std::to_string(k) + " exceeds the number of images (" +
                              std::to_string(items.size()) + ")");
    if (k == 1) return {std::vector<std::size_t>(items.begin(), items.end())};
    std::vector<std::size_t> order(items.begin(), items.end());
    Rng rng(derive_seed(seed, "folds"));
    rng.shuffle(order.begin(), order.end());
    std::vector<std::vector<std::size_t>> folds(k);
    for (std::size_t i = 0; i < order.size(); ++i) folds[i % k].push_back(order[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

std::vector<AnnotatedImage> load_corpus(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir.string(), "corpus directory does not exist");
    std::vector<fs::path> images;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") images.push_back(entry.path());
    std::sort(images.begin(), images.end());
    if (images.empty()) throw IoError(dir.string(), "no .pgm images in corpus directory");

    std::vector<AnnotatedImage> out;
    for (const auto& path : images) {
        AnnotatedImage item{path.stem().string(), load_image(path), {}};
        fs::path csv = path;
        csv.replace_extension(".csv");
        if (fs::exists(csv))
            item.annotations = load_annotations(csv, ImageBounds{item.image.width(), item.image.height()});
        out.push_back(std::move(item));
    }
    return out;
}

void save_corpus(std::span<const AnnotatedImage> images, const fs::path& dir) {
    fs::create_directories(dir);
    for (const auto& img : images) {
        save_image(img.image, dir / (img.id + ".pgm"));
        save_annotations(img.annotations, dir / (img.id + ".csv"));
    }
}

void save_patch_set(const LabeledSet& set, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream labels(dir / "labels.csv");
    if (!labels) throw IoError((dir / "labels.csv").string(), "cannot open file for writing");
    labels << "file,label,center_x,center_y\n";
    for (std::size_t i = 0; i < set.patches.size(); ++i) {
        const Patch& p = set.patches[i];
        if (!p.label) throw InvalidArgument("save_patch_set: patch " + std::to_string(i) + " is unlabeled");
        char name[32];
        std::snprintf(name, sizeof name, "patch_%06zu.pgm", i);
        std::vector<double> bytes(p.values.size());
        std::transform(p.values.begin(), p.values.end(), bytes.begin(), [](double v) { return v * 255.0; });
        save_image(GrayImage(p.side, p.side, std::move(bytes)), dir / name);
        labels << name << ',' << static_cast<int>(*p.label) << ',' << detail::format_exact(p.center_x) << ','
               << detail::format_exact(p.center_y) << '\n';
    }
    if (!labels) throw IoError((dir / "labels.csv").string(), "write failed");
}

LabeledSet load_patch_set(const fs::path& dir) {
    const fs::path labels_path = dir / "labels.csv";
    std::ifstream in(labels_path);
    if (!in) throw IoError(labels_path.string(), "cannot open patch labels");
    std::string line;
    if (!std::getline(in, line) || detail::trim(line) != "file,label,center_x,center_y")
        throw FormatError(labels_path.string() + ": expected header 'file,label,center_x,center_y'");
    LabeledSet out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_fields(line);
        double label = 0.0;
        Patch p;
        if (f.size() != 4 || !detail::parse_double(f[1], label) || (label != 0.0 && label != 1.0) ||
            !detail::parse_double(f[2], p.center_x) || !detail::parse_double(f[3], p.center_y))
            throw FormatError(labels_path.string() + ":" + std::to_string(line_no) + ": malformed row '" + line + "'");
        const GrayImage img = load_image(dir / std::string(f[0]));
        if (img.width() != img.height())
            throw FormatError((dir / std::string(f[0])).string() + ": patch is not square");
        p.side = img.width();
        p.values.resize(img.size());
        std::transform(img.data().begin(), img.data().end(), p.values.begin(), [](double v) { return v / 255.0; });
        p.label = label == 1.0 ? Label::particle : Label::background;
        out.patches.push_back(std::move(p));
        out.image_index.push_back(0);
        out.image_ids.emplace_back(f[0]);
    }
    return out;
}

}  // namespace goldspot
