#include "goldspot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <ostream>

#include "csv.hpp"
#include "goldspot/error.hpp"
#include "parallel.hpp"

namespace goldspot {

using json = nlohmann::ordered_json;

MatchResult match_detections(std::span<const Detection> detections, std::span<const Annotation> truth, double radius) {
    if (!(radius > 0.0)) throw InvalidArgument("match radius must be positive");
    std::vector<MatchPair> candidates;
    for (std::size_t d = 0; d < detections.size(); ++d)
        for (std::size_t a = 0; a < truth.size(); ++a) {
            const double dx = detections[d].x - truth[a].x;
            const double dy = detections[d].y - truth[a].y;
            if (std::abs(dx) >= radius || std::abs(dy) >= radius) continue;
            const double dist = std::hypot(dx, dy);
            if (dist < radius) candidates.push_back({d, a, dist});
        }
    std::sort(candidates.begin(), candidates.end(), [](const MatchPair& l, const MatchPair& r) {
        if (l.distance != r.distance) return l.distance < r.distance;
        if (l.detection != r.detection) return l.detection < r.detection;
        return l.annotation < r.annotation;
    });

    std::vector<char> det_used(detections.size(), 0);
    std::vector<char> gt_used(truth.size(), 0);
    MatchResult m;
    for (const auto& c : candidates) {
        if (det_used[c.detection] || gt_used[c.annotation]) continue;
        det_used[c.detection] = 1;
        gt_used[c.annotation] = 1;
        m.pairs.push_back(c);
    }
    m.tp = m.pairs.size();
    m.fp = detections.size() - m.tp;
    m.fn = truth.size() - m.tp;
    return m;
}

PrecisionRecall precision_recall(std::size_t tp, std::size_t fp, std::size_t fn) {
    PrecisionRecall pr;
    if (tp + fp > 0) pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return pr;
}

PrecisionRecall precision_recall(const MatchResult& m) { return precision_recall(m.tp, m.fp, m.fn); }

double f_measure(double precision, double recall) {
    if (!(precision >= 0.0 && precision <= 1.0) || !(recall >= 0.0 && recall <= 1.0))
        throw InvalidArgument("f_measure inputs must lie in [0, 1]");
    const double sum = precision + recall;
    return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

namespace {

struct Candidates {
    std::vector<Detection> detections;
    std::vector<char> accepted;  // classifier verdict, 1 when no classifier
};

std::vector<double> sorted_thresholds(std::span<const double> thresholds) {
    if (thresholds.empty()) throw InvalidArgument("threshold list is empty");
    std::vector<double> t(thresholds.begin(), thresholds.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
}

// Detections at threshold tau are exactly those found at the lowest threshold
// with response >= tau, so one detection pass serves the whole sweep.
using ImageRefs = std::vector<const AnnotatedImage*>;

ImageRefs refs(std::span<const AnnotatedImage> images) {
    ImageRefs out;
    for (const auto& img : images) out.push_back(&img);
    return out;
}

ImageRefs refs(std::span<const AnnotatedImage> images, std::span<const std::size_t> subset) {
    ImageRefs out;
    for (std::size_t i : subset) {
        if (i >= images.size()) throw InvalidArgument("image index out of range");
        out.push_back(&images[i]);
    }
    return out;
}

std::vector<Candidates> gather(const ImageRefs& images, const ScaleBank& bank, double lowest,
                               const SdaModel* classifier, std::size_t patch_side) {
    std::vector<Candidates> out(images.size());
    detail::parallel_for(images.size(), [&](std::size_t i) {
        Candidates& c = out[i];
        c.detections = detect(response_stack(images[i]->image, bank), lowest);
        c.accepted.assign(c.detections.size(), 1);
        if (classifier) {
            std::vector<Patch> patches;
            patches.reserve(c.detections.size());
            for (const auto& d : c.detections) patches.push_back(extract_patch(images[i]->image, d.x, d.y, patch_side));
            const auto preds = predict_batch(*classifier, patches);
            for (std::size_t k = 0; k < preds.size(); ++k) c.accepted[k] = preds[k].label == Label::particle;
        }
    });
    return out;
}

std::vector<PrPoint> curve_from(const ImageRefs& images, const std::vector<Candidates>& cands,
                                const std::vector<double>& thresholds, double match_radius, bool use_verdict) {
    std::vector<PrPoint> curve;
    for (double tau : thresholds) {
        PrPoint p;
        p.threshold = tau;
        for (std::size_t i = 0; i < images.size(); ++i) {
            std::vector<Detection> kept;
            for (std::size_t k = 0; k < cands[i].detections.size(); ++k) {
                const Detection& d = cands[i].detections[k];
                if (d.response >= tau && (!use_verdict || cands[i].accepted[k])) kept.push_back(d);
            }
            const MatchResult m = match_detections(kept, images[i]->annotations, match_radius);
            p.tp += m.tp;
            p.fp += m.fp;
            p.fn += m.fn;
        }
        const auto pr = precision_recall(p.tp, p.fp, p.fn);
        p.precision = pr.precision;
        p.recall = pr.recall;
        p.f_measure = f_measure(pr.precision, pr.recall);
        curve.push_back(p);
    }
    return curve;
}

std::vector<PrPoint> sweep(const ImageRefs& images, const ScaleBank& bank, std::span<const double> thresholds,
                           const SweepOptions& options) {
    const auto taus = sorted_thresholds(thresholds);
    const auto cands = gather(images, bank, taus.front(), options.classifier, options.patch_side);
    return curve_from(images, cands, taus, options.match_radius, options.classifier != nullptr);
}

PairedSweep sweep_paired(const ImageRefs& images, const ScaleBank& bank, std::span<const double> thresholds,
                         const SdaModel& classifier, double match_radius, std::size_t patch_side) {
    const auto taus = sorted_thresholds(thresholds);
    const auto cands = gather(images, bank, taus.front(), &classifier, patch_side);
    return {curve_from(images, cands, taus, match_radius, false), curve_from(images, cands, taus, match_radius, true)};
}

}  // namespace

std::vector<PrPoint> pr_sweep(std::span<const AnnotatedImage> images, const ScaleBank& bank,
                              std::span<const double> thresholds, const SweepOptions& options) {
    return sweep(refs(images), bank, thresholds, options);
}

std::vector<PrPoint> pr_sweep(std::span<const AnnotatedImage> images, std::span<const std::size_t> subset,
                              const ScaleBank& bank, std::span<const double> thresholds, const SweepOptions& options) {
    return sweep(refs(images, subset), bank, thresholds, options);
}

PairedSweep pr_sweep_paired(std::span<const AnnotatedImage> images, const ScaleBank& bank,
                            std::span<const double> thresholds, const SdaModel& classifier, double match_radius,
                            std::size_t patch_side) {
    return sweep_paired(refs(images), bank, thresholds, classifier, match_radius, patch_side);
}

PairedSweep pr_sweep_paired(std::span<const AnnotatedImage> images, std::span<const std::size_t> subset,
                            const ScaleBank& bank, std::span<const double> thresholds, const SdaModel& classifier,
                            double match_radius, std::size_t patch_side) {
    return sweep_paired(refs(images, subset), bank, thresholds, classifier, match_radius, patch_side);
}

PrPoint best_f(std::span<const PrPoint> curve) {
    if (curve.empty()) throw InvalidArgument("best_f: empty curve");
    PrPoint best = curve.front();
    for (const auto& p : curve)
        if (p.f_measure > best.f_measure || (p.f_measure == best.f_measure && p.threshold < best.threshold)) best = p;
    return best;
}

PrPoint at_threshold(std::span<const PrPoint> curve, double threshold) {
    for (const auto& p : curve)
        if (p.threshold == threshold) return p;
    throw InvalidArgument("threshold " + detail::format_6g(threshold) + " not on the curve");
}

double classification_accuracy(const SdaModel& model, std::span<const Patch> patches) {
    if (patches.empty()) throw InvalidArgument("classification_accuracy: no patches");
    const auto preds = predict_batch(model, patches);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < patches.size(); ++i) {
        if (!patches[i].label) throw InvalidArgument("classification_accuracy: unlabeled patch");
        if (preds[i].label == *patches[i].label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(patches.size());
}

EvalReport report_from_curve(std::vector<PrPoint> curve) {
    EvalReport r;
    const PrPoint best = best_f(curve);
    r.precision = best.precision;
    r.recall = best.recall;
    r.f_measure = best.f_measure;
    r.pr_curve = std::move(curve);
    return r;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw InvalidArgument("mean_std: no values");
    MeanStd s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

AggregateReport aggregate(std::span<const EvalReport> reports) {
    if (reports.empty()) throw InvalidArgument("aggregate: no reports");
    AggregateReport out;
    out.runs = reports.size();
    auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto& r : reports) v.push_back(field(r));
        return mean_std(v);
    };
    out.precision = collect([](const EvalReport& r) { return r.precision; });
    out.recall = collect([](const EvalReport& r) { return r.recall; });
    out.f_measure = collect([](const EvalReport& r) { return r.f_measure; });
    if (std::all_of(reports.begin(), reports.end(), [](const EvalReport& r) { return r.accuracy.has_value(); }))
        out.accuracy = collect([](const EvalReport& r) { return *r.accuracy; });

    const auto& first = reports.front().pr_curve;
    const bool aligned = !first.empty() && std::all_of(reports.begin(), reports.end(), [&](const EvalReport& r) {
        if (r.pr_curve.size() != first.size()) return false;
        for (std::size_t i = 0; i < first.size(); ++i)
            if (r.pr_curve[i].threshold != first[i].threshold) return false;
        return true;
    });
    if (aligned) {
        for (std::size_t i = 0; i < first.size(); ++i) {
            out.thresholds.push_back(first[i].threshold);
            out.curve_precision.push_back(collect([i](const EvalReport& r) { return r.pr_curve[i].precision; }));
            out.curve_recall.push_back(collect([i](const EvalReport& r) { return r.pr_curve[i].recall; }));
        }
    }
    return out;
}

void write_pr_csv(std::ostream& out, std::span<const PrPoint> curve) {
    out << "threshold,precision,recall,f_measure\n";
    for (const auto& p : curve)
        out << detail::format_6g(p.threshold) << ',' << detail::format_6g(p.precision) << ','
            << detail::format_6g(p.recall) << ',' << detail::format_6g(p.f_measure) << '\n';
}

namespace {

json curve_json(std::span<const PrPoint> curve) {
    json arr = json::array();
    for (const auto& p : curve)
        arr.push_back({{"threshold", p.threshold},
                       {"precision", p.precision},
                       {"recall", p.recall},
                       {"f_measure", p.f_measure},
                       {"tp", p.tp},
                       {"fp", p.fp},
                       {"fn", p.fn}});
    return arr;
}

json ms(const MeanStd& s) { return {{"mean", s.mean}, {"std", s.std}}; }

}  // namespace

std::string to_json(const EvalReport& report) {
    json j;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["f_measure"] = report.f_measure;
    if (report.accuracy) j["accuracy"] = *report.accuracy;
    j["pr_curve"] = curve_json(report.pr_curve);
    return j.dump(2);
}

std::string to_json(const AggregateReport& report) {
    json j;
    j["runs"] = report.runs;
    j["precision"] = ms(report.precision);
    j["recall"] = ms(report.recall);
    j["f_measure"] = ms(report.f_measure);
    if (report.accuracy) j["accuracy"] = ms(*report.accuracy);
    json curve = json::array();
    for (std::size_t i = 0; i < report.thresholds.size(); ++i)
        curve.push_back({{"threshold", report.thresholds[i]},
                         {"precision", ms(report.curve_precision[i])},
                         {"recall", ms(report.curve_recall[i])}});
    j["pr_curve"] = std::move(curve);
    return j.dump(2);
}

}  // namespace goldspot
