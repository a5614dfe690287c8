#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "goldspot/annotation.hpp"
#include "goldspot/dataset.hpp"
#include "goldspot/logdetect.hpp"
#include "goldspot/sda.hpp"

namespace goldspot {

struct MatchPair {
    std::size_t detection;
    std::size_t annotation;
    double distance;
};

struct MatchResult {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::vector<MatchPair> pairs;
};

/// One-to-one greedy matching. Candidate pairs closer than `radius` are taken
/// in ascending distance order (ties: lower detection index, then lower
/// annotation index) whenever both endpoints are still free.
MatchResult match_detections(std::span<const Detection> detections, std::span<const Annotation> truth, double radius);

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

/// TP/(TP+FP) and TP/(TP+FN); an empty denominator yields 0.
PrecisionRecall precision_recall(std::size_t tp, std::size_t fp, std::size_t fn);
PrecisionRecall precision_recall(const MatchResult& m);

/// 2pr/(p+r), 0 when p + r = 0. Inputs must lie in [0, 1].
double f_measure(double precision, double recall);

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct SweepOptions {
    double match_radius = 4.0;
    std::size_t patch_side = 20;
    /// When set, detections whose patch is classified background are dropped.
    const SdaModel* classifier = nullptr;
};

/// Precision/recall for each threshold, pooled over all images (TP/FP/FN
/// summed before dividing). Sorted by threshold.
std::vector<PrPoint> pr_sweep(std::span<const AnnotatedImage> images, const ScaleBank& bank,
                              std::span<const double> thresholds, const SweepOptions& options);
/// Same, over images[subset[0]], images[subset[1]], ...
std::vector<PrPoint> pr_sweep(std::span<const AnnotatedImage> images, std::span<const std::size_t> subset,
                              const ScaleBank& bank, std::span<const double> thresholds, const SweepOptions& options);

/// LoG-only and LoG+classifier curves from one detection pass.
struct PairedSweep {
    std::vector<PrPoint> detector;
    std::vector<PrPoint> filtered;
};
PairedSweep pr_sweep_paired(std::span<const AnnotatedImage> images, const ScaleBank& bank,
                            std::span<const double> thresholds, const SdaModel& classifier,
                            double match_radius, std::size_t patch_side);
PairedSweep pr_sweep_paired(std::span<const AnnotatedImage> images, std::span<const std::size_t> subset,
                            const ScaleBank& bank, std::span<const double> thresholds, const SdaModel& classifier,
                            double match_radius, std::size_t patch_side);

/// Highest F-measure on the curve; ties go to the lower threshold.
PrPoint best_f(std::span<const PrPoint> curve);

/// Point of the curve at the given threshold. Throws if absent.
PrPoint at_threshold(std::span<const PrPoint> curve, double threshold);

/// Fraction of labeled patches whose predicted label matches.
double classification_accuracy(const SdaModel& model, std::span<const Patch> patches);

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::optional<double> accuracy;
    std::vector<PrPoint> pr_curve;
};

/// Report for a curve at its best-F operating point.
EvalReport report_from_curve(std::vector<PrPoint> curve);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Sample mean and standard deviation (n - 1 denominator, 0 for n = 1).
MeanStd mean_std(std::span<const double> values);

struct AggregateReport {
    std::size_t runs = 0;
    MeanStd precision;
    MeanStd recall;
    MeanStd f_measure;
    std::optional<MeanStd> accuracy;
    /// Pointwise mean/std of precision and recall per threshold, present when
    /// every report carries a curve over the same thresholds.
    std::vector<double> thresholds;
    std::vector<MeanStd> curve_precision;
    std::vector<MeanStd> curve_recall;
};

AggregateReport aggregate(std::span<const EvalReport> reports);

/// CSV `threshold,precision,recall,f_measure`.
void write_pr_csv(std::ostream& out, std::span<const PrPoint> curve);

std::string to_json(const EvalReport& report);
std::string to_json(const AggregateReport& report);

}  // namespace goldspot
