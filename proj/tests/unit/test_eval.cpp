#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "goldspot/error.hpp"
#include "goldspot/eval.hpp"
#include "helpers.hpp"

using namespace goldspot;

namespace {

Detection det(double x, double y) { return {x, y, 4.0, 1.0}; }
Annotation ann(double x, double y) { return {x, y, std::nullopt}; }

// Size of a maximum one-to-one matching within the radius, by exhaustive search.
std::size_t max_matching(std::span<const Detection> d, std::span<const Annotation> a, double radius, std::size_t i = 0,
                         std::vector<char>* used = nullptr) {
    std::vector<char> local(a.size(), 0);
    if (!used) used = &local;
    if (i == d.size()) return 0;
    std::size_t best = max_matching(d, a, radius, i + 1, used);
    for (std::size_t k = 0; k < a.size(); ++k) {
        if ((*used)[k] || std::hypot(d[i].x - a[k].x, d[i].y - a[k].y) >= radius) continue;
        (*used)[k] = 1;
        best = std::max(best, 1 + max_matching(d, a, radius, i + 1, used));
        (*used)[k] = 0;
    }
    return best;
}

PrPoint point(double t, double p, double r) { return {t, p, r, f_measure(p, r), 0, 0, 0}; }

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("matching edge cases") {
    const std::vector<Detection> none;
    const std::vector<Annotation> truth{ann(10, 10), ann(50, 50)};
    MatchResult m = match_detections(none, truth, 4.0);
    CHECK(m.tp == 0);
    CHECK(m.fn == 2);
    m = match_detections(std::vector<Detection>{det(10, 10)}, std::vector<Annotation>{}, 4.0);
    CHECK(m.fp == 1);

    // Distance exactly at the radius does not match.
    m = match_detections(std::vector<Detection>{det(14, 10)}, truth, 4.0);
    CHECK(m.tp == 0);
    m = match_detections(std::vector<Detection>{det(13.9, 10)}, truth, 4.0);
    CHECK(m.tp == 1);

    // Two detections on one particle: one TP, one FP.
    m = match_detections(std::vector<Detection>{det(11, 10), det(10, 10)}, truth, 4.0);
    CHECK(m.tp == 1);
    CHECK(m.fp == 1);
    CHECK(m.fn == 1);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].detection == 1);

    // Equal distances go to the lower detection index.
    m = match_detections(std::vector<Detection>{det(12, 10), det(8, 10)}, truth, 4.0);
    CHECK(m.pairs[0].detection == 0);
    CHECK_THROWS_AS(match_detections(none, truth, 0.0), InvalidArgument);
}

TEST_CASE("greedy matching can fall short of a maximum matching") {
    const std::vector<Annotation> truth{ann(0, 0), ann(0.95, 0)};
    const std::vector<Detection> dets{det(0.1, 0), det(-0.8, 0)};
    CHECK(match_detections(dets, truth, 1.0).tp == 1);
    CHECK(max_matching(dets, truth, 1.0) == 2);
}

TEST_CASE("matching invariants on random scenes") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Detection> dets(rng.below(7));
        std::vector<Annotation> truth(rng.below(7));
        for (auto& d : dets) d = det(rng.uniform(0, 20), rng.uniform(0, 20));
        for (auto& a : truth) a = ann(rng.uniform(0, 20), rng.uniform(0, 20));
        const MatchResult m = match_detections(dets, truth, 4.0);
        REQUIRE(m.tp + m.fp == dets.size());
        REQUIRE(m.tp + m.fn == truth.size());
        REQUIRE(m.tp <= max_matching(dets, truth, 4.0));
        // Greedy is maximal: at least half of the optimum.
        REQUIRE(2 * m.tp >= max_matching(dets, truth, 4.0));
        std::vector<char> du(dets.size()), au(truth.size());
        for (const auto& p : m.pairs) {
            REQUIRE(p.distance < 4.0);
            REQUIRE_FALSE(du[p.detection]);
            REQUIRE_FALSE(au[p.annotation]);
            du[p.detection] = au[p.annotation] = 1;
        }
    }
}

TEST_CASE("precision, recall and F") {
    const PrecisionRecall pr = precision_recall(8, 2, 2);
    CHECK(pr.precision == doctest::Approx(0.8));
    CHECK(pr.recall == doctest::Approx(0.8));
    CHECK(f_measure(0.8, 0.8) == doctest::Approx(0.8));
    CHECK(f_measure(1.0, 0.5) == doctest::Approx(2.0 / 3.0));
    CHECK(f_measure(0.0, 0.0) == 0.0);
    CHECK(precision_recall(0, 0, 5).precision == 0.0);
    CHECK(precision_recall(0, 3, 0).recall == 0.0);
    CHECK_THROWS_AS(f_measure(1.2, 0.5), InvalidArgument);
    CHECK_THROWS_AS(f_measure(0.5, -0.1), InvalidArgument);
}

TEST_CASE("best F takes the lower threshold on ties") {
    const std::vector<PrPoint> curve{point(10, 0.5, 1.0), point(20, 1.0, 0.5), point(30, 0.6, 0.6)};
    CHECK(best_f(curve).threshold == 10.0);
    const std::vector<PrPoint> rising{point(10, 0.2, 1.0), point(20, 0.9, 0.9)};
    CHECK(best_f(rising).threshold == 20.0);
    CHECK(at_threshold(curve, 30).precision == 0.6);
    CHECK_THROWS_AS(at_threshold(curve, 25), InvalidArgument);
    CHECK_THROWS_AS(best_f(std::vector<PrPoint>{}), InvalidArgument);
}

TEST_CASE("sweeps pool counts and lose recall as the threshold rises") {
    SynthSpec spec;
    spec.width = spec.height = 200;
    spec.n_particles = 12;
    spec.n_distractors = 6;
    spec.seed = 21;
    const auto corpus = testing::synth_corpus(spec, 3);
    const std::vector<double> thresholds{40, 5, 20, 10};
    SweepOptions opt;
    const auto curve = pr_sweep(corpus, build_bank(4.0), thresholds, opt);
    REQUIRE(curve.size() == 4);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].threshold > curve[i - 1].threshold);
        CHECK(curve[i].tp <= curve[i - 1].tp);
        CHECK(curve[i].tp + curve[i].fp <= curve[i - 1].tp + curve[i - 1].fp);
        CHECK(curve[i].recall <= curve[i - 1].recall);
    }
    for (const auto& p : curve) {
        CHECK(p.tp + p.fn == 36);
        CHECK(p.f_measure == doctest::Approx(f_measure(p.precision, p.recall)));
    }

    // Pooling sums counts over images before dividing.
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const std::vector<std::size_t> one{i};
        const auto c = pr_sweep(corpus, one, build_bank(4.0), thresholds, opt);
        tp += c[1].tp;
        fp += c[1].fp;
    }
    CHECK(curve[1].tp == tp);
    CHECK(curve[1].fp == fp);
    CHECK_THROWS_AS(pr_sweep(corpus, build_bank(4.0), std::vector<double>{}, opt), InvalidArgument);
}

TEST_CASE("a classifier that accepts everything leaves the curve unchanged") {
    SynthSpec spec;
    spec.width = spec.height = 150;
    spec.n_particles = 8;
    spec.seed = 22;
    const auto corpus = testing::synth_corpus(spec, 2);
    const std::vector<std::size_t> sizes{3};
    SdaModel yes = SdaModel::initialize(20, sizes, 0);
    yes.output = LogisticLayer::zeros(3, 2);
    yes.output.d[1] = 5.0;
    SdaModel no = yes;
    no.output.d[1] = -5.0;
    const std::vector<double> thresholds{10, 20};
    const auto paired = pr_sweep_paired(corpus, build_bank(4.0), thresholds, yes, 4.0, 20);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(paired.filtered[i].tp == paired.detector[i].tp);
        CHECK(paired.filtered[i].fp == paired.detector[i].fp);
    }
    const auto rejected = pr_sweep_paired(corpus, build_bank(4.0), thresholds, no, 4.0, 20);
    for (const auto& p : rejected.filtered) {
        CHECK(p.tp == 0);
        CHECK(p.fp == 0);
        CHECK(p.fn == 16);
    }
}

TEST_CASE("mean and standard deviation") {
    const std::vector<double> v{0.7, 0.9};
    const MeanStd ms = mean_std(v);
    CHECK(ms.mean == doctest::Approx(0.8));
    CHECK(ms.std == doctest::Approx(0.141421356).epsilon(1e-8));
    CHECK(mean_std(std::vector<double>{0.3}).std == 0.0);
    CHECK_THROWS_AS(mean_std(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("aggregation over runs") {
    EvalReport a = report_from_curve({point(10, 0.6, 0.8), point(20, 0.8, 0.6)});
    EvalReport b = report_from_curve({point(10, 1.0, 0.8), point(20, 0.9, 0.5)});
    a.accuracy = 0.7;
    b.accuracy = 0.9;
    const std::vector<EvalReport> runs{a, b};
    const AggregateReport agg = aggregate(runs);
    CHECK(agg.runs == 2);
    REQUIRE(agg.accuracy.has_value());
    CHECK(agg.accuracy->mean == doctest::Approx(0.8));
    CHECK(agg.accuracy->std == doctest::Approx(0.141421356).epsilon(1e-8));
    CHECK(agg.thresholds == std::vector<double>{10, 20});
    CHECK(agg.curve_precision[0].mean == doctest::Approx(0.8));
    CHECK(agg.curve_recall[1].mean == doctest::Approx(0.55));
    CHECK(agg.precision.mean == doctest::Approx(0.8));  // a ties at 10 and 20 and keeps 10
    CHECK(to_json(agg).find("\"runs\"") != std::string::npos);

    EvalReport c = report_from_curve({point(15, 1.0, 1.0)});
    const std::vector<EvalReport> mixed{a, c};
    CHECK(aggregate(mixed).thresholds.empty());
    CHECK_FALSE(aggregate(mixed).accuracy.has_value());
    CHECK_THROWS_AS(aggregate(std::vector<EvalReport>{}), InvalidArgument);
}

TEST_CASE("PR curve CSV") {
    std::ostringstream out;
    write_pr_csv(out, std::vector<PrPoint>{point(10, 0.5, 1.0), point(25, 1.0, 1.0 / 3.0)});
    CHECK(out.str() == "threshold,precision,recall,f_measure\n10,0.5,1,0.666667\n25,1,0.333333,0.5\n");
}

TEST_CASE("classification accuracy") {
    const std::vector<std::size_t> sizes{2};
    SdaModel m = SdaModel::initialize(2, sizes, 0);
    m.output = LogisticLayer::zeros(2, 2);
    m.output.d[1] = 1.0;
    std::vector<Patch> patches(4);
    for (std::size_t i = 0; i < 4; ++i) {
        patches[i].side = 2;
        patches[i].values.assign(4, 0.5);
        patches[i].label = i < 3 ? Label::particle : Label::background;
    }
    CHECK(classification_accuracy(m, patches) == doctest::Approx(0.75));
    patches[0].label.reset();
    CHECK_THROWS_AS(classification_accuracy(m, patches), InvalidArgument);
    CHECK_THROWS_AS(classification_accuracy(m, std::vector<Patch>{}), InvalidArgument);
}

}
