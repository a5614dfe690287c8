#include <doctest.h>

#include "goldspot/error.hpp"
#include "goldspot/experiment.hpp"
#include "helpers.hpp"

using namespace goldspot;

namespace {

RunConfig small_config() {
    RunConfig c = RunConfig::preset("db1");
    c.layer_sizes = {30, 20};
    c.pretrain_epochs = 5;
    c.finetune_epochs = 40;
    c.batch_size = 20;
    c.thresholds = {10, 20, 30, 40, 50};
    c.folds = 2;
    c.reps = 1;
    return c;
}

std::vector<AnnotatedImage> small_corpus(std::uint64_t seed, std::size_t n = 6) {
    SynthSpec spec;
    spec.width = spec.height = 160;
    spec.n_particles = 12;
    spec.n_distractors = 8;
    spec.seed = seed;
    return testing::synth_corpus(spec, n);
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("magnification presets") {
    const RunConfig db1 = RunConfig::preset("db1");
    CHECK(db1.radius_set == std::vector<double>{3, 4, 5});
    CHECK(db1.radius == 4.0);
    CHECK(db1.batch_size == 1000);
    CHECK(db1.thresholds == std::vector<double>{10, 15, 20, 25});

    const RunConfig db2 = RunConfig::preset("db2");
    CHECK(db2.radius_set == std::vector<double>{3, 5, 7, 9});
    CHECK(db2.radius == 7.0);
    CHECK(db2.match_radius == 7.0);
    CHECK(db2.batch_size == 100);

    const RunConfig db3 = RunConfig::preset("db3");
    CHECK(db3.thresholds.size() == 9);
    CHECK(db3.thresholds.front() == 5.0);
    CHECK(db3.thresholds.back() == 45.0);

    const RunConfig db4 = RunConfig::preset("db4");
    CHECK(db4.radius_set == std::vector<double>{9, 11, 13});
    CHECK(db4.radius == 11.0);
    CHECK(db4.thresholds.back() == 55.0);
    for (const char* m : {"db1", "db2", "db3", "db4"}) CHECK_NOTHROW(RunConfig::preset(m).validate());
    CHECK_THROWS_AS(RunConfig::preset("db5"), InvalidArgument);
}

TEST_CASE("JSON overrides") {
    RunConfig c = RunConfig::preset("db1");
    c.apply_json(R"({"layer_sizes":[50,40],"reps":3,"thresholds":[5,6]})");
    CHECK(c.layer_sizes == std::vector<std::size_t>{50, 40});
    CHECK(c.reps == 3);
    CHECK(c.thresholds == std::vector<double>{5, 6});

    RunConfig m = RunConfig::preset("db1");
    m.apply_json(R"({"magnification":"db3"})");
    CHECK(m.radius == 9.0);
    CHECK(m.magnification == "db3");

    CHECK_THROWS_WITH_AS(c.apply_json(R"({"learning_rate":0.1})"), doctest::Contains("unknown config key 'learning_rate'"),
                         FormatError);
    CHECK_THROWS_AS(c.apply_json(R"({"reps":"many"})"), FormatError);
    CHECK_THROWS_AS(c.apply_json("[1,2]"), FormatError);
    CHECK_THROWS_AS(c.apply_json("{\"reps\":"), FormatError);
}

TEST_CASE("configs round-trip through JSON") {
    RunConfig c = RunConfig::preset("db2");
    c.layer_sizes = {7, 3};
    c.corruption = 0.25;
    c.grid = true;
    c.seed = 99;
    RunConfig back = RunConfig::preset("db1");
    back.apply_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.radius_set == c.radius_set);
    CHECK(back.corruption == 0.25);
}

TEST_CASE("validation") {
    RunConfig c = RunConfig::preset("db1");
    c.radius = 2.5;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = RunConfig::preset("db1");
    c.corruption = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = RunConfig::preset("db1");
    c.layer_sizes = {};
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c = RunConfig::preset("db1");
    c.thresholds = {};
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("training configs carry the seed") {
    const RunConfig c = small_config();
    const TrainConfig p = c.pretrain_config(42);
    CHECK(p.seed == 42);
    CHECK(p.epochs == 5);
    CHECK(p.learning_rate == c.pretrain_lr);
    CHECK(c.finetune_config(3).learning_rate == c.finetune_lr);
}

TEST_CASE("grid search breaks ties toward the smaller rates") {
    RunConfig c = small_config();
    c.pretrain_epochs = 0;
    c.finetune_epochs = 0;
    const auto corpus = small_corpus(1, 4);
    const std::vector<std::size_t> all{0, 1, 2, 3};
    const LabeledSet train = patches_for(corpus, all, c, 1);
    const GridResult g = grid_search(train, c, 1);
    CHECK(g.cells.size() == 4);
    for (const auto& cell : g.cells) CHECK(cell.accuracy == g.cells.front().accuracy);
    CHECK(g.pretrain_lr == 0.001);
    CHECK(g.finetune_lr == 0.01);
}

TEST_CASE("radius selection skips radii the bank cannot probe") {
    RunConfig c = small_config();
    const auto corpus = small_corpus(2, 4);
    c.radius_set = {2, 4, 8};
    const double r = select_radius(corpus, c, 3);
    CHECK((r == 4.0 || r == 8.0));
    CHECK(select_radius(corpus, c, 3) == r);
    c.radius_set = {2, 4};
    CHECK(select_radius(corpus, c, 3) == 4.0);
    c.radius_set = {2.5};
    CHECK_THROWS_AS(select_radius(corpus, c, 3), InvalidArgument);
}

TEST_CASE("pipeline runs are reproducible") {
    const auto corpus = small_corpus(3);
    const RunConfig c = small_config();
    const PipelineRun a = run_pipeline(corpus, c, 7);
    const PipelineRun b = run_pipeline(corpus, c, 7);
    CHECK(to_json(a.model) == to_json(b.model));
    CHECK(to_json(a.combined) == to_json(b.combined));
    CHECK(to_json(a.detector) == to_json(b.detector));
    CHECK(a.combined.accuracy.has_value());
    CHECK(a.detector.pr_curve.size() == 5);
    CHECK_FALSE(to_json(run_pipeline(corpus, c, 8).model) == to_json(a.model));
}

TEST_CASE("a supplied model or trainer replaces training") {
    const auto corpus = small_corpus(4);
    const RunConfig c = small_config();
    const SdaModel fixed = SdaModel::initialize(20, c.layer_sizes, 5);
    const PipelineRun with_model = run_pipeline(corpus, c, 1, &fixed);
    CHECK(with_model.model.same_parameters(fixed));

    std::size_t calls = 0;
    const Trainer trainer = [&](const LabeledSet& train, std::uint64_t seed) {
        ++calls;
        CHECK(train.count(Label::particle) == train.count(Label::background));
        return SdaModel::initialize(20, c.layer_sizes, seed);
    };
    const PipelineRun with_trainer = run_pipeline(corpus, c, 2, nullptr, trainer);
    CHECK(calls == 1);
    CHECK(with_trainer.model.same_parameters(SdaModel::initialize(20, c.layer_sizes, 2)));

    const SdaModel wrong_side = SdaModel::initialize(10, c.layer_sizes, 5);
    CHECK_THROWS_AS(run_pipeline(corpus, c, 1, &wrong_side), DimensionError);
}

TEST_CASE("the classifier filters false positives on clutter") {
    const auto corpus = small_corpus(5, 10);
    RunConfig c = small_config();
    c.layer_sizes = {60, 60};
    c.pretrain_epochs = 20;
    c.finetune_epochs = 150;
    const PipelineRun run = run_pipeline(corpus, c, 1);
    for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
        const PrPoint& log = run.detector.pr_curve[i];
        const PrPoint& sda = run.combined.pr_curve[i];
        CHECK(sda.precision >= log.precision);
        CHECK(log.recall - sda.recall <= 0.05);
    }
}

}
