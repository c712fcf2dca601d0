#include <set>

#include <catch2/catch_amalgamated.hpp>

#include "judgeagg/robustness.hpp"
#include "judgeagg/synthetic.hpp"

using namespace judgeagg;

namespace {

std::map<PersonaId, PersonaJudgment> uniform_judgments(int score) {
    std::map<PersonaId, PersonaJudgment> out;
    for (PersonaId p : kAllPersonas) out[p] = PersonaJudgment{p, "note", score};
    return out;
}

ContaminationPattern pattern_of(ContaminationPattern::Kind kind, double fraction,
                                std::uint64_t seed) {
    ContaminationPattern pattern;
    pattern.kind = kind;
    pattern.offset = 2.0;
    pattern.sigma = 3.0;
    pattern.fraction = fraction;
    pattern.seed = seed;
    return pattern;
}

}  // namespace

TEST_CASE("scale compression maps the endpoints onto [2, 8]") {
    auto zeroes = contaminate_persona_scores(
        uniform_judgments(0), pattern_of(ContaminationPattern::Kind::ScaleCompression, 1.0, 1),
        kAllPersonas, "r");
    auto tens = contaminate_persona_scores(
        uniform_judgments(10), pattern_of(ContaminationPattern::Kind::ScaleCompression, 1.0, 1),
        kAllPersonas, "r");
    auto fives = contaminate_persona_scores(
        uniform_judgments(5), pattern_of(ContaminationPattern::Kind::ScaleCompression, 1.0, 1),
        kAllPersonas, "r");
    for (PersonaId p : kAllPersonas) {
        CHECK(zeroes.at(p).score == 2);
        CHECK(tens.at(p).score == 8);
        CHECK(fives.at(p).score == 5);  // fixed point of the affine map
    }
}

TEST_CASE("systematic bias clamps at the scale boundary") {
    auto nines = contaminate_persona_scores(
        uniform_judgments(9), pattern_of(ContaminationPattern::Kind::SystematicBias, 1.0, 2),
        kAllPersonas, "r");
    for (PersonaId p : kAllPersonas) CHECK(nines.at(p).score == 10);
    auto pattern = pattern_of(ContaminationPattern::Kind::SystematicBias, 1.0, 2);
    pattern.offset = -2.0;
    auto ones = contaminate_persona_scores(uniform_judgments(1), pattern, kAllPersonas, "r");
    for (PersonaId p : kAllPersonas) CHECK(ones.at(p).score == 0);
}

TEST_CASE("random noise stays on the integer grid inside [0, 10]") {
    auto pattern = pattern_of(ContaminationPattern::Kind::RandomNoise, 1.0, 3);
    for (int base : {0, 5, 10}) {
        for (int rec = 0; rec < 20; ++rec) {
            auto noisy = contaminate_persona_scores(uniform_judgments(base), pattern,
                                                    kAllPersonas, "rec" + std::to_string(rec));
            for (PersonaId p : kAllPersonas) {
                CHECK(noisy.at(p).score >= 0);
                CHECK(noisy.at(p).score <= 10);
            }
        }
    }
    // Deterministic per (seed, record, persona); varying per record.
    auto a = contaminate_persona_scores(uniform_judgments(5), pattern, kAllPersonas, "rec1");
    auto b = contaminate_persona_scores(uniform_judgments(5), pattern, kAllPersonas, "rec1");
    CHECK(a == b);
    auto c = contaminate_persona_scores(uniform_judgments(5), pattern, kAllPersonas, "rec2");
    bool any_different = false;
    for (PersonaId p : kAllPersonas) any_different |= (a.at(p).score != c.at(p).score);
    CHECK(any_different);
}

TEST_CASE("contamination touches exactly the seeded persona subset") {
    auto pattern = pattern_of(ContaminationPattern::Kind::SystematicBias, 0.5, 7);
    auto selected = contaminated_personas(pattern, kAllPersonas);
    CHECK(selected.size() == 7);  // floor(0.5 * 14)
    std::map<PersonaId, PersonaJudgment> original;
    Rng rng(8);
    for (PersonaId p : kAllPersonas) {
        original[p] = PersonaJudgment{p, "analysis " + std::string(persona_name(p)),
                                      static_cast<int>(rng.uniform_below(7))};
    }
    auto contaminated = contaminate_persona_scores(original, pattern, kAllPersonas, "r");
    std::set<PersonaId> touched(selected.begin(), selected.end());
    for (PersonaId p : kAllPersonas) {
        if (touched.contains(p)) {
            CHECK(contaminated.at(p).score == std::min(original.at(p).score + 2, 10));
        } else {
            // Untouched personas pass through bit-identical.
            CHECK(contaminated.at(p) == original.at(p));
        }
        CHECK(contaminated.at(p).analysis == original.at(p).analysis);
    }
    // The same annotators are selected for every record under one seed.
    CHECK(contaminated_personas(pattern, kAllPersonas) == selected);
}

TEST_CASE("fraction zero leaves the judgments untouched") {
    auto original = uniform_judgments(6);
    for (auto kind :
         {ContaminationPattern::Kind::SystematicBias, ContaminationPattern::Kind::RandomNoise,
          ContaminationPattern::Kind::ScaleCompression}) {
        auto out = contaminate_persona_scores(original, pattern_of(kind, 0.0, 9), kAllPersonas,
                                              "r");
        CHECK(out == original);
    }
}

TEST_CASE("contamination pattern validation") {
    auto bad_fraction = pattern_of(ContaminationPattern::Kind::RandomNoise, 1.5, 1);
    CHECK_THROWS_AS(
        contaminate_persona_scores(uniform_judgments(5), bad_fraction, kAllPersonas, "r"),
        ConfigError);
    auto bad_offset = pattern_of(ContaminationPattern::Kind::SystematicBias, 0.5, 1);
    bad_offset.offset = 3.0;
    CHECK_THROWS_AS(
        contaminate_persona_scores(uniform_judgments(5), bad_offset, kAllPersonas, "r"),
        ConfigError);
}

TEST_CASE("strength zero is the identity for every transform") {
    for (auto kind : kAllBiasKinds) {
        for (int i = 0; i <= 40; ++i) {
            double score = 4.0 * i / 40.0;
            CHECK(bias_transform(score, kind, 0.0) == Catch::Approx(score).margin(1e-12));
        }
    }
}

TEST_CASE("bottom-heavy at full strength matches the power-curve oracle") {
    // gamma = 4: score 2 -> 4 * (0.5)^4.
    CHECK(bias_transform(2.0, BiasTransform::Kind::BottomHeavy, 1.0) == Catch::Approx(0.25));
    CHECK(bias_transform(4.0, BiasTransform::Kind::BottomHeavy, 1.0) == Catch::Approx(4.0));
    CHECK(bias_transform(0.0, BiasTransform::Kind::BottomHeavy, 1.0) == Catch::Approx(0.0));
    // Top-heavy is its mirror through the exponent.
    CHECK(bias_transform(2.0, BiasTransform::Kind::TopHeavy, 1.0) ==
          Catch::Approx(4.0 * std::pow(0.5, 0.25)));
}

TEST_CASE("middle-heavy contracts toward the midpoint per its affine formula") {
    // Full strength: slope 1 - 0.75 = 0.25 about the midpoint 2.
    CHECK(bias_transform(0.0, BiasTransform::Kind::MiddleHeavy, 1.0) == Catch::Approx(1.5));
    CHECK(bias_transform(4.0, BiasTransform::Kind::MiddleHeavy, 1.0) == Catch::Approx(2.5));
    CHECK(bias_transform(2.0, BiasTransform::Kind::MiddleHeavy, 1.0) == Catch::Approx(2.0));
    CHECK(bias_transform(2.0, BiasTransform::Kind::MiddleHeavy, 0.4) == Catch::Approx(2.0));
}

TEST_CASE("systematic shifts translate and clamp") {
    CHECK(bias_transform(1.0, BiasTransform::Kind::SystematicShiftPositive, 1.0) == 3.0);
    CHECK(bias_transform(3.0, BiasTransform::Kind::SystematicShiftPositive, 1.0) == 4.0);
    CHECK(bias_transform(3.0, BiasTransform::Kind::SystematicShiftNegative, 1.0) == 1.0);
    CHECK(bias_transform(1.0, BiasTransform::Kind::SystematicShiftNegative, 1.0) == 0.0);
    CHECK(bias_transform(1.0, BiasTransform::Kind::SystematicShiftNegative, 0.25) == 0.5);
}

TEST_CASE("transforms are strictly increasing away from clamp saturation") {
    // 401-point grid over [0, 4]; shifts are exempt only where they clamp.
    for (auto kind : kAllBiasKinds) {
        for (double strength : {0.25, 0.5, 0.75, 1.0}) {
            double prev = bias_transform(0.0, kind, strength);
            for (int i = 1; i <= 400; ++i) {
                double x = 4.0 * i / 400.0;
                double value = bias_transform(x, kind, strength);
                bool clamped =
                    (kind == BiasTransform::Kind::SystematicShiftPositive && value >= 4.0) ||
                    (kind == BiasTransform::Kind::SystematicShiftNegative && value <= 0.0);
                if (clamped) {
                    CHECK(value >= prev);
                } else {
                    INFO(bias_kind_name(kind) << " strength " << strength << " at x " << x);
                    CHECK(value > prev);
                }
                prev = value;
            }
        }
    }
}

TEST_CASE("transforms preserve within-column ranking in their interiors") {
    Rng rng(17);
    for (auto kind : kAllBiasKinds) {
        // Shifts saturate at the scale boundary; sample inside the region
        // they leave unclamped at this strength.
        const bool shift = kind == BiasTransform::Kind::SystematicShiftPositive ||
                           kind == BiasTransform::Kind::SystematicShiftNegative;
        const double lo = shift ? 1.3 : 0.05;
        const double hi = shift ? 2.7 : 3.95;
        std::vector<double> scores;
        for (int i = 0; i < 100; ++i) scores.push_back(rng.uniform(lo, hi));
        std::vector<double> transformed;
        for (double s : scores) transformed.push_back(bias_transform(s, kind, 0.6));
        // Spearman rho of a strictly monotone map is exactly 1: compare ranks.
        auto rank_order = [](const std::vector<double>& v) {
            std::vector<std::size_t> idx(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(),
                      [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
            return idx;
        };
        CHECK(rank_order(scores) == rank_order(transformed));
    }
}

TEST_CASE("refitting absorbs a monotone distortion of one judge column") {
    // Calibration absorption: a strictly increasing transform of a single
    // judge's scale moves training R^2 of refitted linear/GAM models by at
    // most 0.02 on additive synthetic data.
    SyntheticSpec spec;
    spec.kind = SyntheticSpec::Kind::Linear;
    spec.n = 600;
    spec.seed = 24;
    auto examples = generate_synthetic_examples(spec);
    auto train_r2 = [&](const std::vector<LabeledExample>& data, bool gam) {
        AggregatorModel model = gam ? AggregatorModel{fit_gam(data, GamConfig{6, 1.0})}
                                    : AggregatorModel{fit_linear(data)};
        return evaluate_r2(model, data);
    };
    for (bool gam : {false, true}) {
        double baseline = train_r2(examples, gam);
        for (auto kind : {BiasTransform::Kind::BottomHeavy, BiasTransform::Kind::TopHeavy,
                          BiasTransform::Kind::MiddleHeavy}) {
            // The GAM's splines re-learn any of these curves outright; the
            // linear refit absorbs affine recalibrations at any strength and
            // the power curves up to moderate strength.
            double strength = 1.0;
            if (!gam && kind != BiasTransform::Kind::MiddleHeavy) strength = 0.4;
            for (std::size_t judge : {std::size_t{0}, std::size_t{4}}) {
                auto transformed = examples;
                for (auto& ex : transformed) {
                    ex.features[judge] = bias_transform(ex.features[judge], kind, strength);
                }
                double refit = train_r2(transformed, gam);
                INFO((gam ? "gam" : "linear") << " " << bias_kind_name(kind) << " judge "
                                              << judge);
                CHECK(std::abs(refit - baseline) < 0.02);
            }
        }
    }
}

TEST_CASE("bias sweep at strength zero matches the untransformed fit") {
    SyntheticSpec spec;
    spec.kind = SyntheticSpec::Kind::Additive;
    spec.n = 500;
    spec.seed = 18;
    auto examples = generate_synthetic_examples(spec);
    Split split = split_dataset(examples, SplitSpec{0.8, 19});

    SweepFitConfig fit;
    fit.gam = GamConfig{6, 10.0};
    std::vector<double> strengths = {0.0, 1.0};
    std::vector<BiasTransform::Kind> transforms = {BiasTransform::Kind::SystematicShiftNegative};
    std::vector<SweepModel> models = {SweepModel::Linear, SweepModel::TenJudgeMean};
    SweepResult result =
        run_bias_sweep(split.train, split.test, strengths, transforms, models, 20, fit);
    REQUIRE(result.points.size() == 4);

    LinearModel baseline = fit_linear(split.train);
    double baseline_r2 = evaluate_r2(AggregatorModel{baseline}, split.test);
    for (const auto& point : result.points) {
        if (point.axis == 0.0 && point.model == "linear") {
            CHECK(point.r2 == baseline_r2);
        }
    }
}

TEST_CASE("contamination sweep reproduces the clean baseline at fraction zero") {
    SyntheticSpec spec;
    spec.kind = SyntheticSpec::Kind::Additive;
    spec.n = 400;
    spec.seed = 21;
    auto records = generate_synthetic_records(spec);
    const std::uint64_t label_seed = 77;
    auto labeled =
        build_labeled_examples(records, GroundTruthStrategy::mixed(label_seed), kAllPersonas);
    Split split = split_dataset(labeled, SplitSpec{0.8, 22});
    // Keep the sweep's training rows in split order so the fraction-0 arm
    // reproduces the baseline fit bit for bit.
    std::map<std::string, const DatasetRecord*> by_id;
    for (const auto& record : records) by_id[record.record_id] = &record;
    std::vector<DatasetRecord> train_records;
    for (const auto& ex : split.train) train_records.push_back(*by_id.at(ex.record_id));

    SweepFitConfig fit;
    fit.gam = GamConfig{6, 10.0};
    std::vector<double> fractions = {0.0, 0.5};
    std::vector<ContaminationPattern::Kind> patterns = {
        ContaminationPattern::Kind::ScaleCompression};
    std::vector<SweepModel> models = {SweepModel::Linear, SweepModel::Gam,
                                      SweepModel::TenJudgeMean};
    SweepResult result =
        run_contamination_sweep(train_records, split.test, fractions, patterns, models,
                                kAllPersonas, label_seed, 23, fit);
    // Heuristics do not train on preference data, so they are excluded.
    for (const auto& point : result.points) CHECK(point.model != "ten_judge_mean");
    REQUIRE(result.points.size() == 4);

    LinearModel clean_linear = fit_linear(split.train);
    double clean_linear_r2 = evaluate_r2(AggregatorModel{clean_linear}, split.test);
    GamModel clean_gam = fit_gam(split.train, fit.gam);
    double clean_gam_r2 = evaluate_r2(AggregatorModel{clean_gam}, split.test);
    for (const auto& point : result.points) {
        if (point.axis != 0.0) continue;
        if (point.model == "linear") CHECK(point.r2 == clean_linear_r2);
        if (point.model == "gam") CHECK(point.r2 == clean_gam_r2);
    }

    // Reproducibility: identical seeds give identical sweeps.
    SweepResult again =
        run_contamination_sweep(train_records, split.test, fractions, patterns, models,
                                kAllPersonas, label_seed, 23, fit);
    REQUIRE(again.points.size() == result.points.size());
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        CHECK(again.points[i].r2 == result.points[i].r2);
    }
}
