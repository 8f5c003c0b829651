#include <doctest.h>

#include <cmath>

#include "engage/rng.hpp"
#include "engage/signal.hpp"
#include "oracles.hpp"

using namespace engage;

namespace {

AnnotationTrace make_trace(const std::string& annotator, std::vector<double> samples,
                           const std::string& video = "v1",
                           Dimension dim = Dimension::arousal) {
    AnnotationTrace t;
    t.video_id = video;
    t.dimension = dim;
    t.annotator_id = annotator;
    t.samples = Eigen::Map<Eigen::VectorXd>(samples.data(),
                                            static_cast<Eigen::Index>(samples.size()));
    return t;
}

} // namespace

TEST_CASE("align_traces truncates to the minimum common length") {
    std::vector<AnnotationTrace> same = {make_trace("a1", std::vector<double>(100, 1.0)),
                                         make_trace("a2", std::vector<double>(100, 2.0)),
                                         make_trace("a3", std::vector<double>(100, 3.0))};
    auto aligned = align_traces(same);
    for (const auto& t : aligned) CHECK(t.samples.size() == 100);

    std::vector<AnnotationTrace> ragged = {make_trace("a1", std::vector<double>(100, 1.0)),
                                           make_trace("a2", std::vector<double>(98, 2.0)),
                                           make_trace("a3", std::vector<double>(99, 3.0))};
    aligned = align_traces(ragged);
    for (const auto& t : aligned) CHECK(t.samples.size() == 98);
    CHECK(aligned[0].annotator_id == "a1");
    CHECK(aligned[2].annotator_id == "a3");

    auto single = align_traces({make_trace("a1", {1, 2, 3, 4, 5, 6, 7})});
    CHECK(single.size() == 1);
    CHECK(single[0].samples.size() == 7);
}

TEST_CASE("align_traces error cases") {
    CHECK_THROWS_WITH_AS(align_traces({}), "no traces", std::invalid_argument);
    std::vector<AnnotationTrace> mixed = {make_trace("a1", {1, 2, 3}, "v1"),
                                          make_trace("a2", {1, 2, 3}, "v2")};
    CHECK_THROWS_WITH_AS(align_traces(mixed), "heterogeneous traces", std::invalid_argument);
    std::vector<AnnotationTrace> dims = {
        make_trace("a1", {1, 2, 3}, "v1", Dimension::arousal),
        make_trace("a2", {1, 2, 3}, "v1", Dimension::valence)};
    CHECK_THROWS_AS(align_traces(dims), std::invalid_argument);
}

TEST_CASE("ewe_fuse identity on identical annotators") {
    std::vector<AnnotationTrace> traces = {make_trace("a1", {1, 2, 3}),
                                           make_trace("a2", {1, 2, 3}),
                                           make_trace("a3", {1, 2, 3})};
    GoldSignal g = ewe_fuse(traces);
    CHECK(g.samples.size() == 3);
    CHECK(g.samples[0] == doctest::Approx(1.0));
    CHECK(g.samples[1] == doctest::Approx(2.0));
    CHECK(g.samples[2] == doctest::Approx(3.0));
    for (const auto& [id, w] : g.annotator_weights) CHECK(w == doctest::Approx(1.0));
}

TEST_CASE("ewe_fuse equal weights reduce to the arithmetic mean") {
    std::vector<AnnotationTrace> traces = {make_trace("a1", {0, 2, 4, 2, 0}),
                                           make_trace("a2", {2, 4, 6, 4, 2})};
    GoldSignal g = ewe_fuse(traces);
    // Both correlate 1.0 with the other, so the fusion is the plain mean.
    for (int i = 0; i < 5; ++i)
        CHECK(g.samples[i] ==
              doctest::Approx(0.5 * (traces[0].samples[i] + traces[1].samples[i])));
}

TEST_CASE("ewe_fuse clips a negatively correlated annotator to weight 0") {
    std::vector<AnnotationTrace> traces = {make_trace("a1", {1, 2, 3}),
                                           make_trace("a2", {1, 2, 3}),
                                           make_trace("a3", {3, 2, 1})};
    GoldSignal g = ewe_fuse(traces);
    CHECK(g.annotator_weights.at("a3") == 0.0);
    CHECK(g.samples[0] == doctest::Approx(1.0));
    CHECK(g.samples[2] == doctest::Approx(3.0));

    // Brute-force leave-one-out weights agree.
    auto ref = oracle::ewe_weights_reference({{1, 2, 3}, {1, 2, 3}, {3, 2, 1}});
    CHECK(g.annotator_weights.at("a1") == doctest::Approx(ref[0]));
    CHECK(g.annotator_weights.at("a2") == doctest::Approx(ref[1]));
    CHECK(g.annotator_weights.at("a3") == doctest::Approx(ref[2]));
}

TEST_CASE("ewe_fuse single trace passes through with weight 1") {
    GoldSignal g = ewe_fuse({make_trace("a1", {5, 6, 7})});
    CHECK(g.samples[2] == 7.0);
    CHECK(g.annotator_weights.at("a1") == 1.0);
}

TEST_CASE("ewe_fuse errors") {
    // Anti-correlated pair: both weights clip to zero.
    std::vector<AnnotationTrace> traces = {make_trace("a1", {1, 2, 3}),
                                           make_trace("a2", {3, 2, 1})};
    CHECK_THROWS_WITH_AS(ewe_fuse(traces), "no reliable annotators", std::runtime_error);

    // Constant trace has undefined correlation -> weight 0, others carry.
    std::vector<AnnotationTrace> with_constant = {make_trace("a1", {1, 2, 3}),
                                                  make_trace("a2", {1, 2, 3}),
                                                  make_trace("a3", {5, 5, 5})};
    GoldSignal g = ewe_fuse(with_constant);
    CHECK(g.annotator_weights.at("a3") == 0.0);
    CHECK(g.samples[0] == doctest::Approx(1.0));
}

TEST_CASE("ewe_fuse output stays within the positively weighted envelope") {
    Rng rng(171);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<AnnotationTrace> traces;
        int n_annotators = 3 + static_cast<int>(rng.uniform_int(0, 2));
        int len = 20 + static_cast<int>(rng.uniform_int(0, 30));
        Eigen::VectorXd base(len);
        for (int i = 0; i < len; ++i) base[i] = rng.uniform(-500, 500);
        for (int a = 0; a < n_annotators; ++a) {
            AnnotationTrace t;
            t.video_id = "v";
            t.annotator_id = "a" + std::to_string(a);
            t.samples = base;
            for (int i = 0; i < len; ++i)
                t.samples[i] = std::clamp(t.samples[i] + rng.normal(0, 60), -1000.0, 1000.0);
            traces.push_back(std::move(t));
        }
        GoldSignal g = ewe_fuse(traces);
        for (int i = 0; i < len; ++i) {
            double lo = 1e300, hi = -1e300;
            for (const auto& t : traces) {
                if (g.annotator_weights.at(t.annotator_id) > 0.0) {
                    lo = std::min(lo, t.samples[i]);
                    hi = std::max(hi, t.samples[i]);
                }
            }
            CHECK(g.samples[i] >= lo - 1e-9);
            CHECK(g.samples[i] <= hi + 1e-9);
        }

        // Permuting trace order leaves the fusion unchanged.
        std::vector<AnnotationTrace> shuffled(traces.rbegin(), traces.rend());
        GoldSignal g2 = ewe_fuse(shuffled);
        CHECK((g.samples - g2.samples).cwiseAbs().maxCoeff() < 1e-12);

        // Common positive rescaling scales the fusion; z-standardized output
        // is identical.
        std::vector<AnnotationTrace> scaled = traces;
        for (auto& t : scaled) t.samples *= 0.5;
        GoldSignal g3 = ewe_fuse(scaled);
        CHECK((g3.samples - 0.5 * g.samples).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((z_standardize(g3.samples) - z_standardize(g.samples)).cwiseAbs().maxCoeff() <
              1e-9);
    }
}

TEST_CASE("z_standardize basics") {
    Eigen::Vector3d x(1, 2, 3);
    Eigen::VectorXd z = z_standardize(x);
    CHECK(z[0] == doctest::Approx(-1.2247).epsilon(1e-4));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK(z[2] == doctest::Approx(1.2247).epsilon(1e-4));

    bool constant = false;
    Eigen::Vector3d c(5, 5, 5);
    Eigen::VectorXd zc = z_standardize(c, &constant);
    CHECK(constant);
    CHECK(zc.norm() == 0.0);

    CHECK_THROWS_AS(z_standardize(Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("z_standardize is idempotent") {
    Rng rng(7);
    Eigen::VectorXd x(200);
    for (int i = 0; i < 200; ++i) x[i] = rng.normal(3.0, 17.0);
    Eigen::VectorXd z1 = z_standardize(x);
    Eigen::VectorXd z2 = z_standardize(z1);
    CHECK((z1 - z2).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::fabs(z1.mean()) < 1e-9);
    CHECK(std::fabs(std::sqrt((z1.array() - z1.mean()).square().mean()) - 1.0) < 1e-9);
}

TEST_CASE("make_gold_signal standardizes the fused result") {
    std::vector<AnnotationTrace> traces = {make_trace("a1", {10, 20, 30, 25, 15}),
                                           make_trace("a2", {12, 22, 28, 27, 13}),
                                           make_trace("a3", {8, 18, 33, 24, 17})};
    GoldSignal g = make_gold_signal(traces);
    CHECK(std::fabs(g.samples.mean()) < 1e-9);
    double sd = std::sqrt((g.samples.array() - g.samples.mean()).square().mean());
    CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_FALSE(g.constant_flag);
}

TEST_CASE("trace validation") {
    AnnotationTrace t = make_trace("a1", {100, -1200, 0});
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = make_trace("a1", {100, -900, 0});
    t.sample_period = 0.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t.sample_period = 0.25;
    CHECK_NOTHROW(t.validate());
}
