#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "engage/csv.hpp"
#include "engage/fixture.hpp"
#include "engage/pipeline.hpp"

using namespace engage;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("engage_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

FixtureSpec small_spec() {
    FixtureSpec spec;
    spec.n_videos = 30;
    spec.min_length = 80;
    spec.max_length = 160;
    return spec;
}

} // namespace

TEST_CASE("fixture generation: files, partition, planted spec") {
    fs::path dir = temp_dir("fixture");
    FixturePaths paths = generate_fixture(11, small_spec(), dir);

    for (const fs::path& p : {paths.traces, paths.metadata, paths.comments,
                              paths.annotated_comments, paths.partition, paths.planted,
                              paths.config})
        CHECK(fs::exists(p));

    csv::Table part = csv::read_file(paths.partition);
    int train = 0, dev = 0, test = 0;
    int c_split = part.require_column("split");
    for (const auto& row : part.rows) {
        if (row[c_split] == "train") ++train;
        else if (row[c_split] == "dev") ++dev;
        else ++test;
    }
    CHECK(train + dev + test == 30);
    CHECK(std::abs(train - 18) <= 1);
    CHECK(std::abs(dev - 6) <= 1);
    CHECK(std::abs(test - 6) <= 1);

    csv::Table meta = csv::read_file(paths.metadata);
    CHECK(meta.rows.size() == 30);
    csv::Table traces = csv::read_file(paths.traces);
    // 30 videos x 3 dimensions x 5 annotators
    std::set<std::string> keys;
    int c_vid = traces.require_column("video_id");
    int c_dim = traces.require_column("dimension");
    int c_ann = traces.require_column("annotator_id");
    for (const auto& row : traces.rows) keys.insert(row[c_vid] + row[c_dim] + row[c_ann]);
    CHECK(keys.size() == 30u * 3u * 5u);
}

TEST_CASE("fixture generation is deterministic per seed") {
    fs::path a = temp_dir("fx_a"), b = temp_dir("fx_b"), c = temp_dir("fx_c");
    generate_fixture(99, small_spec(), a);
    generate_fixture(99, small_spec(), b);
    generate_fixture(100, small_spec(), c);
    for (const char* f : {"traces.csv", "metadata.csv", "comments.csv", "partition.csv"})
        CHECK(slurp(a / f) == slurp(b / f));
    CHECK(slurp(a / "traces.csv") != slurp(c / "traces.csv"));
}

TEST_CASE("fixture rejects degenerate specs") {
    fs::path dir = temp_dir("fx_bad");
    FixtureSpec spec = small_spec();
    spec.n_videos = 10;
    CHECK_THROWS_AS(generate_fixture(1, spec, dir), std::invalid_argument);

    spec = small_spec();
    spec.targets = {{"Lp/d", 5.0, 0.0, {}}}; // zero noise and zero signal
    CHECK_THROWS_AS(generate_fixture(1, spec, dir), std::invalid_argument);
}

TEST_CASE("trace ingestion round-trips through gold CSV") {
    fs::path dir = temp_dir("roundtrip");
    FixturePaths paths = generate_fixture(5, small_spec(), dir);

    auto traces = read_traces_csv(paths.traces, 0.25);
    CHECK(traces.size() == 30u * 3u * 5u);
    for (const auto& t : traces) CHECK(t.sample_period == 0.25);

    auto gold = fuse_stage(traces);
    CHECK(gold.size() == 30u * 3u);
    for (const auto& g : gold) {
        CHECK(std::fabs(g.samples.mean()) < 1e-9);
        CHECK(g.annotator_weights.size() == 5);
    }

    write_gold_csv(dir / "gold.csv", gold);
    auto gold2 = read_gold_csv(dir / "gold.csv");
    REQUIRE(gold2.size() == gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        CHECK(gold2[i].video_id == gold[i].video_id);
        CHECK(gold2[i].dimension == gold[i].dimension);
        CHECK((gold2[i].samples - gold[i].samples).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("config loading resolves relative paths and validates") {
    fs::path dir = temp_dir("config");
    FixturePaths paths = generate_fixture(3, small_spec(), dir);

    ExperimentConfig config = ExperimentConfig::from_file(paths.config);
    CHECK(config.traces_csv == dir / "traces.csv");
    CHECK(config.seed == 3);
    CHECK(config.c_grid.size() == 8);
    CHECK(config.epsilon == 0.1);
    CHECK(config.feature_params.peak_support == 10);
    CHECK_NOTHROW(config.validate());

    config.traces_csv = dir / "missing.csv";
    CHECK_THROWS(config.validate());

    config = ExperimentConfig::from_file(paths.config);
    config.c_grid = {};
    CHECK_THROWS(config.validate());
    config = ExperimentConfig::from_file(paths.config);
    config.methods = {"bogus"};
    CHECK_THROWS(config.validate());
}

TEST_CASE("run(): grid cardinality, rel%% reconstruction, artifacts, determinism") {
    fs::path dir = temp_dir("run");
    FixturePaths paths = generate_fixture(21, small_spec(), dir);

    ExperimentConfig config = ExperimentConfig::from_file(paths.config);
    config.targets = {"Lp/d", "Cp/d"};
    config.combinations = {"A", "V+T"};
    config.out_dir = dir / "out";

    ExperimentReport report = run(config);
    CHECK(report.rows.size() == 2u * 2u * 3u);

    int all_rows = 0;
    for (const auto& row : report.rows) {
        CHECK((row.method == "all" || row.method == "sel." || row.method == "auto."));
        if (row.method == "all") {
            ++all_rows;
            CHECK(row.rel_dev_pct == 0.0);
            continue;
        }
        // rel% must be recomputable from the stored MAEs.
        double all_dev = 0, all_test = 0;
        for (const auto& other : report.rows)
            if (other.method == "all" && other.target == row.target &&
                other.combination == row.combination) {
                all_dev = other.dev_mae;
                all_test = other.test_mae;
            }
        CHECK(std::fabs(rel_change_pct(all_dev, row.dev_mae) - row.rel_dev_pct) < 0.05);
        CHECK(std::fabs(rel_change_pct(all_test, row.test_mae) - row.rel_test_pct) < 0.05);
        CHECK(std::fabs(apply_rel_change(all_dev, row.rel_dev_pct) - row.dev_mae) < 1e-9);
    }
    CHECK(all_rows == 4);

    for (const char* f :
         {"report.json", "features.csv", "gold_signals.csv", "indicators.csv", "mae_rows.csv",
          "correlations_arousal.csv", "correlations_valence.csv", "correlations_trust.csv",
          "correlations_arousal_p.csv", "correlations_arousal.tsv", "ewe_weights.json"})
        CHECK(fs::exists(config.out_dir / f));
    CHECK(fs::exists(config.out_dir / "selection" / "cross_task_arousal.json"));
    CHECK(fs::exists(config.out_dir / "models" / "lpd_A_all.json"));
    CHECK(fs::exists(config.out_dir / "models" / "lpd_A_sel.json"));
    CHECK(fs::exists(config.out_dir / "models" / "lpd_A_auto.json"));
    CHECK(fs::exists(config.out_dir / "selection" / "auto_lpd_A.json"));
    CHECK(!fs::exists(config.out_dir / ".staging"));

    // Same config and seed: the whole output directory is byte-identical,
    // and a parallel run reduces to the same bytes.
    config.out_dir = dir / "out2";
    run(config);
    config.out_dir = dir / "out3";
    config.jobs = 2;
    run(config);

    auto dir_contents = [](const fs::path& root) {
        std::map<std::string, std::string> files;
        for (const auto& entry : fs::recursive_directory_iterator(root))
            if (entry.is_regular_file())
                files[fs::relative(entry.path(), root).string()] = slurp(entry.path());
        return files;
    };
    auto a = dir_contents(dir / "out");
    auto b = dir_contents(dir / "out2");
    auto c = dir_contents(dir / "out3");
    CHECK(a.size() > 10);
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("features.csv carries the exact canonical header") {
    fs::path dir = temp_dir("header");
    FixturePaths paths = generate_fixture(8, small_spec(), dir);
    ExperimentConfig config = ExperimentConfig::from_file(paths.config);
    PipelineData data = prepare(config);
    write_features_csv(dir / "features.csv", data);
    csv::Table t = csv::read_file(dir / "features.csv");
    std::vector<std::string> expected = {"video_id", "dimension"};
    expected.insert(expected.end(), kFeatureNames.begin(), kFeatureNames.end());
    expected.push_back("flags");
    CHECK(t.header == expected);
    CHECK(t.header[18] == "PReDa");
    CHECK(t.rows.size() == data.video_ids.size() * 3);
}

TEST_CASE("stage errors carry the failing stage tag") {
    fs::path dir = temp_dir("stagefail");
    FixturePaths paths = generate_fixture(4, small_spec(), dir);
    ExperimentConfig config = ExperimentConfig::from_file(paths.config);

    // Corrupt the partition: unknown split label.
    csv::Table part = csv::read_file(paths.partition);
    part.rows[0][1] = "validation";
    csv::write_file(paths.partition, part);

    config.out_dir = dir / "out";
    try {
        run(config);
        FAIL("expected StageError");
    } catch (const StageError& e) {
        CHECK(e.stage == "partition");
        CHECK(std::string(e.what()).find("partition") != std::string::npos);
    }
    // Partial artifacts were cleaned up.
    CHECK(!fs::exists(config.out_dir / ".staging"));
    CHECK(!fs::exists(config.out_dir / "report.json"));
}

TEST_CASE("format_mae matches the mixed-precision convention") {
    CHECK(format_mae(231.8456) == "231.846");
    CHECK(format_mae(1.6121) == "1.612");
    CHECK(format_mae(0.288) == "0.288");
    CHECK(format_mae(0.154) == "0.154");
    CHECK(format_mae(0.0123456) == "0.0123");
}

TEST_CASE("table-2 style reconstruction from relative changes") {
    // all = 1.61 with +17.6% / +24.0% reported improvements.
    CHECK(apply_rel_change(1.61, 17.6) == doctest::Approx(1.33).epsilon(0.008));
    CHECK(apply_rel_change(1.61, 24.0) == doctest::Approx(1.23).epsilon(0.008));
}
