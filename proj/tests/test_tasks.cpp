#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "petnn/tasks.hpp"

using namespace petnn;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "petnn_task_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("adding problem construction") {
    Rng rng(1);
    const SequenceBatch batch = gen_adding_problem(rng, 200, 12);
    REQUIRE(batch.size() == 200);
    CHECK(batch.kind == TaskKind::regression);
    CHECK(batch.feature_dim() == 2);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        int markers = 0;
        double marked_sum = 0.0;
        for (std::size_t t = 0; t < 12; ++t) {
            const double m = batch.inputs[i](t, 1);
            CHECK((m == 0.0 || m == 1.0));
            if (m == 1.0) {
                ++markers;
                marked_sum += batch.inputs[i](t, 0);
            }
        }
        CHECK(markers == 2);
        CHECK(batch.targets(i, 0) == marked_sum);
        CHECK(batch.targets(i, 0) >= 0.0);
        CHECK(batch.targets(i, 0) <= 2.0);
    }
}

TEST_CASE("adding problem target variance matches the analytic value") {
    // Var(U+U') = 2/12; Monte Carlo estimate should land near it
    Rng rng(2);
    const SequenceBatch batch = gen_adding_problem(rng, 20000, 10);
    double mean = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) mean += batch.targets(i, 0);
    mean /= static_cast<double>(batch.size());
    double var = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double d = batch.targets(i, 0) - mean;
        var += d * d;
    }
    var /= static_cast<double>(batch.size());
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(var == doctest::Approx(1.0 / 6.0).epsilon(0.05));
}

TEST_CASE("adding problem rejects too-short sequences") {
    Rng rng(3);
    CHECK_THROWS_AS(gen_adding_problem(rng, 1, 1), std::invalid_argument);
}

TEST_CASE("first token recall basics") {
    Rng rng(4);
    const SequenceBatch batch = gen_first_token_recall(rng, 100, 1, 4);
    CHECK(batch.kind == TaskKind::classification);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        // length-1 sequences: the label is trivially recoverable from step 0
        std::size_t hot = 99;
        for (std::size_t c = 0; c < 4; ++c)
            if (batch.inputs[i](0, c) == 1.0) hot = c;
        CHECK(static_cast<int>(hot) == batch.labels[i]);
    }
}

TEST_CASE("first token recall label distribution is uniform within 3 sigma") {
    Rng rng(5);
    const std::size_t n = 10000, k = 4;
    const SequenceBatch batch = gen_first_token_recall(rng, n, 5, k);
    std::vector<std::size_t> counts(k, 0);
    for (int label : batch.labels) counts[static_cast<std::size_t>(label)]++;
    const double expect = static_cast<double>(n) / static_cast<double>(k);
    const double sigma = std::sqrt(static_cast<double>(n) * (1.0 / k) * (1.0 - 1.0 / k));
    for (std::size_t c = 0; c < k; ++c)
        CHECK(std::abs(static_cast<double>(counts[c]) - expect) <= 3.0 * sigma);
}

TEST_CASE("every recall token is one-hot") {
    Rng rng(6);
    const SequenceBatch batch = gen_first_token_recall(rng, 50, 7, 5);
    for (const Matrix& seq : batch.inputs)
        for (std::size_t t = 0; t < seq.rows; ++t) {
            double row_sum = 0.0;
            for (std::size_t c = 0; c < seq.cols; ++c) {
                CHECK((seq(t, c) == 0.0 || seq(t, c) == 1.0));
                row_sum += seq(t, c);
            }
            CHECK(row_sum == 1.0);
        }
}

TEST_CASE("distractor fraction zero reduces to first token recall") {
    Rng a(7), b(7);
    const SequenceBatch plain = gen_first_token_recall(a, 40, 9, 3);
    const SequenceBatch with = gen_distractor_classification(b, 40, 9, 3, 0.0);
    REQUIRE(plain.size() == with.size());
    CHECK(plain.labels == with.labels);
    for (std::size_t i = 0; i < plain.size(); ++i)
        CHECK(plain.inputs[i].data == with.inputs[i].data);
}

TEST_CASE("distractor labels survive shuffling the tails between sequences") {
    Rng rng(8);
    SequenceBatch batch = gen_distractor_classification(rng, 60, 30, 4, 0.8);
    // rotate every post-signal token by one sequence; labels must still be
    // decodable from step 0 alone
    for (std::size_t t = 1; t < 30; ++t)
        for (std::size_t c = 0; c < 4; ++c) {
            const double first = batch.inputs[0](t, c);
            for (std::size_t i = 0; i + 1 < batch.size(); ++i)
                batch.inputs[i](t, c) = batch.inputs[i + 1](t, c);
            batch.inputs[batch.size() - 1](t, c) = first;
        }
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::size_t hot = 99;
        for (std::size_t c = 0; c < 4; ++c)
            if (batch.inputs[i](0, c) == 1.0) hot = c;
        CHECK(static_cast<int>(hot) == batch.labels[i]);
    }
}

TEST_CASE("distractor block contains a repeated wrong class") {
    Rng rng(9);
    const std::size_t length = 300;
    const SequenceBatch batch = gen_distractor_classification(rng, 20, length, 4, 0.9);
    // with fraction 0.9 the interfering half-block alone spans >100 steps, so
    // some class other than the label must repeat massively
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::vector<std::size_t> counts(4, 0);
        for (std::size_t t = 1; t < length; ++t)
            for (std::size_t c = 0; c < 4; ++c)
                if (batch.inputs[i](t, c) == 1.0) counts[c]++;
        std::size_t top_class = 0;
        for (std::size_t c = 1; c < 4; ++c)
            if (counts[c] > counts[top_class]) top_class = c;
        CHECK(static_cast<int>(top_class) != batch.labels[i]);
        CHECK(counts[top_class] >= 100);
    }
}

TEST_CASE("generators are deterministic in the seed") {
    Rng a(10), b(10);
    const SequenceBatch x = gen_distractor_classification(a, 10, 20, 3, 0.5);
    const SequenceBatch y = gen_distractor_classification(b, 10, 20, 3, 0.5);
    CHECK(x.labels == y.labels);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.inputs[i].data == y.inputs[i].data);
}

TEST_CASE("noise-free sinusoid is periodic") {
    Rng rng(11);
    ForecastSeriesSpec spec;
    spec.n_points = 240;
    spec.components = {{1.0, 24.0, 0.3}};
    spec.noise_sigma = 0.0;
    const Matrix series = gen_synthetic_forecast(rng, spec);
    for (std::size_t t = 0; t + 24 < series.rows; ++t)
        CHECK(series(t, 0) == doctest::Approx(series(t + 24, 0)).epsilon(1e-9));
}

TEST_CASE("synthetic forecast series round-trips through csv bit-exactly") {
    Rng rng(12);
    ForecastSeriesSpec spec;
    spec.n_points = 100;
    spec.components = {{1.0, 24.0, 0.0}, {0.5, 7.0, 1.1}};
    spec.trend_slope = 0.01;
    spec.noise_sigma = 0.3;
    const Matrix series = gen_synthetic_forecast(rng, spec);
    const auto path = temp_file("roundtrip.csv");
    write_csv_series(path, {"y"}, series);
    const CsvSeries loaded = load_csv_series(path);
    REQUIRE(loaded.values.rows == series.rows);
    REQUIRE(loaded.feature_names == std::vector<std::string>{"y"});
    CHECK(loaded.values.data == series.data);
}

TEST_CASE("csv loader handles the date column and preserves order") {
    const auto path = temp_file("small.csv");
    std::ofstream(path) << "date,a,b\n2020-01-01,1.5,2\n2020-01-02,-3,4.25\n2020-01-03,5,6\n";
    const CsvSeries series = load_csv_series(path);
    CHECK(series.feature_names == std::vector<std::string>{"a", "b"});
    REQUIRE(series.values.rows == 3);
    REQUIRE(series.values.cols == 2);
    CHECK(series.values(0, 0) == 1.5);
    CHECK(series.values(1, 1) == 4.25);
    CHECK(series.values(2, 0) == 5.0);
}

TEST_CASE("csv loader parses an ETT-style header with 7 features") {
    const auto path = temp_file("ett.csv");
    std::ofstream(path) << "date,HUFL,HULL,MUFL,MULL,LUFL,LULL,OT\n"
                        << "2016-07-01 00:00:00,5.827,2.009,1.599,0.462,4.203,1.340,30.531\n"
                        << "2016-07-01 01:00:00,5.693,2.076,1.492,0.426,4.142,1.371,27.787\n";
    const CsvSeries series = load_csv_series(path);
    CHECK(series.feature_names.size() == 7);
    CHECK(series.values.cols == 7);
    CHECK(series.values(0, 6) == 30.531);
}

TEST_CASE("csv loader errors carry line numbers") {
    SUBCASE("ragged row") {
        const auto path = temp_file("ragged.csv");
        std::ofstream(path) << "a,b\n1,2\n3\n";
        CHECK_THROWS_WITH_AS(load_csv_series(path), doctest::Contains(":3"),
                             std::invalid_argument);
    }
    SUBCASE("non-numeric cell") {
        const auto path = temp_file("text.csv");
        std::ofstream(path) << "a,b\n1,2\n3,potato\n";
        CHECK_THROWS_WITH_AS(load_csv_series(path), doctest::Contains("potato"),
                             std::invalid_argument);
    }
    SUBCASE("empty file") {
        const auto path = temp_file("empty.csv");
        std::ofstream(path) << "";
        CHECK_THROWS_AS(load_csv_series(path), std::invalid_argument);
    }
    SUBCASE("header only") {
        const auto path = temp_file("header_only.csv");
        std::ofstream(path) << "a,b\n";
        CHECK_THROWS_AS(load_csv_series(path), std::invalid_argument);
    }
}

TEST_CASE("window_and_split keeps train windows inside the train range") {
    Matrix series(10, 1);
    for (std::size_t t = 0; t < 10; ++t) series(t, 0) = static_cast<double>(t);
    WindowSpec window{2, 1, 1};
    SplitSpec split;
    split.ratios[0] = 0.6;
    split.ratios[1] = 0.2;
    split.ratios[2] = 0.2;
    const WindowedSplits out = window_and_split(series, window, split, {0});
    REQUIRE(out.train.size() == 4);  // 6 - 2 - 1 + 1
    for (std::size_t i = 0; i < out.train.size(); ++i) {
        for (std::size_t t = 0; t < 2; ++t) CHECK(out.train.inputs[i](t, 0) <= 5.0);
        CHECK(out.train.targets(i, 0) <= 5.0);  // boundary rule: stays in [0,6)
    }
}

TEST_CASE("split points follow the 7:1:2 convention") {
    SplitSpec split;  // defaults are 0.7/0.1/0.2
    const auto [train_end, val_end] = split_points(100, split);
    CHECK(train_end == 70);
    CHECK(val_end == 80);
    const auto [t2, v2] = split_points(97, split);
    CHECK(t2 == static_cast<std::size_t>(0.7 * 97));
    CHECK(v2 == static_cast<std::size_t>(0.8 * 97));
}

TEST_CASE("window counts match the enumeration oracle") {
    Rng rng(13);
    for (int iter = 0; iter < 10; ++iter) {
        const std::size_t n = 60 + rng.below(100);
        Matrix series(n, 1);
        for (std::size_t t = 0; t < n; ++t) series(t, 0) = rng.uniform();
        WindowSpec window{1 + rng.below(5), 1 + rng.below(5), 1};
        SplitSpec split;
        const WindowedSplits out = window_and_split(series, window, split, {0});
        const auto [train_end, val_end] = split_points(n, split);
        auto expect = [&](std::size_t len) {
            const std::size_t need = window.seq_len + window.pred_len;
            return len >= need ? len - need + 1 : 0;
        };
        CHECK(out.train.size() == expect(train_end));
        CHECK(out.val.size() == expect(val_end - train_end));
        CHECK(out.test.size() == expect(n - val_end));
    }
}

TEST_CASE("no information leaks across split boundaries") {
    // series values equal their time index, so window contents reveal indices
    Matrix series(50, 1);
    for (std::size_t t = 0; t < 50; ++t) series(t, 0) = static_cast<double>(t);
    WindowSpec window{3, 2, 1};
    SplitSpec split;
    const WindowedSplits out = window_and_split(series, window, split, {0});
    const auto [train_end, val_end] = split_points(50, split);
    double max_train_index = -1.0;
    for (std::size_t i = 0; i < out.train.size(); ++i)
        max_train_index = std::max(max_train_index, out.train.targets(i, 1));
    double min_val_index = 1e9;
    for (std::size_t i = 0; i < out.val.size(); ++i)
        min_val_index = std::min(min_val_index, out.val.inputs[i](0, 0));
    CHECK(max_train_index < static_cast<double>(train_end));
    CHECK(min_val_index >= static_cast<double>(train_end));
    CHECK(min_val_index < static_cast<double>(val_end));
}

TEST_CASE("normalization is fit on the train split only") {
    Matrix series(100, 2);
    Rng rng(14);
    for (std::size_t t = 0; t < 100; ++t) {
        series(t, 0) = rng.uniform(0.0, 10.0) + (t >= 70 ? 100.0 : 0.0);  // shifted tail
        series(t, 1) = rng.normal();
    }
    const NormStats stats = normalize_fit(series, 70);
    const Matrix normalized = normalize_apply(stats, series);
    for (std::size_t j = 0; j < 2; ++j) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 70; ++t) mean += normalized(t, j);
        mean /= 70.0;
        CHECK(std::abs(mean) <= 1e-10);
    }
    // the shifted tail is far from zero mean, proving stats exclude it
    double tail_mean = 0.0;
    for (std::size_t t = 70; t < 100; ++t) tail_mean += normalized(t, 0);
    tail_mean /= 30.0;
    CHECK(tail_mean > 3.0);
}

TEST_CASE("constant features pass through with a flag") {
    Matrix series(20, 2, 1.0);
    for (std::size_t t = 0; t < 20; ++t) series(t, 1) = static_cast<double>(t);
    const NormStats stats = normalize_fit(series, 20);
    CHECK(stats.passthrough[0]);
    CHECK_FALSE(stats.passthrough[1]);
    const Matrix normalized = normalize_apply(stats, series);
    for (std::size_t t = 0; t < 20; ++t) CHECK(normalized(t, 0) == 1.0);
}

TEST_CASE("normalize apply then invert is the identity") {
    Rng rng(15);
    Matrix series(60, 3);
    for (double& v : series.data) v = rng.uniform(-50.0, 50.0);
    const NormStats stats = normalize_fit(series, 40);
    const Matrix back = normalize_invert(stats, normalize_apply(stats, series));
    for (std::size_t i = 0; i < series.data.size(); ++i)
        CHECK(back.data[i] == doctest::Approx(series.data[i]).epsilon(1e-12));
}

TEST_CASE("sequence batches validate their shape invariants") {
    Rng rng(16);
    SequenceBatch batch = gen_adding_problem(rng, 4, 6);
    CHECK_NOTHROW(batch.validate());
    batch.inputs[2] = Matrix(5, 2);  // ragged
    CHECK_THROWS_AS(batch.validate(), std::invalid_argument);
}
