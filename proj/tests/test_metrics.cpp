#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "unifiedfl/metrics.hpp"
#include "unifiedfl/errors.hpp"

using namespace ufl;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("perfect predictions score 1 everywhere") {
    const std::vector<int> y = {0, 1, 2, 1, 0};
    for (Averaging avg : {Averaging::Macro, Averaging::Micro}) {
        const Scores s = precision_recall_f1(y, y, 3, avg);
        CHECK(s.precision == doctest::Approx(1.0));
        CHECK(s.recall == doctest::Approx(1.0));
        CHECK(s.f1 == doctest::Approx(1.0));
    }
}

TEST_CASE("binary hand counts: TP=2 FP=1 FN=1 TN=6") {
    // Class 1: two true positives, one false positive, one false negative.
    const std::vector<int> labels = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    const std::vector<int> preds = {1, 1, 0, 1, 0, 0, 0, 0, 0, 0};
    const ConfusionMatrix cm = confusion_matrix(preds, labels, 2);
    CHECK(cm.at(1, 1) == 2);
    CHECK(cm.at(0, 1) == 1);
    CHECK(cm.at(1, 0) == 1);
    CHECK(cm.at(0, 0) == 6);
    CHECK(cm.total() == 10);
    // Macro averages class 0 (6/7, 6/7, 6/7) and class 1 (2/3, 2/3, 2/3).
    const Scores s = scores_from_confusion(cm, Averaging::Macro);
    CHECK(s.precision == doctest::Approx(0.5 * (6.0 / 7.0 + 2.0 / 3.0)));
    CHECK(s.recall == doctest::Approx(0.5 * (6.0 / 7.0 + 2.0 / 3.0)));
    CHECK(s.f1 == doctest::Approx(0.5 * (6.0 / 7.0 + 2.0 / 3.0)));
}

TEST_CASE("micro F1 equals accuracy on random instances") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const int classes = 2 + static_cast<int>(rng() % 5);
        std::vector<int> labels(100), preds(100);
        for (int i = 0; i < 100; ++i) {
            labels[i] = static_cast<int>(rng() % classes);
            preds[i] = static_cast<int>(rng() % classes);
        }
        const Scores s = precision_recall_f1(preds, labels, classes, Averaging::Micro);
        CHECK(s.f1 == doctest::Approx(testutil::accuracy(preds, labels)));
        CHECK(s.f1 >= 0.0);
        CHECK(s.f1 <= 1.0);
    }
}

TEST_CASE("macro scores are invariant under consistent relabeling") {
    std::mt19937_64 rng(23);
    std::vector<int> labels(200), preds(200);
    for (int i = 0; i < 200; ++i) {
        labels[i] = static_cast<int>(rng() % 4);
        preds[i] = static_cast<int>(rng() % 4);
    }
    const Scores base = precision_recall_f1(preds, labels, 4, Averaging::Macro);
    const std::vector<int> perm = {2, 0, 3, 1};
    std::vector<int> rl(200), rp(200);
    for (int i = 0; i < 200; ++i) {
        rl[i] = perm[labels[i]];
        rp[i] = perm[preds[i]];
    }
    const Scores permuted = precision_recall_f1(rp, rl, 4, Averaging::Macro);
    CHECK(base.precision == doctest::Approx(permuted.precision));
    CHECK(base.recall == doctest::Approx(permuted.recall));
    CHECK(base.f1 == doctest::Approx(permuted.f1));
}

TEST_CASE("aggregate_folds mean and sample sd") {
    const FoldStat quoted = aggregate_folds({0.710, 0.702, 0.723});
    CHECK(std::round(quoted.mean * 1000.0) / 1000.0 == doctest::Approx(0.712));
    CHECK(std::round(quoted.sd * 1000.0) / 1000.0 == doctest::Approx(0.011));

    const FoldStat same = aggregate_folds({0.4, 0.4, 0.4});
    CHECK(same.sd == doctest::Approx(0.0));

    const FoldStat pair = aggregate_folds({0.0, 1.0});
    CHECK(pair.mean == doctest::Approx(0.5));
    CHECK(pair.sd == doctest::Approx(std::sqrt(0.5)));
    CHECK_THROWS_AS(aggregate_folds({0.5}), ContractError);
}

TEST_CASE("write_report emits stable csv and summary") {
    const auto dir = std::filesystem::temp_directory_path();
    const std::string csv = (dir / "ufl_metrics.csv").string();
    const std::string summary = (dir / "ufl_summary.json").string();

    std::vector<ReportRow> rows;
    for (int fold = 0; fold < 3; ++fold)
        for (const char* model : {"MLP_a#0", "CNN_a#1"}) {
            ReportRow r;
            r.mode = "unifiedfl";
            r.model = model;
            r.fold = fold;
            r.precision = 0.5 + 0.01 * fold;
            r.recall = 0.6;
            r.f1 = 0.55;
            r.micro_f1 = 0.58;
            rows.push_back(r);
        }
    write_report(rows, csv, summary);

    const std::string text = slurp(csv);
    CHECK(text.rfind("mode,model,fold,precision,recall,f1\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 6);  // header + 3 folds x 2 models

    // Re-emission is byte-identical.
    const std::string summary_text = slurp(summary);
    write_report(rows, csv, summary);
    CHECK(slurp(csv) == text);
    CHECK(slurp(summary) == summary_text);
    CHECK(summary_text.find("micro_f1") != std::string::npos);

    std::remove(csv.c_str());
    std::remove(summary.c_str());
}
