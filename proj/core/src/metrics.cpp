#include "unifiedfl/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "unifiedfl/errors.hpp"

namespace ufl {

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                 int num_classes) {
    if (preds.size() != labels.size() || preds.empty())
        throw ContractError("confusion_matrix: need equal non-empty preds/labels");
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= num_classes || labels[i] < 0 || labels[i] >= num_classes)
            throw ContractError("confusion_matrix: class index out of range");
        ++cm.at(labels[i], preds[i]);
    }
    return cm;
}

Scores scores_from_confusion(const ConfusionMatrix& cm, Averaging averaging) {
    const int c = cm.num_classes;
    Scores s;
    if (averaging == Averaging::Micro) {
        std::int64_t tp = 0;
        for (int k = 0; k < c; ++k) tp += cm.at(k, k);
        const double acc = static_cast<double>(tp) / static_cast<double>(cm.total());
        // Pooled FP == pooled FN for single-label data, so all three collapse.
        s.precision = s.recall = s.f1 = acc;
        return s;
    }
    double psum = 0.0, rsum = 0.0, fsum = 0.0;
    for (int k = 0; k < c; ++k) {
        std::int64_t tp = cm.at(k, k), fp = 0, fn = 0;
        for (int j = 0; j < c; ++j) {
            if (j == k) continue;
            fp += cm.at(j, k);
            fn += cm.at(k, j);
        }
        const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        psum += p;
        rsum += r;
        fsum += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    s.precision = psum / c;
    s.recall = rsum / c;
    s.f1 = fsum / c;
    return s;
}

Scores precision_recall_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                           int num_classes, Averaging averaging) {
    return scores_from_confusion(confusion_matrix(preds, labels, num_classes), averaging);
}

FoldStat aggregate_folds(const std::vector<double>& per_fold_scores) {
    if (per_fold_scores.size() < 2) throw ContractError("aggregate_folds: need >= 2 folds");
    FoldStat fs;
    fs.folds = per_fold_scores;
    fs.mean = std::accumulate(fs.folds.begin(), fs.folds.end(), 0.0) /
              static_cast<double>(fs.folds.size());
    double ss = 0.0;
    for (double v : fs.folds) ss += (v - fs.mean) * (v - fs.mean);
    fs.sd = std::sqrt(ss / static_cast<double>(fs.folds.size() - 1));
    return fs;
}

namespace {

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace

void write_report(const std::vector<ReportRow>& rows, const std::string& csv_path,
                  const std::string& summary_path) {
    if (rows.empty()) throw ContractError("write_report: no rows");

    std::vector<ReportRow> sorted = rows;
    std::stable_sort(sorted.begin(), sorted.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.mode != b.mode) return a.mode < b.mode;
        if (a.model != b.model) return a.model < b.model;
        return a.fold < b.fold;
    });

    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("write_report: cannot write " + csv_path);
    csv << "mode,model,fold,precision,recall,f1\n";
    for (const ReportRow& r : sorted)
        csv << r.mode << ',' << r.model << ',' << r.fold << ',' << fixed6(r.precision) << ','
            << fixed6(r.recall) << ',' << fixed6(r.f1) << '\n';

    // summary.json: per (mode, model) fold lists and mean/sd per metric.
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
    std::map<std::pair<std::string, std::string>, std::vector<const ReportRow*>> groups;
    for (const ReportRow& r : sorted) groups[{r.mode, r.model}].push_back(&r);
    for (const auto& [key, group] : groups) {
        nlohmann::ordered_json entry;
        const std::array<std::pair<const char*, double ReportRow::*>, 4> metrics = {{
            {"precision", &ReportRow::precision},
            {"recall", &ReportRow::recall},
            {"f1", &ReportRow::f1},
            {"micro_f1", &ReportRow::micro_f1},
        }};
        for (const auto& [name, member] : metrics) {
            std::vector<double> folds;
            for (const ReportRow* r : group) folds.push_back(r->*member);
            nlohmann::ordered_json m;
            m["folds"] = folds;
            if (folds.size() >= 2) {
                const FoldStat fs = aggregate_folds(folds);
                m["mean"] = fs.mean;
                m["sd"] = fs.sd;
            } else {
                m["mean"] = folds.front();
                m["sd"] = 0.0;
            }
            entry[name] = m;
        }
        summary[key.first][key.second] = entry;
    }
    std::ofstream js(summary_path, std::ios::binary);
    if (!js) throw std::runtime_error("write_report: cannot write " + summary_path);
    js << summary.dump(2) << '\n';
}

}  // namespace ufl
