#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ufl {

/// Rows are true classes, columns predicted.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;  // num_classes * num_classes

    std::int64_t& at(int truth, int pred) { return counts[truth * num_classes + pred]; }
    std::int64_t at(int truth, int pred) const { return counts[truth * num_classes + pred]; }
    std::int64_t total() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& preds, const std::vector<int>& labels,
                                 int num_classes);

enum class Averaging { Macro, Micro };

struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Macro averages per-class scores (empty-class precision/recall count as 0);
/// micro pools counts, so micro-F1 equals accuracy for single-label tasks.
Scores precision_recall_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                           int num_classes, Averaging averaging);
Scores scores_from_confusion(const ConfusionMatrix& cm, Averaging averaging);

struct FoldStat {
    std::vector<double> folds;
    double mean = 0.0;
    double sd = 0.0;  // sample (n-1) standard deviation
};

/// Keyed by (model, metric) label pairs supplied by the caller.
struct FoldSummary {
    std::map<std::string, FoldStat> stats;
};

/// Mean and sample standard deviation; values kept at full precision,
/// rounding happens only at emission.
FoldStat aggregate_folds(const std::vector<double>& per_fold_scores);

/// One evaluated (mode, model, fold) cell of a run.
struct ReportRow {
    std::string mode;
    std::string model;
    int fold = 0;
    double precision = 0.0;  // macro
    double recall = 0.0;
    double f1 = 0.0;
    double micro_f1 = 0.0;  // co-emitted in summary.json only
};

/// metrics.csv (header: mode,model,fold,precision,recall,f1) plus
/// summary.json with per-(mode, model, metric) fold lists, means and sds.
/// Deterministic: stable row and key order, 6-decimal csv cells.
void write_report(const std::vector<ReportRow>& rows, const std::string& csv_path,
                  const std::string& summary_path);

}  // namespace ufl
