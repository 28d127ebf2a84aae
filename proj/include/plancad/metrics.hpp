#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "plancad/annotator.hpp"
#include "plancad/screening.hpp"

namespace plancad::metrics {

using annotator::PanopticLabel;
using screening::ClassCatalog;
using screening::ClassId;
using screening::kUnlabeled;

// sourceId -> weight (primitive length, or 1 when counting).
using WeightMap = std::unordered_map<std::string, double>;
using LabelMap = std::map<std::string, PanopticLabel>;

enum class Weighting { Length, Count };

const char* to_string(Weighting w);

struct SymbolInstance {
    ClassId class_id = kUnlabeled;
    std::vector<std::string> members;  // sorted, unique
    std::optional<double> score;

    friend bool operator==(const SymbolInstance&, const SymbolInstance&) = default;
};

// Sorts and deduplicates members.
SymbolInstance make_instance(ClassId cls, std::vector<std::string> members,
                             std::optional<double> score = std::nullopt);

// Weighted intersection over union of the member sets. Throws MissingWeight.
double instance_iou(const SymbolInstance& a, const SymbolInstance& b, const WeightMap& weights);

struct MatchPair {
    std::size_t pred = 0;
    std::size_t gt = 0;
    double iou = 0.0;

    friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct Matching {
    std::vector<MatchPair> pairs;  // ordered by gt index
    std::vector<std::size_t> unmatched_pred;
    std::vector<std::size_t> unmatched_gt;
};

// Every same-class pair with iou > 0.5. Within one side instances must be
// disjoint, which makes such pairs unique; OverlapError otherwise.
Matching match_instances(const std::vector<SymbolInstance>& pred, const std::vector<SymbolInstance>& gt,
                         const WeightMap& weights);

struct ClassTally {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double iou_sum = 0.0;

    double mass() const { return static_cast<double>(tp) + 0.5 * static_cast<double>(fp + fn); }
    bool empty() const { return tp == 0 && fp == 0 && fn == 0; }
};

using PanopticTally = std::map<ClassId, ClassTally>;

void accumulate(PanopticTally& tally, const Matching& m, const std::vector<SymbolInstance>& pred,
                const std::vector<SymbolInstance>& gt);

struct ClassQuality {
    ClassId class_id = kUnlabeled;
    ClassTally tally;
    double pq = 0.0;
    double sq = 0.0;
    double rq = 0.0;
};

// Per-class quality from counts: RQ = TP / (TP + FP/2 + FN/2), SQ = mean
// matched iou (1 for an empty class, 0 when nothing matched), PQ = SQ * RQ.
ClassQuality class_quality(ClassId cls, const ClassTally& tally);

struct Aggregate {
    // Means of the per-class values weighted by TP + FP/2 + FN/2.
    double pq = 0.0;
    double sq = 0.0;
    double rq = 0.0;
    // Unweighted means over the same classes.
    double mean_pq = 0.0;
    double mean_sq = 0.0;
    double mean_rq = 0.0;
    // Classes contributing; 0 means the aggregate is undefined.
    std::size_t classes = 0;
};

struct PanopticResult {
    std::vector<ClassQuality> per_class;  // non-empty classes, by id
    Aggregate total;
    Aggregate thing;
    Aggregate stuff;
};

// Classes with no TP, FP or FN are left out of every aggregate.
PanopticResult summarize(const PanopticTally& tally, const ClassCatalog& catalog);
PanopticResult panoptic_quality(const Matching& m, const std::vector<SymbolInstance>& pred,
                                const std::vector<SymbolInstance>& gt, const ClassCatalog& catalog);

// Stuff classes become one instance per class; thing primitives group by
// instance id and thing primitives without one are left out; Unlabeled is
// ignored. Instances are ordered by (class, first member). When scores are
// given an instance takes the highest score among its members.
std::vector<SymbolInstance> instances_from_labels(const LabelMap& labels, const ClassCatalog& catalog,
                                                  const std::map<std::string, double>* scores = nullptr);

struct SemanticScores {
    double tp = 0.0;
    double pred_positive = 0.0;
    double gt_positive = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct SemanticTally {
    SemanticScores count;
    SemanticScores weighted;
};

// Accumulates one unit: a primitive is a true positive when its gt class is
// not Unlabeled and the prediction agrees; predicted positives are primitives
// predicted as any class, gt positives those with a gt class. Throws
// CoverageError when the two labelings cover different primitives and
// MissingWeight when a primitive has no weight.
void accumulate_semantic(SemanticTally& tally, const LabelMap& pred, const LabelMap& gt, const WeightMap& weights);
void finish_semantic(SemanticTally& tally);

struct F1Pair {
    double f1 = 0.0;
    double wf1 = 0.0;
};

F1Pair semantic_scores(const LabelMap& pred, const LabelMap& gt, const WeightMap& weights);

inline constexpr std::array<double, 10> kApThresholds = {0.50, 0.55, 0.60, 0.65, 0.70,
                                                         0.75, 0.80, 0.85, 0.90, 0.95};

struct ApUnit {
    const std::vector<SymbolInstance>* pred = nullptr;
    const std::vector<SymbolInstance>* gt = nullptr;
    const WeightMap* weights = nullptr;
};

struct ClassAp {
    ClassId class_id = kUnlabeled;
    std::array<double, 10> ap{};  // per threshold
};

struct ApResult {
    double ap50 = 0.0;
    double ap75 = 0.0;
    double map = 0.0;
    std::vector<ClassAp> per_class;
    // Thing classes present in gt; 0 means undefined.
    std::size_t classes = 0;
};

// Greedy matching in descending score within each unit (each gt used once,
// match iff iou >= t), 101-point interpolated precision, averaged over the
// thresholds and then over thing classes present in gt. Throws MissingScore.
ApResult instance_ap(const std::vector<ApUnit>& units, const ClassCatalog& catalog);
ApResult instance_ap(const std::vector<SymbolInstance>& pred, const std::vector<SymbolInstance>& gt,
                     const WeightMap& weights, const ClassCatalog& catalog);

// One evaluation unit (a chunk or a whole drawing).
struct EvalUnit {
    std::string name;
    LabelMap pred;
    LabelMap gt;
    WeightMap lengths;
    std::map<std::string, double> scores;  // per predicted primitive
};

struct MetricsReport {
    Weighting weighting = Weighting::Length;
    std::size_t units = 0;
    PanopticResult panoptic;
    SemanticTally semantic;
    ApResult ap;
};

// Pools all units; predicted instances without a score get default_score.
MetricsReport evaluate(const std::vector<EvalUnit>& units, const ClassCatalog& catalog,
                       Weighting weighting = Weighting::Length, double default_score = 1.0);

// "plancad-report/1" document (docs/report_format.md).
std::string report_to_json(const MetricsReport& report, const ClassCatalog& catalog);

}  // namespace plancad::metrics
