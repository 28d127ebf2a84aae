#include "plancad/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "json.hpp"

#include "plancad/errors.hpp"

namespace plancad::metrics {

namespace {

double weight_of(const WeightMap& weights, const std::string& id) {
    auto it = weights.find(id);
    if (it == weights.end()) throw MissingWeight("no weight for primitive '" + id + "'");
    return it->second;
}

void check_disjoint(const std::vector<SymbolInstance>& side, const char* which) {
    std::unordered_map<std::string, std::size_t> owner;
    for (std::size_t i = 0; i < side.size(); ++i) {
        for (const auto& id : side[i].members) {
            auto [it, inserted] = owner.emplace(id, i);
            if (!inserted) {
                throw OverlapError(std::string(which) + " instances " + std::to_string(it->second) + " and " +
                                   std::to_string(i) + " share primitive '" + id + "'");
            }
        }
    }
}

Aggregate aggregate(const std::vector<const ClassQuality*>& classes) {
    Aggregate a;
    a.classes = classes.size();
    if (classes.empty()) return a;
    double mass = 0.0;
    for (const auto* c : classes) {
        const double m = c->tally.mass();
        mass += m;
        a.pq += m * c->pq;
        a.sq += m * c->sq;
        a.rq += m * c->rq;
        a.mean_pq += c->pq;
        a.mean_sq += c->sq;
        a.mean_rq += c->rq;
    }
    a.pq /= mass;
    a.sq /= mass;
    a.rq /= mass;
    const double n = static_cast<double>(classes.size());
    a.mean_pq /= n;
    a.mean_sq /= n;
    a.mean_rq /= n;
    return a;
}

double ratio(double num, double den, double if_empty) { return den > 0.0 ? num / den : if_empty; }

void finish(SemanticScores& s) {
    if (s.pred_positive == 0.0 && s.gt_positive == 0.0) {
        s.precision = s.recall = s.f1 = 1.0;
        return;
    }
    s.precision = ratio(s.tp, s.pred_positive, 0.0);
    s.recall = ratio(s.tp, s.gt_positive, 0.0);
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
}

struct ScoredPred {
    double score;
    std::size_t unit;
    std::size_t index;
};

double interpolated_ap(const std::vector<bool>& hits, std::size_t gt_count) {
    const std::size_t n = hits.size();
    std::vector<double> precision(n), recall(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
        tp += hits[i] ? 1 : 0;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
    }
    for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double sum = 0.0;
    std::size_t at = 0;
    for (int k = 0; k <= 100; ++k) {
        const double r = k / 100.0;
        while (at < n && recall[at] < r - 1e-12) ++at;
        if (at == n) break;
        sum += precision[at];
    }
    return sum / 101.0;
}

}  // namespace

const char* to_string(Weighting w) { return w == Weighting::Length ? "length" : "count"; }

SymbolInstance make_instance(ClassId cls, std::vector<std::string> members, std::optional<double> score) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    return {cls, std::move(members), score};
}

double instance_iou(const SymbolInstance& a, const SymbolInstance& b, const WeightMap& weights) {
    double inter = 0.0;
    double uni = 0.0;
    auto i = a.members.begin();
    auto j = b.members.begin();
    while (i != a.members.end() || j != b.members.end()) {
        if (j == b.members.end() || (i != a.members.end() && *i < *j)) {
            uni += weight_of(weights, *i++);
        } else if (i == a.members.end() || *j < *i) {
            uni += weight_of(weights, *j++);
        } else {
            const double w = weight_of(weights, *i);
            inter += w;
            uni += w;
            ++i;
            ++j;
        }
    }
    return uni > 0.0 ? inter / uni : 0.0;
}

Matching match_instances(const std::vector<SymbolInstance>& pred, const std::vector<SymbolInstance>& gt,
                         const WeightMap& weights) {
    check_disjoint(pred, "predicted");
    check_disjoint(gt, "ground-truth");
    Matching m;
    std::vector<bool> pred_used(pred.size(), false);
    for (std::size_t g = 0; g < gt.size(); ++g) {
        bool matched = false;
        for (std::size_t p = 0; p < pred.size(); ++p) {
            if (pred[p].class_id != gt[g].class_id) continue;
            const double iou = instance_iou(pred[p], gt[g], weights);
            if (iou <= 0.5) continue;
            if (matched || pred_used[p]) throw OverlapError("instance matched more than once");
            m.pairs.push_back({p, g, iou});
            pred_used[p] = true;
            matched = true;
        }
        if (!matched) m.unmatched_gt.push_back(g);
    }
    for (std::size_t p = 0; p < pred.size(); ++p) {
        if (!pred_used[p]) m.unmatched_pred.push_back(p);
    }
    return m;
}

void accumulate(PanopticTally& tally, const Matching& m, const std::vector<SymbolInstance>& pred,
                const std::vector<SymbolInstance>& gt) {
    for (const auto& pair : m.pairs) {
        auto& t = tally[gt[pair.gt].class_id];
        ++t.tp;
        t.iou_sum += pair.iou;
    }
    for (std::size_t p : m.unmatched_pred) ++tally[pred[p].class_id].fp;
    for (std::size_t g : m.unmatched_gt) ++tally[gt[g].class_id].fn;
}

ClassQuality class_quality(ClassId cls, const ClassTally& tally) {
    ClassQuality q;
    q.class_id = cls;
    q.tally = tally;
    if (tally.empty()) {
        q.sq = q.rq = q.pq = 1.0;
        return q;
    }
    q.rq = static_cast<double>(tally.tp) / tally.mass();
    q.sq = tally.tp > 0 ? tally.iou_sum / static_cast<double>(tally.tp) : 0.0;
    q.pq = q.sq * q.rq;
    return q;
}

PanopticResult summarize(const PanopticTally& tally, const ClassCatalog& catalog) {
    PanopticResult r;
    for (const auto& [cls, t] : tally) {
        if (!t.empty()) r.per_class.push_back(class_quality(cls, t));
    }
    std::vector<const ClassQuality*> all, things, stuff;
    for (const auto& q : r.per_class) {
        all.push_back(&q);
        (catalog.is_thing(q.class_id) ? things : stuff).push_back(&q);
    }
    r.total = aggregate(all);
    r.thing = aggregate(things);
    r.stuff = aggregate(stuff);
    return r;
}

PanopticResult panoptic_quality(const Matching& m, const std::vector<SymbolInstance>& pred,
                                const std::vector<SymbolInstance>& gt, const ClassCatalog& catalog) {
    PanopticTally tally;
    accumulate(tally, m, pred, gt);
    return summarize(tally, catalog);
}

std::vector<SymbolInstance> instances_from_labels(const LabelMap& labels, const ClassCatalog& catalog,
                                                  const std::map<std::string, double>* scores) {
    // key: (class, instance id or 0 for stuff)
    std::map<std::pair<ClassId, int>, SymbolInstance> groups;
    for (const auto& [id, label] : labels) {
        if (label.cls == kUnlabeled) continue;
        const bool thing = catalog.is_thing(label.cls);
        if (thing && label.instance <= 0) continue;
        auto& inst = groups[{label.cls, thing ? label.instance : 0}];
        inst.class_id = label.cls;
        inst.members.push_back(id);  // map order keeps members sorted
        if (scores) {
            if (auto it = scores->find(id); it != scores->end()) {
                inst.score = inst.score ? std::max(*inst.score, it->second) : it->second;
            }
        }
    }
    std::vector<SymbolInstance> out;
    out.reserve(groups.size());
    for (auto& [_, inst] : groups) out.push_back(std::move(inst));
    std::sort(out.begin(), out.end(), [](const SymbolInstance& a, const SymbolInstance& b) {
        return std::tie(a.class_id, a.members.front()) < std::tie(b.class_id, b.members.front());
    });
    return out;
}

void accumulate_semantic(SemanticTally& tally, const LabelMap& pred, const LabelMap& gt, const WeightMap& weights) {
    if (pred.size() != gt.size()) {
        throw CoverageError("prediction covers " + std::to_string(pred.size()) + " primitives, ground truth " +
                            std::to_string(gt.size()));
    }
    auto p = pred.begin();
    for (const auto& [id, g] : gt) {
        if (p->first != id) throw CoverageError("primitive '" + id + "' missing from the prediction");
        const double w = weight_of(weights, id);
        const bool predicted = p->second.cls != kUnlabeled;
        const bool labeled = g.cls != kUnlabeled;
        const bool hit = labeled && p->second.cls == g.cls;
        tally.count.tp += hit ? 1.0 : 0.0;
        tally.count.pred_positive += predicted ? 1.0 : 0.0;
        tally.count.gt_positive += labeled ? 1.0 : 0.0;
        tally.weighted.tp += hit ? w : 0.0;
        tally.weighted.pred_positive += predicted ? w : 0.0;
        tally.weighted.gt_positive += labeled ? w : 0.0;
        ++p;
    }
}

void finish_semantic(SemanticTally& tally) {
    finish(tally.count);
    finish(tally.weighted);
}

F1Pair semantic_scores(const LabelMap& pred, const LabelMap& gt, const WeightMap& weights) {
    SemanticTally t;
    accumulate_semantic(t, pred, gt, weights);
    finish_semantic(t);
    return {t.count.f1, t.weighted.f1};
}

ApResult instance_ap(const std::vector<ApUnit>& units, const ClassCatalog& catalog) {
    std::set<ClassId> classes;
    std::map<ClassId, std::size_t> gt_counts;
    for (const auto& u : units) {
        for (const auto& g : *u.gt) {
            if (catalog.is_thing(g.class_id)) ++gt_counts[g.class_id];
        }
        for (const auto& p : *u.pred) {
            if (!p.score) throw MissingScore("predicted instance without a score");
        }
    }
    ApResult result;
    for (const auto& [cls, gt_count] : gt_counts) {
        std::vector<ScoredPred> order;
        // iou[unit][pred index] -> (gt index, iou) for same-class gts with iou > 0
        std::vector<std::map<std::size_t, std::vector<std::pair<std::size_t, double>>>> overlaps(units.size());
        for (std::size_t ui = 0; ui < units.size(); ++ui) {
            const auto& u = units[ui];
            for (std::size_t p = 0; p < u.pred->size(); ++p) {
                const auto& pi = (*u.pred)[p];
                if (pi.class_id != cls) continue;
                order.push_back({*pi.score, ui, p});
                auto& row = overlaps[ui][p];
                for (std::size_t g = 0; g < u.gt->size(); ++g) {
                    if ((*u.gt)[g].class_id != cls) continue;
                    const double iou = instance_iou(pi, (*u.gt)[g], *u.weights);
                    if (iou > 0.0) row.emplace_back(g, iou);
                }
            }
        }
        std::stable_sort(order.begin(), order.end(), [](const ScoredPred& a, const ScoredPred& b) {
            if (a.score != b.score) return a.score > b.score;
            return std::tie(a.unit, a.index) < std::tie(b.unit, b.index);
        });
        ClassAp entry;
        entry.class_id = cls;
        for (std::size_t ti = 0; ti < kApThresholds.size(); ++ti) {
            const double t = kApThresholds[ti];
            std::vector<std::set<std::size_t>> used(units.size());
            std::vector<bool> hits;
            hits.reserve(order.size());
            for (const auto& sp : order) {
                std::optional<std::size_t> best;
                double best_iou = -1.0;
                for (const auto& [g, iou] : overlaps[sp.unit][sp.index]) {
                    if (iou + 1e-12 < t || used[sp.unit].contains(g)) continue;
                    if (iou > best_iou) {
                        best = g;
                        best_iou = iou;
                    }
                }
                if (best) used[sp.unit].insert(*best);
                hits.push_back(best.has_value());
            }
            entry.ap[ti] = interpolated_ap(hits, gt_count);
        }
        result.per_class.push_back(entry);
    }
    result.classes = result.per_class.size();
    if (result.classes == 0) return result;
    for (const auto& c : result.per_class) {
        result.ap50 += c.ap[0];
        result.ap75 += c.ap[5];
        result.map += std::accumulate(c.ap.begin(), c.ap.end(), 0.0) / static_cast<double>(c.ap.size());
    }
    const double n = static_cast<double>(result.classes);
    result.ap50 /= n;
    result.ap75 /= n;
    result.map /= n;
    return result;
}

ApResult instance_ap(const std::vector<SymbolInstance>& pred, const std::vector<SymbolInstance>& gt,
                     const WeightMap& weights, const ClassCatalog& catalog) {
    return instance_ap(std::vector<ApUnit>{{&pred, &gt, &weights}}, catalog);
}

MetricsReport evaluate(const std::vector<EvalUnit>& units, const ClassCatalog& catalog, Weighting weighting,
                       double default_score) {
    MetricsReport report;
    report.weighting = weighting;
    report.units = units.size();
    PanopticTally tally;
    std::vector<std::vector<SymbolInstance>> preds(units.size()), gts(units.size());
    std::vector<WeightMap> weights(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto& u = units[i];
        if (weighting == Weighting::Length) {
            weights[i] = u.lengths;
        } else {
            for (const auto& [id, _] : u.gt) weights[i][id] = 1.0;
        }
        gts[i] = instances_from_labels(u.gt, catalog);
        preds[i] = instances_from_labels(u.pred, catalog, &u.scores);
        for (auto& p : preds[i]) {
            if (!p.score) p.score = default_score;
        }
        accumulate(tally, match_instances(preds[i], gts[i], weights[i]), preds[i], gts[i]);
        accumulate_semantic(report.semantic, u.pred, u.gt, weights[i]);
    }
    finish_semantic(report.semantic);
    report.panoptic = summarize(tally, catalog);
    std::vector<ApUnit> ap_units;
    for (std::size_t i = 0; i < units.size(); ++i) ap_units.push_back({&preds[i], &gts[i], &weights[i]});
    report.ap = instance_ap(ap_units, catalog);
    return report;
}

namespace {

nlohmann::ordered_json aggregate_json(const Aggregate& a) {
    nlohmann::ordered_json j;
    if (a.classes == 0) {
        for (const char* key : {"pq", "sq", "rq", "mean_pq", "mean_sq", "mean_rq"}) j[key] = nullptr;
    } else {
        j["pq"] = a.pq;
        j["sq"] = a.sq;
        j["rq"] = a.rq;
        j["mean_pq"] = a.mean_pq;
        j["mean_sq"] = a.mean_sq;
        j["mean_rq"] = a.mean_rq;
    }
    j["classes"] = a.classes;
    return j;
}

}  // namespace

std::string report_to_json(const MetricsReport& report, const ClassCatalog& catalog) {
    using nlohmann::ordered_json;
    ordered_json doc;
    doc["schema"] = "plancad-report/1";
    doc["weighting"] = to_string(report.weighting);
    doc["units"] = report.units;

    ordered_json pan;
    pan["total"] = aggregate_json(report.panoptic.total);
    pan["thing"] = aggregate_json(report.panoptic.thing);
    pan["stuff"] = aggregate_json(report.panoptic.stuff);
    ordered_json classes = ordered_json::array();
    for (const auto& q : report.panoptic.per_class) {
        ordered_json c;
        c["class"] = catalog.name(q.class_id);
        c["kind"] = catalog.is_thing(q.class_id) ? "thing" : "stuff";
        c["pq"] = q.pq;
        c["sq"] = q.sq;
        c["rq"] = q.rq;
        c["tp"] = q.tally.tp;
        c["fp"] = q.tally.fp;
        c["fn"] = q.tally.fn;
        c["iou_sum"] = q.tally.iou_sum;
        classes.push_back(std::move(c));
    }
    pan["per_class"] = std::move(classes);
    doc["panoptic"] = std::move(pan);

    const auto& s = report.semantic;
    ordered_json sem;
    sem["f1"] = s.count.f1;
    sem["wf1"] = s.weighted.f1;
    sem["precision"] = s.count.precision;
    sem["recall"] = s.count.recall;
    sem["weighted_precision"] = s.weighted.precision;
    sem["weighted_recall"] = s.weighted.recall;
    sem["tp"] = s.count.tp;
    sem["pred_positive"] = s.count.pred_positive;
    sem["gt_positive"] = s.count.gt_positive;
    doc["semantic"] = std::move(sem);

    ordered_json inst;
    if (report.ap.classes == 0) {
        inst["ap50"] = inst["ap75"] = inst["map"] = nullptr;
    } else {
        inst["ap50"] = report.ap.ap50;
        inst["ap75"] = report.ap.ap75;
        inst["map"] = report.ap.map;
    }
    inst["classes"] = report.ap.classes;
    ordered_json ap_classes = ordered_json::array();
    for (const auto& c : report.ap.per_class) {
        ordered_json e;
        e["class"] = catalog.name(c.class_id);
        e["ap"] = c.ap;
        ap_classes.push_back(std::move(e));
    }
    inst["per_class"] = std::move(ap_classes);
    doc["instance"] = std::move(inst);
    return doc.dump(2) + "\n";
}

}  // namespace plancad::metrics
