#pragma once

// Exhaustive comparison of the panoptic engine against oracle::brute_force_pq
// over every instance configuration of up to n primitives, 3 classes and 3
// instances per side.
//
// A side configuration puts each primitive in at most one of up to three
// unordered instances and gives each instance a class. With count weights
// the metrics do not depend on primitive names, so the ground-truth side is
// enumerated up to relabeling of primitives (one representative per multiset
// of (class, size) blocks) while the prediction side is enumerated in full.
// Every (gt, pred) pair is a relabeling of some enumerated pair.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "plancad/metrics.hpp"

namespace exhaustive {

using oracle::Inst;
using Config = std::vector<Inst>;

constexpr int kClasses = 3;
constexpr int kMaxInstances = 3;

// Classes 1 and 2 are things, 3 is stuff.
inline const plancad::screening::ClassCatalog& catalog() {
    static const plancad::screening::ClassCatalog c({{"a", true}, {"b", true}, {"c", false}});
    return c;
}

// Every side configuration over n primitives.
inline std::vector<Config> all_configs(int n) {
    std::vector<Config> out;
    std::vector<int> block(n, 0);
    // restricted growth strings: block ids appear in order of first use
    std::function<void(int, int)> rgs = [&](int i, int used) {
        if (i == n) {
            std::vector<std::vector<int>> members(used);
            for (int p = 0; p < n; ++p)
                if (block[p] > 0) members[block[p] - 1].push_back(p);
            int combos = 1;
            for (int k = 0; k < used; ++k) combos *= kClasses;
            for (int code = 0; code < combos; ++code) {
                Config c;
                int rest = code;
                for (int k = 0; k < used; ++k) {
                    c.push_back({rest % kClasses + 1, members[k]});
                    rest /= kClasses;
                }
                out.push_back(std::move(c));
            }
            return;
        }
        for (int b = 0; b <= std::min(used + 1, kMaxInstances); ++b) {
            block[i] = b;
            rgs(i + 1, std::max(used, b));
        }
    };
    rgs(0, 0);
    return out;
}

// One representative per multiset of (class, size) blocks of total size <= n,
// blocks laid out on consecutive primitives.
inline std::vector<Config> canonical_configs(int n) {
    std::vector<std::pair<int, int>> kinds;  // (class, size)
    for (int c = 1; c <= kClasses; ++c)
        for (int s = 1; s <= n; ++s) kinds.push_back({c, s});
    std::vector<Config> out;
    std::vector<std::size_t> pick;
    std::function<void(std::size_t, int)> rec = [&](std::size_t from, int total) {
        Config c;
        int next = 0;
        for (std::size_t k : pick) {
            Inst inst{kinds[k].first, {}};
            for (int j = 0; j < kinds[k].second; ++j) inst.members.push_back(next++);
            c.push_back(std::move(inst));
        }
        out.push_back(std::move(c));
        if (static_cast<int>(pick.size()) == kMaxInstances) return;
        for (std::size_t k = from; k < kinds.size(); ++k) {
            if (total + kinds[k].second > n) continue;
            pick.push_back(k);
            rec(k, total + kinds[k].second);
            pick.pop_back();
        }
    };
    rec(0, 0);
    return out;
}

inline std::vector<plancad::metrics::SymbolInstance> to_engine(const Config& c) {
    std::vector<plancad::metrics::SymbolInstance> out;
    for (const auto& inst : c) {
        std::vector<std::string> ids;
        for (int p : inst.members) ids.push_back("p" + std::to_string(p));
        out.push_back(plancad::metrics::make_instance(inst.cls, std::move(ids)));
    }
    return out;
}

inline plancad::metrics::WeightMap weight_map(const std::vector<double>& w) {
    plancad::metrics::WeightMap m;
    for (std::size_t p = 0; p < w.size(); ++p) m["p" + std::to_string(p)] = w[p];
    return m;
}

struct Report {
    long long cases = 0;
    long long mismatches = 0;
    double max_error = 0.0;
    std::string first_mismatch;
};

// |a - b|, with two nans counting as equal and one nan as infinite.
inline double gap(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return 0.0;
    if (std::isnan(a) || std::isnan(b)) return INFINITY;
    return std::abs(a - b);
}

inline double aggregate_value(const plancad::metrics::Aggregate& a, int which) {
    if (a.classes == 0) return NAN;
    return which == 0 ? a.pq : which == 1 ? a.sq : a.rq;
}

// Compares one case; returns the largest deviation over per-class and
// aggregate PQ/SQ/RQ (infinite on a count mismatch).
inline double compare(const Config& pred, const Config& gt, const std::vector<double>& w,
                      const std::vector<plancad::metrics::SymbolInstance>& epred,
                      const std::vector<plancad::metrics::SymbolInstance>& egt,
                      const plancad::metrics::WeightMap& wm) {
    using namespace plancad::metrics;
    const auto ref = oracle::brute_force_pq(pred, gt, w);
    const auto got = panoptic_quality(match_instances(epred, egt, wm), epred, egt, catalog());
    double worst = 0.0;
    if (got.per_class.size() != ref.per_class.size()) return INFINITY;
    for (const auto& q : got.per_class) {
        auto it = ref.per_class.find(q.class_id);
        if (it == ref.per_class.end()) return INFINITY;
        const auto& r = it->second;
        if (int(q.tally.tp) != r.tp || int(q.tally.fp) != r.fp || int(q.tally.fn) != r.fn) return INFINITY;
        worst = std::max({worst, gap(q.pq, r.pq), gap(q.sq, r.sq), gap(q.rq, r.rq)});
    }
    const auto thing = oracle::weighted_mean(ref.per_class, [](int c) { return c != 3; });
    const auto stuff = oracle::weighted_mean(ref.per_class, [](int c) { return c == 3; });
    const double total[3] = {ref.pq, ref.sq, ref.rq};
    for (int k = 0; k < 3; ++k) {
        worst = std::max({worst, gap(aggregate_value(got.total, k), total[k]),
                          gap(aggregate_value(got.thing, k), thing[k]),
                          gap(aggregate_value(got.stuff, k), stuff[k])});
    }
    return worst;
}

template <typename Describe>
void record(Report& rep, double err, double tol, Describe what) {
    ++rep.cases;
    if (!(err <= tol)) {
        if (rep.mismatches++ == 0) rep.first_mismatch = what();
    }
    if (err > rep.max_error || std::isnan(err)) rep.max_error = err;
}

inline std::string describe(const Config& c) {
    std::string s = "[";
    for (const auto& i : c) {
        s += "c" + std::to_string(i.cls) + "{";
        for (int p : i.members) s += std::to_string(p);
        s += "}";
    }
    return s + "]";
}

// All (canonical gt, any pred) pairs over n primitives with count weights.
inline Report run_counts(int n, double tol) {
    Report rep;
    const auto preds = all_configs(n);
    const auto gts = canonical_configs(n);
    const std::vector<double> w(n, 1.0);
    const auto wm = weight_map(w);
    std::vector<std::vector<plancad::metrics::SymbolInstance>> epreds;
    epreds.reserve(preds.size());
    for (const auto& p : preds) epreds.push_back(to_engine(p));
    for (const auto& g : gts) {
        const auto eg = to_engine(g);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double err = compare(preds[i], g, w, epreds[i], eg, wm);
            record(rep, err, tol, [&] { return "gt " + describe(g) + " pred " + describe(preds[i]); });
        }
    }
    return rep;
}

// Random full configurations with random primitive lengths.
inline Report run_lengths(int n, long long samples, std::uint64_t seed, double tol) {
    Report rep;
    const auto configs = all_configs(n);
    std::vector<std::vector<plancad::metrics::SymbolInstance>> engine;
    for (const auto& c : configs) engine.push_back(to_engine(c));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> len(0.05, 10.0);
    for (long long k = 0; k < samples; ++k) {
        std::vector<double> w(n);
        for (double& x : w) x = len(rng);
        const auto wm = weight_map(w);
        const std::size_t a = rng() % configs.size(), b = rng() % configs.size();
        const double err = compare(configs[a], configs[b], w, engine[a], engine[b], wm);
        record(rep, err, tol, [&] { return "gt " + describe(configs[b]) + " pred " + describe(configs[a]); });
    }
    return rep;
}

}  // namespace exhaustive
