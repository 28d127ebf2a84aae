#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "plancad/ingest.hpp"
#include "plancad/screening.hpp"

namespace plancad::annotator {

using screening::ClassCatalog;
using screening::ClassId;
using screening::kUnlabeled;
using InstanceId = int;

// (l, z): semantic class and instance id of one primitive. z == 0 means no
// instance (stuff, unlabeled, or an unassigned thing).
struct PanopticLabel {
    ClassId cls = kUnlabeled;
    InstanceId instance = 0;

    friend bool operator==(const PanopticLabel&, const PanopticLabel&) = default;
    friend auto operator<=>(const PanopticLabel&, const PanopticLabel&) = default;
};

enum class FlagKind { UnblockedThing, ClassConflictInBlock, UnmatchedLayer, EmptyInstance };

const char* to_string(FlagKind kind);
std::optional<FlagKind> flag_kind_from_string(std::string_view name);

struct ComplianceFlag {
    FlagKind kind = FlagKind::UnmatchedLayer;
    std::string subject;
    std::string detail;

    // "<Kind>:<subject>", the handle AcceptFlag events refer to.
    std::string ref() const;

    friend bool operator==(const ComplianceFlag&, const ComplianceFlag&) = default;
};

struct SemanticOverride {
    std::string layer;
    std::string class_name;
    friend bool operator==(const SemanticOverride&, const SemanticOverride&) = default;
};

struct PrimitiveOverride {
    std::string source_id;
    std::string class_name;
    friend bool operator==(const PrimitiveOverride&, const PrimitiveOverride&) = default;
};

struct MergeInstances {
    std::vector<InstanceId> instances;
    friend bool operator==(const MergeInstances&, const MergeInstances&) = default;
};

struct SplitInstance {
    InstanceId instance = 0;
    std::vector<std::vector<std::string>> cells;
    friend bool operator==(const SplitInstance&, const SplitInstance&) = default;
};

struct AcceptFlag {
    std::string flag_ref;
    friend bool operator==(const AcceptFlag&, const AcceptFlag&) = default;
};

using CorrectionAction =
    std::variant<SemanticOverride, PrimitiveOverride, MergeInstances, SplitInstance, AcceptFlag>;

struct CorrectionEvent {
    std::string event_id;
    long long seq = 0;
    CorrectionAction action;
    std::string author;
    std::string timestamp;

    friend bool operator==(const CorrectionEvent&, const CorrectionEvent&) = default;
};

const char* action_name(const CorrectionAction& action);

// One record of the line-delimited correction log (docs/correction_log.md).
// Keys are emitted in a fixed order, so equal events serialize identically.
std::string to_log_line(const CorrectionEvent& event);
// Throws std::invalid_argument on malformed records. When allow_missing_seq
// is set an absent "seq" parses as 0.
CorrectionEvent parse_log_line(std::string_view line, bool allow_missing_seq = false);

enum class Stage { Semantic, Instance };

// Per-primitive labels over an immutable flattened drawing plus the state
// needed to replay corrections. Values are cheap to copy: the drawing and its
// id index are shared.
class AnnotatedDrawing {
public:
    std::shared_ptr<const ingest::FlatDrawing> drawing;
    ClassCatalog catalog;
    // Parallel to drawing->primitives.
    std::vector<PanopticLabel> labels;
    std::vector<ComplianceFlag> flags;
    // Outermost refId -> flattened source ids it placed.
    std::map<std::string, std::set<std::string>> provenance_index;
    Stage stage = Stage::Semantic;

    std::set<std::string> unmatched_layers;
    std::map<std::string, ClassId> layer_overrides;
    std::set<std::string> primitive_overrides;
    std::set<InstanceId> live_instances;
    InstanceId next_instance = 1;
    std::set<std::string> accepted_flags;
    std::set<std::string> applied_events;
    long long last_seq = 0;

    std::size_t size() const { return labels.size(); }
    std::optional<std::size_t> index_of(const std::string& source_id) const;
    const PanopticLabel& label_of(const std::string& source_id) const;
    std::map<std::string, PanopticLabel> labels_by_source() const;
    std::size_t instance_count() const;

    // Same labels, flags and replay state (the drawing is compared by value).
    bool same_state(const AnnotatedDrawing& other) const;

    std::shared_ptr<const std::unordered_map<std::string, std::size_t>> index;
};

// Semantic stage: l from the first matching table row, else Unlabeled; all z
// cleared; one UnmatchedLayer flag per unmatched primitive-bearing layer.
AnnotatedDrawing assign_semantics(const ingest::FlatDrawing& drawing,
                                  const screening::ReferenceTable& table);
AnnotatedDrawing assign_semantics(std::shared_ptr<const ingest::FlatDrawing> drawing,
                                  const screening::ReferenceTable& table);

// Instance stage: one instance per (outermost block reference, thing class);
// thing primitives outside any block become singleton instances. Ids are
// dense from 1 in (refId, class) order, then unblocked ids by source id.
AnnotatedDrawing propose_instances(const AnnotatedDrawing& ann);

// Deterministically ordered flags, excluding accepted ones.
std::vector<ComplianceFlag> check_compliance(const AnnotatedDrawing& ann);

// Applies events in log order. Events whose eventId was already applied are
// skipped, which makes replay idempotent. Throws BadEvent(seq, reason).
AnnotatedDrawing apply_corrections(const AnnotatedDrawing& ann,
                                   const std::vector<CorrectionEvent>& log);

// Convenience: semantics + instances + compliance.
AnnotatedDrawing annotate(std::shared_ptr<const ingest::FlatDrawing> drawing,
                          const screening::ReferenceTable& table);

}  // namespace plancad::annotator
