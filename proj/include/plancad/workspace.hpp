#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "plancad/annotator.hpp"
#include "plancad/ingest.hpp"
#include "plancad/screening.hpp"

// On-disk workspace: one directory per drawing holding the source file and
// its append-only correction log (docs/correction_log.md).
//
//   <root>/reference_table.tsv        optional; bundled table otherwise
//   <root>/<id>/source.dxf
//   <root>/<id>/corrections.jsonl
//   <root>/<id>/annotation.json       written by `plancad annotate`
namespace plancad::workspace {

using annotator::AnnotatedDrawing;
using annotator::CorrectionEvent;

inline constexpr const char* kSourceFile = "source.dxf";
inline constexpr const char* kLogFile = "corrections.jsonl";
inline constexpr const char* kAnnotationFile = "annotation.json";
inline constexpr const char* kTableFile = "reference_table.tsv";

// Drawing ids double as directory names.
bool valid_drawing_id(const std::string& id);

struct LogContents {
    std::vector<CorrectionEvent> events;
    // Bytes of complete records; anything after is a torn tail.
    std::size_t valid_bytes = 0;
    bool torn_tail = false;
};

// Parses a log file body. A trailing fragment without a newline that does
// not parse is a torn write and is ignored; any other bad record throws
// CorruptLog(position), position counting records from 1.
LogContents parse_log(const std::string& text);

// Appends one line and fsyncs the file before returning.
void append_durably(const std::filesystem::path& file, const std::string& line);

struct Base {
    std::shared_ptr<const ingest::FlatDrawing> drawing;
    screening::ScreeningReport screening;
    AnnotatedDrawing annotation;  // automated semantics + instances
};

// Parse, flatten, screen and annotate one drawing file.
Base build_base(const std::string& source_text, const screening::ReferenceTable& table);

struct Ack {
    CorrectionEvent event;  // as stored
    bool duplicate = false;
    std::size_t log_length = 0;
};

class Workspace {
public:
    explicit Workspace(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    const screening::ReferenceTable& table() const { return *table_; }

    // Sorted ids of subdirectories holding a source file.
    std::vector<std::string> drawing_ids() const;
    bool has(const std::string& id) const;

    // Creates <root>/<id>/ with the source and an empty log.
    void add_drawing(const std::string& id, const std::string& source_text);

    // Throws UnknownDrawing.
    std::shared_ptr<const Base> base(const std::string& id);
    std::vector<CorrectionEvent> read_log(const std::string& id);
    // apply_corrections(base annotation, full log), cached until the next
    // append. Throws UnknownDrawing, CorruptLog.
    AnnotatedDrawing project_state(const std::string& id);

    // Validates the event against the projected state and appends it. seq 0
    // takes the next number; an explicit seq must exceed the last one
    // (SeqConflict). A known eventId is acknowledged without appending.
    // Throws UnknownDrawing, BadEvent, SeqConflict.
    Ack record_correction(const std::string& id, CorrectionEvent event);

private:
    struct Entry {
        std::mutex mutex;
        std::shared_ptr<const Base> base;
        std::optional<AnnotatedDrawing> projection;
        std::vector<CorrectionEvent> log;
        bool log_loaded = false;
    };

    Entry& entry(const std::string& id);
    void load_locked(const std::string& id, Entry& e);
    std::filesystem::path dir(const std::string& id) const { return root_ / id; }

    std::filesystem::path root_;
    std::shared_ptr<const screening::ReferenceTable> table_;
    std::mutex entries_mutex_;
    std::map<std::string, std::unique_ptr<Entry>> entries_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace plancad::workspace
