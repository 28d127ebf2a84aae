#include "plancad/workspace.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "plancad/errors.hpp"

namespace plancad::workspace {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_failure(const std::string& what, const fs::path& path) {
    throw Error("IoError", what + " '" + path.string() + "': " + std::strerror(errno));
}

}  // namespace

bool valid_drawing_id(const std::string& id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) io_failure("cannot open", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) io_failure("cannot write", path);
    out << text;
    if (!out.flush()) io_failure("cannot write", path);
}

LogContents parse_log(const std::string& text) {
    LogContents out;
    std::size_t start = 0;
    std::size_t position = 0;
    while (start < text.size()) {
        const std::size_t nl = text.find('\n', start);
        const bool complete = nl != std::string::npos;
        const std::string_view line(text.data() + start, (complete ? nl : text.size()) - start);
        const std::size_t end = complete ? nl + 1 : text.size();
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            if (complete) out.valid_bytes = end;
            start = end;
            continue;
        }
        ++position;
        try {
            out.events.push_back(annotator::parse_log_line(line));
        } catch (const std::invalid_argument& e) {
            if (!complete) {
                out.torn_tail = true;
                break;
            }
            throw CorruptLog(position, e.what());
        }
        out.valid_bytes = end;
        start = end;
    }
    return out;
}

void append_durably(const fs::path& file, const std::string& line) {
    const int fd = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) io_failure("cannot open", file);
    std::string data = line;
    if (data.empty() || data.back() != '\n') data += '\n';
    const char* p = data.data();
    std::size_t left = data.size();
    while (left > 0) {
        const ssize_t n = ::write(fd, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            ::close(fd);
            io_failure("cannot append to", file);
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
        ::close(fd);
        io_failure("cannot sync", file);
    }
    ::close(fd);
}

Base build_base(const std::string& source_text, const screening::ReferenceTable& table) {
    Base b;
    auto flat = std::make_shared<ingest::FlatDrawing>(ingest::flatten_blocks(ingest::parse_document(source_text)));
    b.screening = screening::screen_drawing(table, *flat);
    b.drawing = flat;
    b.annotation = annotator::annotate(b.drawing, table);
    return b;
}

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
    const fs::path table_file = root_ / kTableFile;
    if (fs::exists(table_file)) {
        table_ = std::make_shared<screening::ReferenceTable>(screening::load_reference_table(read_file(table_file)));
    } else {
        table_ = std::shared_ptr<const screening::ReferenceTable>(&screening::default_reference_table(),
                                                                   [](const screening::ReferenceTable*) {});
    }
}

std::vector<std::string> Workspace::drawing_ids() const {
    std::vector<std::string> ids;
    std::error_code ec;
    for (const auto& d : fs::directory_iterator(root_, ec)) {
        const std::string name = d.path().filename().string();
        if (d.is_directory() && valid_drawing_id(name) && fs::exists(d.path() / kSourceFile)) ids.push_back(name);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool Workspace::has(const std::string& id) const {
    return valid_drawing_id(id) && fs::exists(root_ / id / kSourceFile);
}

void Workspace::add_drawing(const std::string& id, const std::string& source_text) {
    if (!valid_drawing_id(id)) throw std::invalid_argument("invalid drawing id '" + id + "'");
    fs::create_directories(dir(id));
    write_file(dir(id) / kSourceFile, source_text);
    const fs::path log = dir(id) / kLogFile;
    if (!fs::exists(log)) write_file(log, "");
    std::lock_guard lock(entries_mutex_);
    entries_.erase(id);
}

Workspace::Entry& Workspace::entry(const std::string& id) {
    if (!has(id)) throw UnknownDrawing("no drawing '" + id + "'");
    std::lock_guard lock(entries_mutex_);
    auto& slot = entries_[id];
    if (!slot) slot = std::make_unique<Entry>();
    return *slot;
}

void Workspace::load_locked(const std::string& id, Entry& e) {
    if (!e.base) e.base = std::make_shared<const Base>(build_base(read_file(dir(id) / kSourceFile), *table_));
    if (!e.log_loaded) {
        const fs::path log = dir(id) / kLogFile;
        e.log = fs::exists(log) ? parse_log(read_file(log)).events : std::vector<CorrectionEvent>{};
        e.log_loaded = true;
        e.projection.reset();
    }
    if (!e.projection) {
        try {
            e.projection = annotator::apply_corrections(e.base->annotation, e.log);
        } catch (const BadEvent& bad) {
            std::size_t position = 0;
            for (std::size_t i = 0; i < e.log.size(); ++i) {
                if (e.log[i].seq == bad.seq()) position = i + 1;
            }
            throw CorruptLog(position, bad.reason());
        }
    }
}

std::shared_ptr<const Base> Workspace::base(const std::string& id) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mutex);
    if (!e.base) e.base = std::make_shared<const Base>(build_base(read_file(dir(id) / kSourceFile), *table_));
    return e.base;
}

std::vector<CorrectionEvent> Workspace::read_log(const std::string& id) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mutex);
    load_locked(id, e);
    return e.log;
}

AnnotatedDrawing Workspace::project_state(const std::string& id) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mutex);
    load_locked(id, e);
    return *e.projection;
}

Ack Workspace::record_correction(const std::string& id, CorrectionEvent event) {
    Entry& e = entry(id);
    std::lock_guard lock(e.mutex);
    load_locked(id, e);
    for (const auto& known : e.log) {
        if (known.event_id == event.event_id) return {known, true, e.log.size()};
    }
    const long long last = e.log.empty() ? 0 : e.log.back().seq;
    if (event.seq == 0) {
        event.seq = last + 1;
    } else if (event.seq <= last) {
        throw SeqConflict("seq " + std::to_string(event.seq) + " does not follow " + std::to_string(last));
    }
    AnnotatedDrawing next = annotator::apply_corrections(*e.projection, {event});

    // Drop a torn tail left by an interrupted write before appending.
    const fs::path log = dir(id) / kLogFile;
    if (fs::exists(log)) {
        const std::string text = read_file(log);
        const LogContents parsed = parse_log(text);
        if (parsed.valid_bytes < text.size()) fs::resize_file(log, parsed.valid_bytes);
        if (parsed.valid_bytes > 0 && text[parsed.valid_bytes - 1] != '\n') append_durably(log, "");
    }
    append_durably(log, annotator::to_log_line(event));
    e.log.push_back(event);
    e.projection = std::move(next);
    return {event, false, e.log.size()};
}

}  // namespace plancad::workspace
