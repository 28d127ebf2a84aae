#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace plancad {

// Base for every error raised by the library. kind() is the stable,
// machine-readable name used by the CLI and the HTTP service.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define PLANCAD_SIMPLE_ERROR(Name)                                   \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& message)                    \
            : Error(#Name, message) {}                               \
    }

PLANCAD_SIMPLE_ERROR(GeometryError);
PLANCAD_SIMPLE_ERROR(NonConformalOnCurve);
PLANCAD_SIMPLE_ERROR(CycleError);
PLANCAD_SIMPLE_ERROR(EmptyDrawing);
PLANCAD_SIMPLE_ERROR(NoExtent);
PLANCAD_SIMPLE_ERROR(ShapeError);
PLANCAD_SIMPLE_ERROR(MissingWeight);
PLANCAD_SIMPLE_ERROR(OverlapError);
PLANCAD_SIMPLE_ERROR(CoverageError);
PLANCAD_SIMPLE_ERROR(MissingScore);
PLANCAD_SIMPLE_ERROR(SpecError);
PLANCAD_SIMPLE_ERROR(UnknownDrawing);
PLANCAD_SIMPLE_ERROR(SeqConflict);

#undef PLANCAD_SIMPLE_ERROR

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error("ParseError", "line " + std::to_string(line) + ": " + reason),
          line_(line), reason_(reason) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

class TableError : public Error {
public:
    TableError(std::size_t row, const std::string& reason)
        : Error("TableError", "row " + std::to_string(row) + ": " + reason),
          row_(row) {}

    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class BadEvent : public Error {
public:
    BadEvent(long long seq, const std::string& reason)
        : Error("BadEvent", "event seq " + std::to_string(seq) + ": " + reason),
          seq_(seq), reason_(reason) {}

    long long seq() const noexcept { return seq_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    long long seq_;
    std::string reason_;
};

class CorruptLog : public Error {
public:
    CorruptLog(std::size_t position, const std::string& reason)
        : Error("CorruptLog", "log record " + std::to_string(position) + ": " + reason),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

enum class FormatErrorKind {
    BadHeader,
    MissingAttribute,
    UnknownClass,
    MalformedGeometry,
    InvalidLabel,
};

const char* to_string(FormatErrorKind kind);

class FormatError : public Error {
public:
    FormatError(FormatErrorKind kind, const std::string& element, const std::string& reason)
        : Error("FormatError",
                std::string(to_string(kind)) + " in <" + element + ">: " + reason),
          format_kind_(kind), element_(element) {}

    FormatErrorKind format_kind() const noexcept { return format_kind_; }
    const std::string& element() const noexcept { return element_; }

private:
    FormatErrorKind format_kind_;
    std::string element_;
};

}  // namespace plancad
