#pragma once

#include <stdexcept>
#include <string>

namespace fieldline {

// Error codes mirror the CLI's machine-parseable "E:<code>:<detail>" lines.
enum class ErrorCode {
    Io,        // file system / decode failures
    Config,    // invalid configuration value
    Shape,     // dimension mismatch between masks/scenes
    Bounds,    // rect or offset outside an extent
    Rle,       // corrupt run-length data
    Protocol,  // external backend wrote an invalid response
    Backend,   // external backend process failed
    Empty,     // operation on an empty mask
    Ring,      // open or degenerate polygon ring
    Manifest,  // unreadable dataset manifest
    Bench,     // benchmark harness misuse
    Eval       // undefined metric (e.g. AP with zero ground truth)
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::Io: return "IO";
        case ErrorCode::Config: return "CONFIG";
        case ErrorCode::Shape: return "SHAPE";
        case ErrorCode::Bounds: return "BOUNDS";
        case ErrorCode::Rle: return "RLE";
        case ErrorCode::Protocol: return "PROTOCOL";
        case ErrorCode::Backend: return "BACKEND";
        case ErrorCode::Empty: return "EMPTY";
        case ErrorCode::Ring: return "RING";
        case ErrorCode::Manifest: return "MANIFEST";
        case ErrorCode::Bench: return "BENCH";
        case ErrorCode::Eval: return "EVAL";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& detail)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + detail),
          code_(code), detail_(detail) {}

    ErrorCode code() const { return code_; }
    const std::string& detail() const { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace fieldline
