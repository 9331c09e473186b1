#pragma once

#include <stdexcept>
#include <string>

namespace qds {

// Invalid parameters, configuration, or inputs. CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Protocol state violations: key reuse, malformed declarations, channel
// misuse, session liveness failures. CLI maps this to exit code 2.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FrameErrorKind {
    truncated,       // fewer bytes than the length prefix promises
    length_mismatch, // trailing bytes beyond the framed payload
    bad_json,        // payload is not valid JSON
    bad_fields,      // JSON lacks the required frame fields
    unknown_type,    // type string not in the protocol vocabulary
};

class FrameError : public ProtocolError {
public:
    FrameError(FrameErrorKind kind, const std::string& what)
        : ProtocolError(what), kind_(kind) {}
    FrameErrorKind kind() const { return kind_; }

private:
    FrameErrorKind kind_;
};

} // namespace qds
