#include "qkvcomm/errors.hpp"

namespace qkvcomm {

const char* wire_code_name(WireCode code) {
    switch (code) {
        case WireCode::BadMagic: return "bad-magic";
        case WireCode::UnsupportedVersion: return "unsupported-version";
        case WireCode::CrcMismatch: return "crc-mismatch";
        case WireCode::Truncated: return "truncated";
        case WireCode::MalformedLength: return "malformed-length";
        case WireCode::UnrepresentableField: return "unrepresentable-field";
    }
    return "unknown";
}

}  // namespace qkvcomm
