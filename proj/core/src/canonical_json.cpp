#include "reasonq/canonical_json.hpp"

#include "reasonq/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <memory>

namespace reasonq {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Config: return "config";
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::ReplayMiss: return "replay-miss";
    case ErrorKind::Decode: return "decode";
    case ErrorKind::ScorerUnavailable: return "scorer-unavailable";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::VersionMismatch: return "version-mismatch";
    case ErrorKind::Degenerate: return "degenerate-input";
    case ErrorKind::Precondition: return "precondition";
  }
  return "unknown";
}

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::Validation, "non-finite number cannot be serialized");
  }
  if (value == 0.0) return "0";  // folds -0.0
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) {
    throw Error(ErrorKind::Validation, "double formatting failed");
  }
  return std::string(buf.data(), end);
}

namespace {

void dump_into(const Json& value, std::string& out) {
  switch (value.type()) {
    case Json::value_t::object: {
      out.push_back('{');
      bool first = true;
      // nlohmann::json objects are std::map-backed, so iteration is key-ordered.
      for (auto it = value.begin(); it != value.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += Json(it.key()).dump(-1, ' ', false, Json::error_handler_t::strict);
        out.push_back(':');
        dump_into(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case Json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : value) {
        if (!first) out.push_back(',');
        first = false;
        dump_into(item, out);
      }
      out.push_back(']');
      break;
    }
    case Json::value_t::number_float:
      out += format_double(value.get<double>());
      break;
    case Json::value_t::discarded:
      throw Error(ErrorKind::Validation, "discarded JSON value");
    default:
      out += value.dump(-1, ' ', false, Json::error_handler_t::strict);
      break;
  }
}

}  // namespace

std::string canonical_dump(const Json& value) {
  std::string out;
  dump_into(value, out);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::Io, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xF]);
  }
  return hex;
}

}  // namespace reasonq
