#include "vqashap/protocol.hpp"

#include <algorithm>
#include <cctype>

#include "json.hpp"
#include "vqashap/errors.hpp"

namespace vqashap {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char ch) {
  if (ch >= '0' && ch <= '9') return ch - '0';
  if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
  if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
  return -1;
}

ordered_json parse_line(std::string_view line) {
  try {
    ordered_json j = ordered_json::parse(line.begin(), line.end());
    if (!j.is_object()) {
      throw Error(ErrorCode::kProtocol, "protocol message is not an object");
    }
    return j;
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::kProtocol,
                std::string("malformed protocol line: ") + e.what());
  }
}

template <typename T>
T field(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw Error(ErrorCode::kProtocol,
                std::string("protocol message lacks '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const ordered_json::exception&) {
    throw Error(ErrorCode::kProtocol,
                std::string("protocol field '") + key + "' has the wrong type");
  }
}

std::string message_type(const ordered_json& j) {
  return field<std::string>(j, "type");
}

}  // namespace

std::string encode_mask_hex(const MaskVector& mask) {
  const std::size_t digits = (mask.size() + 3) / 4;
  std::string out(digits, '0');
  for (std::size_t d = 0; d < digits; ++d) {
    unsigned nibble = 0;
    for (std::size_t b = 0; b < 4; ++b) {
      const std::size_t i = d * 4 + b;
      if (i < mask.size() && mask[i]) nibble |= 1u << b;
    }
    out[digits - 1 - d] = kHexDigits[nibble];
  }
  return out;
}

MaskVector decode_mask_hex(std::string_view hex, std::size_t size) {
  const std::size_t digits = (size + 3) / 4;
  if (hex.size() != digits) {
    throw Error(ErrorCode::kShapeMismatch,
                "mask_hex has " + std::to_string(hex.size()) +
                    " digits, expected " + std::to_string(digits) + " for " +
                    std::to_string(size) + " features");
  }
  std::vector<bool> bits(size, false);
  for (std::size_t d = 0; d < digits; ++d) {
    const int nibble = hex_value(hex[digits - 1 - d]);
    if (nibble < 0) {
      throw Error(ErrorCode::kProtocol, "mask_hex contains a non-hex digit");
    }
    for (std::size_t b = 0; b < 4; ++b) {
      if (!(nibble & (1 << b))) continue;
      const std::size_t i = d * 4 + b;
      if (i >= size) {
        throw Error(ErrorCode::kShapeMismatch,
                    "mask_hex sets bits beyond the feature count");
      }
      bits[i] = true;
    }
  }
  return MaskVector(bits);
}

std::string encode_hello(int version) {
  ordered_json j;
  j["type"] = "hello";
  j["version"] = version;
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::string encode_capabilities(const AdapterHandshake& caps) {
  ordered_json j;
  j["type"] = "capabilities";
  j["deterministic"] = caps.deterministic;
  j["max_concurrency"] = caps.max_concurrency;
  j["supports_batching"] = caps.supports_batching;
  if (caps.protocol_version != kProtocolVersion) {
    j["version"] = caps.protocol_version;
  }
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::string encode_request(const EvaluateRequest& request) {
  ordered_json j;
  j["type"] = "evaluate";
  j["request_id"] = request.request_id;
  j["tuple_id"] = request.tuple_id;
  j["mask_hex"] = request.mask_hex;
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

std::string encode_response(const EvaluateResponse& response) {
  ordered_json j;
  if (response.ok()) {
    j["type"] = "logits";
    j["request_id"] = response.request_id;
    j["logits"] = response.logits().logits;
  } else {
    j["type"] = "error";
    j["request_id"] = response.request_id;
    j["code"] = response.error().code;
    j["message"] = response.error().message;
  }
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

AdapterHandshake parse_capabilities(std::string_view line) {
  const ordered_json j = parse_line(line);
  const std::string type = message_type(j);
  if (type == "error") {
    const auto code = j.value("code", std::string());
    const auto message = j.value("message", std::string());
    if (code == protocol_codes::kVersionMismatch) {
      throw Error(ErrorCode::kVersionMismatch,
                  "adapter rejected protocol version " +
                      std::to_string(kProtocolVersion) + ": " + message);
    }
    throw Error(ErrorCode::kProtocol,
                "adapter refused handshake: " + code + ": " + message);
  }
  if (type != "capabilities") {
    throw Error(ErrorCode::kProtocol,
                "expected a capabilities message, got '" + type + "'");
  }
  AdapterHandshake caps;
  if (j.contains("version")) caps.protocol_version = field<int>(j, "version");
  if (caps.protocol_version != kProtocolVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "adapter speaks protocol version " +
                    std::to_string(caps.protocol_version) + ", engine speaks " +
                    std::to_string(kProtocolVersion));
  }
  caps.deterministic = field<bool>(j, "deterministic");
  const auto conc = field<long long>(j, "max_concurrency");
  if (conc < 1) {
    throw Error(ErrorCode::kProtocol, "max_concurrency must be >= 1");
  }
  caps.max_concurrency = static_cast<std::size_t>(conc);
  caps.supports_batching = field<bool>(j, "supports_batching");
  return caps;
}

EvaluateResponse parse_response(std::string_view line) {
  const ordered_json j = parse_line(line);
  const std::string type = message_type(j);
  EvaluateResponse response;
  response.request_id = field<std::string>(j, "request_id");
  if (type == "logits") {
    RewardVector r{field<std::vector<double>>(j, "logits")};
    response.body = std::move(r);
  } else if (type == "error") {
    response.body = ProtocolError{field<std::string>(j, "code"),
                                  field<std::string>(j, "message")};
  } else {
    throw Error(ErrorCode::kProtocol, "unexpected response type '" + type + "'");
  }
  return response;
}

AdapterInbound parse_inbound(std::string_view line) {
  const ordered_json j = parse_line(line);
  const std::string type = message_type(j);
  if (type == "hello") return HelloMessage{field<int>(j, "version")};
  if (type == "evaluate") {
    return EvaluateRequest{field<std::string>(j, "request_id"),
                           field<std::string>(j, "tuple_id"),
                           field<std::string>(j, "mask_hex")};
  }
  throw Error(ErrorCode::kProtocol, "unknown message type '" + type + "'");
}

namespace {

std::string_view strip_token(std::string_view text) {
  auto junk = [](unsigned char ch) {
    return std::isspace(ch) || ch == '.' || ch == ',' || ch == ':' ||
           ch == ')' || ch == '(' || ch == '"' || ch == '\'';
  };
  while (!text.empty() && junk(text.front())) text.remove_prefix(1);
  while (!text.empty() && junk(text.back())) text.remove_suffix(1);
  return text;
}

}  // namespace

RewardVector extract_choice_logits(std::span<const GeneratedToken> output,
                                   const std::vector<std::string>& labels) {
  if (output.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "model produced no tokens");
  }
  const GeneratedToken* chosen = &output.front();
  for (const auto& token : output) {
    const std::string_view core = strip_token(token.text);
    if (std::find(labels.begin(), labels.end(), core) != labels.end()) {
      chosen = &token;
      break;
    }
  }
  RewardVector r;
  r.logits.reserve(labels.size());
  for (const auto& label : labels) {
    auto it = chosen->label_logits.find(label);
    if (it == chosen->label_logits.end()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "token '" + chosen->text + "' carries no logit for label " +
                      label);
    }
    r.logits.push_back(it->second);
  }
  return r;
}

}  // namespace vqashap
