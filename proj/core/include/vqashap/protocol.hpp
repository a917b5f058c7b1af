#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vqashap/types.hpp"

namespace vqashap {

// Wire protocol v1: one JSON object per line, UTF-8.
//   engine  -> adapter  {"type":"hello","version":1}
//   adapter -> engine   {"type":"capabilities","deterministic":bool,
//                        "max_concurrency":int,"supports_batching":bool}
//   engine  -> adapter  {"type":"evaluate","request_id":str,"tuple_id":str,
//                        "mask_hex":str}
//   adapter -> engine   {"type":"logits","request_id":str,"logits":[num,...]}
//                    or {"type":"error","request_id":str,"code":str,
//                        "message":str}
inline constexpr int kProtocolVersion = 1;

struct AdapterHandshake {
  int protocol_version = kProtocolVersion;
  bool deterministic = true;
  std::size_t max_concurrency = 1;
  bool supports_batching = false;

  friend bool operator==(const AdapterHandshake&,
                         const AdapterHandshake&) = default;
};

struct EvaluateRequest {
  std::string request_id;
  std::string tuple_id;
  std::string mask_hex;

  friend bool operator==(const EvaluateRequest&,
                         const EvaluateRequest&) = default;
};

struct ProtocolError {
  std::string code;
  std::string message;

  friend bool operator==(const ProtocolError&, const ProtocolError&) = default;
};

struct EvaluateResponse {
  std::string request_id;
  std::variant<RewardVector, ProtocolError> body;

  bool ok() const { return std::holds_alternative<RewardVector>(body); }
  const RewardVector& logits() const { return std::get<RewardVector>(body); }
  const ProtocolError& error() const { return std::get<ProtocolError>(body); }

  friend bool operator==(const EvaluateResponse&,
                         const EvaluateResponse&) = default;
};

// Error codes adapters report in error responses.
namespace protocol_codes {
inline constexpr std::string_view kUnknownTuple = "unknown_tuple";
inline constexpr std::string_view kMaskLength = "mask_length";
inline constexpr std::string_view kModelFailure = "model_failure";
inline constexpr std::string_view kBadRequest = "bad_request";
inline constexpr std::string_view kVersionMismatch = "version_mismatch";
inline constexpr std::string_view kNotReady = "handshake_required";
}  // namespace protocol_codes

// The mask read as the integer sum(bit_i * 2^i), written as exactly
// ceil(M/4) lowercase hex digits, most significant first.
std::string encode_mask_hex(const MaskVector& mask);
MaskVector decode_mask_hex(std::string_view hex, std::size_t size);

struct HelloMessage {
  int version = kProtocolVersion;
};

// Messages an adapter receives.
using AdapterInbound = std::variant<HelloMessage, EvaluateRequest>;

std::string encode_hello(int version = kProtocolVersion);
std::string encode_capabilities(const AdapterHandshake& caps);
std::string encode_request(const EvaluateRequest& request);
std::string encode_response(const EvaluateResponse& response);

// Engine side. A capabilities line may carry an optional "version"; an
// error line or a version other than 1 raises kVersionMismatch.
AdapterHandshake parse_capabilities(std::string_view line);
EvaluateResponse parse_response(std::string_view line);

// Adapter side; throws Error(kProtocol) on malformed lines.
AdapterInbound parse_inbound(std::string_view line);

// One generated token with the logits the model assigned to each choice
// label at that position.
struct GeneratedToken {
  std::string text;
  std::map<std::string, double> label_logits;
};

// Reads the logits at the first generated token that is a choice label
// (ignoring surrounding whitespace and punctuation); falls back to the first
// token when none is. Result is ordered like `labels`.
RewardVector extract_choice_logits(std::span<const GeneratedToken> output,
                                   const std::vector<std::string>& labels);

}  // namespace vqashap
