#include "vqashap/adapter.hpp"

#include <istream>
#include <ostream>

#include "vqashap/errors.hpp"
#include "vqashap/synthetic.hpp"

namespace vqashap {

AdapterReward::AdapterReward(Adapter& adapter, const AdapterHandshake& caps,
                             std::string tuple_id, std::size_t num_features,
                             std::size_t num_classes)
    : adapter_(adapter),
      caps_(caps),
      tuple_id_(std::move(tuple_id)),
      num_features_(num_features),
      num_classes_(num_classes) {}

RewardVector AdapterReward::evaluate(const MaskVector& mask) {
  if (mask.size() != num_features_) {
    throw Error(ErrorCode::kShapeMismatch,
                "mask of " + std::to_string(mask.size()) + " bits for tuple '" +
                    tuple_id_ + "' with " + std::to_string(num_features_) +
                    " features");
  }
  EvaluateRequest request;
  request.request_id = tuple_id_ + "#" + std::to_string(next_id_.fetch_add(1));
  request.tuple_id = tuple_id_;
  request.mask_hex = encode_mask_hex(mask);
  EvaluateResponse response = adapter_.evaluate(request);
  if (response.request_id != request.request_id) {
    throw Error(ErrorCode::kProtocol,
                "response id '" + response.request_id + "' does not match '" +
                    request.request_id + "'");
  }
  if (!response.ok()) {
    const auto& err = response.error();
    throw Error(err.code == protocol_codes::kUnknownTuple
                    ? ErrorCode::kUnknownTuple
                    : ErrorCode::kRewardFailure,
                "adapter error " + err.code + ": " + err.message);
  }
  RewardVector r = response.logits();
  if (r.size() != num_classes_) {
    throw Error(ErrorCode::kShapeMismatch,
                "adapter returned " + std::to_string(r.size()) +
                    " logits for a tuple with " + std::to_string(num_classes_) +
                    " choices");
  }
  return r;
}

AdapterRewardProvider::AdapterRewardProvider(std::shared_ptr<Adapter> adapter)
    : adapter_(std::move(adapter)), caps_(adapter_->handshake()) {}

std::unique_ptr<RewardFunction> AdapterRewardProvider::reward_for(
    const VqaTuple& tuple) {
  return std::make_unique<AdapterReward>(*adapter_, caps_, tuple.tuple_id,
                                         build_modality_layout(tuple).size(),
                                         tuple.choices.size());
}

// AdapterServer -------------------------------------------------------------

std::string AdapterServer::handle(std::string_view line) {
  auto error = [](std::string id, std::string_view code, std::string message) {
    EvaluateResponse r;
    r.request_id = std::move(id);
    r.body = ProtocolError{std::string(code), std::move(message)};
    return encode_response(r);
  };

  AdapterInbound message;
  try {
    message = parse_inbound(line);
  } catch (const Error& e) {
    return error("", protocol_codes::kBadRequest, e.what());
  }

  if (const auto* hello = std::get_if<HelloMessage>(&message)) {
    if (hello->version != kProtocolVersion) {
      return error("", protocol_codes::kVersionMismatch,
                   "adapter speaks version " + std::to_string(kProtocolVersion));
    }
    greeted_ = true;
    return encode_capabilities(adapter_.handshake());
  }

  const auto& request = std::get<EvaluateRequest>(message);
  if (!greeted_) {
    return error(request.request_id, protocol_codes::kNotReady,
                 "send hello before evaluate");
  }
  try {
    return encode_response(adapter_.evaluate(request));
  } catch (const std::exception& e) {
    return error(request.request_id, protocol_codes::kModelFailure, e.what());
  }
}

void AdapterServer::serve(std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << handle(line) << '\n';
    out.flush();
  }
}

std::shared_ptr<Adapter> make_adapter(std::string_view spec,
                                      const Dataset& dataset,
                                      const AdapterOptions& options) {
  if (spec.starts_with("exec:")) {
    return make_exec_adapter(std::string(spec.substr(5)), options);
  }
  if (spec.starts_with("http:")) {
    std::string url(spec.substr(5));
    if (url.starts_with("//")) url = "http:" + url;
    return make_http_adapter(url, options);
  }
  if (spec.starts_with("synthetic:")) {
    return std::make_shared<SyntheticAdapter>(
        dataset, load_synthetic(std::string(spec.substr(10))));
  }
  throw Error(ErrorCode::kInvalidArgument,
              "adapter spec must be exec:<cmd>, http:<url> or "
              "synthetic:<spec.json>, got '" +
                  std::string(spec) + "'");
}

}  // namespace vqashap
