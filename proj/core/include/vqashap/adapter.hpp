#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>

#include "vqashap/protocol.hpp"
#include "vqashap/shapley.hpp"
#include "vqashap/types.hpp"

namespace vqashap {

// A model behind the wire protocol. evaluate() is safe to call from up to
// handshake().max_concurrency threads at once.
class Adapter {
 public:
  virtual ~Adapter() = default;

  virtual AdapterHandshake handshake() = 0;
  virtual EvaluateResponse evaluate(const EvaluateRequest& request) = 0;
};

struct AdapterOptions {
  std::chrono::milliseconds handshake_timeout{10'000};
  std::chrono::milliseconds request_timeout{120'000};
};

// Child process speaking NDJSON on its standard streams. `command` runs
// under /bin/sh.
std::unique_ptr<Adapter> make_exec_adapter(const std::string& command,
                                           const AdapterOptions& options = {});

// HTTP binding: every message is POSTed to `url` and answered in the body.
std::unique_ptr<Adapter> make_http_adapter(const std::string& url,
                                           const AdapterOptions& options = {});

// Parses "exec:<cmd>", "http:<url>" or "synthetic:<spec.json>". Synthetic
// adapters need the dataset the model spec refers to.
std::shared_ptr<Adapter> make_adapter(std::string_view spec,
                                      const Dataset& dataset,
                                      const AdapterOptions& options = {});

// The game for one tuple, played through an adapter.
class AdapterReward final : public RewardFunction {
 public:
  AdapterReward(Adapter& adapter, const AdapterHandshake& caps,
                std::string tuple_id, std::size_t num_features,
                std::size_t num_classes);

  RewardVector evaluate(const MaskVector& mask) override;
  std::size_t num_classes() const override { return num_classes_; }
  bool deterministic() const override { return caps_.deterministic; }
  std::size_t max_concurrency() const override { return caps_.max_concurrency; }

 private:
  Adapter& adapter_;
  AdapterHandshake caps_;
  std::string tuple_id_;
  std::size_t num_features_;
  std::size_t num_classes_;
  std::atomic<std::uint64_t> next_id_{0};
};

// Hands out per-tuple reward functions.
class RewardProvider {
 public:
  virtual ~RewardProvider() = default;

  virtual std::unique_ptr<RewardFunction> reward_for(const VqaTuple& tuple) = 0;
  virtual std::size_t max_concurrency() const = 0;
  virtual bool deterministic() const = 0;
};

class AdapterRewardProvider final : public RewardProvider {
 public:
  // Performs the handshake immediately.
  explicit AdapterRewardProvider(std::shared_ptr<Adapter> adapter);

  std::unique_ptr<RewardFunction> reward_for(const VqaTuple& tuple) override;
  std::size_t max_concurrency() const override { return caps_.max_concurrency; }
  bool deterministic() const override { return caps_.deterministic; }
  const AdapterHandshake& capabilities() const { return caps_; }

 private:
  std::shared_ptr<Adapter> adapter_;
  AdapterHandshake caps_;
};

// Adapter-side dispatch of one protocol line, for hosting an Adapter behind
// a transport. Malformed lines produce an error response, never an
// exception. Evaluate requests before a hello are refused.
class AdapterServer {
 public:
  explicit AdapterServer(Adapter& adapter) : adapter_(adapter) {}

  std::string handle(std::string_view line);
  // Serves until end of input.
  void serve(std::istream& in, std::ostream& out);

 private:
  Adapter& adapter_;
  bool greeted_ = false;
};

}  // namespace vqashap
