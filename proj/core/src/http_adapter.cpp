#include <httplib.h>

#include <mutex>
#include <optional>

#include "vqashap/adapter.hpp"
#include "vqashap/errors.hpp"

namespace vqashap {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw Error(ErrorCode::kInvalidArgument,
                "adapter url must start with http://, got '" + url + "'");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpAdapter final : public Adapter {
 public:
  HttpAdapter(const std::string& url, const AdapterOptions& options)
      : url_(split_url(url)), options_(options) {}

  AdapterHandshake handshake() override {
    std::lock_guard lock(mutex_);
    if (!caps_) {
      caps_ = parse_capabilities(post(encode_hello(), options_.handshake_timeout));
    }
    return *caps_;
  }

  EvaluateResponse evaluate(const EvaluateRequest& request) override {
    return parse_response(post(encode_request(request), options_.request_timeout));
  }

 private:
  std::string post(const std::string& body, std::chrono::milliseconds timeout) {
    httplib::Client client(url_.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto result = client.Post(url_.path, body, "application/json");
    if (!result) {
      const auto err = result.error();
      const ErrorCode code = err == httplib::Error::Read ||
                                     err == httplib::Error::Connection ||
                                     err == httplib::Error::ConnectionTimeout
                                 ? ErrorCode::kTimeout
                                 : ErrorCode::kProtocol;
      throw Error(code, "adapter at " + url_.origin + url_.path +
                            " unreachable: " + httplib::to_string(err));
    }
    if (result->status != 200) {
      throw Error(ErrorCode::kProtocol,
                  "adapter answered HTTP " + std::to_string(result->status));
    }
    return result->body;
  }

  ParsedUrl url_;
  AdapterOptions options_;
  std::mutex mutex_;
  std::optional<AdapterHandshake> caps_;
};

}  // namespace

std::unique_ptr<Adapter> make_http_adapter(const std::string& url,
                                           const AdapterOptions& options) {
  return std::make_unique<HttpAdapter>(url, options);
}

}  // namespace vqashap
