#include <httplib.h>

#include "surgraw/provider.hpp"

namespace surgraw::provider {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  explicit HttplibTransport(std::string base_url) : base_url_(std::move(base_url)) {}

  HttpResult post(const std::string& path, const std::string& body, const HttpHeaders& headers,
                  std::chrono::milliseconds timeout) override {
    // One client per call: requests from different threads must not share a socket.
    httplib::Client client(base_url_);
    if (!client.is_valid()) throw TransportError("invalid endpoint '" + base_url_ + "'");
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      throw TransportError("POST " + base_url_ + path + " failed: " + httplib::to_string(res.error()));
    }
    return HttpResult{res->status, res->body};
  }

 private:
  std::string base_url_;
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport(const std::string& base_url) {
  return std::make_shared<HttplibTransport>(base_url);
}

}  // namespace surgraw::provider
