#include "reasonq/provider.hpp"

#include <httplib.h>

namespace reasonq {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::Config, "URL lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResult post(const std::string& url, const std::map<std::string, std::string>& headers,
                  const std::string& body) override {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      throw TransportError("transport failure talking to " + origin + ": " + httplib::to_string(res.error()), 0, true);
    }
    return {res->status, res->body};
  }

 private:
  std::chrono::milliseconds timeout_;
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport(std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

}  // namespace reasonq
