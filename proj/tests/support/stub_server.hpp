#pragma once

#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

namespace qaguide::testing {

// An httplib server on a free loopback port, serving on a background thread.
class StubServer {
 public:
  StubServer() : server_(std::make_unique<httplib::Server>()) {}
  ~StubServer() { stop(); }
  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  httplib::Server& operator*() { return *server_; }
  httplib::Server* operator->() { return server_.get(); }

  void start() {
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }
  void stop() {
    if (thread_.joinable()) {
      server_->stop();
      thread_.join();
    }
  }
  int port() const { return port_; }
  std::string url(const std::string& path = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

inline std::string chat_reply(const std::string& content) {
  return std::string(R"({"choices":[{"message":{"role":"assistant","content":)") +
         "\"" + content + "\"}}],\"usage\":{\"prompt_tokens\":7,\"completion_tokens\":3}}";
}

}  // namespace qaguide::testing
