#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "harmlens/snapshot.hpp"

namespace harmlens {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handlers for the dashboard API, independent of the transport.
/// Every handler is a pure function of the snapshot and its arguments.
/// Failures use the envelope {"error": {"code", "message", "fields"?}}.
class Api {
 public:
  explicit Api(Snapshot snapshot);

  const Snapshot& snapshot() const noexcept { return snapshot_; }

  HttpResponse get_meta() const;
  /// mode: "glyph" (default) or "single_harm"; harm: "miscalibration",
  /// "stereotype" or "filter_bubble", required for single_harm.
  HttpResponse get_space(std::optional<std::string_view> mode,
                         std::optional<std::string_view> harm) const;
  HttpResponse get_user(std::string_view user_id) const;
  HttpResponse get_harm_distribution() const;
  HttpResponse post_counterfactual(std::string_view body) const;

 private:
  Snapshot snapshot_;
  CounterfactualPopulation population_;
};

/// HTTP front end for an Api. Serves the JSON endpoints under /api and,
/// when given, the dashboard bundle directory at /.
class Server {
 public:
  Server(const Api& api, std::optional<std::filesystem::path> static_dir = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace harmlens
