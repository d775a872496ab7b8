#pragma once

#include <memory>
#include <string>

#include "rite/backend.hpp"

namespace rite {

// Serves any LmBackend over the /v1 wire protocol. Used to expose the toy
// model to remote clients and as the reference peer for RemoteBackend.
//
// Status codes: 400 malformed body or bad span, 404 no token overlaps the
// span, 413 context overflow, 422 temperature != 0 or n != 1,
// 503 backend unavailable.
class WireServer {
 public:
  explicit WireServer(std::shared_ptr<const LmBackend> backend);
  ~WireServer();

  WireServer(const WireServer&) = delete;
  WireServer& operator=(const WireServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);

  // Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);

  void stop();
  int port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rite
