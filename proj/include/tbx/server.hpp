#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "tbx/pipeline.hpp"
#include "tbx/store.hpp"

namespace httplib {
class Server;
}

namespace tbx {

// JSON API over a pipeline and its store. Routes live under /api.
class Service {
 public:
  Service(PipelineConfig cfg, RecordStore& store);
  ~Service();

  // Binds to `host:port` (port 0 picks a free one) and returns the port.
  // Throws Error(kConfigError) when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void listen();
  void stop();

  httplib::Server& server() noexcept { return *server_; }

 private:
  void mount();

  Pipeline pipeline_;
  RecordStore& store_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex plans_mu_;
  std::map<std::string, RenamePlan> plans_;  // by hash
};

}  // namespace tbx
