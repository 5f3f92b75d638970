// Copyright 2026 The Rubricopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// JSON over HTTP under /v1. Failures use one envelope:
//   {"code": "<error code>", "message": "...", "details": ...}

#pragma once

#include <memory>
#include <string>
#include <thread>

#include "rubricopt/core/json.hpp"
#include "rubricopt/error.hpp"
#include "rubricopt/service/service.hpp"

namespace httplib {
class Server;
}

namespace rubricopt {

// 400 invalid_argument, 404 not_found, 409 conflict, 499 cancelled,
// 502 transport/protocol/classification, 500 otherwise.
int http_status(ErrorCode code);
Json error_envelope(const Error& error);

void register_routes(httplib::Server& server, Service& service);

class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Returns the bound port; 0 picks an ephemeral one. Throws
  // Error(kInvalidArgument) when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Serves until stop(). Requires bind().
  void serve();
  // serve() on a background thread.
  void start();
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace rubricopt
