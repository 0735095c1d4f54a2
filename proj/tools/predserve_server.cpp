// Copyright 2026 The predserve Authors.
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

#include <csignal>
#include <cstdlib>
#include <string>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "predserve/core/errors.hpp"
#include "predserve/frontend/config.hpp"
#include "predserve/frontend/http_service.hpp"
#include "predserve/frontend/serving_core.hpp"

using namespace predserve;

int main(int argc, char** argv) {
  CLI::App cli{"predserve serving process"};
  std::string config_path;
  std::string log_level = "info";
  std::size_t http_threads = 64;
  cli.add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
  cli.add_option("--log-level", log_level, "trace, debug, info, warn or error");
  cli.add_option("--http-threads", http_threads, "HTTP worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(cli, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  // Signals are handled synchronously on the main thread; block them before
  // any other thread starts so every thread inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigaddset(&signals, SIGHUP);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  try {
    auto config = frontend::load_config(config_path);
    const auto listen = config.service.listen_addr;
    frontend::ServingCore core(std::move(config));
    frontend::HttpService http(
        core, [config_path] { return frontend::load_config(config_path); }, http_threads);
    http.start(listen);
    spdlog::info("containers connect to port {}", core.container_port());

    while (true) {
      int sig = 0;
      if (sigwait(&signals, &sig) != 0) continue;
      if (sig != SIGHUP) break;
      try {
        const auto changes = core.reload(frontend::load_config(config_path));
        spdlog::info("reloaded {} ({} changes)", config_path, changes.size());
      } catch (const ConfigError& e) {
        spdlog::error("reload rejected: {}", e.what());
      }
    }
    spdlog::info("shutting down");
    http.stop();
    core.shutdown();
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("fatal: {}", e.what());
    return 1;
  }
  return 0;
}
