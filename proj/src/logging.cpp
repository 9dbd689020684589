// SPDX-License-Identifier: Apache-2.0

#include "physcorr/logging.hpp"

#include <cstdlib>
#include <iostream>

namespace physcorr::log {

namespace {

Level parse_env() {
  const char* v = std::getenv("PHYSCORR_LOG");
  if (v == nullptr) return Level::info;
  const std::string s(v);
  if (s == "error") return Level::error;
  if (s == "debug") return Level::debug;
  return Level::info;
}

Level& current() {
  static Level lvl = parse_env();
  return lvl;
}

}  // namespace

Level level() { return current(); }

void set_level(Level lvl) { current() = lvl; }

void error(const std::string& msg) { std::cerr << "[error] " << msg << "\n"; }

void info(const std::string& msg) {
  if (current() >= Level::info) std::cerr << "[info] " << msg << "\n";
}

void debug(const std::string& msg) {
  if (current() >= Level::debug) std::cerr << "[debug] " << msg << "\n";
}

}  // namespace physcorr::log
