// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace physcorr::log {

enum class Level { error = 0, info = 1, debug = 2 };

// Resolved once from PHYSCORR_LOG ({error, info, debug}; default info).
Level level();

void set_level(Level lvl);

void error(const std::string& msg);
void info(const std::string& msg);
void debug(const std::string& msg);

}  // namespace physcorr::log
