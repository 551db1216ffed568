// Copyright 2026 The lapforge Authors.
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

#ifndef LAPFORGE_CLI_HPP_
#define LAPFORGE_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace lapforge {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Runs the command line `args` (without the program name). Normal output goes
// to `out`, diagnostics and progress to `err`. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Every default, one key=value per line.
std::string default_config_dump();

}  // namespace lapforge

#endif  // LAPFORGE_CLI_HPP_
