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

#ifndef LAPFORGE_TEXT_IO_HPP_
#define LAPFORGE_TEXT_IO_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace lapforge {

// 17 significant digits; parses back to the identical double.
std::string format_double(double v);
// Shortest text that parses back to the identical double; for display.
std::string format_short(double v);

// Strict parsers. Throw DataError naming `what` on malformed input.
double parse_double(std::string_view token, std::string_view what);
long long parse_int(std::string_view token, std::string_view what);
unsigned long long parse_u64(std::string_view token, std::string_view what);

// Splits on runs of spaces and tabs.
std::vector<std::string_view> split_ws(std::string_view line);

// Parses "a=1 b=xyz" into a map; tokens without '=' are rejected.
std::map<std::string, std::string> parse_key_values(std::string_view text,
                                                    std::string_view what);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

}  // namespace lapforge

#endif  // LAPFORGE_TEXT_IO_HPP_
