// Copyright 2026 The genleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GENLEAK_IO_H_
#define GENLEAK_IO_H_

#include <string>
#include <string_view>

#include "genleak/common.h"

GENLEAK_NAMESPACE_BEGIN

// Writes to "<path>.tmp" and renames over `path`, so readers never observe a
// partial file.
void atomic_write_file(const std::string& path, std::string_view contents);
std::string read_file(const std::string& path);

// Shortest text form of a double that reads back to the same value.
std::string format_number(double v);

GENLEAK_NAMESPACE_END

#endif  // GENLEAK_IO_H_
