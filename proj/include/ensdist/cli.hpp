// ensdist/cli.hpp

// Copyright 2026 The ensdist Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ENSDIST_CLI_HPP_
#define ENSDIST_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace ensdist {
namespace cli {

// Runs one CLI invocation (args exclude the program name) and returns the
// process exit code: 0 success, 2 config error, 3 data error, 4 numeric
// failure, 1 anything else.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace cli
}  // namespace ensdist

#endif  // ENSDIST_CLI_HPP_
