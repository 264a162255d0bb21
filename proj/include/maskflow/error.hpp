/*
 * Copyright 2026 The maskflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MASKFLOW_ERROR_HPP_
#define MASKFLOW_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace maskflow {

// Coarse error classes. The CLI maps these onto process exit codes.
enum class ErrorCategory {
  kIo,
  kFormat,
  kConfig,
  kDimension,
  kInternal,
};

std::string_view category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace maskflow

#endif  // MASKFLOW_ERROR_HPP_
