// ensdist/tensor.hpp

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

#ifndef ENSDIST_TENSOR_HPP_
#define ENSDIST_TENSOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace ensdist {
namespace nn {

// Dense row-major matrix of doubles. Row vectors are 1 x n. All model math
// runs in double precision.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  static Tensor row_vector(std::vector<double> values) {
    Tensor t;
    t.rows = 1;
    t.cols = static_cast<int>(values.size());
    t.data = std::move(values);
    return t;
  }

  int64_t size() const { return static_cast<int64_t>(rows) * cols; }
  bool empty() const { return data.empty(); }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return data[static_cast<size_t>(r) * cols + c];
  }

  bool same_shape(const Tensor& o) const {
    return rows == o.rows && cols == o.cols;
  }

  std::vector<int> shape() const { return {rows, cols}; }

  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

}  // namespace nn
}  // namespace ensdist

#endif  // ENSDIST_TENSOR_HPP_
