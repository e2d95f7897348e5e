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

#include "genleak/tensor.h"

#include <algorithm>
#include <cmath>

GENLEAK_NAMESPACE_BEGIN

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void check_extents(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) {
      throw ShapeError("tensor extents must be positive, got " +
                       shape_str(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError(internal::str_cat("tensor shape ", shape_str(shape_),
                                       " holds ", shape_numel(shape_),
                                       " values, got ", data_.size()));
  }
}

Tensor Tensor::scalar(Real value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::from(Shape shape, std::initializer_list<Real> values) {
  return Tensor(std::move(shape), std::vector<Real>(values));
}

Real Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

std::span<Real> Tensor::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), Real{0});
  return grad_;
}

void Tensor::zero_grad() { grad_.assign(data_.size(), Real{0}); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " to " +
                     shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](Real v) { return std::isfinite(v); });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ShapeError(internal::str_cat("concat_rows: ", shape_str(a.shape()), " vs ", shape_str(b.shape())));
  }
  Shape s = a.shape();
  s[0] += b.dim(0);
  std::vector<Real> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Tensor(std::move(s), std::move(data));
}

Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows) {
  if (t.rank() == 0) throw ShapeError("take_rows: scalar tensor");
  std::size_t per = t.numel() / std::max<std::size_t>(t.dim(0), 1);
  Shape s = t.shape();
  s[0] = rows.size();
  Tensor out(s);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= t.dim(0)) {
      throw InvalidArgument(internal::str_cat("take_rows: row ", rows[i], " out of range (", t.dim(0), ")"));
    }
    std::copy_n(t.data().begin() + static_cast<long>(rows[i] * per), per,
                out.data().begin() + static_cast<long>(i * per));
  }
  return out;
}

GENLEAK_NAMESPACE_END
