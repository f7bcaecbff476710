// Copyright (c) 2026 MCSAE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mcsae/tensor.h"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "mcsae/errors.h"

namespace mcsae {

namespace {

size_t NumelOf(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

void CheckShapeValid(const std::vector<size_t>& shape, const char* op) {
  if (shape.empty())
    throw DimensionError(std::string(op) + ": shape must have at least one axis");
  for (size_t d : shape)
    if (d == 0)
      throw DimensionError(std::string(op) + ": zero-sized axis");
}

void CheckDefined(const Tensor& t, const char* op) {
  if (!t.Defined())
    throw ContractError(std::string(op) + ": undefined tensor");
}

void CheckSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.Shape() != b.Shape())
    throw DimensionError(std::string(op) + ": shape mismatch");
}

void CheckRank(const Tensor& t, size_t rank, const char* op) {
  if (t.Rank() != rank)
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + ", got " +
                         std::to_string(t.Rank()));
}

bool Recording() { return !NoGradGuard::Active(); }

// Wires y into the graph when recording is on and at least one input wants
// gradient. fn must capture y's impl as a raw pointer (y owns the closure;
// an owning capture would leak the whole graph) and the inputs it reads as
// shared_ptrs so their data outlives the forward pass.
void Attach(Tensor& y, const std::vector<Tensor>& inputs,
            std::function<void()> fn) {
  if (!Recording()) return;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  for (const Tensor& in : inputs)
    if (in.Defined() && in.RequiresGrad()) parents.push_back(in.impl());
  if (parents.empty()) return;
  TensorImpl* impl = y.impl().get();
  impl->requires_grad = true;
  impl->parents = std::move(parents);
  impl->backward_fn = std::move(fn);
}

}  // namespace

Tensor Tensor::Zeros(std::vector<size_t> shape, bool requires_grad) {
  CheckShapeValid(shape, "Zeros");
  auto impl = std::make_shared<TensorImpl>();
  impl->data.assign(NumelOf(shape), 0.0);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::Full(std::vector<size_t> shape, double value,
                    bool requires_grad) {
  Tensor t = Zeros(std::move(shape), requires_grad);
  std::fill(t.Data().begin(), t.Data().end(), value);
  return t;
}

Tensor Tensor::FromVector(std::vector<size_t> shape,
                          std::vector<double> values, bool requires_grad) {
  CheckShapeValid(shape, "FromVector");
  if (NumelOf(shape) != values.size())
    throw DimensionError("FromVector: " + std::to_string(values.size()) +
                         " values for a shape of " +
                         std::to_string(NumelOf(shape)) + " elements");
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return FromVector({1}, {value}, requires_grad);
}

const std::vector<size_t>& Tensor::Shape() const {
  CheckDefined(*this, "Shape");
  return impl_->shape;
}

size_t Tensor::Rank() const { return Shape().size(); }

size_t Tensor::Numel() const {
  CheckDefined(*this, "Numel");
  return impl_->Numel();
}

size_t Tensor::Dim(size_t axis) const {
  const auto& s = Shape();
  if (axis >= s.size()) throw DimensionError("Dim: axis out of range");
  return s[axis];
}

std::vector<double>& Tensor::Data() {
  CheckDefined(*this, "Data");
  return impl_->data;
}

const std::vector<double>& Tensor::Data() const {
  CheckDefined(*this, "Data");
  return impl_->data;
}

std::vector<double>& Tensor::Grad() {
  CheckDefined(*this, "Grad");
  impl_->EnsureGrad();
  return impl_->grad;
}

void Tensor::ZeroGrad() {
  CheckDefined(*this, "ZeroGrad");
  impl_->grad.assign(impl_->data.size(), 0.0);
}

bool Tensor::RequiresGrad() const {
  return impl_ != nullptr && impl_->requires_grad;
}

void Tensor::SetRequiresGrad(bool value) {
  CheckDefined(*this, "SetRequiresGrad");
  impl_->requires_grad = value;
}

double Tensor::Item() const {
  CheckDefined(*this, "Item");
  if (impl_->Numel() != 1)
    throw ContractError("Item: tensor has " + std::to_string(impl_->Numel()) +
                        " elements");
  return impl_->data[0];
}

double Tensor::At(std::initializer_list<size_t> index) const {
  const auto& s = Shape();
  if (index.size() != s.size())
    throw DimensionError("At: index rank mismatch");
  size_t flat = 0;
  size_t axis = 0;
  for (size_t i : index) {
    if (i >= s[axis]) throw IndexError("At: index out of range");
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

// ---------------------------------------------------------------------------
// Elementwise ops

Tensor Add(const Tensor& a, const Tensor& b) {
  CheckDefined(a, "Add");
  CheckDefined(b, "Add");
  CheckSameShape(a, b, "Add");
  auto ai = a.impl();
  auto bi = b.impl();
  size_t n = ai->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = ai->data[i] + bi->data[i];
  Tensor y = Tensor::FromVector(ai->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {a, b}, [self, ai, bi] {
    size_t n = self->Numel();
    if (ai->requires_grad)
      for (size_t i = 0; i < n; ++i) ai->grad[i] += self->grad[i];
    if (bi->requires_grad)
      for (size_t i = 0; i < n; ++i) bi->grad[i] += self->grad[i];
  });
  return y;
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  CheckDefined(a, "Sub");
  CheckDefined(b, "Sub");
  CheckSameShape(a, b, "Sub");
  auto ai = a.impl();
  auto bi = b.impl();
  size_t n = ai->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = ai->data[i] - bi->data[i];
  Tensor y = Tensor::FromVector(ai->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {a, b}, [self, ai, bi] {
    size_t n = self->Numel();
    if (ai->requires_grad)
      for (size_t i = 0; i < n; ++i) ai->grad[i] += self->grad[i];
    if (bi->requires_grad)
      for (size_t i = 0; i < n; ++i) bi->grad[i] -= self->grad[i];
  });
  return y;
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  CheckDefined(a, "Mul");
  CheckDefined(b, "Mul");
  CheckSameShape(a, b, "Mul");
  auto ai = a.impl();
  auto bi = b.impl();
  size_t n = ai->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = ai->data[i] * bi->data[i];
  Tensor y = Tensor::FromVector(ai->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {a, b}, [self, ai, bi] {
    size_t n = self->Numel();
    if (ai->requires_grad)
      for (size_t i = 0; i < n; ++i) ai->grad[i] += self->grad[i] * bi->data[i];
    if (bi->requires_grad)
      for (size_t i = 0; i < n; ++i) bi->grad[i] += self->grad[i] * ai->data[i];
  });
  return y;
}

Tensor AddScalar(const Tensor& x, double c) {
  CheckDefined(x, "AddScalar");
  auto xi = x.impl();
  size_t n = xi->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = xi->data[i] + c;
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi] {
    for (size_t i = 0; i < self->Numel(); ++i) xi->grad[i] += self->grad[i];
  });
  return y;
}

Tensor MulScalar(const Tensor& x, double c) {
  CheckDefined(x, "MulScalar");
  auto xi = x.impl();
  size_t n = xi->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = xi->data[i] * c;
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, c] {
    for (size_t i = 0; i < self->Numel(); ++i)
      xi->grad[i] += c * self->grad[i];
  });
  return y;
}

Tensor ScaleBy(const Tensor& x, const Tensor& s) {
  CheckDefined(x, "ScaleBy");
  CheckDefined(s, "ScaleBy");
  if (s.Numel() != 1)
    throw DimensionError("ScaleBy: scale must be a single element");
  auto xi = x.impl();
  auto si = s.impl();
  double sv = si->data[0];
  size_t n = xi->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = xi->data[i] * sv;
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x, s}, [self, xi, si] {
    size_t n = self->Numel();
    if (xi->requires_grad) {
      double sv = si->data[0];
      for (size_t i = 0; i < n; ++i) xi->grad[i] += self->grad[i] * sv;
    }
    if (si->requires_grad) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) acc += self->grad[i] * xi->data[i];
      si->grad[0] += acc;
    }
  });
  return y;
}

Tensor ShiftBy(const Tensor& x, const Tensor& s) {
  CheckDefined(x, "ShiftBy");
  CheckDefined(s, "ShiftBy");
  if (s.Numel() != 1)
    throw DimensionError("ShiftBy: shift must be a single element");
  auto xi = x.impl();
  auto si = s.impl();
  double sv = si->data[0];
  size_t n = xi->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = xi->data[i] + sv;
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x, s}, [self, xi, si] {
    size_t n = self->Numel();
    if (xi->requires_grad)
      for (size_t i = 0; i < n; ++i) xi->grad[i] += self->grad[i];
    if (si->requires_grad) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) acc += self->grad[i];
      si->grad[0] += acc;
    }
  });
  return y;
}

Tensor AddBias(const Tensor& x, const Tensor& bias) {
  CheckDefined(x, "AddBias");
  CheckDefined(bias, "AddBias");
  CheckRank(x, 2, "AddBias");
  CheckRank(bias, 1, "AddBias");
  size_t m = x.Dim(0), n = x.Dim(1);
  if (bias.Dim(0) != n)
    throw DimensionError("AddBias: bias length does not match columns");
  auto xi = x.impl();
  auto bi = bias.impl();
  std::vector<double> out(m * n);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j)
      out[i * n + j] = xi->data[i * n + j] + bi->data[j];
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x, bias}, [self, xi, bi, m, n] {
    if (xi->requires_grad)
      for (size_t i = 0; i < m * n; ++i) xi->grad[i] += self->grad[i];
    if (bi->requires_grad)
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) bi->grad[j] += self->grad[i * n + j];
  });
  return y;
}

Tensor MulMask(const Tensor& x, const std::vector<double>& mask) {
  CheckDefined(x, "MulMask");
  auto xi = x.impl();
  if (mask.size() != xi->Numel())
    throw DimensionError("MulMask: mask has " + std::to_string(mask.size()) +
                         " entries for " + std::to_string(xi->Numel()) +
                         " elements");
  size_t n = xi->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = xi->data[i] * mask[i];
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, mask] {
    for (size_t i = 0; i < self->Numel(); ++i)
      xi->grad[i] += self->grad[i] * mask[i];
  });
  return y;
}

// ---------------------------------------------------------------------------
// Matrix and structural ops

Tensor MatMul(const Tensor& a, const Tensor& b) {
  CheckDefined(a, "MatMul");
  CheckDefined(b, "MatMul");
  CheckRank(a, 2, "MatMul");
  CheckRank(b, 2, "MatMul");
  size_t m = a.Dim(0), k = a.Dim(1), n = b.Dim(1);
  if (b.Dim(0) != k)
    throw DimensionError("MatMul: inner dimensions " + std::to_string(k) +
                         " and " + std::to_string(b.Dim(0)) + " differ");
  auto ai = a.impl();
  auto bi = b.impl();
  std::vector<double> out(m * n, 0.0);
  const double* ad = ai->data.data();
  const double* bd = bi->data.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      double av = ad[i * k + p];
      const double* brow = bd + p * n;
      double* orow = out.data() + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  Tensor y = Tensor::FromVector({m, n}, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {a, b}, [self, ai, bi, m, k, n] {
    const double* dy = self->grad.data();
    if (ai->requires_grad) {
      // dA = dY * B^T
      double* da = ai->grad.data();
      const double* bd = bi->data.data();
      for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* dyrow = dy + i * n;
          const double* brow = bd + p * n;
          for (size_t j = 0; j < n; ++j) acc += dyrow[j] * brow[j];
          da[i * k + p] += acc;
        }
    }
    if (bi->requires_grad) {
      // dB = A^T * dY
      double* db = bi->grad.data();
      const double* ad = ai->data.data();
      for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
          double av = ad[i * k + p];
          const double* dyrow = dy + i * n;
          double* dbrow = db + p * n;
          for (size_t j = 0; j < n; ++j) dbrow[j] += av * dyrow[j];
        }
    }
  });
  return y;
}

Tensor Transpose(const Tensor& x) {
  CheckDefined(x, "Transpose");
  CheckRank(x, 2, "Transpose");
  size_t m = x.Dim(0), n = x.Dim(1);
  auto xi = x.impl();
  std::vector<double> out(m * n);
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = xi->data[i * n + j];
  Tensor y = Tensor::FromVector({n, m}, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, m, n] {
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j)
        xi->grad[i * n + j] += self->grad[j * m + i];
  });
  return y;
}

Tensor Reshape(const Tensor& x, std::vector<size_t> shape) {
  CheckDefined(x, "Reshape");
  CheckShapeValid(shape, "Reshape");
  auto xi = x.impl();
  if (NumelOf(shape) != xi->Numel())
    throw DimensionError("Reshape: element count changes");
  Tensor y = Tensor::FromVector(std::move(shape), xi->data);
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi] {
    for (size_t i = 0; i < self->Numel(); ++i) xi->grad[i] += self->grad[i];
  });
  return y;
}

Tensor Concat(const std::vector<Tensor>& parts, size_t axis) {
  if (parts.empty()) throw ContractError("Concat: no inputs");
  for (const Tensor& p : parts) CheckDefined(p, "Concat");
  const auto& base = parts[0].Shape();
  if (axis >= base.size()) throw DimensionError("Concat: axis out of range");
  size_t joined = 0;
  for (const Tensor& p : parts) {
    const auto& s = p.Shape();
    if (s.size() != base.size())
      throw DimensionError("Concat: rank mismatch");
    for (size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != base[d])
        throw DimensionError("Concat: shapes differ off the join axis");
    joined += s[axis];
  }
  std::vector<size_t> out_shape = base;
  out_shape[axis] = joined;

  size_t outer = 1;
  for (size_t d = 0; d < axis; ++d) outer *= base[d];
  size_t inner = 1;
  for (size_t d = axis + 1; d < base.size(); ++d) inner *= base[d];

  std::vector<double> out(NumelOf(out_shape));
  size_t offset = 0;  // running start inside the joined axis
  for (const Tensor& p : parts) {
    size_t span = p.Dim(axis) * inner;
    const double* src = p.Data().data();
    for (size_t o = 0; o < outer; ++o)
      std::copy(src + o * span, src + (o + 1) * span,
                out.data() + o * joined * inner + offset);
    offset += span;
  }
  Tensor y = Tensor::FromVector(std::move(out_shape), std::move(out));
  TensorImpl* self = y.impl().get();
  std::vector<std::shared_ptr<TensorImpl>> impls;
  impls.reserve(parts.size());
  for (const Tensor& p : parts) impls.push_back(p.impl());
  Attach(y, parts, [self, impls, axis, outer, inner, joined] {
    size_t offset = 0;
    for (const auto& pi : impls) {
      size_t span = pi->shape[axis] * inner;
      if (pi->requires_grad) {
        for (size_t o = 0; o < outer; ++o) {
          const double* dy = self->grad.data() + o * joined * inner + offset;
          double* dst = pi->grad.data() + o * span;
          for (size_t i = 0; i < span; ++i) dst[i] += dy[i];
        }
      }
      offset += span;
    }
  });
  return y;
}

Tensor Select0(const Tensor& x, size_t index) {
  CheckDefined(x, "Select0");
  const auto& s = x.Shape();
  if (index >= s[0]) throw IndexError("Select0: index out of range");
  std::vector<size_t> out_shape(s.begin() + 1, s.end());
  if (out_shape.empty()) out_shape = {1};
  size_t block = NumelOf(out_shape);
  auto xi = x.impl();
  std::vector<double> out(xi->data.begin() + index * block,
                          xi->data.begin() + (index + 1) * block);
  Tensor y = Tensor::FromVector(std::move(out_shape), std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, index, block] {
    for (size_t i = 0; i < block; ++i)
      xi->grad[index * block + i] += self->grad[i];
  });
  return y;
}

// ---------------------------------------------------------------------------
// Nonlinearities and reductions

Tensor Softmax(const Tensor& x, size_t axis) {
  CheckDefined(x, "Softmax");
  const auto& s = x.Shape();
  if (axis >= s.size()) throw DimensionError("Softmax: axis out of range");
  auto xi = x.impl();
  for (double v : xi->data)
    if (!std::isfinite(v)) throw NumericError("Softmax: non-finite input");
  size_t n = s[axis];
  size_t outer = 1;
  for (size_t d = 0; d < axis; ++d) outer *= s[d];
  size_t inner = 1;
  for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];

  std::vector<double> out(xi->Numel());
  for (size_t o = 0; o < outer; ++o)
    for (size_t in = 0; in < inner; ++in) {
      size_t base = o * n * inner + in;
      double mx = xi->data[base];
      for (size_t j = 1; j < n; ++j)
        mx = std::max(mx, xi->data[base + j * inner]);
      double denom = 0.0;
      for (size_t j = 0; j < n; ++j) {
        double e = std::exp(xi->data[base + j * inner] - mx);
        out[base + j * inner] = e;
        denom += e;
      }
      for (size_t j = 0; j < n; ++j) out[base + j * inner] /= denom;
    }
  Tensor y = Tensor::FromVector(s, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, outer, n, inner] {
    // dx = y .* (dy - sum(dy .* y)) along the softmax axis.
    for (size_t o = 0; o < outer; ++o)
      for (size_t in = 0; in < inner; ++in) {
        size_t base = o * n * inner + in;
        double dot = 0.0;
        for (size_t j = 0; j < n; ++j) {
          size_t k = base + j * inner;
          dot += self->grad[k] * self->data[k];
        }
        for (size_t j = 0; j < n; ++j) {
          size_t k = base + j * inner;
          xi->grad[k] += self->data[k] * (self->grad[k] - dot);
        }
      }
  });
  return y;
}

Tensor LeakyRelu(const Tensor& x, double slope) {
  CheckDefined(x, "LeakyRelu");
  if (!(slope > 0.0 && slope < 1.0))
    throw ContractError("LeakyRelu: slope must lie in (0, 1)");
  auto xi = x.impl();
  size_t n = xi->Numel();
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    double v = xi->data[i];
    out[i] = v > 0.0 ? v : slope * v;
  }
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, slope] {
    for (size_t i = 0; i < self->Numel(); ++i)
      xi->grad[i] += self->grad[i] * (xi->data[i] > 0.0 ? 1.0 : slope);
  });
  return y;
}

Tensor MeanAxis(const Tensor& x, size_t axis) {
  CheckDefined(x, "MeanAxis");
  const auto& s = x.Shape();
  if (axis >= s.size()) throw DimensionError("MeanAxis: axis out of range");
  if (s.size() == 1)
    throw DimensionError("MeanAxis: cannot drop the only axis; use SumAll");
  size_t n = s[axis];
  size_t outer = 1;
  for (size_t d = 0; d < axis; ++d) outer *= s[d];
  size_t inner = 1;
  for (size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  std::vector<size_t> out_shape;
  for (size_t d = 0; d < s.size(); ++d)
    if (d != axis) out_shape.push_back(s[d]);

  auto xi = x.impl();
  std::vector<double> out(outer * inner, 0.0);
  for (size_t o = 0; o < outer; ++o)
    for (size_t j = 0; j < n; ++j) {
      const double* src = xi->data.data() + (o * n + j) * inner;
      double* dst = out.data() + o * inner;
      for (size_t in = 0; in < inner; ++in) dst[in] += src[in];
    }
  double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  Tensor y = Tensor::FromVector(std::move(out_shape), std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, outer, n, inner, scale] {
    for (size_t o = 0; o < outer; ++o)
      for (size_t j = 0; j < n; ++j) {
        double* dst = xi->grad.data() + (o * n + j) * inner;
        const double* dy = self->grad.data() + o * inner;
        for (size_t in = 0; in < inner; ++in) dst[in] += scale * dy[in];
      }
  });
  return y;
}

Tensor SumAll(const Tensor& x) {
  CheckDefined(x, "SumAll");
  auto xi = x.impl();
  double acc = 0.0;
  for (double v : xi->data) acc += v;
  Tensor y = Tensor::Scalar(acc);
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi] {
    double dy = self->grad[0];
    for (size_t i = 0; i < xi->Numel(); ++i) xi->grad[i] += dy;
  });
  return y;
}

Tensor GlobalAvgPool(const Tensor& x) {
  CheckDefined(x, "GlobalAvgPool");
  size_t rank = x.Rank();
  if (rank != 3 && rank != 4)
    throw DimensionError("GlobalAvgPool: expected rank 3 or 4");
  size_t batch = rank == 4 ? x.Dim(0) : 1;
  size_t channels = rank == 4 ? x.Dim(1) : x.Dim(0);
  size_t plane = x.Dim(rank - 2) * x.Dim(rank - 1);
  auto xi = x.impl();
  std::vector<double> out(batch * channels, 0.0);
  for (size_t bc = 0; bc < batch * channels; ++bc) {
    const double* src = xi->data.data() + bc * plane;
    double acc = 0.0;
    for (size_t i = 0; i < plane; ++i) acc += src[i];
    out[bc] = acc / static_cast<double>(plane);
  }
  Tensor y = Tensor::FromVector({batch, channels}, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x}, [self, xi, plane] {
    double scale = 1.0 / static_cast<double>(plane);
    for (size_t bc = 0; bc < self->Numel(); ++bc) {
      double dy = self->grad[bc] * scale;
      double* dst = xi->grad.data() + bc * plane;
      for (size_t i = 0; i < plane; ++i) dst[i] += dy;
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvDims {
  size_t batch, cin, h, w;       // input
  size_t cout, k;                // kernel
  size_t oh, ow;                 // output plane
  bool batched;                  // rank-4 input
};

ConvDims ResolveConvDims(const Tensor& x, const Tensor& weight, size_t stride,
                         size_t pad) {
  ConvDims d;
  size_t rank = x.Rank();
  if (rank != 3 && rank != 4)
    throw DimensionError("Conv2d: input must be [C,H,W] or [B,C,H,W]");
  d.batched = rank == 4;
  d.batch = d.batched ? x.Dim(0) : 1;
  d.cin = x.Dim(rank - 3);
  d.h = x.Dim(rank - 2);
  d.w = x.Dim(rank - 1);
  CheckRank(weight, 4, "Conv2d");
  d.cout = weight.Dim(0);
  d.k = weight.Dim(2);
  if (weight.Dim(3) != d.k)
    throw DimensionError("Conv2d: kernel must be square");
  if (d.k % 2 == 0) throw DimensionError("Conv2d: kernel size must be odd");
  if (weight.Dim(1) != d.cin)
    throw DimensionError("Conv2d: weight expects " +
                         std::to_string(weight.Dim(1)) + " input channels, got " +
                         std::to_string(d.cin));
  if (stride == 0) throw ContractError("Conv2d: stride must be positive");
  if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k)
    throw DimensionError("Conv2d: kernel larger than padded input");
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  return d;
}

}  // namespace

Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              size_t stride, size_t pad) {
  CheckDefined(x, "Conv2d");
  CheckDefined(weight, "Conv2d");
  ConvDims d = ResolveConvDims(x, weight, stride, pad);
  if (bias.Defined()) {
    CheckRank(bias, 1, "Conv2d");
    if (bias.Dim(0) != d.cout)
      throw DimensionError("Conv2d: bias length does not match out channels");
  }
  auto xi = x.impl();
  auto wi = weight.impl();
  auto bi = bias.Defined() ? bias.impl() : nullptr;

  std::vector<double> out(d.batch * d.cout * d.oh * d.ow, 0.0);
  const double* xd = xi->data.data();
  const double* wd = wi->data.data();
  // One output row stays resident while the whole receptive field streams
  // past it; the innermost loop is a contiguous axpy over the input row.
  for (size_t b = 0; b < d.batch; ++b) {
    for (size_t co = 0; co < d.cout; ++co) {
      double bv = bi ? bi->data[co] : 0.0;
      for (size_t ohi = 0; ohi < d.oh; ++ohi) {
        double* acc = out.data() + ((b * d.cout + co) * d.oh + ohi) * d.ow;
        if (bv != 0.0)
          for (size_t owi = 0; owi < d.ow; ++owi) acc[owi] = bv;
        for (size_t ci = 0; ci < d.cin; ++ci) {
          for (size_t kh = 0; kh < d.k; ++kh) {
            ptrdiff_t ih = static_cast<ptrdiff_t>(ohi * stride + kh) -
                           static_cast<ptrdiff_t>(pad);
            if (ih < 0 || ih >= static_cast<ptrdiff_t>(d.h)) continue;
            const double* xrow =
                xd + ((b * d.cin + ci) * d.h + ih) * d.w;
            const double* wrow = wd + ((co * d.cin + ci) * d.k + kh) * d.k;
            for (size_t kw = 0; kw < d.k; ++kw) {
              double wv = wrow[kw];
              ptrdiff_t off = static_cast<ptrdiff_t>(kw) -
                              static_cast<ptrdiff_t>(pad);
              // Valid ow range keeps iw = ow*stride + off inside [0, w).
              size_t lo = 0;
              if (off < 0)
                lo = (static_cast<size_t>(-off) + stride - 1) / stride;
              ptrdiff_t max_iw = static_cast<ptrdiff_t>(d.w) - 1 - off;
              if (max_iw < 0 || lo >= d.ow) continue;
              size_t hi_excl = std::min(
                  d.ow, static_cast<size_t>(max_iw) / stride + 1);
              if (lo >= hi_excl) continue;
              if (stride == 1) {
                const double* xp = xrow + off + lo;
                for (size_t owi = lo; owi < hi_excl; ++owi)
                  acc[owi] += wv * xp[owi - lo];
              } else {
                for (size_t owi = lo; owi < hi_excl; ++owi)
                  acc[owi] += wv * xrow[owi * stride + off];
              }
            }
          }
        }
      }
    }
  }
  std::vector<size_t> out_shape =
      d.batched ? std::vector<size_t>{d.batch, d.cout, d.oh, d.ow}
                : std::vector<size_t>{d.cout, d.oh, d.ow};
  Tensor y = Tensor::FromVector(std::move(out_shape), std::move(out));
  TensorImpl* self = y.impl().get();
  std::vector<Tensor> inputs = {x, weight};
  if (bias.Defined()) inputs.push_back(bias);
  Attach(y, inputs, [self, xi, wi, bi, d, stride, pad] {
    const double* xd = xi->data.data();
    const double* wd = wi->data.data();
    for (size_t b = 0; b < d.batch; ++b) {
      for (size_t co = 0; co < d.cout; ++co) {
        for (size_t ohi = 0; ohi < d.oh; ++ohi) {
          const double* dyrow =
              self->grad.data() + ((b * d.cout + co) * d.oh + ohi) * d.ow;
          if (bi && bi->requires_grad) {
            double acc = 0.0;
            for (size_t owi = 0; owi < d.ow; ++owi) acc += dyrow[owi];
            bi->grad[co] += acc;
          }
          for (size_t ci = 0; ci < d.cin; ++ci) {
            for (size_t kh = 0; kh < d.k; ++kh) {
              ptrdiff_t ih = static_cast<ptrdiff_t>(ohi * stride + kh) -
                             static_cast<ptrdiff_t>(pad);
              if (ih < 0 || ih >= static_cast<ptrdiff_t>(d.h)) continue;
              size_t row_base = ((b * d.cin + ci) * d.h + ih) * d.w;
              const double* xrow = xd + row_base;
              const double* wrow = wd + ((co * d.cin + ci) * d.k + kh) * d.k;
              double* dxrow =
                  xi->requires_grad ? xi->grad.data() + row_base : nullptr;
              double* dwrow =
                  wi->requires_grad
                      ? wi->grad.data() + ((co * d.cin + ci) * d.k + kh) * d.k
                      : nullptr;
              for (size_t kw = 0; kw < d.k; ++kw) {
                ptrdiff_t off = static_cast<ptrdiff_t>(kw) -
                                static_cast<ptrdiff_t>(pad);
                size_t lo = 0;
                if (off < 0)
                  lo = (static_cast<size_t>(-off) + stride - 1) / stride;
                ptrdiff_t max_iw = static_cast<ptrdiff_t>(d.w) - 1 - off;
                if (max_iw < 0 || lo >= d.ow) continue;
                size_t hi_excl = std::min(
                    d.ow, static_cast<size_t>(max_iw) / stride + 1);
                if (lo >= hi_excl) continue;
                if (dwrow) {
                  double acc = 0.0;
                  for (size_t owi = lo; owi < hi_excl; ++owi)
                    acc += dyrow[owi] * xrow[owi * stride + off];
                  dwrow[kw] += acc;
                }
                if (dxrow) {
                  double wv = wrow[kw];
                  for (size_t owi = lo; owi < hi_excl; ++owi)
                    dxrow[owi * stride + off] += wv * dyrow[owi];
                }
              }
            }
          }
        }
      }
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Batch normalization

Tensor BatchNorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   std::vector<double>* running_mean,
                   std::vector<double>* running_var, bool training,
                   double momentum, double eps) {
  CheckDefined(x, "BatchNorm2d");
  CheckDefined(gamma, "BatchNorm2d");
  CheckDefined(beta, "BatchNorm2d");
  CheckRank(x, 4, "BatchNorm2d");
  size_t batch = x.Dim(0), channels = x.Dim(1), h = x.Dim(2), w = x.Dim(3);
  CheckRank(gamma, 1, "BatchNorm2d");
  CheckRank(beta, 1, "BatchNorm2d");
  if (gamma.Dim(0) != channels || beta.Dim(0) != channels)
    throw DimensionError("BatchNorm2d: gamma/beta length must equal channels");
  if (!running_mean || !running_var)
    throw ContractError("BatchNorm2d: running buffers are required");
  if (running_mean->size() != channels || running_var->size() != channels)
    throw DimensionError("BatchNorm2d: running buffer length must equal channels");
  if (training && batch < 2)
    throw ContractError("BatchNorm2d: training needs a batch of at least 2");

  size_t plane = h * w;
  size_t per_channel = batch * plane;  // reduction population per channel
  auto xi = x.impl();
  auto gi = gamma.impl();
  auto bi = beta.impl();

  std::vector<double> mean(channels), invstd(channels);
  if (training) {
    for (size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (size_t b = 0; b < batch; ++b) {
        const double* src = xi->data.data() + ((b * channels + c) * plane);
        for (size_t i = 0; i < plane; ++i) acc += src[i];
      }
      mean[c] = acc / static_cast<double>(per_channel);
      double var = 0.0;
      for (size_t b = 0; b < batch; ++b) {
        const double* src = xi->data.data() + ((b * channels + c) * plane);
        for (size_t i = 0; i < plane; ++i) {
          double dlt = src[i] - mean[c];
          var += dlt * dlt;
        }
      }
      double biased = var / static_cast<double>(per_channel);
      double unbiased = var / static_cast<double>(per_channel - 1);
      invstd[c] = 1.0 / std::sqrt(biased + eps);
      (*running_mean)[c] =
          (1.0 - momentum) * (*running_mean)[c] + momentum * mean[c];
      (*running_var)[c] =
          (1.0 - momentum) * (*running_var)[c] + momentum * unbiased;
    }
  } else {
    for (size_t c = 0; c < channels; ++c) {
      mean[c] = (*running_mean)[c];
      invstd[c] = 1.0 / std::sqrt((*running_var)[c] + eps);
    }
  }

  // xhat is kept for the backward pass; y = gamma * xhat + beta.
  auto xhat = std::make_shared<std::vector<double>>(xi->Numel());
  std::vector<double> out(xi->Numel());
  for (size_t b = 0; b < batch; ++b)
    for (size_t c = 0; c < channels; ++c) {
      const double* src = xi->data.data() + ((b * channels + c) * plane);
      double* xh = xhat->data() + ((b * channels + c) * plane);
      double* dst = out.data() + ((b * channels + c) * plane);
      double g = gi->data[c], bt = bi->data[c];
      for (size_t i = 0; i < plane; ++i) {
        xh[i] = (src[i] - mean[c]) * invstd[c];
        dst[i] = g * xh[i] + bt;
      }
    }
  Tensor y = Tensor::FromVector(xi->shape, std::move(out));
  TensorImpl* self = y.impl().get();
  Attach(y, {x, gamma, beta},
         [self, xi, gi, bi, xhat, invstd, training, batch, channels, plane,
          per_channel] {
           for (size_t c = 0; c < channels; ++c) {
             double sum_dy = 0.0, sum_dy_xhat = 0.0;
             for (size_t b = 0; b < batch; ++b) {
               size_t base = (b * channels + c) * plane;
               for (size_t i = 0; i < plane; ++i) {
                 double dy = self->grad[base + i];
                 sum_dy += dy;
                 sum_dy_xhat += dy * (*xhat)[base + i];
               }
             }
             if (gi->requires_grad) gi->grad[c] += sum_dy_xhat;
             if (bi->requires_grad) bi->grad[c] += sum_dy;
             if (!xi->requires_grad) continue;
             double g = gi->data[c];
             double m = static_cast<double>(per_channel);
             for (size_t b = 0; b < batch; ++b) {
               size_t base = (b * channels + c) * plane;
               for (size_t i = 0; i < plane; ++i) {
                 double dy = self->grad[base + i];
                 if (training) {
                   // Batch statistics depend on x, so the mean and variance
                   // terms feed back into every element of the channel.
                   xi->grad[base + i] +=
                       g * invstd[c] *
                       (dy - sum_dy / m - (*xhat)[base + i] * sum_dy_xhat / m);
                 } else {
                   xi->grad[base + i] += g * invstd[c] * dy;
                 }
               }
             }
           }
         });
  return y;
}

// ---------------------------------------------------------------------------
// Loss

Tensor CrossEntropy(const Tensor& logits, const std::vector<int>& labels) {
  CheckDefined(logits, "CrossEntropy");
  CheckRank(logits, 2, "CrossEntropy");
  size_t batch = logits.Dim(0), classes = logits.Dim(1);
  if (labels.size() != batch)
    throw DimensionError("CrossEntropy: " + std::to_string(labels.size()) +
                         " labels for a batch of " + std::to_string(batch));
  for (size_t i = 0; i < batch; ++i)
    if (labels[i] < 0 || static_cast<size_t>(labels[i]) >= classes)
      throw IndexError("CrossEntropy: label " + std::to_string(labels[i]) +
                       " out of range at row " + std::to_string(i));
  auto li = logits.impl();
  // Softmax probabilities are retained for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(li->Numel());
  double loss = 0.0;
  for (size_t i = 0; i < batch; ++i) {
    const double* row = li->data.data() + i * classes;
    double mx = row[0];
    for (size_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (size_t j = 0; j < classes; ++j) denom += std::exp(row[j] - mx);
    double lse = mx + std::log(denom);
    loss += lse - row[labels[i]];
    double* prow = probs->data() + i * classes;
    for (size_t j = 0; j < classes; ++j)
      prow[j] = std::exp(row[j] - lse);
  }
  loss /= static_cast<double>(batch);
  Tensor y = Tensor::Scalar(loss);
  TensorImpl* self = y.impl().get();
  Attach(y, {logits}, [self, li, probs, labels, batch, classes] {
    double dy = self->grad[0] / static_cast<double>(batch);
    for (size_t i = 0; i < batch; ++i) {
      const double* prow = probs->data() + i * classes;
      double* grow = li->grad.data() + i * classes;
      for (size_t j = 0; j < classes; ++j) grow[j] += dy * prow[j];
      grow[labels[i]] -= dy;
    }
  });
  return y;
}

Tensor Detach(const Tensor& x) {
  CheckDefined(x, "Detach");
  return Tensor::FromVector(x.Shape(), x.Data());
}

// ---------------------------------------------------------------------------
// Reverse pass

void Backward(const Tensor& loss) {
  if (!loss.Defined()) throw ContractError("Backward: undefined tensor");
  auto root = loss.impl();
  if (root->Numel() != 1)
    throw ContractError("Backward: loss has " + std::to_string(root->Numel()) +
                        " elements, expected 1");

  // Iterative postorder so deep chain graphs cannot blow the call stack.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* node;
    size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  seen.insert(root.get());
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next < top.node->parents.size()) {
      TensorImpl* parent = top.node->parents[top.next++].get();
      if (seen.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }

  // Interior grads restart from zero each pass; leaves keep accumulating.
  for (TensorImpl* node : order) {
    node->EnsureGrad();
    if (!node->IsLeaf()) std::fill(node->grad.begin(), node->grad.end(), 0.0);
  }
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn();
}

// ---------------------------------------------------------------------------
// Gradient checking

GradCheckReport GradCheck(const std::function<Tensor()>& fn, Tensor x,
                          double eps) {
  if (!x.Defined()) throw ContractError("GradCheck: undefined tensor");
  if (!x.RequiresGrad())
    throw ContractError("GradCheck: x does not require gradient");
  x.ZeroGrad();
  Tensor loss = fn();
  Backward(loss);
  std::vector<double> analytic = x.Grad();

  GradCheckReport report;
  std::vector<double>& data = x.Data();
  for (size_t i = 0; i < data.size(); ++i) {
    double orig = data[i];
    double plus, minus;
    {
      NoGradGuard guard;
      data[i] = orig + eps;
      plus = fn().Item();
      data[i] = orig - eps;
      minus = fn().Item();
      data[i] = orig;
    }
    double numeric = (plus - minus) / (2.0 * eps);
    double denom =
        std::max({std::fabs(numeric), std::fabs(analytic[i]), 1e-8});
    double rel = std::fabs(numeric - analytic[i]) / denom;
    if (rel >= report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
  }
  return report;
}

}  // namespace mcsae
