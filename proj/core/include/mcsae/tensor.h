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

#ifndef MCSAE_TENSOR_H_
#define MCSAE_TENSOR_H_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace mcsae {

// Node of the reverse-mode graph. Tensors are cheap handles sharing one
// TensorImpl; ops allocate a fresh impl for their result and wire the
// grad-requiring inputs in as parents. backward_fn reads this node's grad
// and accumulates into the parents' grads. Leaves (no backward_fn) keep
// their grad across Backward calls so repeated passes accumulate; interior
// nodes are rezeroed at the start of every pass.
struct TensorImpl {
  std::vector<size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void()> backward_fn;

  size_t Numel() const { return data.size(); }
  bool IsLeaf() const { return !backward_fn; }
  void EnsureGrad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// While any guard is alive on the current thread, ops run forward-only:
// results carry no parents and no backward_fn. Used for inference, for
// finite-difference probes, and anywhere graph construction would be waste.
class NoGradGuard {
 public:
  NoGradGuard() { ++Depth(); }
  ~NoGradGuard() { --Depth(); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool Active() { return Depth() > 0; }

 private:
  static int& Depth() {
    thread_local int depth = 0;
    return depth;
  }
};

// Row-major dense tensor of doubles. Shapes are fixed at construction;
// every element is explicit (no views, no broadcasting beyond the few ops
// that state it).
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor Full(std::vector<size_t> shape, double value,
                     bool requires_grad = false);
  static Tensor FromVector(std::vector<size_t> shape,
                           std::vector<double> values,
                           bool requires_grad = false);
  // Single-element tensor of shape {1}.
  static Tensor Scalar(double value, bool requires_grad = false);

  bool Defined() const { return impl_ != nullptr; }
  const std::vector<size_t>& Shape() const;
  size_t Rank() const;
  size_t Numel() const;
  size_t Dim(size_t axis) const;

  std::vector<double>& Data();
  const std::vector<double>& Data() const;
  // Allocates the grad buffer on first use.
  std::vector<double>& Grad();
  void ZeroGrad();

  bool RequiresGrad() const;
  void SetRequiresGrad(bool value);

  // Value of a single-element tensor.
  double Item() const;
  // Row-major element read with bounds checking, for tests and glue code.
  double At(std::initializer_list<size_t> index) const;

  std::shared_ptr<TensorImpl> impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Elementwise, same shape on both sides.
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);

// Elementwise against a plain constant.
Tensor AddScalar(const Tensor& x, double c);
Tensor MulScalar(const Tensor& x, double c);

// y = x * s and y = x + s where s is a single-element tensor that can carry
// gradient. These are what per-branch scalar affine transforms are built on.
Tensor ScaleBy(const Tensor& x, const Tensor& s);
Tensor ShiftBy(const Tensor& x, const Tensor& s);

// x is [m, n], bias is [n], added to every row.
Tensor AddBias(const Tensor& x, const Tensor& bias);

// Elementwise multiply by a constant mask (flat, same element count).
// The mask is data, not a graph node: no gradient flows to it.
Tensor MulMask(const Tensor& x, const std::vector<double>& mask);

Tensor MatMul(const Tensor& a, const Tensor& b);
Tensor Transpose(const Tensor& x);
Tensor Reshape(const Tensor& x, std::vector<size_t> shape);
Tensor Concat(const std::vector<Tensor>& parts, size_t axis);
// Drops axis 0: picks row `index`, result shape is x.Shape()[1:].
Tensor Select0(const Tensor& x, size_t index);

Tensor Softmax(const Tensor& x, size_t axis);
Tensor LeakyRelu(const Tensor& x, double slope);
Tensor MeanAxis(const Tensor& x, size_t axis);
Tensor SumAll(const Tensor& x);
// [C,H,W] -> [1,C] or [B,C,H,W] -> [B,C], averaging over the spatial dims.
Tensor GlobalAvgPool(const Tensor& x);

// Cross-correlation with a square odd-sized kernel. x is [C,H,W] or
// [B,C,H,W], weight is [Co,Ci,K,K], bias is [Co] or undefined for none.
Tensor Conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              size_t stride, size_t pad);

// Batch norm over [B,C,H,W], normalizing each channel across B*H*W.
// Training mode uses batch statistics (biased variance in the normalizer)
// and folds them into the running buffers with the unbiased variance;
// eval mode normalizes with the running buffers and leaves them untouched.
Tensor BatchNorm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                   std::vector<double>* running_mean,
                   std::vector<double>* running_var, bool training,
                   double momentum = 0.1, double eps = 1e-5);

// Mean over the batch of softmax cross-entropy, logits [B,N] against
// integer labels in [0, N).
Tensor CrossEntropy(const Tensor& logits, const std::vector<int>& labels);

// Copy of the data, cut loose from the graph.
Tensor Detach(const Tensor& x);

// Reverse pass from a single-element loss. Interior grads are rezeroed per
// call; leaf grads accumulate, so zero parameters between steps yourself.
void Backward(const Tensor& loss);

struct GradCheckReport {
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  double analytic = 0.0;  // analytic gradient at the worst element
  double numeric = 0.0;   // central difference at the worst element
};

// Compares Backward's gradient of fn() w.r.t. leaf x against central
// differences. fn must rebuild its graph from x on every call; the probes
// run under NoGradGuard and mutate x.Data() in place (restored after).
GradCheckReport GradCheck(const std::function<Tensor()>& fn, Tensor x,
                          double eps = 1e-5);

}  // namespace mcsae

#endif  // MCSAE_TENSOR_H_
