// Copyright 2026 The ctxrank Authors.
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

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctxrank/common.hpp"
#include "ctxrank/config.hpp"
#include "ctxrank/graph.hpp"

namespace ctxrank {

enum class Mode { Train, Eval };

/// y = x * weight^T + bias, with weight stored [out x in] and bias [1 x out].
struct Linear {
  Matrix weight;
  Matrix bias;

  Matrix apply(const Matrix& x) const;
};

/// Per-channel batch normalization over graph nodes.
struct BatchNorm {
  Matrix gamma;         // 1 x d
  Matrix beta;          // 1 x d
  Matrix running_mean;  // 1 x d
  Matrix running_var;   // 1 x d
};

/// Every tensor of the model. Also used as the gradient and momentum
/// container, in which case the running statistics are unused.
struct ModelParams {
  ModelConfig config;
  Linear phi;
  Linear phi_prime;
  std::vector<Matrix> layer_weights;  // d x d, applied as (A Z) W
  std::vector<BatchNorm> norms;
  Linear fc1;  // 2d -> hidden
  Linear fc2;  // hidden -> hidden
  Linear fc3;  // hidden -> 1

  /// Fan-in uniform init for every affine map; BN scale 1, shift 0,
  /// running mean 0, running var 1.
  static ModelParams init(const ModelConfig& config);
  static ModelParams zeros_like(const ModelParams& other);

  using Visitor = std::function<void(const std::string& name, Matrix& tensor, bool trainable)>;
  using ConstVisitor =
      std::function<void(const std::string& name, const Matrix& tensor, bool trainable)>;
  /// Visits tensors in declaration order, which is also the checkpoint order.
  void visit(const Visitor& f);
  void visit(const ConstVisitor& f) const;

  size_t parameter_count(bool trainable_only = true) const;
  bool operator==(const ModelParams& other) const;
};

/// A[i][j] = softmax over the supported entries of row i of
/// phi(x_i)^T phi'(x_j). Rows without support are zero.
Matrix edge_weights(const Matrix& edge_input, const Matrix& support, const Linear& phi,
                    const Linear& phi_prime);

/// Z + BN(ReLU(A Z W)) for a single graph. Train mode normalizes with this
/// graph's statistics. Passing `norm == nullptr` disables normalization.
Matrix gcn_block(const Matrix& z, const Matrix& a, const Matrix& w, const BatchNorm* norm,
                 Mode mode, double eps);

/// Intermediate values of one graph's forward pass.
struct GraphTrace {
  Matrix p, q;  // edge projections
  Matrix a;     // edge weights
  std::vector<Matrix> z;     // z[0] = nodes, z[l + 1] = output of block l
  std::vector<Matrix> az;    // A z[l]
  std::vector<Matrix> pre;   // A z[l] W[l]
  std::vector<Matrix> xhat;  // normalized activations of block l
  Matrix concat, a1, h1, a2, h2;
  Vector logits;
};

/// A forward pass over a batch of graphs that share batch-norm statistics.
struct BatchTrace {
  Mode mode = Mode::Eval;
  std::vector<const ContextGraph*> graphs;
  std::vector<GraphTrace> traces;
  std::vector<Matrix> batch_mean;  // per block, 1 x d (train mode)
  std::vector<Matrix> batch_var;   // per block, biased, 1 x d (train mode)
  std::vector<Matrix> inv_std;     // per block, 1 x d
  size_t total_nodes = 0;

  std::vector<Vector> logits() const;
};

BatchTrace forward_batch(std::span<const ContextGraph* const> graphs, const ModelParams& params,
                         Mode mode);

/// Per-node logits of one graph.
Vector forward(const ContextGraph& graph, const ModelParams& params, Mode mode);

/// Blends the batch statistics of a train-mode pass into the running
/// statistics (unbiased variance, exponential average).
void update_running_stats(ModelParams& params, const BatchTrace& trace);

/// Mean over nodes of alpha * (1 - p_t)^gamma * -log(p_t).
double focal_loss(const Vector& logits, std::span<const uint8_t> labels, double alpha,
                  double gamma);
/// d focal_loss / d logits.
Vector focal_loss_grad(const Vector& logits, std::span<const uint8_t> labels, double alpha,
                       double gamma);

/// Mean over graphs of per-graph mean focal loss. Graphs must carry labels.
double batch_loss(const BatchTrace& trace, double alpha, double gamma);

/// Exact gradients of batch_loss with respect to every trainable tensor.
ModelParams backward(const BatchTrace& trace, const ModelParams& params, double alpha,
                     double gamma);

struct SgdState {
  ModelParams velocity;
  explicit SgdState(const ModelParams& params) : velocity(ModelParams::zeros_like(params)) {}
};

/// v <- momentum * v + grad + weight_decay * theta; theta <- theta - lr * v.
/// Running statistics are not touched. Throws NumericError naming the first
/// tensor with a non-finite gradient, before any update is applied.
void sgd_step(ModelParams& params, const ModelParams& grads, SgdState& state,
              const TrainConfig& cfg);

}  // namespace ctxrank
