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

#include "ctxrank/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctxrank/rng.hpp"

namespace ctxrank {
namespace {

Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

Linear make_linear(Rng& rng, int in, int out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Linear l;
  l.weight = uniform_matrix(rng, out, in, bound);
  l.bias = uniform_matrix(rng, 1, out, bound);
  return l;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre, const Matrix& grad) {
  return (pre.array() > 0.0).select(grad, 0.0);
}

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// s = logit of the wrong class: -z for positives, z for negatives. Then
// 1 - p_t = sigmoid(s) and -log(p_t) = softplus(s).
double wrong_class_logit(double z, uint8_t label) { return label ? -z : z; }

void check_labels(const Vector& logits, std::span<const uint8_t> labels) {
  if (static_cast<size_t>(logits.size()) != labels.size()) {
    throw DataError("focal loss: " + std::to_string(logits.size()) + " logits but " +
                    std::to_string(labels.size()) + " labels");
  }
}

// Edge softmax backward: dS = A .* (dA - rowsum(A .* dA)).
Matrix softmax_backward(const Matrix& a, const Matrix& da) {
  const Vector inner = (a.array() * da.array()).rowwise().sum();
  Matrix ds = a.array() * (da.colwise() - inner).array();
  return ds;
}

}  // namespace

Matrix Linear::apply(const Matrix& x) const {
  Matrix y = x * weight.transpose();
  y.rowwise() += bias.row(0);
  return y;
}

ModelParams ModelParams::init(const ModelConfig& config) {
  config.validate();
  if (config.dim < 1) throw ConfigError("model.dim must be resolved before init");
  const int d = config.dim;
  const int de = config.resolved_edge_dim();
  const int h = config.resolved_hidden();
  Rng rng(sub_seed(config.seed, "params"));

  ModelParams p;
  p.config = config;
  p.phi = make_linear(rng, d, de);
  p.phi_prime = make_linear(rng, d, de);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < config.layers; ++l) {
    p.layer_weights.push_back(uniform_matrix(rng, d, d, bound));
    p.norms.push_back({Matrix::Ones(1, d), Matrix::Zero(1, d), Matrix::Zero(1, d),
                       Matrix::Ones(1, d)});
  }
  p.fc1 = make_linear(rng, 2 * d, h);
  p.fc2 = make_linear(rng, h, h);
  p.fc3 = make_linear(rng, h, 1);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams p = other;
  p.visit([](const std::string&, Matrix& t, bool) { t.setZero(); });
  return p;
}

void ModelParams::visit(const Visitor& f) {
  f("phi.weight", phi.weight, true);
  f("phi.bias", phi.bias, true);
  f("phi_prime.weight", phi_prime.weight, true);
  f("phi_prime.bias", phi_prime.bias, true);
  for (size_t l = 0; l < layer_weights.size(); ++l) {
    const std::string gcn = "gcn." + std::to_string(l);
    const std::string bn = "bn." + std::to_string(l);
    f(gcn + ".weight", layer_weights[l], true);
    f(bn + ".gamma", norms[l].gamma, true);
    f(bn + ".beta", norms[l].beta, true);
    f(bn + ".running_mean", norms[l].running_mean, false);
    f(bn + ".running_var", norms[l].running_var, false);
  }
  f("mlp.0.weight", fc1.weight, true);
  f("mlp.0.bias", fc1.bias, true);
  f("mlp.1.weight", fc2.weight, true);
  f("mlp.1.bias", fc2.bias, true);
  f("mlp.2.weight", fc3.weight, true);
  f("mlp.2.bias", fc3.bias, true);
}

void ModelParams::visit(const ConstVisitor& f) const {
  const_cast<ModelParams*>(this)->visit(
      [&](const std::string& name, Matrix& t, bool trainable) { f(name, t, trainable); });
}

size_t ModelParams::parameter_count(bool trainable_only) const {
  size_t n = 0;
  visit([&](const std::string&, const Matrix& t, bool trainable) {
    if (trainable || !trainable_only) n += static_cast<size_t>(t.size());
  });
  return n;
}

bool ModelParams::operator==(const ModelParams& other) const {
  std::vector<const Matrix*> mine, theirs;
  visit([&](const std::string&, const Matrix& t, bool) { mine.push_back(&t); });
  other.visit([&](const std::string&, const Matrix& t, bool) { theirs.push_back(&t); });
  if (mine.size() != theirs.size()) return false;
  for (size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->rows() != theirs[i]->rows() || mine[i]->cols() != theirs[i]->cols()) return false;
    if (*mine[i] != *theirs[i]) return false;
  }
  return true;
}

Matrix edge_weights(const Matrix& edge_input, const Matrix& support, const Linear& phi,
                    const Linear& phi_prime) {
  const Matrix p = phi.apply(edge_input);
  const Matrix q = phi_prime.apply(edge_input);
  const Matrix logits = p * q.transpose();
  const Eigen::Index n = support.rows();
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (support(i, j) != 0.0) top = std::max(top, logits(i, j));
    }
    if (top == -std::numeric_limits<double>::infinity()) continue;
    double sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (support(i, j) != 0.0) {
        a(i, j) = std::exp(logits(i, j) - top);
        sum += a(i, j);
      }
    }
    a.row(i) /= sum;
  }
  return a;
}

Matrix gcn_block(const Matrix& z, const Matrix& a, const Matrix& w, const BatchNorm* norm,
                 Mode mode, double eps) {
  Matrix r = relu(a * z * w);
  if (norm != nullptr) {
    Matrix mean, var;
    if (mode == Mode::Train) {
      mean = r.colwise().mean();
      var = (r.rowwise() - mean.row(0)).array().square().colwise().mean();
    } else {
      mean = norm->running_mean;
      var = norm->running_var;
    }
    const Eigen::RowVectorXd scale =
        (norm->gamma.array() / (var.array() + eps).sqrt()).matrix().row(0);
    r = ((r.rowwise() - mean.row(0)).array().rowwise() * scale.array()).matrix();
    r.rowwise() += norm->beta.row(0);
  }
  return z + r;
}

std::vector<Vector> BatchTrace::logits() const {
  std::vector<Vector> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(t.logits);
  return out;
}

BatchTrace forward_batch(std::span<const ContextGraph* const> graphs, const ModelParams& params,
                         Mode mode) {
  const int d = params.config.dim;
  const size_t layers = params.layer_weights.size();
  BatchTrace bt;
  bt.mode = mode;
  bt.graphs.assign(graphs.begin(), graphs.end());
  bt.traces.resize(graphs.size());

  for (size_t g = 0; g < graphs.size(); ++g) {
    const ContextGraph& graph = *graphs[g];
    if (graph.size() == 0) throw DataError("forward: empty graph for probe " + std::to_string(graph.probe_id));
    if (graph.dim() != d) {
      throw DataError("forward: graph dim " + std::to_string(graph.dim()) +
                      " does not match model dim " + std::to_string(d));
    }
    GraphTrace& t = bt.traces[g];
    t.p = params.phi.apply(graph.edge_input);
    t.q = params.phi_prime.apply(graph.edge_input);
    t.a = edge_weights(graph.edge_input, graph.support, params.phi, params.phi_prime);
    t.z.push_back(graph.nodes);
    bt.total_nodes += graph.size();
  }

  for (size_t l = 0; l < layers; ++l) {
    const BatchNorm& bn = params.norms[l];
    Matrix sum = Matrix::Zero(1, d);
    for (auto& t : bt.traces) {
      t.az.push_back(t.a * t.z[l]);
      t.pre.push_back(t.az[l] * params.layer_weights[l]);
      sum += relu(t.pre[l]).colwise().sum();
    }
    Matrix mean, var;
    if (mode == Mode::Train) {
      mean = sum / static_cast<double>(bt.total_nodes);
      Matrix sq = Matrix::Zero(1, d);
      for (auto& t : bt.traces) {
        sq += (relu(t.pre[l]).rowwise() - mean.row(0)).array().square().matrix().colwise().sum();
      }
      var = sq / static_cast<double>(bt.total_nodes);
      bt.batch_mean.push_back(mean);
      bt.batch_var.push_back(var);
    } else {
      mean = bn.running_mean;
      var = bn.running_var;
    }
    Matrix inv_std = (var.array() + params.config.bn_eps).rsqrt().matrix();
    for (auto& t : bt.traces) {
      Matrix xhat = ((relu(t.pre[l]).rowwise() - mean.row(0)).array().rowwise() *
                     inv_std.row(0).array())
                        .matrix();
      Matrix y = (xhat.array().rowwise() * bn.gamma.row(0).array()).matrix();
      y.rowwise() += bn.beta.row(0);
      t.z.push_back(t.z[l] + y);
      t.xhat.push_back(std::move(xhat));
    }
    bt.inv_std.push_back(std::move(inv_std));
  }

  for (size_t g = 0; g < graphs.size(); ++g) {
    GraphTrace& t = bt.traces[g];
    const Eigen::Index n = t.z[0].rows();
    t.concat.resize(n, 2 * d);
    t.concat << t.z[0], t.z[layers];
    t.a1 = params.fc1.apply(t.concat);
    t.h1 = relu(t.a1);
    t.a2 = params.fc2.apply(t.h1);
    t.h2 = relu(t.a2);
    t.logits = params.fc3.apply(t.h2).col(0);
  }
  return bt;
}

Vector forward(const ContextGraph& graph, const ModelParams& params, Mode mode) {
  const ContextGraph* one[] = {&graph};
  return forward_batch(one, params, mode).traces.front().logits;
}

void update_running_stats(ModelParams& params, const BatchTrace& trace) {
  if (trace.mode != Mode::Train) return;
  const double m = params.config.bn_momentum;
  const double n = static_cast<double>(trace.total_nodes);
  const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
  for (size_t l = 0; l < params.norms.size(); ++l) {
    BatchNorm& bn = params.norms[l];
    bn.running_mean = (1.0 - m) * bn.running_mean + m * trace.batch_mean[l];
    bn.running_var = (1.0 - m) * bn.running_var + m * unbias * trace.batch_var[l];
  }
}

double focal_loss(const Vector& logits, std::span<const uint8_t> labels, double alpha,
                  double gamma) {
  check_labels(logits, labels);
  if (logits.size() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double s = wrong_class_logit(logits[i], labels[static_cast<size_t>(i)]);
    // (1 - p_t)^gamma = sigmoid(s)^gamma = exp(-gamma * softplus(-s))
    const double modulator = gamma == 0.0 ? 1.0 : std::exp(-gamma * softplus(-s));
    total += alpha * modulator * softplus(s);
  }
  return total / static_cast<double>(logits.size());
}

Vector focal_loss_grad(const Vector& logits, std::span<const uint8_t> labels, double alpha,
                       double gamma) {
  check_labels(logits, labels);
  Vector grad(logits.size());
  const double inv_n = logits.size() > 0 ? 1.0 / static_cast<double>(logits.size()) : 0.0;
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const uint8_t y = labels[static_cast<size_t>(i)];
    const double s = wrong_class_logit(logits[i], y);
    const double sig = sigmoid(s);
    const double modulator = gamma == 0.0 ? 1.0 : std::exp(-gamma * softplus(-s));
    // d/ds [sigmoid(s)^gamma * softplus(s)]
    const double ds = alpha * modulator * (gamma * (1.0 - sig) * softplus(s) + sig);
    grad[i] = (y ? -ds : ds) * inv_n;
  }
  return grad;
}

double batch_loss(const BatchTrace& trace, double alpha, double gamma) {
  if (trace.traces.empty()) return 0.0;
  double total = 0.0;
  for (size_t g = 0; g < trace.traces.size(); ++g) {
    const auto& labels = trace.graphs[g]->labels;
    if (!labels) throw DataError("batch_loss: graph without labels");
    total += focal_loss(trace.traces[g].logits, *labels, alpha, gamma);
  }
  return total / static_cast<double>(trace.traces.size());
}

ModelParams backward(const BatchTrace& trace, const ModelParams& params, double alpha,
                     double gamma) {
  ModelParams grads = ModelParams::zeros_like(params);
  const size_t count = trace.traces.size();
  if (count == 0) return grads;
  const int d = params.config.dim;
  const size_t layers = params.layer_weights.size();
  const double inv_graphs = 1.0 / static_cast<double>(count);

  std::vector<Matrix> dz(count);  // gradient w.r.t. the current block output
  std::vector<Matrix> da(count);  // gradient w.r.t. edge weights
  for (size_t g = 0; g < count; ++g) {
    const GraphTrace& t = trace.traces[g];
    const auto& labels = trace.graphs[g]->labels;
    if (!labels) throw DataError("backward: graph without labels");
    const Vector dlogit = focal_loss_grad(t.logits, *labels, alpha, gamma) * inv_graphs;

    grads.fc3.weight += dlogit.transpose() * t.h2;
    grads.fc3.bias(0, 0) += dlogit.sum();
    const Matrix dh2 = dlogit * params.fc3.weight;
    const Matrix da2 = relu_mask(t.a2, dh2);
    grads.fc2.weight += da2.transpose() * t.h1;
    grads.fc2.bias += da2.colwise().sum();
    const Matrix dh1 = da2 * params.fc2.weight;
    const Matrix da1 = relu_mask(t.a1, dh1);
    grads.fc1.weight += da1.transpose() * t.concat;
    grads.fc1.bias += da1.colwise().sum();
    const Matrix dconcat = da1 * params.fc1.weight;
    dz[g] = dconcat.rightCols(d);
    da[g] = Matrix::Zero(t.a.rows(), t.a.cols());
  }

  for (size_t step = 0; step < layers; ++step) {
    const size_t l = layers - 1 - step;
    const BatchNorm& bn = params.norms[l];
    const Eigen::RowVectorXd gamma_row = bn.gamma.row(0);
    const Eigen::RowVectorXd inv_std = trace.inv_std[l].row(0);

    // z[l+1] = z[l] + y, so dy = dz. Reduce BN statistics over every node
    // of every graph first.
    Eigen::RowVectorXd sum_dxhat = Eigen::RowVectorXd::Zero(d);
    Eigen::RowVectorXd sum_dxhat_xhat = Eigen::RowVectorXd::Zero(d);
    for (size_t g = 0; g < count; ++g) {
      const GraphTrace& t = trace.traces[g];
      grads.norms[l].gamma += (dz[g].array() * t.xhat[l].array()).matrix().colwise().sum();
      grads.norms[l].beta += dz[g].colwise().sum();
      if (trace.mode == Mode::Train) {
        const Matrix dxhat = (dz[g].array().rowwise() * gamma_row.array()).matrix();
        sum_dxhat += dxhat.colwise().sum();
        sum_dxhat_xhat += (dxhat.array() * t.xhat[l].array()).matrix().colwise().sum();
      }
    }
    const double n = static_cast<double>(trace.total_nodes);
    for (size_t g = 0; g < count; ++g) {
      const GraphTrace& t = trace.traces[g];
      const Matrix dxhat = (dz[g].array().rowwise() * gamma_row.array()).matrix();
      Matrix dr;
      if (trace.mode == Mode::Train) {
        Matrix centered = dxhat;
        centered.rowwise() -= sum_dxhat / n;
        centered -= (t.xhat[l].array().rowwise() * (sum_dxhat_xhat / n).array()).matrix();
        dr = (centered.array().rowwise() * inv_std.array()).matrix();
      } else {
        dr = (dxhat.array().rowwise() * inv_std.array()).matrix();
      }
      const Matrix dpre = relu_mask(t.pre[l], dr);
      grads.layer_weights[l] += t.az[l].transpose() * dpre;
      const Matrix daz = dpre * params.layer_weights[l].transpose();
      da[g] += daz * t.z[l].transpose();
      dz[g] += t.a.transpose() * daz;
    }
  }

  for (size_t g = 0; g < count; ++g) {
    const GraphTrace& t = trace.traces[g];
    const Matrix& e = trace.graphs[g]->edge_input;
    const Matrix ds = softmax_backward(t.a, da[g]);
    const Matrix dp = ds * t.q;
    const Matrix dq = ds.transpose() * t.p;
    grads.phi.weight += dp.transpose() * e;
    grads.phi.bias += dp.colwise().sum();
    grads.phi_prime.weight += dq.transpose() * e;
    grads.phi_prime.bias += dq.colwise().sum();
  }
  return grads;
}

void sgd_step(ModelParams& params, const ModelParams& grads, SgdState& state,
              const TrainConfig& cfg) {
  grads.visit([](const std::string& name, const Matrix& g, bool trainable) {
    if (trainable && !g.allFinite()) throw NumericError("non-finite gradient in " + name);
  });
  std::vector<Matrix*> theta, vel;
  std::vector<const Matrix*> grad;
  std::vector<bool> trainable;
  params.visit([&](const std::string&, Matrix& t, bool tr) {
    theta.push_back(&t);
    trainable.push_back(tr);
  });
  state.velocity.visit([&](const std::string&, Matrix& t, bool) { vel.push_back(&t); });
  grads.visit([&](const std::string&, const Matrix& t, bool) { grad.push_back(&t); });
  for (size_t i = 0; i < theta.size(); ++i) {
    if (!trainable[i]) continue;
    *vel[i] = cfg.momentum * *vel[i] + *grad[i] + cfg.weight_decay * *theta[i];
    *theta[i] -= cfg.lr * *vel[i];
  }
}

}  // namespace ctxrank
