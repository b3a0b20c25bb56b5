#include "nsvf/field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace nsvf {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void activate(Activation act, const MatrixXd& pre, MatrixXd& post) {
  if (act == Activation::kRelu) {
    post = pre.cwiseMax(0.0);
  } else {
    post = pre.unaryExpr([](double x) { return softplus(x); });
  }
}

// dpre = dpost * act'(pre)
void activate_backward(Activation act, const MatrixXd& pre, const MatrixXd& d_post, MatrixXd& d_pre) {
  if (act == Activation::kRelu) {
    d_pre = (pre.array() > 0.0).select(d_post, 0.0);
  } else {
    d_pre = d_post.array() * pre.unaryExpr([](double x) { return sigmoid(x); }).array();
  }
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> positional_encode(std::span<const double> x, int num_freqs) {
  if (num_freqs < 0) throw InvalidArgument("positional_encode: negative frequency count");
  const std::size_t d = x.size();
  std::vector<double> out(d * (1 + 2 * static_cast<std::size_t>(num_freqs)));
  std::copy(x.begin(), x.end(), out.begin());
  for (int l = 0; l < num_freqs; ++l) {
    const double f = std::ldexp(std::numbers::pi, l);
    for (std::size_t i = 0; i < d; ++i) {
      out[(1 + 2 * l) * d + i] = std::sin(f * x[i]);
      out[(2 + 2 * l) * d + i] = std::cos(f * x[i]);
    }
  }
  return out;
}

// sin/cos at frequency 2^l pi via the double-angle recurrence; one sin/cos
// pair per value instead of one per frequency.
void positional_encode(const Eigen::Ref<const MatrixXd>& x, int num_freqs, Eigen::Ref<MatrixXd> out) {
  const Eigen::Index d = x.rows();
  out.topRows(d) = x;
  if (num_freqs == 0) return;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      double s = std::sin(std::numbers::pi * x(i, j));
      double c = std::cos(std::numbers::pi * x(i, j));
      for (int l = 0; l < num_freqs; ++l) {
        out((1 + 2 * l) * d + i, j) = s;
        out((2 + 2 * l) * d + i, j) = c;
        const double s2 = 2.0 * s * c;
        c = (c - s) * (c + s);
        s = s2;
      }
    }
  }
}

void positional_encode_backward(const Eigen::Ref<const MatrixXd>& x, int num_freqs,
                                const Eigen::Ref<const MatrixXd>& d_encoded, Eigen::Ref<MatrixXd> d_x) {
  const Eigen::Index d = x.rows();
  d_x += d_encoded.topRows(d);
  if (num_freqs == 0) return;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      double s = std::sin(std::numbers::pi * x(i, j));
      double c = std::cos(std::numbers::pi * x(i, j));
      double acc = 0.0;
      double f = std::numbers::pi;
      for (int l = 0; l < num_freqs; ++l, f *= 2.0) {
        acc += f * (c * d_encoded((1 + 2 * l) * d + i, j) - s * d_encoded((2 + 2 * l) * d + i, j));
        const double s2 = 2.0 * s * c;
        c = (c - s) * (c + s);
        s = s2;
      }
      d_x(i, j) += acc;
    }
  }
}

std::array<double, 8> trilinear_weights(const Vec3& local) {
  std::array<double, 8> w{};
  for (int k = 0; k < 8; ++k) {
    const CellCoord o = corner_offset(k);
    w[static_cast<std::size_t>(k)] = (o.x ? local.x() : 1.0 - local.x()) * (o.y ? local.y() : 1.0 - local.y()) *
                                     (o.z ? local.z() : 1.0 - local.z());
  }
  return w;
}

std::vector<double> trilinear(std::span<const std::vector<double>> corner_values, const Vec3& local) {
  if (corner_values.size() != 8) throw InvalidArgument("trilinear: expected 8 corner vectors");
  if (!((local.array() >= 0.0).all() && (local.array() <= 1.0).all()))
    throw InvalidArgument("trilinear: local coordinates outside [0,1]^3");
  const std::size_t d = corner_values[0].size();
  for (const auto& c : corner_values)
    if (c.size() != d) throw InvalidArgument("trilinear: corner vectors differ in length");
  const auto w = trilinear_weights(local);
  std::vector<double> out(d, 0.0);
  for (int k = 0; k < 8; ++k)
    for (std::size_t i = 0; i < d; ++i) out[i] += w[static_cast<std::size_t>(k)] * corner_values[static_cast<std::size_t>(k)][i];
  return out;
}

FieldNetwork::FieldNetwork(const FieldConfig& config) : config_(config) {
  if (config.embed_dim < 1 || config.feature_freqs < 0 || config.direction_freqs < 0 || config.hidden < 1 ||
      config.density_layers < 1 || config.color_layers < 1)
    throw InvalidArgument("FieldNetwork: invalid configuration");
  const int h = config.hidden;
  std::size_t offset = 0;
  const auto add = [&](int in, int out) {
    layers_.push_back({in, out, offset});
    offset += static_cast<std::size_t>(in) * out + out;
  };
  add(config.feature_size(), h);
  for (int i = 1; i < config.density_layers; ++i) add(h, h);
  add(h, 1);
  add(h + config.direction_size(), h);
  for (int i = 1; i < config.color_layers; ++i) add(h, h);
  add(h, 3);
  params_.assign(offset, 0.0);
}

Eigen::Map<const MatrixXd> FieldNetwork::weight(int i) const {
  const Layer& l = layers_[static_cast<std::size_t>(i)];
  return {params_.data() + l.offset, l.out, l.in};
}

Eigen::Map<const VectorXd> FieldNetwork::bias(int i) const {
  const Layer& l = layers_[static_cast<std::size_t>(i)];
  return {params_.data() + l.offset + static_cast<std::size_t>(l.in) * l.out, l.out};
}

void FieldNetwork::initialize(std::mt19937_64& rng) {
  for (const Layer& l : layers_) {
    const double bound = std::sqrt(6.0 / l.in);
    std::uniform_real_distribution<double> uni(-bound, bound);
    const std::size_t nw = static_cast<std::size_t>(l.in) * l.out;
    for (std::size_t i = 0; i < nw; ++i) params_[l.offset + i] = uni(rng);
    std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(l.offset + nw), l.out, 0.0);
  }
}

void FieldNetwork::set_sigma_bias(double b) {
  const Layer& l = layers_[static_cast<std::size_t>(sigma_layer())];
  params_[l.offset + static_cast<std::size_t>(l.in) * l.out] = b;
}

void FieldNetwork::forward_density(const MatrixXd& features, VectorXd& sigma) const {
  MatrixXd x = features;
  MatrixXd pre;
  for (int i = 0; i < config_.density_layers; ++i) {
    pre.noalias() = weight(i) * x;
    pre.colwise() += bias(i);
    activate(config_.hidden_activation, pre, x);
  }
  const int s = sigma_layer();
  const Eigen::RowVectorXd raw = (weight(s) * x).array() + bias(s)(0);
  sigma = raw.transpose().unaryExpr([](double v) { return softplus(v); });
}

void FieldNetwork::forward(const MatrixXd& features, const MatrixXd& directions, VectorXd& sigma, MatrixXd& color,
                           NetworkTape* tape) const {
  NetworkTape local;
  NetworkTape& t = tape ? *tape : local;
  const std::size_t n_layers = layers_.size();
  t.pre.resize(n_layers);
  t.post.resize(n_layers);
  t.features = features;
  t.directions = directions;

  const Activation act = config_.hidden_activation;
  const MatrixXd* x = &t.features;
  for (int i = 0; i < config_.density_layers; ++i) {
    t.pre[i].noalias() = weight(i) * *x;
    t.pre[i].colwise() += bias(i);
    activate(act, t.pre[i], t.post[i]);
    x = &t.post[i];
  }
  const MatrixXd& h = *x;
  const int s = sigma_layer();
  t.pre[s].noalias() = weight(s) * h;
  t.pre[s].array() += bias(s)(0);
  sigma = t.pre[s].row(0).transpose().unaryExpr([](double v) { return softplus(v); });

  const int c0 = s + 1;
  const int hd = config_.hidden;
  const auto w0 = weight(c0);
  t.pre[c0].noalias() = w0.leftCols(hd) * h;
  if (t.directions.cols() == 1) {
    t.pre[c0].colwise() += w0.rightCols(w0.cols() - hd) * t.directions.col(0) + bias(c0);
  } else {
    t.pre[c0].noalias() += w0.rightCols(w0.cols() - hd) * t.directions;
    t.pre[c0].colwise() += bias(c0);
  }
  activate(act, t.pre[c0], t.post[c0]);
  x = &t.post[c0];
  const int out = color_output_layer();
  for (int i = c0 + 1; i < out; ++i) {
    t.pre[i].noalias() = weight(i) * *x;
    t.pre[i].colwise() += bias(i);
    activate(act, t.pre[i], t.post[i]);
    x = &t.post[i];
  }
  t.pre[out].noalias() = weight(out) * *x;
  t.pre[out].colwise() += bias(out);
  color = t.pre[out].unaryExpr([](double v) { return sigmoid(v); });
}

void FieldNetwork::backward(const NetworkTape& t, const VectorXd& d_sigma, const MatrixXd& d_color,
                            std::span<double> grad, MatrixXd* d_features) const {
  if (grad.size() != params_.size()) throw InvalidArgument("FieldNetwork::backward: gradient size mismatch");
  const Eigen::Index n = t.features.cols();
  if (d_sigma.size() != n || d_color.rows() != 3 || d_color.cols() != n)
    throw InvalidArgument("FieldNetwork::backward: upstream shape mismatch");
  const Activation act = config_.hidden_activation;
  const auto gw = [&](int i) {
    const Layer& l = layers_[static_cast<std::size_t>(i)];
    return Eigen::Map<MatrixXd>(grad.data() + l.offset, l.out, l.in);
  };
  const auto gb = [&](int i) {
    const Layer& l = layers_[static_cast<std::size_t>(i)];
    return Eigen::Map<VectorXd>(grad.data() + l.offset + static_cast<std::size_t>(l.in) * l.out, l.out);
  };

  const int s = sigma_layer();
  const int c0 = s + 1;
  const int out = color_output_layer();
  const int hd = config_.hidden;
  const MatrixXd& h = t.post[static_cast<std::size_t>(config_.density_layers - 1)];

  // Color branch.
  MatrixXd d_pre = d_color.array() * (t.pre[out].unaryExpr([](double v) { return sigmoid(v); }).array() *
                                      (1.0 - t.pre[out].unaryExpr([](double v) { return sigmoid(v); }).array()));
  MatrixXd d_x;
  for (int i = out; i > c0; --i) {
    const MatrixXd& input = t.post[static_cast<std::size_t>(i - 1)];
    gw(i).noalias() += d_pre * input.transpose();
    gb(i) += d_pre.rowwise().sum();
    d_x.noalias() = weight(i).transpose() * d_pre;
    activate_backward(act, t.pre[static_cast<std::size_t>(i - 1)], d_x, d_pre);
  }
  const auto w0 = weight(c0);
  auto g0 = gw(c0);
  g0.leftCols(hd).noalias() += d_pre * h.transpose();
  if (t.directions.cols() == 1) {
    g0.rightCols(w0.cols() - hd).noalias() += d_pre.rowwise().sum() * t.directions.col(0).transpose();
  } else {
    g0.rightCols(w0.cols() - hd).noalias() += d_pre * t.directions.transpose();
  }
  gb(c0) += d_pre.rowwise().sum();
  MatrixXd d_h = w0.leftCols(hd).transpose() * d_pre;

  // Sigma head.
  const Eigen::RowVectorXd d_s =
      d_sigma.transpose().array() * t.pre[s].row(0).unaryExpr([](double v) { return sigmoid(v); }).array();
  gw(s).noalias() += d_s * h.transpose();
  gb(s)(0) += d_s.sum();
  d_h.noalias() += weight(s).transpose() * d_s;

  // Density trunk.
  for (int i = config_.density_layers - 1; i >= 0; --i) {
    activate_backward(act, t.pre[static_cast<std::size_t>(i)], d_h, d_pre);
    const MatrixXd& input = i == 0 ? t.features : t.post[static_cast<std::size_t>(i - 1)];
    gw(i).noalias() += d_pre * input.transpose();
    gb(i) += d_pre.rowwise().sum();
    if (i > 0 || d_features) d_h.noalias() = weight(i).transpose() * d_pre;
  }
  if (d_features) *d_features = std::move(d_h);
}

void GradientBuffer::reset(const FieldNetwork& net, const EmbeddingTable& table) {
  network = VectorXd::Zero(static_cast<Eigen::Index>(net.num_parameters()));
  embed_dim = table.dim();
  embeddings.assign(table.data().size(), 0.0);
  background.setZero();
}

void GradientBuffer::zero() {
  network.setZero();
  std::fill(embeddings.begin(), embeddings.end(), 0.0);
  background.setZero();
}

bool GradientBuffer::congruent(const FieldNetwork& net, const EmbeddingTable& table) const {
  return network.size() == static_cast<Eigen::Index>(net.num_parameters()) && embed_dim == table.dim() &&
         embeddings.size() == table.data().size();
}

GradientBuffer& GradientBuffer::operator+=(const GradientBuffer& other) {
  if (other.network.size() != network.size() || other.embeddings.size() != embeddings.size())
    throw InvalidArgument("GradientBuffer: shape mismatch");
  network += other.network;
  for (std::size_t i = 0; i < embeddings.size(); ++i) embeddings[i] += other.embeddings[i];
  background += other.background;
  return *this;
}

void gather_features(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldConfig& config,
                     std::span<const FieldPoint> points, MatrixXd& raw, MatrixXd& encoded, FieldTape* tape) {
  const int d = config.embed_dim;
  if (table.dim() != d) throw InvalidArgument("gather_features: embedding dim does not match network");
  const auto n = static_cast<Eigen::Index>(points.size());
  raw.resize(d, n);
  if (tape) {
    tape->corner_rows.resize(points.size());
    tape->weights.resize(8, n);
  }
  const float* data = table.data().data();
  for (Eigen::Index j = 0; j < n; ++j) {
    const FieldPoint& p = points[static_cast<std::size_t>(j)];
    const Vec3 local = p.local.cwiseMax(0.0).cwiseMin(1.0);
    const auto w = trilinear_weights(local);
    const auto& rows = grid.cell_corners(p.voxel);
    auto col = raw.col(j);
    col.setZero();
    for (int k = 0; k < 8; ++k) {
      const float* src = data + static_cast<std::size_t>(rows[static_cast<std::size_t>(k)]) * d;
      col += w[static_cast<std::size_t>(k)] * Eigen::Map<const Eigen::VectorXf>(src, d).cast<double>();
    }
    if (tape) {
      tape->corner_rows[static_cast<std::size_t>(j)] = rows;
      for (int k = 0; k < 8; ++k) tape->weights(k, j) = w[static_cast<std::size_t>(k)];
    }
  }
  encoded.resize(config.feature_size(), n);
  positional_encode(raw, config.feature_freqs, encoded);
}

void evaluate_field(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                    std::span<const FieldPoint> points, const Vec3& direction, VectorXd& sigma, MatrixXd& color,
                    FieldTape* tape) {
  const FieldConfig& cfg = net.config();
  MatrixXd raw, encoded;
  gather_features(grid, table, cfg, points, raw, encoded, tape);
  MatrixXd dir(cfg.direction_size(), 1);
  positional_encode(direction, cfg.direction_freqs, dir);
  if (tape) {
    tape->raw = std::move(raw);
    net.forward(encoded, dir, sigma, color, &tape->net);
  } else {
    net.forward(encoded, dir, sigma, color, nullptr);
  }
}

void evaluate_density(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                      std::span<const FieldPoint> points, VectorXd& sigma) {
  MatrixXd raw, encoded;
  gather_features(grid, table, net.config(), points, raw, encoded, nullptr);
  net.forward_density(encoded, sigma);
}

void backward_field(const FieldTape& tape, const FieldNetwork& net, const VectorXd& d_sigma, const MatrixXd& d_color,
                    GradientBuffer& grads) {
  const FieldConfig& cfg = net.config();
  if (grads.network.size() != static_cast<Eigen::Index>(net.num_parameters()) || grads.embed_dim != cfg.embed_dim ||
      tape.raw.rows() != cfg.embed_dim)
    throw InvalidArgument("backward_field: gradient buffer does not match the network");
  MatrixXd d_features;
  net.backward(tape.net, d_sigma, d_color, {grads.network.data(), static_cast<std::size_t>(grads.network.size())},
               &d_features);
  MatrixXd d_raw = MatrixXd::Zero(tape.raw.rows(), tape.raw.cols());
  positional_encode_backward(tape.raw, cfg.feature_freqs, d_features, d_raw);
  const int d = cfg.embed_dim;
  const std::size_t rows = grads.embeddings.size() / static_cast<std::size_t>(d);
  for (Eigen::Index j = 0; j < d_raw.cols(); ++j) {
    const auto& corner_rows = tape.corner_rows[static_cast<std::size_t>(j)];
    for (int k = 0; k < 8; ++k) {
      const double w = tape.weights(k, j);
      if (w == 0.0) continue;
      const auto r = static_cast<std::size_t>(corner_rows[static_cast<std::size_t>(k)]);
      if (r >= rows) throw InvalidArgument("backward_field: corner row outside gradient buffer");
      Eigen::Map<VectorXd>(grads.embeddings.data() + r * d, d) += w * d_raw.col(j);
    }
  }
}

QueryResult query(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net, const Vec3& p,
                  const Vec3& v) {
  const auto id = grid.locate(p);
  if (!id) throw InvalidArgument("query: point lies outside every occupied voxel");
  const FieldPoint point{*id, grid.local_coords(*id, p)};
  QueryResult result;
  VectorXd sigma;
  MatrixXd color;
  evaluate_field(grid, table, net, {&point, 1}, v.normalized(), sigma, color, &result.tape);
  result.sigma = sigma(0);
  result.color = color.col(0);
  return result;
}

void query_backward(const QueryResult& result, const FieldNetwork& net, double d_sigma, const Vec3& d_color,
                    GradientBuffer& grads) {
  if (result.tape.raw.cols() != 1) throw InvalidArgument("query_backward: tape does not come from query");
  VectorXd ds(1);
  ds(0) = d_sigma;
  MatrixXd dc = d_color;
  backward_field(result.tape, net, ds, dc, grads);
}

}  // namespace nsvf
