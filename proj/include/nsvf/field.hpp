#pragma once

#include "nsvf/geometry.hpp"
#include "nsvf/voxel_grid.hpp"

#include <Eigen/Core>

#include <array>
#include <random>
#include <span>
#include <vector>

namespace nsvf {

enum class Activation { kRelu, kSoftplus };

struct FieldConfig {
  int embed_dim = 32;        // d, per-corner embedding size
  int feature_freqs = 6;     // L for the interpolated feature
  int direction_freqs = 4;   // L for the view direction
  int hidden = 128;
  int density_layers = 2;    // hidden layers in the density trunk
  int color_layers = 2;      // hidden layers in the color branch
  Activation hidden_activation = Activation::kRelu;

  int feature_size() const { return embed_dim * (1 + 2 * feature_freqs); }
  int direction_size() const { return 3 * (1 + 2 * direction_freqs); }

  friend bool operator==(const FieldConfig&, const FieldConfig&) = default;
};

/// Per-component sinusoidal encoding, block layout:
/// [x, sin(2^0 pi x), cos(2^0 pi x), ..., sin(2^(L-1) pi x), cos(2^(L-1) pi x)].
std::vector<double> positional_encode(std::span<const double> x, int num_freqs);

/// Column-wise encoding of a (dim x N) matrix into (dim (1 + 2L) x N).
void positional_encode(const Eigen::Ref<const Eigen::MatrixXd>& x, int num_freqs, Eigen::Ref<Eigen::MatrixXd> out);

/// Accumulates d_x += J^T d_encoded for the encoding above.
void positional_encode_backward(const Eigen::Ref<const Eigen::MatrixXd>& x, int num_freqs,
                                const Eigen::Ref<const Eigen::MatrixXd>& d_encoded, Eigen::Ref<Eigen::MatrixXd> d_x);

/// Corner weights for local coordinates in [0,1]^3, corner order as corner_offset().
std::array<double, 8> trilinear_weights(const Vec3& local);

/// Trilinear interpolation of 8 equally sized corner vectors. Throws when
/// `local` is outside [0,1]^3.
std::vector<double> trilinear(std::span<const std::vector<double>> corner_values, const Vec3& local);

/// Intermediates of a network forward pass over N columns.
struct NetworkTape {
  Eigen::MatrixXd features;    // encoded features, feature_size x N
  Eigen::MatrixXd directions;  // encoded directions, direction_size x N (empty for density-only)
  std::vector<Eigen::MatrixXd> pre;   // pre-activation of every layer
  std::vector<Eigen::MatrixXd> post;  // activation of every hidden layer (output layers: empty)
};

/// The shared MLP. Density trunk -> softplus sigma head; color branch takes the
/// last density hidden state plus the encoded view direction -> sigmoid RGB.
///
/// All parameters live in one flat vector. Layer order: density hidden layers,
/// sigma head, color hidden layers, color output. Each layer stores its
/// (out x in) column-major weight followed by its bias.
class FieldNetwork {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    std::size_t offset = 0;
  };

  FieldNetwork() = default;
  explicit FieldNetwork(const FieldConfig& config);

  const FieldConfig& config() const { return config_; }
  std::size_t num_parameters() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  const std::vector<Layer>& layers() const { return layers_; }
  int sigma_layer() const { return config_.density_layers; }
  int color_output_layer() const { return static_cast<int>(layers_.size()) - 1; }

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  /// Kaiming-style uniform weights (bound sqrt(6 / fan_in)), zero biases.
  void initialize(std::mt19937_64& rng);
  /// Pre-softplus offset of the density head. Negative values start transparent.
  void set_sigma_bias(double b);

  /// sigma (N), color (3 x N). Directions must hold one encoded column per sample.
  void forward(const Eigen::MatrixXd& features, const Eigen::MatrixXd& directions, Eigen::VectorXd& sigma,
               Eigen::MatrixXd& color, NetworkTape* tape) const;
  /// Density branch only.
  void forward_density(const Eigen::MatrixXd& features, Eigen::VectorXd& sigma) const;

  /// grad += dL/dparams; d_features (if given) receives dL/dfeatures.
  void backward(const NetworkTape& tape, const Eigen::VectorXd& d_sigma, const Eigen::MatrixXd& d_color,
                std::span<double> grad, Eigen::MatrixXd* d_features) const;

  friend bool operator==(const FieldNetwork& a, const FieldNetwork& b) {
    return a.config_ == b.config_ && a.params_ == b.params_;
  }

 private:
  FieldConfig config_{};
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

/// Gradient accumulators congruent with one network and one embedding table.
struct GradientBuffer {
  Eigen::VectorXd network;
  std::vector<double> embeddings;  // rows x dim, row-major
  int embed_dim = 0;
  Vec3 background = Vec3::Zero();

  GradientBuffer() = default;
  GradientBuffer(const FieldNetwork& net, const EmbeddingTable& table) { reset(net, table); }

  void reset(const FieldNetwork& net, const EmbeddingTable& table);
  void zero();
  bool congruent(const FieldNetwork& net, const EmbeddingTable& table) const;
  GradientBuffer& operator+=(const GradientBuffer& other);
};

/// A point inside a known voxel; local is in [0,1]^3 relative to that voxel.
struct FieldPoint {
  int voxel = 0;
  Vec3 local = Vec3::Zero();
};

/// Everything the backward pass needs for a batch of field evaluations.
struct FieldTape {
  std::vector<std::array<std::int32_t, 8>> corner_rows;
  Eigen::Matrix<double, 8, Eigen::Dynamic> weights;  // trilinear weights per sample
  Eigen::MatrixXd raw;                                // interpolated features, d x N
  NetworkTape net;
};

/// Interpolated (d x N) and encoded features for a batch of points.
void gather_features(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldConfig& config,
                     std::span<const FieldPoint> points, Eigen::MatrixXd& raw, Eigen::MatrixXd& encoded,
                     FieldTape* tape);

/// Evaluates sigma and color for a batch sharing one view direction.
void evaluate_field(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                    std::span<const FieldPoint> points, const Vec3& direction, Eigen::VectorXd& sigma,
                    Eigen::MatrixXd& color, FieldTape* tape);

/// Density only (pruning).
void evaluate_density(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net,
                      std::span<const FieldPoint> points, Eigen::VectorXd& sigma);

/// Backpropagates upstream gradients of a batch into network and embedding grads.
void backward_field(const FieldTape& tape, const FieldNetwork& net, const Eigen::VectorXd& d_sigma,
                    const Eigen::MatrixXd& d_color, GradientBuffer& grads);

struct QueryResult {
  double sigma = 0.0;
  Vec3 color = Vec3::Zero();
  FieldTape tape;
};

/// Field at world point p viewed along v. Throws InvalidArgument when p lies
/// outside every occupied voxel.
QueryResult query(const SparseVoxelGrid& grid, const EmbeddingTable& table, const FieldNetwork& net, const Vec3& p,
                  const Vec3& v);

/// Accumulates d(output)/d(parameters) * upstream into grads. Throws on a
/// shape mismatch between tape, network and buffer.
void query_backward(const QueryResult& result, const FieldNetwork& net, double d_sigma, const Vec3& d_color,
                    GradientBuffer& grads);

double softplus(double x);
double sigmoid(double x);

}  // namespace nsvf
