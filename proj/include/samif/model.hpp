#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "samif/numcore.hpp"

namespace samif {

enum class ModelKind {
  logistic,       // single affine layer, softmax cross-entropy
  mlp,            // affine layers with hidden activations, softmax cross-entropy
  least_squares,  // single affine layer, 0.5 * ||logits - onehot(y)||^2 (constant Hessian)
};

enum class Activation { tanh, relu };

std::string to_string(ModelKind kind);
std::string to_string(Activation act);
ModelKind parse_model_kind(const std::string& text);
Activation parse_activation(const std::string& text);

struct ModelSpec {
  ModelKind kind = ModelKind::logistic;
  std::vector<std::size_t> layer_sizes;  // input d, hidden..., output C
  Activation activation = Activation::tanh;

  static ModelSpec logistic(std::size_t d, std::size_t classes);
  static ModelSpec least_squares(std::size_t d, std::size_t classes);
  static ModelSpec mlp(std::vector<std::size_t> sizes, Activation act = Activation::tanh);

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t param_count() const;

  /// Throws InvalidConfig when the layer list is inconsistent with the kind.
  void validate() const;
};

enum class Split : std::uint8_t { train, val, test };

std::string to_string(Split s);

/// Row-major feature matrix with integer labels and a split tag per row.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t rows, std::size_t dim, std::vector<double> features, std::vector<int> labels,
          std::vector<Split> split);

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }
  Split split(std::size_t i) const { return split_[i]; }

  const std::vector<double>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<Split>& splits() const { return split_; }

  void set_label(std::size_t i, int y) { labels_[i] = y; }
  void set_split(std::size_t i, Split s) { split_[i] = s; }

  /// Row ids carrying the given tag, ascending.
  std::vector<std::uint32_t> indices(Split s) const;
  int max_label() const;

  /// Copy holding only the listed rows, in the given order.
  Dataset subset(std::span<const std::uint32_t> rows) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
  std::vector<Split> split_;
};

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

double example_loss(const ModelSpec& spec, const ParamVector& params, std::span<const double> x,
                    int y);

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// scale * sum of per-example losses over `indices` and its gradient, by
/// backpropagation. With scale = 1/n this is the term L_S restricted to the
/// given rows.
LossGrad subset_loss_grad(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                          std::span<const std::uint32_t> indices, double scale);

double subset_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                   std::span<const std::uint32_t> indices, double scale);

/// scale * (sum of per-example Hessians) * v, computed exactly with a forward
/// tangent pass followed by a backward pass of the tangent of the gradient.
ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                std::span<const std::uint32_t> indices, const ParamVector& v, double scale);

struct Prediction {
  int label = 0;
  std::vector<double> logits;
};

/// argmax of the logits; ties go to the smallest class index.
Prediction predict(const ModelSpec& spec, const ParamVector& params, std::span<const double> x);

double accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                std::span<const std::uint32_t> indices);

}  // namespace samif
