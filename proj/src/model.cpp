#include "samif/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "samif/errors.hpp"

namespace samif {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::logistic: return "logistic";
    case ModelKind::mlp: return "mlp";
    case ModelKind::least_squares: return "least_squares";
  }
  return "?";
}

std::string to_string(Activation act) { return act == Activation::tanh ? "tanh" : "relu"; }

ModelKind parse_model_kind(const std::string& text) {
  if (text == "logistic") return ModelKind::logistic;
  if (text == "mlp") return ModelKind::mlp;
  if (text == "least_squares") return ModelKind::least_squares;
  throw InvalidConfig("unknown model kind '" + text + "'");
}

Activation parse_activation(const std::string& text) {
  if (text == "tanh") return Activation::tanh;
  if (text == "relu") return Activation::relu;
  throw InvalidConfig("unknown activation '" + text + "'");
}

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

ModelSpec ModelSpec::logistic(std::size_t d, std::size_t classes) {
  return ModelSpec{ModelKind::logistic, {d, classes}, Activation::tanh};
}

ModelSpec ModelSpec::least_squares(std::size_t d, std::size_t classes) {
  return ModelSpec{ModelKind::least_squares, {d, classes}, Activation::tanh};
}

ModelSpec ModelSpec::mlp(std::vector<std::size_t> sizes, Activation act) {
  return ModelSpec{ModelKind::mlp, std::move(sizes), act};
}

std::size_t ModelSpec::param_count() const {
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    p += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  }
  return p;
}

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) throw InvalidConfig("model needs at least input and output sizes");
  if (std::any_of(layer_sizes.begin(), layer_sizes.end(), [](std::size_t s) { return s == 0; })) {
    throw InvalidConfig("layer sizes must be positive");
  }
  if (num_classes() < 2) throw InvalidConfig("model output size must be at least 2");
  if (kind != ModelKind::mlp && layer_sizes.size() != 2) {
    throw InvalidConfig(to_string(kind) + " model takes exactly [d, C] layer sizes");
  }
}

Dataset::Dataset(std::size_t rows, std::size_t dim, std::vector<double> features,
                 std::vector<int> labels, std::vector<Split> split)
    : dim_(dim), features_(std::move(features)), labels_(std::move(labels)), split_(std::move(split)) {
  if (rows == 0) throw InvalidInput("dataset must contain at least one row");
  if (features_.size() != rows * dim || labels_.size() != rows || split_.size() != rows) {
    throw InvalidInput("dataset feature/label/split counts disagree with " + std::to_string(rows) +
                       " rows of dimension " + std::to_string(dim));
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (!std::isfinite(features_[i])) {
      throw InvalidInput("non-finite feature at row " + std::to_string(i / dim));
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    if (labels_[i] < 0) throw InvalidInput("negative label at row " + std::to_string(i));
  }
}

std::vector<std::uint32_t> Dataset::indices(Split s) const {
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < split_.size(); ++i) {
    if (split_[i] == s) out.push_back(static_cast<std::uint32_t>(i));
  }
  return out;
}

int Dataset::max_label() const {
  return labels_.empty() ? -1 : *std::max_element(labels_.begin(), labels_.end());
}

Dataset Dataset::subset(std::span<const std::uint32_t> rows) const {
  std::vector<double> feats;
  std::vector<int> labels;
  std::vector<Split> split;
  feats.reserve(rows.size() * dim_);
  for (std::uint32_t r : rows) {
    auto x = row(r);
    feats.insert(feats.end(), x.begin(), x.end());
    labels.push_back(labels_[r]);
    split.push_back(split_[r]);
  }
  return Dataset(rows.size(), dim_, std::move(feats), std::move(labels), std::move(split));
}

namespace {

struct Layer {
  std::size_t in;
  std::size_t out;
  std::size_t w_off;  // row-major out x in
  std::size_t b_off;
};

// Per-example scratch space reused across the rows of a subset.
class Network {
 public:
  Network(const ModelSpec& spec, const ParamVector& params) : spec_(spec), w_(params.data()) {
    spec.validate();
    if (params.size() != spec.param_count()) {
      throw InvalidInput("parameter vector has length " + std::to_string(params.size()) +
                         ", model expects " + std::to_string(spec.param_count()));
    }
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
      Layer layer{spec.layer_sizes[l], spec.layer_sizes[l + 1], off, off + spec.layer_sizes[l] * spec.layer_sizes[l + 1]};
      off = layer.b_off + layer.out;
      layers_.push_back(layer);
    }
    a_.resize(layers_.size() + 1);
    z_.resize(layers_.size());
    delta_.resize(layers_.size());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      z_[l].resize(layers_[l].out);
      a_[l + 1].resize(layers_[l].out);
      delta_[l].resize(layers_[l].out);
    }
    a_[0].resize(spec.input_dim());
  }

  std::size_t classes() const { return layers_.back().out; }

  void check_input(std::span<const double> x, int y) const {
    if (x.size() != spec_.input_dim()) {
      throw InvalidInput("example has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(spec_.input_dim()));
    }
    if (y < 0 || static_cast<std::size_t>(y) >= classes()) {
      throw InvalidInput("label " + std::to_string(y) + " outside 0.." + std::to_string(classes() - 1));
    }
  }

  const std::vector<double>& forward(std::span<const double> x) {
    std::copy(x.begin(), x.end(), a_[0].begin());
    const std::size_t last = layers_.size() - 1;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& L = layers_[l];
      const double* W = w_ + L.w_off;
      const double* b = w_ + L.b_off;
      const std::vector<double>& in = a_[l];
      for (std::size_t o = 0; o < L.out; ++o) {
        double s = b[o];
        const double* row = W + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) s += row[i] * in[i];
        z_[l][o] = s;
        a_[l + 1][o] = (l == last) ? s : activate(s);
      }
    }
    return z_.back();
  }

  // Loss of the last forward pass; fills the output-layer delta (dloss/dlogits).
  double output_loss(int y) {
    const std::vector<double>& z = z_.back();
    std::vector<double>& d = delta_.back();
    if (spec_.kind == ModelKind::least_squares) {
      double loss = 0.0;
      for (std::size_t c = 0; c < z.size(); ++c) {
        d[c] = z[c] - (static_cast<int>(c) == y ? 1.0 : 0.0);
        loss += 0.5 * d[c] * d[c];
      }
      return loss;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      d[c] = std::exp(z[c] - m);
      sum += d[c];
    }
    for (double& v : d) v /= sum;
    const double loss = m + std::log(sum) - z[static_cast<std::size_t>(y)];
    d[static_cast<std::size_t>(y)] -= 1.0;
    return std::max(loss, 0.0);
  }

  // Softmax probabilities of the last forward pass (undefined for least squares).
  void softmax(std::vector<double>& s) const {
    const std::vector<double>& z = z_.back();
    const double m = *std::max_element(z.begin(), z.end());
    s.resize(z.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) sum += (s[c] = std::exp(z[c] - m));
    for (double& v : s) v /= sum;
  }

  // Accumulates scale * dloss/dparams into grad; requires output_loss first.
  void backward(double scale, double* grad) {
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const Layer& L = layers_[l];
      const std::vector<double>& d = delta_[l];
      const std::vector<double>& in = a_[l];
      double* gW = grad + L.w_off;
      double* gb = grad + L.b_off;
      for (std::size_t o = 0; o < L.out; ++o) {
        const double so = scale * d[o];
        if (so == 0.0) continue;
        double* row = gW + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) row[i] += so * in[i];
        gb[o] += so;
      }
      if (l == 0) break;
      const double* W = w_ + L.w_off;
      std::vector<double>& prev = delta_[l - 1];
      std::fill(prev.begin(), prev.end(), 0.0);
      for (std::size_t o = 0; o < L.out; ++o) {
        const double* row = W + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) prev[i] += row[i] * d[o];
      }
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] *= dactivate(z_[l - 1][i], a_[l][i]);
    }
  }

  // Accumulates scale * Hessian(loss) * v into out for the example (x, y).
  void hessian_vector(std::span<const double> x, int y, const double* v, double scale, double* out) {
    forward(x);
    output_loss(y);
    const std::size_t nl = layers_.size();
    ra_.resize(nl + 1);
    rz_.resize(nl);
    rdelta_.resize(nl);
    ra_[0].assign(a_[0].size(), 0.0);
    for (std::size_t l = 0; l < nl; ++l) {
      const Layer& L = layers_[l];
      const double* W = w_ + L.w_off;
      const double* V = v + L.w_off;
      const double* Vb = v + L.b_off;
      rz_[l].resize(L.out);
      ra_[l + 1].resize(L.out);
      for (std::size_t o = 0; o < L.out; ++o) {
        double s = Vb[o];
        const double* wrow = W + o * L.in;
        const double* vrow = V + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) s += vrow[i] * a_[l][i] + wrow[i] * ra_[l][i];
        rz_[l][o] = s;
        ra_[l + 1][o] = (l + 1 == nl) ? s : dactivate(z_[l][o], a_[l + 1][o]) * s;
      }
    }

    // Tangent of the output delta.
    std::vector<double>& rd_out = rdelta_[nl - 1];
    const std::vector<double>& rz_out = rz_[nl - 1];
    rd_out.resize(rz_out.size());
    if (spec_.kind == ModelKind::least_squares) {
      rd_out = rz_out;
    } else {
      softmax(probs_);
      double sr = 0.0;
      for (std::size_t c = 0; c < probs_.size(); ++c) sr += probs_[c] * rz_out[c];
      for (std::size_t c = 0; c < probs_.size(); ++c) rd_out[c] = probs_[c] * (rz_out[c] - sr);
    }

    for (std::size_t l = nl; l-- > 0;) {
      const Layer& L = layers_[l];
      const std::vector<double>& d = delta_[l];
      const std::vector<double>& rd = rdelta_[l];
      double* hW = out + L.w_off;
      double* hb = out + L.b_off;
      for (std::size_t o = 0; o < L.out; ++o) {
        double* row = hW + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) {
          row[i] += scale * (rd[o] * a_[l][i] + d[o] * ra_[l][i]);
        }
        hb[o] += scale * rd[o];
      }
      if (l == 0) break;
      const double* W = w_ + L.w_off;
      const double* V = v + L.w_off;
      std::vector<double>& prev_d = delta_[l - 1];
      std::vector<double>& prev_rd = rdelta_[l - 1];
      back_.assign(L.in, 0.0);
      rback_.assign(L.in, 0.0);
      for (std::size_t o = 0; o < L.out; ++o) {
        const double* wrow = W + o * L.in;
        const double* vrow = V + o * L.in;
        for (std::size_t i = 0; i < L.in; ++i) {
          back_[i] += wrow[i] * d[o];
          rback_[i] += vrow[i] * d[o] + wrow[i] * rd[o];
        }
      }
      prev_rd.resize(L.in);
      for (std::size_t i = 0; i < L.in; ++i) {
        const double zi = z_[l - 1][i];
        const double ai = a_[l][i];
        const double d1 = dactivate(zi, ai);
        prev_d[i] = back_[i] * d1;
        prev_rd[i] = rback_[i] * d1 + back_[i] * d2activate(ai) * rz_[l - 1][i];
      }
    }
  }

 private:
  double activate(double z) const {
    return spec_.activation == Activation::tanh ? std::tanh(z) : std::max(z, 0.0);
  }
  double dactivate(double z, double a) const {
    return spec_.activation == Activation::tanh ? 1.0 - a * a : (z > 0.0 ? 1.0 : 0.0);
  }
  double d2activate(double a) const {
    return spec_.activation == Activation::tanh ? -2.0 * a * (1.0 - a * a) : 0.0;
  }

  const ModelSpec& spec_;
  const double* w_;
  std::vector<Layer> layers_;
  std::vector<std::vector<double>> a_, z_, delta_;
  std::vector<std::vector<double>> ra_, rz_, rdelta_;
  std::vector<double> back_, rback_, probs_;
};

void check_indices(const Dataset& data, std::span<const std::uint32_t> indices) {
  if (indices.empty()) throw InvalidInput("index set is empty");
  for (std::uint32_t i : indices) {
    if (i >= data.size()) {
      throw InvalidInput("row index " + std::to_string(i) + " out of range for " +
                         std::to_string(data.size()) + " rows");
    }
  }
}

}  // namespace

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params(spec.param_count());
  std::mt19937_64 rng(seed);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < in * out; ++i) params[off + i] = dist(rng);
    off += in * out + out;  // biases stay zero
  }
  return params;
}

double example_loss(const ModelSpec& spec, const ParamVector& params, std::span<const double> x,
                    int y) {
  Network net(spec, params);
  net.check_input(x, y);
  net.forward(x);
  return net.output_loss(y);
}

LossGrad subset_loss_grad(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                          std::span<const std::uint32_t> indices, double scale) {
  Network net(spec, params);
  check_indices(data, indices);
  LossGrad out{0.0, ParamVector(params.size())};
  for (std::uint32_t i : indices) {
    auto x = data.row(i);
    const int y = data.label(i);
    net.check_input(x, y);
    net.forward(x);
    out.loss += net.output_loss(y);
    net.backward(scale, out.grad.data());
  }
  out.loss *= scale;
  return out;
}

double subset_loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                   std::span<const std::uint32_t> indices, double scale) {
  Network net(spec, params);
  check_indices(data, indices);
  double loss = 0.0;
  for (std::uint32_t i : indices) {
    auto x = data.row(i);
    const int y = data.label(i);
    net.check_input(x, y);
    net.forward(x);
    loss += net.output_loss(y);
  }
  return scale * loss;
}

ParamVector hvp(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                std::span<const std::uint32_t> indices, const ParamVector& v, double scale) {
  Network net(spec, params);
  if (v.size() != params.size()) {
    throw InvalidInput("hvp direction has length " + std::to_string(v.size()) + ", expected " +
                       std::to_string(params.size()));
  }
  check_indices(data, indices);
  ParamVector out(params.size());
  for (std::uint32_t i : indices) {
    auto x = data.row(i);
    const int y = data.label(i);
    net.check_input(x, y);
    net.hessian_vector(x, y, v.data(), scale, out.data());
  }
  return out;
}

Prediction predict(const ModelSpec& spec, const ParamVector& params, std::span<const double> x) {
  Network net(spec, params);
  net.check_input(x, 0);
  Prediction p;
  p.logits = net.forward(x);
  p.label = static_cast<int>(std::max_element(p.logits.begin(), p.logits.end()) - p.logits.begin());
  return p;
}

double accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                std::span<const std::uint32_t> indices) {
  if (indices.empty()) return 0.0;
  Network net(spec, params);
  std::size_t correct = 0;
  for (std::uint32_t i : indices) {
    const auto& z = net.forward(data.row(i));
    const int label = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (label == data.label(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

}  // namespace samif
