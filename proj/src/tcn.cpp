#include "tactorque/tcn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "tactorque/errors.hpp"

namespace tactorque {
namespace {

// col(ci*K + k, t) = x(ci, t - (K-1-k)*d), zero left of the window. The taps
// of one input channel are contiguous, oldest first, so weight layout and
// fold-back below agree with it.
Mat im2col(const Mat& x, int kernel, int dilation) {
  const int channels = static_cast<int>(x.rows());
  const int len = static_cast<int>(x.cols());
  Mat col = Mat::Zero(static_cast<Eigen::Index>(channels) * kernel, len);
  for (int ci = 0; ci < channels; ++ci) {
    for (int k = 0; k < kernel; ++k) {
      const int off = (kernel - 1 - k) * dilation;
      if (off >= len) continue;
      col.row(ci * kernel + k).segment(off, len - off) =
          x.row(ci).segment(0, len - off);
    }
  }
  return col;
}

void fold_back(const Mat& dcol, int kernel, int dilation, Mat& dx) {
  const int channels = static_cast<int>(dx.rows());
  const int len = static_cast<int>(dx.cols());
  for (int ci = 0; ci < channels; ++ci) {
    for (int k = 0; k < kernel; ++k) {
      const int off = (kernel - 1 - k) * dilation;
      if (off >= len) continue;
      dx.row(ci).segment(0, len - off) +=
          dcol.row(ci * kernel + k).segment(off, len - off);
    }
  }
}

struct ForwardCache {
  Mat input;              // normalized window
  std::vector<Mat> cols;  // im2col of each layer input
  std::vector<Mat> acts;  // tanh output of each layer
};

Mat normalize(const TcnModel& model, const Mat& window) {
  require(window.rows() == model.c_in && window.cols() == model.window,
          "window shape does not match the model");
  return ((window.colwise() - model.input_mean).array().colwise() /
          model.input_scale.array())
      .matrix();
}

const Mat& run_forward(const TcnModel& model, const Mat& window,
                       ForwardCache& cache) {
  cache.input = normalize(model, window);
  cache.cols.clear();
  cache.acts.clear();
  const Mat* x = &cache.input;
  for (const ConvLayer& layer : model.layers) {
    cache.cols.push_back(im2col(*x, layer.kernel, layer.dilation));
    Mat a = layer.weight * cache.cols.back();
    a.colwise() += layer.bias;
    cache.acts.push_back(a.array().tanh().matrix());
    x = &cache.acts.back();
  }
  return cache.acts.back();
}

void write_bytes(std::ofstream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void write_u32(std::ofstream& out, std::uint32_t v) { write_bytes(out, &v, 4); }

void write_f32_block(std::ofstream& out, const double* data, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) {
    const float f = static_cast<float>(data[i]);
    write_bytes(out, &f, 4);
  }
}

// Matrices are written row-major regardless of Eigen's storage order.
void write_mat(std::ofstream& out, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float f = static_cast<float>(m(r, c));
      write_bytes(out, &f, 4);
    }
}

void read_bytes(std::ifstream& in, void* data, std::size_t size,
                const std::string& path) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (!in) throw IoError(path + ": truncated weights file");
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
  std::uint32_t v = 0;
  read_bytes(in, &v, 4, path);
  return v;
}

void read_mat(std::ifstream& in, Mat& m, const std::string& path) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      float f = 0.0f;
      read_bytes(in, &f, 4, path);
      m(r, c) = static_cast<double>(f);
    }
}

void read_vec(std::ifstream& in, Vec& v, const std::string& path) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    float f = 0.0f;
    read_bytes(in, &f, 4, path);
    v(i) = static_cast<double>(f);
  }
}

constexpr char kMagic[4] = {'T', 'Q', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

int TcnModel::receptive_field() const {
  int field = 1;
  for (const ConvLayer& layer : layers)
    field += (layer.kernel - 1) * layer.dilation;
  return field;
}

void TcnModel::validate() const {
  require(c_in > 0 && window > 0 && n_out > 0, "model dims must be positive");
  require(!layers.empty(), "model has no conv layers");
  int prev = c_in;
  for (const ConvLayer& layer : layers) {
    require(layer.kernel >= 1 && layer.dilation >= 1, "bad layer geometry");
    require(layer.in_ch == prev, "layer input width does not chain");
    require(layer.weight.rows() == layer.out_ch &&
                layer.weight.cols() ==
                    static_cast<Eigen::Index>(layer.in_ch) * layer.kernel,
            "conv weight shape mismatch");
    require(layer.bias.size() == layer.out_ch, "conv bias shape mismatch");
    prev = layer.out_ch;
  }
  for (const LinearHead* head : {&low, &high}) {
    require(head->weight.rows() == n_out && head->weight.cols() == prev,
            "head weight shape mismatch");
    require(head->bias.size() == n_out, "head bias shape mismatch");
  }
  require(input_mean.size() == c_in && input_scale.size() == c_in,
          "normalization stats do not match c_in");
  require((input_scale.array() > 0.0).all(), "input scale must be positive");
  require(w_low >= 0.0 && w_high >= 0.0, "head weights must be non-negative");
  require(receptive_field() >= window,
          "receptive field must cover the input window");
}

TcnModel init_tcn(const CompensatorParams& params, int c_in, int n_out,
                  std::uint64_t seed) {
  params.validate();
  require(c_in > 0 && n_out > 0, "model dims must be positive");

  TcnModel model;
  model.c_in = c_in;
  model.window = params.window;
  model.n_out = n_out;
  model.input_mean = Vec::Zero(c_in);
  model.input_scale = Vec::Ones(c_in);
  model.w_low = params.w_low;
  model.w_high = params.w_high;
  model.seed = seed;

  std::mt19937_64 rng(seed);
  // Raw 53-bit draws keep the stream independent of any distribution
  // implementation; one weight consumes exactly one draw, row-major order,
  // layers front to back then low head then high head. Biases start at zero
  // and consume nothing.
  const auto uniform = [&rng](double bound) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return bound * (2.0 * u - 1.0);
  };
  const auto fill = [&uniform](Mat& m, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(bound);
  };

  int prev = c_in;
  for (int i = 0; i < params.layers; ++i) {
    ConvLayer layer;
    layer.dilation = 1 << i;
    layer.in_ch = prev;
    layer.out_ch = params.channels;
    layer.kernel = params.kernel;
    layer.weight = Mat(layer.out_ch,
                       static_cast<Eigen::Index>(layer.in_ch) * layer.kernel);
    fill(layer.weight, layer.in_ch * layer.kernel, layer.out_ch * layer.kernel);
    layer.bias = Vec::Zero(layer.out_ch);
    model.layers.push_back(std::move(layer));
    prev = params.channels;
  }
  for (LinearHead* head : {&model.low, &model.high}) {
    head->weight = Mat(n_out, prev);
    fill(head->weight, prev, n_out);
    head->bias = Vec::Zero(n_out);
  }
  model.validate();
  return model;
}

TcnOutput tcn_forward(const TcnModel& model, const Mat& window) {
  ForwardCache cache;
  const Vec feat = run_forward(model, window, cache).col(model.window - 1);
  TcnOutput out;
  out.low = model.low.weight * feat + model.low.bias;
  out.high = model.high.weight * feat + model.high.bias;
  out.total = out.low + out.high;
  return out;
}

Mat tcn_features(const TcnModel& model, const Mat& window) {
  ForwardCache cache;
  return run_forward(model, window, cache);
}

double tcn_loss(const TcnModel& model, const TcnBatch& batch) {
  require(!batch.inputs.empty(), "loss over an empty batch");
  require(batch.inputs.size() == batch.label_low.size() &&
              batch.inputs.size() == batch.label_high.size(),
          "batch labels do not match inputs");
  double total = 0.0;
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    const TcnOutput out = tcn_forward(model, batch.inputs[s]);
    total += model.w_low * (out.low - batch.label_low[s]).squaredNorm() /
                 model.n_out +
             model.w_high * (out.high - batch.label_high[s]).squaredNorm() /
                 model.n_out;
  }
  return total / static_cast<double>(batch.inputs.size());
}

TcnGradients tcn_loss_gradients(const TcnModel& model, const TcnBatch& batch) {
  require(!batch.inputs.empty(), "gradients over an empty batch");
  require(batch.inputs.size() == batch.label_low.size() &&
              batch.inputs.size() == batch.label_high.size(),
          "batch labels do not match inputs");

  TcnGradients g;
  for (const ConvLayer& layer : model.layers) {
    g.layer_w.push_back(Mat::Zero(layer.weight.rows(), layer.weight.cols()));
    g.layer_b.push_back(Vec::Zero(layer.bias.size()));
  }
  g.low_w = Mat::Zero(model.low.weight.rows(), model.low.weight.cols());
  g.low_b = Vec::Zero(model.low.bias.size());
  g.high_w = Mat::Zero(model.high.weight.rows(), model.high.weight.cols());
  g.high_b = Vec::Zero(model.high.bias.size());

  const double batch_size = static_cast<double>(batch.inputs.size());
  const int last = static_cast<int>(model.layers.size()) - 1;

  ForwardCache cache;
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    const Mat& feat_map = run_forward(model, batch.inputs[s], cache);
    const Vec feat = feat_map.col(model.window - 1);
    const Vec low = model.low.weight * feat + model.low.bias;
    const Vec high = model.high.weight * feat + model.high.bias;

    const Vec err_low = low - batch.label_low[s];
    const Vec err_high = high - batch.label_high[s];
    g.loss += (model.w_low * err_low.squaredNorm() +
               model.w_high * err_high.squaredNorm()) /
              model.n_out;

    const double norm = model.n_out * batch_size;
    const Vec dlow = (2.0 * model.w_low / norm) * err_low;
    const Vec dhigh = (2.0 * model.w_high / norm) * err_high;
    g.low_w += dlow * feat.transpose();
    g.low_b += dlow;
    g.high_w += dhigh * feat.transpose();
    g.high_b += dhigh;

    Mat dh = Mat::Zero(feat_map.rows(), feat_map.cols());
    dh.col(model.window - 1) = model.low.weight.transpose() * dlow +
                               model.high.weight.transpose() * dhigh;

    for (int i = last; i >= 0; --i) {
      const ConvLayer& layer = model.layers[i];
      const Mat da =
          dh.cwiseProduct((1.0 - cache.acts[i].array().square()).matrix());
      g.layer_w[i] += da * cache.cols[i].transpose();
      g.layer_b[i] += da.rowwise().sum();
      if (i == 0) break;
      const Mat dcol = layer.weight.transpose() * da;
      dh = Mat::Zero(model.layers[i - 1].out_ch, model.window);
      fold_back(dcol, layer.kernel, layer.dilation, dh);
    }
  }
  g.loss /= batch_size;
  return g;
}

TcnVelocity zero_velocity(const TcnModel& model) {
  TcnVelocity v;
  for (const ConvLayer& layer : model.layers) {
    v.layer_w.push_back(Mat::Zero(layer.weight.rows(), layer.weight.cols()));
    v.layer_b.push_back(Vec::Zero(layer.bias.size()));
  }
  v.low_w = Mat::Zero(model.low.weight.rows(), model.low.weight.cols());
  v.low_b = Vec::Zero(model.low.bias.size());
  v.high_w = Mat::Zero(model.high.weight.rows(), model.high.weight.cols());
  v.high_b = Vec::Zero(model.high.bias.size());
  return v;
}

void sgd_step(TcnModel& model, TcnVelocity& velocity, const TcnGradients& grads,
              double lr, double momentum) {
  const auto apply = [lr, momentum](auto& theta, auto& v, const auto& g) {
    v = momentum * v - lr * g;
    theta += v;
  };
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    apply(model.layers[i].weight, velocity.layer_w[i], grads.layer_w[i]);
    apply(model.layers[i].bias, velocity.layer_b[i], grads.layer_b[i]);
  }
  apply(model.low.weight, velocity.low_w, grads.low_w);
  apply(model.low.bias, velocity.low_b, grads.low_b);
  apply(model.high.weight, velocity.high_w, grads.high_w);
  apply(model.high.bias, velocity.high_b, grads.high_b);
}

void save_tcn(const TcnModel& model, const std::string& path) {
  model.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");

  write_bytes(out, kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(model.c_in));
  write_u32(out, static_cast<std::uint32_t>(model.window));
  write_u32(out, static_cast<std::uint32_t>(model.n_out));
  write_u32(out, static_cast<std::uint32_t>(model.layers.size()));
  for (const ConvLayer& layer : model.layers) {
    write_u32(out, static_cast<std::uint32_t>(layer.dilation));
    write_u32(out, static_cast<std::uint32_t>(layer.in_ch));
    write_u32(out, static_cast<std::uint32_t>(layer.out_ch));
    write_u32(out, static_cast<std::uint32_t>(layer.kernel));
  }
  write_f32_block(out, model.input_mean.data(), model.input_mean.size());
  write_f32_block(out, model.input_scale.data(), model.input_scale.size());
  for (const ConvLayer& layer : model.layers) {
    write_mat(out, layer.weight);
    write_f32_block(out, layer.bias.data(), layer.bias.size());
  }
  for (const LinearHead* head : {&model.low, &model.high}) {
    write_mat(out, head->weight);
    write_f32_block(out, head->bias.data(), head->bias.size());
  }
  const float wl = static_cast<float>(model.w_low);
  const float wh = static_cast<float>(model.w_high);
  write_bytes(out, &wl, 4);
  write_bytes(out, &wh, 4);
  write_bytes(out, &model.seed, 8);
  if (!out) throw IoError("short write to " + path);
}

TcnModel load_tcn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char magic[4] = {};
  read_bytes(in, magic, 4, path);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw IoError(path + ": not a tactorque weights file");
  if (read_u32(in, path) != kVersion)
    throw IoError(path + ": unsupported weights version");

  TcnModel model;
  model.c_in = static_cast<int>(read_u32(in, path));
  model.window = static_cast<int>(read_u32(in, path));
  model.n_out = static_cast<int>(read_u32(in, path));
  const std::uint32_t n_layers = read_u32(in, path);
  require(n_layers >= 1 && n_layers <= 64, "implausible layer count");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    ConvLayer layer;
    layer.dilation = static_cast<int>(read_u32(in, path));
    layer.in_ch = static_cast<int>(read_u32(in, path));
    layer.out_ch = static_cast<int>(read_u32(in, path));
    layer.kernel = static_cast<int>(read_u32(in, path));
    layer.weight = Mat(layer.out_ch,
                       static_cast<Eigen::Index>(layer.in_ch) * layer.kernel);
    layer.bias = Vec(layer.out_ch);
    model.layers.push_back(std::move(layer));
  }
  model.input_mean = Vec(model.c_in);
  model.input_scale = Vec(model.c_in);
  read_vec(in, model.input_mean, path);
  read_vec(in, model.input_scale, path);
  for (ConvLayer& layer : model.layers) {
    read_mat(in, layer.weight, path);
    read_vec(in, layer.bias, path);
  }
  const int feat = model.layers.back().out_ch;
  for (LinearHead* head : {&model.low, &model.high}) {
    head->weight = Mat(model.n_out, feat);
    head->bias = Vec(model.n_out);
    read_mat(in, head->weight, path);
    read_vec(in, head->bias, path);
  }
  float wl = 0.0f, wh = 0.0f;
  read_bytes(in, &wl, 4, path);
  read_bytes(in, &wh, 4, path);
  model.w_low = static_cast<double>(wl);
  model.w_high = static_cast<double>(wh);
  read_bytes(in, &model.seed, 8, path);
  model.validate();
  return model;
}

}  // namespace tactorque
