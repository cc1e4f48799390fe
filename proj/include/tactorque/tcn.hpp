#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tactorque/config.hpp"
#include "tactorque/dynamics.hpp"

namespace tactorque {

// Causal dilated conv layer. Tap k of the kernel reads the input
// (kernel-1-k)*dilation samples in the past; samples before the window are
// zero. weight is out_ch x (in_ch * kernel) with the taps of one input
// channel contiguous, oldest tap first.
struct ConvLayer {
  int dilation = 1;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 0;
  Mat weight;
  Vec bias;
};

struct LinearHead {
  Mat weight;  // n_out x channels
  Vec bias;    // n_out
};

// Dilated TCN over a fixed-length window of input channels, tanh after every
// conv layer, two linear heads (slow and fast target bands) reading the last
// time step. Weights live in doubles; files store them as f32.
struct TcnModel {
  int c_in = 0;
  int window = 0;
  int n_out = 0;
  std::vector<ConvLayer> layers;
  LinearHead low;
  LinearHead high;
  Vec input_mean;   // per input channel, applied before the first layer
  Vec input_scale;  // strictly positive
  double w_low = 1.0;
  double w_high = 2.0;
  std::uint64_t seed = 0;

  int receptive_field() const;
  void validate() const;  // shape consistency, receptive_field() >= window
};

// Fresh model with uniform(-s, s) weights, s = sqrt(6 / (fan_in + fan_out)),
// zero biases, unit normalization. Draw order is fixed (layers front to back,
// weight then bias, then low head, then high head) so a seed pins every value.
TcnModel init_tcn(const CompensatorParams& params, int c_in, int n_out,
                  std::uint64_t seed);

struct TcnOutput {
  Vec low;    // slow-band head
  Vec high;   // fast-band head
  Vec total;  // low + high, the torque the compensator subtracts
};

// window is raw channels, c_in x model.window, newest sample in the last column.
TcnOutput tcn_forward(const TcnModel& model, const Mat& window);

// Post-activation feature map of the last conv layer, channels x window.
// Column t of the map may depend only on input columns 0..t; exposed so that
// property is checkable from outside.
Mat tcn_features(const TcnModel& model, const Mat& window);

struct TcnBatch {
  std::vector<Mat> inputs;        // raw windows, c_in x window each
  std::vector<Vec> label_low;     // n_out each
  std::vector<Vec> label_high;
};

// w_low * MSE(low) + w_high * MSE(high); MSE averages over joints, the batch
// loss averages over samples.
double tcn_loss(const TcnModel& model, const TcnBatch& batch);

struct TcnGradients {
  std::vector<Mat> layer_w;
  std::vector<Vec> layer_b;
  Mat low_w;
  Vec low_b;
  Mat high_w;
  Vec high_b;
  double loss = 0.0;
};

TcnGradients tcn_loss_gradients(const TcnModel& model, const TcnBatch& batch);

// One SGD-with-momentum step in place: v = mu * v - lr * g; theta += v.
// Velocity buffers are owned by the caller so a training loop carries them.
struct TcnVelocity {
  std::vector<Mat> layer_w;
  std::vector<Vec> layer_b;
  Mat low_w;
  Vec low_b;
  Mat high_w;
  Vec high_b;
};
TcnVelocity zero_velocity(const TcnModel& model);
void sgd_step(TcnModel& model, TcnVelocity& velocity, const TcnGradients& grads,
              double lr, double momentum);

void save_tcn(const TcnModel& model, const std::string& path);
TcnModel load_tcn(const std::string& path);

}  // namespace tactorque
