#include "tactorque/compensator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tactorque/errors.hpp"

namespace tactorque {
namespace {

// Direct-form-II-transposed biquad pass with steady-state initial conditions,
// so a constant row passes through unchanged at any admissible length.
void biquad_pass(const double* x, double* y, int len, double b0, double b1,
                 double b2, double a1, double a2) {
  const double x0 = x[0];
  double z1 = x0 * (1.0 - b0);
  double z2 = x0 * (b2 - a2);
  for (int i = 0; i < len; ++i) {
    const double out = b0 * x[i] + z1;
    z1 = b1 * x[i] - a1 * out + z2;
    z2 = b2 * x[i] - a2 * out;
    y[i] = out;
  }
}

// Deterministic Fisher-Yates; avoids std::shuffle's unspecified draw pattern.
void shuffle_refs(std::vector<WindowRef>& refs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = refs.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(refs[i - 1], refs[j]);
  }
}

double loss_over(const TcnModel& model, const Dataset& data,
                 const std::vector<WindowRef>& refs, int chunk) {
  double total = 0.0;
  for (std::size_t begin = 0; begin < refs.size();
       begin += static_cast<std::size_t>(chunk)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(chunk), refs.size() - begin);
    total += tcn_loss(model, gather_batch(data, refs, begin, count)) *
             static_cast<double>(count);
  }
  return total / static_cast<double>(refs.size());
}

}  // namespace

Vec gate_hidden_torque(const Vec& tau_res, const Vec& qd,
                       double gate_threshold) {
  require(tau_res.size() == qd.size(), "gate input sizes differ");
  require(gate_threshold > 0.0, "gate threshold must be positive");
  Vec out = Vec::Zero(tau_res.size());
  for (Eigen::Index j = 0; j < tau_res.size(); ++j)
    if (std::abs(qd(j)) <= gate_threshold) out(j) = tau_res(j);
  return out;
}

LatchedChannel::LatchedChannel(int n) : prev_(Vec::Zero(n)) {
  require(n > 0, "latch needs at least one joint");
}

Vec LatchedChannel::step(const Vec& tau_hidden, bool episode_active) {
  require(tau_hidden.size() == prev_.size(), "latch input size changed");
  Vec out;
  if (episode_active) {
    if (!held_) held_ = prev_;
    out = *held_;
  } else {
    held_.reset();
    out = tau_hidden;
  }
  prev_ = out;
  return out;
}

void LatchedChannel::reset() {
  prev_.setZero();
  held_.reset();
}

BandSplit frequency_split(const Mat& series, double fs, double fc) {
  require(fs > 0.0 && fc > 0.0 && fc < fs / 2.0,
          "split cutoff must sit below the Nyquist rate");
  const int len = static_cast<int>(series.cols());
  const int min_len = static_cast<int>(std::ceil(fs / fc));
  require(len >= min_len,
          "series too short for the split: " + std::to_string(len) +
              " samples, need at least " + std::to_string(min_len));

  // Second-order Butterworth low-pass via the bilinear transform.
  const double k = std::tan(M_PI * fc / fs);
  const double q = 1.0 / std::sqrt(2.0);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  const double b0 = k * k * norm;
  const double b1 = 2.0 * b0;
  const double b2 = b0;
  const double a1 = 2.0 * (k * k - 1.0) * norm;
  const double a2 = (1.0 - k / q + k * k) * norm;

  BandSplit out;
  out.low = Mat(series.rows(), len);
  std::vector<double> fwd(static_cast<std::size_t>(len));
  std::vector<double> rev(static_cast<std::size_t>(len));
  for (Eigen::Index r = 0; r < series.rows(); ++r) {
    const Vec row = series.row(r).transpose();
    biquad_pass(row.data(), fwd.data(), len, b0, b1, b2, a1, a2);
    std::reverse(fwd.begin(), fwd.end());
    biquad_pass(fwd.data(), rev.data(), len, b0, b1, b2, a1, a2);
    std::reverse(rev.begin(), rev.end());
    for (int i = 0; i < len; ++i) out.low(r, i) = rev[static_cast<std::size_t>(i)];
  }
  out.high = series - out.low;
  return out;
}

int Dataset::total_windows() const {
  return static_cast<int>(train.size() + val.size());
}

Dataset build_dataset(const std::vector<RunLog>& logs, const SystemConfig& cfg,
                      std::uint64_t split_seed) {
  require(!logs.empty(), "dataset builder needs at least one log");
  const CompensatorParams& params = cfg.compensator;
  params.validate();
  const int n = logs.front().n;
  const int window = params.window;
  const double fs = 1.0 / cfg.plant.dt;

  Dataset data;
  data.n = n;
  data.c_in = 5 * n;
  data.window = window;
  data.split_seed = split_seed;

  std::vector<WindowRef> refs;
  for (std::size_t li = 0; li < logs.size(); ++li) {
    const RunLog& log = logs[li];
    log.validate();
    require(log.force_free,
            "dataset builder refuses runs with scripted contact: the residual "
            "there contains the torque the network must not learn to cancel");
    require(log.n == n, "logs mix joint counts");
    require(log.length() >= window, "log shorter than one input window");

    const int len = log.length();
    Mat ch(data.c_in, len);
    ch.middleRows(0, n) = log.q;
    ch.middleRows(n, n) = log.qd;
    ch.middleRows(2 * n, n) = log.qdd;
    ch.middleRows(3 * n, n) = log.tau_dyn;
    // Force-free data never opens a contact episode, so the latched and the
    // zeroed variants of the hidden channel coincide with the plain gate.
    Mat hidden = Mat::Zero(n, len);
    for (int t = 0; t < len; ++t)
      hidden.col(t) = gate_hidden_torque(log.tau_res.col(t), log.qd.col(t),
                                         params.gate_threshold);
    ch.middleRows(4 * n, n) = hidden;
    data.channels.push_back(std::move(ch));

    const BandSplit bands = frequency_split(log.tau_res, fs, params.split_hz);
    data.label_low.push_back(bands.low);
    data.label_high.push_back(bands.high);

    int moving_seen = 0;
    for (int end = window - 1; end < len; ++end) {
      const bool all_moving =
          hidden.middleCols(end - window + 1, window).isZero(0.0);
      if (all_moving) {
        if (moving_seen++ % params.dynamic_downsample != 0) continue;
      }
      refs.push_back({static_cast<int>(li), end});
    }
  }
  require(!refs.empty(), "no usable windows in the logs");

  shuffle_refs(refs, split_seed);
  const std::size_t val_count = std::max<std::size_t>(1, refs.size() / 10);
  require(refs.size() > val_count, "too few windows to hold out a validation split");
  data.val.assign(refs.begin(), refs.begin() + static_cast<long>(val_count));
  data.train.assign(refs.begin() + static_cast<long>(val_count), refs.end());

  // Normalization sees each training-covered column once, however many
  // windows overlap it.
  std::vector<std::vector<char>> covered;
  for (const Mat& ch : data.channels)
    covered.emplace_back(static_cast<std::size_t>(ch.cols()), 0);
  for (const WindowRef& ref : data.train)
    for (int t = ref.end - window + 1; t <= ref.end; ++t)
      covered[static_cast<std::size_t>(ref.log)][static_cast<std::size_t>(t)] = 1;

  Vec sum = Vec::Zero(data.c_in);
  Vec sumsq = Vec::Zero(data.c_in);
  long count = 0;
  for (std::size_t li = 0; li < data.channels.size(); ++li) {
    const Mat& ch = data.channels[li];
    for (int t = 0; t < ch.cols(); ++t) {
      if (!covered[li][static_cast<std::size_t>(t)]) continue;
      sum += ch.col(t);
      sumsq += ch.col(t).cwiseAbs2();
      ++count;
    }
  }
  require(count > 0, "training split covers no samples");
  data.input_mean = sum / static_cast<double>(count);
  const Vec var =
      (sumsq / static_cast<double>(count) - data.input_mean.cwiseAbs2())
          .cwiseMax(0.0);
  data.input_scale = var.cwiseSqrt().cwiseMax(1e-8);
  return data;
}

TcnBatch gather_batch(const Dataset& data, const std::vector<WindowRef>& refs,
                      std::size_t begin, std::size_t count) {
  require(begin + count <= refs.size(), "batch range out of bounds");
  TcnBatch batch;
  batch.inputs.reserve(count);
  batch.label_low.reserve(count);
  batch.label_high.reserve(count);
  for (std::size_t i = begin; i < begin + count; ++i) {
    const WindowRef& ref = refs[i];
    batch.inputs.push_back(data.channels[static_cast<std::size_t>(ref.log)]
                               .middleCols(ref.end - data.window + 1,
                                           data.window));
    batch.label_low.push_back(
        data.label_low[static_cast<std::size_t>(ref.log)].col(ref.end));
    batch.label_high.push_back(
        data.label_high[static_cast<std::size_t>(ref.log)].col(ref.end));
  }
  return batch;
}

TcnModel train_compensator(const Dataset& data, const CompensatorParams& params,
                           std::uint64_t seed, TrainReport* report) {
  params.validate();
  require(!data.train.empty() && !data.val.empty(),
          "dataset has no usable split");

  TcnModel model = init_tcn(params, data.c_in, data.n, seed);
  model.input_mean = data.input_mean;
  model.input_scale = data.input_scale;
  TcnVelocity velocity = zero_velocity(model);

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};

  std::vector<WindowRef> order;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    order = data.train;
    shuffle_refs(order, seed ^ (0x9e3779b97f4a7c15ull * (epoch + 1ull)));

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(params.batch)) {
      const std::size_t count = std::min(
          static_cast<std::size_t>(params.batch), order.size() - begin);
      const TcnGradients grads =
          tcn_loss_gradients(model, gather_batch(data, order, begin, count));
      require(std::isfinite(grads.loss), "training diverged: non-finite loss");
      sgd_step(model, velocity, grads, params.lr, params.momentum);
      epoch_loss += grads.loss;
      ++batches;
      ++rep.steps;
    }
    rep.train_loss.push_back(epoch_loss / batches);
    const double val = loss_over(model, data, data.val, params.batch);
    require(std::isfinite(val), "training diverged: non-finite validation loss");
    rep.val_loss.push_back(val);
  }
  return model;
}

OnlineCompensator::OnlineCompensator(TcnModel model,
                                     const CompensatorParams& params)
    : model_(std::move(model)),
      gate_threshold_(params.gate_threshold),
      zeroed_(params.zeroed_channel),
      latch_(model_.n_out),
      ring_(Mat::Zero(model_.c_in, model_.window)) {
  model_.validate();
  require(model_.c_in == 5 * model_.n_out,
          "model input width is not five channel blocks per joint");
}

OnlineCompensator::Result OnlineCompensator::step(
    const MotorSample& motor, const TorqueDecomposition& decomp,
    bool episode_active) {
  const int n = model_.n_out;
  require(motor.q.size() == n && motor.qd.size() == n && motor.qdd.size() == n,
          "motor sample size does not match the model");
  require(decomp.tau_dyn.size() == n && decomp.tau_res.size() == n,
          "decomposition size does not match the model");

  Vec channel = latch_.step(
      gate_hidden_torque(decomp.tau_res, motor.qd, gate_threshold_),
      episode_active);
  if (zeroed_)
    for (int j = 0; j < n; ++j)
      if (std::abs(motor.qd(j)) > gate_threshold_) channel(j) = 0.0;

  const int window = model_.window;
  for (int c = 0; c + 1 < window; ++c) ring_.col(c) = ring_.col(c + 1);
  ring_.col(window - 1).segment(0, n) = motor.q;
  ring_.col(window - 1).segment(n, n) = motor.qd;
  ring_.col(window - 1).segment(2 * n, n) = motor.qdd;
  ring_.col(window - 1).segment(3 * n, n) = decomp.tau_dyn;
  ring_.col(window - 1).segment(4 * n, n) = channel;
  if (filled_ < window) ++filled_;

  const TcnOutput out = tcn_forward(model_, ring_);
  return {out.low, out.high, out.total, filled_ == window};
}

void OnlineCompensator::reset() {
  latch_.reset();
  ring_.setZero();
  filled_ = 0;
}

}  // namespace tactorque
