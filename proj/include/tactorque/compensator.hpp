#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tactorque/config.hpp"
#include "tactorque/dynamics.hpp"
#include "tactorque/estimator.hpp"
#include "tactorque/log.hpp"
#include "tactorque/plant.hpp"
#include "tactorque/tcn.hpp"

namespace tactorque {

// Residual where a joint is slow enough for stiction to hide an external
// torque; zero elsewhere. This is the only place the residual enters the
// network input.
Vec gate_hidden_torque(const Vec& tau_res, const Vec& qd, double gate_threshold);

// Holds the hidden-torque channel at its last pre-onset value for as long as
// a contact episode lasts, so the network never sees residual that contains
// the external torque it is supposed to leave alone. The first sample of a
// run that already starts in contact latches zeros.
class LatchedChannel {
 public:
  explicit LatchedChannel(int n);
  Vec step(const Vec& tau_hidden, bool episode_active);
  bool latched() const { return held_.has_value(); }
  void reset();

 private:
  Vec prev_;  // value emitted one step ago
  std::optional<Vec> held_;
};

struct BandSplit {
  Mat low;
  Mat high;  // series - low, exact complement
};

// Zero-phase split at fc: forward-backward second-order Butterworth low-pass
// per row, high band as the remainder. Rows shorter than ceil(fs / fc)
// samples carry less than one cutoff period and are rejected.
BandSplit frequency_split(const Mat& series, double fs, double fc);

struct WindowRef {
  int log = 0;
  int end = 0;  // window covers columns [end - window + 1, end]
};

// Training windows stay views into per-log channel matrices; only the
// reference list is shuffled and split.
struct Dataset {
  int n = 0;      // joints
  int c_in = 0;   // 5 * n
  int window = 0;
  std::vector<Mat> channels;    // per log: [q; qd; qdd; tau_dyn; hidden], c_in x T
  std::vector<Mat> label_low;   // per log: slow band of tau_res, n x T
  std::vector<Mat> label_high;
  std::vector<WindowRef> train;
  std::vector<WindowRef> val;
  Vec input_mean;   // over columns covered by training windows
  Vec input_scale;
  std::uint64_t split_seed = 0;
  int total_windows() const;
};

// Builds the supervised set from force-free runs: anything with scripted
// contact is refused, because the residual would teach the network to cancel
// external torque. Windows whose hidden channel is identically zero (arm
// moving throughout) are downsampled dynamic_downsample:1, deterministically.
Dataset build_dataset(const std::vector<RunLog>& logs, const SystemConfig& cfg,
                      std::uint64_t split_seed);

// Copies refs [begin, begin + count) into a batch; labels are the band-split
// residual at the window's last column.
TcnBatch gather_batch(const Dataset& data, const std::vector<WindowRef>& refs,
                      std::size_t begin, std::size_t count);

struct TrainReport {
  std::vector<double> train_loss;  // mean batch loss per epoch
  std::vector<double> val_loss;
  int steps = 0;
};

// Fresh model, SGD with momentum over shuffled minibatches. Fully determined
// by (data, params, seed); a non-finite loss aborts instead of continuing
// from garbage.
TcnModel train_compensator(const Dataset& data, const CompensatorParams& params,
                           std::uint64_t seed, TrainReport* report = nullptr);

// Streaming wrapper: keeps the input window ring, the latch, and the loaded
// model together. Until the ring has filled once, missing history is raw
// zeros and the output is flagged not warm; the caller decides what to fall
// back on.
class OnlineCompensator {
 public:
  OnlineCompensator(TcnModel model, const CompensatorParams& params);

  struct Result {
    Vec low, high, total;
    bool warm = false;
  };
  Result step(const MotorSample& motor, const TorqueDecomposition& decomp,
              bool episode_active);
  void reset();

  bool warm() const { return filled_ == model_.window; }
  bool latched() const { return latch_.latched(); }
  const TcnModel& model() const { return model_; }
  // Newest input column, exposed so replay comparisons can check the latch
  // byte for byte.
  Vec last_column() const { return ring_.col(model_.window - 1); }

 private:
  TcnModel model_;
  double gate_threshold_;
  bool zeroed_;
  LatchedChannel latch_;
  Mat ring_;  // raw channels, c_in x window, newest last
  int filled_ = 0;
};

}  // namespace tactorque
