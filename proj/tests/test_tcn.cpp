#include "tactorque/tcn.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles/fd_gradient.hpp"
#include "tactorque/errors.hpp"

using namespace tactorque;

namespace {

CompensatorParams tiny_params() {
  CompensatorParams p;
  p.window = 8;
  p.channels = 6;
  p.layers = 2;  // dilations 1, 2: receptive field 10 covers the window
  p.kernel = 4;
  return p;
}

double draw_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Mat random_mat(std::mt19937_64& rng, int rows, int cols, double amp) {
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = amp * (2.0 * draw_unit(rng) - 1.0);
  return m;
}

Vec random_vec(std::mt19937_64& rng, int size, double amp) {
  Vec v(size);
  for (int i = 0; i < size; ++i) v(i) = amp * (2.0 * draw_unit(rng) - 1.0);
  return v;
}

TcnBatch random_batch(std::mt19937_64& rng, const TcnModel& model, int count) {
  TcnBatch batch;
  for (int s = 0; s < count; ++s) {
    batch.inputs.push_back(random_mat(rng, model.c_in, model.window, 1.0));
    batch.label_low.push_back(random_vec(rng, model.n_out, 1.0));
    batch.label_high.push_back(random_vec(rng, model.n_out, 1.0));
  }
  return batch;
}

void check_close(const Mat& analytic, const Mat& fd) {
  for (Eigen::Index r = 0; r < analytic.rows(); ++r)
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double a = analytic(r, c);
      const double f = fd(r, c);
      const double scale = std::max({std::abs(a), std::abs(f), 1e-3});
      REQUIRE(std::abs(a - f) <= 1e-4 * scale);
    }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  TcnModel model = init_tcn(tiny_params(), 5, 3, 11);
  // Non-trivial normalization so both passes run through it.
  for (int i = 0; i < 5; ++i) {
    model.input_mean(i) = 0.05 * i - 0.1;
    model.input_scale(i) = 0.5 + 0.2 * i;
  }
  // Perturb biases off zero so their gradients are exercised from a generic
  // point.
  std::mt19937_64 rng(17);
  for (ConvLayer& layer : model.layers)
    layer.bias = random_vec(rng, static_cast<int>(layer.bias.size()), 0.1);
  model.low.bias = random_vec(rng, 3, 0.1);
  model.high.bias = random_vec(rng, 3, 0.1);

  const TcnBatch batch = random_batch(rng, model, 3);
  const TcnGradients analytic = tcn_loss_gradients(model, batch);
  CHECK(std::abs(analytic.loss - tcn_loss(model, batch)) < 1e-12);

  const testing::FdGradients fd = testing::fd_gradients(model, batch);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    check_close(analytic.layer_w[i], fd.layer_w[i]);
    check_close(analytic.layer_b[i], fd.layer_b[i]);
  }
  check_close(analytic.low_w, fd.low_w);
  check_close(analytic.low_b, fd.low_b);
  check_close(analytic.high_w, fd.high_w);
  check_close(analytic.high_b, fd.high_b);
}

TEST_CASE("features are causal") {
  CompensatorParams p = tiny_params();
  p.window = 12;
  p.layers = 3;  // receptive field 22
  const TcnModel model = init_tcn(p, 4, 2, 23);

  std::mt19937_64 rng(29);
  const Mat base = random_mat(rng, 4, 12, 1.0);
  const Mat ref = tcn_features(model, base);
  for (int j : {3, 7, 11}) {
    Mat poked = base;
    poked.col(j).array() += 0.5;
    const Mat out = tcn_features(model, poked);
    CHECK((out.leftCols(j) - ref.leftCols(j)).norm() == 0.0);
    CHECK((out.col(j) - ref.col(j)).norm() > 0.0);
  }
}

TEST_CASE("zero history columns act like the padding beyond the window") {
  // Freshly initialized biases are zero, so a zero input column stays zero
  // through tanh and the conv stack is shift-invariant against the implicit
  // left padding.
  const CompensatorParams p = tiny_params();
  TcnModel wide = init_tcn(p, 5, 2, 31);
  TcnModel narrow = wide;
  narrow.window = 4;
  narrow.validate();

  std::mt19937_64 rng(37);
  const Mat x = random_mat(rng, 5, 4, 1.0);
  Mat padded = Mat::Zero(5, 8);
  padded.rightCols(4) = x;

  const Mat f_wide = tcn_features(wide, padded);
  const Mat f_narrow = tcn_features(narrow, x);
  CHECK((f_wide.rightCols(4) - f_narrow).cwiseAbs().maxCoeff() < 1e-13);

  const TcnOutput o_wide = tcn_forward(wide, padded);
  const TcnOutput o_narrow = tcn_forward(narrow, x);
  CHECK((o_wide.total - o_narrow.total).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("seeding pins every weight") {
  const TcnModel a = init_tcn(tiny_params(), 5, 2, 101);
  const TcnModel b = init_tcn(tiny_params(), 5, 2, 101);
  const TcnModel c = init_tcn(tiny_params(), 5, 2, 102);
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    CHECK((a.layers[i].weight - b.layers[i].weight).norm() == 0.0);
  CHECK((a.low.weight - b.low.weight).norm() == 0.0);
  CHECK((a.high.weight - b.high.weight).norm() == 0.0);
  CHECK((a.layers[0].weight - c.layers[0].weight).norm() > 0.0);
}

TEST_CASE("zero weights give zero output") {
  TcnModel model = init_tcn(tiny_params(), 5, 2, 7);
  for (ConvLayer& layer : model.layers) layer.weight.setZero();
  model.low.weight.setZero();
  model.high.weight.setZero();
  std::mt19937_64 rng(41);
  const TcnOutput out = tcn_forward(model, random_mat(rng, 5, 8, 2.0));
  CHECK(out.total.norm() == 0.0);
}

TEST_CASE("weights file round-trips") {
  TcnModel model = init_tcn(tiny_params(), 5, 2, 55);
  std::mt19937_64 rng(43);
  for (int i = 0; i < 5; ++i) {
    model.input_mean(i) = 0.1 * i;
    model.input_scale(i) = 1.0 + 0.3 * i;
  }
  model.low.bias = random_vec(rng, 2, 0.2);
  model.seed = 55;

  const std::string path_a = "tcn_roundtrip_a.bin";
  const std::string path_b = "tcn_roundtrip_b.bin";
  save_tcn(model, path_a);
  const TcnModel loaded = load_tcn(path_a);
  CHECK(loaded.c_in == model.c_in);
  CHECK(loaded.window == model.window);
  CHECK(loaded.n_out == model.n_out);
  CHECK(loaded.layers.size() == model.layers.size());
  CHECK(loaded.seed == model.seed);

  // Storage is f32, so the reload sits within single precision of the
  // original; a second save must then be byte-identical.
  const Mat x = random_mat(rng, 5, 8, 1.0);
  const TcnOutput before = tcn_forward(model, x);
  const TcnOutput after = tcn_forward(loaded, x);
  CHECK((before.total - after.total).cwiseAbs().maxCoeff() < 1e-4);
  save_tcn(loaded, path_b);
  CHECK(slurp(path_a) == slurp(path_b));

  std::ofstream(path_a, std::ios::binary) << "nope";
  CHECK_THROWS_AS(load_tcn(path_a), IoError);
  const std::string full = slurp(path_b);
  std::ofstream(path_a, std::ios::binary)
      << full.substr(0, full.size() / 2);
  CHECK_THROWS_AS(load_tcn(path_a), IoError);
  std::remove(path_a.c_str());
  std::remove(path_b.c_str());
}

TEST_CASE("a single sample can be memorized") {
  CompensatorParams p = tiny_params();
  p.channels = 8;
  TcnModel model = init_tcn(p, 5, 2, 77);

  std::mt19937_64 rng(47);
  TcnBatch one;
  one.inputs.push_back(random_mat(rng, 5, 8, 1.0));
  one.label_low.push_back((Vec(2) << 0.4, -0.3).finished());
  one.label_high.push_back((Vec(2) << 0.6, 0.2).finished());

  const double initial = tcn_loss(model, one);
  TcnVelocity vel = zero_velocity(model);
  double best = initial;
  int used = 0;
  for (int step = 0; step < 2000; ++step) {
    const TcnGradients g = tcn_loss_gradients(model, one);
    sgd_step(model, vel, g, 0.02, 0.9);
    best = std::min(best, g.loss);
    used = step + 1;
    if (g.loss <= 1e-6 * initial) break;
  }
  CHECK(best <= 1e-6 * initial);
  CHECK(used <= 2000);
}

TEST_CASE("model geometry is validated") {
  CompensatorParams p = tiny_params();
  p.window = 50;  // receptive field 10 cannot cover it
  CHECK_THROWS_AS(init_tcn(p, 5, 2, 1), ContractError);

  TcnModel model = init_tcn(tiny_params(), 5, 2, 1);
  model.layers[1].in_ch = 7;
  CHECK_THROWS_AS(model.validate(), ContractError);

  TcnModel scale = init_tcn(tiny_params(), 5, 2, 1);
  scale.input_scale(2) = 0.0;
  CHECK_THROWS_AS(scale.validate(), ContractError);
}

TEST_CASE("batch loss is the mean over samples") {
  const TcnModel model = init_tcn(tiny_params(), 5, 2, 91);
  std::mt19937_64 rng(53);
  TcnBatch one = random_batch(rng, model, 1);
  TcnBatch twice = one;
  twice.inputs.push_back(one.inputs[0]);
  twice.label_low.push_back(one.label_low[0]);
  twice.label_high.push_back(one.label_high[0]);

  CHECK(std::abs(tcn_loss(model, one) - tcn_loss(model, twice)) < 1e-15);
  const TcnGradients ga = tcn_loss_gradients(model, one);
  const TcnGradients gb = tcn_loss_gradients(model, twice);
  CHECK((ga.layer_w[0] - gb.layer_w[0]).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ga.low_w - gb.low_w).cwiseAbs().maxCoeff() < 1e-15);
}
