#pragma once

// Policy and value networks for the lidar collision-avoidance policy.
//
// Both networks share one trunk topology:
//   conv1d(3->32, k5, s2, valid) -> ReLU -> conv1d(32->32, k3, s2, valid) ->
//   ReLU -> flatten(126 x 32) -> fc(4032->256) -> ReLU ->
//   concat(goal 2, velocity 2) -> fc(260->128) -> ReLU -> fc(128->out)
// The policy squashes channel 0 with a sigmoid and channel 1 with tanh and
// carries a free 2-vector log standard deviation. The value head is linear.
//
// Everything is batched: observations are columns of a kObsDim x B matrix.
// Parameters live in one flat vector so optimizers, checkpoints and finite
// difference checks can treat a network as a single point in R^n.

#include "mrca/sensing.hpp"
#include "mrca/world.hpp"

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <random>
#include <string_view>
#include <vector>

namespace mrca {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;

constexpr int conv_output_length(int length, int kernel, int stride) {
  return (length - kernel) / stride + 1;
}

namespace shape {
inline constexpr int kInChannels = kFrames;
inline constexpr int kInLength = kBeams;
inline constexpr int kConv1Filters = 32;
inline constexpr int kConv1Kernel = 5;
inline constexpr int kConv1Stride = 2;
inline constexpr int kConv1Length =
    conv_output_length(kInLength, kConv1Kernel, kConv1Stride);
inline constexpr int kConv2Filters = 32;
inline constexpr int kConv2Kernel = 3;
inline constexpr int kConv2Stride = 2;
inline constexpr int kConv2Length =
    conv_output_length(kConv1Length, kConv2Kernel, kConv2Stride);
inline constexpr int kFlat = kConv2Filters * kConv2Length;
inline constexpr int kFc1 = 256;
inline constexpr int kSideInputs = 4;  // goal polar + velocity
inline constexpr int kFc2In = kFc1 + kSideInputs;
inline constexpr int kFc2 = 128;
inline constexpr int kActionDim = 2;

static_assert(kConv1Length == 254);
static_assert(kConv2Length == 126);
static_assert(kFlat == 4032);
}  // namespace shape

enum class Head { kPolicy, kValue };

enum class Block : int {
  kConv1W = 0,
  kConv1B,
  kConv2W,
  kConv2B,
  kFc1W,
  kFc1B,
  kFc2W,
  kFc2B,
  kHeadW,
  kHeadB,
  kLogStd,
};

struct BlockInfo {
  Block id;
  std::string_view name;
  Eigen::Index rows;
  Eigen::Index cols;
  Eigen::Index offset;
  Eigen::Index size() const { return rows * cols; }
};

/// Offsets of each parameter block inside the flat vector.
class ParamLayout {
 public:
  explicit ParamLayout(Head head);

  Head head() const { return head_; }
  int out_dim() const { return head_ == Head::kPolicy ? shape::kActionDim : 1; }
  Eigen::Index size() const { return size_; }
  const std::vector<BlockInfo>& blocks() const { return blocks_; }
  const BlockInfo& block(Block b) const;

 private:
  Head head_;
  std::vector<BlockInfo> blocks_;
  Eigen::Index size_ = 0;
};

const ParamLayout& layout_for(Head head);

std::uint64_t next_network_id();

template <typename Scalar>
struct ForwardTape;

/// Trainable weights of one network. Any mutable access bumps the revision,
/// which invalidates tapes recorded before the change.
template <typename Scalar, Head H>
class Network {
 public:
  using Map = Eigen::Map<MatrixX<Scalar>>;
  using ConstMap = Eigen::Map<const MatrixX<Scalar>>;

  Network() : id_(next_network_id()), values_(VectorX<Scalar>::Zero(layout().size())) {}
  Network(const Network& o) : id_(next_network_id()), values_(o.values_) {}
  Network& operator=(const Network& o) {
    values_ = o.values_;
    ++revision_;
    return *this;
  }

  static const ParamLayout& layout() { return layout_for(H); }
  static constexpr Head head() { return H; }
  static constexpr int out_dim() { return H == Head::kPolicy ? 2 : 1; }

  const VectorX<Scalar>& values() const { return values_; }
  VectorX<Scalar>& mutable_values() {
    ++revision_;
    return values_;
  }
  ConstMap block(Block b) const {
    const auto& info = layout().block(b);
    return ConstMap(values_.data() + info.offset, info.rows, info.cols);
  }
  Map mutable_block(Block b) {
    ++revision_;
    const auto& info = layout().block(b);
    return Map(values_.data() + info.offset, info.rows, info.cols);
  }

  Vector2<Scalar> logstd() const
    requires(H == Head::kPolicy)
  {
    return block(Block::kLogStd);
  }

  std::uint64_t id() const { return id_; }
  std::uint64_t revision() const { return revision_; }

  template <typename Other>
  Network<Other, H> cast() const {
    Network<Other, H> out;
    out.mutable_values() = values_.template cast<Other>();
    return out;
  }

 private:
  std::uint64_t id_;
  std::uint64_t revision_ = 0;
  VectorX<Scalar> values_;
};

template <typename Scalar>
using PolicyNet = Network<Scalar, Head::kPolicy>;
template <typename Scalar>
using ValueNet = Network<Scalar, Head::kValue>;

/// Intermediates kept by a forward pass for the matching backward pass.
template <typename Scalar>
struct ForwardTape {
  std::uint64_t net_id = 0;
  std::uint64_t revision = 0;
  Eigen::Index batch = 0;
  MatrixX<Scalar> patches1;  // (3*5) x (254*B)
  MatrixX<Scalar> h1;        // 32 x (254*B)
  MatrixX<Scalar> patches2;  // (32*3) x (126*B)
  MatrixX<Scalar> h2;        // 32 x (126*B), doubles as the 4032 x B flatten
  MatrixX<Scalar> h3;        // 256 x B
  MatrixX<Scalar> concat;    // 260 x B
  MatrixX<Scalar> h4;        // 128 x B
  MatrixX<Scalar> out;       // out_dim x B, after the head activation
};

struct NetInit {
  double hidden_gain = 1.0;
  double policy_head_gain = 0.01;
  double value_head_gain = 1.0;
  double initial_logstd = -0.69;
};

/// Fills `w` (rows x cols) with a scaled orthogonal matrix.
void orthogonal_fill(Eigen::Map<Eigen::MatrixXd> w, double gain,
                     std::mt19937_64& rng);

template <typename Scalar, Head H>
void initialize(Network<Scalar, H>& net, std::mt19937_64& rng,
                const NetInit& init = {}) {
  Network<double, H> tmp;
  auto& v = tmp.mutable_values();
  v.setZero();
  for (Block b : {Block::kConv1W, Block::kConv2W, Block::kFc1W, Block::kFc2W}) {
    orthogonal_fill(tmp.mutable_block(b), init.hidden_gain, rng);
  }
  orthogonal_fill(tmp.mutable_block(Block::kHeadW),
                  H == Head::kPolicy ? init.policy_head_gain
                                     : init.value_head_gain,
                  rng);
  if constexpr (H == Head::kPolicy) {
    tmp.mutable_block(Block::kLogStd).setConstant(init.initial_logstd);
  }
  net.mutable_values() = v.template cast<Scalar>();
}

namespace detail {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Shared trunk + linear head. Returns the pre-activation head output.
template <typename Scalar, Head H>
MatrixX<Scalar> trunk_forward(const Network<Scalar, H>& net,
                              const Eigen::Ref<const MatrixX<std::type_identity_t<Scalar>>>& obs,
                              ForwardTape<Scalar>& tape) {
  using namespace shape;
  if (obs.rows() != kObsDim) {
    throw ContractViolation("network forward: observation has " +
                            std::to_string(obs.rows()) + " rows, expected " +
                            std::to_string(kObsDim));
  }
  const Eigen::Index batch = obs.cols();
  tape.net_id = net.id();
  tape.revision = net.revision();
  tape.batch = batch;

  // conv1 via im2col. Patch row = channel * kernel + tap.
  tape.patches1.resize(kInChannels * kConv1Kernel, kConv1Length * batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int p = 0; p < kConv1Length; ++p) {
      auto col = tape.patches1.col(b * kConv1Length + p);
      for (int c = 0; c < kInChannels; ++c) {
        col.template segment<kConv1Kernel>(c * kConv1Kernel) =
            obs.col(b).template segment<kConv1Kernel>(c * kInLength +
                                                      p * kConv1Stride);
      }
    }
  }
  tape.h1.noalias() = net.block(Block::kConv1W) * tape.patches1;
  tape.h1.colwise() += net.block(Block::kConv1B).col(0);
  tape.h1 = tape.h1.cwiseMax(Scalar(0));

  tape.patches2.resize(kConv1Filters * kConv2Kernel, kConv2Length * batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int q = 0; q < kConv2Length; ++q) {
      auto col = tape.patches2.col(b * kConv2Length + q);
      const Eigen::Index src = b * kConv1Length + q * kConv2Stride;
      for (int k = 0; k < kConv2Kernel; ++k) {
        // Row layout channel * kernel + tap, so scatter with stride kernel.
        for (int c = 0; c < kConv1Filters; ++c)
          col(c * kConv2Kernel + k) = tape.h1(c, src + k);
      }
    }
  }
  tape.h2.noalias() = net.block(Block::kConv2W) * tape.patches2;
  tape.h2.colwise() += net.block(Block::kConv2B).col(0);
  tape.h2 = tape.h2.cwiseMax(Scalar(0));

  // Position-major flatten: flat index = position * filters + channel, which
  // is exactly the memory order of h2.
  Eigen::Map<const MatrixX<Scalar>> flat(tape.h2.data(), kFlat, batch);
  tape.h3.noalias() = net.block(Block::kFc1W) * flat;
  tape.h3.colwise() += net.block(Block::kFc1B).col(0);
  tape.h3 = tape.h3.cwiseMax(Scalar(0));

  tape.concat.resize(kFc2In, batch);
  tape.concat.topRows(kFc1) = tape.h3;
  tape.concat.bottomRows(kSideInputs) = obs.bottomRows(kSideInputs);

  tape.h4.noalias() = net.block(Block::kFc2W) * tape.concat;
  tape.h4.colwise() += net.block(Block::kFc2B).col(0);
  tape.h4 = tape.h4.cwiseMax(Scalar(0));

  MatrixX<Scalar> z = net.block(Block::kHeadW) * tape.h4;
  z.colwise() += net.block(Block::kHeadB).col(0);
  return z;
}

/// Backward through the trunk given the gradient at the head pre-activation.
template <typename Scalar, Head H>
void trunk_backward(const Network<Scalar, H>& net,
                    const ForwardTape<Scalar>& tape,
                    const MatrixX<Scalar>& d_head, VectorX<Scalar>& grad) {
  using namespace shape;
  const auto& lay = Network<Scalar, H>::layout();
  auto gblock = [&](Block b) {
    const auto& info = lay.block(b);
    return Eigen::Map<MatrixX<Scalar>>(grad.data() + info.offset, info.rows,
                                       info.cols);
  };
  const Eigen::Index batch = tape.batch;

  gblock(Block::kHeadW).noalias() += d_head * tape.h4.transpose();
  gblock(Block::kHeadB) += d_head.rowwise().sum();

  MatrixX<Scalar> d4 = net.block(Block::kHeadW).transpose() * d_head;
  d4 = (tape.h4.array() > Scalar(0)).select(d4, Scalar(0));
  gblock(Block::kFc2W).noalias() += d4 * tape.concat.transpose();
  gblock(Block::kFc2B) += d4.rowwise().sum();

  MatrixX<Scalar> d3 =
      net.block(Block::kFc2W).leftCols(kFc1).transpose() * d4;
  d3 = (tape.h3.array() > Scalar(0)).select(d3, Scalar(0));
  Eigen::Map<const MatrixX<Scalar>> flat(tape.h2.data(), kFlat, batch);
  gblock(Block::kFc1W).noalias() += d3 * flat.transpose();
  gblock(Block::kFc1B) += d3.rowwise().sum();

  MatrixX<Scalar> d2(kConv2Filters, kConv2Length * batch);
  Eigen::Map<MatrixX<Scalar>>(d2.data(), kFlat, batch).noalias() =
      net.block(Block::kFc1W).transpose() * d3;
  d2 = (tape.h2.array() > Scalar(0)).select(d2, Scalar(0));
  gblock(Block::kConv2W).noalias() += d2 * tape.patches2.transpose();
  gblock(Block::kConv2B) += d2.rowwise().sum();

  const MatrixX<Scalar> dp2 = net.block(Block::kConv2W).transpose() * d2;
  MatrixX<Scalar> d1 = MatrixX<Scalar>::Zero(kConv1Filters, kConv1Length * batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int q = 0; q < kConv2Length; ++q) {
      const auto col = dp2.col(b * kConv2Length + q);
      const Eigen::Index dst = b * kConv1Length + q * kConv2Stride;
      for (int k = 0; k < kConv2Kernel; ++k) {
        for (int c = 0; c < kConv1Filters; ++c)
          d1(c, dst + k) += col(c * kConv2Kernel + k);
      }
    }
  }
  d1 = (tape.h1.array() > Scalar(0)).select(d1, Scalar(0));
  gblock(Block::kConv1W).noalias() += d1 * tape.patches1.transpose();
  gblock(Block::kConv1B) += d1.rowwise().sum();
}

template <typename Scalar, Head H>
void check_tape(const Network<Scalar, H>& net, const ForwardTape<Scalar>& tape) {
  if (tape.net_id != net.id() || tape.revision != net.revision()) {
    throw ContractViolation(
        "backward: tape was recorded for different or since-modified "
        "parameters");
  }
}

}  // namespace detail

template <typename Scalar>
struct PolicyOutput {
  MatrixX<Scalar> mean;  // 2 x B
  Vector2<Scalar> logstd;
};

/// Batched policy forward. Row 0 of the mean is in (0, 1), row 1 in (-1, 1).
template <typename Scalar>
PolicyOutput<Scalar> policy_forward(const PolicyNet<Scalar>& net,
                                    const Eigen::Ref<const MatrixX<std::type_identity_t<Scalar>>>& obs,
                                    ForwardTape<Scalar>& tape) {
  MatrixX<Scalar> z = detail::trunk_forward(net, obs, tape);
  z.row(0) = z.row(0).unaryExpr([](Scalar x) { return detail::sigmoid(x); });
  z.row(1) = z.row(1).array().tanh();
  tape.out = z;
  return {std::move(z), net.logstd()};
}

template <typename Scalar>
PolicyOutput<Scalar> policy_forward(const PolicyNet<Scalar>& net,
                                    const Eigen::Ref<const MatrixX<std::type_identity_t<Scalar>>>& obs) {
  ForwardTape<Scalar> tape;
  return policy_forward(net, obs, tape);
}

template <typename Scalar>
RowVectorX<Scalar> value_forward(const ValueNet<Scalar>& net,
                                 const Eigen::Ref<const MatrixX<std::type_identity_t<Scalar>>>& obs,
                                 ForwardTape<Scalar>& tape) {
  MatrixX<Scalar> z = detail::trunk_forward(net, obs, tape);
  tape.out = z;
  return z.row(0);
}

template <typename Scalar>
RowVectorX<Scalar> value_forward(const ValueNet<Scalar>& net,
                                 const Eigen::Ref<const MatrixX<std::type_identity_t<Scalar>>>& obs) {
  ForwardTape<Scalar> tape;
  return value_forward(net, obs, tape);
}

/// Accumulates into `grad` the gradient of a scalar loss whose partials with
/// respect to the policy outputs are `d_mean` (2 x B) and `d_logstd`.
template <typename Scalar>
void policy_backward(const PolicyNet<Scalar>& net,
                     const ForwardTape<Scalar>& tape,
                     const MatrixX<Scalar>& d_mean,
                     const Vector2<Scalar>& d_logstd, VectorX<Scalar>& grad) {
  detail::check_tape(net, tape);
  if (grad.size() != PolicyNet<Scalar>::layout().size())
    grad = VectorX<Scalar>::Zero(PolicyNet<Scalar>::layout().size());
  MatrixX<Scalar> d_head(2, tape.batch);
  const auto& mu = tape.out;
  d_head.row(0) = d_mean.row(0).array() * mu.row(0).array() *
                  (Scalar(1) - mu.row(0).array());
  d_head.row(1) =
      d_mean.row(1).array() * (Scalar(1) - mu.row(1).array().square());
  detail::trunk_backward(net, tape, d_head, grad);
  const auto& info = PolicyNet<Scalar>::layout().block(Block::kLogStd);
  grad.segment(info.offset, 2) += d_logstd;
}

template <typename Scalar>
void value_backward(const ValueNet<Scalar>& net, const ForwardTape<Scalar>& tape,
                    const RowVectorX<Scalar>& d_value, VectorX<Scalar>& grad) {
  detail::check_tape(net, tape);
  if (grad.size() != ValueNet<Scalar>::layout().size())
    grad = VectorX<Scalar>::Zero(ValueNet<Scalar>::layout().size());
  detail::trunk_backward(net, tape, MatrixX<Scalar>(d_value), grad);
}

}  // namespace mrca
