#include "mrca/network.hpp"

#include <stdexcept>

namespace mrca {

ParamLayout::ParamLayout(Head head) : head_(head) {
  using namespace shape;
  const int out = out_dim();
  auto add = [&](Block id, std::string_view name, Eigen::Index rows,
                 Eigen::Index cols) {
    blocks_.push_back({id, name, rows, cols, size_});
    size_ += rows * cols;
  };
  add(Block::kConv1W, "conv1.weight", kConv1Filters, kInChannels * kConv1Kernel);
  add(Block::kConv1B, "conv1.bias", kConv1Filters, 1);
  add(Block::kConv2W, "conv2.weight", kConv2Filters, kConv1Filters * kConv2Kernel);
  add(Block::kConv2B, "conv2.bias", kConv2Filters, 1);
  add(Block::kFc1W, "fc1.weight", kFc1, kFlat);
  add(Block::kFc1B, "fc1.bias", kFc1, 1);
  add(Block::kFc2W, "fc2.weight", kFc2, kFc2In);
  add(Block::kFc2B, "fc2.bias", kFc2, 1);
  add(Block::kHeadW, "head.weight", out, kFc2);
  add(Block::kHeadB, "head.bias", out, 1);
  if (head == Head::kPolicy) add(Block::kLogStd, "logstd", kActionDim, 1);
}

const BlockInfo& ParamLayout::block(Block b) const {
  for (const auto& info : blocks_)
    if (info.id == b) return info;
  throw ContractViolation("parameter block not present in this network");
}

const ParamLayout& layout_for(Head head) {
  static const ParamLayout policy(Head::kPolicy);
  static const ParamLayout value(Head::kValue);
  return head == Head::kPolicy ? policy : value;
}

std::uint64_t next_network_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void orthogonal_fill(Eigen::Map<Eigen::MatrixXd> w, double gain,
                     std::mt19937_64& rng) {
  const Eigen::Index rows = w.rows();
  const Eigen::Index cols = w.cols();
  const bool tall = rows >= cols;
  const Eigen::Index big = tall ? rows : cols;
  const Eigen::Index small = tall ? cols : rows;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(big, small);
  for (Eigen::Index j = 0; j < small; ++j)
    for (Eigen::Index i = 0; i < big; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  // Sign fix so the result is uniformly distributed over orthogonal matrices.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < small; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  if (tall)
    w = gain * q;
  else
    w = gain * q.transpose();
}

}  // namespace mrca
