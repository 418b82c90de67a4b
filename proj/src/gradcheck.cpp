#include "mrca/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mrca {

namespace {

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

struct Probe {
  double loss = 0.0;
  std::vector<Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>> masks;
};

template <Head H>
Probe probe(const Network<double, H>& net, const Mat& obs, const Mat& coeff,
            const Eigen::Vector2d& ls_coeff) {
  ForwardTape<double> tape;
  Probe p;
  if constexpr (H == Head::kPolicy) {
    const auto out = policy_forward(net, obs, tape);
    p.loss = (out.mean.array() * coeff.array()).sum() + out.logstd.dot(ls_coeff);
  } else {
    const auto v = value_forward(net, obs, tape);
    p.loss = (v.array() * coeff.row(0).array()).sum();
  }
  for (const Mat* h : {&tape.h1, &tape.h2, &tape.h3, &tape.h4})
    p.masks.push_back(h->array() > 0.0);
  return p;
}

template <Head H>
void check_network(const GradcheckOptions& opt, std::mt19937_64& rng,
                   std::vector<BlockError>& errors, std::size_t first) {
  using Net = Network<double, H>;
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& layout = Net::layout();

  for (int draw = 0; draw < opt.draws; ++draw) {
    Net net;
    initialize(net, rng);
    // Nonzero biases and a non-trivial head exercise every path.
    for (const auto& b : layout.blocks()) {
      if (b.cols == 1 && b.id != Block::kLogStd) {
        auto blk = net.mutable_block(b.id);
        for (Eigen::Index i = 0; i < blk.size(); ++i) blk(i) = 0.1 * normal(rng);
      }
    }
    {
      auto head = net.mutable_block(Block::kHeadW);
      for (Eigen::Index i = 0; i < head.size(); ++i) head(i) += 0.1 * normal(rng);
    }
    Mat obs(kObsDim, opt.batch);
    for (Eigen::Index i = 0; i < obs.size(); ++i) obs(i) = normal(rng);
    Mat coeff(Net::out_dim(), opt.batch);
    for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) = normal(rng);
    const Eigen::Vector2d ls_coeff(normal(rng), normal(rng));

    ForwardTape<double> tape;
    Vec grad;
    if constexpr (H == Head::kPolicy) {
      policy_forward(net, obs, tape);
      policy_backward(net, tape, coeff, ls_coeff, grad);
    } else {
      value_forward(net, obs, tape);
      value_backward(net, tape, Eigen::RowVectorXd(coeff.row(0)), grad);
    }
    if (opt.corrupt != 0.0) {
      const auto& info = layout.block(Block::kFc2W);
      grad.segment(info.offset, info.size()) *= 1.0 + opt.corrupt;
    }

    for (std::size_t bi = 0; bi < layout.blocks().size(); ++bi) {
      const auto& info = layout.blocks()[bi];
      BlockError& err = errors[first + bi];
      std::uniform_int_distribution<Eigen::Index> pick(0, info.size() - 1);
      int done = 0;
      for (int attempt = 0; done < opt.coords_per_block && attempt < 50 * opt.coords_per_block;
           ++attempt) {
        const Eigen::Index idx = info.offset + pick(rng);
        const double orig = net.values()[idx];
        net.mutable_values()[idx] = orig + opt.step;
        const Probe plus = probe(net, obs, coeff, ls_coeff);
        net.mutable_values()[idx] = orig - opt.step;
        const Probe minus = probe(net, obs, coeff, ls_coeff);
        net.mutable_values()[idx] = orig;
        bool kink = false;
        for (std::size_t m = 0; m < plus.masks.size(); ++m)
          kink = kink || (plus.masks[m] != minus.masks[m]).any();
        if (kink) {
          ++err.kinks_skipped;
          continue;
        }
        const double numeric = (plus.loss - minus.loss) / (2.0 * opt.step);
        const double analytic = grad[idx];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        err.max_rel_error = std::max(err.max_rel_error, std::abs(numeric - analytic) / scale);
        ++err.checked;
        ++done;
      }
    }
  }
}

}  // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  GradcheckReport report;
  std::mt19937_64 rng(opt.seed);
  for (const auto& b : PolicyNet<double>::layout().blocks())
    report.blocks.push_back({"policy", std::string(b.name)});
  const std::size_t value_first = report.blocks.size();
  for (const auto& b : ValueNet<double>::layout().blocks())
    report.blocks.push_back({"value", std::string(b.name)});

  check_network<Head::kPolicy>(opt, rng, report.blocks, 0);
  check_network<Head::kValue>(opt, rng, report.blocks, value_first);
  for (const auto& b : report.blocks)
    if (!(b.max_rel_error < opt.tolerance) || b.checked == 0) report.passed = false;
  return report;
}

}  // namespace mrca
