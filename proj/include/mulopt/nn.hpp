#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mulopt/error.hpp"
#include "mulopt/tree.hpp"

namespace mulopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr int kDefaultStMax = 16;
inline constexpr double kInputScale = 1.0 / 3.0;

// State tensor [2][columns][st_max] flattened channel-major: entry
// (k, j, i) sits at k*columns*st_max + j*st_max + i. Channel 0 holds 3:2
// counts, channel 1 holds 2:2 counts, both scaled by 1/3.
inline Vec encode_state(const StagedTree& tree, int st_max = kDefaultStMax) {
  const int cols = tree.profile.num_columns();
  if (tree.stages > st_max)
    throw ShapeMismatch("tree has " + std::to_string(tree.stages) + " stages, tensor holds " +
                        std::to_string(st_max));
  Vec x = Vec::Zero(2 * cols * st_max);
  for (int i = 0; i < tree.stages; ++i)
    for (int j = 0; j < cols; ++j) {
      x[j * st_max + i] = tree.t32[i][j] * kInputScale;
      x[cols * st_max + j * st_max + i] = tree.t22[i][j] * kInputScale;
    }
  return x;
}

enum class HeadKind : std::uint8_t { Q, ActorCritic };

// Conv layers (3x3, stride 1, zero padding, ReLU) over the columns x stages
// grid, then ReLU dense layers, then the head(s).
struct NetArch {
  int columns = 16;
  int st_max = kDefaultStMax;
  std::vector<int> conv{16, 32};
  std::vector<int> hidden{256};
  HeadKind head = HeadKind::Q;

  static constexpr int in_channels = 2;
  int actions() const { return 4 * columns; }
  int input_size() const { return in_channels * columns * st_max; }
  int output_size() const { return actions() + (head == HeadKind::ActorCritic ? 1 : 0); }
  friend bool operator==(const NetArch&, const NetArch&) = default;

  void validate() const {
    if (columns < 1 || st_max < 1) throw InvalidArgument("network input dimensions must be positive");
    for (int c : conv)
      if (c < 1) throw InvalidArgument("conv channel counts must be positive");
    for (int h : hidden)
      if (h < 1) throw InvalidArgument("hidden layer sizes must be positive");
  }
};

struct ParamBlock {
  std::string name;
  Eigen::Index offset = 0, size = 0;
};

struct AcOutput {
  Vec logits;
  double value = 0.0;
};

// Activations kept by forward() for backward(). Every activation is stored as
// [features][batch].
struct Tape {
  std::vector<Mat> acts;
  std::vector<Mat> cols;  // im2col buffers, one per conv layer
  Mat out;
};

class Net {
 public:
  Net(NetArch arch, std::uint64_t seed) : arch_(std::move(arch)) {
    arch_.validate();
    const int hw = arch_.columns * arch_.st_max;
    int width = NetArch::in_channels;
    for (std::size_t i = 0; i < arch_.conv.size(); ++i) {
      add_layer("conv" + std::to_string(i), Layer::Kind::Conv, width, arch_.conv[i]);
      width = arch_.conv[i];
    }
    width *= hw;
    for (std::size_t i = 0; i < arch_.hidden.size(); ++i) {
      add_layer("dense" + std::to_string(i), Layer::Kind::Dense, width, arch_.hidden[i]);
      width = arch_.hidden[i];
    }
    trunk_ = static_cast<int>(layers_.size());
    if (arch_.head == HeadKind::Q) {
      add_layer("q", Layer::Kind::Dense, width, arch_.actions());
    } else {
      add_layer("policy", Layer::Kind::Dense, width, arch_.actions());
      add_layer("value", Layer::Kind::Dense, width, 1);
    }
    params_ = Vec::Zero(total_);
    std::mt19937_64 rng(seed);
    for (const auto& l : layers_) {
      const int k = l.kind == Layer::Kind::Conv ? 9 : 1;
      const double bound = std::sqrt(6.0 / (l.in * k + l.out * k));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index i = 0; i < l.w_size(); ++i) params_[l.w_off + i] = u(rng);
    }
  }

  const NetArch& arch() const { return arch_; }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  Eigen::Index param_count() const { return total_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  // Parameters of the named block ("conv0", "dense0", "q", "policy", "value").
  Eigen::Ref<Vec> block(const std::string& name) {
    for (const auto& b : blocks_)
      if (b.name == name) return params_.segment(b.offset, b.size);
    throw InvalidArgument("no parameter block '" + name + "'");
  }

  void zero_heads() {
    for (std::size_t i = trunk_; i < layers_.size(); ++i)
      params_.segment(layers_[i].w_off, layers_[i].w_size() + layers_[i].out).setZero();
  }

  // X is [input_size][batch]; the result rows are Q-values or logits, then
  // the value for actor-critic nets.
  Tape forward(const Mat& x) const {
    if (x.rows() != arch_.input_size())
      throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows, expected " +
                          std::to_string(arch_.input_size()));
    Tape t;
    t.acts.reserve(trunk_ + 1);
    t.acts.push_back(x);
    for (int i = 0; i < trunk_; ++i) {
      const auto& l = layers_[i];
      Mat y;
      if (l.kind == Layer::Kind::Conv) {
        t.cols.push_back(im2col(t.acts.back(), l.in));
        y = from_maps(weights(l) * t.cols.back() + bias(l).replicate(1, t.cols.back().cols()), l.out,
                      x.cols());
      } else {
        y = weights(l) * t.acts.back();
        y.colwise() += bias(l);
      }
      t.acts.push_back(y.cwiseMax(0.0));
    }
    t.out.resize(arch_.output_size(), x.cols());
    Eigen::Index row = 0;
    for (std::size_t i = trunk_; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      Mat y = weights(l) * t.acts.back();
      y.colwise() += bias(l);
      t.out.middleRows(row, l.out) = y;
      row += l.out;
    }
    return t;
  }

  // Gradient of sum_b <dout[:, b], out[:, b]> with respect to the parameters.
  Vec backward(const Tape& t, const Mat& dout) const {
    if (dout.rows() != t.out.rows() || dout.cols() != t.out.cols())
      throw ShapeMismatch("output gradient shape does not match the forward pass");
    Vec g = Vec::Zero(total_);
    Mat d = Mat::Zero(t.acts.back().rows(), t.acts.back().cols());
    Eigen::Index row = 0;
    for (std::size_t i = trunk_; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      const auto dy = dout.middleRows(row, l.out);
      row += l.out;
      grad_w(g, l) += dy * t.acts.back().transpose();
      g.segment(l.b_off, l.out) += dy.rowwise().sum();
      d.noalias() += weights(l).transpose() * dy;
    }
    int conv_index = static_cast<int>(t.cols.size());
    for (int i = trunk_ - 1; i >= 0; --i) {
      const auto& l = layers_[i];
      d = (t.acts[i + 1].array() > 0.0).select(d, 0.0);
      if (l.kind == Layer::Kind::Conv) {
        const Mat& cols = t.cols[--conv_index];
        const Mat dy = to_maps(d, l.out);
        grad_w(g, l) += dy * cols.transpose();
        g.segment(l.b_off, l.out) += dy.rowwise().sum();
        if (i > 0) d = col2im(weights(l).transpose() * dy, l.in, d.cols());
      } else {
        grad_w(g, l) += d * t.acts[i].transpose();
        g.segment(l.b_off, l.out) += d.rowwise().sum();
        if (i > 0) d = weights(l).transpose() * d;
      }
    }
    return g;
  }

  Vec backward(const Vec& x, const Vec& out_grad) const {
    return backward(forward(Mat(x)), Mat(out_grad));
  }

  Vec forward_q(const Vec& x) const {
    if (arch_.head != HeadKind::Q) throw ShapeMismatch("network has no Q head");
    return forward(Mat(x)).out.col(0);
  }

  AcOutput forward_ac(const Vec& x) const {
    if (arch_.head != HeadKind::ActorCritic) throw ShapeMismatch("network has no actor-critic heads");
    const auto out = forward(Mat(x)).out;
    return {out.col(0).head(arch_.actions()), out(arch_.actions(), 0)};
  }

 private:
  struct Layer {
    enum class Kind { Conv, Dense } kind;
    int in, out;  // channels for conv, units for dense
    Eigen::Index w_off, b_off;
    Eigen::Index w_cols() const { return kind == Kind::Conv ? Eigen::Index{in} * 9 : in; }
    Eigen::Index w_size() const { return out * w_cols(); }
  };

  void add_layer(std::string name, Layer::Kind kind, int in, int out) {
    Layer l{kind, in, out, total_, 0};
    l.b_off = total_ + l.w_size();
    blocks_.push_back({std::move(name), total_, l.w_size() + out});
    total_ += l.w_size() + out;
    layers_.push_back(l);
  }

  Eigen::Map<const Mat> weights(const Layer& l) const {
    return {params_.data() + l.w_off, l.out, l.w_cols()};
  }
  Eigen::Map<const Vec> bias(const Layer& l) const { return {params_.data() + l.b_off, l.out}; }
  static Eigen::Map<Mat> grad_w(Vec& g, const Layer& l) { return {g.data() + l.w_off, l.out, l.w_cols()}; }

  // [C*HW][B] -> [C][B*HW]
  Mat to_maps(const Mat& x, int channels) const {
    const Eigen::Index hw = arch_.columns * arch_.st_max;
    Mat m(channels, x.cols() * hw);
    for (Eigen::Index b = 0; b < x.cols(); ++b)
      for (int c = 0; c < channels; ++c)
        for (Eigen::Index p = 0; p < hw; ++p) m(c, b * hw + p) = x(c * hw + p, b);
    return m;
  }
  // [C][B*HW] -> [C*HW][B]
  Mat from_maps(const Mat& m, int channels, Eigen::Index batch) const {
    const Eigen::Index hw = arch_.columns * arch_.st_max;
    Mat x(channels * hw, batch);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (int c = 0; c < channels; ++c)
        for (Eigen::Index p = 0; p < hw; ++p) x(c * hw + p, b) = m(c, b * hw + p);
    return x;
  }

  // [C*HW][B] -> [C*9][B*HW], row c*9 + ky*3 + kx.
  Mat im2col(const Mat& x, int channels) const {
    const int h = arch_.columns, w = arch_.st_max, hw = h * w;
    Mat cols = Mat::Zero(Eigen::Index{channels} * 9, x.cols() * hw);
    for (Eigen::Index b = 0; b < x.cols(); ++b)
      for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const Eigen::Index r = c * 9 + ky * 3 + kx;
            for (int y = 0; y < h; ++y) {
              const int sy = y + ky - 1;
              if (sy < 0 || sy >= h) continue;
              for (int z = 0; z < w; ++z) {
                const int sz = z + kx - 1;
                if (sz < 0 || sz >= w) continue;
                cols(r, b * hw + y * w + z) = x(c * hw + sy * w + sz, b);
              }
            }
          }
    return cols;
  }

  // Adjoint of im2col.
  Mat col2im(const Mat& cols, int channels, Eigen::Index batch) const {
    const int h = arch_.columns, w = arch_.st_max, hw = h * w;
    Mat x = Mat::Zero(Eigen::Index{channels} * hw, batch);
    for (Eigen::Index b = 0; b < batch; ++b)
      for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const Eigen::Index r = c * 9 + ky * 3 + kx;
            for (int y = 0; y < h; ++y) {
              const int sy = y + ky - 1;
              if (sy < 0 || sy >= h) continue;
              for (int z = 0; z < w; ++z) {
                const int sz = z + kx - 1;
                if (sz < 0 || sz >= w) continue;
                x(c * hw + sy * w + sz, b) += cols(r, b * hw + y * w + z);
              }
            }
          }
    return x;
  }

  NetArch arch_;
  std::vector<Layer> layers_;
  std::vector<ParamBlock> blocks_;
  int trunk_ = 0;
  Eigen::Index total_ = 0;
  Vec params_;
};

struct RmsProp {
  double lr = 2e-4;
  double rho = 0.99;
  double eps = 1e-8;
  Vec acc;
  std::uint64_t steps = 0;

  void step(Vec& params, const Vec& grad) {
    if (grad.size() != params.size()) throw ShapeMismatch("gradient size does not match parameters");
    if (acc.size() != params.size()) acc = Vec::Zero(params.size());
    acc = rho * acc + (1.0 - rho) * grad.cwiseAbs2();
    params.array() -= lr * grad.array() / (acc.array() + eps).sqrt();
    ++steps;
  }
};

// Checkpoint layout (little-endian):
//   "MULOPTNN" | u32 version=1
//   i32 columns, st_max, head | u32 n_conv, i32[n_conv] | u32 n_hidden, i32[n_hidden]
//   u64 n_params | f64[n_params] params
//   f64 lr, rho, eps | u64 steps | u64 n_acc | f64[n_acc] accumulators
namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

struct Reader {
  const std::string& in;
  std::size_t pos = 0;
  template <class T>
  T get() {
    if (pos + sizeof(T) > in.size()) throw IoError("checkpoint is truncated");
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

inline constexpr char kCheckpointMagic[8] = {'M', 'U', 'L', 'O', 'P', 'T', 'N', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace detail

inline std::string checkpoint_bytes(const Net& net, const RmsProp& opt) {
  std::string out(detail::kCheckpointMagic, 8);
  detail::put(out, detail::kCheckpointVersion);
  const auto& a = net.arch();
  detail::put<std::int32_t>(out, a.columns);
  detail::put<std::int32_t>(out, a.st_max);
  detail::put<std::int32_t>(out, static_cast<std::int32_t>(a.head));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(a.conv.size()));
  for (int c : a.conv) detail::put<std::int32_t>(out, c);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(a.hidden.size()));
  for (int h : a.hidden) detail::put<std::int32_t>(out, h);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(net.param_count()));
  for (Eigen::Index i = 0; i < net.param_count(); ++i) detail::put(out, net.params()[i]);
  detail::put(out, opt.lr);
  detail::put(out, opt.rho);
  detail::put(out, opt.eps);
  detail::put<std::uint64_t>(out, opt.steps);
  detail::put<std::uint64_t>(out, static_cast<std::uint64_t>(opt.acc.size()));
  for (Eigen::Index i = 0; i < opt.acc.size(); ++i) detail::put(out, opt.acc[i]);
  return out;
}

struct Checkpoint {
  Net net;
  RmsProp opt;
};

inline Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  detail::Reader r{bytes};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), detail::kCheckpointMagic, 8) != 0)
    throw IoError("not a network checkpoint");
  r.pos = 8;
  if (r.get<std::uint32_t>() != detail::kCheckpointVersion) throw IoError("unsupported checkpoint version");
  NetArch a;
  a.columns = r.get<std::int32_t>();
  a.st_max = r.get<std::int32_t>();
  const auto head = r.get<std::int32_t>();
  if (head != 0 && head != 1) throw IoError("bad head kind in checkpoint");
  a.head = static_cast<HeadKind>(head);
  const auto n_conv = r.get<std::uint32_t>();
  if (n_conv > 64) throw IoError("bad layer count in checkpoint");
  a.conv.resize(n_conv);
  for (auto& c : a.conv) c = r.get<std::int32_t>();
  const auto n_hidden = r.get<std::uint32_t>();
  if (n_hidden > 64) throw IoError("bad layer count in checkpoint");
  a.hidden.resize(n_hidden);
  for (auto& h : a.hidden) h = r.get<std::int32_t>();
  Net net(a, 0);
  if (r.get<std::uint64_t>() != static_cast<std::uint64_t>(net.param_count()))
    throw IoError("checkpoint parameter count does not match its architecture");
  for (Eigen::Index i = 0; i < net.param_count(); ++i) net.params()[i] = r.get<double>();
  RmsProp opt;
  opt.lr = r.get<double>();
  opt.rho = r.get<double>();
  opt.eps = r.get<double>();
  opt.steps = r.get<std::uint64_t>();
  const auto n_acc = r.get<std::uint64_t>();
  if (n_acc != 0 && n_acc != static_cast<std::uint64_t>(net.param_count()))
    throw IoError("checkpoint optimizer state does not match its parameters");
  opt.acc.resize(static_cast<Eigen::Index>(n_acc));
  for (Eigen::Index i = 0; i < opt.acc.size(); ++i) opt.acc[i] = r.get<double>();
  if (r.pos != bytes.size()) throw IoError("trailing bytes in checkpoint");
  return {std::move(net), std::move(opt)};
}

}  // namespace mulopt
