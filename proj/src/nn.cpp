#include "alignlab/nn.hpp"

#include "alignlab/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace alignlab {

namespace {

void apply_activation(const Architecture& a, Mat& z) {
  switch (a.activation) {
    case Activation::kTanh:
      z = z.array().tanh();
      break;
    case Activation::kLeakyRelu:
      z = z.array().max(a.leaky_slope * z.array());
      break;
    case Activation::kIdentity:
      break;
  }
}

// Derivative from the pre-activation values.
Mat activation_deriv(const Architecture& a, const Mat& pre) {
  switch (a.activation) {
    case Activation::kTanh:
      return 1.0 - pre.array().tanh().square();
    case Activation::kLeakyRelu:
      return (pre.array() >= 0.0)
          .select(Mat::Ones(pre.rows(), pre.cols()),
                  Mat::Constant(pre.rows(), pre.cols(), a.leaky_slope));
    case Activation::kIdentity:
      return Mat::Ones(pre.rows(), pre.cols());
  }
  return Mat::Ones(pre.rows(), pre.cols());
}

void apply_output_activation(const Architecture& a, Mat& z) {
  if (a.output_activation == OutputActivation::kTanh) z = z.array().tanh();
}

Mat output_activation_deriv(const Architecture& a, const Mat& pre) {
  if (a.output_activation == OutputActivation::kTanh)
    return 1.0 - pre.array().tanh().square();
  return Mat::Ones(pre.rows(), pre.cols());
}

}  // namespace

int Architecture::fan_in(int layer) const {
  return layer == 0 ? input_dim : hidden_widths[static_cast<size_t>(layer - 1)];
}

int Architecture::fan_out(int layer) const {
  return layer == depth() - 1 ? output_dim
                              : hidden_widths[static_cast<size_t>(layer)];
}

int Architecture::param_count() const {
  int n = 0;
  for (int l = 0; l < depth(); ++l) n += fan_in(l) * fan_out(l) + fan_out(l);
  return n;
}

void Architecture::validate() const {
  require(input_dim >= 1 && output_dim >= 1, "architecture dims must be >= 1");
  for (int w : hidden_widths) require(w >= 1, "hidden widths must be >= 1");
  if (activation == Activation::kLeakyRelu)
    require(leaky_slope > 0.0 && leaky_slope < 1.0,
            "leaky_relu slope must lie in (0,1)");
}

bool Architecture::operator==(const Architecture& o) const {
  return input_dim == o.input_dim && hidden_widths == o.hidden_widths &&
         output_dim == o.output_dim && activation == o.activation &&
         output_activation == o.output_activation &&
         (activation != Activation::kLeakyRelu || leaky_slope == o.leaky_slope);
}

int MlpNetwork::param_offset(int layer) const {
  int off = 0;
  for (int l = 0; l < layer; ++l)
    off += arch.fan_in(l) * arch.fan_out(l) + arch.fan_out(l);
  return off;
}

Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>>
MlpNetwork::weights(int layer) const {
  return {params.data() + param_offset(layer), arch.fan_out(layer),
          arch.fan_in(layer)};
}

Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                         Eigen::RowMajor>>
MlpNetwork::weights(int layer) {
  return {params.data() + param_offset(layer), arch.fan_out(layer),
          arch.fan_in(layer)};
}

Eigen::Map<const Vec> MlpNetwork::biases(int layer) const {
  return {params.data() + param_offset(layer) +
              arch.fan_in(layer) * arch.fan_out(layer),
          arch.fan_out(layer)};
}

Eigen::Map<Vec> MlpNetwork::biases(int layer) {
  return {params.data() + param_offset(layer) +
              arch.fan_in(layer) * arch.fan_out(layer),
          arch.fan_out(layer)};
}

MlpNetwork make_network(const Architecture& arch, Rng& rng) {
  arch.validate();
  MlpNetwork net{arch, Vec::Zero(arch.param_count())};
  for (int l = 0; l < arch.depth(); ++l) {
    const double bound =
        std::sqrt(6.0 / (arch.fan_in(l) + arch.fan_out(l)));
    auto W = net.weights(l);
    for (int r = 0; r < W.rows(); ++r)
      for (int c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-bound, bound);
    // biases stay zero
  }
  return net;
}

MlpNetwork make_zero_network(const Architecture& arch) {
  arch.validate();
  return MlpNetwork{arch, Vec::Zero(arch.param_count())};
}

Mat forward(const MlpNetwork& net, const Mat& X) {
  require(X.cols() == net.arch.input_dim,
          "forward: input has " + std::to_string(X.cols()) +
              " columns, expected " + std::to_string(net.arch.input_dim));
  Mat a = X;
  const int depth = net.arch.depth();
  for (int l = 0; l < depth; ++l) {
    Mat z = a * net.weights(l).transpose();
    z.rowwise() += net.biases(l).transpose();
    if (l + 1 < depth)
      apply_activation(net.arch, z);
    else
      apply_output_activation(net.arch, z);
    a = std::move(z);
  }
  return a;
}

Vec forward(const MlpNetwork& net, const Vec& x) {
  return forward(net, Mat(x.transpose())).row(0).transpose();
}

ForwardTrace forward_trace(const MlpNetwork& net, const Mat& X) {
  require(X.cols() == net.arch.input_dim,
          "forward_trace: input dimension mismatch");
  ForwardTrace tr;
  const int depth = net.arch.depth();
  tr.layer_inputs.reserve(static_cast<size_t>(depth));
  tr.pre_acts.reserve(static_cast<size_t>(depth));
  Mat a = X;
  for (int l = 0; l < depth; ++l) {
    tr.layer_inputs.push_back(a);
    Mat z = a * net.weights(l).transpose();
    z.rowwise() += net.biases(l).transpose();
    tr.pre_acts.push_back(z);
    if (l + 1 < depth)
      apply_activation(net.arch, z);
    else
      apply_output_activation(net.arch, z);
    a = std::move(z);
  }
  tr.output = a;
  return tr;
}

Vec backward(const MlpNetwork& net, const ForwardTrace& trace,
             const Mat& grad_out, Mat* grad_in) {
  const int depth = net.arch.depth();
  require(grad_out.rows() == trace.output.rows() &&
              grad_out.cols() == trace.output.cols(),
          "backward: output gradient shape mismatch");
  Vec grad = Vec::Zero(net.arch.param_count());
  // delta = dLoss/dPreActivation of the current layer
  Mat delta =
      grad_out.cwiseProduct(output_activation_deriv(net.arch,
                                                    trace.pre_acts.back()));
  for (int l = depth - 1; l >= 0; --l) {
    if (!delta.allFinite())
      throw NumericError("backward: non-finite gradient at layer " +
                         std::to_string(l));
    const Mat& a_in = trace.layer_inputs[static_cast<size_t>(l)];
    const int off = net.param_offset(l);
    const int fin = net.arch.fan_in(l);
    const int fout = net.arch.fan_out(l);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gW(grad.data() + off, fout, fin);
    gW = delta.transpose() * a_in;
    grad.segment(off + fin * fout, fout) = delta.colwise().sum().transpose();
    if (l > 0) {
      Mat upstream = delta * net.weights(l);
      delta = upstream.cwiseProduct(
          activation_deriv(net.arch, trace.pre_acts[static_cast<size_t>(l - 1)]));
    } else if (grad_in != nullptr) {
      *grad_in = delta * net.weights(0);
    }
  }
  return grad;
}

Vec backward(const MlpNetwork& net, const Vec& loss_grad_at_output,
             const Vec& x, Vec* grad_x) {
  require(loss_grad_at_output.size() == net.arch.output_dim,
          "backward: loss gradient length mismatch");
  ForwardTrace tr = forward_trace(net, Mat(x.transpose()));
  Mat gin;
  Vec g = backward(net, tr, Mat(loss_grad_at_output.transpose()),
                   grad_x != nullptr ? &gin : nullptr);
  if (grad_x != nullptr) *grad_x = gin.row(0).transpose();
  return g;
}

void clip_weights(MlpNetwork& net, double c) {
  require(c > 0.0, "clip_weights: c must be positive");
  net.params = net.params.cwiseMax(-c).cwiseMin(c);
}

namespace {

// Largest singular value by power iteration on W^T W.
double spectral_norm(const Eigen::Ref<const Mat>& W) {
  if (W.size() == 0) return 0.0;
  Vec v = Vec::Ones(W.cols());
  v.normalize();
  double sigma = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vec u = W * v;
    double n = u.norm();
    if (n == 0.0) return 0.0;
    Vec v_next = W.transpose() * (u / n);
    double sigma_next = v_next.norm();
    if (sigma_next == 0.0) return 0.0;
    v = v_next / sigma_next;
    if (std::abs(sigma_next - sigma) < 1e-10 * std::max(1.0, sigma_next)) {
      sigma = sigma_next;
      break;
    }
    sigma = sigma_next;
  }
  return sigma;
}

}  // namespace

double lipschitz_upper_bound(const MlpNetwork& net) {
  // Activation slopes are capped at 1, so the product of layer spectral
  // norms dominates the Lipschitz constant.
  double bound = 1.0;
  for (int l = 0; l < net.arch.depth(); ++l) {
    const auto Wmap = net.weights(l);
    bound *= spectral_norm(Mat(Wmap));
  }
  return bound;
}

void checkpoint_save(const MlpNetwork& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("checkpoint_save: cannot open " + path);
  out << "MODELv1\n";
  out << "in=" << net.arch.input_dim << " hidden=";
  for (size_t i = 0; i < net.arch.hidden_widths.size(); ++i) {
    if (i > 0) out << ',';
    out << net.arch.hidden_widths[i];
  }
  out << " out=" << net.arch.output_dim
      << " act=" << activation_name(net.arch.activation, net.arch.leaky_slope)
      << " outact=" << output_activation_name(net.arch.output_activation)
      << "\n";
  for (Eigen::Index i = 0; i < net.params.size(); ++i)
    out << format_double(net.params[i]) << "\n";
  out << "END\n";
}

namespace {

std::string take_field(const std::string& line, const std::string& key,
                       int lineno) {
  const std::string tag = key + "=";
  size_t pos = line.find(tag);
  if (pos == std::string::npos)
    throw ParseError("checkpoint: missing field '" + key + "'", lineno);
  pos += tag.size();
  size_t end = line.find(' ', pos);
  if (end == std::string::npos) end = line.size();
  return line.substr(pos, end - pos);
}

Activation parse_activation(const std::string& name, double& slope,
                            int lineno) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  if (name.rfind("leaky_relu(", 0) == 0 && name.back() == ')') {
    const std::string num = name.substr(11, name.size() - 12);
    auto res = std::from_chars(num.data(), num.data() + num.size(), slope);
    if (res.ec != std::errc())
      throw ParseError("checkpoint: bad leaky_relu slope '" + num + "'",
                       lineno);
    return Activation::kLeakyRelu;
  }
  throw ParseError("checkpoint: unknown activation '" + name + "'", lineno);
}

}  // namespace

MlpNetwork checkpoint_load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("checkpoint_load: cannot open " + path);
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line) || line != "MODELv1")
    throw ParseError("checkpoint: expected header 'MODELv1'", lineno);

  ++lineno;
  if (!std::getline(in, line))
    throw ParseError("checkpoint: missing architecture line", lineno);
  Architecture arch;
  arch.input_dim = std::stoi(take_field(line, "in", lineno));
  const std::string hidden = take_field(line, "hidden", lineno);
  if (!hidden.empty()) {
    std::stringstream ss(hidden);
    std::string tok;
    while (std::getline(ss, tok, ',')) arch.hidden_widths.push_back(std::stoi(tok));
  }
  arch.output_dim = std::stoi(take_field(line, "out", lineno));
  arch.activation =
      parse_activation(take_field(line, "act", lineno), arch.leaky_slope, lineno);
  const std::string outact = take_field(line, "outact", lineno);
  if (outact == "identity")
    arch.output_activation = OutputActivation::kIdentity;
  else if (outact == "tanh")
    arch.output_activation = OutputActivation::kTanh;
  else
    throw ParseError("checkpoint: unknown output activation '" + outact + "'",
                     lineno);
  arch.validate();

  MlpNetwork net = make_zero_network(arch);
  const Eigen::Index expected = net.params.size();
  Eigen::Index count = 0;
  bool saw_end = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line == "END") {
      saw_end = true;
      break;
    }
    if (count >= expected)
      throw ParseError("checkpoint: expected " + std::to_string(expected) +
                           " parameters, found more",
                       lineno);
    double v = 0.0;
    auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size())
      throw ParseError("checkpoint: bad parameter value '" + line + "'",
                       lineno);
    net.params[count++] = v;
  }
  if (!saw_end || count != expected)
    throw ParseError("checkpoint: expected " + std::to_string(expected) +
                         " parameters, found " + std::to_string(count),
                     lineno + 1);
  if (!net.params.allFinite())
    throw ParseError("checkpoint: non-finite parameter value", lineno);
  return net;
}

OptimizerState OptimizerState::make(OptimizerKind kind, double lr,
                                    int n_params) {
  require(lr > 0.0, "optimizer learning rate must be positive");
  OptimizerState st;
  st.kind = kind;
  st.learning_rate = lr;
  if (kind != OptimizerKind::kSgd) st.acc1 = Vec::Zero(n_params);
  if (kind == OptimizerKind::kAdam) st.acc2 = Vec::Zero(n_params);
  return st;
}

void OptimizerState::step(Vec& params, const Vec& grad) {
  require(grad.size() == params.size(), "optimizer: gradient size mismatch");
  constexpr double kEps = 1e-8;
  ++step_count;
  switch (kind) {
    case OptimizerKind::kSgd:
      params -= learning_rate * grad;
      break;
    case OptimizerKind::kRmsprop: {
      acc1 = 0.9 * acc1 + 0.1 * grad.cwiseProduct(grad);
      params -=
          learning_rate *
          grad.cwiseQuotient((acc1.array().sqrt() + kEps).matrix());
      break;
    }
    case OptimizerKind::kAdam: {
      constexpr double b1 = 0.9, b2 = 0.999;
      acc2 = b1 * acc2 + (1.0 - b1) * grad;
      acc1 = b2 * acc1 + (1.0 - b2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count));
      params -= learning_rate *
                (acc2 / c1).cwiseQuotient(
                    ((acc1 / c2).array().sqrt() + kEps).matrix());
      break;
    }
  }
}

EncoderDecoderSplit::EncoderDecoderSplit(const Architecture& arch, int l1)
    : full(arch), encoder_layers(l1), decoder_layers(arch.depth() - l1) {
  require(l1 >= 1 && l1 < arch.depth(),
          "encoder split must leave at least one layer on each side");
  // The encoder's last layer is a hidden layer of the full network, so its
  // activation must be expressible as an output activation of the sub-net.
  require(arch.activation != Activation::kLeakyRelu,
          "encoder split supports tanh/identity hidden activations only");
}

Architecture EncoderDecoderSplit::encoder_arch() const {
  Architecture a;
  a.input_dim = full.input_dim;
  a.hidden_widths.assign(full.hidden_widths.begin(),
                         full.hidden_widths.begin() + (encoder_layers - 1));
  a.output_dim = full.hidden_widths[static_cast<size_t>(encoder_layers - 1)];
  a.activation = full.activation;
  a.leaky_slope = full.leaky_slope;
  // The encoder ends mid-network, so its output passes through the hidden
  // activation, not the full network's output activation.
  a.output_activation = full.activation == Activation::kTanh
                            ? OutputActivation::kTanh
                            : OutputActivation::kIdentity;
  return a;
}

Architecture EncoderDecoderSplit::decoder_arch() const {
  Architecture a;
  a.input_dim = full.hidden_widths[static_cast<size_t>(encoder_layers - 1)];
  a.hidden_widths.assign(full.hidden_widths.begin() + encoder_layers,
                         full.hidden_widths.end());
  a.output_dim = full.output_dim;
  a.activation = full.activation;
  a.leaky_slope = full.leaky_slope;
  a.output_activation = full.output_activation;
  return a;
}

int EncoderDecoderSplit::encoder_param_count() const {
  return encoder_arch().param_count();
}

int EncoderDecoderSplit::decoder_param_count() const {
  return decoder_arch().param_count();
}

std::pair<Vec, Vec> EncoderDecoderSplit::split(const Vec& full_params) const {
  require(full_params.size() == full.param_count(),
          "split: parameter vector length mismatch");
  const int ne = encoder_param_count();
  return {full_params.head(ne), full_params.tail(full_params.size() - ne)};
}

Vec EncoderDecoderSplit::join(const Vec& omega, const Vec& theta) const {
  require(omega.size() == encoder_param_count() &&
              theta.size() == decoder_param_count(),
          "join: parameter vector length mismatch");
  Vec v(omega.size() + theta.size());
  v << omega, theta;
  return v;
}

std::string activation_name(Activation a, double slope) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kIdentity:
      return "identity";
    case Activation::kLeakyRelu:
      return "leaky_relu(" + format_double(slope) + ")";
  }
  return "identity";
}

std::string output_activation_name(OutputActivation a) {
  return a == OutputActivation::kTanh ? "tanh" : "identity";
}

}  // namespace alignlab
