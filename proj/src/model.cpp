#include "btabl/model.hpp"

#include <algorithm>
#include <cmath>

#include "btabl/error.hpp"
#include "btabl/rng.hpp"

namespace btabl::model {

Activation parse_activation(const std::string& text) {
  if (text == "identity") return Activation::identity;
  if (text == "relu") return Activation::relu;
  fail(ErrorKind::config, "unknown activation '" + text + "'");
}

const char* to_string(Activation a) { return a == Activation::identity ? "identity" : "relu"; }

void TablShape::validate() const {
  if (d == 0 || t == 0 || d_out == 0 || t_out == 0)
    fail(ErrorKind::config, "TABL dimensions must all be >= 1");
}

TablParams TablParams::zeros(const TablShape& s) {
  s.validate();
  return TablParams{Matrix(s.d_out, s.d), Matrix(s.t, s.t), Matrix(s.t, s.t_out),
                    Matrix(s.d_out, s.t_out), 0.0};
}

double TablParams::effective_lambda() const { return std::clamp(lambda, 0.0, 1.0); }

std::vector<double> TablParams::flatten() const {
  std::vector<double> out;
  out.reserve(w1.size() + w.size() + w2.size() + b.size() + 1);
  for (const Matrix* m : {&w1, &w, &w2, &b}) out.insert(out.end(), m->data().begin(), m->data().end());
  out.push_back(lambda);
  return out;
}

TablParams TablParams::unflatten(std::span<const double> flat, const TablShape& shape) {
  if (flat.size() != shape.param_count()) {
    fail(ErrorKind::shape, "parameter vector has length " + std::to_string(flat.size()) +
                               ", expected " + std::to_string(shape.param_count()));
  }
  TablParams p = zeros(shape);
  std::size_t pos = 0;
  for (Matrix* m : {&p.w1, &p.w, &p.w2, &p.b}) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), m->size(), m->data().begin());
    pos += m->size();
  }
  p.lambda = flat[pos];
  return p;
}

ForwardResult tabl_forward(const Matrix& x, const TablParams& params, const TablShape& shape) {
  if (x.rows() != shape.d || x.cols() != shape.t) {
    fail(ErrorKind::shape, "TABL input is " + x.shape_string() + ", expected " +
                               std::to_string(shape.d) + "x" + std::to_string(shape.t));
  }
  ForwardResult r;
  auto& c = r.cache;
  c.x = x;
  c.lambda_raw = params.lambda;
  c.lambda = params.effective_lambda();
  c.activation = shape.activation;
  c.x_bar = matmul(params.w1, x);
  c.e = matmul(c.x_bar, params.w);
  c.a = row_softmax(c.e);
  c.x_tilde = Matrix(c.x_bar.rows(), c.x_bar.cols());
  {
    auto xt = c.x_tilde.data();
    auto xb = c.x_bar.data();
    auto a = c.a.data();
    for (std::size_t i = 0; i < xt.size(); ++i)
      xt[i] = c.lambda * (xb[i] * a[i]) + (1.0 - c.lambda) * xb[i];
  }
  c.z = add(matmul(c.x_tilde, params.w2), params.b);
  c.y = c.z;
  if (shape.activation == Activation::relu)
    for (double& v : c.y.data()) v = std::max(v, 0.0);
  r.logits.assign(c.y.data().begin(), c.y.data().end());
  c.log_probs = log_softmax(r.logits);
  return r;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  require(!logits.empty(), ErrorKind::shape, "log_softmax of empty vector");
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - peak);
  const double lse = peak + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

LossResult log_softmax_nll(std::span<const double> logits, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    fail(ErrorKind::index, "label " + std::to_string(label) + " out of range [0," +
                               std::to_string(logits.size()) + ")");
  }
  LossResult r;
  r.log_probs = log_softmax(logits);
  r.loss = -r.log_probs[static_cast<std::size_t>(label)];
  return r;
}

TablGradient tabl_backward(const ForwardCache& c, std::span<const double> d_output,
                           const TablParams& params) {
  const std::size_t d_out = c.z.rows();
  const std::size_t t_out = c.z.cols();
  const std::size_t t = c.x_bar.cols();
  require(d_output.size() == d_out * t_out, ErrorKind::shape, "upstream gradient length mismatch");

  Matrix dz(d_out, t_out, std::vector<double>(d_output.begin(), d_output.end()));
  if (c.activation == Activation::relu) {
    auto g = dz.data();
    auto z = c.z.data();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (z[i] <= 0.0) g[i] = 0.0;
  }

  const Matrix dw2 = matmul(transpose(c.x_tilde), dz);
  const Matrix dx_tilde = matmul(dz, transpose(params.w2));

  // X~ = lambda (X_bar . A) + (1 - lambda) X_bar
  double dlambda = 0.0;
  Matrix dx_bar(c.x_bar.rows(), t);
  Matrix da(c.x_bar.rows(), t);
  {
    auto g = dx_tilde.data();
    auto xb = c.x_bar.data();
    auto a = c.a.data();
    auto dxb = dx_bar.data();
    auto dav = da.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      dlambda += g[i] * (xb[i] * a[i] - xb[i]);
      dxb[i] = g[i] * (c.lambda * a[i] + (1.0 - c.lambda));
      dav[i] = c.lambda * g[i] * xb[i];
    }
  }

  // Row-wise softmax Jacobian: dE_ij = A_ij (dA_ij - sum_k dA_ik A_ik)
  Matrix de(c.e.rows(), t);
  for (std::size_t i = 0; i < de.rows(); ++i) {
    auto a = c.a.row(i);
    auto g = da.row(i);
    double inner = 0.0;
    for (std::size_t k = 0; k < t; ++k) inner += g[k] * a[k];
    auto out = de.row(i);
    for (std::size_t j = 0; j < t; ++j) out[j] = a[j] * (g[j] - inner);
  }

  const Matrix dw = matmul(transpose(c.x_bar), de);
  dx_bar = add(dx_bar, matmul(de, transpose(params.w)));
  const Matrix dw1 = matmul(dx_bar, transpose(c.x));

  // Box constraint on lambda: block the gradient only when descent would push
  // the stored value further outside [0, 1].
  if ((c.lambda_raw <= 0.0 && dlambda > 0.0) || (c.lambda_raw >= 1.0 && dlambda < 0.0))
    dlambda = 0.0;

  TablGradient out;
  out.params.reserve(params.w1.size() + params.w.size() + params.w2.size() + params.b.size() + 1);
  for (const Matrix* m : std::initializer_list<const Matrix*>{&dw1, &dw, &dw2, &dz})
    out.params.insert(out.params.end(), m->data().begin(), m->data().end());
  out.params.push_back(dlambda);
  out.dx = matmul(transpose(params.w1), dx_bar);
  return out;
}

std::vector<double> tabl_backward_per_sample(const ForwardCache& cache, int label,
                                             const TablParams& params) {
  const std::size_t classes = cache.log_probs.size();
  require(label >= 0 && static_cast<std::size_t>(label) < classes, ErrorKind::index,
          "label out of range");
  std::vector<double> dlogits(classes);
  for (std::size_t k = 0; k < classes; ++k) dlogits[k] = std::exp(cache.log_probs[k]);
  dlogits[static_cast<std::size_t>(label)] -= 1.0;
  return tabl_backward(cache, dlogits, params).params;
}

std::vector<BilinearShape> Architecture::hidden_shapes() const {
  std::vector<BilinearShape> shapes;
  std::size_t rows = d;
  std::size_t cols = t;
  for (const auto& [ho, to] : hidden) {
    shapes.push_back({rows, cols, ho, to});
    rows = ho;
    cols = to;
  }
  return shapes;
}

TablShape Architecture::tabl_shape() const {
  std::size_t rows = d;
  std::size_t cols = t;
  if (!hidden.empty()) {
    rows = hidden.back().first;
    cols = hidden.back().second;
  }
  return TablShape{rows, cols, d_out, t_out, activation};
}

std::size_t Architecture::param_count() const {
  std::size_t p = tabl_shape().param_count();
  for (const auto& h : hidden_shapes()) p += h.param_count();
  return p;
}

void Architecture::validate() const {
  if (d == 0 || t == 0 || d_out == 0 || t_out == 0)
    fail(ErrorKind::config, "architecture dimensions must be >= 1");
  for (const auto& [ho, to] : hidden)
    if (ho == 0 || to == 0) fail(ErrorKind::config, "hidden layer dimensions must be >= 1");
  if (classes() < 2) fail(ErrorKind::config, "need at least two output classes");
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::uint64_t seed) {
  require(rate >= 0.0 && rate < 1.0, ErrorKind::config, "dropout rate must be in [0,1)");
  Matrix m(rows, cols, 1.0);
  if (rate == 0.0) return m;
  Rng rng(seed);
  const double keep = 1.0 / (1.0 - rate);
  for (double& v : m.data()) v = rng.uniform() < rate ? 0.0 : keep;
  return m;
}

Network::Network(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  hidden_ = arch_.hidden_shapes();
  std::size_t pos = 0;
  for (const auto& h : hidden_) {
    hidden_offsets_.push_back(pos);
    pos += h.param_count();
  }
  tabl_offset_ = pos;
  param_count_ = pos + arch_.tabl_shape().param_count();
}

std::pair<std::size_t, std::size_t> Network::tabl_input_shape() const {
  const auto s = arch_.tabl_shape();
  return {s.d, s.t};
}

namespace {

struct BilinearView {
  Matrix u;
  Matrix v;
  Matrix b;
};

BilinearView bilinear_params(std::span<const double> flat, const BilinearShape& s) {
  BilinearView p{Matrix(s.d_out, s.d), Matrix(s.t, s.t_out), Matrix(s.d_out, s.t_out)};
  std::size_t pos = 0;
  for (Matrix* m : {&p.u, &p.v, &p.b}) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), m->size(), m->data().begin());
    pos += m->size();
  }
  return p;
}

}  // namespace

Network::Pass Network::forward(const Matrix& x, std::span<const double> theta,
                               const Matrix* mask) const {
  if (theta.size() != param_count_) {
    fail(ErrorKind::shape, "parameter vector has length " + std::to_string(theta.size()) +
                               ", expected " + std::to_string(param_count_));
  }
  if (x.rows() != arch_.d || x.cols() != arch_.t) {
    fail(ErrorKind::shape, "input is " + x.shape_string() + ", expected " +
                               std::to_string(arch_.d) + "x" + std::to_string(arch_.t));
  }
  Pass pass;
  Matrix current = x;
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const auto p = bilinear_params(theta.subspan(hidden_offsets_[l], hidden_[l].param_count()),
                                   hidden_[l]);
    HiddenCache hc;
    hc.x = current;
    hc.xv = matmul(current, p.v);
    hc.z = add(matmul(p.u, hc.xv), p.b);
    current = hc.z;
    for (double& v : current.data()) v = std::max(v, 0.0);
    pass.hidden.push_back(std::move(hc));
  }
  if (mask) {
    current = hadamard(current, *mask);
    pass.mask = *mask;
  }
  const auto shape = arch_.tabl_shape();
  const auto params = TablParams::unflatten(theta.subspan(tabl_offset_), shape);
  auto fr = tabl_forward(current, params, shape);
  pass.logits = std::move(fr.logits);
  pass.log_probs = fr.cache.log_probs;
  pass.tabl = std::move(fr.cache);
  return pass;
}

std::vector<double> Network::backward(const Pass& pass, int label,
                                      std::span<const double> theta) const {
  const std::size_t classes = pass.log_probs.size();
  require(label >= 0 && static_cast<std::size_t>(label) < classes, ErrorKind::index,
          "label out of range");
  std::vector<double> dlogits(classes);
  for (std::size_t k = 0; k < classes; ++k) dlogits[k] = std::exp(pass.log_probs[k]);
  dlogits[static_cast<std::size_t>(label)] -= 1.0;

  const auto shape = arch_.tabl_shape();
  const auto params = TablParams::unflatten(theta.subspan(tabl_offset_), shape);
  auto tg = tabl_backward(pass.tabl, dlogits, params);

  std::vector<double> grad(param_count_, 0.0);
  std::copy(tg.params.begin(), tg.params.end(), grad.begin() + static_cast<std::ptrdiff_t>(tabl_offset_));
  if (hidden_.empty()) return grad;

  Matrix upstream = std::move(tg.dx);
  if (pass.mask) upstream = hadamard(upstream, *pass.mask);
  for (std::size_t l = hidden_.size(); l-- > 0;) {
    const auto& hc = pass.hidden[l];
    const auto p = bilinear_params(theta.subspan(hidden_offsets_[l], hidden_[l].param_count()),
                                   hidden_[l]);
    Matrix dz = upstream;
    {
      auto g = dz.data();
      auto z = hc.z.data();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (z[i] <= 0.0) g[i] = 0.0;
    }
    const Matrix du = matmul(dz, transpose(hc.xv));
    const Matrix dv = matmul(transpose(matmul(p.u, hc.x)), dz);
    auto out = grad.begin() + static_cast<std::ptrdiff_t>(hidden_offsets_[l]);
    for (const Matrix* m : std::initializer_list<const Matrix*>{&du, &dv, &dz}) out = std::copy(m->data().begin(), m->data().end(), out);
    if (l > 0) upstream = matmul(matmul(transpose(p.u), dz), transpose(p.v));
  }
  return grad;
}

std::vector<double> Network::probabilities(const Matrix& x, std::span<const double> theta,
                                           const Matrix* mask) const {
  auto pass = forward(x, theta, mask);
  std::vector<double> probs(pass.log_probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = std::exp(pass.log_probs[k]);
  return probs;
}

std::vector<double> Network::init_params(std::uint64_t seed) const {
  Rng rng(derive_seed(seed, {stream::init}));
  std::vector<double> theta(param_count_, 0.0);
  auto fill = [&](std::size_t pos, std::size_t n, double sd) {
    for (std::size_t i = 0; i < n; ++i) theta[pos + i] = sd * rng.normal();
  };
  for (std::size_t l = 0; l < hidden_.size(); ++l) {
    const auto& h = hidden_[l];
    std::size_t pos = hidden_offsets_[l];
    fill(pos, h.d_out * h.d, std::sqrt(2.0 / static_cast<double>(h.d)));
    pos += h.d_out * h.d;
    fill(pos, h.t * h.t_out, std::sqrt(1.0 / static_cast<double>(h.t)));
  }
  const auto s = arch_.tabl_shape();
  std::size_t pos = tabl_offset_;
  fill(pos, s.d_out * s.d, std::sqrt(1.0 / static_cast<double>(s.d)));
  pos += s.d_out * s.d;
  fill(pos, s.t * s.t, std::sqrt(1.0 / static_cast<double>(s.t)));
  pos += s.t * s.t;
  fill(pos, s.t * s.t_out, std::sqrt(1.0 / static_cast<double>(s.t)));
  theta[param_count_ - 1] = 0.5;
  return theta;
}

BatchResult batch_forward_backward(const Network& net,
                                   std::span<const lob::LobWindow* const> batch,
                                   std::span<const double> theta,
                                   const std::optional<DropoutSpec>& dropout) {
  require(!batch.empty(), ErrorKind::contract, "batch_forward_backward: empty batch");
  const std::size_t p = net.param_count();
  BatchResult r;
  r.per_sample = Matrix(batch.size(), p);
  r.mean_grad.assign(p, 0.0);
  const auto [mr, mc] = net.tabl_input_shape();
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& w = *batch[i];
    require(w.label.has_value(), ErrorKind::data, "training window without a label");
    std::optional<Matrix> mask;
    if (dropout && dropout->rate > 0.0)
      mask = dropout_mask(mr, mc, dropout->rate, derive_seed(dropout->seed, {stream::dropout, i}));
    const auto pass = net.forward(w.x, theta, mask ? &*mask : nullptr);
    loss_sum += -pass.log_probs[static_cast<std::size_t>(*w.label)];
    const auto g = net.backward(pass, *w.label, theta);
    std::copy(g.begin(), g.end(), r.per_sample.row(i).begin());
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = r.per_sample.row(i);
    for (std::size_t j = 0; j < p; ++j) r.mean_grad[j] += row[j];
  }
  const double m = static_cast<double>(batch.size());
  for (double& g : r.mean_grad) g /= m;
  r.mean_loss = loss_sum / m;
  return r;
}

BatchResult batch_forward_backward(const Network& net, std::span<const lob::LobWindow> batch,
                                   std::span<const double> theta) {
  std::vector<const lob::LobWindow*> ptrs;
  ptrs.reserve(batch.size());
  for (const auto& w : batch) ptrs.push_back(&w);
  return batch_forward_backward(net, ptrs, theta);
}

}  // namespace btabl::model
