#include "btabl/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "btabl/error.hpp"
#include "btabl/model.hpp"

namespace btabl::app {

using nlohmann::json;

namespace {

// JSON has no infinity; non-finite entries are written as strings.
json encode(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double decode(const json& j, const char* what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  fail(ErrorKind::config, std::string("checkpoint field '") + what + "' is not a number");
}

json encode(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(encode(x));
  return a;
}

std::vector<double> decode_vector(const json& j, const char* what, std::size_t expected) {
  if (!j.is_array()) fail(ErrorKind::config, std::string("checkpoint field '") + what + "' is not an array");
  if (j.size() != expected)
    fail(ErrorKind::config, std::string("checkpoint field '") + what + "' has " +
                                std::to_string(j.size()) + " entries, expected " + std::to_string(expected));
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(decode(e, what));
  return out;
}

const json& field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorKind::config, std::string("checkpoint is missing '") + key + "'");
  return *it;
}

json block(const std::string& name, std::size_t rows, std::size_t cols) {
  return json{{"name", name}, {"rows", rows}, {"cols", cols}};
}

}  // namespace

json flattening_descriptor(const model::Architecture& arch) {
  json blocks = json::array();
  const auto hidden = arch.hidden_shapes();
  for (std::size_t l = 0; l < hidden.size(); ++l) {
    const auto& h = hidden[l];
    const std::string p = "hidden" + std::to_string(l) + ".";
    blocks.push_back(block(p + "U", h.d_out, h.d));
    blocks.push_back(block(p + "V", h.t, h.t_out));
    blocks.push_back(block(p + "B", h.d_out, h.t_out));
  }
  const auto t = arch.tabl_shape();
  blocks.push_back(block("tabl.W1", t.d_out, t.d));
  blocks.push_back(block("tabl.W", t.t, t.t));
  blocks.push_back(block("tabl.W2", t.t, t.t_out));
  blocks.push_back(block("tabl.B", t.d_out, t.t_out));
  blocks.push_back(block("tabl.lambda", 1, 1));
  return json{{"order", "row-major"}, {"blocks", blocks}};
}

const std::vector<double>& Checkpoint::center() const {
  return kind == optim::Kind::vogn ? vogn.mu : params;
}

json Checkpoint::to_json() const {
  const auto arch = config.architecture();
  json j;
  j["format_version"] = format_version;
  j["config"] = config.to_json();
  j["config_hash"] = config.hash();
  j["architecture"] = {{"d", arch.d},         {"t", arch.t},
                       {"hidden", config.to_json()["hidden"]},
                       {"d_out", arch.d_out}, {"t_out", arch.t_out},
                       {"activation", model::to_string(arch.activation)}};
  j["flattening"] = flattening_descriptor(arch);
  j["param_count"] = arch.param_count();
  j["optimizer"] = optim::to_string(kind);
  j["n_train"] = n_train;
  j["epoch"] = epoch;
  j["step"] = step;
  j["rng"] = {{"seed", config.seed}, {"epoch", epoch}, {"step", step}};
  j["lr"] = encode(lr);
  j["schedule"] = {{"best", encode(plateau_best)},
                   {"stale", plateau_stale},
                   {"reductions", plateau_reductions}};
  j["best_val_f1"] = encode(best_val_f1);
  j["best_epoch"] = best_epoch;

  json state;
  switch (kind) {
    case optim::Kind::vogn:
      state = {{"mu", encode(vogn.mu)},
               {"s", encode(vogn.s)},
               {"grad_avg", encode(vogn.grad_avg)},
               {"alpha_tilde", encode(vogn.alpha_tilde)},
               {"n", vogn.n},
               {"beta", encode(vogn.beta)},
               {"grad_momentum", encode(vogn.grad_momentum)},
               {"h_decay", encode(vogn.h_decay)},
               {"step", vogn.step}};
      break;
    case optim::Kind::adam:
    case optim::Kind::mcd:
      state = {{"params", encode(params)},
               {"m", encode(adam.m)},
               {"v", encode(adam.v)},
               {"beta1", encode(adam.beta1)},
               {"beta2", encode(adam.beta2)},
               {"lr", encode(adam.lr)},
               {"eps", encode(adam.eps)},
               {"step", adam.step}};
      break;
    case optim::Kind::sgd:
      state = {{"params", encode(params)},
               {"velocity", encode(sgd.velocity)},
               {"momentum", encode(sgd.momentum)},
               {"lr", encode(sgd.lr)}};
      break;
  }
  j["state"] = state;
  if (zscore) {
    j["zscore"] = {{"mean", encode(zscore->mean)}, {"std", encode(zscore->std)}};
  } else {
    j["zscore"] = nullptr;
  }
  return j;
}

Checkpoint Checkpoint::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::config, "checkpoint must be a JSON object");
  Checkpoint c;
  try {
    c.format_version = field(j, "format_version").get<int>();
    if (c.format_version != kCheckpointFormat)
      fail(ErrorKind::config, "unsupported checkpoint format " + std::to_string(c.format_version));
    c.config = RunConfig::from_json(field(j, "config"));
    const auto stored_hash = field(j, "config_hash").get<std::string>();
    if (stored_hash != c.config.hash())
      fail(ErrorKind::config, "checkpoint config hash does not match its embedded config");
    const auto arch = c.config.architecture();
    const std::size_t p = arch.param_count();
    if (field(j, "param_count").get<std::size_t>() != p)
      fail(ErrorKind::config, "checkpoint parameter count does not match its architecture");
    c.kind = optim::parse_kind(field(j, "optimizer").get<std::string>());
    if (c.kind != c.config.optimizer)
      fail(ErrorKind::config, "checkpoint optimizer differs from its config");
    c.n_train = field(j, "n_train").get<std::size_t>();
    c.epoch = field(j, "epoch").get<std::size_t>();
    c.step = field(j, "step").get<std::uint64_t>();
    c.lr = decode(field(j, "lr"), "lr");
    const auto& sched = field(j, "schedule");
    c.plateau_best = decode(field(sched, "best"), "schedule.best");
    c.plateau_stale = field(sched, "stale").get<std::size_t>();
    c.plateau_reductions = field(sched, "reductions").get<std::size_t>();
    c.best_val_f1 = decode(field(j, "best_val_f1"), "best_val_f1");
    c.best_epoch = field(j, "best_epoch").get<std::size_t>();

    const auto& st = field(j, "state");
    switch (c.kind) {
      case optim::Kind::vogn:
        c.vogn.mu = decode_vector(field(st, "mu"), "mu", p);
        c.vogn.s = decode_vector(field(st, "s"), "s", p);
        c.vogn.grad_avg = decode_vector(field(st, "grad_avg"), "grad_avg", p);
        c.vogn.alpha_tilde = decode(field(st, "alpha_tilde"), "alpha_tilde");
        c.vogn.n = field(st, "n").get<std::size_t>();
        c.vogn.beta = decode(field(st, "beta"), "beta");
        c.vogn.grad_momentum = decode(field(st, "grad_momentum"), "grad_momentum");
        c.vogn.h_decay = decode(field(st, "h_decay"), "h_decay");
        c.vogn.step = field(st, "step").get<std::uint64_t>();
        c.vogn.validate();
        for (double s : c.vogn.s)
          if (!(s >= 0.0)) fail(ErrorKind::config, "checkpoint VOGN scale vector has a negative entry");
        break;
      case optim::Kind::adam:
      case optim::Kind::mcd:
        c.params = decode_vector(field(st, "params"), "params", p);
        c.adam.m = decode_vector(field(st, "m"), "m", p);
        c.adam.v = decode_vector(field(st, "v"), "v", p);
        c.adam.beta1 = decode(field(st, "beta1"), "beta1");
        c.adam.beta2 = decode(field(st, "beta2"), "beta2");
        c.adam.lr = decode(field(st, "lr"), "lr");
        c.adam.eps = decode(field(st, "eps"), "eps");
        c.adam.step = field(st, "step").get<std::uint64_t>();
        break;
      case optim::Kind::sgd:
        c.params = decode_vector(field(st, "params"), "params", p);
        c.sgd.velocity = decode_vector(field(st, "velocity"), "velocity", p);
        c.sgd.momentum = decode(field(st, "momentum"), "momentum");
        c.sgd.lr = decode(field(st, "lr"), "lr");
        break;
    }
    const auto& z = field(j, "zscore");
    if (!z.is_null()) {
      const std::size_t d = c.config.feature_dims.size();
      c.zscore = lob::ZScoreStats{decode_vector(field(z, "mean"), "zscore.mean", d),
                                  decode_vector(field(z, "std"), "zscore.std", d)};
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::config, std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

std::string Checkpoint::dump() const { return to_json().dump(1) + "\n"; }

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto text = dump();
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write checkpoint " + tmp.string());
    out << text;
    if (!out) fail(ErrorKind::io, "failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::config, "cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace btabl::app
