#include "btabl/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "btabl/error.hpp"

namespace btabl::app {

using nlohmann::json;

model::Architecture RunConfig::architecture() const {
  model::Architecture a;
  a.d = feature_dims.size();
  a.t = window_length;
  a.hidden = hidden;
  a.d_out = d_out;
  a.t_out = t_out;
  a.activation = activation;
  return a;
}

lob::LoadOptions RunConfig::load_options() const {
  lob::LoadOptions o;
  o.orientation = orientation;
  o.window_length = window_length;
  o.horizon = horizon;
  o.dims = feature_dims;
  o.mapping = label_mapping;
  o.allow_unlabeled = true;
  return o;
}

lob::SplitOptions RunConfig::split_options() const {
  return lob::SplitOptions{train_frac, val_frac, test_days};
}

namespace {

void check(bool ok, const std::string& message) {
  if (!ok) fail(ErrorKind::config, message);
}

}  // namespace

void RunConfig::validate() const {
  check(!feature_dims.empty(), "feature_dims must not be empty");
  for (auto d : feature_dims)
    check(d < lob::kFeatureCount, "feature index " + std::to_string(d) + " outside [0,144)");
  check(window_length >= 1, "window_length must be >= 1");
  lob::horizon_slot(horizon);
  check(train_frac >= 0 && val_frac >= 0 && train_frac + val_frac <= 1.0 + 1e-12,
        "train_frac and val_frac must be non-negative and sum to at most 1");
  check(test_days >= 0, "test_days must be >= 0");
  check(label_mapping.is_bijection(), "label_mapping must be a permutation of {0,1,2}");
  check(d_out * t_out == lob::kClassCount, "d_out * t_out must equal the 3 classes");
  architecture().validate();
  check(lr > 0, "lr must be positive");
  if (optimizer == optim::Kind::vogn) check(lr <= 1.0, "VOGN lr must be in (0,1]");
  check(vogn_momentum >= 0 && vogn_momentum < 1, "vogn_momentum must be in [0,1)");
  check(h_decay >= 0 && h_decay <= 1, "h_decay must be in [0,1]");
  check(prior_precision > 0, "prior_precision must be positive");
  check(train_mc_samples >= 1, "train_mc_samples must be >= 1");
  check(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1,
        "ADAM moments must be in [0,1)");
  check(adam_eps > 0, "adam_eps must be positive");
  check(sgd_momentum >= 0 && sgd_momentum < 1, "sgd_momentum must be in [0,1)");
  check(dropout >= 0 && dropout < 1, "dropout must be in [0,1)");
  check(lr_factor > 0 && lr_factor <= 1, "lr_factor must be in (0,1]");
  check(lr_patience >= 1, "lr_patience must be >= 1");
  check(lr_min_delta >= 0, "lr_min_delta must be >= 0");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(checkpoint_every >= 1, "checkpoint_every must be >= 1");
  check(ns_validation >= 1 && ns_test >= 1, "ns_validation and ns_test must be >= 1");
}

json RunConfig::to_json() const {
  json j;
  j["data_dir"] = data_dir.string();
  j["orientation"] = lob::to_string(orientation);
  j["feature_dims"] = feature_dims;
  j["window_length"] = window_length;
  j["horizon"] = horizon;
  j["train_frac"] = train_frac;
  j["val_frac"] = val_frac;
  j["test_days"] = test_days;
  j["zscore"] = zscore;
  j["label_mapping"] = label_mapping.raw_to_index;
  j["class_names"] = label_mapping.class_names;
  j["hidden"] = json::array();
  for (const auto& [d, t] : hidden) j["hidden"].push_back({d, t});
  j["d_out"] = d_out;
  j["t_out"] = t_out;
  j["activation"] = model::to_string(activation);
  j["optimizer"] = optim::to_string(optimizer);
  j["lr"] = lr;
  j["vogn_momentum"] = vogn_momentum;
  j["h_decay"] = h_decay;
  j["prior_precision"] = prior_precision;
  j["warmup_steps"] = warmup_steps;
  j["train_mc_samples"] = train_mc_samples;
  j["adam_beta1"] = adam_beta1;
  j["adam_beta2"] = adam_beta2;
  j["adam_eps"] = adam_eps;
  j["sgd_momentum"] = sgd_momentum;
  j["dropout"] = dropout;
  j["lr_factor"] = lr_factor;
  j["lr_patience"] = lr_patience;
  j["lr_min_delta"] = lr_min_delta;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["checkpoint_every"] = checkpoint_every;
  j["ns_validation"] = ns_validation;
  j["ns_test"] = ns_test;
  j["seed"] = seed;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::config, "config must be a JSON object");
  RunConfig c;
  using Setter = std::function<void(const json&)>;
  auto size = [](std::size_t& dst) {
    return [&dst](const json& v) {
      if (!v.is_number_unsigned()) throw Error(ErrorKind::config, "expected a non-negative integer");
      dst = v.get<std::size_t>();
    };
  };
  auto real = [](double& dst) {
    return [&dst](const json& v) {
      if (!v.is_number()) throw Error(ErrorKind::config, "expected a number");
      dst = v.get<double>();
    };
  };
  auto integer = [](int& dst) {
    return [&dst](const json& v) {
      if (!v.is_number_integer()) throw Error(ErrorKind::config, "expected an integer");
      dst = v.get<int>();
    };
  };
  auto text = [](const json& v) {
    if (!v.is_string()) throw Error(ErrorKind::config, "expected a string");
    return v.get<std::string>();
  };

  const std::map<std::string, Setter> setters = {
      {"data_dir", [&](const json& v) { c.data_dir = text(v); }},
      {"orientation", [&](const json& v) { c.orientation = lob::parse_orientation(text(v)); }},
      {"feature_dims",
       [&](const json& v) {
         if (v.is_number_unsigned()) {
           c.feature_dims = lob::default_dims(v.get<std::size_t>());
         } else if (v.is_array()) {
           c.feature_dims.clear();
           for (const auto& e : v) {
             if (!e.is_number_unsigned()) throw Error(ErrorKind::config, "feature_dims entries must be indices");
             c.feature_dims.push_back(e.get<std::size_t>());
           }
         } else {
           throw Error(ErrorKind::config, "expected a count or an index list");
         }
       }},
      {"window_length", size(c.window_length)},
      {"horizon", integer(c.horizon)},
      {"train_frac", real(c.train_frac)},
      {"val_frac", real(c.val_frac)},
      {"test_days", integer(c.test_days)},
      {"zscore",
       [&](const json& v) {
         if (!v.is_boolean()) throw Error(ErrorKind::config, "expected a boolean");
         c.zscore = v.get<bool>();
       }},
      {"label_mapping",
       [&](const json& v) {
         if (!v.is_array() || v.size() != lob::kClassCount)
           throw Error(ErrorKind::config, "expected three class indices");
         for (std::size_t i = 0; i < lob::kClassCount; ++i) {
           if (!v[i].is_number_integer()) throw Error(ErrorKind::config, "expected integers");
           c.label_mapping.raw_to_index[i] = v[i].get<int>();
         }
       }},
      {"class_names",
       [&](const json& v) {
         if (!v.is_array() || v.size() != lob::kClassCount)
           throw Error(ErrorKind::config, "expected three class names");
         for (std::size_t i = 0; i < lob::kClassCount; ++i) c.label_mapping.class_names[i] = text(v[i]);
       }},
      {"hidden",
       [&](const json& v) {
         if (!v.is_array()) throw Error(ErrorKind::config, "expected a list of [rows, cols] pairs");
         c.hidden.clear();
         for (const auto& e : v) {
           if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned())
             throw Error(ErrorKind::config, "hidden layers are [rows, cols] pairs");
           c.hidden.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
         }
       }},
      {"d_out", size(c.d_out)},
      {"t_out", size(c.t_out)},
      {"activation", [&](const json& v) { c.activation = model::parse_activation(text(v)); }},
      {"optimizer", [&](const json& v) { c.optimizer = optim::parse_kind(text(v)); }},
      {"lr", real(c.lr)},
      {"vogn_momentum", real(c.vogn_momentum)},
      {"h_decay", real(c.h_decay)},
      {"prior_precision", real(c.prior_precision)},
      {"warmup_steps", size(c.warmup_steps)},
      {"train_mc_samples", size(c.train_mc_samples)},
      {"adam_beta1", real(c.adam_beta1)},
      {"adam_beta2", real(c.adam_beta2)},
      {"adam_eps", real(c.adam_eps)},
      {"sgd_momentum", real(c.sgd_momentum)},
      {"dropout", real(c.dropout)},
      {"lr_factor", real(c.lr_factor)},
      {"lr_patience", size(c.lr_patience)},
      {"lr_min_delta", real(c.lr_min_delta)},
      {"batch_size", size(c.batch_size)},
      {"epochs", size(c.epochs)},
      {"checkpoint_every", size(c.checkpoint_every)},
      {"ns_validation", size(c.ns_validation)},
      {"ns_test", size(c.ns_test)},
      {"seed",
       [&](const json& v) {
         if (!v.is_number_unsigned()) throw Error(ErrorKind::config, "expected a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
  };

  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorKind::config, "unknown config key '" + key + "'");
    try {
      it->second(value);
    } catch (const Error& e) {
      fail(ErrorKind::config, "config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::config, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::config, "config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!j.contains("data_dir")) fail(ErrorKind::config, "config must set data_dir");
  auto c = from_json(j);
  if (c.data_dir.is_relative()) c.data_dir = path.parent_path() / c.data_dir;
  return c;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::string RunConfig::hash() const {
  auto j = to_json();
  j.erase("epochs");
  j.erase("data_dir");
  return fnv1a_hex(j.dump());
}

}  // namespace btabl::app
