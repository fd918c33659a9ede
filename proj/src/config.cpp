#include "spanline/config.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace spanline {

using nlohmann::json;

std::string to_string(HeadKind head) {
  switch (head) {
    case HeadKind::kBiaffine: return "biaffine";
    case HeadKind::kSeqSoftmax: return "seq_softmax";
    case HeadKind::kSeqCrf: return "seq_crf";
  }
  throw Error("invalid head kind");
}

HeadKind head_from_string(const std::string& name) {
  if (name == "biaffine") return HeadKind::kBiaffine;
  if (name == "seq_softmax") return HeadKind::kSeqSoftmax;
  if (name == "seq_crf") return HeadKind::kSeqCrf;
  throw Error("unknown head: '" + name +
              "' (expected biaffine | seq_softmax | seq_crf)");
}

std::string to_string(EmbeddingSource source) {
  return source == EmbeddingSource::kContextual ? "contextual" : "static";
}

EmbeddingSource embedding_from_string(const std::string& name) {
  if (name == "contextual") return EmbeddingSource::kContextual;
  if (name == "static") return EmbeddingSource::kStatic;
  throw Error("unknown embedding source: '" + name +
              "' (expected contextual | static)");
}

RepresentationConfig RunConfig::repr() const {
  RepresentationConfig r;
  r.d_ctx = repr_d_ctx;
  r.d_char_in = repr_d_char_in;
  r.kernel_sizes = repr_kernels;
  r.filters_per_kernel = repr_filters;
  r.d_pos = repr_d_pos;
  r.max_char_len = max_char_len;
  r.use_contextual = embedding == EmbeddingSource::kContextual;
  r.use_char = use_char;
  r.use_pos = use_pos;
  r.static_dim = repr_static_dim;
  return r;
}

EncoderConfig RunConfig::enc() const {
  EncoderConfig e;
  e.hidden = encoder_hidden;
  e.layers = encoder_layers;
  e.dropout = dropout;
  e.output_projection = encoder_output_projection;
  return e;
}

SpanHeadConfig RunConfig::span_head() const {
  SpanHeadConfig s;
  s.ffn_dim = ffn_dim;
  s.null_weight = null_weight;
  return s;
}

void RunConfig::validate() const {
  if (batch_size < 1) throw Error("batch_size must be positive");
  if (epochs < 1) throw Error("epochs must be positive");
  if (lr <= 0.0) throw Error("lr must be positive");
  if (weight_decay < 0.0) throw Error("weight_decay must be non-negative");
  if (adam_eps <= 0.0) throw Error("adam_eps must be positive");
  if (max_seq_len < 1) throw Error("max_seq_len must be positive");
  if (max_char_len < 1) throw Error("max_char_len must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must be in [0, 1)");
  if (val_fraction <= 0.0 || val_fraction >= 1.0)
    throw Error("val_fraction must be in (0, 1)");
  if (threads < 1) throw Error("threads must be positive");
  if (null_weight <= 0.0) throw Error("loss.null_weight must be positive");
  if (cv_k < 2) throw Error("cv.k must be at least 2");
  repr().validate();
  enc().validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config key " + key + ": expected a boolean, got '" + v + "'");
}

long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error("config key " + key + ": expected an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error("config key " + key + ": expected a number, got '" + v + "'");
  }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::istringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<int>(parse_int(key, item)));
  }
  if (out.empty()) throw Error("config key " + key + ": empty list");
  return out;
}

std::string int_list_to_string(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string double_to_string(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> kv;
  kv["seed"] = std::to_string(seed);
  kv["batch_size"] = std::to_string(batch_size);
  kv["epochs"] = std::to_string(epochs);
  kv["lr"] = double_to_string(lr);
  kv["weight_decay"] = double_to_string(weight_decay);
  kv["adam_eps"] = double_to_string(adam_eps);
  kv["adam_beta1"] = double_to_string(adam_beta1);
  kv["adam_beta2"] = double_to_string(adam_beta2);
  kv["grad_clip"] = double_to_string(grad_clip);
  kv["max_seq_len"] = std::to_string(max_seq_len);
  kv["max_char_len"] = std::to_string(max_char_len);
  kv["dropout"] = double_to_string(dropout);
  kv["val_fraction"] = double_to_string(val_fraction);
  kv["threads"] = std::to_string(threads);
  kv["head"] = to_string(head);
  kv["embedding"] = to_string(embedding);
  kv["use_pos"] = use_pos ? "true" : "false";
  kv["use_char"] = use_char ? "true" : "false";
  kv["use_bilstm"] = use_bilstm ? "true" : "false";
  kv["loss.null_weight"] = double_to_string(null_weight);
  kv["repr.d_ctx"] = std::to_string(repr_d_ctx);
  kv["repr.d_char_in"] = std::to_string(repr_d_char_in);
  kv["repr.kernels"] = int_list_to_string(repr_kernels);
  kv["repr.filters"] = int_list_to_string(repr_filters);
  kv["repr.d_pos"] = std::to_string(repr_d_pos);
  kv["repr.static_dim"] = std::to_string(repr_static_dim);
  kv["encoder.hidden"] = std::to_string(encoder_hidden);
  kv["encoder.layers"] = std::to_string(encoder_layers);
  kv["encoder.output_projection"] =
      encoder_output_projection ? "true" : "false";
  kv["ffn.dim"] = std::to_string(ffn_dim);
  kv["cv.k"] = std::to_string(cv_k);
  return kv;
}

void RunConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    const std::string v = trim(value);
    if (key == "seed")
      seed = static_cast<std::uint64_t>(parse_int(key, v));
    else if (key == "batch_size")
      batch_size = static_cast<int>(parse_int(key, v));
    else if (key == "epochs")
      epochs = static_cast<int>(parse_int(key, v));
    else if (key == "lr")
      lr = parse_double(key, v);
    else if (key == "weight_decay")
      weight_decay = parse_double(key, v);
    else if (key == "adam_eps")
      adam_eps = parse_double(key, v);
    else if (key == "adam_beta1")
      adam_beta1 = parse_double(key, v);
    else if (key == "adam_beta2")
      adam_beta2 = parse_double(key, v);
    else if (key == "grad_clip")
      grad_clip = parse_double(key, v);
    else if (key == "max_seq_len")
      max_seq_len = static_cast<int>(parse_int(key, v));
    else if (key == "max_char_len")
      max_char_len = static_cast<int>(parse_int(key, v));
    else if (key == "dropout")
      dropout = parse_double(key, v);
    else if (key == "val_fraction")
      val_fraction = parse_double(key, v);
    else if (key == "threads")
      threads = static_cast<int>(parse_int(key, v));
    else if (key == "head")
      head = head_from_string(v);
    else if (key == "embedding")
      embedding = embedding_from_string(v);
    else if (key == "use_pos")
      use_pos = parse_bool(key, v);
    else if (key == "use_char")
      use_char = parse_bool(key, v);
    else if (key == "use_bilstm")
      use_bilstm = parse_bool(key, v);
    else if (key == "loss.null_weight")
      null_weight = parse_double(key, v);
    else if (key == "repr.d_ctx")
      repr_d_ctx = static_cast<int>(parse_int(key, v));
    else if (key == "repr.d_char_in")
      repr_d_char_in = static_cast<int>(parse_int(key, v));
    else if (key == "repr.kernels")
      repr_kernels = parse_int_list(key, v);
    else if (key == "repr.filters")
      repr_filters = parse_int_list(key, v);
    else if (key == "repr.d_pos")
      repr_d_pos = static_cast<int>(parse_int(key, v));
    else if (key == "repr.static_dim")
      repr_static_dim = static_cast<int>(parse_int(key, v));
    else if (key == "encoder.hidden")
      encoder_hidden = static_cast<int>(parse_int(key, v));
    else if (key == "encoder.layers")
      encoder_layers = static_cast<int>(parse_int(key, v));
    else if (key == "encoder.output_projection")
      encoder_output_projection = parse_bool(key, v);
    else if (key == "ffn.dim")
      ffn_dim = static_cast<int>(parse_int(key, v));
    else if (key == "cv.k")
      cv_k = static_cast<int>(parse_int(key, v));
    else
      throw Error("unknown config key: '" + key + "'");
  }
}

RunConfig RunConfig::from_map(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  cfg.apply(kv);
  return cfg;
}

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    // Run-manifest JSON; the embedded "config" object holds the key-values.
    json j = json::parse(body);
    const json& cfg = j.contains("config") ? j.at("config") : j;
    std::map<std::string, std::string> kv;
    for (const auto& [key, value] : cfg.items())
      kv[key] = value.is_string() ? value.get<std::string>() : value.dump();
    return kv;
  }
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("config line " + std::to_string(line_no) +
                  ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw Error("config line " + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace spanline
