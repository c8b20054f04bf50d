#include "distillnn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "distillnn/errors.hpp"

namespace distillnn {

namespace {

constexpr const char* kFormat = "distillnn-checkpoint";
constexpr int kVersion = 1;
constexpr const char* kMetaPrefix = "meta.";

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffU));
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

std::string describe(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer))
    return "dense " + std::to_string(d->in()) + " " + std::to_string(d->out());
  if (const auto* p = std::get_if<DropoutLayer>(&layer)) return "dropout " + format_double(p->rate);
  if (std::holds_alternative<ReluLayer>(layer)) return "relu";
  return "softmax";
}

Layer parse_layer(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  if (kind == "dense") {
    std::size_t a = 0, b = 0;
    if (!(in >> a >> b)) throw ContractError("bad dense layer entry '" + text + "'");
    return DenseLayer{Tensor({a, b}), Tensor({b})};
  }
  if (kind == "dropout") {
    std::string rate;
    in >> rate;
    return DropoutLayer{parse_double(rate)};
  }
  if (kind == "relu") return ReluLayer{};
  if (kind == "softmax") return SoftmaxLayer{};
  throw ContractError("unknown layer kind '" + kind + "'");
}

}  // namespace

std::filesystem::path params_path(const std::filesystem::path& manifest) {
  std::filesystem::path p = manifest;
  p += ".params";
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const MlpModel& model, const KeyValues& meta) {
  KeyValues kv;
  kv.set("format", kFormat);
  kv.set("version", kVersion);
  kv.set("params_file", params_path(path).filename().string());
  kv.set("mode", model.mode() == Mode::train ? "train" : "eval");
  kv.set("mc_dropout", model.mc_dropout());
  kv.set("layer_count", static_cast<std::uint64_t>(model.layers().size()));
  for (std::size_t i = 0; i < model.layers().size(); ++i)
    kv.set("layer." + std::to_string(i), describe(model.layers()[i]));
  std::uint64_t count = 0;
  std::string blob;
  for (const Tensor* p : model.parameters()) {
    for (double v : p->data()) put_f64(blob, v);
    count += p->size();
  }
  kv.set("param_count", count);
  for (const auto& [k, v] : meta.entries()) kv.set(kMetaPrefix + k, v);

  write_file_atomic(params_path(path), blob);
  kv.write(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ContractError("checkpoint not found: " + path.string());
  const KeyValues kv = KeyValues::read(path);
  if (kv.at("format") != kFormat) throw ContractError(path.string() + " is not a distillnn checkpoint");
  if (kv.get_int("version") != kVersion) throw ContractError("unsupported checkpoint version");

  std::vector<Layer> layers;
  const std::uint64_t n = kv.get_uint("layer_count");
  for (std::uint64_t i = 0; i < n; ++i) layers.push_back(parse_layer(kv.at("layer." + std::to_string(i))));
  Checkpoint ck{MlpModel(std::move(layers)), {}};
  ck.model.set_mode(kv.at("mode") == "train" ? Mode::train : Mode::eval);
  ck.model.set_mc_dropout(kv.get_bool("mc_dropout"));

  const auto file = path.parent_path() / kv.at("params_file");
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ContractError("cannot open parameter file " + file.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::uint64_t expected = kv.get_uint("param_count");
  if (expected != ck.model.parameter_count() || blob.size() != expected * 8)
    throw ContractError("parameter file size does not match manifest");
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  std::size_t offset = 0;
  for (Tensor* p : ck.model.parameters())
    for (double& v : p->data()) {
      v = get_f64(bytes + offset);
      offset += 8;
    }

  const std::string prefix = kMetaPrefix;
  for (const auto& [k, v] : kv.entries())
    if (k.rfind(prefix, 0) == 0) ck.meta.set(k.substr(prefix.size()), v);
  return ck;
}

}  // namespace distillnn
