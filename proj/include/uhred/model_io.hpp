#pragma once

// HSM1 model files (little-endian):
//   "HSM1" | u32 header length | UTF-8 JSON header | f32 parameters
// Parameters follow the declared layer order, each layer's weights
// (out-major) then its bias.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "uhred/binary.hpp"
#include "uhred/error.hpp"
#include "uhred/model.hpp"
#include "uhred/training.hpp"

namespace uhred {

inline constexpr char kModelMagic[4] = {'H', 'S', 'M', '1'};
inline constexpr int kModelFormatVersion = 1;

struct LoadedModel {
  ModelParams<float> params;
  ModelConfig config;
  ModelMeta meta;
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"split_fraction", c.split_fraction},
          {"seed", c.seed},
          {"input_scale", c.input_scale}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  c.adam.learning_rate = j.at("learning_rate").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.epsilon = j.at("epsilon").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.split_fraction = j.at("split_fraction").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.input_scale = j.at("input_scale").get<double>();
  return c;
}

inline nlohmann::json model_header(const ModelConfig& cfg, const ModelMeta& meta) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : layer_shapes(cfg)) {
    nlohmann::json l{{"name", s.name}, {"kind", to_string(s.kind)}};
    if (s.kind == LayerKind::dense)
      l["weight_shape"] = {s.out, s.in};
    else
      l["weight_shape"] = {s.out, s.in, s.kernel};
    l["bias_shape"] = {s.out};
    if (s.kind == LayerKind::conv) l["padding"] = (s.kernel - 1) / 2;
    if (s.kind == LayerKind::conv_transpose) {
      l["stride"] = kUpStride;
      l["padding"] = kUpPad;
    }
    layers.push_back(std::move(l));
  }
  return {{"format_version", kModelFormatVersion},
          {"n_i", cfg.n_i},
          {"n_l", cfg.n_l},
          {"pool_size", cfg.pool_size},
          {"layers", layers},
          {"activation", cfg.activation},
          {"input_scale", meta.input_scale},
          {"norm_factor", meta.norm_factor},
          {"seed", meta.seed},
          {"mode", to_string(meta.mode)},
          {"train", train_config_to_json(meta.train)}};
}

inline std::vector<std::uint8_t> encode_model(const ModelParams<float>& params, const ModelConfig& cfg,
                                              const ModelMeta& meta) {
  check_params(params, cfg);
  for (float v : params.flatten())
    if (!std::isfinite(v)) throw NumericError("save_model: non-finite parameter");
  const std::string header = model_header(cfg, meta).dump();
  std::vector<std::uint8_t> out;
  out.reserve(8 + header.size() + 4 * params.parameter_count());
  detail::put_bytes(out, {kModelMagic, 4});
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  detail::put_bytes(out, header);
  params.for_each_tensor([&](std::span<const float> t) {
    for (float v : t) detail::put_f32(out, v);
  });
  return out;
}

inline LoadedModel decode_model(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader in(bytes, "HSM1");
  if (in.remaining() < 4 || in.take(4) != std::string_view(kModelMagic, 4)) throw FormatError("HSM1: bad magic");
  const std::uint32_t header_len = in.u32();
  const auto text = in.take(header_len);

  LoadedModel m;
  try {
    const auto h = nlohmann::json::parse(text);
    if (h.at("format_version").get<int>() != kModelFormatVersion) throw FormatError("HSM1: unsupported format version");
    m.config.n_i = h.at("n_i").get<std::size_t>();
    m.config.n_l = h.at("n_l").get<std::size_t>();
    m.config.pool_size = h.at("pool_size").get<std::size_t>();
    m.config.activation = h.at("activation").get<std::string>();
    const auto& layers = h.at("layers");
    if (!layers.is_array() || layers.size() != kLayerCount) throw FormatError("HSM1: expected 10 layers");
    for (std::size_t s = 0; s < kStages; ++s) {
      const auto& shape = layers[s].at("weight_shape");
      if (layers[s].at("kind").get<std::string>() != "conv" || shape.size() != 3)
        throw FormatError("HSM1: layer " + std::to_string(s) + " is not a conv layer");
      const auto k = shape[2].get<std::size_t>();
      m.config.conv_layers.push_back({shape[1].get<std::size_t>(), shape[0].get<std::size_t>(), k, (k - 1) / 2});
    }
    m.meta.input_scale = h.at("input_scale").get<double>();
    m.meta.norm_factor = h.at("norm_factor").get<double>();
    m.meta.seed = h.at("seed").get<std::uint64_t>();
    m.meta.mode = parse_mode(h.at("mode").get<std::string>());
    m.meta.train = train_config_from_json(h.at("train"));

    try {
      m.config.validate();
    } catch (const ShapeError& e) {
      throw FormatError(std::string("HSM1: invalid architecture: ") + e.what());
    }
    // Every declared shape must agree with the architecture implied by n_i.
    const auto expected = layer_shapes(m.config);
    for (std::size_t i = 0; i < kLayerCount; ++i) {
      const auto& l = layers[i];
      const auto& s = expected[i];
      std::vector<std::size_t> want{s.out, s.in};
      if (s.kind != LayerKind::dense) want.push_back(s.kernel);
      if (l.at("kind").get<std::string>() != to_string(s.kind) ||
          l.at("weight_shape").get<std::vector<std::size_t>>() != want ||
          l.at("bias_shape").get<std::vector<std::size_t>>() != std::vector<std::size_t>{s.out})
        throw FormatError("HSM1: layer " + s.name + " shape disagrees with n_i/n_l");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("HSM1: bad header: ") + e.what());
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("HSM1: bad header: ") + e.what());
  }

  m.params = zero_params<float>(m.config);
  const std::size_t count = m.params.parameter_count();
  if (in.remaining() != 4 * count)
    throw FormatError("HSM1: parameter payload is " + std::to_string(in.remaining()) + " bytes, header implies " +
                      std::to_string(4 * count));
  m.params.for_each_tensor([&](std::span<float> t) {
    for (auto& v : t) {
      v = in.f32();
      if (!std::isfinite(v)) throw FormatError("HSM1: non-finite parameter");
    }
  });
  return m;
}

inline void save_model(const ModelParams<float>& params, const ModelConfig& cfg, const ModelMeta& meta,
                       const std::filesystem::path& path) {
  detail::write_file(path, encode_model(params, cfg, meta));
}

inline LoadedModel load_model(const std::filesystem::path& path) { return decode_model(detail::read_file(path)); }

} // namespace uhred
