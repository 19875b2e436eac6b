#include "atr/model/weight_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>

namespace atr::model {
namespace {

struct NamedArray {
  std::string name;
  Matrix* matrix;
};

std::vector<NamedArray> array_order(ModelWeights& w) {
  std::vector<NamedArray> out{{"token_embedding", &w.token_embedding}};
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    auto& layer = w.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    out.push_back({p + "wq", &layer.wq});
    out.push_back({p + "wk", &layer.wk});
    out.push_back({p + "wv", &layer.wv});
    out.push_back({p + "wo", &layer.wo});
    if (w.config.feedforward) {
      out.push_back({p + "ff_in", &layer.ff_in});
      out.push_back({p + "ff_out", &layer.ff_out});
    }
  }
  out.push_back({"vocab_head", &w.vocab_head});
  return out;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f64(std::string& buf, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& buf, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  return v;
}

double get_f64(const std::string& buf, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_weights(const ModelWeights& weights, const std::filesystem::path& path) {
  weights.validate();
  ModelWeights copy = weights;
  auto arrays = array_order(copy);

  nlohmann::json header;
  header["config"] = to_json(weights.config);
  header["arrays"] = nlohmann::json::array();
  for (const auto& a : arrays) {
    header["arrays"].push_back({{"name", a.name}, {"rows", a.matrix->rows()}, {"cols", a.matrix->cols()}});
  }
  const std::string header_text = header.dump();

  std::string buf(kWeightMagic, 4);
  put_u32(buf, kWeightFormatVersion);
  put_u32(buf, static_cast<std::uint32_t>(header_text.size()));
  buf += header_text;
  for (const auto& a : arrays)
    for (double v : a.matrix->values()) put_f64(buf, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot open '" + path.string() + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw FileError("write failed for '" + path.string() + "'");
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path.string() + "'");
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kWeightMagic, 4) != 0) {
    throw BadMagicError("'" + path.string() + "' is not an ATRW weight file");
  }
  if (buf.size() < 12) throw TruncationError("weight file header is truncated");
  const std::uint32_t version = get_u32(buf, 4);
  if (version != kWeightFormatVersion) {
    throw VersionMismatchError("weight file version " + std::to_string(version) + ", expected " +
                               std::to_string(kWeightFormatVersion));
  }
  const std::uint32_t header_len = get_u32(buf, 8);
  if (buf.size() < 12 + static_cast<std::size_t>(header_len)) throw TruncationError("weight file header is truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weight file header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("config") || !header.contains("arrays")) {
    throw ParseError("weight file header needs 'config' and 'arrays'");
  }
  const ModelConfig config = config_from_json(header.at("config"));
  try {
    config.validate();
  } catch (const InvalidParameterError& e) {
    throw ShapeMismatchError(std::string("weight file config: ") + e.what());
  }

  ModelWeights w = ModelWeights::zeros(config);
  auto arrays = array_order(w);
  const auto& listed = header.at("arrays");
  if (!listed.is_array() || listed.size() != arrays.size()) {
    throw ShapeMismatchError("weight file lists " + std::to_string(listed.size()) + " arrays, config implies " +
                             std::to_string(arrays.size()));
  }
  std::size_t expected_values = 0;
  try {
    for (std::size_t i = 0; i < arrays.size(); ++i) {
      const auto& entry = listed[i];
      if (!entry.is_object()) throw ParseError("weight file array entry " + std::to_string(i) + " is not an object");
      if (entry.value("name", "") != arrays[i].name || entry.value("rows", std::size_t{0}) != arrays[i].matrix->rows() ||
          entry.value("cols", std::size_t{0}) != arrays[i].matrix->cols()) {
        throw ShapeMismatchError("array " + std::to_string(i) + " (" + entry.dump() + ") does not match config shape " +
                                 arrays[i].name + " " + std::to_string(arrays[i].matrix->rows()) + "x" +
                                 std::to_string(arrays[i].matrix->cols()));
      }
      expected_values += arrays[i].matrix->size();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("weight file array list: ") + e.what());
  }

  std::size_t at = 12 + header_len;
  const std::size_t payload = buf.size() - at;
  if (payload < expected_values * 8) {
    throw TruncationError("weight payload has " + std::to_string(payload) + " bytes, expected " +
                          std::to_string(expected_values * 8));
  }
  if (payload > expected_values * 8) throw ShapeMismatchError("weight payload has trailing bytes");
  for (auto& a : arrays) {
    for (double& v : a.matrix->values()) {
      v = get_f64(buf, at);
      at += 8;
    }
  }
  w.validate();
  return w;
}

}  // namespace atr::model
