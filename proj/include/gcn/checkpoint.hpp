#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gcn/aux.hpp"
#include "gcn/error.hpp"
#include "gcn/io.hpp"
#include "gcn/lstm.hpp"
#include "gcn/utf8.hpp"
#include "gcn/vocabulary.hpp"

// File layout:
//   "GCN1" | u32 LE header length | UTF-8 JSON header | float32 LE payload
// The header holds the model config, vocabulary, aux schema, training
// metadata and a manifest of (name, shape, offset, bytes) for every array in
// ModelParameters::visit_named order. It also carries an FNV-1a checksum of
// the payload and one of itself (computed with the checksum field removed).

namespace gcn {

inline constexpr std::string_view kCheckpointMagic = "GCN1";

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t steps = 0;
  std::string rng = "mt19937_64";
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  ModelParameters<float> model;
  Vocabulary vocab;
  AuxSchema schema;
  CheckpointMeta meta;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

inline nlohmann::ordered_json schema_to_json(const AuxSchema& schema) {
  auto slots = nlohmann::ordered_json::array();
  for (const auto& s : schema.slots()) {
    nlohmann::ordered_json j;
    j["kind"] = slot_name(s.kind);
    if (s.kind == SlotKind::Rating) {
      j["rating_lo"] = s.rating_lo;
      j["rating_hi"] = s.rating_hi;
    } else {
      j["labels"] = s.labels;
    }
    slots.push_back(std::move(j));
  }
  return slots;
}

inline AuxSchema schema_from_json(const nlohmann::ordered_json& j) {
  std::vector<AuxSlot> slots;
  for (const auto& js : j) {
    AuxSlot s;
    s.kind = slot_kind_from_name(js.at("kind").get<std::string>());
    if (s.kind == SlotKind::Rating) {
      s.rating_lo = js.at("rating_lo").get<double>();
      s.rating_hi = js.at("rating_hi").get<double>();
    } else {
      s.labels = js.at("labels").get<std::vector<std::string>>();
    }
    slots.push_back(std::move(s));
  }
  return AuxSchema(std::move(slots));
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& ck) {
  const auto& cfg = ck.model.config;
  if (cfg.vocab_size != ck.vocab.size()) throw ArgumentError("model vocabulary size does not match vocabulary");
  if (cfg.aux_dim != ck.schema.total_dim()) throw ArgumentError("model aux dim does not match schema");

  std::string payload;
  payload.reserve(ck.model.parameter_count() * 4);
  auto manifest = nlohmann::ordered_json::array();
  ck.model.visit_named([&](const std::string& name, const auto& a) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["shape"] = {a.rows(), a.cols()};
    e["offset"] = payload.size();
    e["bytes"] = static_cast<std::size_t>(a.size()) * 4;
    manifest.push_back(std::move(e));
    // Column-major element order, as Eigen stores it.
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const float f = a(r, c);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32(payload, bits);
      }
  });

  nlohmann::ordered_json h;
  h["format"] = std::string(kCheckpointMagic);
  h["config"] = {{"vocab_size", cfg.vocab_size}, {"aux_dim", cfg.aux_dim}, {"hidden", cfg.hidden}, {"layers", cfg.layers}};
  auto symbols = nlohmann::ordered_json::array();
  for (char32_t cp : ck.vocab.characters()) symbols.push_back(utf8::encode(std::u32string(1, cp)));
  h["vocabulary"] = std::move(symbols);
  h["schema"] = detail::schema_to_json(ck.schema);
  h["meta"] = {{"seed", ck.meta.seed}, {"steps", ck.meta.steps}, {"rng", ck.meta.rng}, {"extra", ck.meta.extra}};
  h["dtype"] = "float32-le";
  h["arrays"] = std::move(manifest);
  h["payload_bytes"] = payload.size();
  h["payload_fnv1a"] = detail::hex64(detail::fnv1a(payload));
  h["header_fnv1a"] = detail::hex64(detail::fnv1a(h.dump()));
  const std::string header = h.dump();

  std::string out(kCheckpointMagic);
  detail::put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out += payload;
  return out;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  io::write_atomic(path, serialize_checkpoint(ck));
}

inline Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 8) throw CheckpointTruncatedError("checkpoint shorter than its fixed preamble");
  if (bytes.substr(0, 4) != kCheckpointMagic)
    throw CheckpointVersionError("unsupported checkpoint format tag '" + std::string(bytes.substr(0, 4)) + "'");
  const std::uint32_t header_len = detail::get_u32(bytes, 4);
  if (8 + static_cast<std::size_t>(header_len) > bytes.size()) throw CheckpointTruncatedError("checkpoint header is truncated");
  const std::string_view header = bytes.substr(8, header_len);
  const std::string_view payload = bytes.substr(8 + header_len);

  nlohmann::ordered_json h;
  try {
    h = nlohmann::ordered_json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointHeaderError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  Checkpoint ck;
  std::vector<nlohmann::ordered_json> arrays;
  std::size_t payload_bytes = 0;
  std::string payload_sum;
  try {
    if (!h.is_object()) throw CheckpointHeaderError("checkpoint header is not an object");
    const std::string recorded = h.at("header_fnv1a").get<std::string>();
    auto unsummed = h;
    unsummed.erase("header_fnv1a");
    if (detail::hex64(detail::fnv1a(unsummed.dump())) != recorded) throw CheckpointHeaderError("checkpoint header checksum mismatch");
    if (h.at("format").get<std::string>() != kCheckpointMagic)
      throw CheckpointVersionError("header format tag is '" + h.at("format").get<std::string>() + "'");
    if (h.at("dtype").get<std::string>() != "float32-le") throw CheckpointHeaderError("unsupported payload dtype");

    const auto& c = h.at("config");
    ck.model.config = {c.at("vocab_size").get<int>(), c.at("aux_dim").get<int>(), c.at("hidden").get<int>(),
                       c.at("layers").get<int>()};
    std::vector<char32_t> chars;
    for (const auto& s : h.at("vocabulary")) {
      auto cps = utf8::decode(s.get<std::string>());
      if (cps.size() != 1) throw CheckpointHeaderError("vocabulary entry is not a single character");
      chars.push_back(cps[0]);
    }
    ck.vocab = Vocabulary(chars);
    if (ck.vocab.size() != static_cast<int>(chars.size()) + Vocabulary::kSpecials)
      throw CheckpointHeaderError("vocabulary has duplicate characters");
    ck.schema = detail::schema_from_json(h.at("schema"));
    const auto& m = h.at("meta");
    ck.meta.seed = m.at("seed").get<std::uint64_t>();
    ck.meta.steps = m.at("steps").get<std::uint64_t>();
    ck.meta.rng = m.at("rng").get<std::string>();
    ck.meta.extra = m.at("extra");
    for (const auto& a : h.at("arrays")) arrays.push_back(a);
    payload_bytes = h.at("payload_bytes").get<std::size_t>();
    payload_sum = h.at("payload_fnv1a").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointHeaderError(std::string("checkpoint header is incomplete: ") + e.what());
  } catch (const ArgumentError& e) {
    throw CheckpointHeaderError(std::string("checkpoint header is inconsistent: ") + e.what());
  }

  const auto& cfg = ck.model.config;
  if (cfg.vocab_size != ck.vocab.size()) throw CheckpointShapeError("config vocab size disagrees with the vocabulary");
  if (cfg.aux_dim != ck.schema.total_dim()) throw CheckpointShapeError("config aux dim disagrees with the schema");
  try {
    ck.model = ModelParameters<float>::zeros(cfg);
  } catch (const ArgumentError& e) {
    throw CheckpointShapeError(e.what());
  }

  if (payload.size() < payload_bytes) throw CheckpointTruncatedError("checkpoint payload is truncated");
  if (payload.size() > payload_bytes) throw CheckpointShapeError("checkpoint has trailing bytes after the payload");
  if (detail::hex64(detail::fnv1a(payload)) != payload_sum) throw CheckpointHeaderError("checkpoint payload checksum mismatch");

  std::size_t k = 0;
  std::size_t expected_offset = 0;
  ck.model.visit_named([&](const std::string& name, auto& a) {
    if (k >= arrays.size()) throw CheckpointShapeError("manifest is missing array " + name);
    const auto& e = arrays[k++];
    const auto shape = e.at("shape").template get<std::vector<long long>>();
    if (e.at("name").template get<std::string>() != name || shape.size() != 2 || shape[0] != a.rows() ||
        shape[1] != a.cols())
      throw CheckpointShapeError("manifest entry for " + name + " does not match the configured shape");
    const auto offset = e.at("offset").template get<std::size_t>();
    const auto nbytes = e.at("bytes").template get<std::size_t>();
    if (offset != expected_offset || nbytes != static_cast<std::size_t>(a.size()) * 4)
      throw CheckpointShapeError("manifest byte accounting for " + name + " is inconsistent");
    expected_offset += nbytes;
    std::size_t at = offset;
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r, at += 4) {
        const std::uint32_t bits = detail::get_u32(payload, at);
        float f;
        std::memcpy(&f, &bits, 4);
        a(r, c) = f;
      }
  });
  if (k != arrays.size()) throw CheckpointShapeError("manifest lists extra arrays");
  if (expected_offset != payload_bytes) throw CheckpointShapeError("manifest does not cover the payload");
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CheckpointError("no such checkpoint: " + path.string());
  return parse_checkpoint(io::read_file(path));
}

}  // namespace gcn
