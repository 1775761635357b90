#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mulopt/error.hpp"
#include "mulopt/profile.hpp"
#include "mulopt/tree.hpp"

namespace mulopt {

// Serializable design: the assigned tree plus free-form metadata (name, seed,
// provenance, and anything else a caller wants to keep).
struct DesignDoc {
  StagedTree tree;
  nlohmann::json meta = nlohmann::json::object();

  const PPProfile& profile() const { return tree.profile; }
  CompressorCounts counts() const { return tree.column_sums(); }

  friend bool operator==(const DesignDoc&, const DesignDoc&) = default;
};

inline DesignDoc make_design(const StagedTree& tree, std::string name = {}) {
  DesignDoc doc{tree, nlohmann::json::object()};
  if (!name.empty()) doc.meta["name"] = std::move(name);
  return doc;
}

inline nlohmann::json to_json(const DesignDoc& doc) {
  const auto counts = doc.counts();
  nlohmann::json j;
  j["width"] = doc.tree.profile.width;
  j["ppg"] = std::string(to_string(doc.tree.profile.ppg));
  j["mac"] = doc.tree.profile.mac;
  j["f"] = counts.f;
  j["h"] = counts.h;
  j["stages"] = doc.tree.stages;
  j["t32"] = doc.tree.t32;
  j["t22"] = doc.tree.t22;
  j["meta"] = doc.meta.is_object() ? doc.meta : nlohmann::json::object();
  return j;
}

// Parses the schema without judging legality, so corrupted designs can still be
// loaded for verification. Structural shape is checked.
inline DesignDoc design_from_json(const nlohmann::json& j) {
  try {
    DesignDoc doc;
    const int width = j.at("width").get<int>();
    const auto ppg = parse_ppg(j.at("ppg").get<std::string>());
    const bool mac = j.value("mac", false);
    doc.tree.profile = pp_profile(width, ppg, mac);
    doc.tree.stages = j.at("stages").get<int>();
    doc.tree.t32 = j.at("t32").get<std::vector<std::vector<int>>>();
    doc.tree.t22 = j.at("t22").get<std::vector<std::vector<int>>>();
    if (j.contains("meta")) doc.meta = j.at("meta");
    const int cols = doc.tree.num_columns();
    if (doc.tree.stages < 0 || static_cast<int>(doc.tree.t32.size()) != doc.tree.stages ||
        static_cast<int>(doc.tree.t22.size()) != doc.tree.stages)
      throw IllegalDesign("t32/t22 must have 'stages' rows");
    for (int i = 0; i < doc.tree.stages; ++i)
      if (static_cast<int>(doc.tree.t32[i].size()) != cols ||
          static_cast<int>(doc.tree.t22[i].size()) != cols)
        throw IllegalDesign("stage " + std::to_string(i) + " must have " + std::to_string(cols) +
                            " columns");
    if (j.contains("f") && j.contains("h")) {
      const CompressorCounts stated{j.at("f").get<std::vector<int>>(),
                                    j.at("h").get<std::vector<int>>()};
      if (stated != doc.counts())
        throw IllegalDesign("f/h do not equal the column sums of t32/t22");
    }
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw IllegalDesign(std::string("malformed design JSON: ") + e.what());
  }
}

inline std::string design_to_string(const DesignDoc& doc) { return to_json(doc).dump(2) + "\n"; }

inline DesignDoc design_from_string(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IllegalDesign(std::string("malformed design JSON: ") + e.what());
  }
  return design_from_json(j);
}

// Full legality: consistent counts and a feasible stage placement.
inline std::optional<std::string> design_violation(const DesignDoc& doc) {
  if (!stages_feasible(doc.tree)) return "stage placement uses more bits than are available";
  return legality_violation(doc.tree.profile, doc.counts());
}

// FNV-1a over the canonical (compact, key-sorted) JSON encoding of the
// structure. Metadata does not take part.
inline std::uint64_t content_hash(const DesignDoc& doc) {
  auto j = to_json(doc);
  j.erase("meta");
  const std::string text = j.dump();
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace mulopt
