#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "geolab/corpus.hpp"

namespace geolab {

/// How a FUNSD "linking" pair [a, b] maps onto father/son.
enum class LinkOrder { FatherSon, SonFather };

struct LoadOptions {
  LinkOrder link_order = LinkOrder::FatherSon;
  /// Called with a message when the loader drops or repairs content.
  void (*warn)(const std::string&) = nullptr;
};

/// Parses a FUNSD-style annotation object. Segment boxes are the hull of the
/// word boxes; entries without text or words are skipped; documents over 256
/// segments are truncated. Throws ParseError naming the offending field.
Document parse_funsd(const nlohmann::json& root, const std::string& doc_id, const LoadOptions& opts = {});
Document parse_funsd_text(std::string_view text, const std::string& doc_id, const LoadOptions& opts = {});
/// Document id is the file stem.
Document load_funsd(const std::filesystem::path& path, const LoadOptions& opts = {});

/// FUNSD-schema object for the document, with a "meta" block carrying the
/// page size plus any entries of `meta`. Links are written on both endpoints
/// in father/son order.
nlohmann::json to_funsd_json(const Document& doc, const nlohmann::json& meta = nlohmann::json::object());

/// Container file: one document per file, FUNSD schema plus "meta".
void save_document(const std::filesystem::path& path, const Document& doc,
                   const nlohmann::json& meta = nlohmann::json::object());
/// Loads a container file written by save_document; `meta` receives its meta block.
Document load_document(const std::filesystem::path& path, nlohmann::json* meta = nullptr);

nlohmann::json vocabulary_to_json(const Vocabulary& v);
Vocabulary vocabulary_from_json(const nlohmann::json& j);

}  // namespace geolab
