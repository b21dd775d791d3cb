#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "geolab/corpus.hpp"
#include "geolab/rng.hpp"

namespace geolab {

/// Parameters of the synthetic form generator. Each page is a grid of blocks;
/// a block holds an optional header followed by key/value rows.
struct GeneratorSpec {
  std::size_t num_docs = 100;
  int grid_cols = 2;
  int grid_rows = 2;
  int min_pairs = 2;  ///< key/value rows per block
  int max_pairs = 4;
  double block_fill_rate = 0.9;
  double header_rate = 0.6;
  double vertical_value_rate = 0.2;  ///< value placed under its key
  double multi_father_rate = 0.15;   ///< son shared by two (or three) fathers
  double multi_son_rate = 0.1;       ///< key with two side-by-side values
  double other_rate = 0.5;           ///< chance of each of two noise segments
  double colon_rate = 0.5;           ///< key ends with ':'
  double jitter = 3.0;               ///< max per-segment shift in pixels
  bool shuffle_segments = true;      ///< store segments in random order
  double page_width = 1000.0;
  double page_height = 1000.0;
  /// Word pools; key and value pools share `pool_overlap` of their words.
  std::size_t key_pool = 40;
  std::size_t value_pool = 40;
  std::size_t header_pool = 12;
  double pool_overlap = 0.5;
  std::uint64_t vocab_seed = 7;

  /// Throws GenerationError on inconsistent settings.
  void validate() const;
  nlohmann::json to_json() const;
  static GeneratorSpec from_json(const nlohmann::json& j);
};

struct WordPools {
  std::vector<std::string> keys, values, headers, others;
};

/// Deterministic word pools for the spec's vocab seed.
WordPools make_word_pools(const GeneratorSpec& spec);

/// Vocabulary covering every word the generator can emit.
Vocabulary synthetic_vocabulary(const GeneratorSpec& spec);

/// Single synthetic form; documents are independent given `seed`.
Document generate_document(const GeneratorSpec& spec, std::uint64_t seed, const std::string& id);

/// `spec.num_docs` documents; document i uses a stream derived from one draw
/// of `rng` and i. Ids are `<prefix><index>`. Throws GenerationError when the
/// layout does not fit the page.
std::vector<Document> generate_synthetic_corpus(const GeneratorSpec& spec, Rng& rng,
                                                const std::string& prefix = "synth-");

}  // namespace geolab
