#pragma once

#include <array>
#include <vector>

#include "geolab/corpus.hpp"
#include "geolab/nn/layers.hpp"

namespace geolab {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 256;
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t ff = 1024;
  std::size_t max_tokens = 512;
  std::size_t max_segments = kMaxSegments;
  /// Coordinates are bucketized to 0..coord_buckets-1 relative to the page.
  std::size_t coord_buckets = 1001;

  void validate() const;
};

/// BIE position of a token inside its segment. [CLS] and padding use None.
enum class Bie : int { Begin = 0, Inside = 1, End = 2, None = 3 };
inline constexpr std::size_t kNumBie = 4;
inline constexpr std::size_t kNumBoxParts = 6;  // x1, y1, x2, y2, w, h

/// Integer inputs for one document: [CLS], then every segment's tokens in
/// stored order, then optional [PAD] slots.
struct TokenInputs {
  std::vector<int> ids;
  std::vector<int> position;
  std::vector<int> rank;  ///< 0 for [CLS]/[PAD], segment index + 1 otherwise
  std::vector<int> bie;
  std::array<std::vector<int>, kNumBoxParts> box;
  std::vector<std::size_t> first_token;  ///< per segment
  std::vector<int> token_segment;        ///< segment index per token, -1 for [CLS]/[PAD]
  std::size_t real_tokens = 0;           ///< tokens before padding

  std::size_t size() const { return ids.size(); }
  /// 1 x T additive mask hiding padding from attention keys.
  nn::Mat key_mask() const;
};

int coord_bucket(double v, double page_extent, std::size_t buckets);

/// Builds the integer inputs. Throws InvalidInputError when the document
/// has a segment without tokens or more tokens than `cfg.max_tokens`
/// (callers truncate beforehand with truncate_tokens). `pad_to` appends
/// [PAD] tokens up to that length.
TokenInputs build_token_inputs(const Document& doc, const EncoderConfig& cfg, std::size_t pad_to = 0);

struct EncodedDocument {
  nn::Var tokens;    ///< T x d
  nn::Var segments;  ///< n x d, first-token features
  nn::Mat key_mask;
};

class TextLayoutEncoder {
 public:
  TextLayoutEncoder() = default;
  TextLayoutEncoder(nn::ParameterStore& store, const EncoderConfig& cfg, Rng& rng);

  const EncoderConfig& config() const { return cfg_; }

  /// Sum of token, position, rank, BIE and the six box embeddings.
  nn::Var embed(nn::Graph& g, nn::ParameterStore& store, const TokenInputs& in) const;
  /// `ids_override` (same length as in.ids) replaces token ids, for masking.
  EncodedDocument encode(nn::Graph& g, nn::ParameterStore& store, const TokenInputs& in,
                         const std::vector<int>* ids_override = nullptr) const;

 private:
  EncoderConfig cfg_;
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNorm final_ln_;
};

}  // namespace geolab
