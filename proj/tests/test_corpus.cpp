#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <sstream>

#include "geolab/errors.hpp"
#include "geolab/funsd.hpp"
#include "geolab/segmentation.hpp"
#include "geolab/synth.hpp"

using namespace geolab;
namespace fs = std::filesystem;

namespace {

fs::path data_dir() { return fs::path(GEOLAB_TEST_DATA); }

TextSegment line_of(std::size_t n) {
  TextSegment s;
  s.id = 0;
  s.label = EntityLabel::Answer;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = 10.0 + 30.0 * static_cast<double>(k);
    s.words.push_back({"w" + std::to_string(k), {x, 10, x + 24, 22}});
  }
  s.refresh_box();
  return s;
}

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(Funsd, LinkingConventionAndLabels) {
  const Document d = parse_funsd_text(
      R"({"form":[{"id":0,"text":"Name:","label":"question","box":[0,0,40,10],"words":[{"text":"Name:","box":[0,0,40,10]}],"linking":[[0,1]]},
                  {"id":1,"text":"Ann","label":"answer","box":[50,0,80,10],"words":[{"text":"Ann","box":[50,0,80,10]}],"linking":[[0,1]]}]})",
      "x");
  ASSERT_EQ(d.segments.size(), 2u);
  EXPECT_EQ(d.segments[0].label, EntityLabel::Question);
  EXPECT_EQ(d.links, (std::set<Link>{{0, 1}}));

  LoadOptions flip;
  flip.link_order = LinkOrder::SonFather;
  const Document f = parse_funsd_text(R"({"form":[{"id":0,"text":"a","label":"answer","words":[{"text":"a","box":[0,0,5,5]}],"linking":[[0,1]]},
      {"id":1,"text":"b","label":"question","words":[{"text":"b","box":[9,0,15,5]}],"linking":[]}]})",
                                      "y", flip);
  EXPECT_EQ(f.links, (std::set<Link>{{1, 0}}));
}

TEST(Funsd, EmptyForm) {
  const Document d = parse_funsd_text(R"({"form": []})", "empty");
  EXPECT_TRUE(d.segments.empty());
  EXPECT_TRUE(d.links.empty());
}

TEST(Funsd, SampleFilesRoundTripIdempotent) {
  for (const char* name : {"funsd_sample_a.json", "funsd_sample_b.json"}) {
    const Document d1 = load_funsd(data_dir() / name);
    EXPECT_NO_THROW(validate_document(d1));
    const std::string s1 = to_funsd_json(d1).dump();
    const Document d2 = parse_funsd_text(s1, d1.id);
    EXPECT_EQ(d1, d2) << name;
    EXPECT_EQ(to_funsd_json(d2).dump(), s1) << name;
  }
  const Document a = load_funsd(data_dir() / "funsd_sample_a.json");
  EXPECT_EQ(a.id, "funsd_sample_a");
  EXPECT_EQ(a.segments.size(), 6u);
  EXPECT_EQ(a.links, (std::set<Link>{{0, 1}, {1, 2}, {3, 4}}));
  // The hull of the words wins over the recorded segment box.
  EXPECT_EQ(a.segments[3].box, (BBox{85, 170, 115, 181}));

  const Document b = load_funsd(data_dir() / "funsd_sample_b.json");
  EXPECT_EQ(b.segments.size(), 3u);  // the empty record is skipped
  EXPECT_EQ(b.links, (std::set<Link>{{10, 12}, {11, 12}}));
}

TEST(Funsd, MalformedRecordsNameTheField) {
  EXPECT_EQ(field_of([] { load_funsd(data_dir() / "malformed_box.json"); }), "form[0].box");
  EXPECT_EQ(field_of([] { load_funsd(data_dir() / "malformed_label.json"); }), "form[0].label");
  EXPECT_EQ(field_of([] { load_funsd(data_dir() / "malformed_missing_words.json"); }), "form[0].words");
  EXPECT_EQ(field_of([] { load_funsd(data_dir() / "malformed_linking.json"); }), "form[0].linking[0]");
  EXPECT_EQ(field_of([] { load_funsd(data_dir() / "malformed_json.json"); }), "$");
  EXPECT_EQ(field_of([] { parse_funsd_text(R"({"forms": []})", "x"); }), "$.form");
  EXPECT_EQ(field_of([] { parse_funsd_text(R"({"form": [{"id":0,"id2":1}]})", "x"); }), "form[0].text");
}

TEST(Funsd, ContainerRoundTrip) {
  Rng rng(3);
  GeneratorSpec spec;
  spec.num_docs = 3;
  const auto docs = generate_synthetic_corpus(spec, rng);
  const fs::path dir = fs::temp_directory_path() / "geolab_container_test";
  fs::create_directories(dir);
  for (const auto& d : docs) {
    save_document(dir / (d.id + ".json"), d, {{"split", "test"}});
    nlohmann::json meta;
    Document back = load_document(dir / (d.id + ".json"), &meta);
    EXPECT_EQ(back, d);
    EXPECT_EQ(meta["split"], "test");
  }
  fs::remove_all(dir);
}

TEST(Corpus, ValidationNamesTheProblem) {
  Document d;
  d.id = "v";
  TextSegment s = line_of(2);
  d.segments.push_back(s);
  EXPECT_NO_THROW(validate_document(d));
  d.links.insert({0, 0});
  EXPECT_THROW(validate_document(d), InvalidInputError);
  d.links = {{0, 9}};
  EXPECT_THROW(validate_document(d), InvalidInputError);
  d.links.clear();
  d.segments.push_back(s);  // duplicate id
  EXPECT_THROW(validate_document(d), InvalidInputError);
}

TEST(Corpus, TruncateSegmentsKeepsReadingOrderPrefix) {
  Document d;
  for (int i = 0; i < 5; ++i) {
    TextSegment s;
    s.id = i;
    const double y = 100.0 - 20.0 * i;  // stored bottom-up
    s.words.push_back({"w", {10, y, 20, y + 10}});
    s.refresh_box();
    d.segments.push_back(s);
  }
  d.links = {{0, 1}, {3, 4}};
  EXPECT_EQ(truncate_segments(d, 3), 2u);
  ASSERT_EQ(d.segments.size(), 3u);
  EXPECT_EQ(d.segments[0].id, 2);
  EXPECT_EQ(d.segments[2].id, 4);
  EXPECT_EQ(d.links, (std::set<Link>{{3, 4}}));
}

TEST(Corpus, VocabularyAndTokenize) {
  Vocabulary v;
  EXPECT_EQ(v.size(), static_cast<std::size_t>(Vocabulary::kNumReserved));
  const int a = v.add("alpha");
  EXPECT_EQ(v.add("alpha"), a);
  Document d;
  d.segments.push_back(line_of(2));
  d.segments[0].words[0].text = "alpha";
  tokenize(d, v);
  EXPECT_EQ(d.segments[0].token_ids, (std::vector<int>{a, Vocabulary::kUnk}));
}

TEST(Segmentation, ClosedForms) {
  EXPECT_NEAR(line_split_probability(10), 1.0 - 1.0 / 9.5, 1e-12);
  EXPECT_NEAR(line_split_probability(10), 0.89474, 1e-5);
  EXPECT_DOUBLE_EQ(line_split_rate(30), 7.0);
  EXPECT_NEAR(line_split_rate(9), 3.0, 1e-12);
}

TEST(Segmentation, SingleWordLineUnchanged) {
  Rng rng(1);
  const TextSegment s = line_of(1);
  const LineSplit r = poisson_line_segmentation(s, rng);
  ASSERT_EQ(r.parts.size(), 1u);
  EXPECT_EQ(r.parts[0], s);
  EXPECT_FALSE(r.split_branch);
}

TEST(Segmentation, PartsConcatenateToLine) {
  Rng rng(2);
  for (std::size_t n = 1; n <= 30; ++n) {
    const TextSegment s = line_of(n);
    for (int rep = 0; rep < 50; ++rep) {
      const LineSplit r = poisson_line_segmentation(s, rng);
      std::vector<Word> joined;
      for (const auto& p : r.parts) {
        ASSERT_FALSE(p.words.empty());
        EXPECT_EQ(p.label, s.label);
        for (const auto& w : p.words) {
          EXPECT_TRUE(p.box.contains(w.box));
          joined.push_back(w);
        }
      }
      ASSERT_EQ(joined, s.words);
      ASSERT_EQ(static_cast<int>(r.parts.size()), r.num_parts);
      // Near-equal part sizes.
      std::size_t lo = n, hi = 0;
      for (const auto& p : r.parts) {
        lo = std::min(lo, p.words.size());
        hi = std::max(hi, p.words.size());
      }
      EXPECT_LE(hi - lo, 1u);
    }
  }
}

TEST(Segmentation, CorpusProbabilityExtremes) {
  Rng g(4);
  GeneratorSpec spec;
  spec.num_docs = 5;
  auto docs = generate_synthetic_corpus(spec, g);
  const auto orig = docs;
  Rng r(5);
  EXPECT_EQ(apply_segmentation(docs, 0.0, r).documents_resegmented, 0u);
  EXPECT_EQ(docs, orig);

  // Every line a single word: resegmentation cannot change anything.
  std::vector<Document> singles = orig;
  for (auto& d : singles)
    for (auto& s : d.segments) {
      s.words.resize(1);
      s.refresh_box();
    }
  const auto before = singles;
  apply_segmentation(singles, 1.0, r);
  EXPECT_EQ(singles, before);
}

TEST(Segmentation, LinksFollowFirstPart) {
  Document d;
  d.id = "l";
  TextSegment key = line_of(1);
  key.id = 0;
  key.label = EntityLabel::Question;
  TextSegment value = line_of(12);
  value.id = 1;
  for (auto& w : value.words) w.box = w.box.translated(0, 40);
  value.refresh_box();
  d.segments = {key, value};
  d.links = {{0, 1}};
  std::vector<Document> c{d};
  Rng r(8);
  apply_segmentation(c, 1.0, r);
  ASSERT_EQ(c[0].links.size(), 1u);
  const Link l = *c[0].links.begin();
  const auto& son = c[0].segments[static_cast<std::size_t>(c[0].index_of(l.second))];
  EXPECT_EQ(son.words.front().text, "w0");
  EXPECT_NO_THROW(validate_document(c[0]));
}

TEST(Synth, SinglePairSpec) {
  GeneratorSpec spec;
  spec.grid_cols = spec.grid_rows = 1;
  spec.min_pairs = spec.max_pairs = 1;
  spec.header_rate = 0;
  spec.other_rate = 0;
  spec.multi_son_rate = 0;
  spec.multi_father_rate = 0;
  spec.block_fill_rate = 1;
  const Document d = generate_document(spec, 9, "one");
  EXPECT_EQ(d.segments.size(), 2u);
  EXPECT_EQ(d.links.size(), 1u);
}

TEST(Synth, MultiFatherRateOneGivesEverySonTwoFathers) {
  GeneratorSpec spec;
  spec.multi_father_rate = 1.0;
  spec.multi_son_rate = 0.0;
  spec.min_pairs = 2;
  spec.max_pairs = 4;
  Rng rng(6);
  spec.num_docs = 20;
  for (const Document& d : generate_synthetic_corpus(spec, rng)) {
    std::map<int, int> fathers;
    for (const auto& l : d.links) ++fathers[l.second];
    ASSERT_FALSE(fathers.empty());
    for (const auto& [son, n] : fathers) EXPECT_GE(n, 2) << d.id << " son " << son;
  }
}

TEST(Synth, DeterministicAndValid) {
  GeneratorSpec spec;
  spec.num_docs = 10;
  Rng a(42), b(42);
  const auto x = generate_synthetic_corpus(spec, a);
  const auto y = generate_synthetic_corpus(spec, b);
  ASSERT_EQ(x, y);
  std::string sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    validate_document(x[i]);
    sx += to_funsd_json(x[i]).dump();
    sy += to_funsd_json(y[i]).dump();
  }
  EXPECT_EQ(sx, sy);
  const Vocabulary v = synthetic_vocabulary(spec);
  auto z = x;
  tokenize(z, v);
  for (const auto& d : z)
    for (const auto& s : d.segments)
      for (int t : s.token_ids) EXPECT_NE(t, Vocabulary::kUnk);
}

TEST(Synth, RejectsBadSpec) {
  GeneratorSpec spec;
  spec.min_pairs = 5;
  spec.max_pairs = 2;
  EXPECT_THROW(spec.validate(), GenerationError);
  GeneratorSpec tall;
  tall.grid_rows = 1;
  tall.min_pairs = tall.max_pairs = 60;
  EXPECT_THROW(generate_document(tall, 1, "x"), GenerationError);
}
