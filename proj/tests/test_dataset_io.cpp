#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "test_util.hpp"
#include "trinity/config.hpp"
#include "trinity/dataset_io.hpp"
#include "trinity/error.hpp"
#include "trinity/io_util.hpp"

using namespace trinity;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
  return (fs::temp_directory_path() / name).string();
}

std::string repo_path(const std::string& rel) {
  // tests run from the build tree; golden files live in the source tree
  return std::string(TRINITY_SOURCE_DIR) + "/" + rel;
}

}  // namespace

TEST_CASE("ppm writer emits the exact documented byte layout") {
  Image black;
  black.width = 1;
  black.height = 1;
  black.rgb = {0, 0, 0};
  const std::string path = tmp_path("trin_black.ppm");
  write_image(path, black);
  const auto bytes = read_file_bytes(path);
  const std::string expect_header = "P6\n1 1\n255\n";
  REQUIRE(bytes.size() == expect_header.size() + 3);
  CHECK(std::string(bytes.begin(), bytes.begin() + expect_header.size()) == expect_header);
  CHECK(bytes[bytes.size() - 3] == 0);
  CHECK(bytes[bytes.size() - 2] == 0);
  CHECK(bytes[bytes.size() - 1] == 0);
  fs::remove(path);
}

TEST_CASE("ppm round trip is bit exact") {
  Rng rng(41);
  Image image;
  image.width = 13;
  image.height = 7;
  image.rgb.resize(13 * 7 * 3);
  for (auto& v : image.rgb) v = static_cast<uint8_t>(rng.uniform_int(256));
  const std::string path = tmp_path("trin_round.ppm");
  write_image(path, image);
  const auto first = read_file_bytes(path);
  const Image loaded = read_image(path);
  CHECK(loaded.width == image.width);
  CHECK(loaded.height == image.height);
  CHECK(loaded.rgb == image.rgb);
  write_image(path, loaded);
  CHECK(read_file_bytes(path) == first);
  fs::remove(path);
}

TEST_CASE("ppm reader rejects malformed input without crashing") {
  const std::string path = tmp_path("trin_bad.ppm");
  write_file_atomic(path, {'P', '5', '\n', '1', ' ', '1', '\n'});
  CHECK_THROWS_AS(read_image(path), ParseError);

  // truncated pixel payload
  const std::string header = "P6\n2 2\n255\n";
  std::vector<uint8_t> bytes(header.begin(), header.end());
  bytes.push_back(42);  // 1 of 12 pixel bytes
  write_file_atomic(path, bytes);
  CHECK_THROWS_AS(read_image(path), ParseError);

  // header cut mid-number
  write_file_atomic(path, {'P', '6', '\n', '4'});
  CHECK_THROWS_AS(read_image(path), ParseError);
  fs::remove(path);
}

TEST_CASE("label map format matches the documented layout") {
  LabelMap all_void;
  all_void.width = 2;
  all_void.height = 2;
  all_void.codes = {kVoidLabel, kVoidLabel, kVoidLabel, kVoidLabel};
  const std::string path = tmp_path("trin_void.tlbl");
  write_labels(path, all_void);
  const auto bytes = read_file_bytes(path);
  REQUIRE(bytes.size() == 16 + 8);  // header + 4 u16 codes
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "TLBL");
  for (size_t i = 16; i < 24; ++i) CHECK(bytes[i] == 0xFF);
  fs::remove(path);
}

TEST_CASE("label map round trip and error paths") {
  Rng rng(77);
  LabelMap labels;
  labels.width = 9;
  labels.height = 5;
  labels.codes.resize(45);
  for (auto& c : labels.codes) {
    c = rng.bernoulli(0.1) ? kVoidLabel : static_cast<uint16_t>(rng.uniform_int(24));
  }
  const std::string path = tmp_path("trin_labels.tlbl");
  write_labels(path, labels);
  const auto first = read_file_bytes(path);
  const LabelMap loaded = read_labels(path);
  CHECK(loaded.codes == labels.codes);
  write_labels(path, loaded);
  CHECK(read_file_bytes(path) == first);

  auto bytes = read_file_bytes(path);
  bytes[0] = 'X';
  write_file_atomic(path, bytes);
  CHECK_THROWS_WITH_AS(read_labels(path), doctest::Contains("TLBL"), ParseError);

  bytes[0] = 'T';
  bytes.resize(bytes.size() - 3);
  write_file_atomic(path, bytes);
  CHECK_THROWS_AS(read_labels(path), ParseError);
  fs::remove(path);
}

TEST_CASE("golden files stay byte-stable") {
  const Image image = read_image(repo_path("tests/golden/scene.ppm"));
  CHECK(image.width == 4);
  CHECK(image.height == 3);
  const auto golden_image = read_file_bytes(repo_path("tests/golden/scene.ppm"));
  const std::string rewritten = tmp_path("golden_rewrite.ppm");
  write_image(rewritten, image);
  CHECK(read_file_bytes(rewritten) == golden_image);
  fs::remove(rewritten);

  const LabelMap labels = read_labels(repo_path("tests/golden/scene.tlbl"));
  CHECK(labels.width == 4);
  CHECK(labels.height == 3);
  CHECK(labels.at(0, 0) == 0);
  CHECK(labels.at(3, 2) == kVoidLabel);
  const auto golden_labels = read_file_bytes(repo_path("tests/golden/scene.tlbl"));
  const std::string relabeled = tmp_path("golden_rewrite.tlbl");
  write_labels(relabeled, labels);
  CHECK(read_file_bytes(relabeled) == golden_labels);
  fs::remove(relabeled);
}

TEST_CASE("bundled rugd taxonomy matches the published split") {
  const Taxonomy tax = Taxonomy::load(repo_path("data/rugd.taxonomy"));
  CHECK(tax.num_cs() == 16);
  CHECK(tax.ca_slot_count == 20);
  REQUIRE(tax.ca_terrain_names.size() == 8);
  CHECK(tax.ca_terrain_names[0] == "dirt");
  CHECK(tax.ca_terrain_names[7] == "concrete");
  CHECK(tax.cs_names[0] == "grass");
  CHECK(tax.cs_names[3] == "sky");
  CHECK(tax.cs_unscored.count("bridge") == 1);
  CHECK(tax.cs_unscored.count("bicycle") == 1);
}

TEST_CASE("taxonomy validation") {
  Taxonomy minimal;
  minimal.cs_names = {"thing"};
  minimal.ca_slot_count = 1;
  CHECK_NOTHROW(minimal.validate());

  const std::string path = tmp_path("trin_tax.txt");
  // duplicate id -> duplicate key at parse time
  write_file_atomic(path, []() {
    const std::string text =
        "cs_class.0 = a\ncs_class.0 = b\nca_slots = 2\n";
    return std::vector<uint8_t>(text.begin(), text.end());
  }());
  CHECK_THROWS_AS(Taxonomy::load(path), ParseError);

  // non-dense ids
  write_file_atomic(path, []() {
    const std::string text = "cs_class.0 = a\ncs_class.2 = b\nca_slots = 2\n";
    return std::vector<uint8_t>(text.begin(), text.end());
  }());
  CHECK_THROWS_AS(Taxonomy::load(path), ConfigError);

  // void id inside the slot code range
  write_file_atomic(path, []() {
    const std::string text = "cs_class.0 = a\nca_slots = 4\nvoid_ids = 3\n";
    return std::vector<uint8_t>(text.begin(), text.end());
  }());
  CHECK_THROWS_AS(Taxonomy::load(path), ConfigError);
  fs::remove(path);
}

TEST_CASE("manifest enumerates every missing file") {
  const std::string dir = tmp_path("trin_manifest_test");
  fs::create_directories(dir);
  Taxonomy tax;
  tax.cs_names = {"sky"};
  tax.ca_slot_count = 2;
  tax.save(dir + "/taxonomy.txt");

  Manifest m;
  m.taxonomy_path = "taxonomy.txt";
  for (int i = 0; i < 3; ++i) {
    SampleRecord rec;
    rec.id = std::to_string(i);
    rec.image_path = "images/" + std::to_string(i) + ".ppm";
    rec.labels_path = "labels/" + std::to_string(i) + ".tlbl";
    rec.split = "train";
    m.samples.push_back(rec);
  }
  m.save(dir + "/manifest.txt");

  try {
    Manifest::load(dir + "/manifest.txt");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("6 referenced files missing") != std::string::npos);
    CHECK(msg.find("images/0.ppm") != std::string::npos);
    CHECK(msg.find("labels/2.tlbl") != std::string::npos);
  }

  // duplicate sample ids rejected
  m.samples[1].id = "0";
  m.save(dir + "/manifest.txt");
  CHECK_THROWS_AS(Manifest::load(dir + "/manifest.txt", false), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("key-value parser essentials") {
  const KeyValues kv = KeyValues::parse_string(
      "# comment\n"
      "alpha = 3\n"
      "name = hello world\n"
      "items = a, b ,c\n"
      "ratio = 0.25\n",
      "<test>");
  CHECK(kv.get_int("alpha") == 3);
  CHECK(kv.get_string("name") == "hello world");
  CHECK(kv.get_list("items") == std::vector<std::string>{"a", "b", "c"});
  CHECK(kv.get_double("ratio") == 0.25);
  CHECK(kv.get_int("missing", 9) == 9);
  CHECK_THROWS_AS(kv.get_int("name"), ConfigError);
  CHECK(kv.unconsumed().empty());

  CHECK_THROWS_AS(KeyValues::parse_string("novalue\n", "<t>"), ParseError);
  CHECK_THROWS_AS(KeyValues::parse_string("a = 1\na = 2\n", "<t>"), ParseError);

  const KeyValues partial = KeyValues::parse_string("used = 1\nunused = 2\n", "<t>");
  partial.get_int("used");
  CHECK(partial.unconsumed() == std::vector<std::string>{"unused"});
}

TEST_CASE("region helpers honor taxonomy void ids") {
  Taxonomy tax;
  tax.cs_names = {"sky", "rock"};
  tax.ca_slot_count = 3;
  tax.void_ids = {7};  // >= K + M

  LabelMap labels;
  labels.width = 4;
  labels.height = 1;
  labels.codes = {0, 2, 3, 7};  // sky, region 0, region 1, declared void
  CHECK(region_ids(labels, tax) == std::vector<size_t>{0, 1});
  CHECK(region_mask(labels, tax, 0) == std::vector<uint8_t>{0, 1, 0, 0});
  CHECK_NOTHROW(validate_labels(labels, tax));

  labels.codes[3] = 60000;
  CHECK_THROWS_AS(validate_labels(labels, tax), ValueError);
}
