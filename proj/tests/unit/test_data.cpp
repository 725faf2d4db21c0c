#include <doctest.h>

#include <set>

#include "conceptprobe/cache.hpp"
#include "conceptprobe/corpus.hpp"
#include "conceptprobe/csv.hpp"
#include "conceptprobe/error.hpp"
#include "conceptprobe/hashing.hpp"
#include "conceptprobe/rng.hpp"
#include "support.hpp"

using namespace cprobe;

TEST_SUITE("hashing") {
  TEST_CASE("sha256 known vectors") {
    CHECK(sha256("").hex() == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256("abc").hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("field framing is unambiguous") {
    const auto a = Sha256Builder().field("ab").field("c").finish();
    const auto b = Sha256Builder().field("a").field("bc").finish();
    CHECK(a != b);
    CHECK(a == Sha256Builder().field("ab").field("c").finish());
  }

  TEST_CASE("prefix64 is the big-endian head") {
    const auto d = sha256("abc");
    CHECK(d.prefix64() == 0xba7816bf8f01cfeaULL);
  }
}

TEST_SUITE("rng") {
  TEST_CASE("streams are reproducible") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng a2(42);
    CHECK(a2.next_u64() != c.next_u64());
  }

  TEST_CASE("uniform01 and uniform_below stay in range") {
    Rng r(1);
    for (int i = 0; i < 1000; ++i) {
      const double u = r.uniform01();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(r.uniform_below(7) < 7u);
    }
  }

  TEST_CASE("normal draws have roughly unit moments") {
    Rng r(5);
    double s = 0, s2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      const double x = r.normal();
      s += x;
      s2 += x * x;
    }
    CHECK(std::abs(s / n) < 0.05);
    CHECK(std::abs(s2 / n - 1.0) < 0.05);
  }

  TEST_CASE("sample_indices is a prefix of one permutation") {
    const auto all = sample_indices(10, 10, 3);
    std::set<std::size_t> uniq(all.begin(), all.end());
    CHECK(uniq.size() == 10);
    const auto some = sample_indices(10, 4, 3);
    CHECK(std::equal(some.begin(), some.end(), all.begin()));
  }
}

TEST_SUITE("csv") {
  TEST_CASE("quoted fields with separators, quotes and newlines") {
    const auto t = csv::parse("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n\"multi\nline\",2\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "x,1");
    CHECK(t.rows[0][1] == "he said \"hi\"");
    CHECK(t.rows[1][0] == "multi\nline");
    CHECK(t.line_numbers[1] == 3);
  }

  TEST_CASE("escape round-trips through parse") {
    const std::vector<std::string> fields{"plain", "a,b", "q\"q", "n\nl", ""};
    const auto t = csv::parse("h1,h2,h3,h4,h5\n" + csv::format_row(fields) + "\n");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0] == fields);
  }

  TEST_CASE("format_double round-trips exactly") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.123, 0.0}) {
      CHECK(csv::parse_double(csv::format_double(v)) == v);
    }
    CHECK_FALSE(csv::try_parse_double("abc").has_value());
    CHECK_FALSE(csv::try_parse_double("1.5x").has_value());
  }

  TEST_CASE("require_column names the missing column") {
    const auto t = csv::parse("a\n1\n");
    CHECK(t.require_column("a") == 0);
    CHECK_THROWS_WITH_AS(t.require_column("zz"), doctest::Contains("zz"), DataError);
  }
}

TEST_SUITE("corpus") {
  TEST_CASE("jsonl line maps onto a record") {
    testing::TempDir dir;
    testing::write_file(dir / "d.jsonl",
                        R"({"id":"r1","text":"Great hotel","y":0,"covariates":{"Words":2}})" "\n");
    const auto ds = load_dataset(dir / "d.jsonl", DatasetFormat::jsonl);
    REQUIRE(ds.size() == 1);
    CHECK(ds.records[0].id == "r1");
    CHECK(ds.records[0].text == "Great hotel");
    CHECK(ds.records[0].covariates.at("Words") == 2.0);
    CHECK(ds.records[0].y == 0.0);
  }

  TEST_CASE("csv with a column mapping keeps every row") {
    testing::TempDir dir;
    testing::write_file(dir / "d.csv", "rev_id,body,stars\na,one,4\nb,two,3\nc,\"three, four\",5\n");
    ColumnMapping m;
    m.id = "rev_id";
    m.text = "body";
    m.covariates = {"stars"};
    const auto ds = load_dataset(dir / "d.csv", DatasetFormat::csv, m);
    REQUIRE(ds.size() == 3);
    CHECK(ds.records[2].text == "three, four");
    CHECK(ds.records[1].covariates.at("stars") == 3.0);
  }

  TEST_CASE("duplicate ids are reported by name") {
    testing::TempDir dir;
    testing::write_file(dir / "d.jsonl",
                        "{\"id\":\"r1\",\"text\":\"a\"}\n{\"id\":\"r1\",\"text\":\"b\"}\n");
    CHECK_THROWS_WITH_AS(load_dataset(dir / "d.jsonl", DatasetFormat::jsonl),
                         doctest::Contains("r1"), DataError);
  }

  TEST_CASE("every bad row is reported with its line") {
    testing::TempDir dir;
    testing::write_file(dir / "d.jsonl",
                        "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"}\nnot json\n");
    try {
      load_dataset(dir / "d.jsonl", DatasetFormat::jsonl);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("2") != std::string::npos);
      CHECK(msg.find("3") != std::string::npos);
    }
  }

  TEST_CASE("missing file is an io error") {
    CHECK_THROWS_AS(load_dataset("/nonexistent/x.jsonl", DatasetFormat::jsonl), IoError);
  }

  TEST_CASE("save then load yields equal records") {
    testing::TempDir dir;
    Dataset ds;
    TextRecord a;
    a.id = "s1";
    a.text = "quoted \"text\"\nwith newline";
    a.unit = TextUnit::sentence;
    a.parent_id = "d1";
    a.covariates = {{"Size", 1.25}, {"Words", 3}};
    a.y = -0.5;
    a.panel = {{"firm_id", "F1"}, {"year", "2020"}};
    TextRecord b;
    b.id = "s2";
    b.text = "plain";
    ds.records = {a, b};
    save_dataset_jsonl(ds, dir / "out.jsonl");
    const auto back = load_dataset(dir / "out.jsonl", DatasetFormat::jsonl);
    REQUIRE(back.size() == 2);
    CHECK(back.records[0] == a);
    CHECK(back.records[1] == b);
  }

  TEST_CASE("probing sample: exhaustive, deterministic, nested, bounded") {
    Dataset ds;
    for (int i = 0; i < 10; ++i) ds.records.push_back(TextRecord{"r" + std::to_string(i), "t"});
    const auto all = sample_probing_set(ds, 10, 7);
    std::set<std::string> ids;
    for (const auto& r : all) ids.insert(r.id);
    CHECK(ids.size() == 10);
    bool permuted = false;
    for (std::size_t i = 0; i < all.size(); ++i) permuted |= all[i].id != ds.records[i].id;
    CHECK(permuted);

    const auto a = sample_probing_set(ds, 6, 1);
    const auto b = sample_probing_set(ds, 6, 1);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].id == b[i].id);
    const auto small = sample_probing_set(ds, 3, 1);
    for (std::size_t i = 0; i < small.size(); ++i) CHECK(small[i].id == a[i].id);

    Dataset five;
    five.records.assign(ds.records.begin(), ds.records.begin() + 5);
    CHECK_THROWS_AS(sample_probing_set(five, 6, 1), DataError);
  }
}

TEST_SUITE("cache") {
  TEST_CASE("miss, hit and persistence across instances") {
    testing::TempDir dir;
    const auto key = CacheKey::make("m", "unified", sha256("t"), "text");
    int calls = 0;
    auto producer = [&] {
      ++calls;
      return CachedVector{{1.5f, -2.25f, 3.0f}, 2};
    };
    {
      ContentCache cache(dir.path());
      const auto v1 = cache.get_or_compute(key, producer);
      const auto v2 = cache.get_or_compute(key, producer);
      CHECK(calls == 1);
      CHECK(v1.values == v2.values);
      CHECK(v2.chunks == 2);
      CHECK(cache.stats().hits == 1);
      CHECK(cache.stats().misses == 1);
    }
    ContentCache reopened(dir.path());
    CHECK(reopened.contains(key));
    const auto v3 = reopened.get_or_compute(key, producer);
    CHECK(calls == 1);
    CHECK(v3.values == std::vector<float>{1.5f, -2.25f, 3.0f});
  }

  TEST_CASE("flipped byte is discarded and recomputed") {
    testing::TempDir dir;
    const auto key = CacheKey::make("m", "unified", sha256("t"), "text");
    int calls = 0;
    auto producer = [&] {
      ++calls;
      return CachedVector{{1.0f, 2.0f}, 1};
    };
    {
      ContentCache cache(dir.path());
      cache.get_or_compute(key, producer);
    }
    const auto blob = dir.path() / "blobs" / (key.digest.hex() + ".bin");
    REQUIRE(std::filesystem::exists(blob));
    auto bytes = testing::read_file(blob);
    bytes[0] = static_cast<char>(bytes[0] ^ 0x01);
    testing::write_file(blob, bytes);

    ContentCache cache(dir.path());
    const auto v = cache.get_or_compute(key, producer);
    CHECK(calls == 2);
    CHECK(v.values == std::vector<float>{1.0f, 2.0f});
    CHECK(cache.stats().corrupt == 1);
  }

  TEST_CASE("text entries round-trip") {
    testing::TempDir dir;
    ContentCache cache(dir.path());
    const auto key = CacheKey::make("m", "scoring", sha256("t"), "x");
    int calls = 0;
    const auto a = cache.get_or_compute_text(key, [&] { ++calls; return std::string("Score: 42\n"); });
    const auto b = cache.get_or_compute_text(key, [&] { ++calls; return std::string("other"); });
    CHECK(calls == 1);
    CHECK(a == b);
  }

  TEST_CASE("keys separate model, role, template and text") {
    const auto t = sha256("tmpl");
    const auto base = CacheKey::make("m", "positive", t, "text");
    CHECK(base == CacheKey::make("m", "positive", t, "text"));
    CHECK_FALSE(base == CacheKey::make("m2", "positive", t, "text"));
    CHECK_FALSE(base == CacheKey::make("m", "negative", t, "text"));
    CHECK_FALSE(base == CacheKey::make("m", "positive", sha256("other"), "text"));
    CHECK_FALSE(base == CacheKey::make("m", "positive", t, "text2"));
  }
}
