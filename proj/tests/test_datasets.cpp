#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "timesliver/datasets.hpp"
#include "timesliver/error.hpp"

using namespace timesliver;
using namespace timesliver::datasets;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("timesliver_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::size_t ones(std::span<const std::uint8_t> m) {
  std::size_t n = 0;
  for (auto b : m) n += b;
  return n;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::Io;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_SUITE("freqsum") {
  const auto data = gen_freqsum(1000, 11);

  TEST_CASE("shape, labels and mask cardinality") {
    CHECK(data.length == 500);
    CHECK(data.variates == 6);
    CHECK(data.classes == 2);
    REQUIRE(data.has_mask());
    for (std::size_t i = 0; i < data.count; ++i) {
      const auto n = ones(data.mask_of(i));
      CHECK(n >= 100);
      CHECK(n <= 200);
    }
  }

  TEST_CASE("non-overlapping windows give exactly 200 mask points") {
    // Overlap shows up as fewer than 200 ones; most samples must hit 200 and
    // none can exceed it.
    std::size_t full = 0;
    for (std::size_t i = 0; i < data.count; ++i) full += ones(data.mask_of(i)) == 200;
    CHECK(full > data.count / 2);
  }

  TEST_CASE("mask marks contiguous 100-step windows") {
    for (std::size_t i = 0; i < 50; ++i) {
      const auto m = data.mask_of(i);
      std::size_t runs = 0;
      for (std::size_t t = 0; t < m.size(); ++t)
        if (m[t] && (t == 0 || !m[t - 1])) ++runs;
      CHECK(runs >= 1);
      CHECK(runs <= 2);
    }
  }

  TEST_CASE("class balance within [0.4, 0.6]") {
    double positive = 0;
    for (auto y : data.y) positive += y;
    positive /= static_cast<double>(data.count);
    CHECK(positive >= 0.4);
    CHECK(positive <= 0.6);
  }

  TEST_CASE("labels recompute from the stored frequencies") {
    const auto& freqs = data.provenance.at("frequencies");
    REQUIRE(freqs.size() == data.count);
    for (std::size_t i = 0; i < data.count; ++i) {
      const int f1 = freqs[i][0], f2 = freqs[i][1];
      CHECK(f1 >= 10);
      CHECK(f2 <= 50);
      CHECK(freqsum_label(f1, f2, 60) == data.y[i]);
    }
    CHECK(freqsum_label(30, 30, 60) == 0);
    CHECK(freqsum_label(30, 31, 60) == 1);
  }

  TEST_CASE("same seed is bit-identical, independent of jobs") {
    CHECK(gen_freqsum(64, 11, {}, 1) == gen_freqsum(64, 11, {}, 3));
    CHECK(gen_freqsum(64, 11).x == std::vector<float>(data.x.begin(), data.x.begin() + 64 * 3000));
    CHECK_FALSE(gen_freqsum(64, 12).x == gen_freqsum(64, 11).x);
  }

  TEST_CASE("unknown parameters are rejected") {
    CHECK_THROWS_AS(generate({"freqsum", 4, 0, {{"amplitude", 2}}}), Error);
    CHECK_THROWS_AS(generate({"nope", 4, 0, {}}), Error);
    CHECK_THROWS_AS(generate({"freqsum", 0, 0, {}}), Error);
  }
}

TEST_SUITE("seqcomb") {
  TEST_CASE("UV: exact balance, two non-overlapping 20-step windows") {
    const auto d = generate({"seqcomb_uv", 400, 3, {}});
    CHECK(d.variates == 1);
    CHECK(d.length == 200);
    std::vector<int> counts(4, 0);
    for (auto y : d.y) ++counts[static_cast<std::size_t>(y)];
    CHECK(counts == std::vector<int>{100, 100, 100, 100});
    for (std::size_t i = 0; i < d.count; ++i) {
      const auto m = d.mask_of(i);
      // 40 distinct points means the windows share none.
      CHECK(ones(m) == 40);
      CHECK(ones(m.subspan(0, 100)) == 20);
    }
  }

  TEST_CASE("MV has four channels and deterministic output") {
    const auto a = generate({"seqcomb_mv", 40, 5, {}, 1});
    const auto b = generate({"seqcomb_mv", 40, 5, {}, 4});
    CHECK(a.variates == 4);
    CHECK(a == b);
  }

  TEST_CASE("trend direction follows the class") {
    SeqCombParams p;
    p.noise = 0.0;
    const auto d = gen_seqcomb(8, 1, p);
    for (std::size_t i = 0; i < d.count; ++i) {
      const auto x = d.series(i);
      const auto m = d.mask_of(i);
      // Windows sit in separate halves; sum the in-window steps per half.
      double first = 0, second = 0;
      for (std::size_t t = 1; t < d.length; ++t)
        if (m[t] && m[t - 1] && (t < 100) == (t - 1 < 100)) (t < 100 ? first : second) += x[t] - x[t - 1];
      const int label = d.y[i];
      CHECK((first > 0) == (label < 2));
      CHECK((second > 0) == (label % 2 == 0));
    }
  }
}

TEST_SUITE("lowvar") {
  const auto d = gen_lowvar(200, 9);

  TEST_CASE("window variance below a quarter of the background") {
    for (std::size_t i = 0; i < d.count; ++i) {
      const std::size_t channel = static_cast<std::size_t>(d.y[i] % 2);
      const auto x = d.series(i);
      const auto m = d.mask_of(i);
      std::vector<double> in, out;
      for (std::size_t t = 0; t < d.length; ++t) (m[t] ? in : out).push_back(x[t * 2 + channel]);
      auto var = [](const std::vector<double>& v) {
        double mu = 0, s = 0;
        for (double a : v) mu += a;
        mu /= static_cast<double>(v.size());
        for (double a : v) s += (a - mu) * (a - mu);
        return s / static_cast<double>(v.size() - 1);
      };
      CHECK(var(in) < 0.25 * var(out));
    }
  }

  TEST_CASE("mask cardinality is the window and classes are balanced") {
    std::vector<int> counts(4, 0);
    for (std::size_t i = 0; i < d.count; ++i) {
      CHECK(ones(d.mask_of(i)) == 20);
      ++counts[static_cast<std::size_t>(d.y[i])];
    }
    CHECK(counts == std::vector<int>{50, 50, 50, 50});
  }
}

TEST_SUITE("farfield") {
  TEST_CASE("two-point product: x = [1, 2] gives p = 2 and label 1") {
    const std::vector<float> x{1.0f, 2.0f};
    CHECK(farfield_product(x) == 2.0);
  }

  TEST_CASE("labels recompute from X, roughly balanced, no mask") {
    const auto d = gen_farfield(1000, 21);
    CHECK_FALSE(d.has_mask());
    double positive = 0;
    for (std::size_t i = 0; i < d.count; ++i) {
      CHECK((farfield_product(d.series(i)) > 0.0 ? 1 : 0) == d.y[i]);
      positive += d.y[i];
    }
    positive /= 1000.0;
    CHECK(positive > 0.4);
    CHECK(positive < 0.6);
  }

  TEST_CASE("eta = 0 leaves a pure sinusoid") {
    FarFieldParams p;
    p.eta = 0.0;
    const auto d = gen_farfield(3, 2, p);
    for (float v : d.x) CHECK(std::fabs(v) <= 1.0f);
  }

  TEST_CASE("odd length is rejected") {
    FarFieldParams p;
    p.length = 7;
    CHECK_THROWS_AS(gen_farfield(2, 0, p), Error);
  }
}

TEST_SUITE("dataset files") {
  TEST_CASE("save / load round trip is bit-identical") {
    TempDir dir("roundtrip");
    const auto d = gen_freqsum(10, 4);
    save(d, dir.path);
    CHECK(load(dir.path) == d);
  }

  TEST_CASE("mask-free dataset loads without a mask") {
    TempDir dir("nomask");
    save(gen_farfield(5, 1), dir.path);
    CHECK_FALSE(fs::exists(dir.path / "g.u8"));
    CHECK_FALSE(load(dir.path).has_mask());
  }

  TEST_CASE("truncated blob, bad header and unknown version have distinct kinds") {
    TempDir dir("errors");
    save(gen_lowvar(6, 1), dir.path);
    fs::resize_file(dir.path / "x.f32le", fs::file_size(dir.path / "x.f32le") - 4);
    CHECK(kind_of([&] { load(dir.path); }) == ErrorKind::LengthMismatch);

    save(gen_lowvar(6, 1), dir.path);
    write_text(dir.path / "meta.json", "{not json");
    CHECK(kind_of([&] { load(dir.path); }) == ErrorKind::CorruptHeader);

    save(gen_lowvar(6, 1), dir.path);
    std::ifstream in(dir.path / "meta.json");
    auto meta = nlohmann::json::parse(in);
    meta["version"] = 99;
    write_text(dir.path / "meta.json", meta.dump());
    CHECK(kind_of([&] { load(dir.path); }) == ErrorKind::UnknownVersion);

    CHECK(kind_of([&] { load(dir.path / "missing"); }) == ErrorKind::Io);
  }

  TEST_CASE("select and slice keep the requested samples") {
    const auto d = gen_lowvar(12, 3);
    const std::vector<std::size_t> idx{5, 1};
    const auto s = d.select(idx);
    CHECK(s.count == 2);
    CHECK(s.y[0] == d.y[5]);
    CHECK(std::equal(s.series(1).begin(), s.series(1).end(), d.series(1).begin()));
    const auto t = d.slice(4, 8);
    CHECK(t.count == 4);
    CHECK(t.y[0] == d.y[4]);
  }
}

TEST_SUITE("csv import") {
  TEST_CASE("two-sample wide file") {
    TempDir dir("csvwide");
    write_text(dir.path / "a.csv", "label,t0,t1,t2\n0,1.5,2,3\n1,-1,0.25,4\n");
    CsvLayout layout;
    layout.length = 3;
    const auto d = import_csv(dir.path / "a.csv", layout);
    CHECK(d.count == 2);
    CHECK(d.length == 3);
    CHECK(d.classes == 2);
    CHECK(d.x == std::vector<float>{1.5f, 2, 3, -1, 0.25f, 4});
    CHECK(d.y == std::vector<std::int32_t>{0, 1});

    save(d, dir.path / "saved");
    CHECK(load(dir.path / "saved").x == d.x);
  }

  TEST_CASE("long layout groups rows by sample") {
    TempDir dir("csvlong");
    write_text(dir.path / "b.csv",
               "sample,label,a,b\ns1,2,1,10\ns1,2,2,20\ns2,0,3,30\ns2,0,4,40\n");
    const auto layout = CsvLayout::from_json(
        {{"shape", "long"}, {"length", 2}, {"variates", 2}, {"value_columns", {"a", "b"}}});
    const auto d = import_csv(dir.path / "b.csv", layout);
    CHECK(d.count == 2);
    CHECK(d.classes == 3);
    CHECK(d.x == std::vector<float>{1, 10, 2, 20, 3, 30, 4, 40});
  }

  TEST_CASE("ragged rows, bad labels and parse failures") {
    TempDir dir("csvbad");
    CsvLayout layout;
    layout.length = 3;
    write_text(dir.path / "ragged.csv", "label,a,b,c\n0,1,2\n");
    CHECK(kind_of([&] { import_csv(dir.path / "ragged.csv", layout); }) == ErrorKind::Validation);

    write_text(dir.path / "label.csv", "label,a,b,c\n5,1,2,3\n");
    layout.classes = 2;
    CHECK(kind_of([&] { import_csv(dir.path / "label.csv", layout); }) == ErrorKind::Validation);

    write_text(dir.path / "text.csv", "label,a,b,c\n0,1,x,3\n");
    try {
      import_csv(dir.path / "text.csv", layout);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Parse);
      CHECK(std::string(e.what()).find("row 2, column 3") != std::string::npos);
    }
  }
}
