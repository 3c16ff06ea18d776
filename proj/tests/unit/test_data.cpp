#include <filesystem>

#include "doctest.h"
#include "rclab/data/cache.hpp"
#include "rclab/data/glyphs.hpp"
#include "rclab/data/idx.hpp"
#include "rclab/data/toy2d.hpp"
#include "rclab/errors.hpp"
#include "rclab/util/binary_io.hpp"

using namespace rclab;
using namespace rclab::data;

namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rclab_test_data";
  fs::create_directories(dir);
  return dir / name;
}

void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

// Hand-assembled IDX pair: `count` images of rows x cols filled with `pixel`.
void write_idx(const fs::path& img, const fs::path& lbl, std::uint32_t img_magic, std::uint32_t count,
               std::uint32_t labels, std::size_t rows, std::size_t cols, unsigned char pixel,
               std::size_t drop_bytes = 0) {
  std::vector<unsigned char> ib, lb;
  put_be32(ib, img_magic);
  put_be32(ib, count);
  put_be32(ib, static_cast<std::uint32_t>(rows));
  put_be32(ib, static_cast<std::uint32_t>(cols));
  ib.insert(ib.end(), count * rows * cols, pixel);
  ib.resize(ib.size() - drop_bytes);
  put_be32(lb, kIdxLabelMagic);
  put_be32(lb, labels);
  for (std::uint32_t i = 0; i < labels; ++i) lb.push_back(static_cast<unsigned char>(i % 10));
  util::write_file(img, ib);
  util::write_file(lbl, lb);
}

}  // namespace

TEST_CASE("gen_toy2d") {
  SUBCASE("sample covariance") {
    Toy2DSpec spec;
    spec.means = {{1.0, -1.0}};
    spec.covariances = {{0.05, 0.0, 0.0, 0.05}};
    const auto d = gen_toy2d(spec, 100000, 3);
    REQUIRE(d.size() == 100000);
    double m[2] = {0, 0};
    for (std::size_t i = 0; i < d.size(); ++i) {
      m[0] += d.item(i)[0];
      m[1] += d.item(i)[1];
    }
    m[0] /= d.size();
    m[1] /= d.size();
    double c[3] = {0, 0, 0};
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double a = d.item(i)[0] - m[0], b = d.item(i)[1] - m[1];
      c[0] += a * a;
      c[1] += a * b;
      c[2] += b * b;
    }
    for (auto& v : c) v /= double(d.size() - 1);
    CHECK(c[0] == doctest::Approx(0.05).epsilon(0.03));
    CHECK(c[2] == doctest::Approx(0.05).epsilon(0.03));
    CHECK(std::abs(c[1]) < 0.03 * 0.05);
  }

  SUBCASE("empty and deterministic") {
    const auto spec = circle_toy2d();
    CHECK(gen_toy2d(spec, 0, 1).empty());
    const auto a = gen_toy2d(spec, 50, 9);
    const auto b = gen_toy2d(spec, 50, 9);
    CHECK(a.pixels == b.pixels);
    CHECK(a.conditions == b.conditions);
    CHECK(a.distinct_conditions().size() == 8);
  }

  SUBCASE("invalid spec") {
    Toy2DSpec spec;
    spec.means = {{0, 0}, {0, 0}};
    spec.covariances = {{1, 0, 0, 1}, {1, 0, 0, 1}};
    CHECK_THROWS_AS(spec.validate(), ArgumentError);
    spec.means = {{0, 0}, {1, 0}};
    spec.covariances[1] = {1, 2, 2, 1};
    CHECK_THROWS_AS(spec.validate(), ArgumentError);
  }
}

TEST_CASE("load_idx") {
  const auto img = scratch("img.idx"), lbl = scratch("lbl.idx");

  SUBCASE("all-zero image maps to -1") {
    write_idx(img, lbl, kIdxImageMagic, 3, 3, 28, 28, 0);
    const auto d = load_idx(img, lbl);
    CHECK(d.size() == 3);
    CHECK(d.item_shape == num::Shape{1, 28, 28});
    for (float v : d.pixels) CHECK(v == -1.0f);
    CHECK(d.conditions[2] == models::Condition::labeled(2));
  }

  SUBCASE("round trip through save_idx") {
    write_idx(img, lbl, kIdxImageMagic, 4, 4, 5, 7, 255);
    const auto d = load_idx(img, lbl);
    for (float v : d.pixels) CHECK(v == 1.0f);
    save_idx(d, scratch("img2.idx"), scratch("lbl2.idx"));
    CHECK(util::read_file(scratch("img2.idx")) == util::read_file(img));
  }

  SUBCASE("wrong magic names the expected constant") {
    write_idx(img, lbl, 0x00000801, 1, 1, 4, 4, 0);
    try {
      load_idx(img, lbl);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("0x00000803") != std::string::npos);
    }
  }

  SUBCASE("truncated payload") {
    write_idx(img, lbl, kIdxImageMagic, 2, 2, 4, 4, 0, 3);
    CHECK_THROWS_AS(load_idx(img, lbl), FormatError);
  }

  SUBCASE("count mismatch") {
    write_idx(img, lbl, kIdxImageMagic, 2, 3, 4, 4, 0);
    CHECK_THROWS_AS(load_idx(img, lbl), FormatError);
  }
}

TEST_CASE("render_glyphs") {
  const auto a = render_glyphs(10, 8, 2, 5);
  const auto b = render_glyphs(10, 8, 2, 5);
  CHECK(a.pixels == b.pixels);
  CHECK(a.size() == 160);
  CHECK(a.distinct_conditions().size() == 80);
  CHECK(a.item_shape == num::Shape{1, 16, 16});
  float lo = 1, hi = -1;
  for (float v : a.pixels) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -1.0f);
  CHECK(hi <= 1.0f);
  CHECK(hi > 0.5f);
  CHECK_FALSE(render_glyphs(10, 8, 2, 6).pixels == a.pixels);
}

TEST_CASE("exclude_conditions") {
  const auto d = class_labels_only(render_glyphs(10, 2, 3, 1));

  SUBCASE("drop one class") {
    const auto ex = exclude_conditions(d, [](const Condition& c) { return c.class_id == 3; });
    for (const auto& c : ex.kept.conditions) CHECK(c.class_id != 3);
    CHECK(ex.removed_conditions == std::set<Condition>{Condition::labeled(3)});
    // Partition: kept and removed indices cover the original exactly once.
    std::vector<int> seen(d.size(), 0);
    for (auto i : ex.kept_indices) ++seen[i];
    for (auto i : ex.removed_indices) ++seen[i];
    for (int s : seen) CHECK(s == 1);
    for (std::size_t k = 0; k < ex.kept.size(); ++k) {
      CHECK(ex.kept.conditions[k] == d.conditions[ex.kept_indices[k]]);
      CHECK(std::equal(ex.kept.item(k).begin(), ex.kept.item(k).end(), d.item(ex.kept_indices[k]).begin()));
    }
  }

  SUBCASE("always false keeps everything") {
    const auto ex = exclude_conditions(d, [](const Condition&) { return false; });
    CHECK(ex.kept.pixels == d.pixels);
    CHECK(ex.kept.conditions == d.conditions);
    CHECK(ex.removed_conditions.empty());
  }

  SUBCASE("always true is an error") {
    CHECK_THROWS_AS(exclude_conditions(d, [](const Condition&) { return true; }), EmptyDatasetError);
  }
}

TEST_CASE("generation cache") {
  models::DenoiserSpec spec;
  spec.input_shape = {2};
  spec.width = 8;
  spec.depth = 1;
  spec.cond_width = 4;
  spec.time_width = 4;
  spec.class_count = 3;
  spec.groups = 2;
  const auto teacher = models::build_model(spec, 1);
  const auto sched = diffusion::build_schedule(100);
  diffusion::SamplerConfig cfg;
  cfg.steps = 5;
  const std::vector<Condition> conds{Condition::labeled(0), Condition::labeled(1), Condition::labeled(2)};
  const auto cache = generate_cache(teacher, "abc", conds, 4, cfg, sched, 17);
  REQUIRE(cache.size() == 12);
  CHECK(cache.entries[0].condition == conds[0]);
  CHECK(cache.entries[1].condition == conds[1]);
  const auto path = scratch("cache.bin");

  SUBCASE("round trip") {
    cache_write(cache, path);
    const auto back = cache_read(path);
    REQUIRE(back.size() == cache.size());
    CHECK(back.item_shape == cache.item_shape);
    CHECK(back.sampler == cache.sampler);
    CHECK(back.teacher_digest == "abc");
    for (std::size_t i = 0; i < cache.size(); ++i) {
      CHECK(back.entries[i].image == cache.entries[i].image);
      CHECK(back.entries[i].condition == cache.entries[i].condition);
      CHECK(back.entries[i].seed == cache.entries[i].seed);
    }
    CHECK(verify_cache(back, teacher, sched, 1.0, 3) == 0);
  }

  SUBCASE("flipped payload byte") {
    cache_write(cache, path);
    auto bytes = util::read_file(path);
    bytes[bytes.size() - 5] ^= 0x01;
    util::write_file(path, bytes);
    CHECK_THROWS_AS(cache_read(path), CorruptionError);
  }

  SUBCASE("unknown version") {
    cache_write(cache, path);
    auto c = util::read_container(path, std::string_view(kCacheMagic, 8));
    auto header = nlohmann::json::parse(c.header);
    header["version"] = 2;
    util::write_container(path, std::string_view(kCacheMagic, 8), header.dump(), c.payload);
    CHECK_THROWS_AS(cache_read(path), FormatError);
  }

  SUBCASE("bad magic and truncation") {
    cache_write(cache, path);
    auto bytes = util::read_file(path);
    bytes.resize(bytes.size() / 2);
    util::write_file(path, bytes);
    CHECK_THROWS_AS(cache_read(path), CorruptionError);
    bytes[0] = 'X';
    util::write_file(path, bytes);
    CHECK_THROWS_AS(cache_read(path), FormatError);
  }

  SUBCASE("empty write") {
    GenerationCache empty = cache;
    empty.entries.clear();
    CHECK_THROWS_AS(cache_write(empty, path), ArgumentError);
  }

  SUBCASE("tampered image is detected by regeneration") {
    GenerationCache bad = cache;
    bad.entries[4].image[0] += 1.0f;
    CHECK(verify_cache(bad, teacher, sched, 1.0, 3) == 1);
  }

  SUBCASE("prefix and dataset view") {
    const auto p = cache_prefix(cache, 0.5);
    CHECK(p.size() == 6);
    const auto d = cache_to_dataset(p);
    CHECK(d.provenance == Provenance::Generated);
    CHECK(d.distinct_conditions().size() == 3);
  }
}
