#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstring>
#include <random>

#include "sfd/weight_store.hpp"

using namespace sfd;

TEST_CASE("empty store round trip") {
  WeightStore s;
  const auto bytes = s.save();
  CHECK(bytes.size() >= 14);  // magic + header length
  WeightStore loaded = WeightStore::load(bytes);
  CHECK(loaded.entry_count() == 0);
}

TEST_CASE("single tensor round trip") {
  WeightStore s;
  s.put("layer.weight", Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}), WeightDType::f64);
  WeightStore loaded = WeightStore::load(s.save());
  CHECK(loaded.contains("layer.weight"));
  CHECK(max_abs_diff(loaded.get("layer.weight"), s.get("layer.weight")) == 0.0);
  CHECK(loaded.dtype("layer.weight") == WeightDType::f64);
}

TEST_CASE("f32 storage is exact for float-representable values") {
  WeightStore s;
  s.put("w", Tensor({3}, {0.5, -1.25, 1024.0}), WeightDType::f32);
  WeightStore loaded = WeightStore::load(s.save());
  CHECK(max_abs_diff(loaded.get("w"), s.get("w")) == 0.0);
}

TEST_CASE("many random tensors keep names, shapes, values, order") {
  std::mt19937_64 rng(42);
  WeightStore s;
  std::vector<std::string> names;
  for (int i = 0; i < 50; ++i) {
    const std::size_t d0 = 1 + rng() % 4, d1 = 1 + rng() % 5;
    names.push_back("t" + std::to_string(i) + ".weight");
    s.put(names.back(), random_uniform({d0, d1}, rng),
          i % 2 == 0 ? WeightDType::f64 : WeightDType::f32);
  }
  WeightStore loaded = WeightStore::load(s.save());
  CHECK(loaded.entry_count() == 50);
  CHECK(loaded.names() == names);
  for (const std::string& n : names) {
    CHECK(loaded.get(n).shape() == s.get(n).shape());
    // f32 entries were written from doubles; compare after one round of
    // float truncation by saving/loading the original store twice.
    CHECK(max_abs_diff(loaded.get(n), WeightStore::load(s.save()).get(n)) == 0.0);
  }
}

TEST_CASE("save(load(save(s))) is byte-identical") {
  std::mt19937_64 rng(7);
  WeightStore s;
  s.put("a", random_uniform({4, 4}, rng), WeightDType::f32);
  s.put("b.c", random_uniform({2, 3, 4}, rng), WeightDType::f64);
  const auto first = s.save();
  const auto second = WeightStore::load(first).save();
  CHECK(first == second);
}

TEST_CASE("missing key names the key") {
  WeightStore s;
  try {
    s.get("enc1.conv1.weight");
    CHECK(false);
  } catch (const std::out_of_range& e) {
    CHECK(std::string(e.what()).find("enc1.conv1.weight") != std::string::npos);
  }
}

TEST_CASE("malformed files are rejected") {
  WeightStore s;
  s.put("w", Tensor({2}, {1.0, 2.0}), WeightDType::f32);
  auto bytes = s.save();

  {
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS(WeightStore::load(bad));
  }
  {
    auto bad = bytes;
    bad.resize(bad.size() - 3);  // truncated payload
    CHECK_THROWS(WeightStore::load(bad));
  }
  {
    auto bad = bytes;
    bad.resize(4);  // truncated before the header length
    CHECK_THROWS(WeightStore::load(bad));
  }
}

TEST_CASE("file round trip") {
  std::mt19937_64 rng(3);
  WeightStore s;
  s.put("x", random_uniform({5}, rng), WeightDType::f64);
  const std::string path = "weights_test_tmp.sfdw";
  s.save_file(path);
  WeightStore loaded = WeightStore::load_file(path);
  CHECK(max_abs_diff(loaded.get("x"), s.get("x")) == 0.0);
  std::remove(path.c_str());
}
