#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "lmix/vlr.hpp"
#include "test_util.hpp"

using namespace lmix;

namespace {

// Positions of every vertex id in an arrangement.
std::vector<int> positions_of(const std::vector<int>& order) {
  std::vector<int> pos(order.size());
  for (size_t i = 0; i < order.size(); ++i) pos[size_t(order[i])] = int(i);
  return pos;
}

void collect_vertex_ids(const IdTree& t, std::vector<int>& out) {
  out.push_back(2 * t.value);
  out.push_back(2 * t.value + 1);
  for (const IdTree& c : t.children) collect_vertex_ids(c, out);
}

}  // namespace

TEST_CASE("group_element_ids: text on an underlay") {
  const std::vector<int> cats{2, 1};
  const std::vector<Corners> boxes{{0, 0, 100, 100}, {10, 10, 90, 90}};
  const auto forest = group_element_ids(cats, boxes, {2, 0.8, 0.5});
  REQUIRE(forest.size() == 1);
  CHECK(forest[0].value == 0);
  REQUIRE(forest[0].children.size() == 1);
  CHECK(forest[0].children[0].value == 1);
}

TEST_CASE("group_element_ids: no underlay fast path") {
  const std::vector<int> cats{1, 1};
  const std::vector<Corners> boxes{{0, 0, 10, 10}, {20, 20, 40, 40}};
  const auto forest = group_element_ids(cats, boxes);
  REQUIRE(forest.size() == 2);
  CHECK(forest[0].value == 0);
  CHECK(forest[1].value == 1);
  CHECK(forest[0].children.empty());
  CHECK(forest[1].children.empty());
}

TEST_CASE("group_element_ids: nested underlays attach to the nearest parent") {
  const std::vector<int> cats{2, 2, 1};
  const std::vector<Corners> boxes{
      {0, 0, 200, 200}, {10, 10, 100, 100}, {20, 20, 80, 80}};
  const auto forest = group_element_ids(cats, boxes);
  REQUIRE(forest.size() == 1);
  CHECK(forest[0].value == 0);
  REQUIRE(forest[0].children.size() == 1);
  CHECK(forest[0].children[0].value == 1);
  REQUIRE(forest[0].children[0].children.size() == 1);
  CHECK(forest[0].children[0].children[0].value == 2);
}

TEST_CASE("group_element_ids rejects mismatched lengths") {
  const std::vector<int> cats{1};
  const std::vector<Corners> boxes{{0, 0, 1, 1}, {0, 0, 2, 2}};
  CHECK_THROWS_AS(group_element_ids(cats, boxes), ValidationError);
}

TEST_CASE("sorting_weights") {
  CHECK(sorting_weights(std::vector<double>{0}, std::vector<double>{0}) ==
        std::vector<double>{0});
  CHECK(sorting_weights(std::vector<double>{100}, std::vector<double>{50}) ==
        std::vector<double>{51.0});
  const auto w =
      sorting_weights(std::vector<double>{10, 20}, std::vector<double>{5, 5});
  CHECK(w[0] < w[1]);
}

TEST_CASE("arrange_vertex_ids: group end closes after its children") {
  std::vector<IdTree> forest(1);
  forest[0].value = 0;
  forest[0].children.push_back({1, {}});
  // weights indexed by vertex id: underlay vertices 0,1; text vertices 2,3
  const std::vector<double> weights{0.0, 202.0, 50.5, 151.5};
  CHECK(arrange_vertex_ids(forest, weights) == std::vector<int>{0, 2, 3, 1});
}

TEST_CASE("arrange_vertex_ids: top-level sort by start weight") {
  std::vector<IdTree> forest{{0, {}}, {1, {}}};
  const std::vector<double> weights{100.0, 120.0, 10.0, 30.0};
  CHECK(arrange_vertex_ids(forest, weights) == std::vector<int>{2, 3, 0, 1});
}

TEST_CASE("arrange_vertex_ids: singleton") {
  std::vector<IdTree> forest{{0, {}}};
  const std::vector<double> weights{1.0, 2.0};
  CHECK(arrange_vertex_ids(forest, weights) == std::vector<int>{0, 1});
}

TEST_CASE("arrange_vertex_ids rejects short weight lists") {
  std::vector<IdTree> forest{{1, {}}};
  const std::vector<double> weights{1.0, 2.0};  // vertex ids 2,3 out of range
  CHECK_THROWS_AS(arrange_vertex_ids(forest, weights), ValidationError);
}

TEST_CASE("encode_vlr: single text element") {
  const auto v = encode_vlr({{1, {100, 100, 50, 20}}});
  REQUIRE(v.size() == 2);
  CHECK(v[0].category == 2);
  CHECK(v[0].x == 75);
  CHECK(v[0].y == 90);
  CHECK(v[1].category == 3);
  CHECK(v[1].x == 125);
  CHECK(v[1].y == 110);
}

TEST_CASE("encode_vlr: empty layout") { CHECK(encode_vlr({}).empty()); }

TEST_CASE("encode_vlr: underlay wraps the text it encloses") {
  const Layout layout{{2, xyxy_to_cxcywh({0, 0, 100, 100})},
                      {1, xyxy_to_cxcywh({10, 10, 90, 90})}};
  const auto v = encode_vlr(layout);
  REQUIRE(v.size() == 4);
  CHECK(v[0].category == 4);
  CHECK(v[0].x == 0);
  CHECK(v[0].y == 0);
  CHECK(v[1].category == 2);
  CHECK(v[1].x == 10);
  CHECK(v[1].y == 10);
  CHECK(v[2].category == 3);
  CHECK(v[2].x == 90);
  CHECK(v[2].y == 90);
  CHECK(v[3].category == 5);
  CHECK(v[3].x == 100);
  CHECK(v[3].y == 100);
}

TEST_CASE("decode_vlr: inverse of the single-text encode") {
  const VertexTensor v{{2, 75, 90}, {3, 125, 110}};
  const Layout layout = decode_vlr(v);
  REQUIRE(layout.size() == 1);
  CHECK(layout[0].category == 1);
  CHECK(layout[0].box.cx == 100);
  CHECK(layout[0].box.cy == 100);
  CHECK(layout[0].box.w == 50);
  CHECK(layout[0].box.h == 20);
}

TEST_CASE("decode_vlr: empty and malformed tensors") {
  CHECK(decode_vlr({}).empty());
  CHECK_THROWS_AS(decode_vlr({{3, 0, 0}}), ValidationError);           // lone end
  CHECK_THROWS_AS(decode_vlr({{2, 0, 0}, {2, 1, 1}}), ValidationError);  // two starts
  CHECK_THROWS_AS(decode_vlr({{2, 0, 0}, {5, 1, 1}}), ValidationError);  // crossed
}

TEST_CASE("arrangement is a permutation of [0, 2n)") {
  Rng rng(100);
  for (int trial = 0; trial < 300; ++trial) {
    const Layout layout = testutil::random_layout(rng);
    if (layout.empty()) continue;
    std::vector<int> cats;
    std::vector<Corners> corners;
    std::vector<double> xs, ys;
    for (const Element& e : layout) {
      cats.push_back(e.category);
      const Corners c = cxcywh_to_xyxy(e.box);
      corners.push_back(c);
      xs.push_back(c.xl);
      xs.push_back(c.xr);
      ys.push_back(c.yt);
      ys.push_back(c.yb);
    }
    const auto forest = group_element_ids(cats, corners);
    auto order = arrange_vertex_ids(forest, sorting_weights(xs, ys));
    std::sort(order.begin(), order.end());
    std::vector<int> expect(order.size());
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(order == expect);
  }
}

TEST_CASE("exact round trip on random layouts") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Layout layout = testutil::random_layout(rng);
    const Layout back = decode_vlr(encode_vlr(layout));
    REQUIRE(testutil::layouts_equal_exact(layout, back));
  }
}

TEST_CASE("leaf adjacency and group closure") {
  Rng rng(555);
  for (int trial = 0; trial < 300; ++trial) {
    const Layout layout = testutil::random_layout(rng);
    if (layout.empty()) continue;
    std::vector<int> cats;
    std::vector<Corners> corners;
    std::vector<double> xs, ys;
    for (const Element& e : layout) {
      cats.push_back(e.category);
      const Corners c = cxcywh_to_xyxy(e.box);
      corners.push_back(c);
      xs.push_back(c.xl);
      xs.push_back(c.xr);
      ys.push_back(c.yt);
      ys.push_back(c.yb);
    }
    const auto forest = group_element_ids(cats, corners);
    const auto order = arrange_vertex_ids(forest, sorting_weights(xs, ys));
    const auto pos = positions_of(order);

    auto walk = [&](auto&& self, const IdTree& t) -> void {
      if (t.children.empty()) {
        CHECK(pos[size_t(2 * t.value + 1)] == pos[size_t(2 * t.value)] + 1);
      } else {
        const int lo = pos[size_t(2 * t.value)];
        const int hi = pos[size_t(2 * t.value + 1)];
        std::vector<int> inner;
        for (const IdTree& c : t.children) collect_vertex_ids(c, inner);
        for (int id : inner) {
          CHECK(pos[size_t(id)] > lo);
          CHECK(pos[size_t(id)] < hi);
        }
      }
      for (const IdTree& c : t.children) self(self, c);
    };
    for (const IdTree& t : forest) walk(walk, t);
  }
}

TEST_CASE("grouping agrees with the per-node oracle") {
  Rng rng(31337);
  const std::vector<std::pair<double, double>> thresholds{
      {0.8, 0.5}, {0.9, 0.7}, {0.5, 0.3}, {0.99, 0.95}};
  for (const auto& [eps_u, eps_n] : thresholds) {
    const GroupingParams gp{2, eps_u, eps_n, OverlapMode::Enclosure};
    for (int trial = 0; trial < 200; ++trial) {
      const Layout layout = testutil::random_layout(rng);
      std::vector<int> cats;
      std::vector<Corners> corners;
      for (const Element& e : layout) {
        cats.push_back(e.category);
        corners.push_back(cxcywh_to_xyxy(e.box));
      }
      const auto got = group_element_ids(cats, corners, gp);
      const auto want = testutil::grouping_oracle(cats, corners, gp);
      REQUIRE(testutil::forests_equal(got, want));
    }
  }
}

TEST_CASE("arrangement order is stable under uniform translation") {
  Rng rng(808);
  for (int trial = 0; trial < 200; ++trial) {
    const Layout layout = testutil::random_layout(rng, {224, 224}, 12, 4, 2, false);
    auto arrangement = [&](const Layout& l, double delta) {
      std::vector<int> cats;
      std::vector<Corners> corners;
      std::vector<double> xs, ys;
      for (const Element& e : l) {
        cats.push_back(e.category);
        Corners c = cxcywh_to_xyxy(e.box);
        c.xl += delta;
        c.xr += delta;
        c.yt += delta;
        c.yb += delta;
        corners.push_back(c);
        xs.push_back(c.xl);
        xs.push_back(c.xr);
        ys.push_back(c.yt);
        ys.push_back(c.yb);
      }
      return arrange_vertex_ids(group_element_ids(cats, corners),
                                sorting_weights(xs, ys));
    };
    CHECK(arrangement(layout, 0.0) == arrangement(layout, 64.0));
  }
}

TEST_CASE("round trip with many identical elements") {
  Layout layout;
  for (int i = 0; i < 10; ++i) layout.push_back({1, {100, 100, 40, 20}});
  for (int i = 0; i < 3; ++i) layout.push_back({2, xyxy_to_cxcywh({60, 70, 160, 130})});
  const Layout back = decode_vlr(encode_vlr(layout));
  CHECK(testutil::layouts_equal_exact(layout, back));
}

TEST_CASE("encode handles duplicate underlays deterministically") {
  // two identical underlays: the later one (by stable area sort) adopts the
  // earlier one, and the single text lands in the innermost
  const Layout layout{{2, xyxy_to_cxcywh({0, 0, 100, 100})},
                      {2, xyxy_to_cxcywh({0, 0, 100, 100})},
                      {1, xyxy_to_cxcywh({10, 10, 20, 20})}};
  const auto forest = group_element_ids(std::vector<int>{2, 2, 1},
                                        std::vector<Corners>{{0, 0, 100, 100},
                                                             {0, 0, 100, 100},
                                                             {10, 10, 20, 20}});
  REQUIRE(forest.size() == 1);
  CHECK(forest[0].value == 1);
  REQUIRE(forest[0].children.size() == 1);
  CHECK(forest[0].children[0].value == 0);
  CHECK(forest[0].children[0].children.size() == 1);  // text inside element 0
  const Layout back = decode_vlr(encode_vlr(layout));
  CHECK(testutil::layouts_equal_exact(layout, back));
}
