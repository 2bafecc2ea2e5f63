#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <doctest.h>

#include "pcprep/crossview.hpp"
#include "support/test_generators.hpp"
#include "support/test_oracles.hpp"

using namespace pcprep;

TEST_CASE("apply_augmentation") {
  SUBCASE("identity spec changes nothing") {
    RngStream rng(3);
    const PointCloud cloud = test::random_cloud(rng, 50);
    const std::vector<Box3D> boxes{test::random_box(rng), test::random_box(rng)};
    const auto [out_cloud, out_boxes] = apply_augmentation(cloud, boxes, AugmentationSpec{});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      CHECK(out_cloud.points[i].x == cloud.points[i].x);
      CHECK(out_cloud.points[i].y == cloud.points[i].y);
      CHECK(out_cloud.points[i].z == cloud.points[i].z);
    }
    CHECK(out_boxes[0].heading == boxes[0].heading);
    CHECK(out_boxes[1].l == boxes[1].l);
  }
  SUBCASE("quarter turn sends (1,0,0) to (0,1,0)") {
    PointCloud cloud;
    cloud.feature_dim = 3;
    cloud.points.push_back(Point{1, 0, 0, {}});
    AugmentationSpec spec;
    spec.rotation = M_PI / 2;
    const auto [out_cloud, out_boxes] = apply_augmentation(cloud, {}, spec);
    CHECK(out_cloud.points[0].x == doctest::Approx(0.0));
    CHECK(out_cloud.points[0].y == doctest::Approx(1.0));
    CHECK(out_cloud.points[0].z == doctest::Approx(0.0));
  }
  SUBCASE("flip_x negates the heading and is an involution") {
    const std::vector<Box3D> boxes{make_box(1, 2, 0, 4, 2, 2, 0.3)};
    AugmentationSpec spec;
    spec.flip_x = true;
    const auto [cloud_once, once] = apply_augmentation(PointCloud{{}, 3}, boxes, spec);
    CHECK(once[0].heading == doctest::Approx(-0.3));
    CHECK(once[0].cy == doctest::Approx(-2.0));
    const auto [cloud_twice, twice] = apply_augmentation(cloud_once, once, spec);
    CHECK(twice[0].heading == doctest::Approx(0.3));
    CHECK(twice[0].cy == doctest::Approx(2.0));
  }
  SUBCASE("flip_y maps heading to pi - heading") {
    const std::vector<Box3D> boxes{make_box(1, 2, 0, 4, 2, 2, 0.3)};
    AugmentationSpec spec;
    spec.flip_y = true;
    const auto [cloud_out, flipped] = apply_augmentation(PointCloud{{}, 3}, boxes, spec);
    CHECK(flipped[0].heading == doctest::Approx(M_PI - 0.3));
    CHECK(flipped[0].cx == doctest::Approx(-1.0));
  }
  SUBCASE("scale acts on coordinates and sizes") {
    const std::vector<Box3D> boxes{make_box(2, 4, 6, 4, 2, 2, 0.0)};
    PointCloud cloud;
    cloud.feature_dim = 3;
    cloud.points.push_back(Point{2, 4, 6, {}});
    AugmentationSpec spec;
    spec.scale = 0.5;
    const auto [out_cloud, out_boxes] = apply_augmentation(cloud, boxes, spec);
    CHECK(out_cloud.points[0].x == doctest::Approx(1.0));
    CHECK(out_cloud.points[0].z == doctest::Approx(3.0));
    CHECK(out_boxes[0].cy == doctest::Approx(2.0));
    CHECK(out_boxes[0].l == doctest::Approx(2.0));
    CHECK(out_boxes[0].h == doctest::Approx(1.0));
  }
}

TEST_CASE("inverse_transform_boxes") {
  SUBCASE("identity spec is the identity") {
    const std::vector<Box3D> boxes{make_box(1, 2, 3, 4, 2, 2, 0.3)};
    const auto back = inverse_transform_boxes(boxes, AugmentationSpec{});
    CHECK(back[0].cx == 1.0);
    CHECK(back[0].heading == doctest::Approx(0.3));
  }
  SUBCASE("scale 2 inverse of center (2,4,6) is (1,2,3)") {
    AugmentationSpec spec;
    spec.scale = 2.0;
    const auto back = inverse_transform_boxes({make_box(2, 4, 6, 2, 2, 2, 0)}, spec);
    CHECK(back[0].cx == doctest::Approx(1.0));
    CHECK(back[0].cy == doctest::Approx(2.0));
    CHECK(back[0].cz == doctest::Approx(3.0));
  }
  SUBCASE("round trip under random specs is the identity within 1e-9") {
    RngStream rng(21);
    for (int trial = 0; trial < 300; ++trial) {
      const AugmentationSpec spec = test::random_spec(rng);
      const Box3D box = test::random_box(rng);
      const auto [cloud, forward] = apply_augmentation(PointCloud{{}, 3}, {box}, spec);
      const auto back = inverse_transform_boxes(forward, spec);
      CHECK(std::abs(back[0].cx - box.cx) < 1e-9);
      CHECK(std::abs(back[0].cy - box.cy) < 1e-9);
      CHECK(std::abs(back[0].cz - box.cz) < 1e-9);
      CHECK(std::abs(back[0].l - box.l) < 1e-9);
      CHECK(std::abs(normalize_angle(back[0].heading - box.heading)) < 1e-9);
    }
  }
}

TEST_CASE("select_top_m") {
  auto proposal_with = [](double objectness) {
    Proposal p;
    p.box = make_box(0, 0, 0, 1, 1, 1, 0);
    p.objectness = objectness;
    p.feature = {0.0f};
    return p;
  };

  SUBCASE("m larger than N keeps everything") {
    const std::vector<Proposal> props{proposal_with(0.1), proposal_with(0.5), proposal_with(0.9)};
    CHECK(select_top_m(props, 256).size() == 3);
  }
  SUBCASE("keeps the highest scores by original index") {
    const std::vector<Proposal> props{proposal_with(0.9), proposal_with(0.1), proposal_with(0.5)};
    const auto idx = select_top_m_indices(props, 2);
    CHECK(idx == std::vector<int>{0, 2});
  }
  SUBCASE("ties keep the lower index") {
    const std::vector<Proposal> props{proposal_with(0.5), proposal_with(0.5)};
    const auto idx = select_top_m_indices(props, 1);
    CHECK(idx == std::vector<int>{0});
  }
  SUBCASE("m < 1 is rejected") {
    CHECK_THROWS_AS(select_top_m({}, 0), std::invalid_argument);
  }
}

namespace {

std::vector<Proposal> proposals_at(const std::vector<std::array<double, 3>>& centers,
                                   double objectness_start = 0.9) {
  std::vector<Proposal> out;
  double objectness = objectness_start;
  for (const auto& c : centers) {
    Proposal p;
    p.box = make_box(c[0], c[1], c[2], 1, 1, 1, 0);
    p.objectness = objectness;
    objectness = std::max(0.01, objectness - 0.05);
    p.feature = {1.0f, 2.0f};
    p.label = ProposalLabel::kUnknown;
    out.push_back(std::move(p));
  }
  return out;
}

std::set<std::pair<int, int>> pair_set(const MatchSet& matches) {
  std::set<std::pair<int, int>> out;
  for (const MatchPair& p : matches.pairs) out.emplace(p.view1_index, p.view2_index);
  return out;
}

}  // namespace

TEST_CASE("match_cross_view") {
  SUBCASE("identical sets under identity specs self-match at distance 0") {
    const auto props = proposals_at({{0, 0, 0}, {5, 0, 0}, {0, 5, 0}});
    const MatchSet matches = match_cross_view(props, props, {}, {}, {});
    REQUIRE(matches.size() == 3);
    for (const MatchPair& p : matches.pairs) {
      CHECK(p.view1_index == p.view2_index);
      CHECK(p.center_distance == 0.0);
    }
  }
  SUBCASE("0.5 m apart with tau 0.3 yields no pairs") {
    const auto view1 = proposals_at({{0, 0, 0}});
    const auto view2 = proposals_at({{0.5, 0, 0}});
    CHECK(match_cross_view(view1, view2, {}, {}, {}).size() == 0);
  }
  SUBCASE("strict inequality at exactly tau") {
    const auto view1 = proposals_at({{0, 0, 0}});
    const auto view2 = proposals_at({{0.3, 0, 0}});
    MatchConfig cfg;
    cfg.tau = 0.3;
    CHECK(match_cross_view(view1, view2, {}, {}, cfg).size() == 0);
  }
  SUBCASE("pairs respect the augmented frames") {
    // same underlying instance observed under two different rotations
    const auto base = proposals_at({{3, 1, 0}, {-4, 2, 0.5}});
    AugmentationSpec spec1;
    spec1.rotation = 0.7;
    AugmentationSpec spec2;
    spec2.rotation = -1.1;
    spec2.flip_x = true;
    std::vector<Box3D> boxes1, boxes2;
    for (const Proposal& p : base) boxes1.push_back(p.box);
    auto view1 = base;
    auto view2 = base;
    const auto aug1 = apply_augmentation(PointCloud{{}, 3}, boxes1, spec1).second;
    const auto aug2 = apply_augmentation(PointCloud{{}, 3}, boxes1, spec2).second;
    for (std::size_t i = 0; i < base.size(); ++i) {
      view1[i].box = aug1[i];
      view2[i].box = aug2[i];
    }
    const MatchSet matches = match_cross_view(view1, view2, spec1, spec2, {});
    REQUIRE(matches.size() == 2);
    CHECK(pair_set(matches) == std::set<std::pair<int, int>>{{0, 0}, {1, 1}});
  }
  SUBCASE("equals the brute-force oracle on random instances") {
    RngStream rng(47);
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t n1 = static_cast<std::size_t>(rng.uniform(0, 64));
      const std::size_t n2 = static_cast<std::size_t>(rng.uniform(0, 64));
      const auto view1 = test::random_proposals(rng, n1);
      const auto view2 = test::random_proposals(rng, n2);
      const AugmentationSpec spec1 = test::random_spec(rng);
      const AugmentationSpec spec2 = test::random_spec(rng);
      MatchConfig cfg;
      cfg.top_m = 1 + static_cast<int>(rng.uniform(0, 48));
      cfg.tau = rng.uniform(0.5, 30.0);  // wide so pairs actually form
      const MatchSet got = match_cross_view(view1, view2, spec1, spec2, cfg);
      const MatchSet expected = test::oracle_match(view1, view2, spec1, spec2, cfg);
      CHECK(pair_set(got) == pair_set(expected));

      // one-to-one and distance bounds
      std::set<int> used1, used2;
      for (const MatchPair& p : got.pairs) {
        CHECK(used1.insert(p.view1_index).second);
        CHECK(used2.insert(p.view2_index).second);
        CHECK(p.center_distance < cfg.tau);
      }
    }
  }
  SUBCASE("symmetric under view swap") {
    RngStream rng(53);
    for (int trial = 0; trial < 40; ++trial) {
      const auto view1 = test::random_proposals(rng, 40);
      const auto view2 = test::random_proposals(rng, 40);
      const AugmentationSpec spec1 = test::random_spec(rng);
      const AugmentationSpec spec2 = test::random_spec(rng);
      MatchConfig cfg;
      cfg.tau = 25.0;
      const MatchSet forward = match_cross_view(view1, view2, spec1, spec2, cfg);
      const MatchSet backward = match_cross_view(view2, view1, spec2, spec1, cfg);
      std::set<std::pair<int, int>> transposed;
      for (const MatchPair& p : backward.pairs) transposed.emplace(p.view2_index, p.view1_index);
      CHECK(pair_set(forward) == transposed);
    }
  }
  SUBCASE("decreasing tau never increases K") {
    RngStream rng(59);
    const auto view1 = test::random_proposals(rng, 60);
    const auto view2 = test::random_proposals(rng, 60);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double tau : {40.0, 20.0, 10.0, 5.0, 1.0, 0.1}) {
      MatchConfig cfg;
      cfg.tau = tau;
      const std::size_t k = match_cross_view(view1, view2, {}, {}, cfg).size();
      CHECK(k <= previous);
      previous = k;
    }
  }
  SUBCASE("mismatched feature dimensions are rejected") {
    auto view1 = proposals_at({{0, 0, 0}});
    auto view2 = proposals_at({{0, 0, 0}});
    view2[0].feature.push_back(3.0f);
    CHECK_THROWS_AS(match_cross_view(view1, view2, {}, {}, {}), std::invalid_argument);
  }
}

TEST_CASE("consistency_loss") {
  SUBCASE("identical matched features give 0") {
    const auto props = proposals_at({{0, 0, 0}, {5, 0, 0}});
    const MatchSet matches = match_cross_view(props, props, {}, {}, {});
    const auto loss = consistency_loss(matches, props, props, 1);
    CHECK(loss.value == 0.0);
    CHECK_FALSE(loss.empty_match);
  }
  SUBCASE("documented one-pair example evaluates to 2.5") {
    auto view1 = proposals_at({{0, 0, 0}});
    auto view2 = proposals_at({{0, 0, 0}});
    view1[0].feature = {1.0f, 3.0f};
    view2[0].feature = {2.0f, 5.0f};
    MatchSet matches;
    matches.pairs.push_back({0, 0, 0.0});
    const auto loss = consistency_loss(matches, view1, view2, 1);
    CHECK(loss.value == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(loss.value ==
          doctest::Approx(test::oracle_consistency_loss(matches, view1, view2, 1, true)).epsilon(1e-12));
  }
  SUBCASE("sum-over-dims convention doubles the example") {
    auto view1 = proposals_at({{0, 0, 0}});
    auto view2 = proposals_at({{0, 0, 0}});
    view1[0].feature = {1.0f, 3.0f};
    view2[0].feature = {2.0f, 5.0f};
    MatchSet matches;
    matches.pairs.push_back({0, 0, 0.0});
    const auto loss = consistency_loss(matches, view1, view2, 1, FeatureReduction::kSumOverDims);
    CHECK(loss.value == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("doubling the batch size halves the loss") {
    RngStream rng(61);
    const auto view1 = test::random_proposals(rng, 30);
    const auto view2 = test::random_proposals(rng, 30);
    MatchConfig cfg;
    cfg.tau = 30.0;
    const MatchSet matches = match_cross_view(view1, view2, {}, {}, cfg);
    REQUIRE(matches.size() > 0);
    const double base = consistency_loss(matches, view1, view2, 1).value;
    CHECK(consistency_loss(matches, view1, view2, 2).value == doctest::Approx(base / 2).epsilon(1e-12));
    CHECK(consistency_loss(matches, view1, view2, 4).value == doctest::Approx(base / 4).epsilon(1e-12));
    CHECK(consistency_loss(matches, view1, view2, 8).value == doctest::Approx(base / 8).epsilon(1e-12));
  }
  SUBCASE("invariant under permuting the pair order") {
    RngStream rng(67);
    const auto view1 = test::random_proposals(rng, 20);
    const auto view2 = test::random_proposals(rng, 20);
    MatchConfig cfg;
    cfg.tau = 30.0;
    MatchSet matches = match_cross_view(view1, view2, {}, {}, cfg);
    REQUIRE(matches.size() > 1);
    const double base = consistency_loss(matches, view1, view2, 1).value;
    std::reverse(matches.pairs.begin(), matches.pairs.end());
    CHECK(consistency_loss(matches, view1, view2, 1).value == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("K = 0 yields 0 with the empty flag") {
    const auto loss = consistency_loss(MatchSet{}, {}, {}, 1);
    CHECK(loss.value == 0.0);
    CHECK(loss.empty_match);
  }
  SUBCASE("nonnegative on random inputs") {
    RngStream rng(71);
    for (int trial = 0; trial < 20; ++trial) {
      const auto view1 = test::random_proposals(rng, 16);
      const auto view2 = test::random_proposals(rng, 16);
      MatchConfig cfg;
      cfg.tau = 40.0;
      const MatchSet matches = match_cross_view(view1, view2, {}, {}, cfg);
      CHECK(consistency_loss(matches, view1, view2, 1).value >= 0.0);
    }
  }
}

TEST_CASE("promote_unknowns") {
  auto with_label = [](ProposalLabel label) {
    Proposal p;
    p.box = make_box(0, 0, 0, 1, 1, 1, 0);
    p.objectness = 0.5;
    p.feature = {0.0f};
    p.label = label;
    return p;
  };

  SUBCASE("no matches change nothing") {
    const std::vector<Proposal> view{with_label(ProposalLabel::kUnknown)};
    const auto [out1, out2] = promote_unknowns(view, view, MatchSet{});
    CHECK(out1[0].label == ProposalLabel::kUnknown);
    CHECK(out2[0].label == ProposalLabel::kUnknown);
  }
  SUBCASE("matched unknown pair is promoted on both sides") {
    const std::vector<Proposal> view{with_label(ProposalLabel::kUnknown)};
    MatchSet matches;
    matches.pairs.push_back({0, 0, 0.0});
    const auto [out1, out2] = promote_unknowns(view, view, matches);
    CHECK(out1[0].label == ProposalLabel::kForegroundUnknown);
    CHECK(out2[0].label == ProposalLabel::kForegroundUnknown);
  }
  SUBCASE("labeled proposals are never altered") {
    const std::vector<Proposal> view1{with_label(ProposalLabel::kVehicle)};
    const std::vector<Proposal> view2{with_label(ProposalLabel::kUnknown)};
    MatchSet matches;
    matches.pairs.push_back({0, 0, 0.0});
    const auto [out1, out2] = promote_unknowns(view1, view2, matches);
    CHECK(out1[0].label == ProposalLabel::kVehicle);
    CHECK(out2[0].label == ProposalLabel::kForegroundUnknown);
  }
  SUBCASE("never demotes across random instances") {
    RngStream rng(73);
    const auto view1 = test::random_proposals(rng, 24);
    const auto view2 = test::random_proposals(rng, 24);
    MatchConfig cfg;
    cfg.tau = 30.0;
    const MatchSet matches = match_cross_view(view1, view2, {}, {}, cfg);
    const auto [out1, out2] = promote_unknowns(view1, view2, matches);
    for (std::size_t i = 0; i < view1.size(); ++i)
      if (view1[i].label != ProposalLabel::kUnknown) CHECK(out1[i].label == view1[i].label);
    for (std::size_t i = 0; i < view2.size(); ++i)
      if (view2[i].label != ProposalLabel::kUnknown) CHECK(out2[i].label == view2[i].label);
  }
}

TEST_CASE("proposal label round trip") {
  for (ProposalLabel label : {ProposalLabel::kVehicle, ProposalLabel::kPedestrian, ProposalLabel::kCyclist,
                              ProposalLabel::kUnknown, ProposalLabel::kForegroundUnknown})
    CHECK(proposal_label_from_string(to_string(label)) == label);
  CHECK_FALSE(proposal_label_from_string("Giraffe").has_value());
}

TEST_CASE("default augmentation sampler stays in its documented ranges") {
  RngStream rng(79);
  for (int i = 0; i < 500; ++i) {
    const AugmentationSpec spec = sample_augmentation_spec(rng);
    CHECK(spec.rotation >= -M_PI);
    CHECK(spec.rotation <= M_PI);
    CHECK(spec.scale >= 0.7);
    CHECK(spec.scale <= 1.2);
  }
}
