#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "osanet/metrics.hpp"
#include "osanet/rng.hpp"

using namespace osanet;
using metrics::ClassReport;
using metrics::ConfusionMatrix;

namespace {

ConfusionMatrix make_cm(const std::array<std::array<std::uint64_t, 4>, 4>& rows) {
  ConfusionMatrix cm;
  cm.counts = rows;
  return cm;
}

// Reference single-night hold-out confusion matrices, one per channel group.
const ConfusionMatrix kEcgTest = make_cm({{{1000, 0, 3, 5},
                                           {10, 1032, 6, 8},
                                           {1, 0, 1022, 3},
                                           {3, 1, 2, 1000}}});
const ConfusionMatrix kEegTest = make_cm({{{976, 12, 4, 26},
                                           {7, 1014, 11, 9},
                                           {28, 30, 945, 28},
                                           {28, 21, 16, 941}}});
const ConfusionMatrix kEmgTest = make_cm({{{731, 14, 9, 31},
                                           {11, 795, 5, 17},
                                           {9, 7, 775, 7},
                                           {17, 7, 0, 765}}});
const ConfusionMatrix kRespTest = make_cm({{{461, 10, 14, 19},
                                            {10, 478, 14, 26},
                                            {20, 7, 468, 14},
                                            {13, 11, 6, 477}}});
const ConfusionMatrix kEcgTrain = make_cm({{{3321, 0, 1, 2},
                                            {0, 3511, 5, 2},
                                            {1, 5, 3378, 0},
                                            {0, 2, 0, 3340}}});

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("ECG hold-out scores reproduce the reference values") {
  const ClassReport rep = metrics::report(kEcgTest);

  // exact count ratios
  CHECK(rep.accuracy == doctest::Approx(4054.0 / 4096.0).epsilon(1e-12));
  CHECK(rep.per_class[0].precision == doctest::Approx(1000.0 / 1014.0).epsilon(1e-12));
  CHECK(rep.per_class[0].recall == doctest::Approx(1000.0 / 1008.0).epsilon(1e-12));
  CHECK(rep.per_class[1].precision == doctest::Approx(1032.0 / 1033.0).epsilon(1e-12));

  // and their published four-decimal roundings
  CHECK(std::abs(rep.accuracy - 0.9897) <= 5e-5);
  CHECK(std::abs(rep.per_class[0].precision - 0.9862) <= 5e-5);
  CHECK(std::abs(rep.per_class[0].recall - 0.9921) <= 5e-5);
  CHECK(std::abs(rep.per_class[1].precision - 0.9990) <= 5e-5);

  for (const auto& s : rep.per_class) {
    CHECK(s.precision_defined);
    CHECK(s.recall_defined);
    CHECK(s.f1_defined);
    const double f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    CHECK(s.f1 == doctest::Approx(f1).epsilon(1e-12));
  }
}

TEST_CASE("all four channel groups land on their reference accuracies") {
  struct Case {
    const ConfusionMatrix* cm;
    double published;
    double exact;
  };
  const Case cases[] = {
      {&kEcgTest, 0.9897, 4054.0 / 4096.0},
      {&kEegTest, 0.9463, 3876.0 / 4096.0},
      {&kEmgTest, 0.9581, 3066.0 / 3200.0},
      {&kRespTest, 0.9199, 1884.0 / 2048.0},
      {&kEcgTrain, 0.9987, 13550.0 / 13568.0},
  };
  for (const Case& c : cases) {
    const ClassReport rep = metrics::report(*c.cm);
    CHECK(rep.accuracy == doctest::Approx(c.exact).epsilon(1e-12));
    CHECK(std::abs(rep.accuracy - c.published) <= 0.002);
  }
}

TEST_CASE("confusion counts predictions against labels by direct counting") {
  SplitMix64 rng(404);
  std::vector<std::uint8_t> preds(1000), labels(1000);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i] = static_cast<std::uint8_t>(rng.next_below(4));
    labels[i] = static_cast<std::uint8_t>(rng.next_below(4));
  }
  const ConfusionMatrix cm = metrics::confusion(preds, labels);

  std::uint64_t naive[4][4] = {};
  std::uint64_t matches = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++naive[labels[i]][preds[i]];
    if (preds[i] == labels[i]) ++matches;
  }
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t p = 0; p < 4; ++p) CHECK(cm.counts[t][p] == naive[t][p]);
  CHECK(cm.total() == 1000);
  CHECK(cm.trace() == matches);

  const ClassReport rep = metrics::report(cm);
  CHECK(rep.accuracy ==
        doctest::Approx(static_cast<double>(matches) / 1000.0).epsilon(1e-12));
  for (std::size_t c = 0; c < 4; ++c) {
    std::uint64_t tp = naive[c][c], col = 0, row = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      col += naive[k][c];
      row += naive[c][k];
    }
    CHECK(rep.per_class[c].precision ==
          doctest::Approx(static_cast<double>(tp) / static_cast<double>(col)).epsilon(1e-12));
    CHECK(rep.per_class[c].recall ==
          doctest::Approx(static_cast<double>(tp) / static_cast<double>(row)).epsilon(1e-12));
  }

  SUBCASE("pair order does not matter") {
    std::vector<std::size_t> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_below(i))]);
    }
    std::vector<std::uint8_t> p2, l2;
    for (std::size_t i : order) {
      p2.push_back(preds[i]);
      l2.push_back(labels[i]);
    }
    const ConfusionMatrix cm2 = metrics::confusion(p2, l2);
    CHECK(cm2.counts == cm.counts);
  }
}

TEST_CASE("perfect predictions score 1.0 everywhere") {
  SplitMix64 rng(17);
  std::vector<std::uint8_t> labels(256);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.next_below(4));
  const ClassReport rep = metrics::report(metrics::confusion(labels, labels));
  CHECK(rep.accuracy == 1.0);
  for (const auto& s : rep.per_class) {
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);
    CHECK(s.f1 == 1.0);
  }
}

TEST_CASE("accuracy decomposes as recall weighted by class share") {
  const ClassReport rep = metrics::report(kEegTest);
  double acc = 0.0;
  for (std::size_t c = 0; c < 4; ++c) {
    const double share = static_cast<double>(kEegTest.row_sum(c)) /
                         static_cast<double>(kEegTest.total());
    acc += rep.per_class[c].recall * share;
  }
  CHECK(rep.accuracy == doctest::Approx(acc).epsilon(1e-12));
}

TEST_CASE("zero denominators clear the defined flags") {
  // everything is a true-NL predicted-MIN: most denominators vanish
  ConfusionMatrix cm;
  cm.counts[0][1] = 10;
  const ClassReport rep = metrics::report(cm);

  CHECK(rep.accuracy == 0.0);
  // NL: predicted never (precision undefined), present in labels (recall 0)
  CHECK(!rep.per_class[0].precision_defined);
  CHECK(rep.per_class[0].precision == 0.0);
  CHECK(rep.per_class[0].recall_defined);
  CHECK(rep.per_class[0].recall == 0.0);
  CHECK(!rep.per_class[0].f1_defined);
  // MIN: predicted (precision 0), absent from labels (recall undefined)
  CHECK(rep.per_class[1].precision_defined);
  CHECK(rep.per_class[1].precision == 0.0);
  CHECK(!rep.per_class[1].recall_defined);
  CHECK(!rep.per_class[1].f1_defined);
  // MOD/SV: never seen at all
  for (std::size_t c = 2; c < 4; ++c) {
    CHECK(!rep.per_class[c].precision_defined);
    CHECK(!rep.per_class[c].recall_defined);
    CHECK(!rep.per_class[c].f1_defined);
    CHECK(rep.per_class[c].f1 == 0.0);
  }
}

TEST_CASE("degenerate inputs are rejected") {
  CHECK_THROWS_WITH_AS(metrics::report(ConfusionMatrix{}), doctest::Contains("empty"),
                       metrics::MetricsError);

  const std::vector<std::uint8_t> a = {0, 1};
  const std::vector<std::uint8_t> b = {0};
  CHECK_THROWS_AS(metrics::confusion(a, b), metrics::MetricsError);

  const std::vector<std::uint8_t> bad = {4};
  const std::vector<std::uint8_t> ok = {0};
  CHECK_THROWS_WITH_AS(metrics::confusion(bad, ok), doctest::Contains("out of range"),
                       metrics::MetricsError);
  CHECK_THROWS_AS(metrics::confusion(ok, bad), metrics::MetricsError);
}

TEST_CASE("json rendering carries the full report") {
  const ClassReport rep = metrics::report(kEcgTest, 0.0123);
  const auto j = nlohmann::json::parse(metrics::to_json(rep));

  CHECK(j["accuracy"].get<double>() == doctest::Approx(0.9897).epsilon(1e-9));
  CHECK(j["mean_loss"].get<double>() == doctest::Approx(0.0123).epsilon(1e-9));
  CHECK(j["classes"]["NL"]["precision"].get<double>() ==
        doctest::Approx(0.9862).epsilon(1e-9));
  CHECK(j["classes"]["NL"]["recall"].get<double>() == doctest::Approx(0.9921).epsilon(1e-9));
  CHECK(j["classes"]["MIN"]["precision"].get<double>() ==
        doctest::Approx(0.9990).epsilon(1e-9));
  const auto row0 = j["confusion"][0].get<std::vector<std::uint64_t>>();
  CHECK(row0 == std::vector<std::uint64_t>{1000, 0, 3, 5});
  const auto row3 = j["confusion"][3].get<std::vector<std::uint64_t>>();
  CHECK(row3 == std::vector<std::uint64_t>{3, 1, 2, 1000});
  CHECK(!j["classes"]["NL"].contains("undefined"));

  SUBCASE("undefined scores are flagged") {
    ConfusionMatrix cm;
    cm.counts[0][1] = 10;
    const auto dj = nlohmann::json::parse(metrics::to_json(metrics::report(cm)));
    const auto undef = dj["classes"]["MOD"]["undefined"].get<std::vector<std::string>>();
    CHECK(undef == std::vector<std::string>{"precision", "recall", "f1"});
  }
}

TEST_CASE("text rendering is aligned and annotated") {
  const std::string txt = metrics::to_text(metrics::report(kEcgTest, 0.0123));
  CHECK(txt.find("rows true, columns predicted") != std::string::npos);
  CHECK(txt.find("accuracy    0.9897") != std::string::npos);
  CHECK(txt.find("loss        0.0123") != std::string::npos);
  CHECK(txt.find("1032") != std::string::npos);
  CHECK(txt.find("zero denominator") == std::string::npos);

  ConfusionMatrix cm;
  cm.counts[0][1] = 10;
  const std::string degenerate = metrics::to_text(metrics::report(cm));
  CHECK(degenerate.find("(zero denominator)") != std::string::npos);
}

}  // TEST_SUITE
