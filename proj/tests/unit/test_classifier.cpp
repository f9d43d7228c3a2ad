#include <doctest.h>

#include "helpers.hpp"
#include "ubiphysio/classifier.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/synth.hpp"

using namespace ubiphysio;

namespace {

ClsConfig tiny_cls() {
  ClsConfig c;
  c.num_classes = 3;
  c.stem_channels = 8;
  c.stage2_channels = 8;
  c.batch = 4;
  c.epochs = 2;
  c.lr_decay_epoch = 1;
  c.train_ratio = 0.6;
  c.val_ratio = 0.2;
  c.test_ratio = 0.2;
  return c;
}

std::vector<LabeledInstance> tiny_data() {
  std::vector<LabeledInstance> out;
  for (int p = 0; p < 5; ++p) {
    for (int a = 1; a <= 3; ++a) {
      SynthSpec s;
      s.action_type = a;
      s.seed = static_cast<std::uint64_t>(p * 10 + a);
      s.participant_seed = static_cast<std::uint64_t>(p);
      s.duration_s = 0.5;
      LabeledInstance inst;
      inst.participant = "p" + std::to_string(p);
      inst.id = inst.participant + "_a" + std::to_string(a);
      inst.label = a;
      inst.features = extract(synthesize_action(s).motion);
      out.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("classifier") {
  TEST_CASE("participant split is disjoint, complete and deterministic") {
    std::vector<std::string> people;
    for (int i = 0; i < 40; ++i) people.push_back("p" + std::to_string(i));
    people.push_back("p3");  // duplicates collapse
    auto s = split_participants(people, 0.05, 0.10, 7);
    CHECK(s.train.size() + s.val.size() + s.test.size() == 40);
    CHECK(s.test.size() == 4);
    CHECK(s.val.size() == 2);
    CHECK_NOTHROW(verify_disjoint(s));
    auto again = split_participants(people, 0.05, 0.10, 7);
    CHECK(again.test == s.test);
    auto other = split_participants(people, 0.05, 0.10, 8);
    CHECK(other.test != s.test);

    s.val.insert(*s.train.begin());
    CHECK_THROWS_AS(verify_disjoint(s), ValidationError);
    CHECK_THROWS_AS(split_participants({"a", "b"}, 0.5, 0.5, 0), ValidationError);
  }

  TEST_CASE("argmax picks the lowest index on ties") {
    Eigen::VectorXd v(4);
    v << 1.0, 3.0, 3.0, -1.0;
    CHECK(argmax_lowest(v) == 1);
    CHECK_THROWS_AS(argmax_lowest(Eigen::VectorXd()), ValidationError);
  }

  TEST_CASE("inputs shorter than 8 frames or of the wrong width are rejected") {
    auto cfg = tiny_cls();
    Classifier m(cfg);
    m.stats.mean = Eigen::VectorXd::Zero(cfg.input_dim);
    m.stats.std = Eigen::VectorXd::Ones(cfg.input_dim);
    FeatureMatrix f;
    f.values = Eigen::MatrixXd::Zero(7, cfg.input_dim);
    CHECK_THROWS_AS(m.predict(f), InsufficientFramesError);
    f.values = Eigen::MatrixXd::Zero(8, cfg.input_dim);
    CHECK_NOTHROW(m.predict(f));
    f.values = Eigen::MatrixXd::Zero(8, 10);
    CHECK_THROWS_AS(m.predict(f), ShapeError);
  }

  TEST_CASE("macro F1 of a constant predictor over 25 singleton classes") {
    std::vector<int> truth, pred(25, 1);
    for (int c = 1; c <= 25; ++c) truth.push_back(c);
    auto r = metrics::classification_report(truth, pred, 25);
    CHECK(r.macro_f1 == doctest::Approx((2.0 / 26.0) / 25.0).epsilon(1e-12));
    CHECK(r.accuracy == doctest::Approx(1.0 / 25));
    CHECK(r.confusion(4, 0) == 1);
    auto masked = metrics::classification_report(truth, pred, 25, {25});
    CHECK(masked.macro_f1 == doctest::Approx((2.0 / 26.0) / 24.0).epsilon(1e-12));
  }

  TEST_CASE("tiny training run is deterministic and the saved model predicts identically") {
    auto data = tiny_data();
    auto cfg = tiny_cls();
    auto a = train_classifier(data, cfg);
    auto b = train_classifier(data, cfg);
    REQUIRE(a.log.size() == 2);
    CHECK(a.log[1].train_loss == b.log[1].train_loss);
    CHECK(a.test_predicted == b.test_predicted);
    CHECK(a.split.test.size() == 1);
    for (const auto& id : a.test_ids) CHECK(a.split.test.count(id.substr(0, id.find('_'))) == 1);

    auto dir = testutil::temp_dir("cls_model");
    a.model->save(dir / "m.ubcl");
    auto loaded = Classifier::load(dir / "m.ubcl");
    for (int i = 0; i < 3; ++i) {
      auto p = a.model->predict(data[i].features);
      auto q = loaded->predict(data[i].features);
      CHECK(p.label == q.label);
      CHECK((p.logits - q.logits).cwiseAbs().maxCoeff() < 1e-6);
    }
  }

  TEST_CASE("labels outside the class range are rejected") {
    auto data = tiny_data();
    data[0].label = 4;
    CHECK_THROWS_AS(train_classifier(data, tiny_cls()), ValidationError);
  }
}
