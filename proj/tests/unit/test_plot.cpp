#include <doctest.h>

#include <regex>

#include "helpers.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"
#include "ubiphysio/pipeline_config.hpp"
#include "ubiphysio/plot.hpp"

using namespace ubiphysio;

namespace {

// Pulls the named data-* attributes out of every element with the given tag.
std::vector<std::map<std::string, std::string>> elements(const std::string& svg, const std::string& tag) {
  std::vector<std::map<std::string, std::string>> out;
  std::regex elem("<" + tag + "\\b([^>]*)>");
  std::regex attr("data-([a-z]+)=\"([^\"]*)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), elem); it != std::sregex_iterator(); ++it) {
    std::string body = (*it)[1];
    std::map<std::string, std::string> m;
    for (auto a = std::sregex_iterator(body.begin(), body.end(), attr); a != std::sregex_iterator(); ++a)
      m[(*a)[1]] = (*a)[2];
    if (!m.empty()) out.push_back(m);
  }
  return out;
}

}  // namespace

TEST_SUITE("plot") {
  TEST_CASE("confusion CSV round trips and the heatmap carries the same counts") {
    Eigen::MatrixXi m(3, 3);
    m << 5, 1, 0,
         0, 7, 2,
         1, 0, 9;
    std::vector<std::string> labels = {"sweep", "squat", "side bend"};
    auto csv = confusion_to_csv(m, labels);
    CHECK(csv.rfind("true\\pred,sweep,squat,side bend\n", 0) == 0);
    std::vector<std::string> back_labels;
    auto back = confusion_from_csv(csv, &back_labels);
    CHECK(back == m);
    CHECK(back_labels == labels);

    auto cells = elements(confusion_svg(back, back_labels), "rect");
    REQUIRE(cells.size() == 9);
    for (const auto& c : cells) {
      int r = std::stoi(c.at("row")), k = std::stoi(c.at("col"));
      CHECK(std::stoi(c.at("value")) == m(r, k));
    }
    CHECK_THROWS_AS(confusion_from_csv("true\\pred,a,b\na,1\n"), ParseError);
  }

  TEST_CASE("curve points match the training log") {
    auto log = parse_csv("epoch,train_loss,val_macro_f1\n1,2.5,0.1\n2,1.25,0.5\n3,0.5,0.75\n");
    auto series = curves_from_csv(log, "epoch", {"train_loss", "val_macro_f1"});
    REQUIRE(series.size() == 2);
    auto pts = elements(curve_svg(series, "epoch"), "circle");
    REQUIRE(pts.size() == 6);
    for (const auto& p : pts) {
      const int col = log.column(p.at("series"));
      const int row = static_cast<int>(std::stod(p.at("x"))) - 1;
      CHECK(std::stod(p.at("y")) == doctest::Approx(log.numeric(col)[row]));
    }
    CHECK_THROWS_AS(log.column("missing"), NotFoundError);
  }

  TEST_CASE("an empty training log cannot be plotted") {
    auto empty = parse_csv("epoch,loss\n");
    CHECK_THROWS_AS(curves_from_csv(empty, "epoch", {"loss"}), ValidationError);
    CHECK_THROWS_AS(curve_svg({}, "step"), ValidationError);
  }

  TEST_CASE("CSV writer and parser agree") {
    CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{"1", "x"}, {"2.5", "y"}};
    auto back = parse_csv(write_csv(t));
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), ParseError);
  }
}

TEST_SUITE("config") {
  TEST_CASE("key=value text parses comments and blank lines") {
    auto kv = parse_kv("# comment\nseed = 4\n\nvq.steps=10\n");
    CHECK(kv.size() == 2);
    CHECK(kv.at("seed") == "4");
    CHECK(parse_kv(format_kv(kv)) == kv);
    CHECK_THROWS_AS(parse_kv("novalue\n"), ParseError);
    CHECK_THROWS_AS(kv_long("k", "3x"), ValidationError);
  }

  TEST_CASE("pipeline config rejects unknown keys") {
    CHECK_THROWS_AS(PipelineConfig::from_kv({{"vq.stpes", "3"}}), ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_kv({{"colour", "red"}}), ValidationError);
    CHECK_THROWS_AS(PipelineConfig::from_kv({{"metrics.bleu_mode", "fancy"}}), ValidationError);
  }

  TEST_CASE("overrides beat the file and the root seed propagates") {
    auto dir = testutil::temp_dir("config");
    write_file(dir / "run.kv", "seed = 5\nvq.steps = 100\ncls.epochs = 3\n");
    auto c = load_pipeline_config(dir / "run.kv", {{"vq.steps", "7"}, {"cls.seed", "99"}});
    CHECK(c.vq.steps == 7);
    CHECK(c.cls.epochs == 3);
    CHECK(c.vq.seed == 5);
    CHECK(c.cls.seed == 99);

    auto full = PipelineConfig::from_kv({{"vq.preset", "full"}, {"vq.batch", "8"}});
    CHECK(full.vq.batch == 8);
    CHECK(full.vq.width == VqConfig::full().width);
  }

  TEST_CASE("to_kv round trips") {
    auto c = PipelineConfig::from_kv({{"seed", "3"}, {"metrics.bleu_mode", "sentence"}, {"llm.timeout_s", "12"}});
    auto again = PipelineConfig::from_kv(c.to_kv());
    CHECK(again.to_kv() == c.to_kv());
    CHECK(again.bleu_mode == metrics::BleuMode::SentenceAverage);
  }
}
