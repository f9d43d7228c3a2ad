#include <doctest.h>

#include "helpers.hpp"
#include "ubiphysio/errors.hpp"
#include "ubiphysio/file_util.hpp"
#include "ubiphysio/language.hpp"

using namespace ubiphysio;

namespace {

std::filesystem::path golden(const char* name) { return std::filesystem::path(UBIPHYSIO_GOLDEN_DIR) / name; }

const std::vector<int> kTokens = {3, 3, 7, 511, 0, 42};
const std::string kDescription =
    "The person is doing a side bend. The trunk tilts to one side while the pelvis shifts and the knees stay locked.";

UserProfile patient() {
  UserProfile p;
  p.age = 67;
  p.pain = 4;
  p.tug = 12.5;
  return p;
}

KnowledgeBase shipped_kb() { return KnowledgeBase::load(std::filesystem::path(UBIPHYSIO_SOURCE_DIR) / "data/knowledge_base.jsonl"); }

std::vector<FinetuneInstance> ten_instances() {
  std::vector<FinetuneInstance> out;
  for (int i = 0; i < 10; ++i) {
    FinetuneInstance f;
    f.id = "i" + std::to_string(i);
    f.action_type = 1 + i;
    f.tokens = {i, i + 1, i + 2};
    f.descriptions = {"first description " + std::to_string(i), "second one", "third: \"quoted\" text"};
    out.push_back(f);
  }
  return out;
}

}  // namespace

TEST_SUITE("language") {
  TEST_CASE("instruction for side bend renders the type and motion tokens") {
    auto s = assemble_description_instruction(17, {3, 3, 7});
    CHECK(s.find("type: side bend, tokens: <motion_id_3> <motion_id_3> <motion_id_7>") != std::string::npos);
    CHECK(s.rfind(std::string(kDefaultTaskPrompt), 0) == 0);
  }

  TEST_CASE("instruction and ablation prompts match the frozen golden files") {
    CHECK(assemble_description_instruction(17, kTokens) == read_file(golden("instruction.txt")));
    auto ablation = assemble_description_instruction(std::nullopt, kTokens);
    CHECK(ablation == read_file(golden("instruction_tokens_only.txt")));
    CHECK(ablation.find("type:") == std::string::npos);
  }

  TEST_CASE("feedback prompts match the frozen golden files") {
    auto kb = shipped_kb();
    auto with = assemble_feedback_prompt(patient(), &kb.retrieve(17), kDescription);
    auto without = assemble_feedback_prompt(patient(), nullptr, kDescription);
    CHECK(with == read_file(golden("feedback.txt")));
    CHECK(without == read_file(golden("feedback_no_knowledge.txt")));
    CHECK(with.find("<knowledge>") != std::string::npos);
    CHECK(without.find("<knowledge>") == std::string::npos);
    CHECK(without.find("<user profile>\nage: 67, reported pain score: 4 (0-10)") != std::string::npos);
  }

  TEST_CASE("tokens outside the codebook are rejected") {
    CHECK_THROWS_AS(render_tokens({1, 512}), ValidationError);
    CHECK_THROWS_AS(render_tokens({-1}), ValidationError);
    CHECK(render_tokens({}).empty());
  }

  TEST_CASE("the shipped knowledge base covers all 25 actions") {
    auto kb = shipped_kb();
    CHECK(kb.size() == 25);
    CHECK(kb.complete());
    for (int a = 1; a <= 25; ++a) {
      CHECK_FALSE(kb.retrieve(a).low_demand.empty());
      CHECK_FALSE(kb.retrieve(a).high_demand.empty());
    }
    auto round = KnowledgeBase::parse(kb.to_jsonl());
    CHECK(round.retrieve(9).high_demand == kb.retrieve(9).high_demand);
  }

  TEST_CASE("missing, duplicate and out-of-range knowledge entries") {
    KnowledgeBase kb;
    kb.add({3, "a", "b"});
    CHECK_THROWS_AS(kb.retrieve(4), NotFoundError);
    CHECK_THROWS_AS(kb.add({3, "c", "d"}), ValidationError);
    CHECK_THROWS_AS(kb.add({26, "c", "d"}), ValidationError);
    CHECK_FALSE(kb.complete());
  }

  TEST_CASE("healthy users get the coach role unless a role is given") {
    auto p = patient();
    CHECK(p.effective_role() == Role::Physiotherapist);
    p.pain = 0;
    CHECK(p.effective_role() == Role::FitnessCoach);
    CHECK(assemble_feedback_prompt(p, nullptr, "x").rfind("You are now a fitness coach", 0) == 0);
    p.role = Role::Physiotherapist;
    CHECK(p.effective_role() == Role::Physiotherapist);
  }

  TEST_CASE("profile validation") {
    auto p = patient();
    p.pain = 11;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    p = patient();
    p.tug = 0;
    CHECK_THROWS_AS(p.validate(), ValidationError);
    auto j = UserProfile::from_json(R"({"age": 30, "pain": 0, "tug": 8, "role": "physiotherapist"})");
    CHECK(j.effective_role() == Role::Physiotherapist);
    CHECK_THROWS_AS(UserProfile::from_json(R"({"age": 30})"), ParseError);
  }

  TEST_CASE("export gives three records per instance and round-trips") {
    auto recs = build_finetune_records(ten_instances());
    REQUIRE(recs.size() == 30);
    CHECK(recs[0].input == recs[1].input);
    CHECK(recs[2].output == "third: \"quoted\" text");
    CHECK(finetune_from_jsonl(finetune_to_jsonl(recs)) == recs);

    auto plain = build_finetune_records(ten_instances(), false);
    CHECK(plain[0].input.find("type:") == std::string::npos);

    auto inst = ten_instances();
    inst[0].descriptions[1] = "";
    CHECK(build_finetune_records(inst).size() == 29);
    inst[1].descriptions.clear();
    CHECK_THROWS_AS(build_finetune_records(inst), ValidationError);
    CHECK(word_count("  two  words ") == 2);
  }
}
