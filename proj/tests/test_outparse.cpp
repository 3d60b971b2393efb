#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "slotkit/outparse.hpp"
#include "slotkit/promptgen.hpp"

using namespace slotkit;

namespace {
SlotLibrary mixed_library() {
  SlotLibrary lib;
  lib.slots.push_back({"Slot-1", "", "free text", std::nullopt});
  lib.slots.push_back({"Slot-2", "", "confirm",
                       std::vector<std::string>{"Yes, go ahead", "No"}});
  lib.slots.push_back({"Slot-3", "", "more text", std::nullopt});
  return lib;
}

Conversation say(const std::string& text) {
  Conversation c;
  c.turns.push_back(user_turn(text));
  return c;
}
}  // namespace

TEST_CASE("parse_kv_line accepts quasi-dict variants") {
  using detail::parse_kv_line;
  auto kv = parse_kv_line("'Slot-5': 'long beach',");
  REQUIRE(kv);
  CHECK(kv->first == "Slot-5");
  CHECK(kv->second == "long beach");

  CHECK(parse_kv_line("'Slot-5': 'long beach'")->second == "long beach");
  CHECK(parse_kv_line("\"Slot-5\": \"long beach\"")->second == "long beach");
  CHECK(parse_kv_line("Slot-5: long beach")->second == "long beach");
  CHECK(parse_kv_line("Slot-5: long beach,")->second == "long beach");
  CHECK(parse_kv_line("  'Slot-5' : 'x'  ")->first == "Slot-5");

  // Doubled single quote unescapes.
  CHECK(parse_kv_line("'Slot-1': 'O''Brien'")->second == "O'Brien");
  // Quoted keys may be anything; bare keys must be slot ids.
  CHECK(parse_kv_line("'weird key': 'v'")->first == "weird key");
  CHECK_FALSE(parse_kv_line("weird key: v").has_value());
  CHECK_FALSE(parse_kv_line("Slot-5 is long beach").has_value());
  CHECK_FALSE(parse_kv_line("'Slot-5': 'unterminated").has_value());
  CHECK_FALSE(parse_kv_line("'Slot-5':").has_value());
  CHECK_FALSE(parse_kv_line("'Slot-5': 'x' trailing junk").has_value());
  CHECK_FALSE(parse_kv_line("").has_value());
}

TEST_CASE("parse_generation handles the canonical block") {
  auto lib = mixed_library();
  RawGeneration raw = parse_generation("'Slot-1': 'abc',\n'Slot-2': 'No'", lib);
  CHECK(raw.warnings.empty());
  REQUIRE(raw.values.size() == 2);
  CHECK(raw.values.at("Slot-1") == "abc");
  CHECK(raw.values.at("Slot-2") == "No");
}

TEST_CASE("parse_generation skips junk with line warnings") {
  auto lib = mixed_library();
  RawGeneration raw = parse_generation(
      "Here are the slots:\n'Slot-1': 'abc',\nnot parseable\n\n'Slot-3': 'xyz'", lib);
  CHECK(raw.values.size() == 2);
  REQUIRE(raw.warnings.size() == 2);
  CHECK(raw.warnings[0].where == "line 1");
  CHECK(raw.warnings[0].reason == WarningReason::UnparseableLine);
  CHECK(raw.warnings[1].where == "line 3");
}

TEST_CASE("parse_generation duplicate ids keep the last") {
  auto lib = mixed_library();
  RawGeneration raw = parse_generation("'Slot-1': 'first',\n'Slot-1': 'second'", lib);
  CHECK(raw.values.at("Slot-1") == "second");
  REQUIRE(raw.warnings.size() == 1);
  CHECK(raw.warnings[0] == ParseWarning{"Slot-1", WarningReason::DuplicateSlotKeptLast});
}

TEST_CASE("parse_generation accepts whole-text JSON objects") {
  auto lib = mixed_library();
  RawGeneration raw =
      parse_generation(R"({"Slot-1": "abc", "Slot-2": "No", "Slot-9": 42})", lib);
  CHECK(raw.values.at("Slot-1") == "abc");
  CHECK(raw.values.at("Slot-2") == "No");
  CHECK(raw.values.at("Slot-9") == "42");  // scalars stringified

  // Nested values are unusable but must not break the parse.
  raw = parse_generation(R"({"Slot-1": {"deep": 1}, "Slot-3": "ok"})", lib);
  CHECK(raw.values.count("Slot-1") == 0);
  CHECK(raw.values.at("Slot-3") == "ok");
  CHECK(raw.warnings.size() == 1);

  // Brace-wrapped quasi-dict (python repr style) parses line by line.
  raw = parse_generation("{\n'Slot-1': 'abc'\n}", lib);
  CHECK(raw.values.at("Slot-1") == "abc");
}

TEST_CASE("parse_generation is total over junk") {
  auto lib = mixed_library();
  CHECK(parse_generation("", lib).values.empty());
  CHECK_NOTHROW(parse_generation("\n\n\n", lib));
  CHECK_NOTHROW(parse_generation("::::,,,''\"\"{}[]", lib));
  CHECK_NOTHROW(parse_generation(std::string(1000, '\''), lib));
  std::string binary;
  for (int i = 0; i < 256; ++i) binary += char(i);
  CHECK_NOTHROW(parse_generation(binary, lib));
}

TEST_CASE("validate keeps substrings and drops hallucinations") {
  auto lib = mixed_library();
  Conversation convo = say("please book the grand hotel for me");
  RawGeneration raw;
  raw.values["Slot-1"] = "grand hotel";
  raw.values["Slot-3"] = "hallucinated value";
  ParseOutcome out = validate_and_normalize(raw, lib, convo);
  CHECK(out.state.size() == 1);
  CHECK(*out.state.get("Slot-1") == "grand hotel");
  CHECK(out.count(WarningReason::DroppedNotSubstring) == 1);
}

TEST_CASE("validate trims before the substring check") {
  auto lib = mixed_library();
  ParseOutcome out = validate_and_normalize(
      std::map<std::string, std::string>{{"Slot-1", "  grand hotel  "}}, lib,
      say("please book the grand hotel"));
  CHECK(*out.state.get("Slot-1") == "grand hotel");

  // Substring check is case-sensitive.
  out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-1", "Grand Hotel"}}, lib,
                               say("please book the grand hotel"));
  CHECK(out.state.empty());
}

TEST_CASE("validate maps categorical values in stages") {
  auto lib = mixed_library();
  Conversation convo = say("anything");

  // Exact: kept silently.
  auto out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-2", "No"}}, lib, convo);
  CHECK(*out.state.get("Slot-2") == "No");
  CHECK(out.warnings.empty());

  // Case-insensitive: mapped with a warning.
  out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-2", "no"}}, lib, convo);
  CHECK(*out.state.get("Slot-2") == "No");
  CHECK(out.count(WarningReason::MappedToAllowedValue) == 1);

  // Fuzzy >= 0.8: "Yes, go ahead!" is one edit away.
  out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-2", "Yes, go ahead!"}},
                               lib, convo);
  CHECK(*out.state.get("Slot-2") == "Yes, go ahead");
  CHECK(out.count(WarningReason::MappedToAllowedValue) == 1);

  // Below threshold: dropped.
  out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-2", "maybe"}}, lib, convo);
  CHECK(out.state.empty());
  CHECK(out.count(WarningReason::DroppedNoAllowedMatch) == 1);

  // Threshold is adjustable.
  out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-2", "Nope"}}, lib, convo,
                               0.5);
  CHECK(*out.state.get("Slot-2") == "No");
}

TEST_CASE("validate categorical values need no conversation support") {
  auto lib = mixed_library();
  auto out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-2", "No"}}, lib,
                                    say("the user never said it"));
  CHECK(*out.state.get("Slot-2") == "No");
}

TEST_CASE("validate drops unknown ids") {
  auto lib = mixed_library();
  auto out = validate_and_normalize(std::map<std::string, std::string>{{"Slot-99", "x"}}, lib,
                                    say("x"));
  CHECK(out.state.empty());
  REQUIRE(out.warnings.size() == 1);
  CHECK(out.warnings[0] == ParseWarning{"Slot-99", WarningReason::UnknownSlotId});
}

TEST_CASE("validated output always satisfies the state invariants") {
  auto lib = mixed_library();
  std::mt19937_64 rng(99);
  for (int i = 0; i < 300; ++i) {
    std::string text;
    for (size_t j = rng() % 60; j > 0; --j)
      text += (rng() % 6 ? char('a' + rng() % 4) : ' ');
    RawGeneration raw;
    for (size_t j = rng() % 4; j > 0; --j) {
      std::string value;
      for (size_t k1 = rng() % 8; k1 > 0; --k1) value += char('a' + rng() % 5);
      raw.values["Slot-" + std::to_string(rng() % 5)] = value;
    }
    ParseOutcome out = validate_and_normalize(raw, lib, say(text));
    CHECK(validate_state(out.state, lib).empty());
  }
}

TEST_CASE("render and parse are inverse on valid states") {
  auto lib = mixed_library();
  Conversation convo = say("alpha beta gamma O'Brien delta");
  std::mt19937_64 rng(3);
  std::vector<std::string> words = {"alpha", "beta", "gamma", "O'Brien", "delta"};
  for (int i = 0; i < 200; ++i) {
    BeliefState s;
    if (rng() % 2) s.set("Slot-1", words[rng() % words.size()]);
    if (rng() % 2) s.set("Slot-2", rng() % 2 ? "Yes, go ahead" : "No");
    if (rng() % 2) s.set("Slot-3", words[rng() % words.size()]);
    std::string block = render_output(s, lib);
    RawGeneration raw = parse_generation(block, lib);
    CHECK(raw.warnings.empty());
    ParseOutcome out = validate_and_normalize(raw, lib, convo);
    CHECK(out.state == s);
    CHECK(out.warnings.empty());
  }
}
