#pragma once

// Shared plumbing for the test binaries: fixture paths, the reference
// transcript format, temp dirs, and synthetic corpus generators.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <slotkit.hpp>

#ifndef SLOTKIT_SOURCE_DIR
#define SLOTKIT_SOURCE_DIR "."
#endif

namespace testsupport {

inline std::string source_dir() {
  if (const char* env = std::getenv("SLOTKIT_SOURCE_DIR")) return env;
  return SLOTKIT_SOURCE_DIR;
}

inline std::string fixtures_dir() { return source_dir() + "/tests/fixtures"; }
inline std::string data_dir() { return source_dir() + "/data"; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    static std::atomic<unsigned> counter{0};
    path = base / ("slotkit_test_" + std::to_string(::getpid()) + "_" +
                   std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

// Reference transcript fixtures: "Input Prompt:\n\n<prompt>\n\nOutput:\n<output>".
struct FigFixture {
  std::string prompt;  // exact bytes between the markers
  std::string output;  // exact bytes after "Output:\n", trailing newline stripped
  slotkit::SlotLibrary library;
  slotkit::Conversation conversation;
};

inline FigFixture parse_fig_fixture(const std::string& path) {
  std::string content = read_file(path);
  const std::string head = "Input Prompt:\n\n";
  const std::string mid = "\n\nOutput:\n";
  if (content.rfind(head, 0) != 0) throw std::runtime_error(path + ": missing Input Prompt header");
  size_t split = content.find(mid);
  if (split == std::string::npos) throw std::runtime_error(path + ": missing Output marker");

  FigFixture fig;
  fig.prompt = content.substr(head.size(), split - head.size());
  fig.output = content.substr(split + mid.size());
  while (!fig.output.empty() && fig.output.back() == '\n') fig.output.pop_back();

  // Re-derive the structured record from the prompt text.
  const std::string lib_tag = "<slot library>\n";
  const std::string conv_tag = "\n\n<conversation>";
  size_t lib_at = fig.prompt.find(lib_tag);
  size_t conv_at = fig.prompt.find(conv_tag);
  if (lib_at == std::string::npos || conv_at == std::string::npos)
    throw std::runtime_error(path + ": prompt missing library/conversation tags");

  std::string lib_block = fig.prompt.substr(lib_at + lib_tag.size(),
                                            conv_at - lib_at - lib_tag.size());
  std::istringstream lib_in(lib_block);
  std::string line;
  while (std::getline(lib_in, line)) {
    size_t colon = line.find(": ");
    if (line.rfind("Slot-", 0) != 0 || colon == std::string::npos)
      throw std::runtime_error(path + ": bad slot line: " + line);
    slotkit::SlotSpec slot;
    slot.id = line.substr(0, colon);
    slot.description = line.substr(colon + 2);  // verbatim, trailing spaces included
    if (slotkit::description_has_allowed_clause(slot.description))
      slot.allowed_values = slotkit::parse_allowed_values(slot.description);
    fig.library.slots.push_back(std::move(slot));
  }

  std::string conv_block = fig.prompt.substr(conv_at + conv_tag.size());
  if (!conv_block.empty() && conv_block.front() == '\n') conv_block.erase(0, 1);
  std::istringstream conv_in(conv_block);
  while (std::getline(conv_in, line)) {
    if (line.rfind("[USER] ", 0) == 0) {
      fig.conversation.turns.push_back(slotkit::user_turn(line.substr(7)));
    } else if (line.rfind("[SYSTEM] ", 0) == 0) {
      fig.conversation.turns.push_back(slotkit::system_turn(line.substr(9)));
    } else {
      if (fig.conversation.turns.empty())
        throw std::runtime_error(path + ": conversation continuation before any turn");
      fig.conversation.turns.back().text += "\n" + line;
    }
  }
  return fig;
}

// Gold state parsed out of the fixture's output block.
inline std::map<std::string, std::string> fig_gold(const FigFixture& fig) {
  auto raw = slotkit::parse_generation(fig.output, fig.library);
  return raw.values;
}

// A synthetic SGD-format corpus: two services, three user turns per rides
// dialogue, every annotated value verbatim in some utterance so the oracle
// closure holds with no flags.
inline void write_synthetic_sgd(const std::string& dir, size_t n_dialogues,
                                std::uint64_t seed = 17) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  static const std::vector<std::string> kCities{
      "arlington",  "boulder",   "camden",    "dover",     "eugene",    "fairfield",
      "galveston",  "hartford",  "irvine",    "juneau",    "kenosha",   "laredo",
      "medford",    "norwalk",   "olympia",   "pasadena",  "quincy",    "roswell",
      "salem",      "tucson",    "utica",     "ventura",   "waco",      "yonkers",
      "new haven",  "santa fe",  "palo alto", "baton rouge"};
  static const std::vector<std::string> kTimes{
      "7:15 am", "8:40 am", "9:05 am", "11:30 am", "1:10 pm",
      "2:45 pm", "4:20 pm", "6:55 pm", "9:25 pm",  "10:50 pm"};
  static const std::vector<std::string> kEvents{
      "the jazz festival", "a pottery workshop", "the science fair",   "a film retrospective",
      "the food truck rally", "a chamber concert", "the comic convention", "a poetry reading"};
  static const std::vector<std::string> kDates{
      "March 3rd", "April 12th", "May 9th",     "June 21st", "July 4th",
      "August 18th", "September 2nd", "October 30th", "next Friday", "this Sunday"};

  {
    std::ofstream schema(dir + "/schema.json", std::ios::binary);
    schema << R"([
  {
    "service_name": "rides_1",
    "slots": [
      {"name": "pickup", "description": "Place where the ride starts", "is_categorical": false, "possible_values": []},
      {"name": "dropoff", "description": "Place where the ride ends", "is_categorical": false, "possible_values": []},
      {"name": "ride_time", "description": "Time the ride should arrive", "is_categorical": false, "possible_values": []},
      {"name": "num_seats", "description": "Number of seats in the car", "is_categorical": true, "possible_values": ["1", "2", "3", "4"]}
    ]
  },
  {
    "service_name": "events_2",
    "slots": [
      {"name": "event_name", "description": "Name of the event to attend", "is_categorical": false, "possible_values": []},
      {"name": "event_city", "description": "City where the event takes place", "is_categorical": false, "possible_values": []},
      {"name": "event_date", "description": "Date of the event", "is_categorical": false, "possible_values": []}
    ]
  }
])";
    schema << '\n';
  }

  std::mt19937_64 rng(seed);
  auto pick = [&rng](const std::vector<std::string>& pool) -> const std::string& {
    return pool[rng() % pool.size()];
  };

  slotkit::ojson dialogues = slotkit::ojson::array();
  for (size_t d = 0; d < n_dialogues; ++d) {
    slotkit::ojson dialogue;
    char id[32];
    std::snprintf(id, sizeof id, "%zu_%05zu", 1 + d % 9, d);
    dialogue["dialogue_id"] = id;

    bool rides = d % 3 != 2;
    if (rides) {
      const std::string& pickup = pick(kCities);
      const std::string& dropoff = pick(kCities);
      const std::string& when = pick(kTimes);
      std::string seats = std::to_string(1 + rng() % 4);
      std::string seats2 = std::to_string(1 + rng() % 4);
      dialogue["services"] = {"rides_1"};
      slotkit::ojson turns = slotkit::ojson::array();

      auto user = [&](const std::string& text, slotkit::ojson slot_values) {
        slotkit::ojson t;
        t["speaker"] = "USER";
        t["utterance"] = text;
        slotkit::ojson frame;
        frame["service"] = "rides_1";
        frame["state"]["slot_values"] = std::move(slot_values);
        t["frames"] = slotkit::ojson::array({std::move(frame)});
        turns.push_back(std::move(t));
      };
      auto system = [&](const std::string& text) {
        slotkit::ojson t;
        t["speaker"] = "SYSTEM";
        t["utterance"] = text;
        t["frames"] = slotkit::ojson::array();
        turns.push_back(std::move(t));
      };

      user("I need a ride from " + pickup + " to " + dropoff + ".",
           {{"pickup", {pickup}}, {"dropoff", {dropoff}}});
      system("Of course. When should the car arrive, and how many seats?");
      user("Pick me up at " + when + ", " + seats + " seats please.",
           {{"pickup", {pickup}},
            {"dropoff", {dropoff}},
            {"ride_time", {when}},
            {"num_seats", {seats}}});
      system("Booked a " + seats + " seat car for " + when + ".");
      user("Actually, make that " + seats2 + " seats.",
           {{"pickup", {pickup}},
            {"dropoff", {dropoff}},
            {"ride_time", {when}},
            {"num_seats", {seats2}}});
      dialogue["turns"] = std::move(turns);
    } else {
      const std::string& event = pick(kEvents);
      const std::string& city = pick(kCities);
      const std::string& date = pick(kDates);
      dialogue["services"] = {"events_2"};
      slotkit::ojson turns = slotkit::ojson::array();

      slotkit::ojson t1;
      t1["speaker"] = "USER";
      t1["utterance"] = "Can you find tickets for " + event + "?";
      slotkit::ojson f1;
      f1["service"] = "events_2";
      f1["state"]["slot_values"] = {{"event_name", {event}}};
      t1["frames"] = slotkit::ojson::array({std::move(f1)});
      turns.push_back(std::move(t1));

      slotkit::ojson t2;
      t2["speaker"] = "SYSTEM";
      t2["utterance"] = "Sure. Which city, and on what date?";
      t2["frames"] = slotkit::ojson::array();
      turns.push_back(std::move(t2));

      slotkit::ojson t3;
      t3["speaker"] = "USER";
      t3["utterance"] = "In " + city + " on " + date + ".";
      slotkit::ojson f3;
      f3["service"] = "events_2";
      f3["state"]["slot_values"] = {
          {"event_name", {event}}, {"event_city", {city}}, {"event_date", {date}}};
      t3["frames"] = slotkit::ojson::array({std::move(f3)});
      turns.push_back(std::move(t3));
      dialogue["turns"] = std::move(turns);
    }
    dialogues.push_back(std::move(dialogue));
  }

  std::ofstream out(dir + "/dialogues_001.json", std::ios::binary);
  out << dialogues.dump(1) << '\n';
}

// Records with exactly `k` filled free-text slots each; used for the
// corruption arithmetic and eval determinism checks.
inline std::vector<slotkit::PromptRecord> make_k_slot_records(size_t n, size_t k = 5) {
  static const char* kWords[] = {"amber",  "birch",  "cedar",  "dahlia", "elder",
                                 "fennel", "garnet", "hazel",  "indigo", "juniper"};
  std::vector<slotkit::PromptRecord> records;
  records.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    slotkit::PromptRecord r;
    std::string sentence = "Please note";
    for (size_t s = 0; s < k; ++s) {
      std::string value = std::string(kWords[(i + s) % 10]) + "-" + std::to_string(i * k + s);
      slotkit::SlotSpec slot;
      slot.id = slotkit::make_slot_id(int(s * 101 + 7) % 1000);
      slot.description = "value number " + std::to_string(s) + " of the form";
      r.library.slots.push_back(slot);
      r.state[slot.id] = {value};
      sentence += (s == 0 ? " " : ", ") + value;
    }
    r.conversation.turns.push_back(slotkit::user_turn(sentence + "."));
    r.category = slotkit::Category::Realistic;
    r.dialogue_id = "k" + std::to_string(k) + "_" + std::to_string(i);
    r.prompt = slotkit::render_prompt(r.library, r.conversation).prompt;
    r.gold_output = slotkit::render_output(r.gold_state(), r.library);
    records.push_back(std::move(r));
  }
  return records;
}

inline std::uint64_t hash_records(const std::vector<slotkit::PromptRecord>& records) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& r : records) {
    std::string s = slotkit::record_to_json(r).dump();
    s += '\x1e';
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace testsupport
