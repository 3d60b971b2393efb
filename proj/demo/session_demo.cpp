// Multi-turn tracking: the session manager re-extracts over the full history
// each turn and reports what changed in the belief state.

#include <iostream>
#include <memory>

#include "slotkit.hpp"

using namespace slotkit;

int main() {
  SlotLibrary library;
  library.slots.push_back({"Slot-3", "city", "City for the restaurant search", std::nullopt});
  library.slots.push_back({"Slot-9", "cuisine", "Type of food", std::nullopt});
  library.slots.push_back({"Slot-21", "time", "Time of the reservation", std::nullopt});

  // Scripted model: answers depend on how much of the dialogue it has seen.
  auto model = std::make_shared<FunctionBackend>([](const CompletionRequest& req) {
    std::string out = "'Slot-3': 'San Jose'";
    if (req.prompt.find("italian") != std::string::npos) out += ",\n'Slot-9': 'italian'";
    if (req.prompt.find("7 pm") != std::string::npos) out += ",\n'Slot-21': '7 pm'";
    return out;
  });

  SessionManager manager(model, std::make_shared<MemoryStore>());
  Session session = manager.create(library);

  const char* user_lines[] = {
      "Find me a restaurant in San Jose.",
      "Something italian would be nice.",
      "Book a table at 7 pm.",
  };
  for (const char* line : user_lines) {
    std::cout << "> " << line << "\n";
    TurnResult turn = manager.track_turn(session.id, line);
    for (const auto& [id, value] : turn.changed) std::cout << "  " << id << " = " << value << "\n";
    for (const auto& id : turn.removed) std::cout << "  " << id << " cleared\n";
  }

  std::cout << "final state:\n";
  for (const auto& [id, value] : manager.get(session.id).state.values)
    std::cout << "  " << id << " = " << value << "\n";
  return 0;
}
