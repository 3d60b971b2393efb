// Render a prompt for a toy cab-booking library, answer it with a scripted
// backend, and print the validated belief state.

#include <iostream>

#include "slotkit.hpp"

using namespace slotkit;

int main() {
  SlotLibrary library;
  library.slots.push_back({"Slot-12", "destination", "City where the cab is going to", std::nullopt});
  library.slots.push_back({"Slot-7", "seats", "Number of seats",
                           std::vector<std::string>{"1", "2", "3", "4"}});

  Conversation conversation;
  conversation.turns.push_back(user_turn("I need a cab to Oakland for two people."));

  RenderedPrompt rendered = render_prompt(library, conversation);
  std::cout << rendered.prompt << "\n\n---\n\n";

  // Stand-in for a real model: any Backend subclass works here.
  FunctionBackend model([](const CompletionRequest&) {
    return std::string("'Slot-12': 'Oakland',\n'Slot-7': '2'");
  });

  ExtractResult result = extract(library, conversation, model);
  for (const auto& [id, value] : result.outcome.state.values)
    std::cout << id << " = " << value << "\n";
  for (const auto& w : result.outcome.warnings)
    std::cout << "warning: " << w.where << ": " << warning_reason_name(w.reason) << "\n";
  return 0;
}
