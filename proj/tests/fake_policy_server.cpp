// Stdio policy server: fake_policy_server <valid|junk|flaky|slow|bad-hello>

#include "fake_server.hpp"

#include <iostream>

int main(int argc, char** argv) {
  const auto mode = fake::parse_mode(argc > 1 ? argv[1] : "valid");
  if (!mode) {
    std::cerr << "unknown mode\n";
    return 2;
  }
  fake::serve(
      *mode,
      []() -> std::optional<std::string> {
        std::string line;
        if (!std::getline(std::cin, line)) return std::nullopt;
        return line;
      },
      [](const std::string& line) { std::cout << line << '\n' << std::flush; });
  return 0;
}
