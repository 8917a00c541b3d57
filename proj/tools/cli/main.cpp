#include <iostream>

#include "plan.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  auto parsed = seglens::cli::parse_args(args);
  if (auto* exit = std::get_if<seglens::cli::ParseExit>(&parsed)) {
    (exit->status == 0 ? std::cout : std::cerr) << exit->text;
    return exit->status;
  }
  return seglens::cli::execute(std::get<seglens::cli::RunPlan>(parsed));
}
