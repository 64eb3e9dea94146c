#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "aplm/cli_config.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    const aplm::RunConfig config = aplm::parse_config(args);
    return aplm::run_command(config);
  } catch (const aplm::HelpRequested& help) {
    std::cout << help.text;
    return aplm::kExitOk;
  } catch (const aplm::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return aplm::kExitUsage;
  } catch (const aplm::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return aplm::kExitData;
  } catch (const aplm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return aplm::kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
