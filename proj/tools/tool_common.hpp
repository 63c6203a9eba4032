#pragma once

#include <CLI11.hpp>
#include <cstdio>
#include <functional>
#include <iostream>

#include "dcs/error.hpp"

namespace dcs::tools {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPort = 3;
inline constexpr int kExitProtocol = 4;

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
      return kExitConfig;
    case ErrorCode::PortConflict:
      return kExitPort;
    default:
      return kExitProtocol;
  }
}

// Parses argv and runs body, turning errors into the documented exit codes.
inline int run_tool(CLI::App& app, int argc, char** argv, const std::function<int()>& body) {
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }
  try {
    return body();
  } catch (const Error& e) {
    std::cerr << app.get_name() << ": " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << app.get_name() << ": " << e.what() << "\n";
    return kExitFailed;
  }
}

}  // namespace dcs::tools
