#pragma once

namespace protoflow {

// Exit codes: 0 success, 1 invariant/bound violation, 2 usage/config error,
// 3 numeric failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitViolation = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

// Entry point shared by the `protoflow` binary and the test suite.
int cli_main(int argc, const char* const* argv);

}  // namespace protoflow
