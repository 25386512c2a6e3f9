// Acceptance gate: runs the full verification suite and prints one
// pass/fail line per criterion. Exits nonzero on any failure.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "rfim/verify.hpp"

int main(int argc, char** argv) {
    rfim::VerifyLevel level = rfim::VerifyLevel::Full;
    if (argc > 1 && std::strcmp(argv[1], "--quick") == 0) level = rfim::VerifyLevel::Quick;
    const unsigned hw = std::thread::hardware_concurrency();
    const int threads = hw == 0 ? 1 : static_cast<int>(hw);
    auto results = rfim::run_verification(level, threads);
    return rfim::print_verification(results) ? EXIT_SUCCESS : EXIT_FAILURE;
}
