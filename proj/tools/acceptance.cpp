#include "simfilm/acceptance.hpp"

#include <cstdio>
#include <cstdlib>
#include <string>

int main(int argc, char** argv) {
    std::vector<int> ids;
    for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
    int failed = 0;
    for (const auto& r : simfilm::run_acceptance(ids)) {
        std::printf("%s\n", simfilm::format_line(r).c_str());
        std::fflush(stdout);
        failed += !r.pass;
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
