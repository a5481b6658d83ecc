// Acceptance suite: runs every criterion of the invariant battery at its
// stated tolerance and prints one PASS/FAIL line per criterion.

#include <iostream>

#include "volimm/checks.hpp"

int main() {
    try {
        auto results = volimm::run_invariant_suite(std::cout);
        int failures = 0;
        for (const auto& r : results)
            if (!r.pass) ++failures;
        if (failures > 0) {
            std::cout << failures << " criterion(s) failed\n";
            return 1;
        }
        std::cout << "all criteria passed\n";
        return 0;
    } catch (const std::exception& e) {
        std::cout << "FAIL  suite aborted: " << e.what() << "\n";
        return 1;
    }
}
