#include <cstdio>

int main() {
    std::puts("srnet: pipeline CLI (subcommands pending)");
    return 0;
}
