#include <cstdio>

int main() {
    std::puts("renv: subcommands pending");
    return 0;
}
